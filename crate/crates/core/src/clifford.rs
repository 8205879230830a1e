//! Clifford modules: spinors of F, the exterior algebra of F⊥* with its two
//! Clifford actions, their graded tensor product, and the φ(F⊥) bundles.
//!
//! Algebraic relations are checked on Gaussian-integer matrices. Connection
//! lifts involve square roots (Sym^k normalisation) and are done in f64.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::Error;

pub type C64 = Complex<f64>;
pub type GaussInt = Complex<i64>;

/// Dense square matrix over the Gaussian integers.
#[derive(Clone, PartialEq, Eq)]
pub struct GaussMat {
    dim: usize,
    data: Vec<GaussInt>,
}

impl fmt::Debug for GaussMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "GaussMat {}x{}", self.dim, self.dim)?;
        for r in 0..self.dim {
            let row: Vec<String> = (0..self.dim).map(|c| format!("{}", self[(r, c)])).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl std::ops::Index<(usize, usize)> for GaussMat {
    type Output = GaussInt;
    fn index(&self, (r, c): (usize, usize)) -> &GaussInt {
        &self.data[r * self.dim + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for GaussMat {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut GaussInt {
        &mut self.data[r * self.dim + c]
    }
}

const ZERO: GaussInt = Complex { re: 0, im: 0 };
const ONE: GaussInt = Complex { re: 1, im: 0 };
const I: GaussInt = Complex { re: 0, im: 1 };

impl GaussMat {
    pub fn zeros(dim: usize) -> Self {
        GaussMat { dim, data: vec![ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_rows(rows: &[&[GaussInt]]) -> Self {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim);
            for (c, v) in row.iter().enumerate() {
                m[(r, c)] = *v;
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scale(&self, s: GaussInt) -> Self {
        GaussMat { dim: self.dim, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn kron(&self, o: &GaussMat) -> Self {
        let d = self.dim * o.dim;
        let mut m = Self::zeros(d);
        for a in 0..self.dim {
            for b in 0..self.dim {
                let s = self[(a, b)];
                if s == ZERO {
                    continue;
                }
                for c in 0..o.dim {
                    for e in 0..o.dim {
                        m[(a * o.dim + c, b * o.dim + e)] = s * o[(c, e)];
                    }
                }
            }
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.dim);
        for r in 0..self.dim {
            for c in 0..self.dim {
                m[(c, r)] = self[(r, c)].conj();
            }
        }
        m
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == ZERO)
    }

    pub fn trace(&self) -> GaussInt {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn to_c64(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.dim, self.dim, |r, c| {
            let v = self[(r, c)];
            C64::new(v.re as f64, v.im as f64)
        })
    }

    /// Anticommutator `AB + BA`.
    pub fn anti(&self, o: &GaussMat) -> Self {
        &(self * o) + &(o * self)
    }

    /// Commutator `AB − BA`.
    pub fn comm(&self, o: &GaussMat) -> Self {
        &(self * o) - &(o * self)
    }
}

impl Mul for &GaussMat {
    type Output = GaussMat;
    fn mul(self, o: &GaussMat) -> GaussMat {
        assert_eq!(self.dim, o.dim);
        let d = self.dim;
        let mut m = GaussMat::zeros(d);
        for r in 0..d {
            for k in 0..d {
                let a = self[(r, k)];
                if a == ZERO {
                    continue;
                }
                for c in 0..d {
                    m.data[r * d + c] += a * o.data[k * d + c];
                }
            }
        }
        m
    }
}

impl Add for &GaussMat {
    type Output = GaussMat;
    fn add(self, o: &GaussMat) -> GaussMat {
        GaussMat { dim: self.dim, data: self.data.iter().zip(&o.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &GaussMat {
    type Output = GaussMat;
    fn sub(self, o: &GaussMat) -> GaussMat {
        GaussMat { dim: self.dim, data: self.data.iter().zip(&o.data).map(|(a, b)| a - b).collect() }
    }
}

impl Neg for &GaussMat {
    type Output = GaussMat;
    fn neg(self) -> GaussMat {
        self.scale(-ONE)
    }
}

fn pauli() -> [GaussMat; 4] {
    let id = GaussMat::identity(2);
    let x = GaussMat::from_rows(&[&[ZERO, ONE], &[ONE, ZERO]]);
    let y = GaussMat::from_rows(&[&[ZERO, -I], &[I, ZERO]]);
    let z = GaussMat::from_rows(&[&[ONE, ZERO], &[ZERO, -ONE]]);
    [id, x, y, z]
}

/// `(−i)^{k}` as a Gaussian integer.
fn minus_i_pow(k: usize) -> GaussInt {
    [ONE, -I, -ONE, I][k % 4]
}

/// Spinor module of F: `c(f_i)² = −1`, skew-adjoint.
#[derive(Clone, Debug)]
pub struct SpinRep {
    pub p: usize,
    pub gamma: Vec<GaussMat>,
    pub grading: GaussMat,
}

pub fn build_spin_rep(p: usize) -> Result<SpinRep, Error> {
    if p % 2 != 0 || p == 0 || p > 8 {
        return Err(Error::Dimension(format!("spinor module needs even 2 <= p <= 8, got {p}")));
    }
    let m = p / 2;
    let [id, x, y, z] = pauli();
    let chain = |k: usize, mid: &GaussMat| {
        let mut acc = GaussMat::identity(1);
        for j in 0..m {
            let f = match j.cmp(&k) {
                std::cmp::Ordering::Less => &z,
                std::cmp::Ordering::Equal => mid,
                std::cmp::Ordering::Greater => &id,
            };
            acc = acc.kron(f);
        }
        acc
    };
    let mut gamma = Vec::with_capacity(p);
    for k in 0..m {
        // Hermitian Jordan–Wigner generators times i give c² = −1
        gamma.push(chain(k, &x).scale(I));
        gamma.push(chain(k, &y).scale(I));
    }
    let mut prod = GaussMat::identity(1 << m);
    for g in &gamma {
        prod = &prod * g;
    }
    let grading = prod.scale(minus_i_pow(p * (p + 1) / 2));
    Ok(SpinRep { p, gamma, grading })
}

/// Exterior algebra `Λ(R^q)` with `c = ext − int`, `ĉ = ext + int`, and τ.
#[derive(Clone, Debug)]
pub struct ExtRep {
    pub q: usize,
    pub ext: Vec<GaussMat>,
    pub int: Vec<GaussMat>,
    pub c: Vec<GaussMat>,
    pub c_hat: Vec<GaussMat>,
    pub tau: GaussMat,
}

pub fn build_ext_rep(q: usize) -> Result<ExtRep, Error> {
    if q % 2 != 0 || q == 0 || q > 6 {
        return Err(Error::Dimension(format!("exterior module needs even 2 <= q <= 6, got {q}")));
    }
    let dim = 1usize << q;
    let mut ext = Vec::with_capacity(q);
    for s in 0..q {
        let mut m = GaussMat::zeros(dim);
        for mask in 0..dim {
            if mask & (1 << s) == 0 {
                let below = (mask & ((1 << s) - 1)).count_ones();
                let sign = if below % 2 == 0 { ONE } else { -ONE };
                m[(mask | (1 << s), mask)] = sign;
            }
        }
        ext.push(m);
    }
    let int: Vec<GaussMat> = ext.iter().map(|e| e.adjoint()).collect();
    let c: Vec<GaussMat> = ext.iter().zip(&int).map(|(e, i)| e - i).collect();
    let c_hat: Vec<GaussMat> = ext.iter().zip(&int).map(|(e, i)| e + i).collect();
    let mut prod = GaussMat::identity(dim);
    for m in &c {
        prod = &prod * m;
    }
    let tau = prod.scale(minus_i_pow(q * (q + 1) / 2));
    Ok(ExtRep { q, ext, int, c, c_hat, tau })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhiKind {
    Ext,
    Sym,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhiTerm {
    pub kind: PhiKind,
    pub k: usize,
    pub mult: usize,
}

/// Direct sum of `Λ^k(F⊥)` and `Sym^k(F⊥)` with multiplicities; empty means
/// the trivial line.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhiBundleSpec {
    pub terms: Vec<PhiTerm>,
}

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Occupation vectors of total degree `k` in `q` modes, lexicographic.
fn occupations(q: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(q: usize, k: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == q - 1 {
            prefix.push(k);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for a in (0..=k).rev() {
            prefix.push(a);
            rec(q, k - a, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if q == 0 {
        if k == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(q, k, &mut Vec::new(), &mut out);
    out
}

impl PhiBundleSpec {
    pub fn trivial() -> Self {
        PhiBundleSpec { terms: Vec::new() }
    }

    pub fn single(kind: PhiKind, k: usize) -> Self {
        PhiBundleSpec { terms: vec![PhiTerm { kind, k, mult: 1 }] }
    }

    /// `F⊥` itself.
    pub fn normal() -> Self {
        Self::single(PhiKind::Ext, 1)
    }

    fn effective(&self) -> Vec<PhiTerm> {
        if self.terms.is_empty() {
            vec![PhiTerm { kind: PhiKind::Ext, k: 0, mult: 1 }]
        } else {
            self.terms.clone()
        }
    }

    pub fn term_rank(t: &PhiTerm, q: usize) -> usize {
        match t.kind {
            PhiKind::Ext => binom(q, t.k),
            PhiKind::Sym => binom(q + t.k - 1, t.k),
        }
    }

    pub fn rank(&self, q: usize) -> usize {
        self.effective().iter().map(|t| t.mult * Self::term_rank(t, q)).sum()
    }

    pub fn is_trivial(&self) -> bool {
        self.effective().iter().all(|t| t.k == 0)
    }

    pub fn label(&self) -> String {
        if self.terms.is_empty() {
            return "trivial".into();
        }
        self.terms
            .iter()
            .map(|t| {
                let s = match t.kind {
                    PhiKind::Ext => "ext",
                    PhiKind::Sym => "sym",
                };
                if t.mult == 1 {
                    format!("{s}{}", t.k)
                } else {
                    format!("{}{s}{}", t.mult, t.k)
                }
            })
            .collect::<Vec<_>>()
            .join("+")
    }

    /// Derivation lift of `L` (q×q, `L e_s = Σ_t L[t][s] e_t`) to φ.
    pub fn lift(&self, l: &DMatrix<f64>) -> DMatrix<f64> {
        let q = l.nrows();
        let r = self.rank(q);
        let mut out = DMatrix::zeros(r, r);
        let mut off = 0;
        for t in self.effective() {
            let block = match t.kind {
                PhiKind::Ext => lift_ext(l, t.k),
                PhiKind::Sym => lift_sym(l, t.k),
            };
            let b = block.nrows();
            for _ in 0..t.mult {
                out.view_mut((off, off), (b, b)).copy_from(&block);
                off += b;
            }
        }
        out
    }
}

/// Derivation lift to `Λ^k`, basis of sorted index masks.
pub fn lift_ext(l: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let q = l.nrows();
    let masks: Vec<usize> = (0..1usize << q).filter(|m| m.count_ones() as usize == k).collect();
    let pos = |m: usize| masks.iter().position(|&x| x == m).unwrap();
    let mut out = DMatrix::zeros(masks.len(), masks.len());
    for (col, &m) in masks.iter().enumerate() {
        for s in 0..q {
            if m & (1 << s) == 0 {
                continue;
            }
            // int_s then ext_t
            let sign_s = if (m & ((1 << s) - 1)).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            let rest = m & !(1 << s);
            for t in 0..q {
                let v = l[(t, s)];
                if v == 0.0 || rest & (1 << t) != 0 {
                    continue;
                }
                let sign_t = if (rest & ((1 << t) - 1)).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                out[(pos(rest | (1 << t)), col)] += v * sign_s * sign_t;
            }
        }
    }
    out
}

/// Derivation lift to `Sym^k` in the orthonormal basis `h^n / sqrt(n!)`.
pub fn lift_sym(l: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let q = l.nrows();
    let occ = occupations(q, k);
    let pos = |o: &Vec<usize>| occ.iter().position(|x| x == o).unwrap();
    let mut out = DMatrix::zeros(occ.len(), occ.len());
    for (col, n) in occ.iter().enumerate() {
        for s in 0..q {
            if n[s] == 0 {
                continue;
            }
            for t in 0..q {
                let v = l[(t, s)];
                if v == 0.0 {
                    continue;
                }
                let mut m = n.clone();
                m[s] -= 1;
                let amp = (n[s] as f64 * (m[t] + 1) as f64).sqrt();
                m[t] += 1;
                out[(pos(&m), col)] += v * amp;
            }
        }
    }
    out
}

/// `S(F) ⊗̂ Λ(F⊥*) ⊗ φ(F⊥)` with the lifted Clifford actions.
///
/// `c(f_i) = γ_i ⊗ 1 ⊗ 1`, `c(h_s) = Γ_F ⊗ c_s ⊗ 1`, `ĉ(h_s) = 1 ⊗ ĉ_s ⊗ 1`;
/// the total grading is `Γ_F ⊗ τ ⊗ 1`.
#[derive(Clone, Debug)]
pub struct GradedFiber {
    pub spin: SpinRep,
    pub ext: ExtRep,
    pub phi: PhiBundleSpec,
    pub dim_spin: usize,
    pub dim_ext: usize,
    pub dim_phi: usize,
    pub c_f: Vec<GaussMat>,
    pub c_h: Vec<GaussMat>,
    pub c_hat_h: Vec<GaussMat>,
    pub grading: GaussMat,
}

pub fn graded_tensor(spin: SpinRep, ext: ExtRep, phi: PhiBundleSpec) -> GradedFiber {
    let dim_spin = spin.grading.dim();
    let dim_ext = ext.tau.dim();
    let dim_phi = phi.rank(ext.q);
    let ids = GaussMat::identity(dim_spin);
    let ide = GaussMat::identity(dim_ext);
    let idp = GaussMat::identity(dim_phi);
    let c_f = spin.gamma.iter().map(|g| g.kron(&ide).kron(&idp)).collect();
    let c_h = ext.c.iter().map(|c| spin.grading.kron(c).kron(&idp)).collect();
    let c_hat_h = ext.c_hat.iter().map(|c| ids.kron(c).kron(&idp)).collect();
    let grading = spin.grading.kron(&ext.tau).kron(&idp);
    GradedFiber { spin, ext, phi, dim_spin, dim_ext, dim_phi, c_f, c_h, c_hat_h, grading }
}

impl GradedFiber {
    pub fn new(p: usize, q: usize, phi: PhiBundleSpec) -> Result<Self, Error> {
        Ok(graded_tensor(build_spin_rep(p)?, build_ext_rep(q)?, phi))
    }

    pub fn dim(&self) -> usize {
        self.dim_spin * self.dim_ext * self.dim_phi
    }

    pub fn p(&self) -> usize {
        self.spin.p
    }

    pub fn q(&self) -> usize {
        self.ext.q
    }

    /// Lifted Clifford action of frame vector `a` (F first, then F⊥).
    pub fn c(&self, a: usize) -> &GaussMat {
        if a < self.p() {
            &self.c_f[a]
        } else {
            &self.c_h[a - self.p()]
        }
    }

    /// Dimensions of the even and odd parts.
    pub fn parity_dims(&self) -> (usize, usize) {
        let tr = self.grading.trace().re;
        let d = self.dim() as i64;
        (((d + tr) / 2) as usize, ((d - tr) / 2) as usize)
    }

    /// Dimensions of `S±(F) ⊗ Λ±` as `[++, −−, +−, −+]`.
    pub fn block_dims(&self) -> [usize; 4] {
        let split = |m: &GaussMat| {
            let tr = m.trace().re;
            let d = m.dim() as i64;
            (((d + tr) / 2) as usize, ((d - tr) / 2) as usize)
        };
        let (sp, sm) = split(&self.spin.grading);
        let (lp, lm) = split(&self.ext.tau);
        let r = self.dim_phi;
        [sp * lp * r, sm * lm * r, sp * lm * r, sm * lp * r]
    }

    /// Spin lift `¼ Σ_ij A[j][i] c(f_i) c(f_j)` of a skew `p×p` matrix with
    /// `∇ f_i = Σ_j A[j][i] f_j`, acting on the full fiber.
    pub fn lift_spin(&self, a: &DMatrix<f64>) -> DMatrix<C64> {
        let p = self.p();
        let d = self.dim();
        let mut out = DMatrix::zeros(d, d);
        for i in 0..p {
            for j in 0..p {
                let v = a[(j, i)];
                if v != 0.0 {
                    out += (&self.c_f[i] * &self.c_f[j]).to_c64() * C64::new(0.25 * v, 0.0);
                }
            }
        }
        out
    }

    /// Derivation lift of a skew `q×q` matrix to `Λ(F⊥*) ⊗ φ`, with
    /// `∇ h_s = Σ_t L[t][s] h_t`.
    pub fn lift_normal(&self, l: &DMatrix<f64>) -> DMatrix<C64> {
        let ids = DMatrix::<f64>::identity(self.dim_spin, self.dim_spin);
        let ide = DMatrix::<f64>::identity(self.dim_ext, self.dim_ext);
        let idp = DMatrix::<f64>::identity(self.dim_phi, self.dim_phi);
        let lam = lift_ext_full(l);
        let on_ext = ids.kronecker(&lam).kronecker(&idp);
        let on_phi = ids.kronecker(&ide).kronecker(&self.phi.lift(l));
        (on_ext + on_phi).map(|v| C64::new(v, 0.0))
    }

    /// Lift of `R^φ` only: derivation on the φ factor.
    pub fn lift_phi(&self, l: &DMatrix<f64>) -> DMatrix<C64> {
        let ids = DMatrix::<f64>::identity(self.dim_spin, self.dim_spin);
        let ide = DMatrix::<f64>::identity(self.dim_ext, self.dim_ext);
        ids.kronecker(&ide).kronecker(&self.phi.lift(l)).map(|v| C64::new(v, 0.0))
    }
}

/// Derivation lift to the full exterior algebra.
pub fn lift_ext_full(l: &DMatrix<f64>) -> DMatrix<f64> {
    let q = l.nrows();
    let dim = 1usize << q;
    let mut out = DMatrix::zeros(dim, dim);
    // block diagonal over degree, same masks ordering as the ExtRep basis
    for k in 0..=q {
        let masks: Vec<usize> = (0..dim).filter(|m| m.count_ones() as usize == k).collect();
        let b = lift_ext(l, k);
        for (i, &mi) in masks.iter().enumerate() {
            for (j, &mj) in masks.iter().enumerate() {
                out[(mi, mj)] = b[(i, j)];
            }
        }
    }
    out
}

/// All exact algebra checks for one `(p, q)` pair, as `(name, passed)`.
pub fn algebra_checks(p: usize, q: usize) -> Result<Vec<(String, bool)>, Error> {
    let sr = build_spin_rep(p)?;
    let er = build_ext_rep(q)?;
    let mut out = Vec::new();
    let ids = GaussMat::identity(sr.grading.dim());
    let ide = GaussMat::identity(er.tau.dim());
    let delta = |i: usize, j: usize, id: &GaussMat, s: i64| if i == j { id.scale(Complex::new(2 * s, 0)) } else { GaussMat::zeros(id.dim()) };

    let mut ok = true;
    for i in 0..p {
        for j in 0..p {
            ok &= sr.gamma[i].anti(&sr.gamma[j]) == delta(i, j, &ids, -1);
        }
        ok &= sr.gamma[i].adjoint() == -&sr.gamma[i];
        ok &= sr.grading.anti(&sr.gamma[i]).is_zero();
    }
    out.push(("spin.clifford_relation".into(), ok));
    out.push(("spin.grading_square".into(), &sr.grading * &sr.grading == ids));
    out.push(("spin.grading_balanced".into(), sr.grading.trace() == ZERO));

    let (mut cc, mut hh, mut ch, mut tau_c, mut tau_h) = (true, true, true, true, true);
    for s in 0..q {
        for t in 0..q {
            cc &= er.c[s].anti(&er.c[t]) == delta(s, t, &ide, -1);
            hh &= er.c_hat[s].anti(&er.c_hat[t]) == delta(s, t, &ide, 1);
            ch &= er.c[s].anti(&er.c_hat[t]).is_zero();
        }
        tau_c &= er.tau.anti(&er.c[s]).is_zero();
        tau_h &= er.tau.comm(&er.c_hat[s]).is_zero();
    }
    out.push(("ext.c_relation".into(), cc));
    out.push(("ext.c_hat_relation".into(), hh));
    out.push(("ext.c_c_hat_anticommute".into(), ch));
    out.push(("ext.tau_square".into(), &er.tau * &er.tau == ide));
    out.push(("ext.tau_anticommutes_c".into(), tau_c));
    out.push(("ext.tau_commutes_c_hat".into(), tau_h));
    out.push(("ext.tau_balanced".into(), er.tau.trace() == ZERO));

    let gf = graded_tensor(sr, er, PhiBundleSpec::trivial());
    let d = gf.dim();
    let id = GaussMat::identity(d);
    let n = p + q;
    let (mut rel, mut odd, mut even, mut cross) = (true, true, true, true);
    for a in 0..n {
        for b in 0..n {
            rel &= gf.c(a).anti(gf.c(b)) == delta(a, b, &id, -1);
        }
        odd &= gf.grading.anti(gf.c(a)).is_zero();
    }
    for s in 0..q {
        even &= gf.grading.comm(&gf.c_hat_h[s]).is_zero();
        for i in 0..p {
            cross &= gf.c_f[i].comm(&gf.c_hat_h[s]).is_zero();
        }
        for t in 0..q {
            cross &= gf.c_h[t].anti(&gf.c_hat_h[s]).is_zero();
        }
    }
    out.push(("fiber.clifford_relation".into(), rel));
    out.push(("fiber.grading_square".into(), &gf.grading * &gf.grading == id));
    out.push(("fiber.c_odd".into(), odd));
    out.push(("fiber.c_hat_even".into(), even));
    out.push(("fiber.c_hat_graded_commutation".into(), cross));
    let blocks = gf.block_dims();
    let (ev, od) = gf.parity_dims();
    out.push((
        "fiber.block_dims".into(),
        ev == blocks[0] + blocks[1] && od == blocks[2] + blocks[3] && ev == od && ev + od == d,
    ));
    Ok(out)
}
