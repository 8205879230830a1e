//! Characteristic forms from pointwise curvature: Pontryagin, Â, L, Chern
//! character and Euler forms on the geometry grid of a torus model, their
//! exterior derivatives and their integrals.
//!
//! A form field stores, at every grid point, all `2^n` coefficients on the
//! basis `dx^I`, `I` a bitmask of coordinate indices in increasing order.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::clifford::PhiBundleSpec;
use crate::grid::{build_cache, CoordFoliatedTorus, GridGeometryCache};
use crate::spectral::GridShape;
use crate::{Error, Result};

/// Sign of `dx^I ∧ dx^J` relative to `dx^{I∪J}`, for disjoint masks.
fn wedge_sign(i: usize, j: usize) -> f64 {
    let mut swaps = 0;
    let mut rest = j;
    while rest != 0 {
        let b = rest.trailing_zeros();
        swaps += (i >> (b + 1)).count_ones();
        rest &= rest - 1;
    }
    if swaps % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

const MAX_DIM: usize = 8;

/// Grid points per active axis at which the closure residual of the
/// demonstration models drops below `1e-6`.
pub const WORKING_RESOLUTION: usize = 32;

fn sign_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let m = 1 << MAX_DIM;
        (0..m * m).map(|x| wedge_sign(x / m, x % m)).collect()
    })
}

fn nonzero(b: &[f64]) -> Vec<(usize, f64)> {
    b.iter().copied().enumerate().filter(|(_, y)| *y != 0.0).collect()
}

fn wedge_pairs(out: &mut [f64], a: &[(usize, f64)], b: &[(usize, f64)], s: f64) {
    let table = sign_table();
    for &(i, x) in a {
        let row = &table[i << MAX_DIM..];
        for &(j, y) in b {
            if i & j == 0 {
                out[i | j] += s * row[j] * x * y;
            }
        }
    }
}

fn wedge_into(out: &mut [f64], a: &[f64], b: &[f64], s: f64) {
    wedge_pairs(out, &nonzero(a), &nonzero(b), s);
}

/// Mixed-degree differential form sampled on a grid. Products need
/// `n ≤ 8`.
#[derive(Clone, Debug, PartialEq)]
pub struct FormField {
    pub n: usize,
    pub shape: GridShape,
    /// `coeffs[pt][I]`.
    pub coeffs: Vec<Vec<f64>>,
}

impl FormField {
    pub fn zero(n: usize, shape: &GridShape) -> Self {
        FormField { n, shape: shape.clone(), coeffs: vec![vec![0.0; 1 << n]; shape.len()] }
    }

    pub fn constant(n: usize, shape: &GridShape, c: f64) -> Self {
        let mut f = Self::zero(n, shape);
        f.coeffs.iter_mut().for_each(|v| v[0] = c);
        f
    }

    /// Highest degree with a nonzero coefficient anywhere, `None` for zero.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().flat_map(|v| v.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(i, _)| i.count_ones() as usize)).max()
    }

    /// Whether only even-degree components occur.
    pub fn is_even(&self) -> bool {
        self.coeffs.iter().all(|v| v.iter().enumerate().all(|(i, x)| i.count_ones() % 2 == 0 || *x == 0.0))
    }

    pub fn part(&self, k: usize) -> FormField {
        let mut f = self.clone();
        f.coeffs.iter_mut().for_each(|v| v.iter_mut().enumerate().for_each(|(i, x)| if i.count_ones() as usize != k { *x = 0.0 }));
        f
    }

    pub fn add(&self, o: &FormField) -> FormField {
        let mut f = self.clone();
        f.coeffs.iter_mut().zip(&o.coeffs).for_each(|(a, b)| a.iter_mut().zip(b).for_each(|(x, y)| *x += y));
        f
    }

    pub fn scaled(&self, s: f64) -> FormField {
        let mut f = self.clone();
        f.coeffs.iter_mut().for_each(|v| v.iter_mut().for_each(|x| *x *= s));
        f
    }

    pub fn wedge(&self, o: &FormField) -> FormField {
        let mut f = Self::zero(self.n, &self.shape);
        f.coeffs.par_iter_mut().zip(self.coeffs.par_iter().zip(&o.coeffs)).for_each(|(out, (a, b))| wedge_into(out, a, b, 1.0));
        f
    }

    /// `d` with Fourier derivatives along every grid axis.
    pub fn exterior_derivative(&self) -> FormField {
        let mut f = Self::zero(self.n, &self.shape);
        let np = self.shape.len();
        for mask in 0..1usize << self.n {
            let col: Vec<f64> = self.coeffs.iter().map(|v| v[mask]).collect();
            if col.iter().all(|x| *x == 0.0) {
                continue;
            }
            for mu in 0..self.n {
                if mask & (1 << mu) != 0 || self.shape.sizes()[mu] == 1 {
                    continue;
                }
                let d = self.shape.derivative_real(&col, mu);
                let s = wedge_sign(1 << mu, mask);
                for pt in 0..np {
                    f.coeffs[pt][mask | (1 << mu)] += s * d[pt];
                }
            }
        }
        f
    }

    pub fn sup_norm(&self) -> f64 {
        self.coeffs.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `∫_{Tⁿ}` of the top-degree part, with the orientation `dx¹…dxⁿ`.
    /// The trapezoidal rule on the periodic grid is spectrally accurate.
    pub fn integrate_top(&self) -> f64 {
        let top = (1usize << self.n) - 1;
        self.coeffs.iter().map(|v| v[top]).sum::<f64>() / self.shape.len() as f64
    }
}

/// Index of `dx^μ∧dx^ν`, `μ < ν`, among the `n(n−1)/2` basis 2-forms.
fn pair_index(n: usize, mu: usize, nu: usize) -> usize {
    mu * (2 * n - mu - 1) / 2 + (nu - mu - 1)
}

fn pair_masks(n: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for mu in 0..n {
        for nu in mu + 1..n {
            out.push((1 << mu) | (1 << nu));
        }
    }
    out
}

/// Matrix of 2-forms `Ω[i][j]` per grid point: the curvature of a metric
/// connection in an orthonormal frame of a rank-`rank` bundle.
#[derive(Clone, Debug)]
pub struct CurvatureField {
    pub n: usize,
    pub rank: usize,
    pub shape: GridShape,
    /// `omega[pt][(i * rank + j) * P + pair]`, `P = n(n−1)/2`.
    omega: Vec<Vec<f64>>,
}

impl CurvatureField {
    pub fn zeros(n: usize, rank: usize, shape: &GridShape) -> Self {
        let np = n * n.saturating_sub(1) / 2;
        CurvatureField { n, rank, shape: shape.clone(), omega: vec![vec![0.0; rank * rank * np]; shape.len()] }
    }

    fn npairs(&self) -> usize {
        self.n * self.n.saturating_sub(1) / 2
    }

    /// Coefficient of `dx^μ∧dx^ν` in `Ω[i][j]` at `pt`.
    pub fn get(&self, pt: usize, i: usize, j: usize, mu: usize, nu: usize) -> f64 {
        match mu.cmp(&nu) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.omega[pt][(i * self.rank + j) * self.npairs() + pair_index(self.n, mu, nu)],
            std::cmp::Ordering::Greater => -self.get(pt, i, j, nu, mu),
        }
    }

    /// Sets the `dx^μ∧dx^ν` coefficient of `Ω[i][j]`, `μ < ν`.
    pub fn set(&mut self, pt: usize, i: usize, j: usize, mu: usize, nu: usize, v: f64) {
        assert!(mu < nu, "2-form index pair must be increasing");
        let k = (i * self.rank + j) * self.npairs() + pair_index(self.n, mu, nu);
        self.omega[pt][k] = v;
    }

    /// Whether every coefficient vanishes.
    pub fn is_zero(&self) -> bool {
        self.omega.iter().flatten().all(|x| *x == 0.0)
    }

    pub fn sup_norm(&self) -> f64 {
        self.omega.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// From frame components `R(E_a, E_b)[i][j]`; `coframe` rows give the
    /// coordinate components of the dual coframe `E^a`.
    fn from_frame(cache: &GridGeometryCache, rank: usize, r: impl Fn(usize, usize, usize, usize, usize) -> f64 + Sync) -> Self {
        let n = cache.n();
        let np = n * (n - 1) / 2;
        let omega = (0..cache.points.len())
            .into_par_iter()
            .map(|pt| {
                let cof = &cache.points[pt].coframe;
                // E^a∧E^b on the coordinate 2-forms
                let mut basis = vec![0.0; n * n * np];
                for a in 0..n {
                    for b in 0..n {
                        for mu in 0..n {
                            for nu in mu + 1..n {
                                basis[(a * n + b) * np + pair_index(n, mu, nu)] = cof[(a, mu)] * cof[(b, nu)];
                            }
                        }
                    }
                }
                let mut m = vec![0.0; rank * rank * np];
                for a in 0..n {
                    for b in 0..n {
                        if a == b {
                            continue;
                        }
                        let e = &basis[(a * n + b) * np..(a * n + b + 1) * np];
                        for i in 0..rank {
                            for j in 0..rank {
                                let v = r(pt, a, b, i, j);
                                if v == 0.0 {
                                    continue;
                                }
                                let out = &mut m[(i * rank + j) * np..(i * rank + j + 1) * np];
                                out.iter_mut().zip(e).for_each(|(o, x)| *o += v * x);
                            }
                        }
                    }
                }
                m
            })
            .collect();
        CurvatureField { n, rank, shape: cache.gshape.clone(), omega }
    }

    /// Largest `|Ω[i][j] + Ω[j][i]|`.
    pub fn skew_defect(&self) -> f64 {
        let (r, np) = (self.rank, self.npairs());
        let mut worst = 0.0f64;
        for m in &self.omega {
            for i in 0..r {
                for j in 0..r {
                    for k in 0..np {
                        worst = worst.max((m[(i * r + j) * np + k] + m[(j * r + i) * np + k]).abs());
                    }
                }
            }
        }
        worst
    }

    /// Lift through a linear map on `rank×rank` matrices, one 2-form
    /// component at a time.
    pub fn lifted(&self, f: impl Fn(&DMatrix<f64>) -> DMatrix<f64> + Sync) -> CurvatureField {
        let (r, np) = (self.rank, self.npairs());
        let rr = f(&DMatrix::zeros(r, r)).nrows();
        let omega = self
            .omega
            .par_iter()
            .map(|m| {
                let mut out = vec![0.0; rr * rr * np];
                for k in 0..np {
                    let l = DMatrix::from_fn(r, r, |i, j| m[(i * r + j) * np + k]);
                    if l.iter().all(|x| *x == 0.0) {
                        continue;
                    }
                    let big = f(&l);
                    for i in 0..rr {
                        for j in 0..rr {
                            out[(i * rr + j) * np + k] = big[(i, j)];
                        }
                    }
                }
                out
            })
            .collect();
        CurvatureField { n: self.n, rank: rr, shape: self.shape.clone(), omega }
    }

    /// Entries of `Ω/2π` at one point as sparse forms on masks.
    fn scaled_entries(&self, pt: usize) -> Vec<Vec<(usize, f64)>> {
        let masks = pair_masks(self.n);
        let np = masks.len();
        let s = 1.0 / (2.0 * PI);
        (0..self.rank * self.rank)
            .map(|e| {
                let v = &self.omega[pt][e * np..(e + 1) * np];
                masks.iter().zip(v).filter(|(_, x)| **x != 0.0).map(|(m, x)| (*m, x * s)).collect()
            })
            .collect()
    }

    /// `tr((Ω/2π)^k)` as a form field.
    pub fn trace_power(&self, k: usize) -> FormField {
        let (r, n) = (self.rank, self.n);
        let coeffs = (0..self.omega.len())
            .into_par_iter()
            .map(|pt| {
                let mut t = vec![0.0; 1 << n];
                if k == 0 {
                    t[0] = r as f64;
                    return t;
                }
                let a = self.scaled_entries(pt);
                if k == 1 {
                    for i in 0..r {
                        a[i * r + i].iter().for_each(|(m, x)| t[*m] += x);
                    }
                    return t;
                }
                let mut pw = a.clone();
                for _ in 2..k {
                    let mut next = vec![vec![0.0; 1 << n]; r * r];
                    for i in 0..r {
                        for l in 0..r {
                            for j in 0..r {
                                wedge_pairs(&mut next[i * r + j], &pw[i * r + l], &a[l * r + j], 1.0);
                            }
                        }
                    }
                    pw = next.iter().map(|v| nonzero(v)).collect();
                }
                for i in 0..r {
                    for l in 0..r {
                        wedge_pairs(&mut t, &pw[i * r + l], &a[l * r + i], 1.0);
                    }
                }
                t
            })
            .collect();
        FormField { n, shape: self.shape.clone(), coeffs }
    }

    /// `Pf(Ω/2π)`; the rank must be even.
    fn pfaffian(&self) -> FormField {
        let idx: Vec<usize> = (0..self.rank).collect();
        let coeffs = (0..self.omega.len())
            .into_par_iter()
            .map(|pt| {
                let a: Vec<Vec<f64>> = self
                    .scaled_entries(pt)
                    .iter()
                    .map(|e| {
                        let mut v = vec![0.0; 1 << self.n];
                        e.iter().for_each(|(m, x)| v[*m] = *x);
                        v
                    })
                    .collect();
                pfaffian(&a, &idx, self.rank, self.n)
            })
            .collect();
        FormField { n: self.n, shape: self.shape.clone(), coeffs }
    }
}

/// `R^F` of the projected connection on the leaf bundle, `Ω[i][j] = ⟨R f_j, f_i⟩`.
pub fn leaf_curvature(cache: &GridGeometryCache) -> CurvatureField {
    CurvatureField::from_frame(cache, cache.p, |pt, a, b, i, j| cache.r_leaf(pt, a, b, j, i))
}

/// `R^{F⊥}` of the projected connection, `Ω[s][t] = ⟨R h_t, h_s⟩`.
pub fn normal_curvature(cache: &GridGeometryCache) -> CurvatureField {
    CurvatureField::from_frame(cache, cache.q, |pt, a, b, s, t| cache.r_perp(pt, a, b, t, s))
}

/// Levi-Civita curvature of the whole tangent bundle.
pub fn tangent_curvature(cache: &GridGeometryCache) -> CurvatureField {
    CurvatureField::from_frame(cache, cache.n(), |pt, a, b, i, j| cache.riem(pt, a, b, j, i))
}

/// `R^{φ(F⊥)}`: derivation lift of the normal curvature.
pub fn phi_curvature(cache: &GridGeometryCache, phi: &PhiBundleSpec) -> CurvatureField {
    normal_curvature(cache).lifted(|l| phi.lift(l))
}

fn check_skew(r: &CurvatureField) -> Result<()> {
    if r.n > MAX_DIM {
        return Err(Error::Dimension(format!("forms supported up to dimension {MAX_DIM}, got {}", r.n)));
    }
    let d = r.skew_defect();
    if d > 1e-9 {
        return Err(Error::Precondition(format!("curvature not skew: defect {d:e}")));
    }
    Ok(())
}

/// Power sums `s_k = Σ x_j^{2k} = (−1)^k ½ tr((Ω/2π)^{2k})` of the squared
/// Chern roots, `k = 1..=kmax`.
fn root_power_sums(r: &CurvatureField, kmax: usize) -> Vec<FormField> {
    (1..=kmax).map(|k| r.trace_power(2 * k).scaled(if k % 2 == 0 { 0.5 } else { -0.5 })).collect()
}

/// `p_1, p_2, …` up to degree `n`, from the power sums by Newton's identities.
pub fn pontryagin_forms(r: &CurvatureField) -> Result<Vec<FormField>> {
    check_skew(r)?;
    let kmax = (r.rank / 2).min(r.n / 4);
    let s = root_power_sums(r, kmax);
    let mut e: Vec<FormField> = vec![FormField::constant(r.n, &r.shape, 1.0)];
    for k in 1..=kmax {
        let mut acc = FormField::zero(r.n, &r.shape);
        for i in 1..=k {
            let term = e[k - i].wedge(&s[i - 1]);
            acc = acc.add(&term.scaled(if i % 2 == 1 { 1.0 } else { -1.0 }));
        }
        e.push(acc.scaled(1.0 / k as f64));
    }
    Ok(e.into_iter().skip(1).collect())
}

fn pk(ps: &[FormField], k: usize, n: usize, shape: &GridShape) -> FormField {
    ps.get(k - 1).cloned().unwrap_or_else(|| FormField::zero(n, shape))
}

/// `Â = 1 − p₁/24 + (7p₁² − 4p₂)/5760`, complete through degree 8.
pub fn a_hat_form(rf: &CurvatureField) -> Result<FormField> {
    let ps = pontryagin_forms(rf)?;
    let (n, sh) = (rf.n, &rf.shape);
    let (p1, p2) = (pk(&ps, 1, n, sh), pk(&ps, 2, n, sh));
    Ok(FormField::constant(n, sh, 1.0).add(&p1.scaled(-1.0 / 24.0)).add(&p1.wedge(&p1).scaled(7.0 / 5760.0)).add(&p2.scaled(-4.0 / 5760.0)))
}

/// `L = 1 + p₁/3 + (7p₂ − p₁²)/45`, complete through degree 8.
pub fn l_form(rp: &CurvatureField) -> Result<FormField> {
    let ps = pontryagin_forms(rp)?;
    let (n, sh) = (rp.n, &rp.shape);
    let (p1, p2) = (pk(&ps, 1, n, sh), pk(&ps, 2, n, sh));
    Ok(FormField::constant(n, sh, 1.0).add(&p1.scaled(1.0 / 3.0)).add(&p2.scaled(7.0 / 45.0)).add(&p1.wedge(&p1).scaled(-1.0 / 45.0)))
}

/// Chern character of the complexification, `tr exp(iΩ/2π) =
/// Σ_k (−1)^k tr((Ω/2π)^{2k}) / (2k)!`.
pub fn ch_form(rphi: &CurvatureField) -> Result<FormField> {
    check_skew(rphi)?;
    let mut out = FormField::constant(rphi.n, &rphi.shape, rphi.rank as f64);
    let mut fact = 1.0;
    for k in 1..=rphi.n / 4 {
        fact *= ((2 * k - 1) * 2 * k) as f64;
        let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
        out = out.add(&rphi.trace_power(2 * k).scaled(sign / fact));
    }
    Ok(out)
}

/// Pfaffian of a skew matrix of commuting even forms, by expansion along
/// the first row.
fn pfaffian(m: &[Vec<f64>], idx: &[usize], r: usize, n: usize) -> Vec<f64> {
    if idx.is_empty() {
        let mut one = vec![0.0; 1 << n];
        one[0] = 1.0;
        return one;
    }
    let mut out = vec![0.0; 1 << n];
    let i = idx[0];
    for (pos, &j) in idx.iter().enumerate().skip(1) {
        let rest: Vec<usize> = idx.iter().copied().filter(|&x| x != i && x != j).collect();
        let sub = pfaffian(m, &rest, r, n);
        let sign = if pos % 2 == 1 { 1.0 } else { -1.0 };
        wedge_into(&mut out, &m[i * r + j], &sub, sign);
    }
    out
}

/// Euler form `Pf(Ω/2π)`.
pub fn euler_form(rp: &CurvatureField) -> Result<FormField> {
    check_skew(rp)?;
    if rp.rank % 2 == 1 {
        return Err(Error::Dimension(format!("Pfaffian of odd rank {}", rp.rank)));
    }
    Ok(rp.pfaffian())
}

/// Products of Pontryagin forms of total degree at most `n`, with labels.
fn p_monomials(ps: &[FormField], n: usize, shape: &GridShape) -> Vec<(String, FormField)> {
    let mut out: Vec<(String, FormField, usize, usize)> = vec![("1".into(), FormField::constant(n, shape, 1.0), 0, 1)];
    let mut i = 0;
    while i < out.len() {
        let (label, f, deg, last) = out[i].clone();
        for k in last..=ps.len() {
            if deg + 4 * k > n {
                break;
            }
            let lab = if label == "1" { format!("p{k}") } else { format!("{label}*p{k}") };
            out.push((lab, f.wedge(&ps[k - 1]), deg + 4 * k, k));
        }
        i += 1;
    }
    out.into_iter().skip(1).map(|(l, f, _, _)| (l, f)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Pairing {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CharClassReport {
    pub model_id: String,
    pub n_grid: usize,
    pub phi: String,
    pub a_hat_l_ch: f64,
    /// `⟨Â(F) p_I(F⊥), [M]⟩` for every Pontryagin monomial of degree ≤ n.
    pub a_hat_p_monomials: Vec<Pairing>,
    /// `⟨Â(F) e(F⊥), [M]⟩`, absent for odd q.
    pub a_hat_euler: Option<f64>,
    pub a_hat_tm: f64,
    /// Largest sup-norm of `d` over all characteristic forms used.
    pub closure_residual: f64,
}

impl CharClassReport {
    pub fn pairings(&self) -> Vec<Pairing> {
        let mut v = vec![Pairing { name: "a_hat_l_ch".into(), value: self.a_hat_l_ch }];
        v.extend(self.a_hat_p_monomials.iter().map(|p| Pairing { name: format!("a_hat_{}", p.name.replace('*', "_")), value: p.value }));
        if let Some(e) = self.a_hat_euler {
            v.push(Pairing { name: "a_hat_euler".into(), value: e });
        }
        v.push(Pairing { name: "a_hat_tm".into(), value: self.a_hat_tm });
        v
    }

    pub fn max_abs_pairing(&self) -> f64 {
        self.pairings().iter().fold(0.0, |m, p| m.max(p.value.abs()))
    }
}

/// All pairings of one model at resolution `n`.
pub fn char_class_report(m: &CoordFoliatedTorus, n: usize, phi: &PhiBundleSpec) -> Result<CharClassReport> {
    if m.n() > MAX_DIM {
        return Err(Error::Dimension(format!("forms supported up to dimension {MAX_DIM}, got {}", m.n())));
    }
    let cache = build_cache(m, n)?;
    let rf = leaf_curvature(&cache);
    let rp = normal_curvature(&cache);
    let rphi = rp.lifted(|l| phi.lift(l));
    let rt = tangent_curvature(&cache);
    let a_f = a_hat_form(&rf)?;
    let l_p = l_form(&rp)?;
    let ch = ch_form(&rphi)?;
    let ps = pontryagin_forms(&rp)?;
    let a_t = a_hat_form(&rt)?;
    let euler = (m.q % 2 == 0).then(|| euler_form(&rp)).transpose()?;
    let monos = p_monomials(&ps, m.n(), &cache.gshape);

    let mut closure = 0.0f64;
    for f in [&a_f, &l_p, &ch, &a_t].into_iter().chain(ps.iter()).chain(euler.iter()) {
        closure = closure.max(f.exterior_derivative().sup_norm());
    }
    Ok(CharClassReport {
        model_id: m.id.clone(),
        n_grid: n,
        phi: phi.label(),
        a_hat_l_ch: a_f.wedge(&l_p).wedge(&ch).integrate_top(),
        a_hat_p_monomials: monos.iter().map(|(l, f)| Pairing { name: l.clone(), value: a_f.wedge(f).integrate_top() }).collect(),
        a_hat_euler: euler.as_ref().map(|e| a_f.wedge(e).integrate_top()),
        a_hat_tm: a_t.integrate_top(),
        closure_residual: closure,
    })
}

/// Reports for a set of models, in input order.
pub fn vanishing_pairings(models: &[CoordFoliatedTorus], n: usize, phi: &PhiBundleSpec) -> Result<Vec<CharClassReport>> {
    models.iter().map(|m| char_class_report(m, n, phi)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wedge_signs() {
        assert_eq!(wedge_sign(0b01, 0b10), 1.0);
        assert_eq!(wedge_sign(0b10, 0b01), -1.0);
        // dx2∧dx3 ∧ dx1 = dx1∧dx2∧dx3
        assert_eq!(wedge_sign(0b110, 0b001), 1.0);
        assert_eq!(wedge_sign(0b100, 0b011), 1.0);
        assert_eq!(wedge_sign(0b010, 0b101), -1.0);
    }

    #[test]
    fn pfaffian_of_four() {
        let r = 4;
        let mut m = vec![vec![0.0; 1]; r * r];
        let mut set = |i: usize, j: usize, v: f64| {
            m[i * r + j][0] = v;
            m[j * r + i][0] = -v;
        };
        set(0, 1, 2.0);
        set(0, 2, 3.0);
        set(0, 3, 5.0);
        set(1, 2, 7.0);
        set(1, 3, 11.0);
        set(2, 3, 13.0);
        // a01 a23 − a02 a13 + a03 a12
        let pf = pfaffian(&m, &[0, 1, 2, 3], r, 0);
        assert_eq!(pf[0], 2.0 * 13.0 - 3.0 * 11.0 + 5.0 * 7.0);
    }
}
