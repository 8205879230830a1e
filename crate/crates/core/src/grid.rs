//! Coordinate-foliated tori: block metrics given by trigonometric
//! polynomials, sampled on a periodic grid, with pointwise orthonormal
//! frames, Levi-Civita connection, mixed tensor, ω and curvature.
//!
//! The leaf distribution is `span{∂_1…∂_p}` and the metric of the family is
//! `GF ⊕ GP/ε`. Geometry is evaluated on the sub-grid of axes along which the
//! metric actually varies; sections may carry extra resolution along the
//! remaining axes.

use crate::spectral::GridShape;
use crate::trig::TrigPolyField;
use crate::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordFoliatedTorus {
    pub id: String,
    pub p: usize,
    pub q: usize,
    /// `p×p` leaf metric; only the upper triangle is read.
    pub gf: Vec<Vec<TrigPolyField>>,
    /// `q×q` transverse metric; only the upper triangle is read.
    pub gp: Vec<Vec<TrigPolyField>>,
    pub epsilon: f64,
}

fn identity_block(k: usize, n: usize, diag: &TrigPolyField) -> Vec<Vec<TrigPolyField>> {
    (0..k).map(|i| (0..k).map(|j| if i == j { diag.clone() } else { TrigPolyField::zero(n) }).collect()).collect()
}

impl CoordFoliatedTorus {
    pub fn new(id: &str, p: usize, q: usize, gf: Vec<Vec<TrigPolyField>>, gp: Vec<Vec<TrigPolyField>>, epsilon: f64) -> Result<Self> {
        let n = p + q;
        let shape_ok = |b: &Vec<Vec<TrigPolyField>>, k: usize| b.len() == k && b.iter().all(|r| r.len() == k && r.iter().all(|f| f.n == n));
        if p == 0 || q == 0 {
            return Err(Error::Dimension(format!("need p, q > 0, got p={p}, q={q}")));
        }
        if !shape_ok(&gf, p) || !shape_ok(&gp, q) {
            return Err(Error::InvalidModel(format!("{id}: metric blocks must be {p}x{p} and {q}x{q} fields in {n} variables")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidModel(format!("{id}: epsilon must be positive, got {epsilon}")));
        }
        Ok(CoordFoliatedTorus { id: id.into(), p, q, gf, gp, epsilon })
    }

    pub fn flat(p: usize, q: usize) -> Self {
        let one = TrigPolyField::constant(p + q, 1.0);
        CoordFoliatedTorus { id: format!("flat_T{}", p + q), p, q, gf: identity_block(p, p + q, &one), gp: identity_block(q, p + q, &one), epsilon: 1.0 }
    }

    /// `GF = I`, `GP = (1 + σ sin 2πx₁)·I`.
    pub fn warped(p: usize, q: usize, sigma: f64) -> Self {
        let n = p + q;
        let w = TrigPolyField::axis_wave(n, 1.0, 0, 1, 0.0, sigma);
        CoordFoliatedTorus {
            id: format!("warped_sigma{sigma}"),
            p,
            q,
            gf: identity_block(p, n, &TrigPolyField::constant(n, 1.0)),
            gp: identity_block(q, n, &w),
            epsilon: 1.0,
        }
    }

    pub fn with_epsilon(mut self, eps: f64) -> Self {
        self.epsilon = eps;
        self
    }

    pub fn with_id(mut self, id: &str) -> Self {
        self.id = id.into();
        self
    }

    pub fn n(&self) -> usize {
        self.p + self.q
    }

    fn fields(&self) -> impl Iterator<Item = &TrigPolyField> {
        self.gf.iter().flatten().chain(self.gp.iter().flatten())
    }

    /// Entry `(μ, ν)` of the unscaled block metric `GF ⊕ GP`.
    pub fn entry(&self, mu: usize, nu: usize) -> Option<&TrigPolyField> {
        let (a, b) = (mu.min(nu), mu.max(nu));
        let p = self.p;
        if b < p {
            Some(&self.gf[a][b])
        } else if a >= p {
            Some(&self.gp[a - p][b - p])
        } else {
            None
        }
    }

    pub fn active_axes(&self) -> Vec<bool> {
        let mut act = vec![false; self.n()];
        for f in self.fields() {
            for (a, v) in f.active_axes().into_iter().enumerate() {
                act[a] |= v;
            }
        }
        act
    }

    pub fn axis_bandwidth(&self, axis: usize) -> usize {
        self.fields()
            .flat_map(|f| f.terms.iter().filter(|t| t.cos != 0.0 || t.sin != 0.0).map(move |t| t.freq[axis].unsigned_abs() as usize))
            .max()
            .unwrap_or(0)
    }

    pub fn bandwidth(&self) -> usize {
        (0..self.n()).map(|a| self.axis_bandwidth(a)).max().unwrap_or(0)
    }
}

/// Pointwise geometry at one geometry-grid point, in the ε-orthonormal frame
/// `E = (f_1…f_p, √ε h_1…√ε h_q)`.
#[derive(Clone, Debug)]
pub struct PointGeometry {
    pub x: Vec<f64>,
    /// Unscaled metric blocks at the point.
    pub gf: DMatrix<f64>,
    pub gp: DMatrix<f64>,
    /// `∂_μ GP` for every axis.
    pub dgp: Vec<DMatrix<f64>>,
    /// Full ε-metric `GF ⊕ GP/ε`.
    pub g: DMatrix<f64>,
    /// Column `a` holds the coordinate components of `E_a`.
    pub frame: DMatrix<f64>,
    /// `∂_μ frame`.
    pub dframe: Vec<DMatrix<f64>>,
    /// Row `a` holds the coordinate components of the dual coframe.
    pub coframe: DMatrix<f64>,
    /// `[E_a, E_b] = Σ_k c[a][b][k] E_k`.
    pub structure: Vec<f64>,
    /// `Γ[a][b][k] = ⟨∇_{E_a} E_b, E_k⟩`.
    pub gamma: Vec<f64>,
    /// `R[a][b][c][d] = ⟨R(E_a, E_b) E_c, E_d⟩`.
    pub riem: Vec<f64>,
    pub volume: f64,
}

#[derive(Clone, Debug)]
pub struct GridGeometryCache {
    pub model_id: String,
    pub p: usize,
    pub q: usize,
    pub epsilon: f64,
    /// Section grid.
    pub shape: GridShape,
    /// Geometry grid: the section grid with constant axes collapsed.
    pub gshape: GridShape,
    pub active: Vec<bool>,
    pub points: Vec<PointGeometry>,
}

/// Default resolution along axes on which the metric is constant.
pub const INACTIVE_SIZE: usize = 4;

/// Cache at resolution `n` along the axes the metric depends on, and
/// [`INACTIVE_SIZE`] elsewhere.
pub fn build_cache(m: &CoordFoliatedTorus, n: usize) -> Result<GridGeometryCache> {
    let act = m.active_axes();
    let sizes: Vec<usize> = act.iter().map(|&a| if a { n } else { INACTIVE_SIZE }).collect();
    build_cache_with(m, &sizes)
}

/// Cache on a section grid with resolution `n` along every axis.
pub fn build_cache_full(m: &CoordFoliatedTorus, n: usize) -> Result<GridGeometryCache> {
    build_cache_with(m, &vec![n; m.n()])
}

pub fn build_cache_with(m: &CoordFoliatedTorus, sizes: &[usize]) -> Result<GridGeometryCache> {
    let n = m.n();
    if sizes.len() != n {
        return Err(Error::Dimension(format!("grid has {} axes, model has {n}", sizes.len())));
    }
    let active = m.active_axes();
    for a in 0..n {
        if sizes[a] < 1 {
            return Err(Error::Dimension("empty grid axis".into()));
        }
        let bw = m.axis_bandwidth(a);
        if active[a] && (sizes[a] < 4 || sizes[a] < 4 * bw + 1) {
            return Err(Error::Aliasing { n: sizes[a], bandwidth: bw });
        }
    }
    let shape = GridShape::new(sizes);
    let gsizes: Vec<usize> = (0..n).map(|a| if active[a] { sizes[a] } else { 1 }).collect();
    let gshape = GridShape::new(&gsizes);
    let np = gshape.len();

    // samples of the unscaled metric entries and their Fourier derivatives
    let mut val = vec![vec![vec![0.0; np]; n]; n];
    let mut d1 = vec![vec![vec![vec![0.0; np]; n]; n]; n];
    let mut d2 = vec![vec![vec![vec![vec![0.0; np]; n]; n]; n]; n];
    for mu in 0..n {
        for nu in mu..n {
            let Some(f) = m.entry(mu, nu) else { continue };
            let s: Vec<f64> = (0..np).map(|i| f.eval(&gshape.coords(i))).collect();
            for r in 0..n {
                if !active[r] {
                    continue;
                }
                let dr = gshape.derivative_real(&s, r);
                for t in 0..n {
                    if active[t] {
                        let drt = gshape.derivative_real(&dr, t);
                        d2[r][t][mu][nu] = drt.clone();
                        d2[r][t][nu][mu] = drt;
                    }
                }
                d1[r][mu][nu] = dr.clone();
                d1[r][nu][mu] = dr;
            }
            val[mu][nu] = s.clone();
            val[nu][mu] = s;
        }
    }

    let eps = m.epsilon;
    let (p, q) = (m.p, m.q);
    let scale = |mu: usize, nu: usize| if mu >= p && nu >= p { 1.0 / eps } else { 1.0 };
    let points: Vec<Result<PointGeometry>> = (0..np)
        .into_par_iter()
        .map(|i| {
            let mat = |src: &dyn Fn(usize, usize) -> f64| DMatrix::from_fn(n, n, |a, b| src(a, b));
            let g = mat(&|a, b| val[a][b][i] * scale(a, b));
            let dg: Vec<DMatrix<f64>> = (0..n).map(|r| mat(&|a, b| d1[r][a][b][i] * scale(a, b))).collect();
            let ddg: Vec<Vec<DMatrix<f64>>> = (0..n).map(|r| (0..n).map(|t| mat(&|a, b| d2[r][t][a][b][i] * scale(a, b))).collect()).collect();
            point_geometry(gshape.coords(i), p, q, &g, &dg, &ddg, eps).ok_or_else(|| Error::NonSpd { point: gshape.multi_index(i) })
        })
        .collect();
    let points = points.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(GridGeometryCache { model_id: m.id.clone(), p, q, epsilon: eps, shape, gshape, active, points })
}

/// `A^{-1/2}`, `A^{1/2}` and the derivatives of `A^{-1/2}` along `dA` by the
/// divided-difference formula on the eigenbasis.
fn inv_sqrt_with_derivatives(a: &DMatrix<f64>, da: &[DMatrix<f64>]) -> Option<(DMatrix<f64>, DMatrix<f64>, Vec<DMatrix<f64>>)> {
    let eig = SymmetricEigen::new(a.clone());
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return None;
    }
    let qm = &eig.eigenvectors;
    let s: Vec<f64> = eig.eigenvalues.iter().map(|l| l.sqrt()).collect();
    let k = s.len();
    let diag = |f: &dyn Fn(f64) -> f64| qm * DMatrix::from_diagonal(&nalgebra::DVector::from_fn(k, |i, _| f(s[i]))) * qm.transpose();
    let isq = diag(&|x| 1.0 / x);
    let sq = diag(&|x| x);
    let dd = DMatrix::from_fn(k, k, |i, j| -1.0 / (s[i] * s[j] * (s[i] + s[j])));
    let ders = da.iter().map(|d| qm * (qm.transpose() * d * qm).component_mul(&dd) * qm.transpose()).collect();
    Some((isq, sq, ders))
}

fn block(m: &DMatrix<f64>, off: usize, k: usize) -> DMatrix<f64> {
    m.view((off, off), (k, k)).into_owned()
}

fn point_geometry(x: Vec<f64>, p: usize, q: usize, g: &DMatrix<f64>, dg: &[DMatrix<f64>], ddg: &[Vec<DMatrix<f64>>], eps: f64) -> Option<PointGeometry> {
    let n = p + q;
    let (fi, fs, fd) = inv_sqrt_with_derivatives(&block(g, 0, p), &dg.iter().map(|d| block(d, 0, p)).collect::<Vec<_>>())?;
    let (pi, ps, pd) = inv_sqrt_with_derivatives(&block(g, p, q), &dg.iter().map(|d| block(d, p, q)).collect::<Vec<_>>())?;
    let mut frame = DMatrix::zeros(n, n);
    let mut coframe = DMatrix::zeros(n, n);
    frame.view_mut((0, 0), (p, p)).copy_from(&fi);
    frame.view_mut((p, p), (q, q)).copy_from(&pi);
    coframe.view_mut((0, 0), (p, p)).copy_from(&fs);
    coframe.view_mut((p, p), (q, q)).copy_from(&ps);
    let dframe: Vec<DMatrix<f64>> = (0..n)
        .map(|r| {
            let mut d = DMatrix::zeros(n, n);
            d.view_mut((0, 0), (p, p)).copy_from(&fd[r]);
            d.view_mut((p, p), (q, q)).copy_from(&pd[r]);
            d
        })
        .collect();

    // structure functions from the frame derivatives
    let idx3 = |a: usize, b: usize, k: usize| (a * n + b) * n + k;
    let mut structure = vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            let br: Vec<f64> = (0..n)
                .map(|mu| (0..n).map(|nu| frame[(nu, a)] * dframe[nu][(mu, b)] - frame[(nu, b)] * dframe[nu][(mu, a)]).sum())
                .collect();
            for k in 0..n {
                structure[idx3(a, b, k)] = (0..n).map(|mu| coframe[(k, mu)] * br[mu]).sum();
            }
        }
    }
    let mut gamma = vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            for k in 0..n {
                gamma[idx3(a, b, k)] = 0.5 * (structure[idx3(a, b, k)] - structure[idx3(b, k, a)] + structure[idx3(k, a, b)]);
            }
        }
    }
    let riem = frame_riemann(g, dg, ddg, &frame);
    let gp = block(g, p, q) * eps;
    let dgp = dg.iter().map(|d| block(d, p, q) * eps).collect();
    Some(PointGeometry {
        x,
        gf: block(g, 0, p),
        gp,
        dgp,
        g: g.clone(),
        frame,
        dframe,
        coframe,
        structure,
        gamma,
        riem,
        volume: g.determinant().sqrt(),
    })
}

/// Coordinate Riemann tensor from the metric and its first two derivatives,
/// transported to the frame: `⟨R(E_a,E_b)E_c,E_d⟩`.
fn frame_riemann(g: &DMatrix<f64>, dg: &[DMatrix<f64>], ddg: &[Vec<DMatrix<f64>>], frame: &DMatrix<f64>) -> Vec<f64> {
    let n = g.nrows();
    let gi = g.clone().try_inverse().expect("metric checked positive definite");
    let dgi: Vec<DMatrix<f64>> = dg.iter().map(|d| -&gi * d * &gi).collect();
    let i3 = |a: usize, b: usize, c: usize| (a * n + b) * n + c;
    // Γ^l_{mn}
    let mut chr = vec![0.0; n * n * n];
    // ∂_r Γ^l_{mn} stored as [r][l][m][n]
    let mut dchr = vec![0.0; n * n * n * n];
    for l in 0..n {
        for mu in 0..n {
            for nu in 0..n {
                let mut v = 0.0;
                for s in 0..n {
                    v += gi[(l, s)] * (dg[mu][(s, nu)] + dg[nu][(s, mu)] - dg[s][(mu, nu)]);
                }
                chr[i3(l, mu, nu)] = 0.5 * v;
                for r in 0..n {
                    let mut w = 0.0;
                    for s in 0..n {
                        w += dgi[r][(l, s)] * (dg[mu][(s, nu)] + dg[nu][(s, mu)] - dg[s][(mu, nu)]);
                        w += gi[(l, s)] * (ddg[r][mu][(s, nu)] + ddg[r][nu][(s, mu)] - ddg[r][s][(mu, nu)]);
                    }
                    dchr[r * n * n * n + i3(l, mu, nu)] = 0.5 * w;
                }
            }
        }
    }
    // R^r_{s m n} = ∂_m Γ^r_{n s} − ∂_n Γ^r_{m s} + Γ^r_{m l} Γ^l_{n s} − Γ^r_{n l} Γ^l_{m s}
    let i4 = |a: usize, b: usize, c: usize, d: usize| ((a * n + b) * n + c) * n + d;
    let mut rc = vec![0.0; n * n * n * n];
    for r in 0..n {
        for s in 0..n {
            for mu in 0..n {
                for nu in 0..n {
                    let mut v = dchr[mu * n * n * n + i3(r, nu, s)] - dchr[nu * n * n * n + i3(r, mu, s)];
                    for l in 0..n {
                        v += chr[i3(r, mu, l)] * chr[i3(l, nu, s)] - chr[i3(r, nu, l)] * chr[i3(l, mu, s)];
                    }
                    rc[i4(r, s, mu, nu)] = v;
                }
            }
        }
    }
    // lower the first index against E_d and contract the rest with the frame
    let ge = g * frame;
    let contract = |t: &[f64], slot: usize, m: &DMatrix<f64>| -> Vec<f64> {
        let mut out = vec![0.0; n * n * n * n];
        for i in 0..n * n * n * n {
            let mut id = [i / (n * n * n), (i / (n * n)) % n, (i / n) % n, i % n];
            let a = id[slot];
            let mut v = 0.0;
            for k in 0..n {
                id[slot] = k;
                v += t[i4(id[0], id[1], id[2], id[3])] * m[(k, a)];
            }
            out[i] = v;
        }
        out
    };
    // slots: 0 → d (via g·E), 1 → c, 2 → a, 3 → b
    let t = contract(&rc, 0, &ge);
    let t = contract(&t, 1, frame);
    let t = contract(&t, 2, frame);
    let t = contract(&t, 3, frame);
    let mut out = vec![0.0; n * n * n * n];
    for d in 0..n {
        for c in 0..n {
            for a in 0..n {
                for b in 0..n {
                    out[i4(a, b, c, d)] = t[i4(d, c, a, b)];
                }
            }
        }
    }
    out
}

impl GridGeometryCache {
    pub fn n(&self) -> usize {
        self.p + self.q
    }

    /// Geometry point serving section-grid point `idx`.
    pub fn geom_index(&self, idx: usize) -> usize {
        let mut mi = self.shape.multi_index(idx);
        for (a, v) in mi.iter_mut().enumerate() {
            if !self.active[a] {
                *v = 0;
            }
        }
        self.gshape.flat_index(&mi)
    }

    /// Map from section-grid points to geometry points.
    pub fn geom_map(&self) -> Vec<usize> {
        (0..self.shape.len()).map(|i| self.geom_index(i)).collect()
    }

    pub fn gamma(&self, pt: usize, a: usize, b: usize, k: usize) -> f64 {
        let n = self.n();
        self.points[pt].gamma[(a * n + b) * n + k]
    }

    pub fn structure(&self, pt: usize, a: usize, b: usize, k: usize) -> f64 {
        let n = self.n();
        self.points[pt].structure[(a * n + b) * n + k]
    }

    pub fn riem(&self, pt: usize, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let n = self.n();
        self.points[pt].riem[((a * n + b) * n + c) * n + d]
    }

    fn is_leaf(&self, a: usize) -> bool {
        a < self.p
    }

    /// `⟨S(E_a) E_b, E_k⟩`: the part of the connection exchanging F and F⊥.
    pub fn s_tensor(&self, pt: usize, a: usize, b: usize, k: usize) -> f64 {
        if self.is_leaf(b) == self.is_leaf(k) {
            0.0
        } else {
            self.gamma(pt, a, b, k)
        }
    }

    /// `⟨R^{F⊥}(E_a,E_b) h_t, h_s⟩` for the connection `p⊥∇p⊥`, with `t, s`
    /// indexing F⊥.
    pub fn r_perp(&self, pt: usize, a: usize, b: usize, t: usize, s: usize) -> f64 {
        let p = self.p;
        let (t, s) = (p + t, p + s);
        let mut v = self.riem(pt, a, b, t, s);
        for i in 0..p {
            v -= self.gamma(pt, b, t, i) * self.gamma(pt, a, i, s) - self.gamma(pt, a, t, i) * self.gamma(pt, b, i, s);
        }
        v
    }

    /// `⟨R^F(E_a,E_b) f_j, f_i⟩` for the connection `p∇p`.
    pub fn r_leaf(&self, pt: usize, a: usize, b: usize, j: usize, i: usize) -> f64 {
        let (p, n) = (self.p, self.n());
        let mut v = self.riem(pt, a, b, j, i);
        for s in p..n {
            v -= self.gamma(pt, b, j, s) * self.gamma(pt, a, s, i) - self.gamma(pt, a, j, s) * self.gamma(pt, b, s, i);
        }
        v
    }

    /// `q×q` matrix of `R^{F⊥}(E_a,E_b)` acting on `h`: `M[s][t] = ⟨R h_t, h_s⟩`.
    pub fn r_perp_matrix(&self, pt: usize, a: usize, b: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.q, self.q, |s, t| self.r_perp(pt, a, b, t, s))
    }

    /// Scalar curvature `Σ_ab ⟨R(E_a,E_b)E_b,E_a⟩` of the ε-metric.
    pub fn scalar_curvature(&self, pt: usize) -> f64 {
        let n = self.n();
        let mut k = 0.0;
        for a in 0..n {
            for b in 0..n {
                k += self.riem(pt, a, b, b, a);
            }
        }
        k
    }

    /// Scalar curvature of the leaves through the point.
    pub fn leaf_scalar_curvature(&self, pt: usize) -> f64 {
        let p = self.p;
        let mut k = 0.0;
        for i in 0..p {
            for j in 0..p {
                k += self.r_leaf(pt, i, j, j, i);
            }
        }
        k
    }

    /// `ω(∂_i) = GP⁻¹ ∂_i GP` in coordinates, for `i < p`.
    pub fn omega_coordinate(&self, pt: usize, i: usize) -> DMatrix<f64> {
        let g = &self.points[pt];
        g.gp.clone().try_inverse().expect("positive definite") * &g.dgp[i]
    }

    /// `ω(f_i)` as a symmetric matrix in a `g^{F⊥}`-orthonormal frame.
    pub fn omega_frame(&self, pt: usize) -> Vec<DMatrix<f64>> {
        let g = &self.points[pt];
        let p = self.p;
        let e = g.frame.view((p, p), (self.q, self.q)) / self.epsilon.sqrt();
        let w: Vec<DMatrix<f64>> = (0..p).map(|j| e.transpose() * &g.dgp[j] * &e).collect();
        (0..p)
            .map(|i| {
                let mut m = DMatrix::zeros(self.q, self.q);
                for j in 0..p {
                    m += &w[j] * g.frame[(j, i)];
                }
                m
            })
            .collect()
    }
}

/// `sup_{|ξ|=1} ‖Σ ξ_i W_i‖` for symmetric `W_i`, by alternating between the
/// top eigenvector and the best direction.
pub fn sup_operator_norm(ws: &[DMatrix<f64>]) -> f64 {
    let p = ws.len();
    if p == 0 {
        return 0.0;
    }
    let top = |xi: &[f64]| {
        let mut m = DMatrix::zeros(ws[0].nrows(), ws[0].ncols());
        for (w, x) in ws.iter().zip(xi) {
            m += w * *x;
        }
        let e = SymmetricEigen::new(m);
        let (i, _) = e.eigenvalues.iter().enumerate().fold((0, -1.0), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
        (e.eigenvalues[i].abs(), e.eigenvectors.column(i).into_owned())
    };
    let mut best = 0.0f64;
    for start in 0..p {
        let mut xi = vec![0.0; p];
        xi[start] = 1.0;
        for _ in 0..50 {
            let (val, v) = top(&xi);
            best = best.max(val);
            let a: Vec<f64> = ws.iter().map(|w| (v.transpose() * w * &v)[(0, 0)]).collect();
            let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            if na == 0.0 {
                break;
            }
            let next: Vec<f64> = a.iter().map(|x| x / na).collect();
            let moved = next.iter().zip(&xi).map(|(u, w)| (u - w).abs()).fold(0.0, f64::max);
            xi = next;
            if moved < 1e-14 {
                break;
            }
        }
        best = best.max(top(&xi).0);
    }
    best
}

/// Per-point `ω(f_i)` in orthonormal frames.
pub fn omega_field(cache: &GridGeometryCache) -> Vec<Vec<DMatrix<f64>>> {
    (0..cache.points.len()).map(|pt| cache.omega_frame(pt)).collect()
}

/// Exact `ω(f_i)` at an arbitrary point, from the metric fields.
pub fn omega_at(m: &CoordFoliatedTorus, x: &[f64]) -> Vec<DMatrix<f64>> {
    let (p, q) = (m.p, m.q);
    let sample = |off: usize, k: usize, f: &dyn Fn(&TrigPolyField) -> f64| DMatrix::from_fn(k, k, |a, b| f(m.entry(off + a, off + b).expect("diagonal block")));
    let gp = sample(p, q, &|t| t.eval(x));
    let isq = |a: DMatrix<f64>| {
        let e = SymmetricEigen::new(a);
        let d = DMatrix::from_diagonal(&e.eigenvalues.map(|l| 1.0 / l.sqrt()));
        &e.eigenvectors * d * e.eigenvectors.transpose()
    };
    let ef = isq(sample(0, p, &|t| t.eval(x)));
    let ep = isq(gp);
    let w: Vec<DMatrix<f64>> = (0..p).map(|j| &ep * sample(p, q, &|t| t.derivative(j).eval(x)) * &ep).collect();
    (0..p)
        .map(|i| {
            let mut out = DMatrix::zeros(q, q);
            for j in 0..p {
                out += &w[j] * ef[(j, i)];
            }
            out
        })
        .collect()
}

/// Largest pointwise norm of `ω` over the grid points.
pub fn omega_grid_max(cache: &GridGeometryCache) -> f64 {
    (0..cache.points.len()).map(|pt| sup_operator_norm(&cache.omega_frame(pt))).fold(0.0, f64::max)
}

/// `sup_x sup_{|X|=1} ‖ω(X)‖`: the grid maximum refined between grid points
/// by coordinate-wise golden-section search on the exact field.
pub fn omega_sup_norm(m: &CoordFoliatedTorus, cache: &GridGeometryCache) -> f64 {
    let vals: Vec<f64> = (0..cache.points.len()).map(|pt| sup_operator_norm(&cache.omega_frame(pt))).collect();
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|a, b| vals[*b].total_cmp(&vals[*a]));
    let mut best = vals.iter().cloned().fold(0.0, f64::max);
    if best == 0.0 {
        return 0.0;
    }
    let f = |x: &[f64]| sup_operator_norm(&omega_at(m, x));
    let axes: Vec<usize> = (0..cache.n()).filter(|&a| cache.active[a]).collect();
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for &start in order.iter().take(4) {
        let mut x = cache.points[start].x.clone();
        for _ in 0..6 {
            for &a in &axes {
                let h = 1.0 / cache.gshape.sizes()[a] as f64;
                let (mut lo, mut hi) = (x[a] - h, x[a] + h);
                let at = |t: f64, x: &mut Vec<f64>| {
                    x[a] = t;
                    f(x)
                };
                let mut y = x.clone();
                let (mut c, mut d) = (hi - g * (hi - lo), lo + g * (hi - lo));
                let (mut fc, mut fd) = (at(c, &mut y), at(d, &mut y));
                for _ in 0..60 {
                    if fc > fd {
                        hi = d;
                        d = c;
                        fd = fc;
                        c = hi - g * (hi - lo);
                        fc = at(c, &mut y);
                    } else {
                        lo = c;
                        c = d;
                        fc = fd;
                        d = lo + g * (hi - lo);
                        fd = at(d, &mut y);
                    }
                }
                let t = 0.5 * (lo + hi);
                if at(t, &mut y) > f(&x) {
                    x[a] = t;
                }
            }
        }
        best = best.max(f(&x));
    }
    best
}

#[derive(Clone, Debug)]
pub struct ScalarField {
    pub values: Vec<f64>,
    pub min: f64,
}

fn scalar_field(values: Vec<f64>) -> ScalarField {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    ScalarField { values, min }
}

/// `k_{TM,ε}` on the geometry grid.
pub fn scalar_curvature_eps(cache: &GridGeometryCache) -> ScalarField {
    scalar_field((0..cache.points.len()).map(|pt| cache.scalar_curvature(pt)).collect())
}

/// `k_F` on the geometry grid.
pub fn leaf_scalar_curvature(cache: &GridGeometryCache) -> ScalarField {
    scalar_field((0..cache.points.len()).map(|pt| cache.leaf_scalar_curvature(pt)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapRow {
    pub sigma: f64,
    pub epsilon: f64,
    pub n: usize,
    pub min_kf: f64,
    pub min_ktm_eps: f64,
    pub omega_norm: f64,
    /// `(min k_F − min k_{TM,ε}) / ‖ω‖`, absent when `‖ω‖ = 0`.
    pub fitted_c: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GapProbe {
    pub rows: Vec<GapRow>,
    /// Largest ratio between fitted constants across all `(σ, ε)` pairs.
    pub c_spread: f64,
    /// Whether the fitted constant is stable within a factor 2.
    pub stable: bool,
}

/// Compares `min k_{TM,ε}` with `min k_F − C‖ω_σ‖` over a σ×ε schedule.
pub fn gap_inequality_probe(family: impl Fn(f64) -> CoordFoliatedTorus, sigmas: &[f64], eps: &[f64], n: usize) -> Result<GapProbe> {
    let mut rows = Vec::new();
    for &sigma in sigmas {
        for &e in eps {
            let m = family(sigma).with_epsilon(e);
            let cache = build_cache(&m, n)?;
            let kf = leaf_scalar_curvature(&cache).min;
            let k = scalar_curvature_eps(&cache).min;
            let w = omega_sup_norm(&m, &cache);
            let fitted_c = (w > 1e-14).then(|| (kf - k) / w);
            rows.push(GapRow { sigma, epsilon: e, n, min_kf: kf, min_ktm_eps: k, omega_norm: w, fitted_c });
        }
    }
    let cs: Vec<f64> = rows.iter().filter_map(|r| r.fitted_c).collect();
    let (lo, hi) = cs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &c| (l.min(c), h.max(c)));
    let c_spread = if cs.is_empty() { 1.0 } else if lo > 0.0 { hi / lo } else { f64::INFINITY };
    Ok(GapProbe { rows, c_spread, stable: c_spread <= 2.0 })
}
