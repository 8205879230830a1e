//! Matrix-free sub-Dirac operator, its Bochner Laplacian and the curvature
//! endomorphism of the Lichnerowicz formula on spectral torus models.
//!
//! Sections are stored point-major with the fiber components interleaved.
//! All operators are assembled in the ε-orthonormal frame of the cache,
//! `E = (f_1…f_p, √ε h_1…√ε h_q)`, and written as `∇̃_a = E_a + Ω_a + T_a`
//! where `Ω_a` lifts `∇^F ⊕ ∇^{F⊥}` and `T_a` carries the `S`-terms.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::clifford::{GaussMat, GradedFiber, C64};
use crate::frame::{curvature_of, koszul_connection, LieFrameModel};
use crate::grid::{build_cache, CoordFoliatedTorus, GridGeometryCache};
use crate::report::{CheckRecord, Report};
use crate::spectral::GridShape;
use crate::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);

fn re(v: f64) -> C64 {
    C64::new(v, 0.0)
}

/// Section grid, fiber dimension and quadrature weights.
#[derive(Debug)]
pub struct SectionSpace {
    pub shape: GridShape,
    pub fiber_dim: usize,
    /// `√det g · cell volume` at every section point.
    pub weights: Vec<f64>,
}

impl SectionSpace {
    pub fn new(cache: &GridGeometryCache, fiber_dim: usize) -> Self {
        let cell = cache.shape.cell_volume();
        let weights = cache.geom_map().iter().map(|&g| cache.points[g].volume * cell).collect();
        SectionSpace { shape: cache.shape.clone(), fiber_dim, weights }
    }

    pub fn points(&self) -> usize {
        self.shape.len()
    }

    /// Total number of complex unknowns.
    pub fn dim(&self) -> usize {
        self.points() * self.fiber_dim
    }

    /// `⟨u, v⟩`, antilinear in `u`.
    pub fn inner(&self, u: &[C64], v: &[C64]) -> C64 {
        let d = self.fiber_dim;
        u.chunks(d)
            .zip(v.chunks(d))
            .zip(&self.weights)
            .map(|((a, b), w)| a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>() * w)
            .sum()
    }

    pub fn norm(&self, u: &[C64]) -> f64 {
        self.inner(u, u).re.max(0.0).sqrt()
    }

    /// Random trigonometric section with `|k_a| ≤ bandwidth` on every axis
    /// (capped by the axis resolution); coefficients decay like `1/(1+|k|²)`.
    pub fn random(&self, bandwidth: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
        let nd = self.shape.ndim();
        let bw: Vec<i64> = (0..nd).map(|a| bandwidth.min(self.shape.max_wavenumber(a)) as i64).collect();
        let mut modes: Vec<Vec<i64>> = vec![Vec::new()];
        for &b in &bw {
            modes = modes.into_iter().flat_map(|m| (-b..=b).map(move |k| [m.clone(), vec![k]].concat())).collect();
        }
        let d = self.fiber_dim;
        let coeffs: Vec<Vec<C64>> = modes
            .iter()
            .map(|k| {
                let damp = 1.0 / (1.0 + k.iter().map(|v| (v * v) as f64).sum::<f64>());
                (0..d).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * damp).collect()
            })
            .collect();
        let mut out = vec![ZERO; self.dim()];
        for (k, c) in modes.iter().zip(&coeffs) {
            self.add_plane_wave(&mut out, k, c);
        }
        out
    }

    /// `e^{2πi k·x} v`.
    pub fn plane_wave(&self, k: &[i64], v: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.dim()];
        self.add_plane_wave(&mut out, k, v);
        out
    }

    fn add_plane_wave(&self, out: &mut [C64], k: &[i64], v: &[C64]) {
        let d = self.fiber_dim;
        let shape = &self.shape;
        out.par_chunks_mut(d).enumerate().for_each(|(i, o)| {
            let x = shape.coords(i);
            let th: f64 = k.iter().zip(&x).map(|(k, x)| *k as f64 * x).sum::<f64>() * 2.0 * std::f64::consts::PI;
            let ph = C64::from_polar(1.0, th);
            for (o, v) in o.iter_mut().zip(v) {
                *o += ph * v;
            }
        });
    }
}

/// A section together with its fiber dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberSectionGrid {
    pub fiber_dim: usize,
    pub values: Vec<C64>,
}

impl FiberSectionGrid {
    pub fn zeros(space: &SectionSpace) -> Self {
        FiberSectionGrid { fiber_dim: space.fiber_dim, values: vec![ZERO; space.dim()] }
    }

    pub fn at(&self, point: usize) -> &[C64] {
        &self.values[point * self.fiber_dim..(point + 1) * self.fiber_dim]
    }
}

type ApplyFn = dyn Fn(&[C64]) -> Vec<C64> + Send + Sync;

/// Immutable matrix-free linear operator on one section space.
#[derive(Clone)]
pub struct LinearOperatorHandle {
    space: Arc<SectionSpace>,
    tag: String,
    f: Arc<ApplyFn>,
}

impl std::fmt::Debug for LinearOperatorHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "LinearOperatorHandle({})", self.tag)
    }
}

impl LinearOperatorHandle {
    pub fn new(space: Arc<SectionSpace>, tag: impl Into<String>, f: impl Fn(&[C64]) -> Vec<C64> + Send + Sync + 'static) -> Self {
        LinearOperatorHandle { space, tag: tag.into(), f: Arc::new(f) }
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn space(&self) -> &Arc<SectionSpace> {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn apply(&self, u: &[C64]) -> Vec<C64> {
        assert_eq!(u.len(), self.dim(), "section length mismatch for {}", self.tag);
        (self.f)(u)
    }

    pub fn apply_section(&self, u: &FiberSectionGrid) -> FiberSectionGrid {
        FiberSectionGrid { fiber_dim: u.fiber_dim, values: self.apply(&u.values) }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &LinearOperatorHandle) -> Self {
        let (a, b) = (self.f.clone(), other.f.clone());
        Self::new(self.space.clone(), format!("{}*{}", self.tag, other.tag), move |u| a(&b(u)))
    }

    /// `α·self + β·other`.
    pub fn combine(&self, alpha: f64, other: &LinearOperatorHandle, beta: f64) -> Self {
        let (a, b) = (self.f.clone(), other.f.clone());
        let tag = format!("{alpha}*{}+{beta}*{}", self.tag, other.tag);
        Self::new(self.space.clone(), tag, move |u| a(u).iter().zip(b(u)).map(|(x, y)| x * alpha + y * beta).collect())
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let a = self.f.clone();
        Self::new(self.space.clone(), format!("{alpha}*{}", self.tag), move |u| a(u).iter().map(|x| x * alpha).collect())
    }

    pub fn with_tag(mut self, tag: &str) -> Self {
        self.tag = tag.into();
        self
    }
}

/// How the curvature endomorphism is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CurvatureScaling {
    /// Curvature on the ε-orthonormal frame, unit prefactors.
    Unscaled,
    /// Curvature on `g^{F⊥}`-unit normal vectors with explicit `√ε` and `ε`
    /// prefactors on the mixed and normal-normal terms.
    EpsScaled,
}

/// The seven curvature terms of the right-hand side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CurvatureTerm {
    PhiLeaf,
    PhiMixed,
    PhiNormal,
    Scalar,
    PerpMixed,
    PerpLeaf,
    PerpNormal,
}

impl CurvatureTerm {
    pub const ALL: [CurvatureTerm; 7] = [
        CurvatureTerm::PhiLeaf,
        CurvatureTerm::PhiMixed,
        CurvatureTerm::PhiNormal,
        CurvatureTerm::Scalar,
        CurvatureTerm::PerpMixed,
        CurvatureTerm::PerpLeaf,
        CurvatureTerm::PerpNormal,
    ];

    fn index(self) -> usize {
        Self::ALL.iter().position(|t| *t == self).unwrap()
    }
}

/// Fiber matrices reused at every point.
struct CliffordTables {
    c: Vec<DMatrix<C64>>,
    cc: Vec<Vec<DMatrix<C64>>>,
    hat_hat: Vec<Vec<DMatrix<C64>>>,
}

impl CliffordTables {
    fn new(fiber: &GradedFiber) -> Self {
        let n = fiber.p() + fiber.q();
        let c: Vec<DMatrix<C64>> = (0..n).map(|a| fiber.c(a).to_c64()).collect();
        let cc = (0..n).map(|a| (0..n).map(|b| &c[a] * &c[b]).collect()).collect();
        let hat: Vec<DMatrix<C64>> = fiber.c_hat_h.iter().map(|m| m.to_c64()).collect();
        let hat_hat = hat.iter().map(|x| hat.iter().map(|y| x * y).collect()).collect();
        CliffordTables { c, cc, hat_hat }
    }
}

/// Pointwise coefficient fields of `D`, `Δ` and the curvature endomorphism.
struct Assembly {
    space: Arc<SectionSpace>,
    n: usize,
    d: usize,
    epsilon: f64,
    map: Vec<usize>,
    /// Section axes with more than one point.
    axes: Vec<usize>,
    /// `E[μ][a]` per geometry point.
    frame: Vec<DMatrix<f64>>,
    /// `Σ_a E[μ][a] c(E_a)` per geometry point, one per entry of `axes`.
    symbol: Vec<Vec<DMatrix<C64>>>,
    /// `Ω_a + T_a` per geometry point.
    conn: Vec<Vec<DMatrix<C64>>>,
    /// `Σ_a c(E_a)(Ω_a + T_a)`.
    mass: Vec<DMatrix<C64>>,
    /// `Σ_a ∇_{E_a} E_a` in frame components.
    div: Vec<Vec<f64>>,
    terms: Vec<Vec<DMatrix<C64>>>,
    endo: Vec<DMatrix<C64>>,
    grading: DMatrix<C64>,
}

fn check_consistent(cache: &GridGeometryCache, fiber: &GradedFiber) -> Result<()> {
    if cache.p != fiber.p() || cache.q != fiber.q() {
        return Err(Error::Dimension(format!(
            "fiber built for (p, q) = ({}, {}) but the model has ({}, {})",
            fiber.p(),
            fiber.q(),
            cache.p,
            cache.q
        )));
    }
    Ok(())
}

/// `Ω_a` and `T_a` at one geometry point.
fn connection_lifts(cache: &GridGeometryCache, fiber: &GradedFiber, tab: &CliffordTables, pt: usize, a: usize) -> (DMatrix<C64>, DMatrix<C64>) {
    let (p, q) = (cache.p, cache.q);
    let d = fiber.dim();
    let af = DMatrix::from_fn(p, p, |j, i| cache.gamma(pt, a, i, j));
    let ln = DMatrix::from_fn(q, q, |t, r| cache.gamma(pt, a, p + r, p + t));
    let omega = fiber.lift_spin(&af) + fiber.lift_normal(&ln);
    let mut t = DMatrix::zeros(d, d);
    for j in 0..p {
        for s in 0..q {
            let g = cache.gamma(pt, a, j, p + s);
            if g != 0.0 {
                t += &tab.cc[j][p + s] * re(0.5 * g);
            }
        }
    }
    (omega, t)
}

/// The seven curvature terms at one geometry point, in [`CurvatureTerm::ALL`] order.
fn curvature_terms(cache: &GridGeometryCache, fiber: &GradedFiber, tab: &CliffordTables, pt: usize, scaling: CurvatureScaling) -> Vec<DMatrix<C64>> {
    let (p, q, n) = (cache.p, cache.q, cache.n());
    let d = fiber.dim();
    // g-unit normal vectors are E_{p+s}/√ε; curvature arguments rescale accordingly
    let (unit, pre) = match scaling {
        CurvatureScaling::Unscaled => (1.0, 1.0),
        CurvatureScaling::EpsScaled => (1.0 / cache.epsilon.sqrt(), cache.epsilon.sqrt()),
    };
    let arg = |a: usize| if a < p { 1.0 } else { unit };
    let block = |a: usize, b: usize| match (a < p, b < p) {
        (true, true) => 0,
        (false, false) => 2,
        _ => 1,
    };
    let mut out = vec![DMatrix::<C64>::zeros(d, d); 7];
    let phi_trivial = fiber.phi.is_trivial();
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let blk = block(a, b);
            let scale = arg(a) * arg(b);
            // ½Σ_{ab} over ordered pairs reproduces the ½, 1, ½ and ⅛, ¼, ⅛ weights
            let prefactor = pre.powi(blk as i32);
            let rm = cache.r_perp_matrix(pt, a, b) * scale;
            if !phi_trivial {
                out[blk] += &tab.cc[a][b] * fiber.lift_phi(&rm) * re(0.5 * prefactor);
            }
            let mut quad = DMatrix::<C64>::zeros(d, d);
            for s in 0..q {
                for t in 0..q {
                    let v = rm[(s, t)];
                    if v != 0.0 {
                        quad += &tab.hat_hat[s][t] * re(v);
                    }
                }
            }
            let slot = [5, 4, 6][blk];
            out[slot] += &tab.cc[a][b] * quad * re(0.125 * prefactor);
        }
    }
    out[3] = DMatrix::identity(d, d) * re(0.25 * cache.scalar_curvature(pt));
    out
}

impl Assembly {
    fn new(cache: &GridGeometryCache, fiber: &GradedFiber, scaling: CurvatureScaling) -> Result<Self> {
        check_consistent(cache, fiber)?;
        let n = cache.n();
        let d = fiber.dim();
        let space = Arc::new(SectionSpace::new(cache, d));
        let tab = CliffordTables::new(fiber);
        let axes: Vec<usize> = (0..n).filter(|&a| cache.shape.sizes()[a] > 1).collect();
        let per_point: Vec<_> = (0..cache.points.len())
            .into_par_iter()
            .map(|pt| {
                let frame = cache.points[pt].frame.clone();
                let symbol: Vec<DMatrix<C64>> = axes
                    .iter()
                    .map(|&mu| {
                        let mut m = DMatrix::zeros(d, d);
                        for a in 0..n {
                            if frame[(mu, a)] != 0.0 {
                                m += &tab.c[a] * re(frame[(mu, a)]);
                            }
                        }
                        m
                    })
                    .collect();
                let mut conn = Vec::with_capacity(n);
                let mut mass = DMatrix::zeros(d, d);
                for a in 0..n {
                    let (om, t) = connection_lifts(cache, fiber, &tab, pt, a);
                    let w = om + t;
                    mass += &tab.c[a] * &w;
                    conn.push(w);
                }
                let div: Vec<f64> = (0..n).map(|k| (0..n).map(|a| cache.gamma(pt, a, a, k)).sum()).collect();
                let terms = curvature_terms(cache, fiber, &tab, pt, scaling);
                let endo = terms.iter().fold(DMatrix::zeros(d, d), |acc, t| acc + t);
                (frame, symbol, conn, mass, div, terms, endo)
            })
            .collect();
        let mut asm = Assembly {
            space,
            n,
            d,
            epsilon: cache.epsilon,
            map: cache.geom_map(),
            axes,
            frame: Vec::new(),
            symbol: Vec::new(),
            conn: Vec::new(),
            mass: Vec::new(),
            div: Vec::new(),
            terms: Vec::new(),
            endo: Vec::new(),
            grading: fiber.grading.to_c64(),
        };
        for (frame, symbol, conn, mass, div, terms, endo) in per_point {
            asm.frame.push(frame);
            asm.symbol.push(symbol);
            asm.conn.push(conn);
            asm.mass.push(mass);
            asm.div.push(div);
            asm.terms.push(terms);
            asm.endo.push(endo);
        }
        Ok(asm)
    }

    fn derivatives(&self, u: &[C64]) -> Vec<Vec<C64>> {
        self.axes.par_iter().map(|&mu| self.space.shape.derivative(u, self.d, mu)).collect()
    }

    /// `Σ_x M(x) u(x)` for a field of pointwise matrices.
    fn pointwise<'a>(&'a self, field: impl Fn(usize) -> &'a DMatrix<C64> + Sync, u: &[C64]) -> Vec<C64> {
        let d = self.d;
        let mut out = vec![ZERO; u.len()];
        out.par_chunks_mut(d).zip(u.par_chunks(d)).enumerate().for_each(|(x, (o, ux))| {
            matvec_add(field(self.map[x]), ux, o, ONE);
        });
        out
    }

    fn dirac(&self, u: &[C64]) -> Vec<C64> {
        let du = self.derivatives(u);
        let d = self.d;
        let mut out = vec![ZERO; u.len()];
        out.par_chunks_mut(d).enumerate().for_each(|(x, o)| {
            let g = self.map[x];
            for (k, dmu) in du.iter().enumerate() {
                matvec_add(&self.symbol[g][k], &dmu[x * d..(x + 1) * d], o, ONE);
            }
            matvec_add(&self.mass[g], &u[x * d..(x + 1) * d], o, ONE);
        });
        out
    }

    /// `∇̃_a u` given the coordinate derivatives of `u`.
    fn covariant(&self, u: &[C64], du: &[Vec<C64>], a: usize) -> Vec<C64> {
        let d = self.d;
        let mut out = vec![ZERO; u.len()];
        out.par_chunks_mut(d).enumerate().for_each(|(x, o)| {
            let g = self.map[x];
            for (k, &mu) in self.axes.iter().enumerate() {
                let e = self.frame[g][(mu, a)];
                if e != 0.0 {
                    for (o, v) in o.iter_mut().zip(&du[k][x * d..(x + 1) * d]) {
                        *o += v * e;
                    }
                }
            }
            matvec_add(&self.conn[g][a], &u[x * d..(x + 1) * d], o, ONE);
        });
        out
    }

    /// `Δ = Σ_a ∇̃_a ∇̃_a − ∇̃_{Σ_a ∇_{E_a} E_a}`.
    fn laplacian(&self, u: &[C64]) -> Vec<C64> {
        let du = self.derivatives(u);
        let first: Vec<Vec<C64>> = (0..self.n).map(|a| self.covariant(u, &du, a)).collect();
        let d = self.d;
        let mut out = vec![ZERO; u.len()];
        for (a, v) in first.iter().enumerate() {
            let dv = self.derivatives(v);
            let w = self.covariant(v, &dv, a);
            out.par_iter_mut().zip(w.par_iter()).for_each(|(o, w)| *o += w);
        }
        out.par_chunks_mut(d).enumerate().for_each(|(x, o)| {
            let y = &self.div[self.map[x]];
            for (k, v) in first.iter().enumerate() {
                if y[k] != 0.0 {
                    for (o, v) in o.iter_mut().zip(&v[x * d..(x + 1) * d]) {
                        *o -= v * y[k];
                    }
                }
            }
        });
        out
    }
}

const ONE: C64 = C64::new(1.0, 0.0);

/// `o += s · M u` with `M` column-major.
fn matvec_add(m: &DMatrix<C64>, u: &[C64], o: &mut [C64], s: C64) {
    let d = u.len();
    let data = m.as_slice();
    for j in 0..d {
        let uj = u[j] * s;
        if uj == ZERO {
            continue;
        }
        for (o, mij) in o.iter_mut().zip(&data[j * d..(j + 1) * d]) {
            *o += mij * uj;
        }
    }
}

/// Sub-Dirac operator, Laplacian and right-hand side sharing one assembly.
#[derive(Clone)]
pub struct SubDiracSystem {
    asm: Arc<Assembly>,
    pub model_id: String,
    pub scaling: CurvatureScaling,
}

impl std::fmt::Debug for SubDiracSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SubDiracSystem({}, eps={}, {:?})", self.model_id, self.asm.epsilon, self.scaling)
    }
}

impl SubDiracSystem {
    pub fn new(cache: &GridGeometryCache, fiber: &GradedFiber, scaling: CurvatureScaling) -> Result<Self> {
        Ok(SubDiracSystem { asm: Arc::new(Assembly::new(cache, fiber, scaling)?), model_id: cache.model_id.clone(), scaling })
    }

    pub fn space(&self) -> &Arc<SectionSpace> {
        &self.asm.space
    }

    pub fn epsilon(&self) -> f64 {
        self.asm.epsilon
    }

    pub fn dirac(&self) -> LinearOperatorHandle {
        let a = self.asm.clone();
        LinearOperatorHandle::new(self.asm.space.clone(), "D", move |u| a.dirac(u))
    }

    pub fn laplacian(&self) -> LinearOperatorHandle {
        let a = self.asm.clone();
        LinearOperatorHandle::new(self.asm.space.clone(), "Delta", move |u| a.laplacian(u))
    }

    pub fn dirac_squared(&self) -> LinearOperatorHandle {
        let a = self.asm.clone();
        LinearOperatorHandle::new(self.asm.space.clone(), "D^2", move |u| a.dirac(&a.dirac(u)))
    }

    /// Full curvature endomorphism as a multiplication operator.
    pub fn endomorphism(&self) -> LinearOperatorHandle {
        let a = self.asm.clone();
        LinearOperatorHandle::new(self.asm.space.clone(), "K", move |u| a.pointwise(|g| &a.endo[g], u))
    }

    pub fn term(&self, term: CurvatureTerm) -> LinearOperatorHandle {
        let a = self.asm.clone();
        let i = term.index();
        LinearOperatorHandle::new(self.asm.space.clone(), format!("{term:?}"), move |u| a.pointwise(|g| &a.terms[g][i], u))
    }

    /// `−Δ + K`.
    pub fn rhs(&self) -> LinearOperatorHandle {
        let a = self.asm.clone();
        LinearOperatorHandle::new(self.asm.space.clone(), "RHS", move |u| {
            let k = a.pointwise(|g| &a.endo[g], u);
            a.laplacian(u).iter().zip(k).map(|(l, k)| k - l).collect()
        })
    }

    pub fn grading(&self) -> LinearOperatorHandle {
        let a = self.asm.clone();
        LinearOperatorHandle::new(self.asm.space.clone(), "Gamma", move |u| a.pointwise(|_| &a.grading, u))
    }

    /// Pointwise curvature endomorphism at a geometry point.
    pub fn endomorphism_at(&self, pt: usize) -> &DMatrix<C64> {
        &self.asm.endo[pt]
    }

    pub fn term_at(&self, pt: usize, term: CurvatureTerm) -> &DMatrix<C64> {
        &self.asm.terms[pt][term.index()]
    }

    /// `Ω_a + T_a` at a geometry point.
    pub fn connection_at(&self, pt: usize, a: usize) -> &DMatrix<C64> {
        &self.asm.conn[pt][a]
    }
}

pub fn assemble_subdirac(cache: &GridGeometryCache, fiber: &GradedFiber) -> Result<LinearOperatorHandle> {
    Ok(SubDiracSystem::new(cache, fiber, CurvatureScaling::Unscaled)?.dirac())
}

pub fn bochner_laplacian(cache: &GridGeometryCache, fiber: &GradedFiber) -> Result<LinearOperatorHandle> {
    Ok(SubDiracSystem::new(cache, fiber, CurvatureScaling::Unscaled)?.laplacian())
}

pub fn lichnerowicz_rhs(cache: &GridGeometryCache, fiber: &GradedFiber) -> Result<LinearOperatorHandle> {
    Ok(SubDiracSystem::new(cache, fiber, CurvatureScaling::Unscaled)?.rhs())
}

/// `(D_ε, RHS_ε)` on a cache built for the ε-metric, with the curvature
/// terms evaluated on `g^{F⊥}`-unit normals and explicit prefactors.
pub fn assemble_eps_scaled(cache_eps: &GridGeometryCache, fiber: &GradedFiber, eps: f64) -> Result<(LinearOperatorHandle, LinearOperatorHandle)> {
    if (cache_eps.epsilon - eps).abs() > 1e-15 * eps.max(1.0) {
        return Err(Error::Precondition(format!("cache built for eps = {}, requested {eps}", cache_eps.epsilon)));
    }
    let sys = SubDiracSystem::new(cache_eps, fiber, CurvatureScaling::EpsScaled)?;
    Ok((sys.dirac(), sys.rhs()))
}

/// Lifted connection `Ω_a` (without the `S`-terms) at one geometry point.
pub fn lifted_connection(cache: &GridGeometryCache, fiber: &GradedFiber, pt: usize) -> Result<Vec<DMatrix<C64>>> {
    check_consistent(cache, fiber)?;
    let tab = CliffordTables::new(fiber);
    Ok((0..cache.n()).map(|a| connection_lifts(cache, fiber, &tab, pt, a).0).collect())
}

/// Normal-bundle part of the lifted connection at one geometry point.
pub fn lifted_normal_connection(cache: &GridGeometryCache, fiber: &GradedFiber, pt: usize) -> Result<Vec<DMatrix<C64>>> {
    check_consistent(cache, fiber)?;
    let (p, q) = (cache.p, cache.q);
    Ok((0..cache.n())
        .map(|a| fiber.lift_normal(&DMatrix::from_fn(q, q, |t, r| cache.gamma(pt, a, p + r, p + t))))
        .collect())
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn diff_norm(space: &SectionSpace, a: &[C64], b: &[C64]) -> f64 {
    let d: Vec<C64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    space.norm(&d)
}

/// `max |⟨Au, v⟩ − ⟨u, Av⟩| / (‖u‖‖v‖)` over random section pairs.
pub fn symmetry_defect(op: &LinearOperatorHandle, trials: usize, bandwidth: usize, seed: u64) -> f64 {
    let sp = op.space();
    let mut r = rng(seed);
    (0..trials)
        .map(|_| {
            let u = sp.random(bandwidth, &mut r);
            let v = sp.random(bandwidth, &mut r);
            let lhs = sp.inner(&op.apply(&u), &v);
            let rhs = sp.inner(&u, &op.apply(&v));
            (lhs - rhs).norm() / (sp.norm(&u) * sp.norm(&v))
        })
        .fold(0.0, f64::max)
}

/// `max ‖AΓu + ΓAu‖ / ‖u‖`.
pub fn anticommutator_defect(op: &LinearOperatorHandle, grading: &LinearOperatorHandle, trials: usize, bandwidth: usize, seed: u64) -> f64 {
    let sp = op.space();
    let mut r = rng(seed);
    (0..trials)
        .map(|_| {
            let u = sp.random(bandwidth, &mut r);
            let a = op.apply(&grading.apply(&u));
            let b = grading.apply(&op.apply(&u));
            let s: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            sp.norm(&s) / sp.norm(&u)
        })
        .fold(0.0, f64::max)
}

/// `min Re⟨Au, u⟩ / ‖u‖²`.
pub fn quadratic_form_min(op: &LinearOperatorHandle, trials: usize, bandwidth: usize, seed: u64) -> f64 {
    let sp = op.space();
    let mut r = rng(seed);
    (0..trials)
        .map(|_| {
            let u = sp.random(bandwidth, &mut r);
            sp.inner(&u, &op.apply(&u)).re / sp.inner(&u, &u).re
        })
        .fold(f64::INFINITY, f64::min)
}

/// `max ‖A(αu+βv) − αAu − βAv‖ / (|α|‖Au‖ + |β|‖Av‖)`.
pub fn linearity_defect(op: &LinearOperatorHandle, trials: usize, bandwidth: usize, seed: u64) -> f64 {
    let sp = op.space();
    let mut r = rng(seed);
    (0..trials)
        .map(|_| {
            let u = sp.random(bandwidth, &mut r);
            let v = sp.random(bandwidth, &mut r);
            let al = C64::new(r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0));
            let be = C64::new(r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0));
            let w: Vec<C64> = u.iter().zip(&v).map(|(x, y)| al * x + be * y).collect();
            let (au, av) = (op.apply(&u), op.apply(&v));
            let comb: Vec<C64> = au.iter().zip(&av).map(|(x, y)| al * x + be * y).collect();
            diff_norm(sp, &op.apply(&w), &comb) / (al.norm() * sp.norm(&au) + be.norm() * sp.norm(&av))
        })
        .fold(0.0, f64::max)
}

/// `r = max ‖D²u − RHS u‖ / ‖u‖` over random sections.
pub fn lichnerowicz_residual(sys: &SubDiracSystem, trials: usize, bandwidth: usize, seed: u64) -> f64 {
    let sp = sys.space().clone();
    let (d2, rhs) = (sys.dirac_squared(), sys.rhs());
    let mut r = rng(seed);
    (0..trials)
        .map(|_| {
            let u = sp.random(bandwidth, &mut r);
            diff_norm(&sp, &d2.apply(&u), &rhs.apply(&u)) / sp.norm(&u)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LadderRow {
    pub n: usize,
    pub epsilon: f64,
    pub residual: f64,
}

/// Residuals of the Lichnerowicz identity over a ladder of resolutions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualLadder {
    pub model_id: String,
    pub phi: String,
    pub scaling: CurvatureScaling,
    pub rows: Vec<LadderRow>,
}

impl ResidualLadder {
    /// `r(N_last) / r(N_prev)`.
    pub fn decay_ratio(&self) -> Option<f64> {
        let k = self.rows.len();
        (k >= 2).then(|| self.rows[k - 1].residual / self.rows[k - 2].residual)
    }

    pub fn last(&self) -> Option<f64> {
        self.rows.last().map(|r| r.residual)
    }
}

/// Test-section bandwidth used by the ladder: one mode on every axis, so
/// that products with the coefficient fields stay resolved at every rung.
pub const LADDER_BANDWIDTH: usize = 1;

pub fn lichnerowicz_ladder(
    m: &CoordFoliatedTorus,
    ns: &[usize],
    fiber: &GradedFiber,
    scaling: CurvatureScaling,
    trials: usize,
    seed: u64,
) -> Result<ResidualLadder> {
    let mut rows = Vec::new();
    for &n in ns {
        let cache = build_cache(m, n)?;
        let sys = SubDiracSystem::new(&cache, fiber, scaling)?;
        rows.push(LadderRow { n, epsilon: m.epsilon, residual: lichnerowicz_residual(&sys, trials, LADDER_BANDWIDTH, seed) });
    }
    Ok(ResidualLadder { model_id: m.id.clone(), phi: fiber.phi.label(), scaling, rows })
}

/// `‖(RHS + Δ) e_k‖ / ‖e_k‖` for plane waves `e^{2πi k x_axis} v` of growing
/// frequency; bounded iff the difference is of order zero.
pub fn order_probe(sys: &SubDiracSystem, axis: usize, freqs: &[i64], seed: u64) -> Vec<f64> {
    let sp = sys.space().clone();
    let mut r = rng(seed);
    let v: Vec<C64> = (0..sp.fiber_dim).map(|_| C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))).collect();
    let (rhs, lap) = (sys.rhs(), sys.laplacian());
    freqs
        .iter()
        .map(|&k| {
            let mut kv = vec![0; sp.shape.ndim()];
            kv[axis] = k;
            let u = sp.plane_wave(&kv, &v);
            let a = rhs.apply(&u);
            let b = lap.apply(&u);
            let s: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            sp.norm(&s) / sp.norm(&u)
        })
        .collect()
}

// Exact cross-check on Lie frame models: the operators are left-invariant,
// so D², Δ and the curvature endomorphism become polynomials in the frame
// derivations with constant matrix coefficients over Q(i).

type Qc = Complex<BigRational>;

#[derive(Clone, PartialEq)]
struct QMat {
    d: usize,
    a: Vec<Qc>,
}

impl QMat {
    fn zeros(d: usize) -> Self {
        QMat { d, a: vec![Qc::zero(); d * d] }
    }

    fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d);
        for i in 0..d {
            m.a[i * d + i] = Qc::one();
        }
        m
    }

    fn from_gauss(g: &GaussMat) -> Self {
        let d = g.dim();
        let mut m = Self::zeros(d);
        for r in 0..d {
            for c in 0..d {
                let v = g[(r, c)];
                m.a[r * d + c] = Qc::new(BigRational::from_integer(v.re.into()), BigRational::from_integer(v.im.into()));
            }
        }
        m
    }

    fn mul(&self, o: &QMat) -> QMat {
        let d = self.d;
        let mut m = Self::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let x = &self.a[i * d + k];
                if x.is_zero() {
                    continue;
                }
                for j in 0..d {
                    let y = &o.a[k * d + j];
                    if !y.is_zero() {
                        m.a[i * d + j] = &m.a[i * d + j] + x * y;
                    }
                }
            }
        }
        m
    }

    /// `self += s · o`.
    fn add_scaled(&mut self, o: &QMat, s: &BigRational) {
        if s.is_zero() {
            return;
        }
        for (x, y) in self.a.iter_mut().zip(&o.a) {
            if !y.is_zero() {
                *x = &*x + y.scale(s.clone());
            }
        }
    }

    fn is_zero(&self) -> bool {
        self.a.iter().all(|v| v.is_zero())
    }
}

/// `Σ second[a][b] e_a e_b + Σ first[a] e_a + zero`, normal ordered `a ≤ b`.
#[derive(Clone)]
struct DiffOp {
    n: usize,
    second: Vec<QMat>,
    first: Vec<QMat>,
    zero: QMat,
}

impl DiffOp {
    fn zeros(n: usize, d: usize) -> Self {
        DiffOp { n, second: vec![QMat::zeros(d); n * n], first: vec![QMat::zeros(d); n], zero: QMat::zeros(d) }
    }

    fn first_order(first: Vec<QMat>, zero: QMat) -> Self {
        let n = first.len();
        let d = zero.d;
        DiffOp { n, second: vec![QMat::zeros(d); n * n], first, zero }
    }

    fn add_scaled(&mut self, o: &DiffOp, s: &BigRational) {
        for (x, y) in self.second.iter_mut().zip(&o.second) {
            x.add_scaled(y, s);
        }
        for (x, y) in self.first.iter_mut().zip(&o.first) {
            x.add_scaled(y, s);
        }
        self.zero.add_scaled(&o.zero, s);
    }

    /// Product of two first-order operators with constant coefficients,
    /// normal ordered with `e_a e_b = e_b e_a + Σ_k C_abk e_k`.
    fn compose(p: &DiffOp, q: &DiffOp, c: &[BigRational]) -> DiffOp {
        let n = p.n;
        let d = p.zero.d;
        let mut out = DiffOp::zeros(n, d);
        let one = BigRational::one();
        for a in 0..n {
            for b in 0..n {
                let m = p.first[a].mul(&q.first[b]);
                if a <= b {
                    out.second[a * n + b].add_scaled(&m, &one);
                } else {
                    out.second[b * n + a].add_scaled(&m, &one);
                    for k in 0..n {
                        out.first[k].add_scaled(&m, &c[(a * n + b) * n + k]);
                    }
                }
            }
            out.first[a].add_scaled(&p.first[a].mul(&q.zero), &one);
            out.first[a].add_scaled(&p.zero.mul(&q.first[a]), &one);
        }
        out.zero = p.zero.mul(&q.zero);
        out
    }

    fn is_zero(&self) -> bool {
        self.second.iter().chain(&self.first).all(|m| m.is_zero()) && self.zero.is_zero()
    }
}

/// Exact check of the Lichnerowicz formula on a Lie frame model at
/// `ε = t0²`, with trivial φ. `D` and `Δ` are built literally from their
/// printed groupings (cubic S-terms, squared corrected derivatives and the
/// two divergence terms); `R^{F⊥}` is recomputed from the projected
/// connection; the normal lift uses its quadratic Clifford form.
pub fn frame_lichnerowicz_check(m: &LieFrameModel, t0: &BigRational) -> Result<Report> {
    let (p, q, n) = (m.p(), m.q(), m.n());
    let fiber = GradedFiber::new(p, q, crate::clifford::PhiBundleSpec::trivial())?;
    let d = fiber.dim();
    let table = koszul_connection(m);
    let mut gam = Vec::with_capacity(n * n * n);
    let mut cst = Vec::with_capacity(n * n * n);
    for a in 0..n {
        for b in 0..n {
            for k in 0..n {
                gam.push(table.get(a, b, k).evaluate(t0)?);
                cst.push(table.structure(a, b, k).evaluate(t0)?);
            }
        }
    }
    let g = |a: usize, b: usize, k: usize| &gam[(a * n + b) * n + k];
    let k_scalar = curvature_of(&table).scalar().evaluate(t0)?;
    let c: Vec<QMat> = (0..n).map(|a| QMat::from_gauss(fiber.c(a))).collect();
    let hat: Vec<QMat> = fiber.c_hat_h.iter().map(QMat::from_gauss).collect();
    let r = |num: i64, den: i64| BigRational::new(num.into(), den.into());
    let (quarter, half, eighth) = (r(1, 4), r(1, 2), r(1, 8));

    // Ω_a: spin lift of ∇^F plus the quadratic form of the Λ lift of ∇^{F⊥}
    let omega: Vec<QMat> = (0..n)
        .map(|a| {
            let mut w = QMat::zeros(d);
            for i in 0..p {
                for j in 0..p {
                    w.add_scaled(&c[i].mul(&c[j]), &(g(a, i, j) * &quarter));
                }
            }
            for s in 0..q {
                for t in 0..q {
                    let l = g(a, p + s, p + t) * &quarter;
                    w.add_scaled(&c[p + s].mul(&c[p + t]), &l);
                    w.add_scaled(&hat[s].mul(&hat[t]), &-l);
                }
            }
            w
        })
        .collect();

    // D: Σ c(E_a)(e_a + Ω_a) + ½Σ⟨S(f_i)f_j,h_s⟩ c c c + ½Σ⟨S(h_s)h_t,f_i⟩ c c c
    let mut dz = QMat::zeros(d);
    for a in 0..n {
        dz.add_scaled(&c[a].mul(&omega[a]), &BigRational::one());
    }
    for i in 0..p {
        for j in 0..p {
            for s in 0..q {
                dz.add_scaled(&c[i].mul(&c[j]).mul(&c[p + s]), &(g(i, j, p + s) * &half));
            }
        }
    }
    for s in 0..q {
        for t in 0..q {
            for i in 0..p {
                dz.add_scaled(&c[p + s].mul(&c[p + t]).mul(&c[i]), &(g(p + s, p + t, i) * &half));
            }
        }
    }
    let dop = DiffOp::first_order(c.clone(), dz);

    // Σ_i ∇_{f_i} f_i and Σ_s ∇_{h_s} h_s, each with its own S-correction
    let div_f: Vec<BigRational> = (0..n).map(|k| (0..p).map(|i| g(i, i, k).clone()).sum()).collect();
    let div_h: Vec<BigRational> = (0..n).map(|k| (p..n).map(|s| g(s, s, k).clone()).sum()).collect();
    let corrected_general = |y: &[BigRational], leaf_form: bool| {
        let mut first = vec![QMat::zeros(d); n];
        let mut zero = QMat::zeros(d);
        for a in 0..n {
            if y[a].is_zero() {
                continue;
            }
            first[a].add_scaled(&QMat::identity(d), &y[a]);
            zero.add_scaled(&omega[a], &y[a]);
            if leaf_form {
                for j in 0..p {
                    for s in 0..q {
                        zero.add_scaled(&c[j].mul(&c[p + s]), &(g(a, j, p + s) * &half * &y[a]));
                    }
                }
            } else {
                for t in 0..q {
                    for j in 0..p {
                        zero.add_scaled(&c[p + t].mul(&c[j]), &(g(a, p + t, j) * &half * &y[a]));
                    }
                }
            }
        }
        DiffOp::first_order(first, zero)
    };
    let unit = |a: usize| (0..n).map(|b| if a == b { BigRational::one() } else { BigRational::zero() }).collect::<Vec<_>>();
    let mut lap = DiffOp::zeros(n, d);
    for a in 0..n {
        let na = corrected_general(&unit(a), a < p);
        lap.add_scaled(&DiffOp::compose(&na, &na, &cst), &BigRational::one());
    }
    let minus_one = -BigRational::one();
    lap.add_scaled(&corrected_general(&div_f, true), &minus_one);
    lap.add_scaled(&corrected_general(&div_h, false), &minus_one);

    // R^{F⊥}(E_a,E_b)[s][t] = ⟨R h_t, h_s⟩ from the projected connection
    let r_perp = |a: usize, b: usize, t: usize, s: usize| {
        let mut v = BigRational::zero();
        for u in p..n {
            v += g(b, t, u) * g(a, u, s) - g(a, t, u) * g(b, u, s);
        }
        for k in 0..n {
            v -= &cst[(a * n + b) * n + k] * g(k, t, s);
        }
        v
    };
    let mut endo = QMat::zeros(d);
    endo.add_scaled(&QMat::identity(d), &(k_scalar.clone() * &quarter));
    for a in 0..n {
        for b in 0..n {
            // ¼ on mixed pairs, ⅛ on pure pairs; ordered sums over (a, b)
            // count each mixed pair twice
            let w = if (a < p) != (b < p) {
                if a < p {
                    quarter.clone()
                } else {
                    BigRational::zero()
                }
            } else {
                eighth.clone()
            };
            if w.is_zero() {
                continue;
            }
            let cab = c[a].mul(&c[b]);
            for s in 0..q {
                for t in 0..q {
                    let v = r_perp(a, b, p + t, p + s);
                    if !v.is_zero() {
                        endo.add_scaled(&cab.mul(&hat[s]).mul(&hat[t]), &(v * &w));
                    }
                }
            }
        }
    }

    let d2 = DiffOp::compose(&dop, &dop, &cst);
    let mut diff = d2.clone();
    diff.add_scaled(&lap, &BigRational::one());
    diff.zero.add_scaled(&endo, &minus_one);
    let eps = t0 * t0;
    let ok = diff.is_zero();
    let nonzero = |ops: &[QMat]| ops.iter().filter(|m| !m.is_zero()).count();
    let detail = format!(
        "eps={eps}: residual nonzero blocks second={} first={} zero={}; k={k_scalar}",
        nonzero(&diff.second),
        nonzero(&diff.first),
        usize::from(!diff.zero.is_zero())
    );
    let mut rep = Report::default();
    rep.push(CheckRecord::numeric(m.id(), "lichnerowicz.frame_exact", true, ok, detail));
    Ok(rep)
}
