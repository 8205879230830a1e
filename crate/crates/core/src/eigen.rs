//! Smallest eigenvalues of operators that are self-adjoint for the weighted
//! section inner product: block LOBPCG with a Fourier preconditioner, and a
//! dense path for small problems.
//!
//! Both work on the band-limited sections `|k_a| ≤ K_a`. The discrete
//! operators are self-adjoint only where products with the coefficient
//! fields are resolved, so a Rayleigh–Ritz on the whole grid picks up
//! aliasing near the Nyquist modes; on the band-limited subspace it is a
//! Galerkin method converging spectrally to the continuum values.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::clifford::C64;
use crate::spectral::GridShape;
use crate::subdirac::{LinearOperatorHandle, SectionSpace};
use crate::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Galerkin problems up to this many unknowns are solved densely.
pub const DENSE_LIMIT: usize = 1024;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenOptions {
    pub max_iter: usize,
    /// Converged when the Galerkin residual, the band-limited part of
    /// `vol·(Ax − θx)`, has norm `≤ tol · max(1, |θ|)`.
    pub tol: f64,
    pub seed: u64,
    /// Extra block vectors beyond the requested count.
    pub guard: usize,
    /// Per-axis bandwidth of the search space; `None` uses [`default_band`].
    pub band: Option<Vec<usize>>,
    pub force_iterative: bool,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { max_iter: 500, tol: 1e-8, seed: 42, guard: 6, band: None, force_iterative: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub dense: bool,
    /// Dimension of the band-limited search space.
    pub galerkin_dim: usize,
}

/// `K_a = N_a / 4`, but at least 1 on axes that carry any non-Nyquist mode.
pub fn default_band(shape: &GridShape) -> Vec<usize> {
    (0..shape.ndim()).map(|a| (shape.sizes()[a] / 4).max(shape.max_wavenumber(a).min(1))).collect()
}

/// Smallest `count` eigenvalues of `op`, ascending.
pub fn low_spectrum(op: &LinearOperatorHandle, count: usize) -> Result<Vec<f64>> {
    Ok(low_spectrum_with(op, count, &EigenOptions::default())?.values)
}

pub fn low_spectrum_with(op: &LinearOperatorHandle, count: usize, opts: &EigenOptions) -> Result<EigenResult> {
    solve(op, count, opts, false)
}

/// Smallest eigenvalues of `F²` for a self-adjoint `F`, with Ritz values
/// from the quadratic form `‖F x‖²`.
pub fn low_spectrum_squared(f: &LinearOperatorHandle, count: usize, opts: &EigenOptions) -> Result<EigenResult> {
    solve(f, count, opts, true)
}

fn solve(op: &LinearOperatorHandle, count: usize, opts: &EigenOptions, squared: bool) -> Result<EigenResult> {
    let sp = op.space();
    let band = opts.band.clone().unwrap_or_else(|| default_band(&sp.shape));
    if band.len() != sp.shape.ndim() {
        return Err(Error::Dimension(format!("band has {} axes, grid has {}", band.len(), sp.shape.ndim())));
    }
    let band: Vec<usize> = band.iter().enumerate().map(|(a, &b)| b.min(sp.shape.max_wavenumber(a))).collect();
    let modes = modes(&band);
    let gdim = modes.len() * sp.fiber_dim;
    if count == 0 || count > gdim {
        return Err(Error::Precondition(format!("requested {count} eigenvalues from a {gdim}-dimensional search space")));
    }
    if gdim <= DENSE_LIMIT && !opts.force_iterative {
        return dense(op, count, &modes, squared);
    }
    lobpcg(op, count, opts, &band, gdim, squared)
}

fn modes(band: &[usize]) -> Vec<Vec<i64>> {
    let mut out: Vec<Vec<i64>> = vec![Vec::new()];
    for &b in band {
        let b = b as i64;
        out = out.into_iter().flat_map(|m| (-b..=b).map(move |k| [m.clone(), vec![k]].concat())).collect();
    }
    out
}

fn in_band(k: &[i64], band: &[usize]) -> bool {
    k.iter().zip(band).all(|(k, b)| k.unsigned_abs() as usize <= *b)
}

/// Galerkin matrices on the plane-wave basis, reduced with the Cholesky
/// factor of the weighted Gram matrix. Columns of `⟨φ_i, A φ_j⟩` come from
/// one forward transform of `W·Aφ_j` each.
fn dense(op: &LinearOperatorHandle, count: usize, modes: &[Vec<i64>], squared: bool) -> Result<EigenResult> {
    let sp = op.space();
    let d = sp.fiber_dim;
    let slots: Vec<usize> = modes.iter().map(|k| sp.shape.slot(k)).collect();
    let m = modes.len() * d;
    let basis = |j: usize| {
        let mut v = vec![ZERO; d];
        v[j % d] = C64::new(1.0, 0.0);
        sp.plane_wave(&modes[j / d], &v)
    };
    let coefficients = |u: &[C64]| -> Vec<C64> {
        let wu: Vec<C64> = u.iter().enumerate().map(|(i, x)| x * sp.weights[i / d]).collect();
        let f = sp.shape.forward(&wu, d);
        slots.iter().flat_map(|&s| f[s * d..(s + 1) * d].to_vec()).collect()
    };
    let mut g = DMatrix::<C64>::zeros(m, m);
    let mut h = DMatrix::<C64>::zeros(m, m);
    let mut images = Vec::new();
    for j in 0..m {
        let v = basis(j);
        let av = op.apply(&v);
        g.set_column(j, &nalgebra::DVector::from_vec(coefficients(&v)));
        if squared {
            let sw: Vec<C64> = av.iter().enumerate().map(|(i, x)| x * sp.weights[i / d].sqrt()).collect();
            images.push(sw);
        } else {
            h.set_column(j, &nalgebra::DVector::from_vec(coefficients(&av)));
        }
    }
    if squared {
        let n = images[0].len();
        let b = DMatrix::from_fn(n, m, |i, j| images[j][i]);
        h = b.adjoint() * b;
    }
    let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
    let g = (&g + g.adjoint()) * C64::new(0.5, 0.0);
    let chol = g.cholesky().ok_or_else(|| Error::Precondition("weighted Gram matrix is not positive definite".into()))?;
    let linv = chol.l().try_inverse().ok_or_else(|| Error::Precondition("singular Gram factor".into()))?;
    let red = &linv * h * linv.adjoint();
    let red = (&red + red.adjoint()) * C64::new(0.5, 0.0);
    let mut vals: Vec<f64> = SymmetricEigen::new(red).eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals.truncate(count);
    Ok(EigenResult { residuals: vec![0.0; vals.len()], values: vals, iterations: 0, dense: true, galerkin_dim: m })
}

struct Block<'a> {
    sp: &'a SectionSpace,
}

impl Block<'_> {
    fn gram(&self, a: &[Vec<C64>], b: &[Vec<C64>]) -> DMatrix<C64> {
        DMatrix::from_fn(a.len(), b.len(), |i, j| self.sp.inner(&a[i], &b[j]))
    }

    /// `Σ_j v_j c[j][col]` for every column of `c`.
    fn combine(&self, v: &[Vec<C64>], c: &DMatrix<C64>) -> Vec<Vec<C64>> {
        let n = v.first().map_or(0, |x| x.len());
        (0..c.ncols())
            .map(|col| {
                let mut out = vec![ZERO; n];
                for (j, vj) in v.iter().enumerate() {
                    let s = c[(j, col)];
                    if s != ZERO {
                        for (o, x) in out.iter_mut().zip(vj) {
                            *o += x * s;
                        }
                    }
                }
                out
            })
            .collect()
    }

    /// Appends the vectors of `extra` orthonormalised against `basis`,
    /// dropping nearly dependent ones. Two passes of Gram–Schmidt.
    fn extend_orthonormal(&self, basis: &mut Vec<Vec<C64>>, extra: Vec<Vec<C64>>) {
        for mut v in extra {
            let n0 = self.sp.norm(&v);
            if n0 == 0.0 {
                continue;
            }
            for _ in 0..2 {
                for b in basis.iter() {
                    let c = self.sp.inner(b, &v);
                    for (x, y) in v.iter_mut().zip(b) {
                        *x -= y * c;
                    }
                }
            }
            let nv = self.sp.norm(&v);
            if nv > 1e-10 * n0 {
                let inv = 1.0 / nv;
                v.iter_mut().for_each(|x| *x *= inv);
                basis.push(v);
            }
        }
    }
}

/// Ritz pairs from `⟨s, a⟩` (plain) or `⟨a, a⟩` (squared, `a = F s`).
fn rayleigh_ritz(blk: &Block, s: &[Vec<C64>], as_: &[Vec<C64>], squared: bool) -> (Vec<f64>, DMatrix<C64>) {
    let h = if squared { blk.gram(as_, as_) } else { blk.gram(s, as_) };
    let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(s.len(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

fn lobpcg(op: &LinearOperatorHandle, count: usize, opts: &EigenOptions, band: &[usize], gdim: usize, squared: bool) -> Result<EigenResult> {
    let sp = op.space().clone();
    let blk = Block { sp: &sp };
    let n = op.dim();
    let m = (count + opts.guard).min(gdim);
    let d = sp.fiber_dim;
    let cell = sp.shape.cell_volume();
    let project = |r: &[C64]| sp.shape.fourier_multiplier(r, d, |k| if in_band(k, band) { 1.0 } else { 0.0 });
    let precond = |r: &[C64]| {
        sp.shape.fourier_multiplier(r, d, |k| {
            if !in_band(k, band) {
                return 0.0;
            }
            let k2: f64 = k.iter().map(|v| (v * v) as f64).sum();
            1.0 / (1.0 + 4.0 * std::f64::consts::PI.powi(2) * k2)
        })
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let init: Vec<Vec<C64>> = (0..m)
        .map(|_| {
            let v: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            project(&v)
        })
        .collect();
    let mut x = Vec::new();
    blk.extend_orthonormal(&mut x, init);
    let mut ax: Vec<Vec<C64>> = x.iter().map(|v| op.apply(v)).collect();
    let (mut theta, c) = rayleigh_ritz(&blk, &x, &ax, squared);
    x = blk.combine(&x, &c);
    ax = blk.combine(&ax, &c);
    let mut p: Vec<Vec<C64>> = Vec::new();
    let mut last_res = f64::INFINITY;

    for it in 1..=opts.max_iter {
        let resid: Vec<Vec<C64>> = (0..x.len())
            .map(|i| {
                let a = if squared { op.apply(&ax[i]) } else { ax[i].clone() };
                // Galerkin residual: the band-limited part of vol·(Ax − θx)
                let r: Vec<C64> = a.iter().zip(&x[i]).enumerate().map(|(j, (a, v))| (a - v * theta[i]) * (sp.weights[j / d] / cell)).collect();
                project(&r)
            })
            .collect();
        let norms: Vec<f64> = resid.iter().map(|r| sp.norm(r)).collect();
        last_res = (0..count).map(|i| norms[i] / theta[i].abs().max(1.0)).fold(0.0, f64::max);
        if last_res <= opts.tol {
            return Ok(EigenResult { values: theta[..count].to_vec(), residuals: norms[..count].to_vec(), iterations: it, dense: false, galerkin_dim: gdim });
        }
        let w: Vec<Vec<C64>> = resid.iter().map(|r| precond(r)).collect();
        let mut s = x.clone();
        blk.extend_orthonormal(&mut s, p.clone());
        blk.extend_orthonormal(&mut s, w);
        let mut as_ = ax.clone();
        as_.extend(s[x.len()..].iter().map(|v| op.apply(v)));
        let (vals, vecs) = rayleigh_ritz(&blk, &s, &as_, squared);
        let k = x.len().min(vals.len());
        let c = vecs.columns(0, k).into_owned();
        let xn = blk.combine(&s, &c);
        // search directions: the part of the new block outside the old one
        let mut cp = c.clone();
        cp.rows_mut(0, x.len()).fill(ZERO);
        p = blk.combine(&s, &cp);
        // fresh products keep the residuals honest once they reach round-off
        ax = xn.iter().map(|v| op.apply(v)).collect();
        x = xn;
        theta = vals[..k].to_vec();
    }
    Err(Error::NoConvergence { iterations: opts.max_iter, residual: last_res })
}
