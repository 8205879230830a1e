use adiabat::almost::{almost_isometric_check, almost_riemannian_check, construct_ar_structure, gamma_rescale_scaling_law, verify_split_omega, SplitFrameModel};
use adiabat::chern_weil::{char_class_report, WORKING_RESOLUTION};
use adiabat::clifford::{GradedFiber, PhiBundleSpec};
use adiabat::eigen::{low_spectrum_with, EigenOptions};
use adiabat::frame::{full_frame_suite, LieFrameModel};
use adiabat::grid::{build_cache, build_cache_full, gap_inequality_probe, leaf_scalar_curvature, omega_sup_norm, scalar_curvature_eps, CoordFoliatedTorus, GridGeometryCache};
use adiabat::model_io::{load_model, ModelFile, RationalText};
use adiabat::report::CheckRecord;
use adiabat::subdirac::{anticommutator_defect, frame_lichnerowicz_check, lichnerowicz_ladder, quadratic_form_min, symmetry_defect, CurvatureScaling, SubDiracSystem};
use adiabat::trig::TrigPolyField;
use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::output::{sci, Run};
use crate::{Config, Stop};

const RESIDUAL_HEADER: [&str; 6] = ["model_id", "N", "epsilon", "phi", "quantity", "value"];

fn load(c: &Config) -> Result<ModelFile, Stop> {
    load_model(&c.model).map_err(|e| Stop::Input(e.to_string()))
}

fn frame_model(c: &Config, run: &mut Run) -> Result<(LieFrameModel, Option<SplitFrameModel>), Stop> {
    match load(c)? {
        ModelFile::Frame { model, split, .. } => {
            run.model_id = model.id().into();
            Ok((model, split))
        }
        ModelFile::Grid { model, .. } => Err(Stop::Input(format!("{} is a grid model; this subcommand needs a frame model", model.id))),
    }
}

fn grid_model(c: &Config, run: &mut Run) -> Result<(CoordFoliatedTorus, PhiBundleSpec), Stop> {
    match load(c)? {
        ModelFile::Grid { model, phi } => {
            run.model_id = model.id.clone();
            Ok((model, phi))
        }
        ModelFile::Frame { model, .. } => Err(Stop::Input(format!("{} is a frame model; this subcommand needs a grid model", model.id()))),
    }
}

fn resolutions(c: &Config, default: &[usize]) -> Result<Vec<usize>, Stop> {
    let ns = if c.n.is_empty() { default.to_vec() } else { c.n.clone() };
    for &n in &ns {
        if !n.is_power_of_two() || !(4..=128).contains(&n) {
            return Err(Stop::Input(format!("N = {n} must be a power of two in [4, 128]")));
        }
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Stop::Input(format!("N ladder {ns:?} must be increasing")));
    }
    Ok(ns)
}

fn schedule(name: &str, given: &[f64], default: &[f64]) -> Result<Vec<f64>, Stop> {
    let s = if given.is_empty() { default.to_vec() } else { given.to_vec() };
    if let Some(v) = s.iter().find(|v| !v.is_finite() || **v <= 0.0) {
        return Err(Stop::Input(format!("{name} schedule entry {v} must be positive")));
    }
    if s.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Stop::Input(format!("{name} schedule {s:?} must be strictly decreasing")));
    }
    Ok(s)
}

fn gamma_schedule(c: &Config) -> Result<Vec<BigRational>, Stop> {
    let given: Vec<String> = if c.gamma.is_empty() { (0..=8).map(|k| format!("1/{}", 4u64.pow(k))).collect() } else { c.gamma.clone() };
    let gs = given.iter().map(|s| RationalText::Text(s.clone()).parse()).collect::<Result<Vec<_>, _>>()?;
    if let Some(g) = gs.iter().find(|g| **g <= BigRational::zero()) {
        return Err(Stop::Input(format!("gamma schedule entry {g} must be positive")));
    }
    if gs.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Stop::Input(format!("gamma schedule {given:?} must be strictly decreasing")));
    }
    Ok(gs)
}

fn fiber(m: &CoordFoliatedTorus, phi: &PhiBundleSpec) -> Result<GradedFiber, Stop> {
    Ok(GradedFiber::new(m.p, m.q, phi.clone())?)
}

fn blocks(m: &CoordFoliatedTorus) -> impl Iterator<Item = &TrigPolyField> {
    m.gf.iter().chain(&m.gp).flatten()
}

fn is_constant(m: &CoordFoliatedTorus) -> bool {
    blocks(m).all(|f| f.terms.iter().all(|t| t.freq.iter().all(|k| *k == 0) || (t.cos == 0.0 && t.sin == 0.0)))
}

/// The model with every non-constant metric term multiplied by `s`.
fn scale_variation(m: &CoordFoliatedTorus, s: f64) -> Result<CoordFoliatedTorus, Stop> {
    let scale = |b: &Vec<Vec<TrigPolyField>>| -> Vec<Vec<TrigPolyField>> {
        b.iter()
            .map(|row| {
                row.iter()
                    .map(|f| {
                        let mut g = f.clone();
                        for t in &mut g.terms {
                            if t.freq.iter().any(|k| *k != 0) {
                                t.cos *= s;
                                t.sin *= s;
                            }
                        }
                        g
                    })
                    .collect()
            })
            .collect()
    };
    Ok(CoordFoliatedTorus::new(&m.id, m.p, m.q, scale(&m.gf), scale(&m.gp), m.epsilon)?)
}

fn eps_list(c: &Config, m: &CoordFoliatedTorus) -> Result<Vec<f64>, Stop> {
    schedule("eps", &c.eps, &[m.epsilon])
}

pub fn verify_frame(c: &Config, run: &mut Run) -> Result<(), Stop> {
    let (m, split) = frame_model(c, run)?;
    run.report.extend(full_frame_suite(&m)?);
    if m.p() % 2 == 0 && m.q() % 2 == 0 {
        run.report.extend(frame_lichnerowicz_check(&m, &BigRational::one())?);
    }
    if let Some(s) = split {
        run.report.extend(almost_isometric_check(&s));
    }
    Ok(())
}

fn connection_defects(cache: &GridGeometryCache) -> (f64, f64, f64) {
    let n = cache.n();
    let (mut metric, mut torsion, mut sym, mut scale) = (0.0f64, 0.0f64, 0.0f64, 1.0f64);
    for pt in 0..cache.points.len() {
        for a in 0..n {
            for b in 0..n {
                for k in 0..n {
                    metric = metric.max((cache.gamma(pt, a, b, k) + cache.gamma(pt, a, k, b)).abs());
                    torsion = torsion.max((cache.gamma(pt, a, b, k) - cache.gamma(pt, b, a, k) - cache.structure(pt, a, b, k)).abs());
                    for d in 0..n {
                        let r = cache.riem(pt, a, b, k, d);
                        scale = scale.max(r.abs());
                        sym = sym
                            .max((r + cache.riem(pt, b, a, k, d)).abs())
                            .max((r + cache.riem(pt, a, b, d, k)).abs())
                            .max((r - cache.riem(pt, k, d, a, b)).abs());
                    }
                }
            }
        }
    }
    (metric, torsion, sym / scale)
}

fn section_band(n: usize) -> usize {
    (n / 4).clamp(1, 2)
}

pub fn verify_grid(c: &Config, run: &mut Run) -> Result<(), Stop> {
    let (base, phi) = grid_model(c, run)?;
    let ns = resolutions(c, &[16])?;
    let eps = eps_list(c, &base)?;
    let tol = c.tol.unwrap_or(1e-10);
    let t = run.table("grid.csv", &RESIDUAL_HEADER);
    for &e in &eps {
        let m = base.clone().with_epsilon(e);
        for &n in &ns {
            let cache = build_cache(&m, n)?;
            let id = format!("{} N={n} eps={e}", m.id);
            let (metric, torsion, sym) = connection_defects(&cache);
            run.record(CheckRecord::numeric(&id, "connection.metric", true, metric <= tol, format!("max defect {metric:e}")));
            run.record(CheckRecord::numeric(&id, "connection.torsion_free", true, torsion <= tol, format!("max defect {torsion:e}")));
            run.record(CheckRecord::numeric(&id, "curvature.symmetries", true, sym <= 1e-8, format!("relative defect {sym:e}")));
            let kf = leaf_scalar_curvature(&cache).min;
            let k = scalar_curvature_eps(&cache).min;
            let w = omega_sup_norm(&m, &cache);
            for (q, v) in [("min_kF", kf), ("min_kTMeps", k), ("omega_norm", w)] {
                run.row(t, vec![m.id.clone(), n.to_string(), e.to_string(), phi.label(), q.into(), sci(v)]);
            }
            if m.p % 2 == 0 && m.q % 2 == 0 {
                let sys = SubDiracSystem::new(&cache, &fiber(&m, &phi)?, CurvatureScaling::Unscaled)?;
                let band = section_band(n);
                let d = sys.dirac();
                let anti = anticommutator_defect(&d, &sys.grading(), c.trials, band, c.seed);
                let symm = symmetry_defect(&d, c.trials, band, c.seed + 1);
                let lap = quadratic_form_min(&sys.laplacian().scaled(-1.0), c.trials, band, c.seed + 2);
                run.record(CheckRecord::numeric(&id, "dirac.anticommutes_grading", true, anti <= 1e-9, format!("defect {anti:e}")));
                run.record(CheckRecord::numeric(&id, "dirac.symmetric", true, symm <= 1e-8, format!("defect {symm:e}")));
                run.record(CheckRecord::numeric(&id, "laplacian.nonnegative", true, lap >= -1e-8, format!("min Rayleigh quotient {lap:e}")));
                for (q, v) in [("anticommutator_defect", anti), ("symmetry_defect", symm), ("minus_laplacian_min", lap)] {
                    run.row(t, vec![m.id.clone(), n.to_string(), e.to_string(), phi.label(), q.into(), sci(v)]);
                }
            }
        }
    }
    Ok(())
}

pub fn lichnerowicz(c: &Config, run: &mut Run) -> Result<(), Stop> {
    let (base, phi) = grid_model(c, run)?;
    let ns = resolutions(c, &[8, 16, 32])?;
    let scaling = if c.eps.is_empty() { CurvatureScaling::Unscaled } else { CurvatureScaling::EpsScaled };
    let eps = eps_list(c, &base)?;
    let tol = c.tol.unwrap_or(1e-6);
    let fib = fiber(&base, &phi)?;
    let t = run.table("lichnerowicz.csv", &RESIDUAL_HEADER);
    let mut ladders = Vec::new();
    for &e in &eps {
        let m = base.clone().with_epsilon(e);
        let lad = lichnerowicz_ladder(&m, &ns, &fib, scaling, c.trials, c.seed)?;
        for r in &lad.rows {
            run.row(t, vec![m.id.clone(), r.n.to_string(), e.to_string(), lad.phi.clone(), "lichnerowicz_residual".into(), sci(r.residual)]);
        }
        let last = lad.last().unwrap_or(f64::INFINITY);
        let ratio = lad.decay_ratio();
        let exact = last <= 1e-10;
        let decays = ratio.is_some_and(|q| q < 1e-2) && last < tol;
        let detail = format!("last {last:e} ratio {}", ratio.map_or("none".into(), sci));
        run.record(CheckRecord::numeric(&format!("{} eps={e}", m.id), "lichnerowicz.decay", true, exact || decays, detail));
        ladders.push(lad);
    }
    run.attach("ladders", &ladders);
    Ok(())
}

pub fn sweep_eps(c: &Config, run: &mut Run) -> Result<(), Stop> {
    let (base, _) = grid_model(c, run)?;
    let ns = resolutions(c, &[16])?;
    let sigmas = schedule("sigma", &c.sigma, &[0.2, 0.1])?;
    let eps = schedule("eps", &c.eps, &[1.0 / 16.0, 1.0 / 64.0])?;
    let models = sigmas.iter().map(|&s| Ok((s, scale_variation(&base, s)?))).collect::<Result<Vec<_>, Stop>>()?;
    let family = |s: f64| models.iter().find(|(x, _)| x.to_bits() == s.to_bits()).map(|(_, m)| m.clone()).expect("sigma from schedule");
    let t = run.table("sweep.csv", &["sigma", "epsilon", "N", "min_kF", "min_kTMeps", "omega_norm"]);
    let factor = c.tol.unwrap_or(2.0);
    for &n in &ns {
        let probe = gap_inequality_probe(family, &sigmas, &eps, n)?;
        for r in &probe.rows {
            run.row(t, vec![r.sigma.to_string(), r.epsilon.to_string(), r.n.to_string(), sci(r.min_kf), sci(r.min_ktm_eps), sci(r.omega_norm)]);
        }
        let stable = probe.c_spread <= factor;
        run.record(CheckRecord::numeric(&format!("{} N={n}", base.id), "gap_probe.constant_stable", true, stable, format!("spread {}", sci(probe.c_spread))));
        run.attach(&format!("gap_probe_N{n}"), &probe);
    }
    Ok(())
}

/// `4π²|k|²` in the constant metric `g^F ⊕ g^{F⊥}/ε`, each with the fiber
/// multiplicity, smallest `count`.
fn lattice_values(m: &CoordFoliatedTorus, fiber_dim: usize, count: usize) -> Vec<f64> {
    let n = m.n();
    let x0 = vec![0.0; n];
    let g = DMatrix::from_fn(n, n, |i, j| match (i < m.p, j < m.p) {
        (true, true) => m.gf[i][j].eval(&x0),
        (false, false) => m.gp[i - m.p][j - m.p].eval(&x0) / m.epsilon,
        _ => 0.0,
    });
    let ginv = g.try_inverse().expect("metric is positive definite");
    let reach = 2i64;
    let mut vals = Vec::new();
    let total = (2 * reach + 1).pow(n as u32);
    for idx in 0..total {
        let mut r = idx;
        let k: Vec<f64> = (0..n)
            .map(|_| {
                let v = r % (2 * reach + 1) - reach;
                r /= 2 * reach + 1;
                v as f64
            })
            .collect();
        let kv = nalgebra::DVector::from_vec(k);
        let q = (kv.transpose() * &ginv * &kv)[(0, 0)];
        vals.extend(std::iter::repeat_n(4.0 * PI * PI * q, fiber_dim));
    }
    vals.sort_by(f64::total_cmp);
    vals.truncate(count);
    vals
}

pub fn spectrum(c: &Config, run: &mut Run) -> Result<(), Stop> {
    let (base, phi) = grid_model(c, run)?;
    let ns = resolutions(c, &[8])?;
    let eps = eps_list(c, &base)?;
    let tol = c.tol.unwrap_or(1e-6);
    let flat = is_constant(&base);
    let fib = fiber(&base, &phi)?;
    let opts = EigenOptions { max_iter: c.max_iter, seed: c.seed, ..Default::default() };
    let t = run.table("spectrum.csv", &RESIDUAL_HEADER);
    for &e in &eps {
        let m = base.clone().with_epsilon(e);
        for &n in &ns {
            let cache = if flat { build_cache_full(&m, n)? } else { build_cache(&m, n)? };
            let sys = SubDiracSystem::new(&cache, &fib, CurvatureScaling::Unscaled)?;
            let id = format!("{} N={n} eps={e}", m.id);
            let d2 = low_spectrum_with(&sys.dirac_squared(), c.count, &opts)?;
            let lap = low_spectrum_with(&sys.laplacian().scaled(-1.0), c.count, &opts)?;
            for (name, r) in [("dirac_squared", &d2), ("minus_laplacian", &lap)] {
                for (i, v) in r.values.iter().enumerate() {
                    run.row(t, vec![m.id.clone(), n.to_string(), e.to_string(), phi.label(), format!("{name}[{i}]"), sci(*v)]);
                }
                let lo = r.values.first().copied().unwrap_or(0.0);
                run.record(CheckRecord::numeric(&id, &format!("{name}.nonnegative"), true, lo >= -1e-8, format!("smallest {lo:e}")));
            }
            if flat {
                let want = lattice_values(&m, fib.dim(), c.count);
                let err = d2.values.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                let ok = d2.values.len() == want.len() && err <= tol;
                run.record(CheckRecord::numeric(&id, "dirac_squared.flat_lattice", true, ok, format!("max deviation {err:e}")));
            }
        }
    }
    Ok(())
}

pub fn charclass(c: &Config, run: &mut Run) -> Result<(), Stop> {
    let (m, phi) = grid_model(c, run)?;
    let ns = resolutions(c, &[WORKING_RESOLUTION])?;
    let tol = c.tol.unwrap_or(1e-7);
    let t = run.table("charclass.csv", &["model_id", "N", "phi", "quantity", "value"]);
    let mut reports = Vec::new();
    for &n in &ns {
        let rep = char_class_report(&m, n, &phi)?;
        let id = format!("{} N={n}", m.id);
        for p in rep.pairings() {
            run.row(t, vec![m.id.clone(), n.to_string(), rep.phi.clone(), p.name, sci(p.value)]);
        }
        run.row(t, vec![m.id.clone(), n.to_string(), rep.phi.clone(), "closure_residual".into(), sci(rep.closure_residual)]);
        let cl = rep.closure_residual;
        run.record(CheckRecord::numeric(&id, "charclass.closed", true, cl <= 1e-6, format!("max |d form| {cl:e}")));
        let mx = rep.max_abs_pairing();
        run.record(CheckRecord::numeric(&id, "charclass.pairings_vanish", true, mx <= tol, format!("max |pairing| {mx:e}")));
        reports.push(rep);
    }
    for w in reports.windows(2) {
        let diff = w[0].pairings().iter().zip(w[1].pairings()).map(|(a, b)| (a.value - b.value).abs()).fold(0.0, f64::max);
        run.record(CheckRecord::numeric(&format!("{} N={}->{}", m.id, w[0].n_grid, w[1].n_grid), "charclass.refinement_stable", true, diff <= tol, format!("max change {diff:e}")));
    }
    run.attach("reports", &reports);
    Ok(())
}

pub fn appendix_check(c: &Config, run: &mut Run) -> Result<(), Stop> {
    let (_, split) = frame_model(c, run)?;
    let s = split.ok_or_else(|| Stop::Input(format!("{} declares no split of the normal bundle", run.model_id)))?;
    let gammas = gamma_schedule(c)?;
    let tol = c.tol.unwrap_or(1e-12);
    let iso = almost_isometric_check(&s);
    let ok = iso.gated_pass();
    run.report.extend(iso);
    if !ok {
        return Ok(());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    run.report.extend(verify_split_omega(&s, c.trials.max(1), &mut rng)?);
    let law = gamma_rescale_scaling_law(&s, &gammas)?;
    run.report.extend(law.records(tol));
    let t = run.table("gamma_law.csv", &["gamma", "omega_norm", "predicted"]);
    for r in &law.rows {
        run.row(t, vec![r.gamma.clone(), sci(r.omega_norm), sci(r.predicted)]);
    }
    let mut fam = construct_ar_structure(&s)?;
    fam.schedule = law.rows.iter().map(|r| r.gamma_f64).collect();
    let ar = almost_riemannian_check(&fam)?;
    run.record(ar.record());
    let t = run.table("almost_riemannian.csv", &["gamma", "omega_norm"]);
    for r in &ar.rows {
        run.row(t, vec![r.sigma.to_string(), sci(r.omega_norm)]);
    }
    run.attach("gamma_law", &law);
    run.attach("almost_riemannian", &ar);
    Ok(())
}
