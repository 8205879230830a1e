mod common;

use adiabat::clifford::{GradedFiber, PhiBundleSpec, C64};
use adiabat::eigen::{low_spectrum_with, EigenOptions};
use adiabat::frame::LieFrameModel;
use adiabat::grid::*;
use adiabat::subdirac::*;
use adiabat::Error;
use common::{rotating_model, tilted_model, twisted_model};
use nalgebra::DMatrix;
use num_rational::BigRational;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn fiber() -> GradedFiber {
    GradedFiber::new(2, 2, PhiBundleSpec::trivial()).unwrap()
}

fn system(m: &CoordFoliatedTorus, n: usize, scaling: CurvatureScaling) -> SubDiracSystem {
    SubDiracSystem::new(&build_cache(m, n).unwrap(), &fiber(), scaling).unwrap()
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

fn rel_diff(sp: &SectionSpace, a: &[C64], b: &[C64]) -> f64 {
    let d: Vec<C64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    sp.norm(&d) / sp.norm(b).max(1e-300)
}

#[test]
fn flat_dirac_symbol() {
    let sys = SubDiracSystem::new(&build_cache_full(&CoordFoliatedTorus::flat(2, 2), 8).unwrap(), &fiber(), CurvatureScaling::Unscaled).unwrap();
    let sp = sys.space().clone();
    let v: Vec<C64> = (0..sp.fiber_dim).map(|i| C64::new(1.0 + i as f64, 0.5 - i as f64)).collect();
    for k in [[1, 0, 0, 0], [0, 2, -1, 0], [3, -1, 2, 1]] {
        let u = sp.plane_wave(&k, &v);
        let k2: i64 = k.iter().map(|x| x * x).sum();
        let want: Vec<C64> = u.iter().map(|x| x * (4.0 * PI * PI * k2 as f64)).collect();
        assert!(rel_diff(&sp, &sys.dirac_squared().apply(&u), &want) < 1e-12);
        assert!(rel_diff(&sp, &sys.laplacian().apply(&u), &want.iter().map(|x| -x).collect::<Vec<_>>()) < 1e-12);
    }
}

#[test]
fn flat_rhs_is_minus_laplacian_and_residual_vanishes() {
    for n in [8, 16] {
        let sys = SubDiracSystem::new(&build_cache_full(&CoordFoliatedTorus::flat(2, 2), n).unwrap(), &fiber(), CurvatureScaling::Unscaled).unwrap();
        assert!(max_abs(sys.endomorphism_at(0)) == 0.0);
        assert!(lichnerowicz_residual(&sys, 3, 2, 42) <= 1e-10);
    }
}

#[test]
fn warped_ladder_decays_spectrally() {
    let lad = lichnerowicz_ladder(&CoordFoliatedTorus::warped(2, 2, 0.5), &[8, 16, 32], &fiber(), CurvatureScaling::Unscaled, 3, 42).unwrap();
    let r: Vec<f64> = lad.rows.iter().map(|r| r.residual).collect();
    assert!(r[0] > r[1] && r[1] > r[2], "{r:?}");
    assert!(lad.decay_ratio().unwrap() < 1e-2, "{r:?}");
    assert!(lad.last().unwrap() < 1e-6, "{r:?}");
}

#[test]
fn eps_scaled_ladder_at_each_epsilon() {
    for eps in [1.0, 0.25, 0.0625] {
        let m = CoordFoliatedTorus::warped(2, 2, 0.5).with_epsilon(eps);
        let lad = lichnerowicz_ladder(&m, &[8, 16, 32], &fiber(), CurvatureScaling::EpsScaled, 3, 42).unwrap();
        let r: Vec<f64> = lad.rows.iter().map(|r| r.residual).collect();
        assert!(lad.decay_ratio().unwrap() < 1e-2, "eps {eps}: {r:?}");
        assert!(lad.last().unwrap() < 1e-6, "eps {eps}: {r:?}");
    }
}

#[test]
fn eps_scaled_endomorphism_equals_unscaled() {
    for eps in [1.0, 0.25] {
        let c = build_cache(&tilted_model(eps), 8).unwrap();
        let a = SubDiracSystem::new(&c, &fiber(), CurvatureScaling::Unscaled).unwrap();
        let b = SubDiracSystem::new(&c, &fiber(), CurvatureScaling::EpsScaled).unwrap();
        for pt in 0..c.points.len() {
            for t in CurvatureTerm::ALL {
                let d = a.term_at(pt, t) - b.term_at(pt, t);
                assert!(max_abs(&d) < 1e-12 * (1.0 + max_abs(a.term_at(pt, t))), "{t:?} at {pt}");
            }
        }
    }
}

#[test]
fn eps_one_reduces_to_plain_operators() {
    let c = build_cache(&tilted_model(1.0), 8).unwrap();
    let (d, rhs) = assemble_eps_scaled(&c, &fiber(), 1.0).unwrap();
    let d0 = assemble_subdirac(&c, &fiber()).unwrap();
    let r0 = lichnerowicz_rhs(&c, &fiber()).unwrap();
    let sp = d.space().clone();
    let u = sp.random(1, &mut ChaCha8Rng::seed_from_u64(3));
    assert!(rel_diff(&sp, &d.apply(&u), &d0.apply(&u)) < 1e-14);
    assert!(rel_diff(&sp, &rhs.apply(&u), &r0.apply(&u)) < 1e-14);
    assert!(matches!(assemble_eps_scaled(&c, &fiber(), 0.5), Err(Error::Precondition(_))));
}

#[test]
fn flat_transverse_symbol_scales_with_eps() {
    let eps = 0.25;
    let c = build_cache_full(&CoordFoliatedTorus::flat(2, 2).with_epsilon(eps), 8).unwrap();
    let (d, _) = assemble_eps_scaled(&c, &fiber(), eps).unwrap();
    let sp = d.space().clone();
    let v: Vec<C64> = (0..sp.fiber_dim).map(|i| C64::new(0.3 * i as f64, 1.0)).collect();
    for (k, lam) in [([0, 0, 1, 0], eps), ([0, 0, 2, 1], 5.0 * eps), ([1, 0, 0, 2], 1.0 + 4.0 * eps)] {
        let u = sp.plane_wave(&k, &v);
        let want: Vec<C64> = u.iter().map(|x| x * (4.0 * PI * PI * lam)).collect();
        assert!(rel_diff(&sp, &d.apply(&d.apply(&u)), &want) < 1e-12);
    }
}

#[test]
fn quartering_eps_quarters_pure_normal_term() {
    let (e0, e1) = (0.5, 0.125);
    let a = system(&tilted_model(e0), 8, CurvatureScaling::EpsScaled);
    let b = system(&tilted_model(e1), 8, CurvatureScaling::EpsScaled);
    let sp = a.space().clone();
    let u = sp.random(1, &mut ChaCha8Rng::seed_from_u64(11));
    let ta = a.term(CurvatureTerm::PerpNormal).apply(&u);
    let tb = b.term(CurvatureTerm::PerpNormal).apply(&u);
    assert!(sp.norm(&ta) > 1e-3);
    let quarter: Vec<C64> = ta.iter().map(|x| x * 0.25).collect();
    assert!(rel_diff(&sp, &tb, &quarter) < 1e-10);
}

#[test]
fn operator_structure_on_curved_models() {
    for m in [CoordFoliatedTorus::warped(2, 2, 0.5), tilted_model(0.5), rotating_model()] {
        let sys = system(&m, 16, CurvatureScaling::Unscaled);
        let (d, lap) = (sys.dirac(), sys.laplacian());
        assert!(anticommutator_defect(&d, &sys.grading(), 3, 2, 1) <= 1e-9, "{}", m.id);
        assert!(symmetry_defect(&d, 3, 2, 2) <= 1e-8, "{}", m.id);
        assert!(symmetry_defect(&lap, 3, 2, 3) <= 1e-8, "{}", m.id);
        assert!(symmetry_defect(&sys.rhs(), 3, 2, 4) <= 1e-8, "{}", m.id);
    }
}

#[test]
fn minus_laplacian_is_nonnegative() {
    let sys = system(&tilted_model(0.5), 16, CurvatureScaling::Unscaled);
    assert!(quadratic_form_min(&sys.laplacian().scaled(-1.0), 50, 2, 5) >= -1e-8);
}

#[test]
fn handles_are_linear() {
    let sys = system(&rotating_model(), 8, CurvatureScaling::Unscaled);
    for op in [sys.dirac(), sys.laplacian(), sys.rhs(), sys.dirac_squared()] {
        assert!(linearity_defect(&op, 3, 2, 6) <= 1e-11, "{}", op.tag());
    }
}

#[test]
fn normal_phi_changes_only_phi_terms() {
    let c = build_cache(&twisted_model(), 8).unwrap();
    let triv = SubDiracSystem::new(&c, &fiber(), CurvatureScaling::Unscaled).unwrap();
    let fib = GradedFiber::new(2, 2, PhiBundleSpec::normal()).unwrap();
    let norm = SubDiracSystem::new(&c, &fib, CurvatureScaling::Unscaled).unwrap();
    let r = fib.dim_phi;
    let id = DMatrix::<C64>::identity(r, r);
    let phi_terms = [CurvatureTerm::PhiLeaf, CurvatureTerm::PhiMixed, CurvatureTerm::PhiNormal];
    let mut seen = 0.0f64;
    for pt in 0..c.points.len() {
        let mut phi_sum = DMatrix::<C64>::zeros(fib.dim(), fib.dim());
        for t in CurvatureTerm::ALL {
            if phi_terms.contains(&t) {
                assert_eq!(max_abs(triv.term_at(pt, t)), 0.0);
                phi_sum += norm.term_at(pt, t);
            } else {
                let d = norm.term_at(pt, t) - triv.term_at(pt, t).kronecker(&id);
                assert!(max_abs(&d) < 1e-12, "{t:?}");
            }
        }
        // ½ Σ_{a≠b} c(E_a)c(E_b) R^φ(E_a,E_b) from the curvature lift
        let mut want = DMatrix::<C64>::zeros(fib.dim(), fib.dim());
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    let cab = (fib.c(a) * fib.c(b)).to_c64();
                    want += cab * fib.lift_phi(&c.r_perp_matrix(pt, a, b)) * C64::new(0.5, 0.0);
                }
            }
        }
        assert!(max_abs(&(&phi_sum - &want)) < 1e-12);
        let diff = norm.endomorphism_at(pt) - triv.endomorphism_at(pt).kronecker(&id);
        assert!(max_abs(&(&diff - &want)) < 1e-12);
        seen = seen.max(max_abs(&want));
    }
    assert!(seen > 1e-2, "normal curvature should be visible on the twisted model");
}

#[test]
fn curvature_difference_is_zeroth_order() {
    let sys = system(&tilted_model(0.5), 32, CurvatureScaling::Unscaled);
    let ks = [1, 2, 4, 8];
    for axis in [0, 2] {
        let v = order_probe(&sys, axis, &ks, 8);
        let (lo, hi) = v.iter().fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(*x), b.max(*x)));
        assert!(lo > 0.0 && hi / lo < 3.0, "axis {axis}: {v:?}");
    }
}

#[test]
fn lifted_connection_shapes() {
    let f = fiber();
    let flat = build_cache(&CoordFoliatedTorus::flat(2, 2), 4).unwrap();
    for m in lifted_connection(&flat, &f, 0).unwrap() {
        assert_eq!(max_abs(&m), 0.0);
    }
    let c = build_cache(&rotating_model(), 8).unwrap();
    let mut along_x1 = 0.0f64;
    for pt in 0..c.points.len() {
        for (a, m) in lifted_connection(&c, &f, pt).unwrap().iter().enumerate() {
            assert!(max_abs(&(m + m.adjoint())) < 1e-10, "not skew at {pt}, {a}");
            let g = f.grading.to_c64();
            assert!(max_abs(&(m * &g - &g * m)) < 1e-10);
        }
        for (a, m) in lifted_normal_connection(&c, &f, pt).unwrap().iter().enumerate() {
            if a == 0 {
                along_x1 = along_x1.max(max_abs(m));
            } else {
                assert!(max_abs(m) < 1e-12, "normal lift along axis {a}");
            }
        }
    }
    assert!(along_x1 > 1e-2);
    // the conformal warp keeps the unit normal frame parallel
    let w = build_cache(&CoordFoliatedTorus::warped(2, 2, 0.5), 8).unwrap();
    for pt in 0..w.points.len() {
        for m in lifted_normal_connection(&w, &f, pt).unwrap() {
            assert!(max_abs(&m) < 1e-12);
        }
    }
}

#[test]
fn frame_models_satisfy_identity_exactly() {
    let one = BigRational::from_integer(1.into());
    let half = BigRational::new(1.into(), 2.into());
    let cases = [
        (LieFrameModel::abelian(2, 2), one.clone()),
        (LieFrameModel::kodaira_thurston(&[3, 4]).unwrap(), one.clone()),
        (LieFrameModel::kodaira_thurston(&[3, 4]).unwrap(), half.clone()),
        (LieFrameModel::kodaira_thurston(&[1, 4]).unwrap(), one),
        (LieFrameModel::kodaira_thurston(&[1, 4]).unwrap(), half),
    ];
    for (m, t) in cases {
        let rep = frame_lichnerowicz_check(&m, &t).unwrap();
        assert!(rep.gated_pass(), "{}: {:?}", m.id(), rep.records);
    }
}

#[test]
fn flat_low_spectrum_is_lattice() {
    let sys = SubDiracSystem::new(&build_cache_full(&CoordFoliatedTorus::flat(2, 2), 8).unwrap(), &fiber(), CurvatureScaling::Unscaled).unwrap();
    let r = low_spectrum_with(&sys.dirac_squared(), 10, &EigenOptions::default()).unwrap();
    let lattice = 4.0 * PI * PI;
    for (i, v) in r.values.iter().enumerate() {
        let want = if i < 8 { 0.0 } else { lattice };
        assert!((v - want).abs() <= 1e-6, "{i}: {v}");
    }
}

#[test]
fn minus_laplacian_spectrum_is_nonnegative() {
    let sys = system(&CoordFoliatedTorus::warped(2, 2, 0.5), 16, CurvatureScaling::Unscaled);
    let opts = EigenOptions { band: Some(vec![2, 1, 1, 1]), ..Default::default() };
    let r = low_spectrum_with(&sys.laplacian().scaled(-1.0), 10, &opts).unwrap();
    assert!(r.values.iter().all(|v| *v >= -1e-8), "{:?}", r.values);
    // constants are not harmonic once the normal metric varies
    assert!(r.values[0] > 0.1);
}

#[test]
fn dimension_mismatch_is_rejected() {
    let c = build_cache(&CoordFoliatedTorus::flat(2, 2), 4).unwrap();
    let f = GradedFiber::new(2, 4, PhiBundleSpec::trivial()).unwrap();
    assert!(matches!(SubDiracSystem::new(&c, &f, CurvatureScaling::Unscaled), Err(Error::Dimension(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn grading_and_symmetry_hold_for_random_warps(sigma in 0.05f64..0.6, seed in 0u64..1000) {
        let sys = system(&CoordFoliatedTorus::warped(2, 2, sigma), 16, CurvatureScaling::Unscaled);
        prop_assert!(anticommutator_defect(&sys.dirac(), &sys.grading(), 1, 2, seed) <= 1e-9);
        prop_assert!(symmetry_defect(&sys.dirac(), 1, 2, seed) <= 1e-8);
    }

    #[test]
    fn linear_combinations_commute_with_apply(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000) {
        let sys = system(&tilted_model(0.5), 8, CurvatureScaling::EpsScaled);
        let d = sys.dirac();
        let sp = sys.space().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (u, v) = (sp.random(1, &mut rng), sp.random(1, &mut rng));
        let w: Vec<C64> = u.iter().zip(&v).map(|(x, y)| x * a + y * b).collect();
        let lhs = d.apply(&w);
        let rhs: Vec<C64> = d.apply(&u).iter().zip(d.apply(&v)).map(|(x, y)| x * a + y * b).collect();
        let scale = sp.norm(&d.apply(&u)) * a.abs() + sp.norm(&d.apply(&v)) * b.abs() + 1e-300;
        let diff: Vec<C64> = lhs.iter().zip(&rhs).map(|(x, y)| x - y).collect();
        prop_assert!(sp.norm(&diff) / scale <= 1e-11);
    }
}
