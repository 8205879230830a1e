mod common;

use std::f64::consts::PI;

use adiabat::chern_weil::*;
use adiabat::clifford::{PhiBundleSpec, PhiKind, PhiTerm};
use adiabat::grid::{build_cache, CoordFoliatedTorus};
use adiabat::spectral::GridShape;
use common::{six_model, tilted_model, twisted_model, wave};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn doubled_normal() -> PhiBundleSpec {
    PhiBundleSpec { terms: vec![PhiTerm { kind: PhiKind::Ext, k: 1, mult: 2 }] }
}

fn assert_close(a: &FormField, b: &FormField, tol: f64) {
    let d = a.add(&b.scaled(-1.0)).sup_norm();
    assert!(d <= tol, "forms differ by {d:e}");
}

#[test]
fn flat_classes_are_trivial() {
    let m = CoordFoliatedTorus::flat(2, 2);
    let c = build_cache(&m, 8).unwrap();
    let rf = leaf_curvature(&c);
    let rp = normal_curvature(&c);
    let one = FormField::constant(4, &c.gshape, 1.0);
    assert_close(&a_hat_form(&rf).unwrap(), &one, 0.0);
    assert_close(&l_form(&rp).unwrap(), &one, 0.0);
    assert_close(&ch_form(&rp).unwrap(), &one.scaled(2.0), 0.0);
    assert_eq!(euler_form(&rp).unwrap().sup_norm(), 0.0);
    let r = char_class_report(&m, 8, &PhiBundleSpec::normal()).unwrap();
    assert_eq!(r.max_abs_pairing(), 0.0);
    assert_eq!(r.closure_residual, 0.0);
}

#[test]
fn doubling_phi_doubles_ch() {
    let c = build_cache(&twisted_model(), 16).unwrap();
    let rp = normal_curvature(&c);
    assert!(rp.sup_norm() > 1e-3);
    let single = ch_form(&phi_curvature(&c, &PhiBundleSpec::normal())).unwrap();
    let double = ch_form(&phi_curvature(&c, &doubled_normal())).unwrap();
    assert_close(&double, &single.scaled(2.0), 1e-12);
    assert_close(&single, &ch_form(&rp).unwrap(), 1e-12);
}

#[test]
fn curvature_matrices_are_skew() {
    let c = build_cache(&tilted_model(0.5), 16).unwrap();
    for r in [leaf_curvature(&c), normal_curvature(&c), tangent_curvature(&c)] {
        assert!(r.skew_defect() < 1e-9, "{}", r.skew_defect());
    }
}

#[test]
fn odd_rank_euler_is_refused() {
    let c = build_cache(&CoordFoliatedTorus::flat(1, 2), 8).unwrap();
    assert!(euler_form(&leaf_curvature(&c)).is_err());
    let r = char_class_report(&CoordFoliatedTorus::flat(2, 3), 4, &PhiBundleSpec::normal()).unwrap();
    assert!(r.a_hat_euler.is_none());
}

/// `(α∧β)` on `dx0∧dx1∧dx2∧dx3` for 2-forms given as skew coefficient
/// matrices.
fn wedge22(a: &[[f64; 4]; 4], b: &[[f64; 4]; 4]) -> f64 {
    a[0][1] * b[2][3] - a[0][2] * b[1][3] + a[0][3] * b[1][2] + a[1][2] * b[0][3] - a[1][3] * b[0][2] + a[2][3] * b[0][1]
}

#[test]
fn first_pontryagin_form_matches_trace_formula() {
    let c = build_cache(&tilted_model(0.7), 16).unwrap();
    let rt = tangent_curvature(&c);
    let p1 = &pontryagin_forms(&rt).unwrap()[0];
    let mut worst = 0.0f64;
    let mut biggest = 0.0f64;
    for pt in 0..c.gshape.len() {
        let two = |i: usize, j: usize| {
            let mut out = [[0.0; 4]; 4];
            for (mu, row) in out.iter_mut().enumerate() {
                for (nu, v) in row.iter_mut().enumerate() {
                    *v = rt.get(pt, i, j, mu, nu);
                }
            }
            out
        };
        let mut tr = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                tr += wedge22(&two(i, j), &two(j, i));
            }
        }
        let want = -tr / (8.0 * PI * PI);
        worst = worst.max((p1.coeffs[pt][15] - want).abs());
        biggest = biggest.max(want.abs());
    }
    assert!(biggest > 1e-4, "p1 vanishes pointwise: {biggest:e}");
    assert!(worst < 1e-12 * biggest.max(1.0), "{worst:e}");
}

#[test]
fn euler_form_of_a_surface_is_gauss_curvature() {
    let n = 2;
    let m = CoordFoliatedTorus::new(
        "surface",
        1,
        1,
        vec![vec![wave(n, 1.0, &[(vec![1, 1], 0.3, 0.1)])]],
        vec![vec![wave(n, 1.5, &[(vec![0, 1], 0.0, 0.4), (vec![1, 0], 0.2, 0.0)])]],
        1.0,
    )
    .unwrap();
    let c = build_cache(&m, 32).unwrap();
    let e = euler_form(&tangent_curvature(&c)).unwrap();
    for (pt, g) in c.points.iter().enumerate() {
        let k = c.scalar_curvature(pt) / 2.0;
        let want = k * g.volume / (2.0 * PI);
        assert!((e.coeffs[pt][3] - want).abs() < 1e-10, "{} vs {}", e.coeffs[pt][3], want);
    }
    // Gauss–Bonnet on the torus
    assert!(e.integrate_top().abs() < 1e-10);
}

/// Constant curvature field at a single point with random skew entries.
fn random_field(n: usize, rank: usize, seed: u64) -> CurvatureField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = CurvatureField::zeros(n, rank, &GridShape::new(&vec![1; n]));
    for i in 0..rank {
        for j in i + 1..rank {
            for mu in 0..n {
                for nu in mu + 1..n {
                    let v: f64 = rng.gen_range(-3.0..3.0);
                    f.set(0, i, j, mu, nu, v);
                    f.set(0, j, i, mu, nu, -v);
                }
            }
        }
    }
    f
}

/// `exp` of a nilpotent form, truncated past degree `n`.
fn exp_form(u: &FormField) -> FormField {
    let mut out = FormField::constant(u.n, &u.shape, 1.0);
    let mut term = out.clone();
    for k in 1..=u.n / 2 {
        term = term.wedge(u).scaled(1.0 / k as f64);
        out = out.add(&term);
    }
    out
}

fn power_sum(r: &CurvatureField, k: usize) -> FormField {
    r.trace_power(2 * k).scaled(if k % 2 == 0 { 0.5 } else { -0.5 })
}

#[test]
fn genera_match_power_sum_route() {
    for seed in 0..4 {
        let r = random_field(8, 4, seed);
        let (s1, s2) = (power_sum(&r, 1), power_sum(&r, 2));
        // log of x/2 / sinh(x/2) and of x / tanh x, through x⁴
        let a_hat = exp_form(&s1.scaled(-1.0 / 24.0).add(&s2.scaled(1.0 / 2880.0)));
        let l = exp_form(&s1.scaled(1.0 / 3.0).add(&s2.scaled(-7.0 / 90.0)));
        let scale = a_hat.sup_norm().max(l.sup_norm());
        assert_close(&a_hat_form(&r).unwrap(), &a_hat, 1e-13 * scale);
        assert_close(&l_form(&r).unwrap(), &l, 1e-12 * scale);
        // p₂ = e₂(x²), and for rank 4 that is Pf²
        let pf = euler_form(&r).unwrap();
        assert_close(&pontryagin_forms(&r).unwrap()[1], &pf.wedge(&pf), 1e-12 * scale);
    }
}

#[test]
fn chern_character_is_trace_exponential() {
    let r = random_field(4, 3, 9);
    let a = r.trace_power(2);
    let want = FormField::constant(4, &r.shape, 3.0).add(&a.scaled(-0.5)).add(&r.trace_power(4).scaled(1.0 / 24.0));
    assert_close(&ch_form(&r).unwrap(), &want, 1e-12);
    // ch of a complexified real bundle starts rank + p₁
    let p1 = &pontryagin_forms(&r).unwrap()[0];
    assert_close(&ch_form(&r).unwrap().part(4), p1, 1e-12);
}

#[test]
fn six_dimensional_pairings_vanish_and_forms_are_closed() {
    let m = six_model("six", 1.0);
    let phi = PhiBundleSpec::normal();
    let r16 = char_class_report(&m, 16, &phi).unwrap();
    let r32 = char_class_report(&m, WORKING_RESOLUTION, &phi).unwrap();
    // 16 points per axis under-resolve d of the rational integrands
    assert!(r16.closure_residual > 1e-6);
    assert!(r32.closure_residual <= 1e-6, "closure {:e}", r32.closure_residual);
    for r in [&r16, &r32] {
        assert!(r.max_abs_pairing() <= 1e-7, "{:?}", r.pairings());
    }
    for (a, b) in r16.pairings().iter().zip(r32.pairings()) {
        assert_eq!(a.name, b.name);
        assert!((a.value - b.value).abs() <= 1e-7);
    }
    let names: Vec<String> = r16.pairings().into_iter().map(|p| p.name).collect();
    assert!(names.contains(&"a_hat_p1".to_string()));
    assert!(names.contains(&"a_hat_euler".to_string()));
}

#[test]
fn six_dimensional_integrands_are_not_identically_zero() {
    let c = build_cache(&six_model("six", 1.0), 16).unwrap();
    let rp = normal_curvature(&c);
    let rf = leaf_curvature(&c);
    let p1 = &pontryagin_forms(&rf).unwrap()[0];
    let e = euler_form(&rp).unwrap();
    assert!(p1.sup_norm() > 1e-4, "{:e}", p1.sup_norm());
    assert!(e.sup_norm() > 1e-3, "{:e}", e.sup_norm());
    let top = a_hat_form(&rf).unwrap().wedge(&e).part(6);
    assert!(top.sup_norm() > 1e-6, "{:e}", top.sup_norm());
    assert!(top.integrate_top().abs() < 1e-7);
}

#[test]
fn four_dimensional_euler_pairing_and_closure() {
    for m in [tilted_model(1.0), twisted_model()] {
        let r = char_class_report(&m, WORKING_RESOLUTION, &PhiBundleSpec::normal()).unwrap();
        assert!(r.closure_residual <= 1e-6, "{}: {:e}", m.id, r.closure_residual);
        assert!(r.max_abs_pairing() <= 1e-7, "{:?}", r.pairings());
    }
}

#[test]
fn pairings_are_metric_independent() {
    let phi = doubled_normal();
    let a = char_class_report(&six_model("a", 1.0), 16, &phi).unwrap();
    for amp in [0.75, 0.5, 0.25] {
        let b = char_class_report(&six_model("b", amp), 16, &phi).unwrap();
        for (x, y) in a.pairings().iter().zip(b.pairings()) {
            assert!((x.value - y.value).abs() <= 1e-6, "{}: {} vs {}", x.name, x.value, y.value);
        }
    }
}

#[test]
fn vanishing_pairings_keeps_order() {
    let ms = vec![tilted_model(1.0), CoordFoliatedTorus::flat(2, 2)];
    let rs = vanishing_pairings(&ms, 8, &PhiBundleSpec::normal()).unwrap();
    assert_eq!(rs.len(), 2);
    assert_eq!(rs[0].model_id, ms[0].id);
    assert_eq!(rs[1].n_grid, 8);
}

fn random_form(n: usize, shape: &GridShape, seed: u64) -> FormField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = FormField::zero(n, shape);
    let modes: Vec<(Vec<f64>, usize, f64)> = (0..6)
        .map(|_| ((0..n).map(|_| rng.gen_range(-2i64..=2) as f64).collect(), rng.gen_range(0..1usize << n), rng.gen_range(-1.0..1.0)))
        .collect();
    for (pt, v) in f.coeffs.iter_mut().enumerate() {
        let x = shape.coords(pt);
        for (k, mask, a) in &modes {
            let ph: f64 = k.iter().zip(&x).map(|(k, x)| k * x).sum();
            v[*mask] += a * (2.0 * PI * ph).sin();
        }
    }
    f
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn d_squared_vanishes(seed in 0u64..1000) {
        let sh = GridShape::new(&[8, 8, 8]);
        let f = random_form(3, &sh, seed);
        prop_assert!(f.exterior_derivative().exterior_derivative().sup_norm() < 1e-9);
    }

    #[test]
    fn d_obeys_leibniz(seed in 0u64..1000) {
        let sh = GridShape::new(&[16, 16, 16]);
        // degree-homogeneous pieces keep the sign rule simple
        let a = random_form(3, &sh, seed).part(1);
        let b = random_form(3, &sh, seed + 7);
        let lhs = a.wedge(&b).exterior_derivative();
        let rhs = a.exterior_derivative().wedge(&b).add(&a.wedge(&b.exterior_derivative()).scaled(-1.0));
        prop_assert!(lhs.add(&rhs.scaled(-1.0)).sup_norm() < 1e-8);
    }

    #[test]
    fn wedge_is_graded_commutative(seed in 0u64..1000) {
        let sh = GridShape::new(&[2, 2, 2, 2]);
        let a = random_form(4, &sh, seed).part(1);
        let b = random_form(4, &sh, seed + 1).part(2);
        let c = random_form(4, &sh, seed + 2).part(1);
        assert_close(&a.wedge(&b), &b.wedge(&a), 1e-14);
        assert_close(&a.wedge(&c), &c.wedge(&a).scaled(-1.0), 1e-14);
    }
}
