use adiabat::almost::*;
use adiabat::frame::{omega_tensor, Bracket, LieFrameModel};
use adiabat::grid::CoordFoliatedTorus;
use adiabat::random_models;
use num_rational::BigRational;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn ladder() -> Vec<BigRational> {
    vec![q(1, 1), q(1, 4), q(1, 16)]
}

fn kt(leaf: &[usize], f2: &[usize]) -> SplitFrameModel {
    SplitFrameModel::new(LieFrameModel::kodaira_thurston(leaf).unwrap(), f2).unwrap()
}

#[test]
fn split_declaration_is_validated() {
    let m = LieFrameModel::kodaira_thurston(&[3, 4]).unwrap();
    assert!(SplitFrameModel::new(m.clone(), &[3]).is_err());
    assert!(SplitFrameModel::new(m.clone(), &[2, 2]).is_err());
    let s = SplitFrameModel::new(m, &[2]).unwrap();
    assert_eq!((s.q1(), s.q2()), (1, 1));
    assert_eq!(s.f1(), vec![1]);
}

#[test]
fn abelian_splits_pass_with_zero_omega() {
    let s = SplitFrameModel::new(LieFrameModel::abelian(2, 3), &[4, 5]).unwrap();
    assert!(almost_isometric_check(&s).gated_pass());
    assert!(split_omega(&s).unwrap().is_zero());
    let fam = construct_ar_structure(&s).unwrap();
    let r = almost_riemannian_check(&fam).unwrap();
    assert!(r.passed);
    assert!(r.rows.iter().all(|row| row.omega_norm == 0.0));
    let law = gamma_rescale_scaling_law(&s, &ladder()).unwrap();
    assert!(law.rows.iter().all(|r| r.exact && r.omega_norm == 0.0));
}

#[test]
fn kodaira_thurston_central_leaf_split_passes() {
    let s = kt(&[3, 4], &[2]);
    let rep = almost_isometric_check(&s);
    assert!(rep.gated_pass(), "{:?}", rep);
    assert!(rep.find("almost_isometric.cross").unwrap().cases > 0);
}

#[test]
fn kodaira_thurston_mixed_split_fails_cross_condition() {
    let s = kt(&[1, 4], &[3]);
    let rep = almost_isometric_check(&s);
    assert!(rep.find("almost_isometric.block_skew").unwrap().passed);
    let cross = rep.find("almost_isometric.cross").unwrap();
    assert!(!cross.passed);
    // ⟨[e1, e2], e3⟩ = 1 with e1 in F, e2 in F⊥₁, e3 in F⊥₂
    assert_eq!(cross.indices, vec![1, 3, 4]);
    assert_eq!(cross.lhs, adiabat::exact::ExactScalar::one().to_string());
    let err = split_omega(&s).unwrap_err().to_string();
    assert!(err.contains("almost_isometric.cross"), "{err}");
    assert!(gamma_rescale_scaling_law(&s, &ladder()).is_err());
    assert!(construct_ar_structure(&s).is_err());
}

#[test]
fn kodaira_thurston_passing_split_with_nonzero_omega() {
    // F = {e1, e4}, F⊥₁ = {e3}, F⊥₂ = {e2}: [e1, e2] = e3 lands in F⊥₁
    let s = kt(&[1, 4], &[2]);
    assert!(almost_isometric_check(&s).gated_pass());
    let w = split_omega(&s).unwrap();
    assert!(!w.is_zero());
    assert_eq!(w, omega_tensor(&s.model));
    let rep = verify_split_omega(&s, 100, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
    assert!(rep.gated_pass(), "{:?}", rep);
    assert!(!rep.find("split_omega.coefficient_minus_half").unwrap().passed);

    let law = gamma_rescale_scaling_law(&s, &ladder()).unwrap();
    assert!(law.records(1e-12).gated_pass(), "{:?}", law);
    assert!((law.base_norm - 1.0).abs() < 1e-15);
    assert_eq!(law.rows[1].omega_norm, 0.5 * law.base_norm);
    assert!((law.slope.unwrap() - 0.5).abs() < 1e-10);
    assert!(law.rows.iter().all(|r| r.koszul_route == Some(true)));
    assert!(law.to_csv().starts_with("gamma,omega_norm,predicted\n1,"));

    let fam = construct_ar_structure(&s).unwrap();
    let r = almost_riemannian_check(&fam).unwrap();
    assert!(r.passed && r.decreasing);
    assert!((r.decay_exponent.unwrap() - 0.5).abs() < 1e-10);
}

#[test]
fn gamma_one_is_identity_and_irrational_roots_are_exact() {
    let s = kt(&[1, 4], &[2]);
    let law = gamma_rescale_scaling_law(&s, &[q(1, 1), q(1, 2), q(2, 3)]).unwrap();
    assert_eq!(law.rows[0].omega_norm, law.base_norm);
    for r in &law.rows[1..] {
        assert!(r.exact);
        assert_eq!(r.koszul_route, None);
        assert!((r.omega_norm - r.predicted).abs() < 1e-12);
    }
    assert!(gamma_rescale_scaling_law(&s, &[q(0, 1)]).is_err());
}

#[test]
fn rescaled_model_satisfies_frame_identities() {
    let s = kt(&[1, 4], &[2]);
    let g = gamma_rescaled_model(&s, &q(1, 4)).unwrap();
    let rep = adiabat::frame::full_frame_suite(&g.model).unwrap();
    assert!(rep.gated_pass());
    assert!(gamma_rescaled_model(&s, &q(1, 2)).is_err());
}

#[test]
fn random_almost_isometric_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for k in 0..50 {
        let (p, q1, q2) = (1 + k % 3, 1 + k % 2, 1 + (k / 2) % 2);
        let (m, f2) = random_models::almost_isometric(&mut rng, p, q1, q2, &format!("ai{k}"));
        let s = SplitFrameModel::new(m, &f2).unwrap();
        assert!(almost_isometric_check(&s).gated_pass(), "model {k}");
        let rep = verify_split_omega(&s, 100, &mut rng).unwrap();
        assert!(rep.gated_pass(), "model {k}: {:?}", rep.failures().collect::<Vec<_>>());
        let law = gamma_rescale_scaling_law(&s, &ladder()).unwrap();
        assert!(law.records(1e-12).gated_pass(), "model {k}: {:?}", law);
        let r = almost_riemannian_check(&construct_ar_structure(&s).unwrap()).unwrap();
        assert!(r.passed, "model {k}: {:?}", r);
    }
}

#[test]
fn constant_families() {
    let flat = MetricFamily::constant(LieFrameModel::abelian(2, 2), &[1.0, 0.5, 0.25]);
    let r = almost_riemannian_check(&flat).unwrap();
    assert!(r.passed);
    assert_eq!(r.decay_exponent, None);
    let kt = LieFrameModel::kodaira_thurston(&[1, 4]).unwrap();
    let r = almost_riemannian_check(&MetricFamily::constant(kt, &[1.0, 0.5, 0.25])).unwrap();
    assert!(!r.passed && !r.decreasing);
    assert_eq!(r.decay_exponent, Some(0.0));
    assert!(!r.record().passed);
}

#[test]
fn warped_family_decays_linearly() {
    let schedule: Vec<f64> = (0..8).map(|k| 0.4 * 0.5f64.powi(k)).collect();
    let r = almost_riemannian_check(&MetricFamily::warped(2, 2, 16, &schedule)).unwrap();
    assert!(r.passed, "{:?}", r);
    for row in &r.rows {
        // ω(∂₁) = −(log(1 + σ sin 2πx₁))' on the unit normal frame
        let s = row.sigma;
        let closed = (0..20000)
            .map(|i| {
                let x = i as f64 / 20000.0;
                (2.0 * PI * s * (2.0 * PI * x).cos() / (1.0 + s * (2.0 * PI * x).sin())).abs()
            })
            .fold(0.0, f64::max);
        assert!((row.omega_norm - closed).abs() < 1e-6 * closed, "{} vs {closed}", row.omega_norm);
    }
    let a = r.decay_exponent.unwrap();
    assert!((a - 1.0).abs() < 0.05, "{a}");
}

#[test]
fn grid_family_must_fix_leaf_metric() {
    let fam = MetricFamily::grid("bad", 8, &[0.5, 0.25], |s| {
        let m = CoordFoliatedTorus::warped(2, 2, s);
        let mut gf = m.gf.clone();
        gf[0][0] = adiabat::trig::TrigPolyField::constant(4, 1.0 + s);
        CoordFoliatedTorus::new("bad", 2, 2, gf, m.gp.clone(), 1.0)
    });
    assert!(almost_riemannian_check(&fam).is_err());
}

#[test]
fn bracket_changes_break_the_condition() {
    // [e1, e3] ∋ e3 is not skew on F⊥₁
    let m = LieFrameModel::new("dil", 3, &[1], &[Bracket::int(1, 3, 3, 1)]).unwrap();
    let s = SplitFrameModel::new(m, &[2]).unwrap();
    let rep = almost_isometric_check(&s);
    assert!(!rep.find("almost_isometric.block_skew").unwrap().passed);
    assert!(split_omega(&s).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn law_holds_for_any_rational_gamma(seed in 0u64..10_000, num in 1i64..40, den in 1i64..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, f2) = random_models::almost_isometric(&mut rng, 2, 2, 1, "prop");
        let s = SplitFrameModel::new(m, &f2).unwrap();
        let law = gamma_rescale_scaling_law(&s, &[q(num, den)]).unwrap();
        let r = &law.rows[0];
        prop_assert!(r.exact);
        prop_assert!((r.omega_norm - r.predicted).abs() <= 1e-12 * law.base_norm.max(1.0));
    }
}
