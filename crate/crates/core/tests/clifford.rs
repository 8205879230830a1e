use adiabat::clifford::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn skew(q: usize, vals: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(q, q);
    let mut it = vals.iter().cycle();
    for i in 0..q {
        for j in i + 1..q {
            let v = *it.next().unwrap();
            m[(i, j)] = v;
            m[(j, i)] = -v;
        }
    }
    m
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

#[test]
fn algebra_relations_for_all_supported_pairs() {
    for (p, q) in [(2, 2), (2, 4), (4, 2), (4, 4)] {
        for (name, ok) in algebra_checks(p, q).unwrap() {
            assert!(ok, "{name} failed for p={p}, q={q}");
        }
    }
}

#[test]
fn small_examples() {
    let s = build_spin_rep(2).unwrap();
    assert_eq!(s.gamma[0].dim(), 2);
    let c12 = &s.gamma[0] * &s.gamma[1];
    assert_eq!(&c12 * &c12, -&GaussMat::identity(2));
    let s4 = build_spin_rep(4).unwrap();
    assert_eq!(s4.gamma[0].dim(), 4);

    let e = build_ext_rep(2).unwrap();
    assert_eq!(e.tau.dim(), 4);
    let tau = e.tau.to_c64();
    let eig = nalgebra::SymmetricEigen::new(tau).eigenvalues;
    assert_eq!(eig.iter().filter(|v| **v > 0.0).count(), 2);
    assert!(e.c[0].anti(&e.c_hat[1]).is_zero());
}

#[test]
fn fiber_dimensions() {
    let gf = GradedFiber::new(2, 2, PhiBundleSpec::trivial()).unwrap();
    assert_eq!(gf.dim(), 8);
    assert_eq!(gf.parity_dims(), (4, 4));
    assert_eq!(gf.block_dims(), [2, 2, 2, 2]);
    assert!(gf.c_f[0].anti(&gf.c_h[0]).is_zero());
    let gf = GradedFiber::new(2, 2, PhiBundleSpec::normal()).unwrap();
    assert_eq!(gf.dim(), 16);
}

#[test]
fn spin_lift_intertwines_clifford_action() {
    let gf = GradedFiber::new(4, 2, PhiBundleSpec::trivial()).unwrap();
    let a = skew(4, &[0.3, -1.1, 0.7, 0.2, -0.4, 0.9]);
    let w = gf.lift_spin(&a);
    for k in 0..4 {
        let ck = gf.c_f[k].to_c64();
        let lhs = &w * &ck - &ck * &w;
        let mut rhs = DMatrix::zeros(gf.dim(), gf.dim());
        for j in 0..4 {
            rhs += gf.c_f[j].to_c64() * C64::new(a[(j, k)], 0.0);
        }
        assert!(max_abs(&(lhs - rhs)) < 1e-12);
    }
}

#[test]
fn normal_lift_intertwines_both_actions_and_is_even() {
    let gf = GradedFiber::new(2, 4, PhiBundleSpec::trivial()).unwrap();
    let l = skew(4, &[0.5, -0.2, 1.3, 0.8, -0.6, 0.1]);
    let w = gf.lift_normal(&l);
    let g = gf.grading.to_c64();
    assert!(max_abs(&(&w * &g - &g * &w)) < 1e-12);
    assert!(max_abs(&(&w + w.adjoint())) < 1e-12);
    for (ops, name) in [(&gf.c_h, "c"), (&gf.c_hat_h, "c_hat")] {
        for r in 0..4 {
            let cr = ops[r].to_c64();
            let lhs = &w * &cr - &cr * &w;
            let mut rhs = DMatrix::zeros(gf.dim(), gf.dim());
            for t in 0..4 {
                rhs += ops[t].to_c64() * C64::new(l[(t, r)], 0.0);
            }
            assert!(max_abs(&(lhs - rhs)) < 1e-12, "{name}");
        }
    }
    // derivation equals ¼ Σ L[t][s] (c_s c_t − ĉ_s ĉ_t) on Λ
    let mut quad = DMatrix::zeros(gf.dim(), gf.dim());
    for s in 0..4 {
        for t in 0..4 {
            let m = (&gf.c_h[s] * &gf.c_h[t]).to_c64() - (&gf.c_hat_h[s] * &gf.c_hat_h[t]).to_c64();
            quad += m * C64::new(0.25 * l[(t, s)], 0.0);
        }
    }
    assert!(max_abs(&(quad - w)) < 1e-12);
}

#[test]
fn phi_lift_examples() {
    let l = skew(2, &[0.7]);
    assert!(PhiBundleSpec::trivial().lift(&l).iter().all(|v| *v == 0.0));
    assert_eq!(PhiBundleSpec::normal().lift(&l), l);
    // Λ² of a plane: trace action
    let mut g = DMatrix::zeros(2, 2);
    g[(0, 0)] = 0.4;
    g[(1, 1)] = -1.5;
    g[(0, 1)] = 0.3;
    let top = lift_ext(&g, 2);
    assert_eq!(top.nrows(), 1);
    assert!((top[(0, 0)] - g.trace()).abs() < 1e-15);
    assert!(lift_ext(&l, 2)[(0, 0)].abs() < 1e-15);
}

#[test]
fn phi_direct_sums_are_additive() {
    let l = skew(4, &[0.5, -0.2, 1.3, 0.8, -0.6, 0.1]);
    let a = PhiBundleSpec::single(PhiKind::Sym, 2);
    let b = PhiBundleSpec::single(PhiKind::Ext, 2);
    let ab = PhiBundleSpec { terms: [a.terms.clone(), b.terms.clone()].concat() };
    let lab = ab.lift(&l);
    let (ra, rb) = (a.rank(4), b.rank(4));
    assert_eq!(ab.rank(4), ra + rb);
    assert_eq!(lab.view((0, 0), (ra, ra)), a.lift(&l));
    assert_eq!(lab.view((ra, ra), (rb, rb)), b.lift(&l));
    assert!(lab.view((0, ra), (ra, rb)).iter().all(|v| *v == 0.0));
}

proptest! {
    #[test]
    fn lifts_are_lie_homomorphisms(v in proptest::collection::vec(-2.0f64..2.0, 12), k in 0usize..4, sym in any::<bool>()) {
        let q = 4;
        let a = skew(q, &v[..6]);
        let b = skew(q, &v[6..]);
        let phi = PhiBundleSpec::single(if sym { PhiKind::Sym } else { PhiKind::Ext }, k);
        let (la, lb) = (phi.lift(&a), phi.lift(&b));
        let lhs = &la * &lb - &lb * &la;
        let rhs = phi.lift(&(&a * &b - &b * &a));
        prop_assert!((lhs - rhs).amax() < 1e-10);
        prop_assert!((&la + la.transpose()).amax() < 1e-12);
    }
}
