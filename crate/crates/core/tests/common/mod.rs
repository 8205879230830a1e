#![allow(dead_code)]

use adiabat::grid::CoordFoliatedTorus;
use adiabat::trig::TrigPolyField;

pub fn wave(n: usize, c0: f64, parts: &[(Vec<i64>, f64, f64)]) -> TrigPolyField {
    let mut f = TrigPolyField::constant(n, c0);
    for (k, a, b) in parts {
        f.push(k.clone(), *a, *b);
    }
    f
}

pub fn zero(n: usize) -> TrigPolyField {
    TrigPolyField::zero(n)
}

/// p = q = 2 metric varying along x1 (leaf) and x3 (transverse) with
/// off-diagonal entries in both blocks.
pub fn tilted_model(eps: f64) -> CoordFoliatedTorus {
    let n = 4;
    let gf = vec![
        vec![wave(n, 1.2, &[(vec![0, 0, 1, 0], 0.2, 0.1)]), wave(n, 0.0, &[(vec![1, 0, 0, 0], 0.15, 0.0)])],
        vec![zero(n), wave(n, 1.0, &[(vec![1, 0, 1, 0], 0.0, 0.2)])],
    ];
    let gp = vec![
        vec![wave(n, 1.0, &[(vec![1, 0, 0, 0], 0.0, 0.3)]), wave(n, 0.0, &[(vec![0, 0, 1, 0], 0.1, 0.1)])],
        vec![zero(n), wave(n, 1.1, &[(vec![1, 0, -1, 0], 0.25, 0.0)])],
    ];
    CoordFoliatedTorus::new("tilted", 2, 2, gf, gp, eps).unwrap()
}

/// `GF = I`, `GP = [[1 + ½ sin 2πx₁, 0.3 cos 2πx₁], [·, 1]]`: the unit
/// normal frame turns as x₁ moves, so the normal connection and its
/// curvature are nonzero.
pub fn rotating_model() -> CoordFoliatedTorus {
    let n = 4;
    let one = TrigPolyField::constant(n, 1.0);
    let gf = vec![vec![one.clone(), zero(n)], vec![zero(n), one.clone()]];
    let gp = vec![
        vec![TrigPolyField::axis_wave(n, 1.0, 0, 1, 0.0, 0.5), TrigPolyField::axis_wave(n, 0.0, 0, 1, 0.3, 0.0)],
        vec![zero(n), one],
    ];
    CoordFoliatedTorus::new("rotating", 2, 2, gf, gp, 1.0).unwrap()
}

/// Like [`rotating_model`] but the off-diagonal normal entry moves with x₂,
/// so ω along the two leaf directions fails to commute and the normal
/// curvature along the leaves is nonzero.
pub fn twisted_model() -> CoordFoliatedTorus {
    let n = 4;
    let one = TrigPolyField::constant(n, 1.0);
    let gf = vec![vec![one.clone(), zero(n)], vec![zero(n), one.clone()]];
    let gp = vec![
        vec![TrigPolyField::axis_wave(n, 1.0, 0, 1, 0.0, 0.5), TrigPolyField::axis_wave(n, 0.0, 1, 1, 0.3, 0.0)],
        vec![zero(n), one],
    ];
    CoordFoliatedTorus::new("twisted", 2, 2, gf, gp, 1.0).unwrap()
}

/// p = 4, q = 2 metric depending on x1, x2 and x5, coupling leaf and
/// normal blocks to their neighbours.
pub fn six_model(id: &str, amp: f64) -> CoordFoliatedTorus {
    let n = 6;
    let mut gf: Vec<Vec<TrigPolyField>> = (0..4).map(|_| (0..4).map(|_| zero(n)).collect()).collect();
    let e = |i: usize| {
        let mut k = vec![0i64; n];
        k[i] = 1;
        k
    };
    gf[0][0] = wave(n, 1.0, &[(e(4), 0.3 * amp, 0.0)]);
    gf[1][1] = wave(n, 1.1, &[(e(0), 0.0, 0.2 * amp)]);
    gf[2][2] = wave(n, 0.9, &[(e(1), 0.1 * amp, 0.15 * amp)]);
    gf[3][3] = wave(n, 1.0, &[(e(4), 0.0, 0.1 * amp)]);
    gf[0][2] = wave(n, 0.0, &[(e(1), 0.2 * amp, 0.0)]);
    gf[1][3] = wave(n, 0.0, &[(e(4), 0.0, 0.2 * amp)]);
    gf[2][3] = wave(n, 0.0, &[(e(0), 0.15 * amp, 0.0)]);
    let gp = vec![
        vec![wave(n, 1.0, &[(e(0), 0.0, 0.4 * amp)]), wave(n, 0.0, &[(e(1), 0.3 * amp, 0.0)])],
        vec![zero(n), wave(n, 1.2, &[(e(4), 0.2 * amp, 0.1 * amp)])],
    ];
    CoordFoliatedTorus::new(id, 4, 2, gf, gp, 1.0).unwrap()
}
