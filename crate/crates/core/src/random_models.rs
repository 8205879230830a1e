//! Seeded generators of valid foliated Lie models.

use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::frame::{Bracket, LieFrameModel};

fn rand_rational<R: Rng>(rng: &mut R) -> BigRational {
    let mut num = 0;
    while num == 0 {
        num = rng.gen_range(-3i64..=3);
    }
    BigRational::new(num.into(), rng.gen_range(1i64..=3).into())
}

/// Two-step nilpotent model: a random central set Z receives all brackets,
/// and leaf–leaf brackets land in Z ∩ F so that F stays integrable.
pub fn two_step<R: Rng>(rng: &mut R, n: usize, p: usize, id: &str) -> LieFrameModel {
    loop {
        let mut labels: Vec<usize> = (1..=n).collect();
        labels.shuffle(rng);
        let leaf: Vec<usize> = labels[..p].to_vec();
        let is_leaf = |l: usize| leaf.contains(&l);
        let zsize = rng.gen_range(1..=n / 2);
        let mut all: Vec<usize> = (1..=n).collect();
        all.shuffle(rng);
        let centre: Vec<usize> = all[..zsize].to_vec();
        let mut br = Vec::new();
        for a in 1..=n {
            for b in a + 1..=n {
                if centre.contains(&a) || centre.contains(&b) {
                    continue;
                }
                for &k in &centre {
                    if is_leaf(a) && is_leaf(b) && !is_leaf(k) {
                        continue;
                    }
                    if rng.gen_bool(0.6) {
                        br.push(Bracket::new(a, b, k, rand_rational(rng)));
                    }
                }
            }
        }
        if br.is_empty() {
            continue;
        }
        let mut leaf_sorted = leaf.clone();
        leaf_sorted.sort();
        if let Ok(m) = LieFrameModel::new(id, n, &leaf_sorted, &br) {
            return m;
        }
    }
}

/// Filiform-type model `[e_1, e_k] = a_k e_{k+1}` with a random leaf choice
/// among those closed under the bracket.
pub fn filiform<R: Rng>(rng: &mut R, n: usize, p: usize, id: &str) -> LieFrameModel {
    let br: Vec<Bracket> = (2..n).map(|k| Bracket::new(1, k, k + 1, rand_rational(rng))).collect();
    loop {
        let mut labels: Vec<usize> = (1..=n).collect();
        labels.shuffle(rng);
        let mut leaf = labels[..p].to_vec();
        leaf.sort();
        if let Ok(m) = LieFrameModel::new(id, n, &leaf, &br) {
            return m;
        }
    }
}

/// Random valid nilpotent model, mixing the two families.
pub fn nilpotent<R: Rng>(rng: &mut R, n: usize, p: usize, id: &str) -> LieFrameModel {
    if rng.gen_bool(0.75) {
        two_step(rng, n, p, id)
    } else {
        filiform(rng, n, p, id)
    }
}

/// Two-step model with a split F⊥ = F⊥₁ ⊕ F⊥₂ satisfying the almost-isometric
/// conditions: `[X, U₁] ∈ F` and `[X, U₂] ∈ F ⊕ F⊥₁` with the F⊥₁ part central.
/// Returns the model and the labels of F⊥₂.
pub fn almost_isometric<R: Rng>(rng: &mut R, p: usize, q1: usize, q2: usize, id: &str) -> (LieFrameModel, Vec<usize>) {
    let n = p + q1 + q2;
    loop {
        let leaf: Vec<usize> = (1..=p).collect();
        let f1: Vec<usize> = (p + 1..=p + q1).collect();
        let f2: Vec<usize> = (p + q1 + 1..=n).collect();
        // centre: part of F⊥₁ and part of F
        let zf1: Vec<usize> = f1.iter().copied().filter(|_| rng.gen_bool(0.6)).collect();
        let zf: Vec<usize> = leaf.iter().copied().filter(|_| rng.gen_bool(0.4)).collect();
        let centre: Vec<usize> = zf1.iter().chain(&zf).copied().collect();
        if zf1.is_empty() {
            continue;
        }
        let mut br = Vec::new();
        for a in 1..=n {
            for b in a + 1..=n {
                if centre.contains(&a) || centre.contains(&b) {
                    continue;
                }
                let a_leaf = a <= p;
                let b_leaf = b <= p;
                for &k in &centre {
                    let k_leaf = k <= p;
                    let allowed = match (a_leaf, b_leaf) {
                        (true, true) => k_leaf,
                        // [X, U]: F⊥₂ may hit F⊥₁; F⊥₁ only into F
                        (true, false) => k_leaf || (f2.contains(&b) && f1.contains(&k)),
                        _ => true,
                    };
                    if allowed && rng.gen_bool(0.5) {
                        br.push(Bracket::new(a, b, k, rand_rational(rng)));
                    }
                }
            }
        }
        let mixed = br.iter().any(|b| b.i <= p && f2.contains(&b.j) && f1.contains(&b.k));
        if !mixed {
            continue;
        }
        if let Ok(m) = LieFrameModel::new(id, n, &leaf, &br) {
            return (m, f2);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generators_are_deterministic() {
        let a = two_step(&mut ChaCha8Rng::seed_from_u64(42), 6, 2, "a");
        let b = two_step(&mut ChaCha8Rng::seed_from_u64(42), 6, 2, "a");
        assert_eq!(a, b);
    }

    #[test]
    fn almost_isometric_has_mixed_bracket() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (m, f2) = almost_isometric(&mut rng, 2, 1, 1, "ai");
        assert_eq!(m.n(), 4);
        assert_eq!(f2, vec![4]);
    }
}
