//! Real trigonometric polynomials on the unit torus.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub freq: Vec<i64>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// `Σ a_k cos(2π k·x) + b_k sin(2π k·x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigPolyField {
    pub n: usize,
    pub terms: Vec<TrigTerm>,
}

impl TrigPolyField {
    pub fn zero(n: usize) -> Self {
        TrigPolyField { n, terms: Vec::new() }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        TrigPolyField { n, terms: vec![TrigTerm { freq: vec![0; n], cos: c, sin: 0.0 }] }
    }

    /// `c0 + a cos(2π k x_axis) + b sin(2π k x_axis)`.
    pub fn axis_wave(n: usize, c0: f64, axis: usize, k: i64, a: f64, b: f64) -> Self {
        let mut f = Self::constant(n, c0);
        let mut freq = vec![0; n];
        freq[axis] = k;
        f.terms.push(TrigTerm { freq, cos: a, sin: b });
        f
    }

    pub fn push(&mut self, freq: Vec<i64>, cos: f64, sin: f64) {
        assert_eq!(freq.len(), self.n);
        self.terms.push(TrigTerm { freq, cos, sin });
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let th = 2.0 * PI * t.freq.iter().zip(x).map(|(k, xi)| *k as f64 * xi).sum::<f64>();
                t.cos * th.cos() + t.sin * th.sin()
            })
            .sum()
    }

    /// Exact partial derivative along `axis`.
    pub fn derivative(&self, axis: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|t| t.freq[axis] != 0)
            .map(|t| {
                let w = 2.0 * PI * t.freq[axis] as f64;
                TrigTerm { freq: t.freq.clone(), cos: w * t.sin, sin: -w * t.cos }
            })
            .collect();
        TrigPolyField { n: self.n, terms }
    }

    pub fn bandwidth(&self) -> usize {
        self.terms
            .iter()
            .filter(|t| t.cos != 0.0 || t.sin != 0.0)
            .flat_map(|t| t.freq.iter().map(|k| k.unsigned_abs() as usize))
            .max()
            .unwrap_or(0)
    }

    /// Axes along which the field actually varies.
    pub fn active_axes(&self) -> Vec<bool> {
        let mut a = vec![false; self.n];
        for t in &self.terms {
            if t.cos == 0.0 && t.sin == 0.0 {
                continue;
            }
            for (i, k) in t.freq.iter().enumerate() {
                a[i] |= *k != 0;
            }
        }
        a
    }

    pub fn scaled(&self, s: f64) -> Self {
        TrigPolyField {
            n: self.n,
            terms: self.terms.iter().map(|t| TrigTerm { freq: t.freq.clone(), cos: s * t.cos, sin: s * t.sin }).collect(),
        }
    }

    pub fn sum(&self, o: &TrigPolyField) -> Self {
        assert_eq!(self.n, o.n);
        TrigPolyField { n: self.n, terms: self.terms.iter().chain(&o.terms).cloned().collect() }
    }
}
