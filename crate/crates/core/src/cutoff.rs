//! Piecewise-polynomial cutoffs: the convex ramp `chi`, the time cutoff
//! `zeta`, and the atom regularizer `w_m = chi(log|z - a| + m) - m`.

use serde::{Deserialize, Serialize};

use crate::expr::Jet;

/// Evaluates `sum c_k x^k` and its first two derivatives.
fn poly_jet(c: &[f64], x: f64) -> Jet {
    let mut v = 0.0;
    let mut d1 = 0.0;
    let mut d2 = 0.0;
    for &ck in c.iter().rev() {
        d2 = d2 * x + 2.0 * d1;
        d1 = d1 * x + v;
        v = v * x + ck;
    }
    Jet { value: v, d1, d2 }
}

/// `p(b) - p(a)` evaluated as `(b - a) * q(a, b)` so that close arguments do
/// not cancel.
fn poly_increment(c: &[f64], a: f64, b: f64) -> f64 {
    // x^k - y^k = (x - y) * sum_{j<k} x^j y^{k-1-j}
    let mut sum = 0.0;
    for (k, &ck) in c.iter().enumerate().skip(1) {
        let mut s = 0.0;
        let mut bj = 1.0;
        for j in 0..k {
            s += bj * a.powi((k - 1 - j) as i32);
            bj *= b;
        }
        sum += ck * s;
    }
    (b - a) * sum
}

/// C² convex ramp: zero on `(-inf, -1]`, the identity on `[1, inf)` and the
/// polynomial `3/16 + x/2 + 3x²/8 - x⁴/16` in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothCutoff {
    knots: [f64; 2],
    /// Coefficients of the middle piece in increasing degree.
    middle: [f64; 6],
}

impl Default for SmoothCutoff {
    fn default() -> Self {
        Self::build()
    }
}

impl SmoothCutoff {
    pub fn build() -> Self {
        SmoothCutoff {
            knots: [-1.0, 1.0],
            middle: [3.0 / 16.0, 0.5, 3.0 / 8.0, 0.0, -1.0 / 16.0, 0.0],
        }
    }

    pub fn knots(&self) -> [f64; 2] {
        self.knots
    }

    pub fn middle_coefficients(&self) -> &[f64; 6] {
        &self.middle
    }

    pub fn jet(&self, x: f64) -> Jet {
        if x <= self.knots[0] {
            Jet::default()
        } else if x >= self.knots[1] {
            Jet {
                value: x,
                d1: 1.0,
                d2: 0.0,
            }
        } else {
            poly_jet(&self.middle, x)
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.jet(x).value
    }

    /// `chi(b) - chi(a)` for `a <= b`, free of cancellation inside each piece.
    pub fn increment(&self, a: f64, b: f64) -> f64 {
        if a > b {
            return -self.increment(b, a);
        }
        let [lo, hi] = self.knots;
        let mid = |x: f64, y: f64| poly_increment(&self.middle, x, y);
        let mut total = 0.0;
        // flat piece contributes nothing; split [a, b] at the knots
        let a1 = a.max(lo);
        let b1 = b.min(hi);
        if a1 < b1 {
            total += mid(a1, b1);
        }
        let a2 = a.max(hi);
        if a2 < b {
            total += b - a2;
        }
        total
    }
}

/// C² decreasing time cutoff: one on `(-inf, 1]`, zero on `[2, inf)`,
/// `1 - (6y⁵ - 15y⁴ + 10y³)` with `y = x - 1` in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeCutoff {
    knots: [f64; 2],
    smoothstep: [f64; 6],
}

impl Default for TimeCutoff {
    fn default() -> Self {
        Self::build()
    }
}

impl TimeCutoff {
    pub fn build() -> Self {
        TimeCutoff {
            knots: [1.0, 2.0],
            smoothstep: [0.0, 0.0, 0.0, 10.0, -15.0, 6.0],
        }
    }

    pub fn knots(&self) -> [f64; 2] {
        self.knots
    }

    pub fn jet(&self, x: f64) -> Jet {
        let [lo, hi] = self.knots;
        if x <= lo {
            Jet {
                value: 1.0,
                d1: 0.0,
                d2: 0.0,
            }
        } else if x >= hi {
            Jet::default()
        } else {
            let j = poly_jet(&self.smoothstep, x - lo);
            Jet {
                value: 1.0 - j.value,
                d1: -j.d1,
                d2: -j.d2,
            }
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.jet(x).value
    }
}

/// `w_m(r) = chi(log r + m) - m` as a function of the distance `r` to the
/// atom, or of `s = log r`.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomRegularizer {
    chi: SmoothCutoff,
    m: f64,
}

impl AtomRegularizer {
    /// `m` is the regularization depth; callers validate `m >= 1`.
    pub fn new(m: u32) -> Self {
        AtomRegularizer {
            chi: SmoothCutoff::build(),
            m: m as f64,
        }
    }

    pub fn depth(&self) -> u32 {
        self.m as u32
    }

    /// Below this radius `w_m` equals `-m`.
    pub fn plateau_radius(&self) -> f64 {
        (-self.m - 1.0).exp()
    }

    /// Above this radius `w_m` equals `log r`.
    pub fn identity_radius(&self) -> f64 {
        (1.0 - self.m).exp()
    }

    /// Jet of `w_m` in `s = log r`.
    pub fn jet_log(&self, s: f64) -> Jet {
        let j = self.chi.jet(s + self.m);
        Jet {
            value: j.value - self.m,
            ..j
        }
    }

    pub fn value_log(&self, s: f64) -> f64 {
        self.jet_log(s).value
    }

    pub fn value(&self, r: f64) -> f64 {
        if r <= 0.0 {
            -self.m
        } else {
            self.value_log(r.ln())
        }
    }

    /// `w_m(e^b) - w_m(e^a)`.
    pub fn increment_log(&self, a: f64, b: f64) -> f64 {
        self.chi.increment(a + self.m, b + self.m)
    }

    /// Planar Laplacian of `w_m(|z - a|)` at distance `r`: `chi''/r²`.
    pub fn laplacian(&self, r: f64) -> f64 {
        if r <= self.plateau_radius() {
            0.0
        } else {
            self.chi.jet(r.ln() + self.m).d2 / (r * r)
        }
    }
}
