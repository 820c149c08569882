//! Closed vocabulary for smooth data: sums of `coef * t^k * term(|z|^2)` with
//! `term` one of `1`, `|z|^2` or `log(c + |z|^2)`.
//!
//! Every term is radial about the origin, so a datum is a function of
//! `x = |z|^2` (or `s = log|z|`) and of `t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "term", rename_all = "snake_case")]
pub enum Term {
    Const,
    AbsSq,
    Log { shift: f64 },
}

/// Value and first two derivatives of a profile in `s = log|z|`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl std::ops::Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet {
            value: self.value + o.value,
            d1: self.d1 + o.d1,
            d2: self.d2 + o.d2,
        }
    }
}

impl std::ops::Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        Jet {
            value: self.value * c,
            d1: self.d1 * c,
            d2: self.d2 * c,
        }
    }
}

impl Term {
    fn validate(&self) -> Result<()> {
        match *self {
            Term::Log { shift } if !(shift > 0.0) || !shift.is_finite() => Err(Error::scenario(
                "term.shift",
                format!("log shift must be > 0, got {shift}"),
            )),
            _ => Ok(()),
        }
    }

    /// Value at `x = |z|^2`.
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Term::Const => 1.0,
            Term::AbsSq => x,
            Term::Log { shift } => (shift + x).ln(),
        }
    }

    /// Jet in `s`, where `x = e^{2s}`.
    pub fn jet(&self, s: f64) -> Jet {
        let x = (2.0 * s).exp();
        match *self {
            Term::Const => Jet {
                value: 1.0,
                d1: 0.0,
                d2: 0.0,
            },
            Term::AbsSq => Jet {
                value: x,
                d1: 2.0 * x,
                d2: 4.0 * x,
            },
            Term::Log { shift } => {
                let den = shift + x;
                Jet {
                    value: den.ln(),
                    d1: 2.0 * x / den,
                    d2: 4.0 * shift * x / (den * den),
                }
            }
        }
    }

    /// `value(e^{2b}) - value(e^{2a})` without cancellation.
    pub fn increment(&self, a: f64, b: f64) -> f64 {
        match *self {
            Term::Const => 0.0,
            Term::AbsSq => (2.0 * a).exp() * (2.0 * (b - a)).exp_m1(),
            Term::Log { shift } => {
                let xa = (2.0 * a).exp();
                let dx = xa * (2.0 * (b - a)).exp_m1();
                (dx / (shift + xa)).ln_1p()
            }
        }
    }

    /// Planar Laplacian `4 d^2/dz dzbar` at `x = |z|^2` (complex dimension 1).
    pub fn laplacian(&self, x: f64) -> f64 {
        match *self {
            Term::Const => 0.0,
            Term::AbsSq => 4.0,
            Term::Log { shift } => 4.0 * shift / ((shift + x) * (shift + x)),
        }
    }
}

/// One summand `coef * t^t_power * term`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    #[serde(default)]
    pub t_power: u32,
    #[serde(flatten)]
    pub term: Term,
}

impl Monomial {
    pub fn new(coef: f64, term: Term) -> Self {
        Monomial { coef, t_power: 0, term }
    }

    pub fn with_time_power(mut self, k: u32) -> Self {
        self.t_power = k;
        self
    }

    fn time_factor(&self, t: f64) -> f64 {
        self.coef * t.powi(self.t_power as i32)
    }

    fn time_rate(&self, t: f64) -> f64 {
        if self.t_power == 0 {
            0.0
        } else {
            self.coef * self.t_power as f64 * t.powi(self.t_power as i32 - 1)
        }
    }
}

/// A finite sum of monomials.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Expr(pub Vec<Monomial>);

impl Expr {
    pub fn zero() -> Self {
        Expr(Vec::new())
    }

    pub fn constant(c: f64) -> Self {
        Expr(vec![Monomial::new(c, Term::Const)])
    }

    pub fn abs_sq(c: f64) -> Self {
        Expr(vec![Monomial::new(c, Term::AbsSq)])
    }

    pub fn plus(mut self, m: Monomial) -> Self {
        self.0.push(m);
        self
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.0
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        for m in &self.0 {
            if !m.coef.is_finite() {
                return Err(Error::scenario(field, "coefficient must be finite"));
            }
            m.term.validate().map_err(|e| match e {
                Error::Scenario { reason, .. } => Error::scenario(field, reason),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn is_time_independent(&self) -> bool {
        self.0.iter().all(|m| m.t_power == 0 || m.coef == 0.0)
    }

    /// Value at `x = |z|^2` and time `t`.
    pub fn value(&self, x: f64, t: f64) -> f64 {
        self.0.iter().map(|m| m.time_factor(t) * m.term.value(x)).sum()
    }

    /// Time derivative at `x = |z|^2`.
    pub fn time_derivative(&self, x: f64, t: f64) -> f64 {
        self.0.iter().map(|m| m.time_rate(t) * m.term.value(x)).sum()
    }

    pub fn jet(&self, s: f64, t: f64) -> Jet {
        self.0
            .iter()
            .fold(Jet::default(), |acc, m| acc + m.term.jet(s) * m.time_factor(t))
    }

    pub fn increment(&self, a: f64, b: f64, t: f64) -> f64 {
        self.0.iter().map(|m| m.time_factor(t) * m.term.increment(a, b)).sum()
    }

    pub fn laplacian(&self, x: f64, t: f64) -> f64 {
        self.0.iter().map(|m| m.time_factor(t) * m.term.laplacian(x)).sum()
    }

    /// Multiplies every coefficient by `c`.
    pub fn scaled(&self, c: f64) -> Expr {
        Expr(self.0.iter().map(|m| Monomial { coef: m.coef * c, ..*m }).collect())
    }

    /// Re-expresses the datum in the variable `w = z / radius`, so that the
    /// ball of that radius becomes the unit ball. Stays in the vocabulary.
    pub fn rescaled(&self, radius: f64) -> Expr {
        let r2 = radius * radius;
        let mut out = Vec::with_capacity(self.0.len() + 1);
        for m in &self.0 {
            match m.term {
                Term::Const => out.push(*m),
                Term::AbsSq => out.push(Monomial {
                    coef: m.coef * r2,
                    ..*m
                }),
                Term::Log { shift } => {
                    out.push(Monomial {
                        term: Term::Log { shift: shift / r2 },
                        ..*m
                    });
                    out.push(Monomial {
                        coef: m.coef * r2.ln(),
                        term: Term::Const,
                        ..*m
                    });
                }
            }
        }
        Expr(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn jets_match_finite_differences() {
        let e = Expr::abs_sq(0.7)
            .plus(Monomial::new(1.3, Term::Log { shift: 0.4 }))
            .plus(Monomial::new(2.0, Term::Const));
        let f = |s: f64| e.value((2.0 * s).exp(), 0.0);
        for s in [-3.0, -1.0, -0.2, 0.0] {
            let j = e.jet(s, 0.0);
            let h = 1e-4;
            assert_relative_eq!(j.value, f(s), max_relative = 1e-14);
            assert_relative_eq!(j.d1, (f(s + h) - f(s - h)) / (2.0 * h), max_relative = 1e-7);
            assert_relative_eq!(j.d2, (f(s + h) - 2.0 * f(s) + f(s - h)) / (h * h), max_relative = 1e-5);
        }
    }

    #[test]
    fn increments_are_accurate_deep_in_the_log_scale() {
        let e = Expr::abs_sq(1.0).plus(Monomial::new(1.0, Term::Log { shift: 1.0 }));
        let (a, b): (f64, f64) = (-14.0, -13.98);
        let direct = 2.0 * ((2.0 * b).exp() - (2.0 * a).exp());
        assert_relative_eq!(e.increment(a, b, 0.0), direct, max_relative = 1e-9);
    }

    #[test]
    fn laplacian_of_log_term() {
        // Laplacian of log(c + x^2 + y^2) by central differences in the plane
        let t = Term::Log { shift: 0.5 };
        let (x, y, h) = (0.3, -0.2, 1e-4);
        let f = |x: f64, y: f64| t.value(x * x + y * y);
        let fd = (f(x + h, y) + f(x - h, y) + f(x, y + h) + f(x, y - h) - 4.0 * f(x, y)) / (h * h);
        assert_relative_eq!(t.laplacian(x * x + y * y), fd, max_relative = 1e-5);
    }

    #[test]
    fn rescaling_preserves_values() {
        let e = Expr::abs_sq(0.7)
            .plus(Monomial::new(1.3, Term::Log { shift: 0.4 }).with_time_power(1))
            .plus(Monomial::new(2.0, Term::Const));
        let r = 2.5;
        let g = e.rescaled(r);
        for w2 in [0.0, 0.1, 0.7, 1.0] {
            for t in [0.0, 0.3] {
                assert_relative_eq!(g.value(w2, t), e.value(r * r * w2, t), max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn time_polynomial() {
        let e = Expr::constant(1.0).plus(Monomial::new(2.0, Term::AbsSq).with_time_power(2));
        assert_relative_eq!(e.value(0.5, 3.0), 1.0 + 2.0 * 9.0 * 0.5);
        assert_relative_eq!(e.time_derivative(0.5, 3.0), 2.0 * 2.0 * 3.0 * 0.5);
        assert!(!e.is_time_independent());
    }

    #[test]
    fn parses_from_toml() {
        #[derive(Deserialize)]
        struct W {
            e: Expr,
        }
        let w: W = toml::from_str(
            r#"e = [{ term = "abs_sq", coef = 1.0 }, { term = "log", shift = 1.0, coef = 0.5, t_power = 1 }]"#,
        )
        .unwrap();
        assert_eq!(w.e.0.len(), 2);
        assert_eq!(w.e.0[1].term, Term::Log { shift: 1.0 });
        assert_eq!(w.e.0[1].t_power, 1);
        assert!(Expr(vec![Monomial::new(1.0, Term::Log { shift: -1.0 })])
            .validate("x")
            .is_err());
    }
}
