//! Closed-form predictions of the flow: remaining Lelong mass, the time at
//! which a pole dissolves, the lower continuity bound and the envelopes for
//! the time derivative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::FlowParams;

/// Lelong mass left at time `t` from initial mass `x`.
///
/// `x - 2nt` without damping, `-2n/A + (2n/A + x) e^{-At}` otherwise. The
/// undamped branch is selected by `A == 0.0` exactly.
pub fn predicted_lelong(x: f64, t: f64, params: &FlowParams) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::invalid("x", format!("initial mass must be > 0, got {x}")));
    }
    if !(t >= 0.0) {
        return Err(Error::invalid("t", format!("time must be >= 0, got {t}")));
    }
    Ok(lelong_unchecked(x, t, params.nf(), params.damping()))
}

pub(crate) fn lelong_unchecked(x: f64, t: f64, n: f64, a: f64) -> f64 {
    if a == 0.0 {
        x - 2.0 * n * t
    } else {
        let c = 2.0 * n / a;
        // -c + (c + x) e^{-At} = x e^{-At} + c (e^{-At} - 1)
        x * (-a * t).exp() + c * (-a * t).exp_m1()
    }
}

/// Time at which the mass predicted by [`predicted_lelong`] reaches zero.
pub fn predicted_dissolution(x: f64, params: &FlowParams) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::invalid("x", format!("initial mass must be > 0, got {x}")));
    }
    let n2 = 2.0 * params.nf();
    let a = params.damping();
    Ok(if a == 0.0 { x / n2 } else { (a * x / n2).ln_1p() / a })
}

/// Data entering the lower continuity bound `u(t) >= u(0) - C(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuityInputs {
    pub n: u32,
    pub damping: f64,
    /// sup of |boundary data| over the boundary and [0, T].
    pub sup_abs_psi: f64,
    /// sup of |source| over the closure and [0, T].
    pub sup_abs_g: f64,
    /// Infimum of the defining function; -1 for the unit ball.
    pub inf_rho: f64,
    /// sup over [0, t] and the boundary of |psi(., t') - psi(., 0)|.
    pub boundary_osc: f64,
}

/// `C(t) = inf_{0<e<1} ((-n log e + A sup|psi| + sup|g|) t - e inf rho) + osc`.
///
/// The infimum is taken at the stationary point `e* = n t / |inf rho|` when it
/// falls in (0, 1); otherwise the objective is decreasing on (0, 1) and the
/// value is its limit at `e -> 1`.
pub fn continuity_bound(t: f64, inputs: &ContinuityInputs) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::invalid("t", format!("time must be >= 0, got {t}")));
    }
    if !(inputs.boundary_osc >= 0.0) {
        return Err(Error::invalid("boundary_osc", "oscillation must be >= 0"));
    }
    if !(inputs.inf_rho <= 0.0) {
        return Err(Error::invalid(
            "inf_rho",
            "defining function must be <= 0 on the domain",
        ));
    }
    let n = inputs.n as f64;
    let k = inputs.damping * inputs.sup_abs_psi + inputs.sup_abs_g;
    let depth = -inputs.inf_rho;
    let interior = if t == 0.0 {
        0.0
    } else if depth > 0.0 && n * t < depth {
        let eps = n * t / depth;
        (-n * eps.ln() + k) * t + eps * depth
    } else {
        k * t + depth
    };
    Ok(interior + inputs.boundary_osc)
}

/// Two-sided bound `lower <= u_t <= upper` on the time derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DotuEnvelope {
    pub lower: f64,
    pub upper: f64,
}

impl DotuEnvelope {
    /// Smallest signed distance of `udot` to the envelope; negative when outside.
    pub fn slack(&self, udot: f64) -> f64 {
        (udot - self.lower).min(self.upper - udot)
    }
}

/// Envelope constant `2 sup|phi_t| + T sup|g_t| + n`.
pub fn envelope_constant(sup_phi_dot: f64, sup_g_dot: f64, params: &FlowParams) -> f64 {
    2.0 * sup_phi_dot + params.horizon() * sup_g_dot + params.nf()
}

/// Envelope for `u_t` at a point where the solution is `u`, the initial value
/// is `u0_here` and the initial datum has supremum `sup_u0`.
pub fn dotu_envelope(u: f64, u0_here: f64, sup_u0: f64, t: f64, params: &FlowParams, b: f64) -> Result<DotuEnvelope> {
    if !(t > 0.0) {
        return Err(Error::invalid("t", format!("envelope needs t > 0, got {t}")));
    }
    let a = params.damping();
    Ok(if a == 0.0 {
        DotuEnvelope {
            lower: (u - sup_u0) / t - b,
            upper: (u - u0_here) / t + b,
        }
    } else {
        let growth = (a * t).exp();
        let factor = a / (a * t).exp_m1();
        DotuEnvelope {
            lower: factor * (u - growth * sup_u0.max(0.0)) - b,
            upper: factor * (u - u0_here) + b,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params(n: u32, a: f64) -> FlowParams {
        FlowParams::new(n, a, 10.0).unwrap()
    }

    /// Grid minimisation over eps in (0, 1), independent of the closed form.
    fn brute_force_bound(t: f64, c: &ContinuityInputs) -> f64 {
        let n = c.n as f64;
        let k = c.damping * c.sup_abs_psi + c.sup_abs_g;
        let mut best = f64::INFINITY;
        // geometric grid near 0 plus uniform grid on (0, 1)
        for i in 1..10_000 {
            let e_lin = i as f64 / 10_000.0;
            let e_geo = (-(i as f64) * 3.0e-3).exp();
            for e in [e_lin, e_geo] {
                let v = (-n * e.ln() + k) * t - e * c.inf_rho;
                best = best.min(v);
            }
        }
        // endpoint limit e -> 1
        best = best.min(k * t - c.inf_rho);
        best + c.boundary_osc
    }

    #[test]
    fn lelong_examples() {
        assert_eq!(predicted_lelong(1.0, 0.0, &params(1, 0.0)).unwrap(), 1.0);
        assert_abs_diff_eq!(
            predicted_lelong(1.0, 0.25, &params(1, 0.0)).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            predicted_lelong(2.0, 2f64.ln(), &params(1, 1.0)).unwrap(),
            0.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn lelong_rejects_bad_input() {
        assert!(predicted_lelong(0.0, 1.0, &params(1, 0.0)).is_err());
        assert!(predicted_lelong(-1.0, 1.0, &params(1, 0.0)).is_err());
        assert!(predicted_lelong(1.0, -1e-9, &params(1, 0.0)).is_err());
        assert!(predicted_dissolution(0.0, &params(1, 1.0)).is_err());
    }

    #[test]
    fn dissolution_examples() {
        assert_abs_diff_eq!(predicted_dissolution(1.0, &params(1, 0.0)).unwrap(), 0.5);
        assert_abs_diff_eq!(
            predicted_dissolution(2.0, &params(1, 1.0)).unwrap(),
            2f64.ln(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn dissolution_is_a_root_of_the_mass() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x = rng.gen_range(0.01..10.0);
            let a = if rng.gen_bool(0.2) {
                0.0
            } else {
                rng.gen_range(0.0..5.0)
            };
            let n = rng.gen_range(1..5);
            let p = params(n, a);
            let eps = predicted_dissolution(x, &p).unwrap();
            let k = predicted_lelong(x, eps, &p).unwrap();
            assert!(k.abs() <= 1e-12, "x={x} a={a} n={n} k={k}");
        }
    }

    #[test]
    fn lelong_branches_agree_near_zero_damping() {
        for i in 0..=50 {
            for j in 0..=50 {
                let x = 0.01 + 5.0 * i as f64 / 50.0;
                let t = 5.0 * j as f64 / 50.0;
                let k0 = predicted_lelong(x, t, &params(1, 0.0)).unwrap();
                let ks = predicted_lelong(x, t, &params(1, 1e-8)).unwrap();
                assert!((k0 - ks).abs() <= 1e-6, "x={x} t={t}");
            }
        }
        // the gap is first order in At: |k_A - k_0| <= (x + n t) A t
        for (x, t, a) in [(1.3, 1e-3, 1e-3), (0.2, 2.0, 5e-7), (4.0, 1e-6, 1.0)] {
            let k0 = predicted_lelong(x, t, &params(2, 0.0)).unwrap();
            let ks = predicted_lelong(x, t, &params(2, a)).unwrap();
            assert!((k0 - ks).abs() <= (x + 2.0 * t) * a * t * (1.0 + 1e-6));
        }
    }

    #[test]
    fn lelong_monotone_on_grids() {
        for a in [0.0, 0.5, 3.0] {
            let p = params(2, a);
            let mut prev = f64::INFINITY;
            for i in 0..1000 {
                let k = predicted_lelong(1.5, i as f64 * 1e-3, &p).unwrap();
                assert!(k < prev);
                prev = k;
            }
            let mut prev = 0.0;
            for i in 1..=1000 {
                let e = predicted_dissolution(i as f64 * 1e-2, &p).unwrap();
                assert!(e > prev);
                prev = e;
            }
        }
    }

    #[test]
    fn continuity_examples() {
        let base = ContinuityInputs {
            n: 1,
            damping: 0.0,
            sup_abs_psi: 0.0,
            sup_abs_g: 0.0,
            inf_rho: -1.0,
            boundary_osc: 0.0,
        };
        assert_eq!(
            continuity_bound(
                0.0,
                &ContinuityInputs {
                    boundary_osc: 0.3,
                    ..base
                }
            )
            .unwrap(),
            0.3
        );
        let expected = 0.1 * (1.0 - 0.1f64.ln());
        assert_abs_diff_eq!(continuity_bound(0.1, &base).unwrap(), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(expected, 0.330259, epsilon = 1e-6);
        // the grid oracle agrees at t -> 0 too
        assert!(brute_force_bound(1e-9, &base) < 1e-6);
        assert!(continuity_bound(-1.0, &base).is_err());
        assert!(continuity_bound(
            0.1,
            &ContinuityInputs {
                boundary_osc: -1.0,
                ..base
            }
        )
        .is_err());
    }

    #[test]
    fn continuity_matches_grid_oracle_and_is_monotone() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let c = ContinuityInputs {
                n: rng.gen_range(1..4),
                damping: rng.gen_range(0.0..2.0),
                sup_abs_psi: rng.gen_range(0.0..3.0),
                sup_abs_g: rng.gen_range(0.0..3.0),
                inf_rho: -rng.gen_range(0.05..4.0),
                boundary_osc: rng.gen_range(0.0..1.0),
            };
            let t1 = rng.gen_range(0.0..2.0);
            let t2 = t1 + rng.gen_range(0.0..2.0);
            let c1 = continuity_bound(t1, &c).unwrap();
            let c2 = continuity_bound(t2, &c).unwrap();
            assert!(c1 <= c2 + 1e-15);
            assert!(c1 >= 0.0);
            let oracle = brute_force_bound(t1, &c);
            assert!(
                (c1 - oracle).abs() <= 1e-6 * oracle.abs().max(1.0),
                "closed form {c1} vs grid {oracle} for {c:?} t={t1}"
            );
        }
    }

    #[test]
    fn envelope_examples() {
        let p = params(1, 0.0);
        let env = dotu_envelope(2.0, 1.0, 1.0, 0.5, &p, 3.0).unwrap();
        assert_abs_diff_eq!(env.lower, -1.0);
        assert_abs_diff_eq!(env.upper, 5.0);
        let p3 = params(3, 0.0);
        let env = dotu_envelope(0.0, 0.0, 0.0, 1.0, &p3, 3.0).unwrap();
        assert_eq!((env.lower, env.upper), (-3.0, 3.0));
        assert!(dotu_envelope(0.0, 0.0, 0.0, 0.0, &p, 1.0).is_err());
        assert_eq!(envelope_constant(0.0, 0.0, &p3), 3.0);
    }

    #[test]
    fn envelope_ordering_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let a = if rng.gen_bool(0.3) {
                0.0
            } else {
                rng.gen_range(0.0..3.0)
            };
            let p = params(rng.gen_range(1..4), a);
            let u0_here = rng.gen_range(-5.0..5.0);
            let sup_u0 = u0_here + rng.gen_range(0.0..5.0);
            let u = rng.gen_range(-10.0..10.0);
            let t = rng.gen_range(1e-4..5.0);
            let b = rng.gen_range(0.0..4.0);
            let env = dotu_envelope(u, u0_here, sup_u0, t, &p, b).unwrap();
            assert!(env.lower <= env.upper + 1e-12, "{env:?}");
        }
    }

    proptest! {
        #[test]
        fn lelong_at_time_zero_is_identity(x in 1e-3f64..100.0, a in 0.0f64..10.0, n in 1u32..6) {
            let k = predicted_lelong(x, 0.0, &params(n, a)).unwrap();
            prop_assert!((k - x).abs() <= 1e-12 * x);
        }
    }
}
