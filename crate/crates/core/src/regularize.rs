//! The approximation ladder: regularized initial data `u0_m`, boundary
//! interpolants `phi_m`, sources `g_m` and the `eps_m` schedule.

use serde::{Deserialize, Serialize};

use crate::cutoff::{AtomRegularizer, TimeCutoff};
use crate::error::{Error, Result};
use crate::expr::{Expr, Jet};
use crate::planar::PlanarMesh;
use crate::problem::FlowProblem;
use crate::radial::{discrete_log_det, RadialMesh, RadialProfile};
use crate::record::RungInfo;

/// How the initial datum is smoothed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regularization {
    /// The datum is used as given; it must be smooth and strictly
    /// plurisubharmonic.
    Exact,
    /// Rung `m` with atoms cut off at depth `depth <= m`.
    Ladder { m: u32, depth: u32 },
}

impl Regularization {
    pub fn ladder(m: u32) -> Self {
        Regularization::Ladder { m, depth: m }
    }
}

/// Eight-point Gauss-Legendre rule weighted by the C² kernel
/// `(1 - τ²)³` on `[-1, 1]`, normalized to unit mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Mollifier {
    nodes: [f64; 8],
    weights: [f64; 8],
}

impl Default for Mollifier {
    fn default() -> Self {
        Self::new()
    }
}

impl Mollifier {
    pub fn new() -> Self {
        const X: [f64; 4] = [
            0.183_434_642_495_649_8,
            0.525_532_409_916_329,
            0.796_666_477_413_626_7,
            0.960_289_856_497_536_3,
        ];
        const W: [f64; 4] = [
            0.362_683_783_378_362,
            0.313_706_645_877_887_3,
            0.222_381_034_453_374_5,
            0.101_228_536_290_376_3,
        ];
        let mut nodes = [0.0; 8];
        let mut weights = [0.0; 8];
        for k in 0..4 {
            for (j, sign) in [(2 * k, -1.0), (2 * k + 1, 1.0)] {
                nodes[j] = sign * X[k];
                weights[j] = W[k] * (1.0 - X[k] * X[k]).powi(3);
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Mollifier { nodes, weights }
    }

    /// `sum_q w_q f(s - radius * τ_q)`.
    pub fn apply(&self, radius: f64, s: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w * f(s - radius * t))
            .sum()
    }

    pub fn apply_jet(&self, radius: f64, s: f64, f: impl Fn(f64) -> Jet) -> Jet {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(Jet::default(), |acc, (t, w)| acc + f(s - radius * t) * *w)
    }
}

/// Coefficient `2^{-m}` of the strictly plurisubharmonic term `|z|² - 1`
/// added on rung `m`. The term vanishes on the boundary.
pub fn strict_weight(m: u32) -> f64 {
    0.5f64.powi(m as i32)
}

/// Unmollified radial profile of the regularized datum in `s = log r`.
#[derive(Debug, Clone)]
struct RadialDatum<'a> {
    mass: f64,
    smooth: &'a Expr,
    cutoff: Option<AtomRegularizer>,
    /// Coefficient of the added `|z|² - 1` term.
    extra: f64,
}

impl<'a> RadialDatum<'a> {
    fn new(problem: &'a FlowProblem, reg: Regularization) -> Self {
        match reg {
            Regularization::Exact => RadialDatum {
                mass: 0.0,
                smooth: &problem.smooth,
                cutoff: None,
                extra: 0.0,
            },
            Regularization::Ladder { m, depth } => RadialDatum {
                mass: problem.origin_mass(),
                smooth: &problem.smooth,
                cutoff: Some(AtomRegularizer::new(depth)),
                extra: strict_weight(m),
            },
        }
    }

    fn jet(&self, s: f64) -> Jet {
        let e = (2.0 * s).exp();
        let mut j = self.smooth.jet(s, 0.0)
            + Jet {
                value: self.extra * (e - 1.0),
                d1: 2.0 * self.extra * e,
                d2: 4.0 * self.extra * e,
            };
        if let Some(w) = &self.cutoff {
            j = j + w.jet_log(s) * self.mass;
        }
        j
    }

    fn increment(&self, a: f64, b: f64) -> f64 {
        let mut d = self.smooth.increment(a, b, 0.0) + self.extra * (2.0 * a).exp() * (2.0 * (b - a)).exp_m1();
        if let Some(w) = &self.cutoff {
            d += self.mass * w.increment_log(a, b);
        }
        d
    }
}

fn check_radial(problem: &FlowProblem, reg: Regularization) -> Result<()> {
    if !problem.is_radial() {
        return Err(Error::invalid(
            "initial",
            "radial regularization needs all atoms at the origin",
        ));
    }
    match reg {
        Regularization::Exact if !problem.atoms.is_empty() => {
            Err(Error::invalid("regularization", "data with atoms must be regularized"))
        }
        Regularization::Ladder { m, depth } if m == 0 || depth == 0 || depth > m => {
            Err(Error::invalid("m", "need 1 <= depth <= m"))
        }
        _ => Ok(()),
    }
}

/// Regularized initial profile `sum N w_m + smooth + 2^{-m}(|z|² - 1)`, mollified in
/// `s` over one mesh cell. The unregularized datum is sampled as given.
pub fn radial_regularized_initial(
    problem: &FlowProblem,
    mesh: &RadialMesh,
    reg: Regularization,
) -> Result<RadialProfile> {
    check_radial(problem, reg)?;
    if let Regularization::Ladder { depth, .. } = reg {
        if depth > mesh.max_depth() {
            return Err(Error::MeshTooCoarse {
                requested: depth,
                max_admissible: mesh.max_depth(),
            });
        }
    }
    let datum = RadialDatum::new(problem, reg);
    let s: Vec<f64> = mesh.nodes();
    let profile = match reg {
        Regularization::Exact => {
            let inc = s.windows(2).map(|w| datum.increment(w[0], w[1])).collect();
            RadialProfile::new(datum.jet(s[0]).value, inc)
        }
        Regularization::Ladder { .. } => {
            let moll = Mollifier::new();
            let h = mesh.h();
            let base = moll.apply(h, s[0], |x| datum.jet(x).value);
            let inc = s
                .windows(2)
                .map(|w| {
                    moll.nodes
                        .iter()
                        .zip(&moll.weights)
                        .map(|(t, q)| q * datum.increment(w[0] - h * t, w[1] - h * t))
                        .sum()
                })
                .collect();
            RadialProfile::new(base, inc)
        }
    };
    Ok(profile)
}

/// Jet of the (mollified) regularized radial datum at `s`.
pub fn radial_initial_jet(problem: &FlowProblem, mesh: &RadialMesh, reg: Regularization, s: f64) -> Jet {
    let datum = RadialDatum::new(problem, reg);
    match reg {
        Regularization::Exact => datum.jet(s),
        Regularization::Ladder { .. } => Mollifier::new().apply_jet(mesh.h(), s, |x| datum.jet(x)),
    }
}

/// Value of the regularized planar datum at `(x, y)`.
pub fn planar_initial_value(problem: &FlowProblem, reg: Regularization, x: f64, y: f64) -> f64 {
    let r2 = x * x + y * y;
    let mut v = problem.smooth.value(r2, 0.0);
    match reg {
        Regularization::Exact => {}
        Regularization::Ladder { m, depth } => {
            let w = AtomRegularizer::new(depth);
            v += strict_weight(m) * (r2 - 1.0);
            for a in &problem.atoms {
                let c = a.center();
                v += a.mass() * w.value(((x - c.re).powi(2) + (y - c.im).powi(2)).sqrt());
            }
        }
    }
    v
}

/// Planar Laplacian of the regularized datum at `(x, y)`.
pub fn planar_initial_laplacian(problem: &FlowProblem, reg: Regularization, x: f64, y: f64) -> f64 {
    let r2 = x * x + y * y;
    let mut l = problem.smooth.laplacian(r2, 0.0);
    if let Regularization::Ladder { m, depth } = reg {
        let w = AtomRegularizer::new(depth);
        l += 4.0 * strict_weight(m);
        for a in &problem.atoms {
            let c = a.center();
            l += a.mass() * w.laplacian(((x - c.re).powi(2) + (y - c.im).powi(2)).sqrt());
        }
    }
    l
}

/// Value of the given (unregularized) datum at `(x, y)`.
pub fn planar_datum_value(problem: &FlowProblem, x: f64, y: f64) -> f64 {
    problem.smooth.value(x * x + y * y, 0.0) + atom_trace(problem, x, y)
}

/// `sum N_j log|z - a_j|` at `(x, y)`.
pub fn atom_trace(problem: &FlowProblem, x: f64, y: f64) -> f64 {
    problem
        .atoms
        .iter()
        .map(|a| {
            let c = a.center();
            a.mass() * 0.5 * ((x - c.re).powi(2) + (y - c.im).powi(2)).ln()
        })
        .sum()
}

/// Regularized initial values at the unknowns of a planar mesh.
pub fn planar_regularized_initial(problem: &FlowProblem, mesh: &PlanarMesh, reg: Regularization) -> Result<Vec<f64>> {
    match reg {
        Regularization::Exact if !problem.atoms.is_empty() => {
            return Err(Error::invalid("regularization", "data with atoms must be regularized"))
        }
        Regularization::Ladder { m, depth } if m == 0 || depth == 0 || depth > m => {
            return Err(Error::invalid("m", "need 1 <= depth <= m"))
        }
        Regularization::Ladder { depth, .. } if depth > mesh.max_depth() => {
            return Err(Error::MeshTooCoarse {
                requested: depth,
                max_admissible: mesh.max_depth(),
            })
        }
        _ => {}
    }
    Ok(mesh
        .coords()
        .iter()
        .map(|&[x, y]| planar_initial_value(problem, reg, x, y))
        .collect())
}

/// Boundary data of one rung: `zeta(t/eps)(t g + u0) + (1 - zeta(t/eps)) phi`
/// at each boundary point, or plain `phi` when `eps = 0`. Here `phi` is the
/// expression plus the per-point trace of the atom terms.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    eps: f64,
    u0: Vec<f64>,
    g: Vec<f64>,
    phi: Expr,
    trace: Vec<f64>,
    zeta: TimeCutoff,
}

impl BoundaryTrace {
    pub fn new(eps: f64, u0: Vec<f64>, g: Vec<f64>, phi: Expr, trace: Vec<f64>) -> Self {
        BoundaryTrace {
            eps,
            u0,
            g,
            phi,
            trace,
            zeta: TimeCutoff::build(),
        }
    }

    pub fn len(&self) -> usize {
        self.u0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u0.is_empty()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn initial(&self) -> &[f64] {
        &self.u0
    }

    pub fn source(&self) -> &[f64] {
        &self.g
    }

    pub fn value(&self, p: usize, t: f64) -> f64 {
        let phi = self.phi.value(1.0, t) + self.trace[p];
        if self.eps == 0.0 {
            return phi;
        }
        let z = self.zeta.value(t / self.eps);
        z * (t * self.g[p] + self.u0[p]) + (1.0 - z) * phi
    }

    pub fn rate(&self, p: usize, t: f64) -> f64 {
        let phi = self.phi.value(1.0, t) + self.trace[p];
        let phi_dot = self.phi.time_derivative(1.0, t);
        if self.eps == 0.0 {
            return phi_dot;
        }
        let z = self.zeta.jet(t / self.eps);
        let lin = t * self.g[p] + self.u0[p];
        z.d1 / self.eps * (lin - phi) + z.value * self.g[p] + (1.0 - z.value) * phi_dot
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialProfile {
    Radial(RadialProfile),
    Planar(Vec<f64>),
}

impl InitialProfile {
    pub fn values(&self) -> Vec<f64> {
        match self {
            InitialProfile::Radial(p) => p.values(),
            InitialProfile::Planar(v) => v.clone(),
        }
    }
}

/// One regularized problem of the ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderRung {
    pub info: RungInfo,
    pub initial: InitialProfile,
    /// `log det(u0_m) - A u0_m + f(., 0)` at the mesh nodes.
    pub g: Vec<f64>,
    pub boundary: BoundaryTrace,
}

fn schedule_eps(m: Option<u32>, sup_abs_g: f64) -> f64 {
    match m {
        Some(m) => 0.5f64.powi(m as i32) / (1.0 + sup_abs_g),
        None => 0.0,
    }
}

fn regularization_for(m: Option<u32>, max_depth: u32) -> Result<Regularization> {
    match m {
        None => Ok(Regularization::Exact),
        Some(0) => Err(Error::invalid("m", "rung index must be >= 1")),
        Some(m) if max_depth == 0 => Err(Error::MeshTooCoarse {
            requested: m,
            max_admissible: 0,
        }),
        Some(m) => Ok(Regularization::Ladder {
            m,
            depth: m.min(max_depth),
        }),
    }
}

/// Builds rung `m` (or the unregularized problem for `None`) on a radial
/// mesh. Indices beyond the mesh's resolvable depth reuse the deepest
/// cutoff and vary only the `2^{-m}(|z|² - 1)` term.
pub fn build_radial_rung(problem: &FlowProblem, mesh: &RadialMesh, m: Option<u32>) -> Result<LadderRung> {
    let reg = regularization_for(m, mesh.max_depth())?;
    let profile = radial_regularized_initial(problem, mesh, reg)?;
    let a = problem.params.damping();
    let values = profile.values();
    let ld = discrete_log_det(mesh, &profile)?;
    let mut g: Vec<f64> = ld
        .iter()
        .enumerate()
        .map(|(i, l)| l - a * values[i] + problem.source.value((2.0 * mesh.s(i)).exp(), 0.0))
        .collect();
    // boundary node from the exact jet of the regularized datum
    let jb = radial_initial_jet(problem, mesh, reg, 0.0);
    let det_b = crate::radial::radial_ma_det(jb.d1, jb.d2, 0.0, problem.params.n());
    if !(det_b > 0.0) {
        return Err(Error::NonPositiveHessian {
            location: "s = 0".into(),
            value: det_b,
        });
    }
    let u0_b = *values.last().expect("mesh is non-empty");
    let g_b = det_b.ln() - a * u0_b + problem.source.value(1.0, 0.0);
    g.push(g_b);
    let sup_abs_g = g.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
    let eps = schedule_eps(m, sup_abs_g);
    let delta = (u0_b - problem.smooth.value(1.0, 0.0)).abs();
    Ok(LadderRung {
        info: RungInfo {
            m,
            depth: match reg {
                Regularization::Ladder { depth, .. } => Some(depth),
                Regularization::Exact => None,
            },
            eps,
            delta,
            sup_abs_g,
        },
        initial: InitialProfile::Radial(profile),
        g,
        boundary: BoundaryTrace::new(eps, vec![u0_b], vec![g_b], problem.boundary.clone(), vec![0.0]),
    })
}

/// Builds rung `m` (or the unregularized problem for `None`) on a planar
/// mesh.
pub fn build_planar_rung(problem: &FlowProblem, mesh: &PlanarMesh, m: Option<u32>) -> Result<LadderRung> {
    let reg = regularization_for(m, mesh.max_depth())?;
    let u0 = planar_regularized_initial(problem, mesh, reg)?;
    let a = problem.params.damping();
    let bpts = mesh.boundary_points();
    let u0_b: Vec<f64> = bpts
        .iter()
        .map(|&[x, y]| planar_initial_value(problem, reg, x, y))
        .collect();
    let lap = mesh.laplacian(&u0, &u0_b);
    let mut g = Vec::with_capacity(u0.len() + bpts.len());
    for (p, (&l, &[x, y])) in lap.iter().zip(mesh.coords()).enumerate() {
        if !(l > 0.0) {
            return Err(Error::NonPositiveHessian {
                location: format!("({x:.4}, {y:.4})"),
                value: l,
            });
        }
        g.push((l / 4.0).ln() - a * u0[p] + problem.source.value(x * x + y * y, 0.0));
    }
    let mut g_b = Vec::with_capacity(bpts.len());
    for (b, &[x, y]) in bpts.iter().enumerate() {
        let l = planar_initial_laplacian(problem, reg, x, y);
        if !(l > 0.0) {
            return Err(Error::NonPositiveHessian {
                location: format!("({x:.4}, {y:.4})"),
                value: l,
            });
        }
        g_b.push((l / 4.0).ln() - a * u0_b[b] + problem.source.value(1.0, 0.0));
    }
    let sup_abs_g = g.iter().chain(&g_b).fold(0.0_f64, |s, v| s.max(v.abs()));
    let eps = schedule_eps(m, sup_abs_g);
    let delta = bpts
        .iter()
        .zip(&u0_b)
        .map(|(&[x, y], v)| (v - planar_datum_value(problem, x, y)).abs())
        .fold(0.0, f64::max);
    Ok(LadderRung {
        info: RungInfo {
            m,
            depth: match reg {
                Regularization::Ladder { depth, .. } => Some(depth),
                Regularization::Exact => None,
            },
            eps,
            delta,
            sup_abs_g,
        },
        initial: InitialProfile::Planar(u0),
        g,
        boundary: BoundaryTrace::new(
            eps,
            u0_b,
            g_b,
            problem.boundary.clone(),
            bpts.iter().map(|&[x, y]| atom_trace(problem, x, y)).collect(),
        ),
    })
}
