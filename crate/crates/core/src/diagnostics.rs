//! Verdicts on computed runs: Lelong slopes, dissolution times, ladder
//! monotonicity, barrier dominance, envelopes, continuity and limits at
//! `t = 0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::closed_form::{
    continuity_bound, dotu_envelope, lelong_unchecked, predicted_dissolution, predicted_lelong, ContinuityInputs,
};
use crate::cutoff::AtomRegularizer;
use crate::error::{Error, Result};
use crate::params::LelongAtom;
use crate::planar::PlanarMesh;
use crate::problem::FlowProblem;
use crate::radial::{radial_ma_det, RadialMesh};
use crate::record::{MeshInfo, RunRecord, Snapshot, SolverKind};
use crate::regularize::strict_weight;

pub const ENVELOPE_TOLERANCE: f64 = 1e-6;
pub const CONTINUITY_TOLERANCE: f64 = 1e-6;
pub const BARRIER_TOLERANCE: f64 = 1e-6;
pub const LADDER_SLACK: f64 = 1e-7;
pub const LADDER_RATIO_MAX: f64 = 0.8;
pub const LADDER_COMPACT_DISTANCE: f64 = 0.2;
pub const FIXED_POINT_TOLERANCE: f64 = 1e-8;
pub const L1_TOLERANCE: f64 = 1e-3;
pub const LELONG_TOLERANCE_RADIAL: f64 = 0.05;
pub const LELONG_TOLERANCE_PLANAR: f64 = 0.07;
pub const DISSOLUTION_TOLERANCE: f64 = 0.1;
pub const DEFAULT_DISSOLUTION_THRESHOLD: f64 = 0.02;
pub const DEFAULT_BARRIER_FRACTION: f64 = 0.5;
/// Minimum number of distinct cutoff depths for the ladder slope estimator.
pub const LADDER_ESTIMATOR_MIN_DEPTHS: usize = 4;

const ANGLES: usize = 64;
const COMPACT_INNER: f64 = 0.3;
const COMPACT_OUTER: f64 = 0.9;

/// Outcome of one check. Passes when `margin >= -tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub margin: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: impl Into<String>, margin: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Verdict {
            name: name.into(),
            passed: margin >= -tolerance,
            margin,
            tolerance,
            detail: detail.into(),
        }
    }

    fn failed(name: impl Into<String>, tolerance: f64, detail: impl Into<String>) -> Self {
        Verdict {
            name: name.into(),
            passed: false,
            margin: f64::NEG_INFINITY,
            tolerance,
            detail: detail.into(),
        }
    }
}

/// The mesh a record was computed on.
#[derive(Debug, Clone, PartialEq)]
pub enum RecordMesh {
    Radial(RadialMesh),
    Planar(PlanarMesh),
}

impl RecordMesh {
    pub fn from_info(info: &MeshInfo) -> Result<Self> {
        Ok(match info {
            MeshInfo::Radial { .. } => RecordMesh::Radial(RadialMesh::from_info(info)?),
            MeshInfo::Planar { .. } => RecordMesh::Planar(PlanarMesh::from_info(info)?),
        })
    }

    pub fn len(&self) -> usize {
        match self {
            RecordMesh::Radial(m) => m.len(),
            RecordMesh::Planar(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Position of value node `i` in the plane; radial nodes lie on the
    /// positive real axis.
    pub fn position(&self, i: usize) -> [f64; 2] {
        match self {
            RecordMesh::Radial(m) => [m.s(i).exp(), 0.0],
            RecordMesh::Planar(m) => m.coords()[i],
        }
    }

    pub fn boundary_positions(&self) -> Vec<[f64; 2]> {
        match self {
            RecordMesh::Radial(_) => vec![[1.0, 0.0]],
            RecordMesh::Planar(m) => m.boundary_points().to_vec(),
        }
    }

    /// Value nodes where the equation is solved (the radial boundary node
    /// carries Dirichlet data).
    pub fn is_interior(&self, i: usize) -> bool {
        match self {
            RecordMesh::Radial(m) => i + 1 < m.len(),
            RecordMesh::Planar(_) => true,
        }
    }

    /// Quadrature weights normalized by the domain measure.
    pub fn volume_weights(&self) -> Vec<f64> {
        match self {
            RecordMesh::Radial(m) => {
                // d vol / |ball| = 2n e^{2ns} ds
                let n = m.n() as f64;
                let h = m.h();
                (0..m.len())
                    .map(|i| {
                        let end = i == 0 || i + 1 == m.len();
                        let w = if end { 0.5 * h } else { h };
                        2.0 * n * (2.0 * n * m.s(i)).exp() * w
                    })
                    .collect()
            }
            RecordMesh::Planar(m) => vec![m.h() * m.h() / std::f64::consts::PI; m.len()],
        }
    }

    /// Value at the atom center: the innermost radial node, or the bilinear
    /// interpolant on the planar grid.
    pub fn vertex_value(&self, values: &[f64], atom: &LelongAtom) -> Result<f64> {
        match self {
            RecordMesh::Radial(_) => {
                require_centered(atom)?;
                Ok(values[0])
            }
            RecordMesh::Planar(m) => {
                let c = atom.center();
                m.interpolate(values, c.re, c.im)
                    .ok_or_else(|| Error::invalid("atom", "atom center lies outside the mesh"))
            }
        }
    }
}

fn require_centered(atom: &LelongAtom) -> Result<()> {
    if atom.center().norm() != 0.0 {
        return Err(Error::invalid("atom", "radial records only carry atoms at the origin"));
    }
    Ok(())
}

fn distance(p: [f64; 2], atom: &LelongAtom) -> f64 {
    let c = atom.center();
    (p[0] - c.re).hypot(p[1] - c.im)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LelongMethod {
    /// Least-squares fit against `log|z - a|` on one snapshot.
    Window,
    /// Regression of the vertex value on the cutoff depth across rungs.
    Ladder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LelongEstimate {
    pub atom: usize,
    pub t: f64,
    pub slope: f64,
    /// Radii spanned by the fit.
    pub window: [f64; 2],
    pub residual: f64,
    pub method: LelongMethod,
}

/// Least-squares line through `(x, y)`; returns `(slope, intercept)`.
fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Least-squares coefficients of `y` on the given columns.
fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> Result<DVector<f64>> {
    let x = DMatrix::from_fn(y.len(), columns.len(), |i, j| columns[j][i]);
    x.svd(true, true)
        .solve(&DVector::from_column_slice(y), 1e-14)
        .map_err(|e| Error::invalid("fit", e.to_string()))
}

/// Fit of `y` on `[s, e^{2s}, 1]`; returns the coefficients of `s` and
/// `e^{2s}`.
fn log_quadratic_fit(s: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let r2: Vec<f64> = s.iter().map(|v| (2.0 * v).exp()).collect();
    let c = least_squares(&[s.to_vec(), r2, vec![1.0; s.len()]], y)?;
    Ok((c[0], c[1]))
}

/// Largest deviation of the difference quotients of `(x, y)` from `slope`.
fn quotient_spread(x: &[f64], y: &[f64], slope: f64) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(a, b)| ((b[1] - b[0]) / (a[1] - a[0]) - slope).abs())
        .fold(0.0, f64::max)
}

/// Slope of `u` against `log|z - a|` over radii `[r_lo, r_hi]` of one
/// snapshot, fitted together with `|z - a|²` and a constant. Planar
/// snapshots are averaged over circles first. The residual is the largest
/// deviation from the slope of a difference quotient of `u - c |z - a|²`
/// over every cell touching the window.
pub fn lelong_estimate(
    mesh: &RecordMesh,
    snapshot: &Snapshot,
    atom_index: usize,
    atom: &LelongAtom,
    depth: Option<u32>,
    window: [f64; 2],
) -> Result<LelongEstimate> {
    let [r_lo, r_hi] = window;
    if !(r_lo > 0.0 && r_hi > r_lo) {
        return Err(Error::invalid(
            "window",
            format!("need 0 < r_lo < r_hi, got [{r_lo}, {r_hi}]"),
        ));
    }
    if let Some(d) = depth {
        let edge = AtomRegularizer::new(d).identity_radius();
        if r_lo < edge * (1.0 - 1e-12) {
            return Err(Error::invalid(
                "window",
                format!("window starts at r = {r_lo:.4e}, inside the regularized zone r < {edge:.4e}"),
            ));
        }
    }
    let (xs, ys, fit_range) = match mesh {
        RecordMesh::Radial(m) => {
            require_centered(atom)?;
            let (a, b) = (r_lo.ln(), r_hi.ln());
            if a < m.s_min() - 1e-12 || b > 1e-12 {
                return Err(Error::invalid("window", "window extends beyond the mesh"));
            }
            let inside: Vec<usize> = (0..m.len())
                .filter(|&i| m.s(i) >= a - 1e-12 && m.s(i) <= b + 1e-12)
                .collect();
            if inside.len() < 3 {
                return Err(Error::invalid("window", "fewer than three mesh points in the window"));
            }
            let lo = inside[0].saturating_sub(1);
            let hi = (inside[inside.len() - 1] + 1).min(m.len() - 1);
            let xs: Vec<f64> = (lo..=hi).map(|i| m.s(i)).collect();
            let ys: Vec<f64> = (lo..=hi).map(|i| snapshot.values[i]).collect();
            (xs, ys, (inside[0] - lo, inside[0] - lo + inside.len()))
        }
        RecordMesh::Planar(m) => {
            let c = atom.center();
            if c.norm() + r_hi > 1.0 - m.h() {
                return Err(Error::invalid("window", "circles leave the disc"));
            }
            let ds = m.h() / r_lo;
            let k = (((r_hi / r_lo).ln() / ds).ceil() as usize).clamp(8, 64) + 1;
            let ds = (r_hi / r_lo).ln() / (k - 1) as f64;
            let mut xs = Vec::with_capacity(k + 2);
            let mut ys = Vec::with_capacity(k + 2);
            let mut first = 0;
            let mut last = 0;
            for j in -1..=(k as i64) {
                let s = r_lo.ln() + j as f64 * ds;
                let r = s.exp();
                let outside = j < 0 || j >= k as i64;
                if outside
                    && (c.norm() + r > 1.0 - m.h()
                        || depth.is_some_and(|d| r < AtomRegularizer::new(d).identity_radius()))
                {
                    continue;
                }
                let mut sum = 0.0;
                for q in 0..ANGLES {
                    let th = 2.0 * std::f64::consts::PI * q as f64 / ANGLES as f64;
                    let v = m
                        .interpolate(&snapshot.values, c.re + r * th.cos(), c.im + r * th.sin())
                        .ok_or_else(|| Error::invalid("window", "sample point outside the mesh"))?;
                    sum += v;
                }
                if j == 0 {
                    first = xs.len();
                }
                xs.push(s);
                ys.push(sum / ANGLES as f64);
                if j == k as i64 - 1 {
                    last = xs.len();
                }
            }
            (xs, ys, (first, last))
        }
    };
    let (slope, c2) = log_quadratic_fit(&xs[fit_range.0..fit_range.1], &ys[fit_range.0..fit_range.1])?;
    let detrended: Vec<f64> = xs.iter().zip(&ys).map(|(s, y)| y - c2 * (2.0 * s).exp()).collect();
    Ok(LelongEstimate {
        atom: atom_index,
        t: snapshot.t,
        slope,
        window,
        residual: quotient_spread(&xs, &detrended, slope),
        method: LelongMethod::Window,
    })
}

/// Slope from the vertex values of several rungs at time `t`: the value
/// at the atom, less the rung's strictly plurisubharmonic term, is regressed on `[-d, -ln d, 1]` over distinct cutoff depths
/// `d`. The window reports the plateau radii spanned.
pub fn ladder_lelong(
    mesh: &RecordMesh,
    records: &[&RunRecord],
    atom_index: usize,
    atom: &LelongAtom,
    t: f64,
) -> Result<LelongEstimate> {
    let mut points: Vec<(u32, u32, f64)> = Vec::new();
    for r in records {
        let (Some(d), Some(m)) = (r.rung.depth, r.rung.m) else {
            continue;
        };
        let Some(snap) = r.at(t) else {
            continue;
        };
        // remove the rung's own 2^{-m}(|z|² - 1) term
        let v = mesh.vertex_value(&snap.values, atom)? + strict_weight(m) * (1.0 - atom.center().norm_sqr());
        match points.iter_mut().find(|p| p.0 == d) {
            Some(p) if m < p.1 => *p = (d, m, v),
            Some(_) => {}
            None => points.push((d, m, v)),
        }
    }
    if points.len() < LADDER_ESTIMATOR_MIN_DEPTHS {
        return Err(Error::invalid(
            "records",
            format!(
                "ladder estimator needs {LADDER_ESTIMATOR_MIN_DEPTHS} distinct depths at t = {t}, found {}",
                points.len()
            ),
        ));
    }
    points.sort_by_key(|p| p.0);
    let k = points.len();
    let depth: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
    let columns = [
        depth.iter().map(|d| -d).collect::<Vec<_>>(),
        depth.iter().map(|d| -d.ln()).collect(),
        vec![1.0; k],
    ];
    let y: Vec<f64> = points.iter().map(|p| p.2).collect();
    let coef = least_squares(&columns, &y)?;
    let residual = (0..k)
        .map(|i| (coef[0] * columns[0][i] + coef[1] * columns[1][i] + coef[2] - y[i]).abs())
        .fold(0.0, f64::max);
    let plateau = |d: u32| AtomRegularizer::new(d).plateau_radius();
    Ok(LelongEstimate {
        atom: atom_index,
        t,
        slope: coef[0],
        window: [plateau(points[k - 1].0), plateau(points[0].0)],
        residual,
        method: LelongMethod::Ladder,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Dissolution {
    /// First output time with slope at or below the threshold, bracketed by
    /// the previous output time.
    Observed { t: f64, bracket: [f64; 2] },
    /// Threshold never reached; `last` is the final time examined.
    Censored { last: f64 },
    /// No estimate above the threshold: there is nothing to dissolve.
    Absent,
}

/// First estimate whose slope is at most `threshold * mass`.
pub fn dissolution_time(series: &[LelongEstimate], mass: f64, threshold: f64) -> Dissolution {
    if series.iter().all(|e| e.slope <= threshold * mass) {
        return Dissolution::Absent;
    }
    let mut prev = 0.0;
    for e in series {
        if e.slope <= threshold * mass {
            return Dissolution::Observed {
                t: e.t,
                bracket: [prev, e.t],
            };
        }
        prev = e.t;
    }
    Dissolution::Censored {
        last: series.last().map_or(0.0, |e| e.t),
    }
}

/// `|nu_hat - k_A(N, t)| <= tolerance * N` for `t` in `[0.1, 0.8] * eps_A(N)`.
pub fn check_lelong_law(record: &RunRecord, series: &[LelongEstimate], mass: f64, tolerance: f64) -> Result<Verdict> {
    let eps = predicted_dissolution(mass, &record.params)?;
    let mut worst = 0.0_f64;
    let mut at = f64::NAN;
    let mut count = 0;
    for e in series
        .iter()
        .filter(|e| e.t >= 0.1 * eps - 1e-12 && e.t <= 0.8 * eps + 1e-12)
    {
        let err = (e.slope - predicted_lelong(mass, e.t, &record.params)?).abs();
        count += 1;
        if err > worst {
            worst = err;
            at = e.t;
        }
    }
    let name = format!("lelong_law_atom_{}", series.first().map_or(0, |e| e.atom));
    if count == 0 {
        return Ok(Verdict::failed(
            name,
            0.0,
            "no estimate inside [0.1, 0.8] of the dissolution time",
        ));
    }
    Ok(Verdict::new(
        name,
        tolerance * mass - worst,
        0.0,
        format!(
            "{count} estimates, worst |nu_hat - k| = {worst:.4} at t = {at}, allowed {:.4}",
            tolerance * mass
        ),
    ))
}

pub fn check_dissolution(record: &RunRecord, estimate: &Dissolution, mass: f64, atom_index: usize) -> Result<Verdict> {
    let eps = predicted_dissolution(mass, &record.params)?;
    let name = format!("dissolution_atom_{atom_index}");
    Ok(match *estimate {
        Dissolution::Observed { t, bracket } => Verdict::new(
            name,
            DISSOLUTION_TOLERANCE * eps - (t - eps).abs(),
            0.0,
            format!("t* = {t} in [{}, {}], predicted {eps:.4}", bracket[0], bracket[1]),
        ),
        // censoring only contradicts the prediction once the run outlasts it
        Dissolution::Censored { last } if last < (1.0 + DISSOLUTION_TOLERANCE) * eps => Verdict::new(
            name,
            0.0,
            0.0,
            format!("censored at t = {last}, before the predicted {eps:.4}"),
        ),
        Dissolution::Censored { last } => {
            Verdict::failed(name, 0.0, format!("censored at t = {last}, predicted {eps:.4}"))
        }
        Dissolution::Absent => Verdict::failed(name, 0.0, "no estimate above the threshold"),
    })
}

/// Envelopes for `u_t` at every interior node and output time `t > 0`.
pub fn check_envelopes(mesh: &RecordMesh, record: &RunRecord) -> Result<Verdict> {
    let u0 = &record.initial().values;
    let sup_u0 = u0
        .iter()
        .chain(&record.initial().boundary)
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let b = record.bounds.envelope_b;
    let mut worst = f64::INFINITY;
    let mut at = (0.0, 0);
    for snap in record.snapshots.iter().filter(|s| s.t > 0.0) {
        let Some(udot) = &snap.udot else {
            continue;
        };
        for i in (0..snap.values.len()).filter(|&i| mesh.is_interior(i)) {
            let env = dotu_envelope(snap.values[i], u0[i], sup_u0, snap.t, &record.params, b)?;
            let slack = env.slack(udot[i]);
            if slack < worst {
                worst = slack;
                at = (snap.t, i);
            }
        }
    }
    Ok(Verdict::new(
        format!("envelopes_{}", record.rung.label()),
        worst,
        ENVELOPE_TOLERANCE,
        format!("B = {b:.4}, tightest at t = {}, node {}", at.0, at.1),
    ))
}

fn continuity_inputs(record: &RunRecord, snap: &Snapshot) -> ContinuityInputs {
    ContinuityInputs {
        n: record.params.n(),
        damping: record.params.damping(),
        sup_abs_psi: record.bounds.sup_abs_phi,
        sup_abs_g: record.bounds.sup_abs_f,
        inf_rho: -1.0,
        boundary_osc: snap.boundary_osc,
    }
}

/// `u(t) >= u(0) - C(t)` at every node and output time.
pub fn check_lower_continuity(record: &RunRecord) -> Result<Verdict> {
    let u0 = &record.initial().values;
    let mut worst = f64::INFINITY;
    let mut at = (0.0, 0);
    for snap in &record.snapshots {
        let c = continuity_bound(snap.t, &continuity_inputs(record, snap))?;
        for (i, (u, v)) in snap.values.iter().zip(u0).enumerate() {
            let m = u - v + c;
            if m < worst {
                worst = m;
                at = (snap.t, i);
            }
        }
    }
    Ok(Verdict::new(
        format!("lower_continuity_{}", record.rung.label()),
        worst,
        CONTINUITY_TOLERANCE,
        format!("tightest at t = {}, node {}", at.0, at.1),
    ))
}

/// Every snapshot equals the initial one.
pub fn check_fixed_point(record: &RunRecord) -> Verdict {
    let init = record.initial();
    let mut worst = 0.0_f64;
    for snap in &record.snapshots {
        let d = snap
            .values
            .iter()
            .zip(&init.values)
            .chain(snap.boundary.iter().zip(&init.boundary))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(d);
    }
    Verdict::new(
        format!("fixed_point_{}", record.rung.label()),
        FIXED_POINT_TOLERANCE - worst,
        0.0,
        format!("sup |u(t) - u(0)| = {worst:.3e}"),
    )
}

/// `u <= v + offset(t)` at every node and shared output time.
pub fn check_comparison(lower: &RunRecord, upper: &RunRecord, offset: impl Fn(f64) -> f64, tolerance: f64) -> Verdict {
    let mut worst = f64::INFINITY;
    let mut at = (0.0, 0);
    for snap in &lower.snapshots {
        let Some(other) = upper.at(snap.t) else {
            continue;
        };
        let c = offset(snap.t);
        for (i, (u, v)) in snap.values.iter().zip(&other.values).enumerate() {
            if v + c - u < worst {
                worst = v + c - u;
                at = (snap.t, i);
            }
        }
    }
    Verdict::new(
        "comparison",
        worst,
        tolerance,
        format!("tightest at t = {}, node {}", at.0, at.1),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderGap {
    pub m: u32,
    /// sup over times and nodes away from atoms of `|u_m - u_{m+1}|`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderCheck {
    pub monotone: Verdict,
    pub decay: Verdict,
    pub gaps: Vec<LadderGap>,
    /// Geometric ratio of the gap sequence from a log-linear fit.
    pub ratio: f64,
}

/// Monotone ladder `u_m + 2^{-m} >= u_{m+1}` and geometric decay of the
/// gaps on nodes at distance at least 0.2 from every atom. Records are
/// taken in increasing `m`; consecutive indices are compared.
pub fn check_ladder(mesh: &RecordMesh, records: &[&RunRecord], atoms: &[LelongAtom]) -> Result<LadderCheck> {
    let mut rungs: Vec<&RunRecord> = records.iter().copied().filter(|r| r.rung.m.is_some()).collect();
    rungs.sort_by_key(|r| r.rung.m);
    if rungs.len() < 3 {
        return Err(Error::invalid("records", "ladder checks need at least three rungs"));
    }
    let far: Vec<bool> = (0..mesh.len())
        .map(|i| {
            atoms
                .iter()
                .all(|a| distance(mesh.position(i), a) >= LADDER_COMPACT_DISTANCE)
        })
        .collect();
    let mut worst = f64::INFINITY;
    let mut worst_at = String::new();
    let mut gaps = Vec::new();
    for pair in rungs.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let m = lo.rung.m.expect("filtered");
        let slack = strict_weight(m);
        let mut gap = 0.0_f64;
        for snap in &lo.snapshots {
            let Some(next) = hi.at(snap.t) else {
                continue;
            };
            for (i, (u, v)) in snap.values.iter().zip(&next.values).enumerate() {
                let margin = u + slack - v;
                if margin < worst {
                    worst = margin;
                    let p = mesh.position(i);
                    worst_at = format!("m = {m}, t = {}, node {i} at ({:.4}, {:.4})", snap.t, p[0], p[1]);
                }
                if far[i] {
                    gap = gap.max((u - v).abs());
                }
            }
        }
        gaps.push(LadderGap { m, gap });
    }
    let xs: Vec<f64> = gaps.iter().map(|g| g.m as f64).collect();
    let ys: Vec<f64> = gaps.iter().map(|g| g.gap.max(1e-300).ln()).collect();
    let ratio = line_fit(&xs, &ys).0.exp();
    let listing: Vec<String> = gaps.iter().map(|g| format!("{}:{:.3e}", g.m, g.gap)).collect();
    Ok(LadderCheck {
        monotone: Verdict::new(
            "ladder_monotone",
            worst,
            LADDER_SLACK,
            format!("tightest at {worst_at}"),
        ),
        decay: Verdict::new(
            "ladder_decay",
            LADDER_RATIO_MAX - ratio,
            0.0,
            format!("ratio {ratio:.4}; gaps {}", listing.join(" ")),
        ),
        gaps,
        ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierCheck {
    pub rung: String,
    pub atom: usize,
    pub nu: f64,
    /// Smallest constant satisfying the source, initial and boundary
    /// inequalities on the mesh.
    pub b: f64,
    pub verdict: Verdict,
}

/// Supersolution `k_A(nu, t) w_m + |z|² + B (t + 1)` near `atom`, with `B`
/// computed from the three inequalities on the mesh, compared against the
/// record at each output time before `eps_A(nu)`. Returns `None` for the
/// unregularized record or when no output time precedes `eps_A(nu)`.
pub fn check_barrier(
    mesh: &RecordMesh,
    record: &RunRecord,
    problem: &FlowProblem,
    atom_index: usize,
    nu: f64,
) -> Result<Option<BarrierCheck>> {
    let atom = problem
        .atoms
        .get(atom_index)
        .ok_or_else(|| Error::invalid("atom", "atom index out of range"))?;
    if !(nu > 0.0 && nu < atom.mass()) {
        return Err(Error::invalid("nu", "barrier needs 0 < nu < mass"));
    }
    let Some(depth) = record.rung.depth else {
        return Ok(None);
    };
    let params = &record.params;
    let (n, a) = (params.nf(), params.damping());
    let eps = predicted_dissolution(nu, params)?;
    let snaps: Vec<&Snapshot> = record.snapshots.iter().filter(|s| s.t < eps).collect();
    if snaps.len() < 2 {
        return Ok(None);
    }
    let t_max = snaps[snaps.len() - 1].t;
    let reg = AtomRegularizer::new(depth);
    let nodes: Vec<[f64; 2]> = (0..mesh.len()).map(|i| mesh.position(i)).collect();
    let w: Vec<f64> = nodes.iter().map(|&p| reg.value(distance(p, atom))).collect();
    let r2: Vec<f64> = nodes.iter().map(|p| p[0] * p[0] + p[1] * p[1]).collect();
    let g = |t: f64| lelong_unchecked(nu, t, n, a);
    let log_det = |i: usize, k: f64| -> f64 {
        match mesh {
            RecordMesh::Radial(m) => {
                let s = m.s(i);
                let j = reg.jet_log(s);
                let e = (2.0 * s).exp();
                radial_ma_det(k * j.d1 + 2.0 * e, k * j.d2 + 4.0 * e, s, m.n()).ln()
            }
            RecordMesh::Planar(_) => ((k * reg.laplacian(distance(nodes[i], atom)) + 4.0) / 4.0).ln(),
        }
    };
    let mut times: Vec<f64> = (0..=50).map(|j| t_max * j as f64 / 50.0).collect();
    times.extend(snaps.iter().map(|s| s.t));
    let mut b = f64::NEG_INFINITY;
    for &t in &times {
        let k = g(t);
        for i in (0..nodes.len()).filter(|&i| mesh.is_interior(i)) {
            let rhs = 2.0 * n * w[i] - a * r2[i] + log_det(i, k) + problem.source.value(r2[i], t);
            b = b.max(rhs / (1.0 + a * (t + 1.0)));
        }
    }
    let init = record.initial();
    for (i, u) in init.values.iter().enumerate() {
        b = b.max(u - nu * w[i] - r2[i]);
    }
    let bnodes = mesh.boundary_positions();
    let bw: Vec<f64> = bnodes.iter().map(|&p| reg.value(distance(p, atom))).collect();
    for snap in &snaps {
        for (j, phi) in snap.boundary.iter().enumerate() {
            b = b.max((phi - g(snap.t) * bw[j] - 1.0) / (snap.t + 1.0));
        }
    }
    let name = format!("barrier_{}_atom_{atom_index}", record.rung.label());
    if !b.is_finite() {
        return Ok(Some(BarrierCheck {
            rung: record.rung.label(),
            atom: atom_index,
            nu,
            b,
            verdict: Verdict::failed(name, BARRIER_TOLERANCE, "no finite B on the mesh"),
        }));
    }
    let mut worst = f64::INFINITY;
    let mut at = (0.0, 0);
    for snap in &snaps {
        let k = g(snap.t);
        for (i, u) in snap.values.iter().enumerate() {
            let v = k * w[i] + r2[i] + b * (snap.t + 1.0);
            if v - u < worst {
                worst = v - u;
                at = (snap.t, i);
            }
        }
    }
    Ok(Some(BarrierCheck {
        rung: record.rung.label(),
        atom: atom_index,
        nu,
        b,
        verdict: Verdict::new(
            name,
            worst,
            BARRIER_TOLERANCE,
            format!("nu = {nu}, B = {b:.4}, tightest at t = {}, node {}", at.0, at.1),
        ),
    }))
}

/// L¹ distance to the initial datum at the first positive output time
/// (plateau nodes excluded) and the sup gap on `{0.3 <= dist to atoms,
/// |z| <= 0.9}` against `2 C(t)`.
pub fn check_limits_at_zero(mesh: &RecordMesh, record: &RunRecord, atoms: &[LelongAtom]) -> Result<Vec<Verdict>> {
    let init = record.initial();
    let label = record.rung.label();
    let plateau = record
        .rung
        .depth
        .map_or(0.0, |d| AtomRegularizer::new(d).plateau_radius());
    let weights = mesh.volume_weights();
    let mut out = Vec::new();
    if let Some(snap) = record.snapshots.iter().find(|s| s.t > 0.0) {
        let l1: f64 = (0..mesh.len())
            .filter(|&i| atoms.iter().all(|a| distance(mesh.position(i), a) >= plateau))
            .map(|i| weights[i] * (snap.values[i] - init.values[i]).abs())
            .sum();
        out.push(Verdict::new(
            format!("l1_limit_{label}"),
            L1_TOLERANCE - l1,
            0.0,
            format!("normalized L1 gap {l1:.3e} at t = {}", snap.t),
        ));
    }
    let compact: Vec<usize> = (0..mesh.len())
        .filter(|&i| {
            let p = mesh.position(i);
            p[0].hypot(p[1]) <= COMPACT_OUTER && atoms.iter().all(|a| distance(p, a) >= COMPACT_INNER)
        })
        .collect();
    if !compact.is_empty() {
        let mut worst = f64::INFINITY;
        let mut at = 0.0;
        for snap in record.snapshots.iter().filter(|s| s.t > 0.0) {
            let c = continuity_bound(snap.t, &continuity_inputs(record, snap))?;
            let gap = compact
                .iter()
                .map(|&i| (snap.values[i] - init.values[i]).abs())
                .fold(0.0, f64::max);
            if 2.0 * c - gap < worst {
                worst = 2.0 * c - gap;
                at = snap.t;
            }
        }
        out.push(Verdict::new(
            format!("compact_limit_{label}"),
            worst,
            0.0,
            format!("{} nodes, tightest at t = {at}", compact.len()),
        ));
    }
    Ok(out)
}

/// Knobs of [`diagnose`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticSettings {
    /// Barrier mass as a fraction of the atom mass.
    pub barrier_fraction: f64,
    /// Dissolution threshold as a fraction of the atom mass.
    pub dissolution_threshold: f64,
    /// Fit window `[r_lo, r_hi]` for snapshot slope estimates.
    pub lelong_window: Option<[f64; 2]>,
    /// Assert that every record is a fixed point.
    pub stationary: bool,
}

impl Default for DiagnosticSettings {
    fn default() -> Self {
        DiagnosticSettings {
            barrier_fraction: DEFAULT_BARRIER_FRACTION,
            dissolution_threshold: DEFAULT_DISSOLUTION_THRESHOLD,
            lelong_window: None,
            stationary: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LelongPoint {
    pub t: f64,
    pub nu_hat: f64,
    pub k_a_predicted: f64,
    pub residual: f64,
    pub window: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomReport {
    pub atom: usize,
    pub center: [f64; 2],
    pub mass: f64,
    pub method: LelongMethod,
    /// Record used for snapshot estimates; absent for the ladder estimator.
    pub rung: Option<String>,
    pub series: Vec<LelongPoint>,
    pub dissolution: Dissolution,
    pub predicted_dissolution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub scenario_hash: String,
    pub solver: SolverKind,
    pub verdicts: Vec<Verdict>,
    pub atoms: Vec<AtomReport>,
    pub ladder_gaps: Vec<LadderGap>,
    pub ladder_ratio: Option<f64>,
    pub barriers: Vec<BarrierCheck>,
    pub notes: Vec<String>,
}

impl DiagnosticsReport {
    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| !v.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Io(e.to_string()))
    }
}

/// Default snapshot window around an atom: from the edge of the deepest
/// regularized zone out to the nearer of the boundary and the midpoint to
/// the next atom.
pub fn default_window(mesh: &RecordMesh, atoms: &[LelongAtom], index: usize, depth: Option<u32>) -> [f64; 2] {
    let atom = &atoms[index];
    let lo = depth.map_or(1e-3, |d| AtomRegularizer::new(d).identity_radius());
    let mut hi: f64 = match mesh {
        RecordMesh::Radial(_) => (-1.0f64).exp(),
        RecordMesh::Planar(m) => 0.9 * (1.0 - atom.center().norm() - m.h()),
    };
    for (j, b) in atoms.iter().enumerate() {
        if j != index {
            hi = hi.min(0.5 * (atom.center() - b.center()).norm());
        }
    }
    [lo, hi]
}

fn slope_series(
    mesh: &RecordMesh,
    records: &[&RunRecord],
    deepest: &RunRecord,
    atoms: &[LelongAtom],
    index: usize,
    settings: &DiagnosticSettings,
) -> Result<(LelongMethod, Vec<LelongEstimate>)> {
    let atom = &atoms[index];
    let mut depths: Vec<u32> = records.iter().filter_map(|r| r.rung.depth).collect();
    depths.sort_unstable();
    depths.dedup();
    let use_ladder = matches!(mesh, RecordMesh::Radial(_))
        && depths.len() >= LADDER_ESTIMATOR_MIN_DEPTHS
        && settings.lelong_window.is_none();
    let times: Vec<f64> = deepest.snapshots.iter().map(|s| s.t).filter(|&t| t > 0.0).collect();
    if use_ladder {
        let mut series = Vec::new();
        for &t in &times {
            series.push(ladder_lelong(mesh, records, index, atom, t)?);
        }
        return Ok((LelongMethod::Ladder, series));
    }
    let window = settings
        .lelong_window
        .unwrap_or_else(|| default_window(mesh, atoms, index, deepest.rung.depth));
    let mut series = Vec::new();
    for snap in deepest.snapshots.iter().filter(|s| s.t > 0.0) {
        series.push(lelong_estimate(mesh, snap, index, atom, deepest.rung.depth, window)?);
    }
    Ok((LelongMethod::Window, series))
}

/// Runs every applicable check over the records of one scenario.
pub fn diagnose(
    problem: &FlowProblem,
    records: &[RunRecord],
    settings: &DiagnosticSettings,
) -> Result<DiagnosticsReport> {
    let first = records
        .first()
        .ok_or_else(|| Error::invalid("records", "no records to diagnose"))?;
    for r in records {
        r.validate()?;
        if r.mesh != first.mesh || r.scenario_hash != first.scenario_hash {
            return Err(Error::invalid(
                "records",
                "records come from different meshes or scenarios",
            ));
        }
    }
    let mesh = RecordMesh::from_info(&first.mesh)?;
    let refs: Vec<&RunRecord> = records.iter().collect();
    let mut verdicts = Vec::new();
    let mut notes = vec![
        format!(
            "envelope constants use each rung's own data, sampled at {} times and {} points",
            first.bounds.time_samples, first.bounds.space_samples
        ),
        "the full ladder is kept; no subsequence is selected".to_string(),
    ];
    for r in records {
        verdicts.push(check_envelopes(&mesh, r)?);
        verdicts.push(check_lower_continuity(r)?);
        if settings.stationary {
            verdicts.push(check_fixed_point(r));
        }
    }
    let ladder: Vec<&RunRecord> = refs.iter().copied().filter(|r| r.rung.m.is_some()).collect();
    let deepest = ladder.iter().copied().max_by_key(|r| r.rung.m).unwrap_or(first);
    verdicts.extend(check_limits_at_zero(&mesh, deepest, &problem.atoms)?);
    let mut ladder_gaps = Vec::new();
    let mut ladder_ratio = None;
    if ladder.len() >= 3 {
        let lc = check_ladder(&mesh, &ladder, &problem.atoms)?;
        verdicts.push(lc.monotone);
        verdicts.push(lc.decay);
        ladder_gaps = lc.gaps;
        ladder_ratio = Some(lc.ratio);
    } else {
        notes.push(format!("ladder checks skipped: {} rungs", ladder.len()));
    }
    let mut atoms = Vec::new();
    let mut barriers = Vec::new();
    for (index, atom) in problem.atoms.iter().enumerate() {
        let (method, series) = slope_series(&mesh, &ladder, deepest, &problem.atoms, index, settings)?;
        let dissolution = dissolution_time(&series, atom.mass(), settings.dissolution_threshold);
        let tolerance = match mesh {
            RecordMesh::Radial(_) => LELONG_TOLERANCE_RADIAL,
            RecordMesh::Planar(_) => LELONG_TOLERANCE_PLANAR,
        };
        verdicts.push(check_lelong_law(deepest, &series, atom.mass(), tolerance)?);
        verdicts.push(check_dissolution(deepest, &dissolution, atom.mass(), index)?);
        for r in &ladder {
            if let Some(bc) = check_barrier(&mesh, r, problem, index, settings.barrier_fraction * atom.mass())? {
                verdicts.push(bc.verdict.clone());
                barriers.push(bc);
            }
        }
        let c = atom.center();
        atoms.push(AtomReport {
            atom: index,
            center: [c.re, c.im],
            mass: atom.mass(),
            method,
            rung: (method == LelongMethod::Window).then(|| deepest.rung.label()),
            series: series
                .iter()
                .map(|e| LelongPoint {
                    t: e.t,
                    nu_hat: e.slope,
                    k_a_predicted: predicted_lelong(atom.mass(), e.t, &first.params).map_or(0.0, |k| k.max(0.0)),
                    residual: e.residual,
                    window: e.window,
                })
                .collect(),
            dissolution,
            predicted_dissolution: predicted_dissolution(atom.mass(), &first.params)?,
        });
    }
    if !problem.atoms.is_empty() {
        notes.push("atoms are assumed to have equal lower and upper mass".to_string());
    }
    Ok(DiagnosticsReport {
        scenario_hash: first.scenario_hash.clone(),
        solver: first.solver,
        verdicts,
        atoms,
        ladder_gaps,
        ladder_ratio,
        barriers,
        notes,
    })
}
