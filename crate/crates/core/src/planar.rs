//! Full two-dimensional solver for `n = 1`, where `det(u_{z z̄}) = Δu / 4`.
//!
//! The unit disc is covered by a square grid. Arms that leave the disc are
//! cut at the circle and the Laplacian uses the Shortley-Weller stencil,
//! which is exact on quadratics and keeps the Newton matrix an M-matrix.

use crate::error::{Error, Result};
use crate::problem::{sample_times, BoundaryTimeData, FlowProblem};
use crate::radial::bound_inputs;
use crate::record::{MeshInfo, RunRecord, Snapshot, SolverKind};
use crate::regularize::{InitialProfile, LadderRung};
use crate::stepping::{drive, StepOutcome, TimeSchedule, NEWTON_ITERATION_CAP, NEWTON_TOLERANCE_PLANAR};

/// Lower bound on `Δu / 4` for admissible iterates.
pub const LAPLACIAN_FLOOR: f64 = 1e-12;
/// Grid nodes closer than this fraction of a cell to the circle are dropped.
const BOUNDARY_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Neighbor {
    Node(usize),
    Boundary(usize),
}

/// Square grid of `cells` cells across the diameter, restricted to the disc.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarMesh {
    cells: usize,
    h: f64,
    coords: Vec<[f64; 2]>,
    /// Unknown index of each grid node, row-major, `None` outside.
    grid: Vec<Option<usize>>,
    /// Stencil weights `(neighbor, c)` with `Δu ≈ Σ c (u_nb - u_p)`.
    stencil: Vec<Vec<(Neighbor, f64)>>,
    boundary_points: Vec<[f64; 2]>,
    bandwidth: usize,
}

impl PlanarMesh {
    pub fn new(cells: usize) -> Result<Self> {
        if cells < 8 || !cells.is_multiple_of(2) {
            return Err(Error::invalid("cells", "need an even number of cells, at least 8"));
        }
        let side = cells + 1;
        let h = 2.0 / cells as f64;
        let coord = |i: usize| -1.0 + i as f64 * h;
        let mut grid = vec![None; side * side];
        let mut coords = Vec::new();
        for j in 0..side {
            for i in 0..side {
                let (x, y) = (coord(i), coord(j));
                if (x * x + y * y).sqrt() < 1.0 - BOUNDARY_MARGIN * h {
                    grid[j * side + i] = Some(coords.len());
                    coords.push([x, y]);
                }
            }
        }
        let mut stencil = Vec::with_capacity(coords.len());
        let mut boundary_points = Vec::new();
        let mut bandwidth = 0;
        for j in 0..side {
            for i in 0..side {
                let Some(p) = grid[j * side + i] else { continue };
                let [x, y] = coords[p];
                let mut row = Vec::with_capacity(4);
                for axis in 0..2 {
                    let mut arms = [(Neighbor::Node(0), 0.0); 2];
                    for (k, sign) in [1i64, -1].into_iter().enumerate() {
                        let (ni, nj) = if axis == 0 {
                            (i as i64 + sign, j as i64)
                        } else {
                            (i as i64, j as i64 + sign)
                        };
                        let inside = (0..side as i64).contains(&ni) && (0..side as i64).contains(&nj);
                        let nb = if inside {
                            grid[nj as usize * side + ni as usize]
                        } else {
                            None
                        };
                        arms[k] = match nb {
                            Some(q) => {
                                bandwidth = bandwidth.max(q.abs_diff(p));
                                (Neighbor::Node(q), h)
                            }
                            None => {
                                let sf = sign as f64;
                                let point = if axis == 0 {
                                    [sf * (1.0 - y * y).sqrt(), y]
                                } else {
                                    [x, sf * (1.0 - x * x).sqrt()]
                                };
                                let len = ((point[0] - x).powi(2) + (point[1] - y).powi(2)).sqrt();
                                boundary_points.push(point);
                                (Neighbor::Boundary(boundary_points.len() - 1), len)
                            }
                        };
                    }
                    let (hp, hm) = (arms[0].1, arms[1].1);
                    row.push((arms[0].0, 2.0 / (hp * (hp + hm))));
                    row.push((arms[1].0, 2.0 / (hm * (hp + hm))));
                }
                stencil.push(row);
            }
        }
        Ok(PlanarMesh {
            cells,
            h,
            coords,
            grid,
            stencil,
            boundary_points,
            bandwidth,
        })
    }

    pub fn from_info(info: &MeshInfo) -> Result<Self> {
        match *info {
            MeshInfo::Planar { cells } => Self::new(cells),
            MeshInfo::Radial { .. } => Err(Error::invalid("mesh", "record was computed on a radial mesh")),
        }
    }

    pub fn info(&self) -> MeshInfo {
        MeshInfo::Planar { cells: self.cells }
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn boundary_points(&self) -> &[[f64; 2]] {
        &self.boundary_points
    }

    pub fn stencil(&self, p: usize) -> &[(Neighbor, f64)] {
        &self.stencil[p]
    }

    /// Deepest cutoff whose plateau radius `e^{-m-1}` spans at least one cell.
    pub fn max_depth(&self) -> u32 {
        let m = (-self.h.ln() - 1.0 + 1e-9).floor();
        if m < 1.0 {
            0
        } else {
            m as u32
        }
    }

    /// Index of the unknown at grid position `(i, j)`.
    pub fn node_at(&self, i: usize, j: usize) -> Option<usize> {
        let side = self.cells + 1;
        if i < side && j < side {
            self.grid[j * side + i]
        } else {
            None
        }
    }

    /// Discrete Laplacian at every unknown.
    pub fn laplacian(&self, u: &[f64], boundary: &[f64]) -> Vec<f64> {
        self.stencil
            .iter()
            .enumerate()
            .map(|(p, row)| {
                row.iter()
                    .map(|&(nb, c)| {
                        let v = match nb {
                            Neighbor::Node(q) => u[q],
                            Neighbor::Boundary(b) => boundary[b],
                        };
                        c * (v - u[p])
                    })
                    .sum()
            })
            .collect()
    }

    /// Bilinear interpolation of nodal values at `(x, y)`; corners outside
    /// the disc are replaced by the mean of the inside corners.
    pub fn interpolate(&self, u: &[f64], x: f64, y: f64) -> Option<f64> {
        let fx = (x + 1.0) / self.h;
        let fy = (y + 1.0) / self.h;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (i, j) = (fx.floor() as usize, fy.floor() as usize);
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        let corners = [
            (self.node_at(i, j), (1.0 - tx) * (1.0 - ty)),
            (self.node_at(i + 1, j), tx * (1.0 - ty)),
            (self.node_at(i, j + 1), (1.0 - tx) * ty),
            (self.node_at(i + 1, j + 1), tx * ty),
        ];
        let inside: Vec<f64> = corners.iter().filter_map(|(n, _)| n.map(|q| u[q])).collect();
        if inside.is_empty() {
            return None;
        }
        let fill = inside.iter().sum::<f64>() / inside.len() as f64;
        Some(corners.iter().map(|(n, w)| w * n.map_or(fill, |q| u[q])).sum())
    }
}

/// Banded matrix with equal lower and upper bandwidth, row-major.
struct Banded {
    n: usize,
    bw: usize,
    a: Vec<f64>,
}

impl Banded {
    fn zeros(n: usize, bw: usize) -> Self {
        Banded {
            n,
            bw,
            a: vec![0.0; n * (2 * bw + 1)],
        }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.a[k] += v;
    }

    /// In-place LU without pivoting; the Newton matrices are strictly
    /// diagonally dominant.
    fn factor(&mut self) -> Result<()> {
        let (n, bw) = (self.n, self.bw);
        let width = 2 * bw + 1;
        for k in 0..n {
            let piv = self.a[self.idx(k, k)];
            if !(piv.abs() > 0.0) || !piv.is_finite() {
                return Err(Error::invalid("jacobian", "zero pivot in banded factorization"));
            }
            let jend = (k + bw + 1).min(n);
            let (head, tail) = self.a.split_at_mut((k + 1) * width);
            let krow = &head[k * width + bw + 1..k * width + bw + 1 + (jend - k - 1)];
            for i in k + 1..jend {
                let row = &mut tail[(i - k - 1) * width..(i - k) * width];
                let lk = k + bw - i;
                let l = row[lk] / piv;
                if l == 0.0 {
                    continue;
                }
                row[lk] = l;
                let start = lk + 1;
                for (dst, src) in row[start..start + krow.len()].iter_mut().zip(krow) {
                    *dst -= l * src;
                }
            }
        }
        Ok(())
    }

    fn solve(&self, b: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let mut s = b[i];
            for j in j0..i {
                s -= self.a[self.idx(i, j)] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let jend = (i + bw + 1).min(n);
            let mut s = b[i];
            for j in i + 1..jend {
                s -= self.a[self.idx(i, j)] * b[j];
            }
            b[i] = s / self.a[self.idx(i, i)];
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanarState {
    pub t: f64,
    pub u: Vec<f64>,
    pub t_prev: Option<f64>,
    pub udot: Option<Vec<f64>>,
    pub newton_iterations: usize,
    pub residual: f64,
}

impl PlanarState {
    pub fn initial(u: Vec<f64>) -> Self {
        PlanarState {
            t: 0.0,
            u,
            t_prev: None,
            udot: None,
            newton_iterations: 0,
            residual: 0.0,
        }
    }
}

fn admissible(lap: &[f64]) -> bool {
    lap.iter().all(|&l| l / 4.0 >= LAPLACIAN_FLOOR)
}

/// One backward-Euler step for `n = 1` solved by damped Newton with a banded
/// direct solve.
pub fn planar_step(
    state: &PlanarState,
    dt: f64,
    mesh: &PlanarMesh,
    rung: &LadderRung,
    problem: &FlowProblem,
) -> Result<PlanarState> {
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", "time step must be > 0"));
    }
    let a = problem.params.damping();
    let t_new = state.t + dt;
    let n = mesh.len();
    let boundary: Vec<f64> = (0..mesh.boundary_points.len())
        .map(|b| rung.boundary.value(b, t_new))
        .collect();
    let f: Vec<f64> = mesh
        .coords
        .iter()
        .map(|&[x, y]| problem.source.value(x * x + y * y, t_new))
        .collect();
    let old = &state.u;
    let mut u = old.clone();
    let mut lap = mesh.laplacian(&u, &boundary);
    if !admissible(&lap) {
        return Err(Error::ConeViolation { t: t_new });
    }
    let mut r = vec![0.0; n];
    let mut iterations = 0;
    let residual = loop {
        let mut res = 0.0_f64;
        for p in 0..n {
            r[p] = (u[p] - old[p]) / dt - (lap[p] / 4.0).ln() + a * u[p] - f[p];
            res = res.max(r[p].abs());
        }
        if !res.is_finite() {
            return Err(Error::NewtonDivergence {
                t: t_new,
                dt,
                residual: res,
            });
        }
        if res <= NEWTON_TOLERANCE_PLANAR {
            break res;
        }
        if iterations == NEWTON_ITERATION_CAP {
            return Err(Error::NewtonDivergence {
                t: t_new,
                dt,
                residual: res,
            });
        }
        iterations += 1;

        let mut jac = Banded::zeros(n, mesh.bandwidth);
        for p in 0..n {
            let inv = 1.0 / lap[p];
            let mut diag = 1.0 / dt + a;
            for &(nb, c) in &mesh.stencil[p] {
                diag += c * inv;
                if let Neighbor::Node(q) = nb {
                    jac.add(p, q, -c * inv);
                }
            }
            jac.add(p, p, diag);
        }
        jac.factor()?;
        let mut du: Vec<f64> = r.iter().map(|x| -x).collect();
        jac.solve(&mut du);

        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&du).map(|(v, d)| v + lambda * d).collect();
            let tl = mesh.laplacian(&trial, &boundary);
            if admissible(&tl) {
                u = trial;
                lap = tl;
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-12 {
                return Err(Error::ConeViolation { t: t_new });
            }
        }
    };
    let udot = u.iter().zip(old).map(|(v, w)| (v - w) / dt).collect();
    Ok(PlanarState {
        t: t_new,
        u,
        t_prev: Some(state.t),
        udot: Some(udot),
        newton_iterations: iterations,
        residual,
    })
}

/// Sampled data suprema for one rung on a planar mesh; the source depends on
/// `|z|²` only, so it is sampled on a uniform grid in `|z|²`.
pub fn planar_bound_data(mesh: &PlanarMesh, rung: &LadderRung, problem: &FlowProblem) -> BoundaryTimeData {
    let times = sample_times(problem.params.horizon(), 200, 2.0 * rung.info.eps, 100);
    let xs: Vec<f64> = (0..=256).map(|k| k as f64 / 256.0).collect();
    BoundaryTimeData::sample(
        times,
        mesh.boundary_points.len(),
        |p, t| (rung.boundary.value(p, t), rung.boundary.rate(p, t)),
        xs.len(),
        |q, t| (problem.source.value(xs[q], t), problem.source.time_derivative(xs[q], t)),
    )
}

pub fn planar_run(
    mesh: &PlanarMesh,
    rung: &LadderRung,
    problem: &FlowProblem,
    schedule: &TimeSchedule,
    scenario_hash: &str,
) -> Result<RunRecord> {
    if problem.params.n() != 1 {
        return Err(Error::invalid(
            "n",
            "the planar solver handles complex dimension 1 only",
        ));
    }
    let InitialProfile::Planar(u0) = &rung.initial else {
        return Err(Error::invalid("rung", "planar solve needs a planar initial profile"));
    };
    if u0.len() != mesh.len() {
        return Err(Error::invalid("rung", "initial profile does not match the mesh"));
    }
    let samples = planar_bound_data(mesh, rung, problem);
    let nb = mesh.boundary_points.len();
    let phi0: Vec<f64> = (0..nb).map(|b| rung.boundary.value(b, 0.0)).collect();
    let (snapshots, stats) = drive(
        schedule,
        PlanarState::initial(u0.clone()),
        rung.info.m.unwrap_or(0),
        |s, _t, dt| {
            let next = planar_step(s, dt, mesh, rung, problem)?;
            Ok(StepOutcome {
                iterations: next.newton_iterations,
                residual: next.residual,
                state: next,
            })
        },
        |s, t| {
            let boundary: Vec<f64> = (0..nb).map(|b| rung.boundary.value(b, t)).collect();
            let osc = boundary
                .iter()
                .zip(&phi0)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            Snapshot {
                t,
                values: s.u.clone(),
                udot: s.udot.clone(),
                boundary,
                boundary_osc: samples.boundary_oscillation(t).max(osc),
            }
        },
    )?;
    Ok(RunRecord {
        scenario_hash: scenario_hash.to_string(),
        solver: SolverKind::Planar,
        params: problem.params,
        mesh: mesh.info(),
        rung: rung.info,
        bounds: bound_inputs(&samples, problem),
        snapshots,
        stats,
    })
}
