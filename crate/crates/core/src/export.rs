//! CSV export of stored runs.

use std::str::FromStr;

use crate::closed_form::dotu_envelope;
use crate::diagnostics::{DiagnosticsReport, RecordMesh, ENVELOPE_TOLERANCE};
use crate::error::{Error, Result};
use crate::record::RunRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    /// Node values and time derivatives per rung and output time.
    Profile,
    /// Lelong number estimates against the predicted decay.
    Lelong,
    /// `u_t` against its two-sided envelope.
    Envelopes,
}

impl FromStr for Series {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "profile" => Ok(Series::Profile),
            "lelong" => Ok(Series::Lelong),
            "envelopes" => Ok(Series::Envelopes),
            other => Err(Error::UnknownSeries(other.to_string())),
        }
    }
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(csv_err)?;
    String::from_utf8(bytes).map_err(csv_err)
}

fn num(v: f64) -> String {
    v.to_string()
}

/// Columns `rung,t,node,x,y,u,udot`; radial nodes sit at `(r, 0)` and
/// `udot` is empty at `t = 0`.
pub fn profile_csv(records: &[RunRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rung", "t", "node", "x", "y", "u", "udot"])
        .map_err(csv_err)?;
    for r in records {
        let mesh = RecordMesh::from_info(&r.mesh)?;
        let label = r.rung.label();
        for snap in &r.snapshots {
            for (i, &u) in snap.values.iter().enumerate() {
                let [x, y] = mesh.position(i);
                let udot = snap.udot.as_ref().map_or(String::new(), |d| num(d[i]));
                w.write_record([label.clone(), num(snap.t), i.to_string(), num(x), num(y), num(u), udot])
                    .map_err(csv_err)?;
            }
        }
    }
    finish(w)
}

/// Columns `t,nu_hat,k_A_predicted,residual,atom`.
pub fn lelong_csv(report: &DiagnosticsReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "nu_hat", "k_A_predicted", "residual", "atom"])
        .map_err(csv_err)?;
    for a in &report.atoms {
        for p in &a.series {
            w.write_record([
                num(p.t),
                num(p.nu_hat),
                num(p.k_a_predicted),
                num(p.residual),
                a.atom.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    finish(w)
}

/// Columns `rung,t,node,lower,udot,upper,holds` over interior nodes and `t > 0`.
pub fn envelopes_csv(records: &[RunRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rung", "t", "node", "lower", "udot", "upper", "holds"])
        .map_err(csv_err)?;
    for r in records {
        let mesh = RecordMesh::from_info(&r.mesh)?;
        let label = r.rung.label();
        let u0 = &r.initial().values;
        let sup_u0 = u0
            .iter()
            .chain(&r.initial().boundary)
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        for snap in r.snapshots.iter().filter(|s| s.t > 0.0) {
            let Some(udot) = &snap.udot else {
                continue;
            };
            for i in (0..snap.values.len()).filter(|&i| mesh.is_interior(i)) {
                let env = dotu_envelope(snap.values[i], u0[i], sup_u0, snap.t, &r.params, r.bounds.envelope_b)?;
                let holds = env.slack(udot[i]) >= -ENVELOPE_TOLERANCE;
                w.write_record([
                    label.clone(),
                    num(snap.t),
                    i.to_string(),
                    num(env.lower),
                    num(udot[i]),
                    num(env.upper),
                    holds.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    finish(w)
}

pub fn export_csv(series: Series, records: &[RunRecord], report: &DiagnosticsReport) -> Result<String> {
    match series {
        Series::Profile => profile_csv(records),
        Series::Lelong => lelong_csv(report),
        Series::Envelopes => envelopes_csv(records),
    }
}
