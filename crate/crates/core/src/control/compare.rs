use serde::{Deserialize, Serialize};

use super::{median, run_closed_loop, ClosedLoopConfig, ControllerKind, Maneuver, SloshPredictor};
use crate::actuator::{bang_stop_bang, Axis};
use crate::error::{Error, Result};
use crate::predictor::GridAxis;

/// Controller and predictor flown in one column of a comparison.
#[derive(Debug, Clone)]
pub struct Contender {
    pub kind: ControllerKind,
    pub predictor: SloshPredictor,
}

impl Contender {
    pub fn new(kind: ControllerKind, predictor: SloshPredictor) -> Self {
        Self { kind, predictor }
    }

    pub fn label(&self) -> String {
        let name = self.kind.label();
        match super::predictor_label(self.kind.inner(), &self.predictor) {
            "none" => name,
            p => format!("{name}/{p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub torque: f64,
    pub duration: f64,
    pub dwell: f64,
    /// Attitude settling time per contender, s; `None` if it never settled.
    pub settling: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub labels: Vec<String>,
    pub rows: Vec<CompareRow>,
    /// Median over cells of settling time relative to the first contender.
    pub median_ratio: Vec<f64>,
}

/// Settling-time ratio with unsettled runs counted as infinitely slow;
/// two unsettled runs tie.
pub fn settling_ratio(candidate: Option<f64>, reference: Option<f64>) -> f64 {
    match (candidate, reference) {
        (None, None) => 1.0,
        (None, Some(_)) => f64::INFINITY,
        (Some(_), None) => 0.0,
        (Some(c), Some(0.0)) => {
            if c == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        }
        (Some(c), Some(r)) => c / r,
    }
}

/// Paired runs of every contender over a torque × duration × dwell grid of
/// bang-stop-bang maneuvers, all with the same seed per cell.
pub fn paired_grid(
    cfg: &ClosedLoopConfig,
    torque: &GridAxis,
    duration: &GridAxis,
    dwell: &GridAxis,
    contenders: &[Contender],
    t_start: f64,
    seed: u64,
) -> Result<Comparison> {
    if contenders.is_empty() {
        return Err(Error::config("comparison needs at least one controller"));
    }
    let mut rows = Vec::new();
    for &tq in &torque.values() {
        for &d in &duration.values() {
            for &w in &dwell.values() {
                let maneuver = Maneuver::profile(bang_stop_bang(tq, d, w, t_start, 1.0)?);
                let settling = contenders
                    .iter()
                    .map(|c| {
                        run_closed_loop(cfg, &c.kind, &maneuver, &c.predictor, Axis::X, seed)
                            .map(|r| r.metrics.settling_time_omega)
                    })
                    .collect::<Result<Vec<_>>>()?;
                rows.push(CompareRow { torque: tq, duration: d, dwell: w, settling });
            }
        }
    }
    let median_ratio = (0..contenders.len())
        .map(|j| median(rows.iter().map(|r| settling_ratio(r.settling[j], r.settling[0])).collect()))
        .collect();
    Ok(Comparison { labels: contenders.iter().map(Contender::label).collect(), rows, median_ratio })
}

impl Comparison {
    pub fn render_text(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        let _ = write!(s, "{:>8} {:>6} {:>6}", "torque", "dur", "dwell");
        for l in &self.labels {
            let _ = write!(s, " {l:>18}");
        }
        let _ = writeln!(s);
        for r in &self.rows {
            let _ = write!(s, "{:>8.4} {:>6.1} {:>6.1}", r.torque, r.duration, r.dwell);
            for v in &r.settling {
                match v {
                    Some(v) => {
                        let _ = write!(s, " {v:>18.2}");
                    }
                    None => {
                        let _ = write!(s, " {:>18}", "unsettled");
                    }
                }
            }
            let _ = writeln!(s);
        }
        let _ = write!(s, "{:>22}", "median ratio");
        for v in &self.median_ratio {
            let _ = write!(s, " {v:>18.3}");
        }
        let _ = writeln!(s);
        s
    }
}
