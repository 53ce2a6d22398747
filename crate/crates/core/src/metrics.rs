//! Per-axis tracking-error statistics over a simulation trace, and the
//! LQR-vs-LQRi improvement arithmetic.

use crate::sim::SimTrace;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("cannot compute metrics over an empty trace")]
    EmptyTrace,
}

/// Error statistics for one axis, all in degrees (mse in degrees²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisStats {
    pub mse: f64,
    pub rmse: f64,
    pub mean_deviation: f64,
}

/// Per-axis statistics of commanded-vs-actual Euler angle error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingMetrics {
    pub roll: AxisStats,
    pub pitch: AxisStats,
    pub yaw: AxisStats,
}

impl TrackingMetrics {
    pub fn axes(&self) -> [(&'static str, &AxisStats); 3] {
        [
            ("roll", &self.roll),
            ("pitch", &self.pitch),
            ("yaw", &self.yaw),
        ]
    }
}

/// Relative improvement of LQRi over LQR per metric; `None` marks an
/// undefined ratio (LQR metric exactly zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisImprovement {
    pub mse: Option<f64>,
    pub rmse: Option<f64>,
    pub mean_deviation: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Improvement {
    pub roll: AxisImprovement,
    pub pitch: AxisImprovement,
    pub yaw: AxisImprovement,
}

/// Wraps an angle difference in degrees to (−180, 180].
fn wrap_deg(e: f64) -> f64 {
    e - 360.0 * ((e - 180.0) / 360.0).ceil()
}

fn axis_stats(errors: impl Iterator<Item = f64>) -> AxisStats {
    let mut n = 0usize;
    let mut sum_sq = 0.0;
    let mut sum_abs = 0.0;
    for e in errors {
        n += 1;
        sum_sq += e * e;
        sum_abs += e.abs();
    }
    let mse = sum_sq / n as f64;
    AxisStats {
        mse,
        rmse: mse.sqrt(),
        mean_deviation: sum_abs / n as f64,
    }
}

/// Tracking statistics over the commanded-vs-actual Euler error at each
/// control step; the yaw error is wrapped to (−180°, 180°] so errors across
/// the discontinuity stay small.
pub fn compute(trace: &SimTrace) -> Result<TrackingMetrics, MetricsError> {
    if trace.rows.is_empty() {
        return Err(MetricsError::EmptyTrace);
    }
    let err = |axis: usize| {
        trace
            .rows
            .iter()
            .map(move |r| r.commanded_deg[axis] - r.actual_deg[axis])
    };
    Ok(TrackingMetrics {
        roll: axis_stats(err(0)),
        pitch: axis_stats(err(1)),
        yaw: axis_stats(err(2).map(wrap_deg)),
    })
}

fn ratio(lqr: f64, lqri: f64) -> Option<f64> {
    if lqr == 0.0 {
        None
    } else {
        Some((lqr - lqri) / lqr)
    }
}

fn axis_improvement(lqr: &AxisStats, lqri: &AxisStats) -> AxisImprovement {
    AxisImprovement {
        mse: ratio(lqr.mse, lqri.mse),
        rmse: ratio(lqr.rmse, lqri.rmse),
        mean_deviation: ratio(lqr.mean_deviation, lqri.mean_deviation),
    }
}

/// Fractional improvement `(lqr − lqri)/lqr` per axis and metric; negative
/// values mean LQRi did worse.
pub fn improvement(lqr: &TrackingMetrics, lqri: &TrackingMetrics) -> Improvement {
    Improvement {
        roll: axis_improvement(&lqr.roll, &lqri.roll),
        pitch: axis_improvement(&lqr.pitch, &lqri.pitch),
        yaw: axis_improvement(&lqr.yaw, &lqri.yaw),
    }
}

/// Plain-text table of one controller's statistics.
pub fn render_table(label: &str, m: &TrackingMetrics) -> String {
    let mut out = String::new();
    out.push_str(&format!("{label} tracking errors (degrees)\n"));
    out.push_str("axis      MSE        RMSE       mean deviation\n");
    for (name, s) in m.axes() {
        out.push_str(&format!(
            "{name:<8} {mse:<10.4} {rmse:<10.4} {md:<10.4}\n",
            mse = s.mse,
            rmse = s.rmse,
            md = s.mean_deviation
        ));
    }
    out
}

/// Key-value lines `prefix.axis.metric = value` for machine consumption.
pub fn render_kv(prefix: &str, m: &TrackingMetrics) -> String {
    let mut out = String::new();
    for (name, s) in m.axes() {
        out.push_str(&format!("{prefix}.{name}.mse = {:.9e}\n", s.mse));
        out.push_str(&format!("{prefix}.{name}.rmse = {:.9e}\n", s.rmse));
        out.push_str(&format!(
            "{prefix}.{name}.mean_deviation = {:.9e}\n",
            s.mean_deviation
        ));
    }
    out
}

fn improvement_cell(v: Option<f64>) -> String {
    match v {
        Some(f) => format!("{:.1}%", 100.0 * f),
        None => "undefined".into(),
    }
}

/// Improvement table (percent per axis and metric).
pub fn render_improvement(imp: &Improvement) -> String {
    let mut out = String::new();
    out.push_str("LQRi improvement over LQR\n");
    out.push_str("axis      MSE        RMSE       mean deviation\n");
    for (name, a) in [
        ("roll", &imp.roll),
        ("pitch", &imp.pitch),
        ("yaw", &imp.yaw),
    ] {
        out.push_str(&format!(
            "{name:<8} {:<10} {:<10} {:<10}\n",
            improvement_cell(a.mse),
            improvement_cell(a.rmse),
            improvement_cell(a.mean_deviation)
        ));
    }
    out
}

pub fn render_improvement_kv(imp: &Improvement) -> String {
    let mut out = String::new();
    for (name, a) in [
        ("roll", &imp.roll),
        ("pitch", &imp.pitch),
        ("yaw", &imp.yaw),
    ] {
        for (metric, v) in [
            ("mse", a.mse),
            ("rmse", a.rmse),
            ("mean_deviation", a.mean_deviation),
        ] {
            match v {
                Some(f) => {
                    out.push_str(&format!("improvement.{name}.{metric} = {f:.9e}\n"));
                }
                None => {
                    out.push_str(&format!("improvement.{name}.{metric} = undefined\n"));
                }
            }
        }
    }
    out
}
