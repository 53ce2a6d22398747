//! Rendering of output files: provenance headers, the gain report, and the
//! plot-ready long-format series CSV.

use nalgebra::{Complex, DMatrix};
use quadlqr::{GainMatrix, SimTrace};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// `#`-prefixed header carried at the top of every output file, so any
/// artifact can be traced back to the exact config, seed, and build.
pub fn provenance(config_sha256: &str, seed: u64, mode: &str) -> String {
    format!(
        "# quadlqr {ARTIFACT_VERSION}\n\
         # config_sha256: {config_sha256}\n\
         # seed: {seed}\n\
         # mode: {mode}\n"
    )
}

/// Structured text report of a synthesized controller: K, P, closed-loop
/// eigenvalues (sorted for stable output), and the certification numbers.
pub fn gain_report(gain: &GainMatrix) -> String {
    let mut out = String::new();
    let k = gain.k();
    out.push_str(&format!("K ({}x{}):\n", k.nrows(), k.ncols()));
    out.push_str(&matrix_block(k));
    let p = gain.p();
    out.push_str(&format!("P ({}x{}):\n", p.nrows(), p.ncols()));
    out.push_str(&matrix_block(p));
    out.push_str("closed_loop_eigenvalues:\n");
    let mut eigs: Vec<Complex<f64>> = gain.closed_loop_eigenvalues().to_vec();
    eigs.sort_by(|a, b| {
        (a.re, a.im)
            .partial_cmp(&(b.re, b.im))
            .expect("finite eigenvalues")
    });
    for e in eigs {
        out.push_str(&format!("  {:+.12e} {:+.12e}i\n", e.re, e.im));
    }
    out.push_str(&format!("riccati_residual = {:.9e}\n", gain.residual()));
    out.push_str(&format!(
        "newton_iterations = {}\n",
        gain.newton_iterations()
    ));
    out
}

fn matrix_block(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| format!("{:+.12e}", m[(i, j)]))
            .collect();
        out.push_str("  ");
        out.push_str(&row.join("  "));
        out.push('\n');
    }
    out
}

/// Long-format `t,series,value` CSV over the commanded and actual Euler
/// angles of the paired runs, for plotting without any custom parsing. The
/// commanded series are shared between the two controllers and emitted once.
pub fn series_long_csv(lqr: &SimTrace, lqri: &SimTrace) -> String {
    let mut out = String::from("t,series,value\n");
    let axes = ["roll_deg", "pitch_deg", "yaw_deg"];
    for (a, b) in lqr.rows.iter().zip(&lqri.rows) {
        let t = fmt_float(a.t);
        for (i, axis) in axes.iter().enumerate() {
            out.push_str(&format!(
                "{t},cmd.{axis},{}\n",
                fmt_float(a.commanded_deg[i])
            ));
        }
        for (i, axis) in axes.iter().enumerate() {
            out.push_str(&format!("{t},lqr.{axis},{}\n", fmt_float(a.actual_deg[i])));
        }
        for (i, axis) in axes.iter().enumerate() {
            out.push_str(&format!("{t},lqri.{axis},{}\n", fmt_float(b.actual_deg[i])));
        }
    }
    out
}

/// 9 significant digits, scientific notation, no negative zero.
fn fmt_float(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.8e}")
}
