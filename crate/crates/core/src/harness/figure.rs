//! The stock survey: every standard delay distribution crossed with a
//! doubling grid of field sizes, averaged over many trials, written as
//! CSV together with a small python script that draws the log-x chart.
//!
//! Plotting is deliberately delegated to the emitted script so this crate
//! carries no graphics dependency; the CSV is the artifact of record and
//! the script is a convenience that reads it by file name, so the pair
//! can be moved anywhere together.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::noise::dist::DelayDistribution;
use crate::noise::model::NoiseModel;
use crate::noise::sweep::{run_sweep, InputsPolicy, SweepRow, SWEEP_CSV_HEADER};

/// Field sizes of the survey grid: powers of two from 2 to 1024.
pub const FIGURE_NS: [usize; 10] = [2, 4, 8, 16, 32, 64, 128, 256, 512, 1024];

/// Trials per point when `--paper-scale` is requested; the desk-scale
/// default is 1000.
pub const PAPER_SCALE_TRIALS: u64 = 10_000;

/// Total-op budget for one trial of `n` processes. Far beyond anything a
/// terminating trial uses; it exists only to bound runaway configurations.
pub fn survey_op_cap(n: usize) -> u64 {
    (n as u64) * 4096
}

/// All survey rows: standard distributions x [`FIGURE_NS`], half-0/half-1
/// inputs, no failures, no adversarial stalls. Deterministic in
/// `master_seed` alone.
pub fn figure_rows(master_seed: u64, trials: u64) -> Result<Vec<SweepRow>> {
    if trials < 100 {
        return Err(Error::config("the survey needs at least 100 trials per point"));
    }
    let dists = DelayDistribution::standard_set();
    let mut rows = Vec::with_capacity(dists.len() * FIGURE_NS.len());
    for n in FIGURE_NS {
        let batch = run_sweep(
            &dists,
            &[n],
            trials,
            &InputsPolicy::HalfHalf,
            master_seed,
            survey_op_cap(n),
            |d| NoiseModel::iid(d.clone()),
        )?;
        rows.extend(batch);
    }
    // run_sweep emits distribution-major; the survey is easier to scan
    // n-major within each distribution, so regroup.
    rows.sort_by(|a, b| a.distribution.cmp(&b.distribution).then(a.n.cmp(&b.n)));
    Ok(rows)
}

/// Render rows as a full CSV document, header included.
pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut csv = String::from(SWEEP_CSV_HEADER);
    csv.push('\n');
    for row in rows {
        csv.push_str(&row.csv_line());
        csv.push('\n');
    }
    csv
}

/// Path of the plot script that accompanies a CSV: the CSV path with
/// `.plot.py` appended.
pub fn plot_script_path(csv_path: &Path) -> PathBuf {
    let mut name = csv_path.as_os_str().to_os_string();
    name.push(".plot.py");
    PathBuf::from(name)
}

/// Python source that reads `csv_name` (a sibling file) and draws mean
/// first-decision round against field size, log-scaled x, linear y.
pub fn plot_script(csv_name: &str) -> String {
    format!(
        r#"#!/usr/bin/env python3
"""Draw mean first-decision round against field size from {csv}."""
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

CSV = {csv:?}
series = defaultdict(list)
with open(CSV, newline="") as fh:
    for row in csv.DictReader(fh):
        series[row["distribution"]].append(
            (int(row["n"]), float(row["mean_first_round"]))
        )

fig, ax = plt.subplots(figsize=(7.0, 4.5))
for label, points in sorted(series.items()):
    points.sort()
    ax.plot(
        [n for n, _ in points],
        [mean for _, mean in points],
        marker="o",
        markersize=3,
        label=label,
    )
ax.set_xscale("log", base=2)
ax.set_xlabel("number of processes")
ax.set_ylabel("mean first-decision round")
ax.grid(True, which="both", alpha=0.3)
ax.legend(fontsize=8)
fig.tight_layout()
out = CSV + ".png"
fig.savefig(out, dpi=150)
print("wrote", out)
"#,
        csv = csv_name
    )
}

/// Run the whole survey and write `out` (the CSV) plus `out`.plot.py.
/// Same seed, same bytes, regardless of thread count.
pub fn run_figure_experiment(master_seed: u64, trials: u64, out: &Path) -> Result<()> {
    let rows = figure_rows(master_seed, trials)?;
    let csv = rows_to_csv(&rows);
    fs::write(out, csv)?;
    let csv_name = out
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| out.display().to_string());
    fs::write(plot_script_path(out), plot_script(&csv_name))?;
    Ok(())
}
