//! Artifact writers. `summary.json` is byte-stable for a fixed config and
//! seed: field order is fixed by the structs and volatile data (timestamps,
//! thread counts) goes to `metadata.json` instead.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context};

use hmdim_core::estimators::{EstimateWithError, LocalDimReport};
use hmdim_core::free::FreeGroup;
use hmdim_core::oracle::{BoundaryMarkovMeasure, DriftResult, FirstPassageVector};

use crate::run::{EventASummary, Summary};

pub fn write_summary(dir: &Path, summary: &Summary) -> anyhow::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(summary).context("serializing summary")?;
    bytes.push(b'\n');
    fs::write(dir.join("summary.json"), bytes).context("writing summary.json")?;
    Ok(())
}

pub fn write_metadata(dir: &Path, threads: Option<usize>) -> anyhow::Result<()> {
    let metadata = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "threads": threads,
        "unix_time": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    });
    fs::write(dir.join("metadata.json"), serde_json::to_vec_pretty(&metadata)?)
        .context("writing metadata.json")?;
    Ok(())
}

/// Flat name,value,stderr table of the headline numbers.
pub fn write_summaries_csv(dir: &Path, summary: &Summary) -> anyhow::Result<()> {
    let mut rows: Vec<(String, f64, f64)> = Vec::new();
    fn push_est(rows: &mut Vec<(String, f64, f64)>, name: &str, e: &EstimateWithError) {
        rows.push((name.to_string(), e.value, e.stderr));
    }
    if let Some(drift) = &summary.drift {
        push_est(&mut rows, "drift_mc", &drift.mc);
        if let Some([v, lo, hi]) = drift.exact {
            rows.push(("drift_exact".into(), v, (hi - lo) / 2.0));
        }
    }
    if let Some(entropy) = &summary.entropy {
        if let Some(e) = &entropy.mc {
            push_est(&mut rows, "entropy_mc", e);
        }
        if let Some(e) = &entropy.subadditive {
            push_est(&mut rows, "entropy_subadditive", e);
        }
        if let Some(h) = entropy.furstenberg {
            rows.push(("entropy_furstenberg".into(), h, 0.0));
        }
    }
    if let Some(dim) = &summary.dim {
        rows.push(("dim_median".into(), dim.median, 0.0));
        rows.push(("dim_pooled".into(), dim.pooled, 0.0));
        rows.push(("dim_iqr".into(), dim.iqr, 0.0));
        rows.push(("dim_r2".into(), dim.r2, 0.0));
    }
    if let Some(r) = summary.ratio_h_over_l {
        rows.push(("ratio_h_over_l".into(), r, 0.0));
    }
    let mut out = String::from("name,value,stderr\n");
    for (name, value, stderr) in rows {
        out.push_str(&format!("{name},{value},{stderr}\n"));
    }
    fs::write(dir.join("summaries.csv"), out).context("writing summaries.csv")?;
    Ok(())
}

/// Per-point slopes and the pooled regression table of a dimension run.
pub fn write_dimension_csvs(dir: &Path, report: &LocalDimReport) -> anyhow::Result<()> {
    let mut slopes = String::from("slope\n");
    for s in &report.per_point_slopes {
        slopes.push_str(&format!("{s}\n"));
    }
    fs::write(dir.join("slopes.csv"), slopes).context("writing slopes.csv")?;

    let mut reg = String::from("radius,log_radius,mean_log_mass\n");
    for (r, m) in report.radii.iter().zip(&report.mean_log_mass) {
        reg.push_str(&format!("{r},{},{m}\n", r.ln()));
    }
    fs::write(dir.join("regression.csv"), reg).context("writing regression.csv")?;
    Ok(())
}

pub fn write_continuity_csv(
    dir: &Path,
    rows: &[hmdim_core::estimators::ContinuityRow],
) -> anyhow::Result<()> {
    let mut out = String::from("perturbation,l1_distance,dim_estimate,dim_stderr,diff_from_base\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.perturbation, r.l1_distance, r.dim_estimate, r.dim_stderr, r.diff_from_base
        ));
    }
    fs::write(dir.join("continuity.csv"), out).context("writing continuity.csv")?;
    Ok(())
}

pub fn write_event_a_csv(dir: &Path, profile: &EventASummary) -> anyhow::Result<()> {
    let mut out = String::from("N,fraction\n");
    for (n, f) in &profile.fractions {
        out.push_str(&format!("{n},{f}\n"));
    }
    fs::write(dir.join("event_a.csv"), out).context("writing event_a.csv")?;
    Ok(())
}

/// Oracle results in the documented wire format.
pub fn write_oracle_json(
    dir: &Path,
    group: &FreeGroup,
    q: &FirstPassageVector,
    nu: &BoundaryMarkovMeasure,
    drift: &DriftResult,
    entropy: f64,
) -> anyhow::Result<()> {
    use std::collections::BTreeMap;
    let letter_name = |code: u8| hmdim_core::free::Letter::from_code(code).to_char().to_string();
    let mut q_map = BTreeMap::new();
    let mut initial = BTreeMap::new();
    let mut kernel: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for code in 0..group.alphabet_size() as u8 {
        q_map.insert(letter_name(code), q.q(code));
        initial.insert(letter_name(code), nu.initial(code));
        let mut row = BTreeMap::new();
        for to in 0..group.alphabet_size() as u8 {
            row.insert(letter_name(to), nu.kernel(code, to));
        }
        kernel.insert(letter_name(code), row);
    }
    let doc = serde_json::json!({
        "q": q_map,
        "initial": initial,
        "kernel": kernel,
        "drift": [drift.value, drift.lo, drift.hi],
        "entropy": entropy,
        "residual": nu.residual(),
    });
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    fs::write(dir.join("oracle.json"), bytes).context("writing oracle.json")?;
    Ok(())
}

/// Reshapes a completed dimension run into plot-ready CSVs: a binned slope
/// histogram and the pooled log-log table.
pub fn emit_plotdata(results: &Path) -> anyhow::Result<()> {
    let slopes_path = results.join("slopes.csv");
    if !slopes_path.exists() {
        bail!("{} has no slopes.csv; run `hmdim dimension` first", results.display());
    }
    let raw = fs::read_to_string(&slopes_path)?;
    let slopes: Vec<f64> = raw
        .lines()
        .skip(1)
        .filter_map(|l| l.trim().parse().ok())
        .collect();
    if slopes.is_empty() {
        bail!("slopes.csv is empty");
    }
    let (min, max) = slopes
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    let bins = 40usize;
    let width = ((max - min) / bins as f64).max(1e-12);
    let mut counts = vec![0usize; bins];
    for &s in &slopes {
        let idx = (((s - min) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let mut file = fs::File::create(results.join("slope_histogram.csv"))?;
    writeln!(file, "bin_low,bin_high,count")?;
    for (i, c) in counts.iter().enumerate() {
        let lo = min + i as f64 * width;
        writeln!(file, "{},{},{}", lo, lo + width, c)?;
    }

    // pooled regression table, filtered to radii that had data
    let reg_path = results.join("regression.csv");
    if reg_path.exists() {
        let raw = fs::read_to_string(&reg_path)?;
        let mut out = fs::File::create(results.join("logmass_vs_logr.csv"))?;
        writeln!(out, "log_radius,mean_log_mass")?;
        for line in raw.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() == 3 {
                if let (Ok(x), Ok(y)) = (cols[1].parse::<f64>(), cols[2].parse::<f64>()) {
                    if y.is_finite() {
                        writeln!(out, "{x},{y}")?;
                    }
                }
            }
        }
    }
    Ok(())
}
