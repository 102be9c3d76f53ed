use std::fmt::Write as _;
use std::fs;

use anyhow::{Context, Result};

use twic_core::dof::{analytic_reference, cut_set_bound, db_to_linear, sweep_reference};
use twic_core::scheme::Scheme;

use crate::{write, Manifest};

/// `(p_db, mean_sum_rate)` rows of a sweep CSV.
fn read_points(text: &str) -> Result<Vec<(f64, f64)>> {
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let mut cols = line.split(',');
            let p_db: f64 = cols.next().unwrap_or_default().parse().context("bad p_db column")?;
            let rate: f64 = cols.next().unwrap_or_default().parse().context("bad rate column")?;
            Ok((p_db, rate))
        })
        .collect()
}

pub(crate) fn cmd_report(m: &Manifest) -> Result<()> {
    let cfg = m.scenario.network_config();
    let scheme = m.scenario.scheme()?;
    let analytic = analytic_reference(&cfg);
    let mut out = String::new();
    let _ = writeln!(out, "scheme {scheme} k {} m {}", cfg.k, cfg.m);
    match analytic.dof {
        Some(d) => {
            let status = if analytic.converse_known { "tight" } else { "achievable, converse open" };
            let _ = writeln!(out, "analytic_dof {d} ({status}; {})", analytic.note);
        }
        None => {
            let _ = writeln!(out, "analytic_dof unknown");
        }
    }
    let _ = writeln!(out, "cut_set_bound {}", cut_set_bound(cfg.k));
    if let Some(r) = sweep_reference(scheme, &cfg) {
        let _ = writeln!(out, "sweep_reference {r}");
    }
    if scheme == Scheme::TdmaBaseline {
        let _ = writeln!(
            out,
            "note: the relay-free baseline is per-direction time sharing (2 DoF), below the analytic value"
        );
    }

    let summary_path = m.out.join("summary.json");
    let csv_path = m.out.join("sweep.csv");
    if summary_path.exists() && csv_path.exists() {
        let summary: serde_json::Value = serde_json::from_str(
            fs::read_to_string(&summary_path)
                .with_context(|| format!("reading {}", summary_path.display()))?
                .trim(),
        )
        .context("summary.json is not a valid record")?;
        let points = read_points(&fs::read_to_string(&csv_path).context("reading sweep.csv")?)?;
        let _ = writeln!(out, "[sweep]");
        for key in ["slope", "intercept", "r_squared", "reference", "verdict", "resample_rate"] {
            let _ = writeln!(out, "{key} {}", summary[key]);
        }
        if points.len() >= 2 {
            let (a, b) = (points[points.len() - 2], points[points.len() - 1]);
            let two_point = (b.1 - a.1) / (db_to_linear(b.0).log2() - db_to_linear(a.0).log2());
            let _ = writeln!(out, "two_point_slope {two_point:.6}");
        }
        if let Some(slope) = summary["slope"].as_f64() {
            let over = slope > cut_set_bound(cfg.k) * 1.05;
            let _ = writeln!(out, "exceeds_cut_set {over}");
        }
        let _ = writeln!(out, "p_db mean_sum_rate_bits");
        for (p, r) in points {
            let _ = writeln!(out, "{p} {r:.6}");
        }
    } else {
        let _ = writeln!(out, "no sweep results in {}", m.out.display());
    }
    write(&m.out, "report.txt", &out)?;
    print!("{out}");
    Ok(())
}
