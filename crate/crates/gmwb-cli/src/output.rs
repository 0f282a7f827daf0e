//! Result persistence: an append-safe CSV plus a JSON sidecar with the full
//! configuration per experiment.
//!
//! CSV column order (documented contract, stable):
//! `timestamp,preset,algorithm,regressor,rate_mode,sigma_s,fee,paths,runs,
//! seed,grid_size,estimator,mean,std_error,sample_std,runtime_s,fingerprint`

use crate::config::ExperimentConfig;
use anyhow::Context;
use gmwb::estimators::MultiRunReport;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const CSV_HEADER: &str = "timestamp,preset,algorithm,regressor,rate_mode,sigma_s,fee,paths,runs,seed,grid_size,estimator,mean,std_error,sample_std,runtime_s,fingerprint";

pub struct WrittenResults {
    pub csv_path: PathBuf,
    pub sidecar_path: PathBuf,
    pub summary: Vec<String>,
}

pub fn write_results(
    out_dir: &Path,
    cfg: &ExperimentConfig,
    report: &MultiRunReport,
    runtime_s: f64,
) -> anyhow::Result<WrittenResults> {
    let csv_path = out_dir.join("results.csv");
    let needs_header = !csv_path.exists();
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&csv_path)
        .with_context(|| format!("opening {}", csv_path.display()))?;
    if needs_header {
        writeln!(file, "{CSV_HEADER}")?;
    }

    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let fingerprint = cfg.fingerprint();

    let mut summary = Vec::new();
    let mut write_row = |estimator: &str, mean: f64, se: Option<f64>, std: Option<f64>| -> anyhow::Result<()> {
        let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x:.8}")).unwrap_or_default();
        writeln!(
            file,
            "{timestamp},{},{},{},{},{},{},{},{},{},{},{estimator},{mean:.8},{},{},{runtime_s:.3},{fingerprint}",
            cfg.preset,
            cfg.solver.algorithm,
            cfg.solver.regressor,
            cfg.model.rate_mode,
            cfg.model.sigma_s,
            cfg.contract.fee,
            cfg.solver.paths,
            cfg.runs,
            cfg.solver.seed,
            cfg.solver.grid_size,
            fmt_opt(se),
            fmt_opt(std),
        )?;
        summary.push(format!(
            "{estimator}: mean {mean:.5}{}",
            se.map(|s| format!(" (se {s:.5})")).unwrap_or_default()
        ));
        Ok(())
    };

    let primary_name = format!("{}_{}", report.primary.kind, "insample");
    write_row(
        &primary_name,
        report.primary.mean,
        report.primary.std_error,
        report.primary.sample_std,
    )?;
    if let Some(fresh) = &report.fresh_lower {
        write_row("lower_fresh", fresh.mean, fresh.std_error, fresh.sample_std)?;
    }

    let sidecar_path = out_dir.join(format!("config_{timestamp}_{}.json", cfg.solver.seed));
    let sidecar = serde_json::json!({
        "config": cfg,
        "runs": report.runs,
        "runtime_s": runtime_s,
    });
    std::fs::write(&sidecar_path, serde_json::to_string_pretty(&sidecar)?)
        .with_context(|| format!("writing {}", sidecar_path.display()))?;

    let log_path = out_dir.join("gmwb.log");
    let mut log = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&log_path)
        .with_context(|| format!("opening {}", log_path.display()))?;
    writeln!(log, "[{timestamp}] {fingerprint} runtime_s={runtime_s:.3}")?;
    for line in &summary {
        writeln!(log, "[{timestamp}]   {line}")?;
    }

    Ok(WrittenResults {
        csv_path,
        sidecar_path,
        summary,
    })
}
