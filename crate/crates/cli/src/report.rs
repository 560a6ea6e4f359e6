//! Report serialization: `report.json`, `posterior.csv`, `convergence.csv`,
//! written atomically (temp file + rename).

use crate::scenario::ExperimentReport;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn posterior_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("cell_parameter,numerical_density,reference_density,abs_error\n");
    for cell in &report.reference_comparison.cells {
        out.push_str(&format!(
            "{},{},{},{}\n",
            cell.parameter, cell.numerical, cell.reference, cell.abs_error
        ));
    }
    out
}

pub fn convergence_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("a,C_a,E_dR2,lp_gap,mass_outside\n");
    if let Some(conv) = &report.convergence {
        for (k, &a) in conv.a_schedule.iter().enumerate() {
            let gap = if k == 0 {
                String::new()
            } else {
                format!("{}", conv.lp_gaps[k - 1])
            };
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                a, conv.normalization[k], conv.expected_sq_distance[k], gap, conv.mass_outside[k]
            ));
        }
    }
    out
}

/// Write the three output files and return their paths.
pub fn write_reports(dir: &Path, report: &ExperimentReport) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(report).expect("report serializes") + "\n";
    let files = [
        ("report.json", json),
        ("posterior.csv", posterior_csv(report)),
        ("convergence.csv", convergence_csv(report)),
    ];
    let mut written = Vec::new();
    for (name, contents) in files {
        let path = dir.join(name);
        write_atomic(&path, &contents)?;
        written.push(path);
    }
    Ok(written)
}

/// Best-effort diagnostic report for runs that failed numerically.
pub fn write_failure(dir: &Path, config_echo: &impl serde::Serialize, error: &str) {
    let payload = serde_json::json!({
        "config": config_echo,
        "verdict": "error",
        "error": error,
    });
    if fs::create_dir_all(dir).is_ok() {
        let _ = write_atomic(
            &dir.join("report.json"),
            &(serde_json::to_string_pretty(&payload).unwrap_or_default() + "\n"),
        );
    }
}
