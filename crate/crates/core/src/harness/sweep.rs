use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::run::{finish_run, simulate, RunReport};
use crate::error::{Error, Result};
use crate::exponent::display_exponent;

pub const DEFAULT_MAX_POINTS: usize = 64;

/// `key=v1,v2,...`; values are TOML literals, commas inside brackets or
/// quotes do not split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<String>,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (key, rest) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("axis {s:?} is not key=v1,v2,...")))?;
        let mut values = Vec::new();
        let mut depth = 0i32;
        let mut quoted = false;
        let mut current = String::new();
        for ch in rest.chars() {
            match ch {
                '"' => quoted = !quoted,
                '[' | '{' if !quoted => depth += 1,
                ']' | '}' if !quoted => depth -= 1,
                ',' if depth == 0 && !quoted => {
                    values.push(std::mem::take(&mut current).trim().to_string());
                    continue;
                }
                _ => {}
            }
            current.push(ch);
        }
        values.push(current.trim().to_string());
        if key.trim().is_empty() || values.iter().any(|v| v.is_empty()) {
            return Err(Error::Config(format!("axis {s:?} has an empty key or value")));
        }
        Ok(SweepAxis { key: key.trim().to_string(), values })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    /// Refuse sweeps whose Cartesian product exceeds this.
    pub max_points: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { max_points: DEFAULT_MAX_POINTS }
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub index: usize,
    pub assignments: Vec<(String, String)>,
    /// The report, or the error that stopped this point.
    pub outcome: std::result::Result<RunReport, String>,
}

impl SweepPoint {
    pub fn exit_code(&self) -> i32 {
        match &self.outcome {
            Ok(r) => r.exit_code(),
            Err(_) => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    pub summary_csv: PathBuf,
}

/// Every combination of axis values, first axis slowest.
pub fn cartesian(axes: &[SweepAxis]) -> Vec<Vec<(String, String)>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push((axis.key.clone(), v.clone()));
                    p
                })
            })
            .collect();
    }
    out
}

/// Runs the Cartesian product of `axes` over `base`. Points sharing a
/// trajectory (same physics hash) are simulated once. A failing point is
/// recorded and the rest continue. Writes `sweep-<hash>.csv` under the base
/// output directory.
pub fn sweep(base: &RunConfig, axes: &[SweepAxis], options: &SweepOptions) -> Result<SweepReport> {
    base.validate()?;
    let combos = cartesian(axes);
    if combos.len() > options.max_points {
        return Err(Error::Config(format!(
            "sweep has {} points, above the cap of {}",
            combos.len(),
            options.max_points
        )));
    }
    let mut points: Vec<SweepPoint> = Vec::with_capacity(combos.len());
    let mut groups: BTreeMap<String, Vec<(usize, RunConfig)>> = BTreeMap::new();
    for (index, assignments) in combos.into_iter().enumerate() {
        let mut config = base.clone();
        let applied = assignments.iter().try_for_each(|(k, v)| config.set(k, v));
        let outcome = match applied {
            Ok(()) => {
                groups.entry(config.physics_hash()).or_default().push((index, config));
                Err(String::new())
            }
            Err(e) => Err(e.to_string()),
        };
        points.push(SweepPoint { index, assignments, outcome });
    }

    let results: Vec<(usize, std::result::Result<RunReport, String>)> = groups
        .into_par_iter()
        .flat_map_iter(|(_, members)| {
            let engine = simulate(&members[0].1);
            members.into_iter().map(move |(index, config)| {
                let report = match &engine {
                    Ok(outcome) => finish_run(&config, outcome).map_err(|e| e.to_string()),
                    Err(e) => Err(e.to_string()),
                };
                if let Err(e) = &report {
                    log::warn!("sweep point {index} failed: {e}");
                }
                (index, report)
            })
        })
        .collect();
    for (index, report) in results {
        points[index].outcome = report;
    }

    std::fs::create_dir_all(&base.output.dir)?;
    let summary_csv = base.output.dir.join(format!("sweep-{}.csv", &sweep_hash(base, axes)[..16]));
    write_summary(&points, axes, BufWriter::new(File::create(&summary_csv)?))?;
    Ok(SweepReport { points, summary_csv })
}

fn sweep_hash(base: &RunConfig, axes: &[SweepAxis]) -> String {
    let text = format!("{}|{}", base.hash(), serde_json::to_string(axes).expect("axes serialize"));
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// One row per point: axis values, hash, status, classification, growth,
/// mass drift and every decay slope as `beta/k/q:slope`.
fn write_summary<W: std::io::Write>(points: &[SweepPoint], axes: &[SweepAxis], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["index".to_string()];
    header.extend(axes.iter().map(|a| a.key.clone()));
    header.extend(
        ["config_hash", "exit_code", "status", "classification", "final_time", "peak_growth", "mass_drift", "slopes", "error"]
            .map(String::from),
    );
    w.write_record(&header)?;
    for p in points {
        let mut row = vec![p.index.to_string()];
        row.extend(p.assignments.iter().map(|(_, v)| v.clone()));
        match &p.outcome {
            Ok(r) => {
                let status = match &r.status {
                    crate::evolution::RunStatus::Completed => "completed".to_string(),
                    crate::evolution::RunStatus::Aborted { reason, .. } => format!("aborted:{reason:?}"),
                };
                let class = r.classification.map(|c| format!("{c:?}")).unwrap_or_default();
                let slopes: Vec<String> = r
                    .decay
                    .iter()
                    .map(|f| format!("{}/{}/{}:{:.6}", f.beta, f.k, display_exponent(f.q), f.slope))
                    .collect();
                let failures: Vec<String> = r.failures.iter().map(|f| format!("{} {}: {}", f.diagnostic, f.target, f.error)).collect();
                row.extend([
                    r.config_hash[..16].to_string(),
                    r.exit_code().to_string(),
                    status,
                    class,
                    format!("{:.6e}", r.summary.final_time),
                    format!("{:.6e}", r.summary.peak_growth),
                    format!("{:.3e}", r.summary.mass_drift),
                    slopes.join(";"),
                    failures.join(";"),
                ]);
            }
            Err(e) => {
                row.extend(["", "2", "failed", "", "", "", "", ""].map(String::from));
                row.push(e.clone());
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_parsing_respects_brackets() {
        let a: SweepAxis = "datum.center=[1.0, 0.0],[0.0, 2.0]".parse().unwrap();
        assert_eq!(a.key, "datum.center");
        assert_eq!(a.values, vec!["[1.0, 0.0]", "[0.0, 2.0]"]);
        let b: SweepAxis = "diagnostics.decay.0.q=2,4,\"inf\"".parse().unwrap();
        assert_eq!(b.values, vec!["2", "4", "\"inf\""]);
        assert!("noequals".parse::<SweepAxis>().is_err());
        assert!("k=1,,2".parse::<SweepAxis>().is_err());
    }

    #[test]
    fn cartesian_product_orders_first_axis_slowest() {
        let axes = vec![
            SweepAxis { key: "a".into(), values: vec!["1".into(), "2".into()] },
            SweepAxis { key: "b".into(), values: vec!["x".into(), "y".into(), "z".into()] },
        ];
        let c = cartesian(&axes);
        assert_eq!(c.len(), 6);
        assert_eq!(c[1], vec![("a".into(), "1".into()), ("b".into(), "y".into())]);
        assert_eq!(cartesian(&[]), vec![Vec::<(String, String)>::new()]);
    }
}
