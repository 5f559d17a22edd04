use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::lq_norm_samples;
use crate::error::{Error, Result};
use crate::exponent::serde_q_vec;
use crate::grid::{Field, GridSpec, SpectralGrid};

/// Which engine produced a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Strang,
    ExponentialEuler,
    HeatOnly,
    Picard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortReason {
    NonFinite,
    NegativityCollapse,
    SpectralTail,
    NonContraction,
}

impl AbortReason {
    /// Loss of resolution or sign, the signature of a concentrating solution.
    pub fn is_blow_up_candidate(self) -> bool {
        !matches!(self, AbortReason::NonContraction)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "state")]
pub enum RunStatus {
    Completed,
    Aborted {
        reason: AbortReason,
        time: f64,
        detail: String,
    },
}

impl RunStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunStatus::Completed)
    }
}

/// Per-step measurements of the density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub time: f64,
    pub mass: f64,
    pub min: f64,
    pub max: f64,
    /// Spectral tail energy fraction, see `SpectralGrid::tail_energy_fraction`.
    pub tail_fraction: f64,
    /// `int |x|^2 rho`, with `x` measured from the box center.
    pub second_moment: f64,
    /// `||rho||_q` for each configured exponent.
    pub norms: Vec<f64>,
}

impl StepDiagnostics {
    pub fn measure(
        grid: &SpectralGrid,
        time: f64,
        real: &[f64],
        spectral: &[Complex64],
        q_list: &[f64],
    ) -> Self {
        let cell = grid.cell_volume();
        let mut mass = 0.0;
        let mut moment = 0.0;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for (x, v) in grid.points().zip(real) {
            mass += v;
            moment += v * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
            min = min.min(*v);
            max = max.max(*v);
        }
        StepDiagnostics {
            time,
            mass: mass * cell,
            min,
            max,
            tail_fraction: grid.tail_energy_fraction(spectral),
            second_moment: moment * cell,
            norms: q_list
                .iter()
                .map(|&q| lq_norm_samples(real, cell, q))
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub time: f64,
    pub field: Field,
}

/// Time-stamped solution: diagnostics at every step, fields at the requested
/// output times. The first snapshot is the initial datum at `t = 0`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Arc<SpectralGrid>,
    pub scheme: Scheme,
    pub drift_enabled: bool,
    pub config_hash: String,
    pub q_list: Vec<f64>,
    pub times: Vec<f64>,
    pub per_step: Vec<StepDiagnostics>,
    pub snapshots: Vec<Snapshot>,
    pub status: RunStatus,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn new(
        grid: Arc<SpectralGrid>,
        scheme: Scheme,
        drift_enabled: bool,
        q_list: Vec<f64>,
    ) -> Self {
        Trajectory {
            grid,
            scheme,
            drift_enabled,
            config_hash: String::new(),
            q_list,
            times: Vec::new(),
            per_step: Vec::new(),
            snapshots: Vec::new(),
            status: RunStatus::Completed,
            warnings: Vec::new(),
        }
    }

    /// Appends diagnostics for the state at `time`; returns them.
    pub fn record(&mut self, time: f64, real: &[f64], spectral: &[Complex64]) -> &StepDiagnostics {
        debug_assert!(self.times.last().is_none_or(|&t| t < time));
        let d = StepDiagnostics::measure(&self.grid, time, real, spectral, &self.q_list);
        self.times.push(time);
        self.per_step.push(d);
        self.per_step.last().unwrap()
    }

    pub fn push_snapshot(&mut self, time: f64, field: Field) {
        self.snapshots.push(Snapshot { time, field });
    }

    pub fn warn(&mut self, message: String) {
        log::warn!("{message}");
        if !self.warnings.contains(&message) {
            self.warnings.push(message);
        }
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Snapshot whose time matches `t` to relative precision 1e-9.
    pub fn snapshot_at(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots
            .iter()
            .find(|s| (s.time - t).abs() <= 1e-9 * t.abs().max(1e-300))
    }

    pub fn snapshots_in(&self, lo: f64, hi: f64) -> impl Iterator<Item = &Snapshot> {
        self.snapshots
            .iter()
            .filter(move |s| s.time >= lo && s.time <= hi)
    }

    /// Largest `|m(t) - m(0)| / |m(0)|` over the steps.
    pub fn mass_drift(&self) -> f64 {
        let Some(first) = self.per_step.first() else {
            return 0.0;
        };
        let m0 = first.mass.abs().max(f64::MIN_POSITIVE);
        self.per_step
            .iter()
            .map(|d| (d.mass - first.mass).abs() / m0)
            .fold(0.0, f64::max)
    }

    /// Largest `-min / max` over the steps; nonpositive for a nonnegative run.
    pub fn worst_negativity(&self) -> f64 {
        self.per_step
            .iter()
            .map(|d| if d.max > 0.0 { -d.min / d.max } else { 0.0 })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sidecar(&self) -> TrajectorySidecar {
        TrajectorySidecar {
            grid: self.grid.spec(),
            scheme: self.scheme,
            drift_enabled: self.drift_enabled,
            config_hash: self.config_hash.clone(),
            q_list: self.q_list.clone(),
            times: self.times.clone(),
            per_step: self.per_step.clone(),
            snapshot_times: self.snapshots.iter().map(|s| s.time).collect(),
            status: self.status.clone(),
            warnings: self.warnings.clone(),
        }
    }

    /// Snapshots in the flat binary layout, one record each.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        let spec = self.grid.spec();
        for s in &self.snapshots {
            write_record(&mut out, &spec, s.time, s.field.real())?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `<stem>.bin` and the `<stem>.json` sidecar into `dir`.
    pub fn write_files(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_binary(BufWriter::new(File::create(
            dir.join(format!("{stem}.bin")),
        )?))?;
        let sidecar = BufWriter::new(File::create(dir.join(format!("{stem}.json")))?);
        serde_json::to_writer_pretty(sidecar, &self.sidecar())?;
        Ok(())
    }

    /// Rebuilds a trajectory from a binary file and its sidecar.
    pub fn load(binary: &Path, sidecar: &Path) -> Result<Trajectory> {
        let meta: TrajectorySidecar =
            serde_json::from_reader(BufReader::new(File::open(sidecar)?))?;
        let records = read_records(BufReader::new(File::open(binary)?))?;
        let grid = SpectralGrid::from_spec(meta.grid.clone())?;
        let mut snapshots = Vec::with_capacity(records.len());
        for (spec, time, samples) in records {
            if spec != meta.grid {
                return Err(Error::InvalidArgument(format!(
                    "snapshot at t = {time} has grid {spec:?}, sidecar says {:?}",
                    meta.grid
                )));
            }
            snapshots.push(Snapshot {
                time,
                field: Field::from_real(grid.clone(), samples)?,
            });
        }
        Ok(Trajectory {
            grid,
            scheme: meta.scheme,
            drift_enabled: meta.drift_enabled,
            config_hash: meta.config_hash,
            q_list: meta.q_list,
            times: meta.times,
            per_step: meta.per_step,
            snapshots,
            status: meta.status,
            warnings: meta.warnings,
        })
    }
}

/// JSON companion of the binary snapshot file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySidecar {
    pub grid: GridSpec,
    pub scheme: Scheme,
    pub drift_enabled: bool,
    pub config_hash: String,
    #[serde(with = "serde_q_vec")]
    pub q_list: Vec<f64>,
    pub times: Vec<f64>,
    pub per_step: Vec<StepDiagnostics>,
    pub snapshot_times: Vec<f64>,
    pub status: RunStatus,
    pub warnings: Vec<String>,
}

/// Header `dim: u64, n: u64, L: f64, time: f64`, then `n^dim` row-major
/// samples; all little-endian.
pub fn write_record<W: Write>(
    out: &mut W,
    spec: &GridSpec,
    time: f64,
    samples: &[f64],
) -> Result<()> {
    out.write_all(&(spec.dim as u64).to_le_bytes())?;
    out.write_all(&(spec.n_per_axis as u64).to_le_bytes())?;
    out.write_all(&spec.box_length.to_le_bytes())?;
    out.write_all(&time.to_le_bytes())?;
    for v in samples {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_records<R: Read>(mut input: R) -> Result<Vec<(GridSpec, f64, Vec<f64>)>> {
    let mut out = Vec::new();
    let mut word = [0u8; 8];
    loop {
        match input.read_exact(&mut word) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let dim = u64::from_le_bytes(word) as usize;
        input.read_exact(&mut word)?;
        let n = u64::from_le_bytes(word) as usize;
        input.read_exact(&mut word)?;
        let box_length = f64::from_le_bytes(word);
        input.read_exact(&mut word)?;
        let time = f64::from_le_bytes(word);
        if !(1..=3).contains(&dim) || n == 0 || n > 1 << 12 {
            return Err(Error::InvalidArgument(format!(
                "corrupt record header: dim {dim}, n {n}"
            )));
        }
        let len = n.pow(dim as u32);
        let mut bytes = vec![0u8; 8 * len];
        input.read_exact(&mut bytes)?;
        let samples = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push((
            GridSpec {
                dim,
                n_per_axis: n,
                box_length,
            },
            time,
            samples,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn binary_layout_is_little_endian() {
        let spec = GridSpec {
            dim: 1,
            n_per_axis: 2,
            box_length: 1.5,
        };
        let mut buf = Vec::new();
        write_record(&mut buf, &spec, 0.25, &[1.0, -2.0]).unwrap();
        assert_eq!(buf.len(), 32 + 16);
        assert_eq!(&buf[0..8], &1u64.to_le_bytes());
        assert_eq!(&buf[8..16], &2u64.to_le_bytes());
        assert_eq!(&buf[16..24], &1.5f64.to_le_bytes());
        assert_eq!(&buf[24..32], &0.25f64.to_le_bytes());
        assert_eq!(&buf[40..48], &(-2.0f64).to_le_bytes());
        let back = read_records(&buf[..]).unwrap();
        assert_eq!(back, vec![(spec, 0.25, vec![1.0, -2.0])]);
    }

    #[test]
    fn truncated_record_is_an_error() {
        let spec = GridSpec {
            dim: 1,
            n_per_axis: 4,
            box_length: 1.0,
        };
        let mut buf = Vec::new();
        write_record(&mut buf, &spec, 0.0, &[0.0; 4]).unwrap();
        buf.truncate(40);
        assert!(read_records(&buf[..]).is_err());
    }

    #[test]
    fn files_round_trip() {
        let g = make_grid(2, 8, 4.0).unwrap();
        let mut tr = Trajectory::new(g.clone(), Scheme::HeatOnly, false, vec![1.0, f64::INFINITY]);
        for (i, t) in [0.0, 0.5].iter().enumerate() {
            let f = Field::from_fn(g.clone(), |x| {
                (i as f64 + 1.0) * (-x[0] * x[0] - x[1] * x[1]).exp()
            });
            tr.record(*t, f.real(), f.spectral());
            tr.push_snapshot(*t, f);
        }
        tr.warn("note".into());
        let dir = tempfile::tempdir().unwrap();
        tr.write_files(dir.path(), "traj").unwrap();
        let back =
            Trajectory::load(&dir.path().join("traj.bin"), &dir.path().join("traj.json")).unwrap();
        assert_eq!(back.sidecar(), tr.sidecar());
        for (a, b) in back.snapshots.iter().zip(&tr.snapshots) {
            assert_eq!(a.field.real(), b.field.real());
        }
    }
}
