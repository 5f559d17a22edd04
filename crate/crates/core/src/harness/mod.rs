//! Configuration, built-in scenarios, single runs and parameter sweeps.
//!
//! A run is fully described by a [`RunConfig`]; its artifacts land in a
//! directory named after the config hash, so identical configs reuse the
//! same place and produce byte-identical CSVs.

mod config;
mod datum;
mod presets;
mod run;
mod sweep;

pub use config::{
    DatumConfig, DecaySpec, DiagnosticsConfig, EngineConfig, EngineKind, EtdSettings, GridConfig,
    MeshKind, OutputConfig, PicardSettings, RunConfig, TimeConfig,
};
pub use datum::build_datum;
pub use presets::{critical_mass, preset, preset_list, PresetInfo};
pub use run::{
    finish_run, load_report, resolve_window, run_scenario, simulate, write_growth_csv,
    DiagnosticFailure, EngineOutcome, RunReport, Timing, TrajectorySummary,
};
pub use sweep::{cartesian, sweep, SweepAxis, SweepOptions, SweepPoint, SweepReport, DEFAULT_MAX_POINTS};
