use std::f64::consts::PI;

use serde::Serialize;

use super::config::{
    DatumConfig, DecaySpec, DiagnosticsConfig, EngineConfig, EngineKind, EtdSettings, GridConfig,
    MeshKind, OutputConfig, PicardSettings, RunConfig, TimeConfig,
};
use crate::error::{Error, Result};
use crate::grid::MultiIndex;

/// `2 d^2 pi`: the mass scale of the aggregation threshold, `8 pi` in 2D.
pub fn critical_mass(dim: usize) -> f64 {
    2.0 * (dim * dim) as f64 * PI
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PresetInfo {
    pub name: &'static str,
    pub description: &'static str,
}

const PRESETS: &[PresetInfo] = &[
    PresetInfo {
        name: "small_mass_2d",
        description: "mass 0.1*8pi Gaussian (s0 = 0.1) on 512^2, L = 64, run to the horizon t = 16; \
                      decay fits, analyticity radii and derivative growth",
    },
    PresetInfo {
        name: "small_mass_1d",
        description: "mass 0.1*2pi Gaussian on 1024 points, L = 64, run to t = 16 with decay fits",
    },
    PresetInfo {
        name: "small_mass_3d",
        description: "mass 0.1*18pi Gaussian (sigma = 1) on 64^3, L = 16, run to the horizon t = 1",
    },
    PresetInfo {
        name: "subcritical_2d",
        description: "concentrated mass 0.5*8pi Gaussian (s0 = 0.25) on 384^2, L = 8, t = 2; expected to decay",
    },
    PresetInfo {
        name: "supercritical_2d",
        description: "concentrated mass 1.25*8pi Gaussian (s0 = 0.25) on 384^2, L = 8; expected to \
                      concentrate until the resolution abort",
    },
    PresetInfo {
        name: "mpks_boundary_2d",
        description: "concentrated Gaussian carrying exactly 8pi = 2d^2 pi on 384^2, L = 8, t = 1",
    },
    PresetInfo {
        name: "bounded_window_2d",
        description: "moderate mass 0.3*8pi Gaussian on 256^2, L = 32, short run to t = 1 with decay \
                      fits over the bounded window",
    },
    PresetInfo {
        name: "heat_only_2d",
        description: "unit-mass Gaussian (s0 = 0.1) under pure diffusion on 512^2, L = 64, t = 16",
    },
];

pub fn preset_list() -> &'static [PresetInfo] {
    PRESETS
}

fn gaussian_s0(dim: usize, fraction: f64, s0: f64) -> DatumConfig {
    DatumConfig::Gaussian { mass: fraction * critical_mass(dim), sigma: (2.0 * s0).sqrt(), center: Vec::new() }
}

fn decay(beta: &[usize], k: usize, q: f64) -> DecaySpec {
    DecaySpec { beta: MultiIndex(beta.to_vec()), k, q }
}

fn base(label: &str, grid: GridConfig, datum: DatumConfig, kind: EngineKind, time: TimeConfig) -> RunConfig {
    RunConfig {
        label: label.to_string(),
        seed: 0,
        grid,
        datum,
        engine: EngineConfig { kind, etd: EtdSettings::default(), picard: PicardSettings::default() },
        time,
        diagnostics: DiagnosticsConfig::default(),
        output: OutputConfig::default(),
    }
}

fn long_run_etd() -> EtdSettings {
    EtdSettings { dt_max: 0.1, dt_initial: 1e-3, dt_rel: Some(0.02), ..EtdSettings::default() }
}

fn concentrated(label: &str, fraction: f64, t_final: f64) -> RunConfig {
    let mut c = base(
        label,
        GridConfig { dim: 2, n_per_axis: 384, box_length: 8.0 },
        gaussian_s0(2, fraction, 0.25),
        EngineKind::Etd,
        TimeConfig { t_final, mesh: MeshKind::Uniform, points: 40, t_start: 1e-2, include: Vec::new() },
    );
    c.engine.etd = EtdSettings { dt_max: 1e-2, dt_initial: 1e-3, ..EtdSettings::default() };
    c.diagnostics.q_list = vec![1.0, 2.0, f64::INFINITY];
    c
}

/// Looks up a built-in scenario by name.
pub fn preset(name: &str) -> Result<RunConfig> {
    let inf = f64::INFINITY;
    let config = match name {
        "small_mass_2d" => {
            let mut c = base(
                name,
                GridConfig { dim: 2, n_per_axis: 512, box_length: 64.0 },
                gaussian_s0(2, 0.1, 0.1),
                EngineKind::Etd,
                TimeConfig { t_final: 16.0, mesh: MeshKind::Geometric, points: 31, t_start: 0.05, include: vec![1.0] },
            );
            c.engine.etd = long_run_etd();
            c.diagnostics = DiagnosticsConfig {
                q_list: vec![1.0, 2.0, 4.0, inf],
                window: Some([1.0, 16.0]),
                decay: vec![
                    decay(&[0, 0], 0, 2.0),
                    decay(&[0, 0], 0, 4.0),
                    decay(&[0, 0], 0, inf),
                    decay(&[1, 0], 0, inf),
                    decay(&[0, 0], 1, inf),
                ],
                analyticity: true,
                analyticity_stride: 2,
                growth_times: vec![1.0],
                ..DiagnosticsConfig::default()
            };
            c
        }
        "small_mass_1d" => {
            let mut c = base(
                name,
                GridConfig { dim: 1, n_per_axis: 1024, box_length: 64.0 },
                gaussian_s0(1, 0.1, 0.1),
                EngineKind::Etd,
                TimeConfig { t_final: 16.0, mesh: MeshKind::Geometric, points: 31, t_start: 0.05, include: vec![1.0] },
            );
            c.engine.etd = long_run_etd();
            c.diagnostics.q_list = vec![1.0, 2.0, inf];
            c.diagnostics.window = Some([1.0, 16.0]);
            c.diagnostics.decay = vec![decay(&[0], 0, 2.0), decay(&[0], 0, inf), decay(&[1], 0, inf), decay(&[0], 1, inf)];
            c.diagnostics.growth_times = vec![1.0];
            c
        }
        "small_mass_3d" => {
            let mut c = base(
                name,
                GridConfig { dim: 3, n_per_axis: 64, box_length: 16.0 },
                gaussian_s0(3, 0.1, 0.5),
                EngineKind::Etd,
                TimeConfig { t_final: 1.0, mesh: MeshKind::Geometric, points: 16, t_start: 0.05, include: Vec::new() },
            );
            c.engine.etd = EtdSettings { dt_max: 0.02, dt_initial: 1e-3, dt_rel: Some(0.02), ..EtdSettings::default() };
            c.diagnostics.q_list = vec![1.0, 2.0, inf];
            c.diagnostics.decay = vec![decay(&[0, 0, 0], 0, 2.0), decay(&[0, 0, 0], 0, inf)];
            c
        }
        "subcritical_2d" => concentrated(name, 0.5, 2.0),
        "supercritical_2d" => concentrated(name, 1.25, 1.0),
        "mpks_boundary_2d" => concentrated(name, 1.0, 1.0),
        "bounded_window_2d" => {
            let mut c = base(
                name,
                GridConfig { dim: 2, n_per_axis: 256, box_length: 32.0 },
                gaussian_s0(2, 0.3, 0.1),
                EngineKind::Etd,
                TimeConfig { t_final: 1.0, mesh: MeshKind::Geometric, points: 24, t_start: 0.02, include: Vec::new() },
            );
            c.engine.etd = EtdSettings { dt_max: 0.02, dt_initial: 1e-3, dt_rel: Some(0.02), ..EtdSettings::default() };
            c.diagnostics.q_list = vec![1.0, 2.0, inf];
            c.diagnostics.decay = vec![decay(&[0, 0], 0, 2.0), decay(&[0, 0], 0, inf), decay(&[1, 0], 0, inf)];
            c
        }
        "heat_only_2d" => {
            let mut c = base(
                name,
                GridConfig { dim: 2, n_per_axis: 512, box_length: 64.0 },
                DatumConfig::Gaussian { mass: 1.0, sigma: 0.2f64.sqrt(), center: Vec::new() },
                EngineKind::HeatOnly,
                TimeConfig { t_final: 16.0, mesh: MeshKind::Geometric, points: 31, t_start: 0.05, include: vec![1.0] },
            );
            c.diagnostics.q_list = vec![1.0, 2.0, inf];
            c.diagnostics.window = Some([1.0, 16.0]);
            c.diagnostics.decay = vec![
                decay(&[0, 0], 0, 2.0),
                decay(&[0, 0], 0, inf),
                decay(&[1, 0], 0, inf),
                decay(&[0, 0], 1, inf),
            ];
            c
        }
        other => {
            let known: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
            return Err(Error::Config(format!("unknown preset {other:?}; known: {}", known.join(", "))));
        }
    };
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_preset_validates_and_round_trips() {
        for info in preset_list() {
            let c = preset(info.name).unwrap();
            assert_eq!(c.label, info.name);
            let text = c.to_toml().unwrap();
            let back = RunConfig::from_toml(&text).unwrap();
            assert_eq!(back, c, "{}", info.name);
            assert_eq!(back.hash(), c.hash());
        }
    }

    #[test]
    fn required_presets_exist() {
        let names: Vec<_> = preset_list().iter().map(|p| p.name).collect();
        for required in ["small_mass_2d", "supercritical_2d", "heat_only_2d", "mpks_boundary_2d"] {
            assert!(names.contains(&required));
        }
        assert!(matches!(preset("nope"), Err(Error::Config(_))));
    }

    #[test]
    fn masses_sit_where_the_names_say() {
        let m = |n: &str| preset(n).unwrap().datum.mass() / critical_mass(2);
        assert!(m("small_mass_2d") < 0.2);
        assert!(m("subcritical_2d") < 1.0);
        assert!(m("supercritical_2d") > 1.0);
        assert!((m("mpks_boundary_2d") - 1.0).abs() < 1e-15);
        assert!((critical_mass(2) - 8.0 * PI).abs() < 1e-15);
    }
}
