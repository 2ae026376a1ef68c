//! JSON scenario configuration.

use std::path::Path;
use std::sync::Arc;

use adiabatica::grid::{GaussianPacket, Grid};
use adiabatica::model::{FrameCase, ModeShape, ModelParams, TabulatedMode};
use adiabatica::propagator::InitialState;
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::Experiment;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Optional; must match the subcommand when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunConfig>,
    /// Positions of the rows of an A⁰ map.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Range>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locus: Option<LocusConfig>,
    #[serde(default)]
    pub abscissa: AbscissaChoice,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "one")]
    pub mass: f64,
    pub detuning: Detuning,
    #[serde(default = "one_u32")]
    pub photon_number: u32,
    #[serde(default)]
    pub frame: FrameChoice,
    pub mode: ModeConfig,
}

fn one() -> f64 {
    1.0
}

fn one_u32() -> u32 {
    1
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameChoice {
    #[default]
    Case1,
    Case2,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModeConfig {
    Gaussian { amplitude: f64, width: f64 },
    StandingWave { amplitude: f64, wavenumber: f64 },
    Linear { slope: f64 },
    Tabulated { x: Vec<f64>, g: Vec<f64> },
}

/// A single value, an explicit list, or a generated sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Detuning {
    Value(f64),
    List { values: Vec<f64> },
    Sweep(Range),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl Range {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.count == 0 {
            bail!("range count must be at least 1");
        }
        if !(self.start.is_finite() && self.stop.is_finite()) {
            bail!("range bounds must be finite");
        }
        if self.count == 1 {
            return Ok(vec![self.start]);
        }
        let last = (self.count - 1) as f64;
        let mut out: Vec<f64> = match self.spacing {
            Spacing::Linear => (0..self.count)
                .map(|k| self.start + (self.stop - self.start) * k as f64 / last)
                .collect(),
            Spacing::Log => {
                if !(self.start > 0.0 && self.stop > 0.0) {
                    bail!("logarithmic range needs positive bounds");
                }
                let (a, b) = (self.start.ln(), self.stop.ln());
                (0..self.count).map(|k| (a + (b - a) * k as f64 / last).exp()).collect()
            }
        };
        // Pin the end points exactly.
        out[0] = self.start;
        out[self.count - 1] = self.stop;
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub x_min: f64,
    pub x_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    pub x0: f64,
    pub p0: f64,
    pub width: f64,
    #[serde(default)]
    pub initial: InitialChoice,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialChoice {
    /// Packet in the upper bare level.
    #[default]
    BareUpper,
    /// Packet split over the adiabatic channels with these populations.
    Adiabatic { upper: f64, lower: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    /// Stop when the classical position `x0 + p0 t / m` reaches this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_stop: Option<f64>,
    /// Upper bound on the time step; defaults to the stability estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Number of sampling intervals over the run.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    200
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocusConfig {
    pub x_min: f64,
    pub x_max: f64,
    #[serde(default = "default_scan")]
    pub scan_points: usize,
}

fn default_scan() -> usize {
    5001
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbscissaChoice {
    #[default]
    Measured,
    Classical,
}

/// Parse `text`, apply `key=value` overrides on dotted paths and validate
/// what `experiment` needs.
pub fn parse(text: &str, overrides: &[String], experiment: Experiment) -> Result<Config> {
    let config: Config = if overrides.is_empty() {
        serde_json::from_str(text).context("invalid config")?
    } else {
        let mut value: Value = serde_json::from_str(text).context("invalid config")?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        serde_json::from_value(value).context("invalid config after overrides")?
    };
    config.validate(experiment)?;
    Ok(config)
}

pub fn load(path: &Path, overrides: &[String], experiment: Experiment) -> Result<Config> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text, overrides, experiment).with_context(|| format!("in {}", path.display()))
}

fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .with_context(|| format!("override `{spec}` is not of the form key=value"))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        if key.is_empty() {
            bail!("override `{spec}` has an empty key");
        }
        let map = match node {
            Value::Object(map) => map,
            _ => bail!("override `{spec}`: `{}` is not an object", keys[..i].join(".")),
        };
        if i + 1 == keys.len() {
            map.insert(key.to_string(), value);
            return Ok(());
        }
        node = map
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split always yields at least one key")
}

impl Config {
    pub fn detunings(&self) -> Result<Vec<f64>> {
        let values = match &self.model.detuning {
            Detuning::Value(d) => vec![*d],
            Detuning::List { values } => values.clone(),
            Detuning::Sweep(r) => r.values().context("model.detuning")?,
        };
        if values.is_empty() {
            bail!("model.detuning: no values");
        }
        Ok(values)
    }

    pub fn single_detuning(&self) -> Result<f64> {
        let d = self.detunings()?;
        if d.len() != 1 {
            bail!("model.detuning: this experiment takes a single detuning, got {}", d.len());
        }
        Ok(d[0])
    }

    pub fn mode(&self) -> Result<ModeShape> {
        Ok(match &self.model.mode {
            ModeConfig::Gaussian { amplitude, width } => ModeShape::gaussian(*amplitude, *width),
            ModeConfig::StandingWave {
                amplitude,
                wavenumber,
            } => ModeShape::standing_wave(*amplitude, *wavenumber),
            ModeConfig::Linear { slope } => ModeShape::linear(*slope),
            ModeConfig::Tabulated { x, g } => ModeShape::Tabulated(TabulatedMode::new(x, g).context("model.mode")?),
        })
    }

    pub fn params(&self, detuning: f64) -> Result<ModelParams> {
        let frame = match self.model.frame {
            FrameChoice::Case1 => FrameCase::Case1,
            FrameChoice::Case2 => FrameCase::Case2,
        };
        let p = ModelParams::new(detuning, self.mode()?)
            .with_mass(self.model.mass)
            .with_photon_number(self.model.photon_number)
            .with_frame(frame);
        p.validate().context("model")?;
        Ok(p)
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        let g = self.grid.as_ref().context("missing `grid` block")?;
        Grid::new(g.n, g.x_min, g.x_max).context("grid")
    }

    pub fn state(&self) -> Result<&StateConfig> {
        self.state.as_ref().context("missing `state` block")
    }

    pub fn packet(&self) -> Result<GaussianPacket> {
        let s = self.state()?;
        Ok(GaussianPacket::new(s.x0, s.p0, s.width))
    }

    pub fn initial(&self) -> Result<InitialState> {
        Ok(match self.state()?.initial {
            InitialChoice::BareUpper => InitialState::BareUpper,
            InitialChoice::Adiabatic { upper, lower } => InitialState::Adiabatic { upper, lower },
        })
    }

    pub fn run(&self) -> Result<&RunConfig> {
        self.run.as_ref().context("missing `run` block")
    }

    /// Duration of the run.
    pub fn t_final(&self) -> Result<f64> {
        let r = self.run()?;
        let s = self.state()?;
        let t = match (r.t_final, r.x_stop) {
            (Some(t), None) => t,
            (None, Some(x)) => {
                if s.p0 == 0.0 {
                    bail!("run.x_stop needs a nonzero state.p0");
                }
                (x - s.x0) * self.model.mass / s.p0
            }
            _ => bail!("run: give exactly one of `t_final` and `x_stop`"),
        };
        if !(t.is_finite() && t >= 0.0) {
            bail!("run: duration must be finite and nonnegative, got {t}");
        }
        Ok(t)
    }

    fn validate(&self, experiment: Experiment) -> Result<()> {
        if let Some(tag) = self.experiment {
            if tag != experiment {
                bail!("experiment: config is tagged `{}` but `{}` was requested", tag.name(), experiment.name());
            }
        }
        let deltas = self.detunings()?;
        for &d in &deltas {
            self.params(d)?;
        }
        if let Some(s) = &self.state {
            if !(s.width > 0.0 && s.width.is_finite()) {
                bail!("state.width: packet width must be positive, got {}", s.width);
            }
            if !(s.x0.is_finite() && s.p0.is_finite()) {
                bail!("state: x0 and p0 must be finite");
            }
        }
        match experiment {
            Experiment::A0Map => {
                self.state()?;
                self.positions.as_ref().context("missing `positions` block")?.values().context("positions")?;
            }
            Experiment::MaxLocus => {
                self.state()?;
                if !matches!(self.model.mode, ModeConfig::Gaussian { .. }) {
                    bail!("model.mode: max-locus needs a gaussian mode");
                }
                if deltas.iter().any(|&d| d <= 0.0) {
                    bail!("model.detuning: max-locus needs positive detunings");
                }
            }
            Experiment::FidelityMap | Experiment::Atrace | Experiment::Snapshot => {
                self.check_dynamics()?;
                if experiment != Experiment::FidelityMap {
                    self.single_detuning()?;
                }
            }
            Experiment::EffectiveModel => {
                self.single_detuning()?;
                self.t_final()?;
                if self.run()?.samples < 4 {
                    bail!("run.samples: the effective model needs at least 4 intervals");
                }
            }
        }
        Ok(())
    }

    fn check_dynamics(&self) -> Result<()> {
        let grid = self.grid()?;
        self.packet()?.validate(&grid).context("state")?;
        self.initial()?;
        if self.t_final()? <= 0.0 {
            bail!("run: duration must be positive for a wave-packet run");
        }
        let r = self.run()?;
        if r.samples == 0 {
            bail!("run.samples must be at least 1");
        }
        if let Some(dt) = r.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                bail!("run.dt must be positive, got {dt}");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GAUSSIAN_SWEEP: &str = r#"{
        "model": {
            "detuning": {"start": 0.0001, "stop": 1.0, "count": 41, "spacing": "log"},
            "mode": {"type": "gaussian", "amplitude": 1.0, "width": 50.0}
        },
        "state": {"x0": -300.0, "p0": 10.0, "width": 10.0},
        "positions": {"start": -300.0, "stop": 300.0, "count": 601}
    }"#;

    #[test]
    fn gaussian_sweep_config_is_accepted() {
        let c = parse(GAUSSIAN_SWEEP, &[], Experiment::A0Map).unwrap();
        let d = c.detunings().unwrap();
        assert_eq!(d.len(), 41);
        assert_eq!(d[0], 0.0001);
        assert_eq!(d[40], 1.0);
        assert_eq!(c.model.mass, 1.0);
        assert_eq!(c.model.photon_number, 1);
        assert_eq!(c.model.frame, FrameChoice::Case1);
    }

    #[test]
    fn negative_width_is_rejected() {
        let err = parse(GAUSSIAN_SWEEP, &["state.width=-10".into()], Experiment::A0Map).unwrap_err();
        assert!(format!("{err:#}").contains("state.width"), "{err:#}");
    }

    #[test]
    fn missing_mode_is_rejected_by_name() {
        let text = r#"{"model": {"detuning": 1.0}}"#;
        let err = parse(text, &[], Experiment::A0Map).unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("mode") && msg.contains("line"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = GAUSSIAN_SWEEP.replace("\"width\": 10.0}", "\"width\": 10.0, \"colour\": 3}");
        let err = parse(&text, &[], Experiment::A0Map).unwrap_err();
        assert!(format!("{err:#}").contains("colour"));
    }

    #[test]
    fn overrides_replace_and_create_keys() {
        let c = parse(
            GAUSSIAN_SWEEP,
            &["model.detuning=0.5".into(), "model.frame=case2".into()],
            Experiment::A0Map,
        )
        .unwrap();
        assert_eq!(c.detunings().unwrap(), vec![0.5]);
        assert_eq!(c.model.frame, FrameChoice::Case2);
        assert!(parse(GAUSSIAN_SWEEP, &["model.detuning".into()], Experiment::A0Map).is_err());
        assert!(parse(GAUSSIAN_SWEEP, &["model.mass.x=1".into()], Experiment::A0Map).is_err());
    }

    #[test]
    fn dynamics_experiments_need_grid_and_run() {
        let err = parse(GAUSSIAN_SWEEP, &[], Experiment::FidelityMap).unwrap_err();
        assert!(format!("{err:#}").contains("grid"));
    }

    #[test]
    fn experiment_tag_must_match() {
        let text = GAUSSIAN_SWEEP.replacen('{', r#"{"experiment": "a0-map","#, 1);
        assert!(parse(&text, &[], Experiment::A0Map).is_ok());
        let err = parse(&text, &[], Experiment::MaxLocus).unwrap_err();
        assert!(format!("{err:#}").contains("tagged `a0-map`"));
    }

    #[test]
    fn linear_ranges_hit_their_ends() {
        let r = Range {
            start: 0.1,
            stop: 0.7,
            count: 7,
            spacing: Spacing::Linear,
        };
        let v = r.values().unwrap();
        assert_eq!(v.len(), 7);
        assert_eq!(v[6], 0.7);
    }
}
