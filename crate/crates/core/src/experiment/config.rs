//! TOML experiment description. Every physical quantity is a string with an
//! explicit unit (`"2 ms"`, `"270.4 Hz"`, `"20 rad/s"`).

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::bathfn::SpectralDensity;
use crate::dynamics::{
    DephasingMode, Distribution, HamiltonianKind, MoleculeParams, NoiseModel, OuProcess, RelaxationParams,
};
use crate::error::{Error, Result};
use crate::protocols::{PreparationForm, SpinLockKinetics};
use crate::sequence::{parse_sequence_spec, Scheme, SequenceSpec};
use crate::spinops::CanonicalState;
use crate::units;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    state: Option<String>,
    preparation: Option<String>,
    hamiltonian: Option<String>,
    threshold: Option<f64>,
    control: Option<bool>,
    sequences: Option<Vec<String>>,
    molecule: Option<RawMolecule>,
    noise: Option<RawNoise>,
    grid: Option<RawGrid>,
    outputs: Option<RawOutputs>,
    spinlock: Option<RawSpinLock>,
    filter: Option<RawFilter>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMolecule {
    delta_nu: String,
    j_coupling: String,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    relaxation: Option<bool>,
    t1: Option<String>,
    t2: Option<String>,
    relax_during_pulses: Option<bool>,
    offset_sigma: Option<String>,
    rf_sigma: Option<f64>,
    rf_truncate: Option<f64>,
    ou_sigma: Option<String>,
    ou_tau: Option<String>,
    dephasing: Option<String>,
    ensemble: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    times: Option<Vec<String>>,
    max: Option<String>,
    points: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutputs {
    dir: Option<String>,
    format: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpinLock {
    singlet_lifetime: Option<String>,
    triplet_mixing_rate: Option<String>,
    leak_rate: Option<String>,
    coherence_decay: Option<String>,
    t1: Option<String>,
    thermal_polarization: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFilter {
    period: Option<String>,
    orders: Option<Vec<usize>>,
    schemes: Option<Vec<String>>,
    baths: Option<Vec<RawBath>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBath {
    name: String,
    kind: String,
    sigma: Option<String>,
    tau_c: Option<String>,
    alpha: Option<f64>,
    cutoff: Option<String>,
    /// Frequencies with units.
    omega: Option<Vec<String>>,
    /// Spectral density values in rad/s.
    values: Option<Vec<f64>>,
}

/// How the initial state is built from its label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Preparation {
    /// `|psi><psi|`.
    #[default]
    Pure,
    /// Singlet order in one of the two mixture forms; Bell targets are then
    /// synthesized from it.
    Form(PreparationForm),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    PlotData,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "plotdata" => Ok(OutputFormat::PlotData),
            other => Err(Error::Config(format!("unknown output format `{other}` (csv or plotdata)"))),
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::PlotData => "dat",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub format: OutputFormat,
}

/// A named spectrum for the filter comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedBath {
    pub name: String,
    pub spectrum: SpectralDensity,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterComparisonConfig {
    /// Sequence period `T`, seconds.
    pub period: f64,
    pub orders: Vec<usize>,
    pub schemes: Vec<Scheme>,
    pub baths: Vec<NamedBath>,
}

impl Default for FilterComparisonConfig {
    fn default() -> Self {
        FilterComparisonConfig {
            period: 1.0,
            orders: vec![7],
            schemes: vec![Scheme::Udd, Scheme::Cpmg],
            baths: vec![
                NamedBath {
                    name: "sharp".into(),
                    spectrum: SpectralDensity::OhmicSharpCutoff {
                        alpha: 1.0,
                        omega_c: 20.0,
                    },
                },
                NamedBath {
                    name: "soft".into(),
                    spectrum: SpectralDensity::Lorentzian {
                        variance: 1.0,
                        tau_c: 2.0,
                    },
                },
                NamedBath {
                    name: "zero".into(),
                    spectrum: SpectralDensity::zero(),
                },
            ],
        }
    }
}

/// Fully validated experiment description.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub molecule: MoleculeParams,
    pub noise: NoiseModel,
    pub hamiltonian: HamiltonianKind,
    pub sequences: Vec<SequenceSpec>,
    /// Adds a no-decoupling trace.
    pub include_control: bool,
    pub state: CanonicalState,
    pub preparation: Preparation,
    /// Requested storage durations, seconds. Snapped to whole blocks per sequence.
    pub grid: Vec<f64>,
    pub threshold: f64,
    pub outputs: OutputConfig,
    pub spinlock: SpinLockKinetics,
    pub filter: FilterComparisonConfig,
}

pub const DEFAULT_TAU_CPMG: f64 = 2e-3;
pub const DEFAULT_TAU_PI: f64 = 27.2e-6;

/// `points` evenly spaced times on `[0, max]`.
pub fn linear_grid(max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points).map(|k| max * k as f64 / (points - 1) as f64).collect(),
    }
}

/// UDD-1 .. UDD-9 at 2 ms / 27.2 us.
pub fn udd_order_sweep() -> Vec<SequenceSpec> {
    (1..=9)
        .map(|order| SequenceSpec {
            scheme: Scheme::Udd,
            order,
            tau_cpmg: DEFAULT_TAU_CPMG,
            tau_pi: DEFAULT_TAU_PI,
            repeats: 1,
            phase_deg: 0.0,
        })
        .collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            molecule: MoleculeParams::proton_pair(),
            noise: NoiseModel {
                relaxation: Some(RelaxationParams::proton_pair()),
                ..NoiseModel::calibration_defaults()
            },
            hamiltonian: HamiltonianKind::Free,
            sequences: udd_order_sweep(),
            include_control: true,
            state: CanonicalState::Singlet,
            preparation: Preparation::Pure,
            grid: linear_grid(40.0, 25),
            threshold: 0.9,
            outputs: OutputConfig::default(),
            spinlock: SpinLockKinetics::default(),
            filter: FilterComparisonConfig::default(),
        }
    }
}

fn quantity(field: &str, text: &str, parse: fn(&str) -> std::result::Result<f64, String>) -> Result<f64> {
    parse(text).map_err(|e| Error::Config(format!("{field}: {e}")))
}

fn seconds(field: &str, text: &str) -> Result<f64> {
    quantity(field, text, units::parse_seconds)
}

fn hertz(field: &str, text: &str) -> Result<f64> {
    quantity(field, text, units::parse_hertz)
}

fn angular(field: &str, text: &str) -> Result<f64> {
    quantity(field, text, units::parse_angular)
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_raw(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        if let Some(seed) = raw.seed {
            cfg.noise.master_seed = seed;
        }
        if let Some(label) = raw.state {
            cfg.state = CanonicalState::from_label(&label)
                .ok_or_else(|| Error::Config(format!("unknown state `{label}`")))?;
        }
        if let Some(p) = raw.preparation {
            cfg.preparation = match p.as_str() {
                "pure" => Preparation::Pure,
                other => Preparation::Form(PreparationForm::from_keyword(other).ok_or_else(|| {
                    Error::Config(format!("unknown preparation `{other}` (pure, projector or operator)"))
                })?),
            };
        }
        if let Some(h) = raw.hamiltonian {
            cfg.hamiltonian = match h.as_str() {
                "free" => HamiltonianKind::Free,
                "equivalence" => HamiltonianKind::Equivalence,
                other => return Err(Error::Config(format!("unknown hamiltonian `{other}`"))),
            };
        }
        if let Some(t) = raw.threshold {
            cfg.threshold = t;
        }
        if let Some(c) = raw.control {
            cfg.include_control = c;
        }
        if let Some(lines) = raw.sequences {
            cfg.sequences = lines
                .iter()
                .enumerate()
                .map(|(i, line)| {
                    parse_sequence_spec(line).map_err(|e| Error::Config(format!("sequences[{i}]: {e}")))
                })
                .collect::<Result<_>>()?;
        }
        if let Some(m) = raw.molecule {
            cfg.molecule = MoleculeParams::new(hertz("molecule.delta_nu", &m.delta_nu)?, hertz("molecule.j_coupling", &m.j_coupling)?)
                .map_err(config_err)?;
        }
        if let Some(n) = raw.noise {
            apply_noise(&mut cfg.noise, n)?;
        }
        if let Some(g) = raw.grid {
            cfg.grid = match (g.times, g.max) {
                (Some(_), Some(_)) => return Err(Error::Config("grid: give either times or max/points".into())),
                (Some(times), None) => times
                    .iter()
                    .enumerate()
                    .map(|(i, t)| seconds(&format!("grid.times[{i}]"), t))
                    .collect::<Result<_>>()?,
                (None, max) => {
                    let max = match max {
                        Some(m) => seconds("grid.max", &m)?,
                        None => 40.0,
                    };
                    linear_grid(max, g.points.unwrap_or(25))
                }
            };
        }
        if let Some(o) = raw.outputs {
            cfg.outputs.dir = o.dir.map(PathBuf::from);
            if let Some(f) = o.format {
                cfg.outputs.format = OutputFormat::parse(&f)?;
            }
        }
        if let Some(s) = raw.spinlock {
            let k = &mut cfg.spinlock;
            if let Some(v) = s.singlet_lifetime {
                k.singlet_lifetime = seconds("spinlock.singlet_lifetime", &v)?;
            }
            if let Some(v) = s.triplet_mixing_rate {
                k.triplet_mixing_rate = hertz("spinlock.triplet_mixing_rate", &v)?;
            }
            if let Some(v) = s.leak_rate {
                k.leak_rate = hertz("spinlock.leak_rate", &v)?;
            }
            if let Some(v) = s.coherence_decay {
                k.coherence_decay = hertz("spinlock.coherence_decay", &v)?;
            }
            if let Some(v) = s.t1 {
                k.t1 = seconds("spinlock.t1", &v)?;
            }
            if let Some(v) = s.thermal_polarization {
                k.thermal_polarization = v;
            }
        }
        if let Some(f) = raw.filter {
            apply_filter(&mut cfg.filter, f)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate().map_err(config_err)?;
        self.spinlock.validate().map_err(config_err)?;
        if self.grid.is_empty() {
            return Err(Error::Config("grid is empty".into()));
        }
        if self.grid.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("grid times must be >= 0 and strictly increasing".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!("threshold {} outside (0, 1)", self.threshold)));
        }
        if self.sequences.is_empty() && !self.include_control {
            return Err(Error::Config("nothing to scan: no sequences and control disabled".into()));
        }
        for spec in &self.sequences {
            spec.period().map_err(config_err)?;
        }
        if !(self.filter.period > 0.0) || self.filter.orders.iter().any(|&n| n < 1) {
            return Err(Error::Config("filter period must be > 0 and orders >= 1".into()));
        }
        for bath in &self.filter.baths {
            bath.spectrum.validate().map_err(config_err)?;
        }
        Ok(())
    }
}

fn apply_noise(model: &mut NoiseModel, n: RawNoise) -> Result<()> {
    match (n.t1, n.t2) {
        (Some(t1), Some(t2)) => {
            let t1 = seconds("noise.t1", &t1)?;
            let t2 = seconds("noise.t2", &t2)?;
            model.relaxation = Some(RelaxationParams::new(t1, t2).map_err(config_err)?);
        }
        (None, None) => {}
        _ => return Err(Error::Config("noise: give both t1 and t2".into())),
    }
    if n.relaxation == Some(false) {
        model.relaxation = None;
    }
    if let Some(b) = n.relax_during_pulses {
        model.relax_during_pulses = b;
    }
    if let Some(s) = n.offset_sigma {
        let sigma = hertz("noise.offset_sigma", &s)?;
        model.static_offset = if sigma == 0.0 {
            Distribution::Fixed(0.0)
        } else {
            Distribution::Gaussian {
                mean: 0.0,
                sigma,
                truncate: None,
            }
        };
    }
    if n.rf_sigma.is_some() || n.rf_truncate.is_some() {
        let (sigma, truncate) = match &model.rf_scale {
            Distribution::Gaussian { sigma, truncate, .. } => (*sigma, *truncate),
            _ => (0.0, None),
        };
        let sigma = n.rf_sigma.unwrap_or(sigma);
        let truncate = n.rf_truncate.or(truncate);
        model.rf_scale = if sigma == 0.0 {
            Distribution::Fixed(1.0)
        } else {
            Distribution::Gaussian {
                mean: 1.0,
                sigma,
                truncate,
            }
        };
    }
    match (n.ou_sigma, n.ou_tau) {
        (Some(s), Some(t)) => {
            model.dephasing = Some(OuProcess {
                sigma: angular("noise.ou_sigma", &s)?,
                correlation_time: seconds("noise.ou_tau", &t)?,
            });
        }
        (None, None) => {}
        _ => return Err(Error::Config("noise: give both ou_sigma and ou_tau".into())),
    }
    if let Some(d) = n.dephasing {
        model.dephasing_mode = match d.as_str() {
            "collective" => DephasingMode::Collective,
            "independent" => DephasingMode::Independent,
            other => return Err(Error::Config(format!("unknown dephasing mode `{other}`"))),
        };
    }
    if let Some(e) = n.ensemble {
        model.ensemble_size = e;
    }
    Ok(())
}

fn apply_filter(cfg: &mut FilterComparisonConfig, f: RawFilter) -> Result<()> {
    if let Some(p) = f.period {
        cfg.period = seconds("filter.period", &p)?;
    }
    if let Some(o) = f.orders {
        cfg.orders = o;
    }
    if let Some(s) = f.schemes {
        cfg.schemes = s
            .iter()
            .map(|k| match k.as_str() {
                "udd" => Ok(Scheme::Udd),
                "cpmg" => Ok(Scheme::Cpmg),
                other => Err(Error::Config(format!("filter scheme `{other}` (udd or cpmg)"))),
            })
            .collect::<Result<_>>()?;
    }
    if let Some(baths) = f.baths {
        cfg.baths = baths.into_iter().map(named_bath).collect::<Result<_>>()?;
    }
    Ok(())
}

fn named_bath(b: RawBath) -> Result<NamedBath> {
    let field = |what: &str| format!("filter.baths[{}].{what}", b.name);
    let missing = |what: &str| Error::Config(format!("{} is required", field(what)));
    let spectrum = match b.kind.as_str() {
        "lorentzian" => {
            let sigma = angular(&field("sigma"), b.sigma.as_deref().ok_or_else(|| missing("sigma"))?)?;
            let tau_c = seconds(&field("tau_c"), b.tau_c.as_deref().ok_or_else(|| missing("tau_c"))?)?;
            SpectralDensity::lorentzian(sigma * sigma, tau_c)
        }
        "ohmic" => {
            let alpha = b.alpha.ok_or_else(|| missing("alpha"))?;
            let cutoff = angular(&field("cutoff"), b.cutoff.as_deref().ok_or_else(|| missing("cutoff"))?)?;
            SpectralDensity::ohmic_sharp_cutoff(alpha, cutoff)
        }
        "table" => {
            let omega = b
                .omega
                .as_ref()
                .ok_or_else(|| missing("omega"))?
                .iter()
                .map(|w| angular(&field("omega"), w))
                .collect::<Result<Vec<_>>>()?;
            SpectralDensity::table(omega, b.values.clone().ok_or_else(|| missing("values"))?)
        }
        "zero" => Ok(SpectralDensity::zero()),
        other => return Err(Error::Config(format!("unknown bath kind `{other}`"))),
    }
    .map_err(config_err)?;
    Ok(NamedBath { name: b.name, spectrum })
}
