use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

use super::RelaxationParams;

/// Scalar distribution for ensemble parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum Distribution {
    Fixed(f64),
    /// Normal law, optionally truncated at `mean +- truncate * sigma` (by rejection).
    Gaussian {
        mean: f64,
        sigma: f64,
        truncate: Option<f64>,
    },
    /// `(value, weight)` pairs; weights need not be normalized.
    Discrete(Vec<(f64, f64)>),
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        match self {
            Distribution::Fixed(v) if !v.is_finite() => {
                Err(Error::domain("fixed value must be finite"))
            }
            Distribution::Gaussian { mean, sigma, truncate } => {
                if !mean.is_finite() || !(*sigma >= 0.0 && sigma.is_finite()) {
                    return Err(Error::domain("gaussian needs finite mean and sigma >= 0"));
                }
                if let Some(k) = truncate {
                    if !(*k > 0.0) {
                        return Err(Error::domain("truncation must be positive"));
                    }
                }
                Ok(())
            }
            Distribution::Discrete(table) => {
                let total: f64 = table.iter().map(|(_, w)| w).sum();
                let ok = !table.is_empty()
                    && table.iter().all(|(v, w)| v.is_finite() && *w >= 0.0)
                    && total > 0.0;
                if ok {
                    Ok(())
                } else {
                    Err(Error::domain("discrete table needs finite values and positive total weight"))
                }
            }
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Distribution::Fixed(v) => *v,
            Distribution::Gaussian { mean, .. } => *mean,
            Distribution::Discrete(t) => {
                let total: f64 = t.iter().map(|(_, w)| w).sum();
                t.iter().map(|(v, w)| v * w).sum::<f64>() / total
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Distribution::Fixed(v) => *v,
            Distribution::Gaussian { mean, sigma, truncate } => loop {
                let z: f64 = rng.sample(StandardNormal);
                if truncate.is_none_or(|k| z.abs() <= k) {
                    break mean + sigma * z;
                }
            },
            Distribution::Discrete(t) => {
                let total: f64 = t.iter().map(|(_, w)| w).sum();
                let mut u = rng.random::<f64>() * total;
                for (v, w) in t {
                    if u < *w {
                        return *v;
                    }
                    u -= w;
                }
                t.last().map(|(v, _)| *v).unwrap_or(0.0)
            }
        }
    }
}

/// Stationary Ornstein-Uhlenbeck frequency noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OuProcess {
    /// Stationary standard deviation, rad/s.
    pub sigma: f64,
    /// Correlation time, s. `f64::INFINITY` gives quasi-static noise.
    pub correlation_time: f64,
}

impl OuProcess {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) || !(self.correlation_time > 0.0) {
            return Err(Error::domain("OU process needs sigma >= 0 and correlation time > 0"));
        }
        Ok(())
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }
}

/// Running OU state with the exact discrete update.
#[derive(Clone, Debug)]
pub struct OuSampler {
    process: OuProcess,
    value: f64,
}

impl OuSampler {
    /// Draws the initial value from the stationary law.
    pub fn new<R: Rng + ?Sized>(process: OuProcess, rng: &mut R) -> Self {
        let z: f64 = rng.sample(StandardNormal);
        OuSampler {
            process,
            value: process.sigma * z,
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn advance<R: Rng + ?Sized>(&mut self, dt: f64, rng: &mut R) {
        let decay = (-dt / self.process.correlation_time).exp();
        let kick = self.process.sigma * (-(-2.0 * dt / self.process.correlation_time).exp_m1()).sqrt();
        let z: f64 = rng.sample(StandardNormal);
        self.value = self.value * decay + kick * z;
    }
}

/// `steps` consecutive OU values on a uniform grid of spacing `dt`, reproducible from `seed`.
pub fn sample_ou_trajectory(process: &OuProcess, dt: f64, steps: usize, seed: u64) -> Result<Vec<f64>> {
    process.validate()?;
    if !(dt > 0.0) {
        return Err(Error::domain("grid step must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampler = OuSampler::new(*process, &mut rng);
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        out.push(sampler.value());
        sampler.advance(dt, &mut rng);
    }
    Ok(out)
}

/// How OU frequency noise couples to the two spins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DephasingMode {
    /// One field on `I_z^1 + I_z^2`.
    #[default]
    Collective,
    /// Independent processes on `I_z^1` and `I_z^2`.
    Independent,
}

/// Relaxation plus the per-member random parameters of an ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    pub relaxation: Option<RelaxationParams>,
    pub relax_during_pulses: bool,
    /// Common frequency offset of both spins, Hz.
    pub static_offset: Distribution,
    /// Multiplicative RF amplitude factor, held for all pulses of a member.
    pub rf_scale: Distribution,
    pub dephasing: Option<OuProcess>,
    pub dephasing_mode: DephasingMode,
    pub ensemble_size: usize,
    pub master_seed: u64,
}

impl NoiseModel {
    /// Single deterministic member, no relaxation.
    pub fn noiseless() -> Self {
        NoiseModel {
            relaxation: None,
            relax_during_pulses: true,
            static_offset: Distribution::Fixed(0.0),
            rf_scale: Distribution::Fixed(1.0),
            dephasing: None,
            dephasing_mode: DephasingMode::Collective,
            ensemble_size: 1,
            master_seed: 0,
        }
    }

    /// Calibration defaults: 10 Hz Gaussian offsets, 3% RF scale spread cut at 3 sigma.
    pub fn calibration_defaults() -> Self {
        NoiseModel {
            static_offset: Distribution::Gaussian {
                mean: 0.0,
                sigma: 10.0,
                truncate: None,
            },
            rf_scale: Distribution::Gaussian {
                mean: 1.0,
                sigma: 0.03,
                truncate: Some(3.0),
            },
            ensemble_size: 32,
            ..Self::noiseless()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ensemble_size < 1 {
            return Err(Error::domain("ensemble size must be at least 1"));
        }
        if let Some(r) = &self.relaxation {
            r.validate()?;
        }
        if let Some(ou) = &self.dephasing {
            ou.validate()?;
        }
        self.static_offset.validate()?;
        self.rf_scale.validate()?;
        Ok(())
    }

    /// Independent stream for ensemble member `index`.
    pub fn member_rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(index as u64);
        rng
    }
}
