//! Filter-function dephasing for ideal pulse trains against classical
//! frequency-noise spectra.
//!
//! Coherence after one period is `W = exp(-chi)` with
//! `chi = (2/pi) * integral_0^inf S(w) F(wT) / w^2 dw`. The Lorentzian
//! normalization below is the one an Ornstein-Uhlenbeck frequency process of
//! standard deviation `sigma` and correlation time `tau_c` produces.

pub mod quadrature;

use std::f64::consts::PI;

use rayon::prelude::*;
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::ddtrig::sin_cos_dd;
use crate::sequence::TimingVector;

/// Relative tolerance of [`chi`].
pub const CHI_REL_TOL: f64 = 1e-8;
const MAX_PANELS: usize = 200_000;
/// Below this `omega * T` the filter function is evaluated in double-double.
const EXTENDED_BELOW: f64 = 2.0;

/// Noise power spectrum, one-sided, in rad/s.
#[derive(Clone, Debug, PartialEq)]
pub enum SpectralDensity {
    /// `S(w) = sigma^2 tau_c / (2 (1 + w^2 tau_c^2))`, `variance = sigma^2`.
    Lorentzian { variance: f64, tau_c: f64 },
    /// `S(w) = alpha * w` for `w < omega_c`, zero beyond.
    OhmicSharpCutoff { alpha: f64, omega_c: f64 },
    /// Piecewise-linear through `(omega, value)` nodes, zero outside them.
    Table { omega: Vec<f64>, value: Vec<f64> },
}

impl SpectralDensity {
    pub fn lorentzian(variance: f64, tau_c: f64) -> Result<Self> {
        let s = SpectralDensity::Lorentzian { variance, tau_c };
        s.validate()?;
        Ok(s)
    }

    pub fn ohmic_sharp_cutoff(alpha: f64, omega_c: f64) -> Result<Self> {
        let s = SpectralDensity::OhmicSharpCutoff { alpha, omega_c };
        s.validate()?;
        Ok(s)
    }

    pub fn table(omega: Vec<f64>, value: Vec<f64>) -> Result<Self> {
        let s = SpectralDensity::Table { omega, value };
        s.validate()?;
        Ok(s)
    }

    /// Identically zero spectrum.
    pub fn zero() -> Self {
        SpectralDensity::OhmicSharpCutoff {
            alpha: 0.0,
            omega_c: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SpectralDensity::Lorentzian { variance, tau_c } => {
                if !(*variance >= 0.0 && variance.is_finite()) || !(*tau_c > 0.0 && tau_c.is_finite()) {
                    return Err(Error::domain("lorentzian needs variance >= 0 and finite tau_c > 0"));
                }
            }
            SpectralDensity::OhmicSharpCutoff { alpha, omega_c } => {
                if !(*alpha >= 0.0 && alpha.is_finite()) || !(*omega_c > 0.0 && omega_c.is_finite()) {
                    return Err(Error::domain("ohmic bath needs alpha >= 0 and finite omega_c > 0"));
                }
            }
            SpectralDensity::Table { omega, value } => {
                if omega.len() != value.len() || omega.len() < 2 {
                    return Err(Error::domain("spectral table needs at least two (omega, S) rows"));
                }
                if !(omega[0] >= 0.0) || omega.windows(2).any(|w| !(w[1] > w[0])) || !omega[omega.len() - 1].is_finite() {
                    return Err(Error::domain("table frequencies must be finite, >= 0 and increasing"));
                }
                if value.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return Err(Error::domain("table values must be finite and >= 0"));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, omega: f64) -> f64 {
        let w = omega.abs();
        match self {
            SpectralDensity::Lorentzian { variance, tau_c } => {
                let x = w * tau_c;
                variance * tau_c / (2.0 * (1.0 + x * x))
            }
            SpectralDensity::OhmicSharpCutoff { alpha, omega_c } => {
                if w < *omega_c {
                    alpha * w
                } else {
                    0.0
                }
            }
            SpectralDensity::Table { omega, value } => {
                let last = omega.len() - 1;
                if w < omega[0] || w > omega[last] {
                    return 0.0;
                }
                let k = omega.partition_point(|&x| x <= w).clamp(1, last);
                let (x0, x1) = (omega[k - 1], omega[k]);
                let f = (w - x0) / (x1 - x0);
                value[k - 1] + f * (value[k] - value[k - 1])
            }
        }
    }

    /// The same spectrum multiplied by `c >= 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::domain("scale factor must be finite and >= 0"));
        }
        Ok(match self {
            SpectralDensity::Lorentzian { variance, tau_c } => SpectralDensity::Lorentzian {
                variance: variance * c,
                tau_c: *tau_c,
            },
            SpectralDensity::OhmicSharpCutoff { alpha, omega_c } => SpectralDensity::OhmicSharpCutoff {
                alpha: alpha * c,
                omega_c: *omega_c,
            },
            SpectralDensity::Table { omega, value } => SpectralDensity::Table {
                omega: omega.clone(),
                value: value.iter().map(|v| v * c).collect(),
            },
        })
    }

    /// Upper end of the support, if finite.
    fn support_end(&self) -> Option<f64> {
        match self {
            SpectralDensity::Lorentzian { .. } => None,
            SpectralDensity::OhmicSharpCutoff { omega_c, .. } => Some(*omega_c),
            SpectralDensity::Table { omega, .. } => omega.last().copied(),
        }
    }

    /// Frequencies where the spectrum has kinks, jumps or its main features.
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            SpectralDensity::Lorentzian { tau_c, .. } => {
                vec![0.1 / tau_c, 1.0 / tau_c, 10.0 / tau_c]
            }
            SpectralDensity::OhmicSharpCutoff { omega_c, .. } => vec![*omega_c],
            SpectralDensity::Table { omega, .. } => omega.clone(),
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            SpectralDensity::Lorentzian { variance, .. } => *variance == 0.0,
            SpectralDensity::OhmicSharpCutoff { alpha, .. } => *alpha == 0.0,
            SpectralDensity::Table { value, .. } => value.iter().all(|&v| v == 0.0),
        }
    }
}

/// Signed switching amplitudes `c_k` and instants `s_k` with
/// `F = |sum_k c_k exp(i w s_k)|^2`.
struct Kernel {
    period: f64,
    instants: Vec<f64>,
    instants_dd: Vec<TwoFloat>,
    sign_end: f64,
}

impl Kernel {
    fn new(times: &TimingVector) -> Self {
        let n = times.order();
        Kernel {
            period: times.total_period(),
            instants: times.instants().to_vec(),
            instants_dd: times.instants_dd(),
            sign_end: if n % 2 == 0 { -1.0 } else { 1.0 },
        }
    }

    fn eval(&self, omega: f64) -> f64 {
        let w = omega.abs();
        if w * self.period < EXTENDED_BELOW {
            self.eval_dd(w)
        } else {
            self.eval_f64(w)
        }
    }

    fn eval_f64(&self, w: f64) -> f64 {
        let (s, c) = (w * self.period).sin_cos();
        let mut re = 1.0 + self.sign_end * c;
        let mut im = self.sign_end * s;
        let mut sign = -2.0;
        for &t in &self.instants {
            let (s, c) = (w * t).sin_cos();
            re += sign * c;
            im += sign * s;
            sign = -sign;
        }
        re * re + im * im
    }

    fn eval_dd(&self, w: f64) -> f64 {
        let w = TwoFloat::from(w);
        let end = w * TwoFloat::from(self.period);
        let sign_end = TwoFloat::from(self.sign_end);
        let (s, c) = sin_cos_dd(end);
        let mut re = TwoFloat::from(1.0) + sign_end * c;
        let mut im = sign_end * s;
        let mut sign = TwoFloat::from(-2.0);
        for &t in &self.instants_dd {
            let (s, c) = sin_cos_dd(w * t);
            re += sign * c;
            im += sign * s;
            sign = -sign;
        }
        let f = re * re + im * im;
        f.hi() + f.lo()
    }
}

/// `F(wT) = |1 + (-1)^(N+1) e^(iwT) + 2 sum_j (-1)^j e^(i w t_j)|^2` for
/// instantaneous pulses at the instants of `times`. Even in `omega`.
pub fn filter_function(times: &TimingVector, omega: f64) -> f64 {
    Kernel::new(times).eval(omega)
}

/// Least-squares slope of `ln F` against `ln w` on `points` log-spaced
/// frequencies spanning `[omega_lo, omega_hi]`.
pub fn suppression_slope(times: &TimingVector, omega_lo: f64, omega_hi: f64, points: usize) -> Result<f64> {
    if !(omega_lo > 0.0 && omega_hi > omega_lo) || points < 2 {
        return Err(Error::domain("slope fit needs 0 < omega_lo < omega_hi and two points"));
    }
    let kernel = Kernel::new(times);
    let step = (omega_hi / omega_lo).ln() / (points - 1) as f64;
    let mut xs = Vec::with_capacity(points);
    let mut ys = Vec::with_capacity(points);
    for k in 0..points {
        let x = omega_lo.ln() + step * k as f64;
        let f = kernel.eval(x.exp());
        if !(f > 0.0) {
            return Err(Error::domain(format!("filter function vanishes at w = {}", x.exp())));
        }
        xs.push(x);
        ys.push(f.ln());
    }
    let n = points as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Dephasing exponent, coherence and the quadrature's error estimate on `chi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterResult {
    pub chi: f64,
    pub coherence: f64,
    pub error_estimate: f64,
}

impl FilterResult {
    fn from_chi(chi: f64, error_estimate: f64) -> Self {
        let chi = chi.max(0.0);
        FilterResult {
            chi,
            coherence: (-chi).exp(),
            error_estimate,
        }
    }
}

/// `chi` at relative tolerance [`CHI_REL_TOL`].
pub fn chi(times: &TimingVector, spectrum: &SpectralDensity) -> Result<FilterResult> {
    chi_with_tolerance(times, spectrum, CHI_REL_TOL)
}

pub fn chi_with_tolerance(times: &TimingVector, spectrum: &SpectralDensity, rel_tol: f64) -> Result<FilterResult> {
    spectrum.validate()?;
    if !(rel_tol > 0.0) {
        return Err(Error::domain("tolerance must be positive"));
    }
    if spectrum.is_zero() {
        return Ok(FilterResult::from_chi(0.0, 0.0));
    }
    let kernel = Kernel::new(times);
    let period = kernel.period;
    let n = times.order() as f64;
    let integrand = |w: f64| {
        if w <= 0.0 {
            return 0.0;
        }
        let s = spectrum.eval(w);
        if s == 0.0 {
            0.0
        } else {
            s * kernel.eval(w) / (w * w)
        }
    };

    // panels resolve the filter oscillation, period 2 pi / T in w
    let width = PI / period;
    let finite_end = spectrum.support_end();
    let upper = finite_end.unwrap_or_else(|| {
        let feature = spectrum.breakpoints().into_iter().fold(0.0, f64::max);
        (256.0 * PI * (n + 1.0) / period).max(64.0 * feature)
    });
    let count = ((upper / width).ceil() as usize).clamp(1, 8192);
    let mut edges: Vec<f64> = (0..=count).map(|k| upper * k as f64 / count as f64).collect();
    edges.extend(spectrum.breakpoints().into_iter().filter(|&b| b > 0.0 && b < upper));
    edges.sort_by(f64::total_cmp);
    edges.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * upper);
    let mut panels: Vec<(f64, f64)> = edges.windows(2).map(|w| (w[0], w[1])).collect();

    let estimate = if finite_end.is_some() {
        quadrature::integrate(&integrand, &panels, rel_tol, 0.0, MAX_PANELS)?
    } else {
        // x in (upper, upper + 1] maps to w = upper / u with u = 1 - (x - upper)
        let tail_panels = 16;
        panels.extend((0..tail_panels).map(|k| {
            (
                upper + k as f64 / tail_panels as f64,
                upper + (k + 1) as f64 / tail_panels as f64,
            )
        }));
        let mapped = |x: f64| {
            if x <= upper {
                integrand(x)
            } else {
                let u = 1.0 - (x - upper);
                if u <= 0.0 {
                    0.0
                } else {
                    integrand(upper / u) * upper / (u * u)
                }
            }
        };
        quadrature::integrate(mapped, &panels, rel_tol, 0.0, MAX_PANELS)?
    };
    let scale = 2.0 / PI;
    Ok(FilterResult::from_chi(scale * estimate.value, scale * estimate.error))
}

/// One row of a coherence curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoherencePoint {
    pub period: f64,
    pub chi: f64,
    pub coherence: f64,
    pub error_estimate: f64,
}

/// Evaluates `chi` for `timing(T)` at every `T` of `grid`. `T = 0` gives `W = 1`.
pub fn coherence_curve<G>(timing: G, spectrum: &SpectralDensity, grid: &[f64]) -> Result<Vec<CoherencePoint>>
where
    G: Fn(f64) -> Result<TimingVector> + Sync,
{
    if grid.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::domain("coherence grid must hold finite times >= 0"));
    }
    grid.par_iter()
        .map(|&period| {
            if period == 0.0 {
                return Ok(CoherencePoint {
                    period,
                    chi: 0.0,
                    coherence: 1.0,
                    error_estimate: 0.0,
                });
            }
            let r = chi(&timing(period)?, spectrum)?;
            Ok(CoherencePoint {
                period,
                chi: r.chi,
                coherence: r.coherence,
                error_estimate: r.error_estimate,
            })
        })
        .collect()
}
