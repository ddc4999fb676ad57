use nalgebra::{Matrix4, Matrix5, Vector5};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::experiment::{CorrelationTrace, TracePoint};
use crate::spinops::{correlation, CanonicalState, Matrix4c};

/// Rate model for the pair under a spin-lock, in the singlet/triplet basis.
///
/// Populations (deviations) evolve linearly: singlet order relaxes toward the
/// triplet mean at `1/T_S + R_leak`, triplet populations equilibrate among
/// themselves at `R_T`, and `1/T1` pulls the triplet spread toward the thermal
/// Zeeman order `theta (Iz1 + Iz2)`. Singlet/triplet coherences decay at `R_2rho`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinLockKinetics {
    /// `T_S`, seconds; `f64::INFINITY` disables singlet decay.
    pub singlet_lifetime: f64,
    /// `R_T`, 1/s.
    pub triplet_mixing_rate: f64,
    /// `R_leak`, 1/s.
    pub leak_rate: f64,
    /// `R_2rho`, 1/s.
    pub coherence_decay: f64,
    /// Longitudinal relaxation time, seconds; `f64::INFINITY` disables it.
    pub t1: f64,
    /// Thermal Zeeman order restored by T1, in units of the input deviation.
    pub thermal_polarization: f64,
}

impl Default for SpinLockKinetics {
    fn default() -> Self {
        SpinLockKinetics {
            singlet_lifetime: 16.0,
            triplet_mixing_rate: 5.0,
            leak_rate: 0.02,
            coherence_decay: 2.0,
            t1: 6.3,
            thermal_polarization: 0.5,
        }
    }
}

impl SpinLockKinetics {
    /// No dynamics at all.
    pub fn frozen() -> Self {
        SpinLockKinetics {
            singlet_lifetime: f64::INFINITY,
            triplet_mixing_rate: 0.0,
            leak_rate: 0.0,
            coherence_decay: 0.0,
            t1: f64::INFINITY,
            thermal_polarization: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [self.triplet_mixing_rate, self.leak_rate, self.coherence_decay];
        if rates.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(Error::domain("spin-lock rates must be finite and >= 0"));
        }
        if !(self.singlet_lifetime > 0.0) || !(self.t1 > 0.0) {
            return Err(Error::domain("T_S and T1 must be positive (infinity allowed)"));
        }
        if !self.thermal_polarization.is_finite() {
            return Err(Error::domain("thermal polarization must be finite"));
        }
        Ok(())
    }

    fn singlet_rate(&self) -> f64 {
        1.0 / self.singlet_lifetime + self.leak_rate
    }

    /// Augmented generator acting on `(d_S, d_T+, d_T0, d_T-, 1)`.
    fn generator(&self) -> Matrix5<f64> {
        let k_s = self.singlet_rate();
        let r_t = self.triplet_mixing_rate;
        let r_1 = 1.0 / self.t1;
        let thermal = [self.thermal_polarization, 0.0, -self.thermal_polarization];
        let mut g = Matrix5::zeros();
        for col in 0..4 {
            let mut unit = [0.0; 4];
            unit[col] = 1.0;
            let mean_t = (unit[1] + unit[2] + unit[3]) / 3.0;
            let imbalance = unit[0] - mean_t;
            g[(0, col)] = -0.75 * k_s * imbalance;
            for i in 1..4 {
                let spread = unit[i] - mean_t;
                g[(i, col)] = 0.25 * k_s * imbalance - (r_t + r_1) * spread;
            }
        }
        for i in 1..4 {
            g[(i, 4)] = r_1 * thermal[i - 1];
        }
        g
    }
}

/// Columns: singlet, T+, T0, T-.
fn singlet_triplet_basis() -> Matrix4c {
    let states = [
        CanonicalState::Singlet,
        CanonicalState::TripletPlus,
        CanonicalState::TripletZero,
        CanonicalState::TripletMinus,
    ];
    Matrix4c::from_fn(|r, c| states[c].vector().amplitudes()[r])
}

/// Evolves the deviation `rho0` under `kinetics` and reports its correlation
/// with the singlet at each time of `grid`.
pub fn spinlock_purify(rho0: &Matrix4c, kinetics: &SpinLockKinetics, grid: &[f64]) -> Result<CorrelationTrace> {
    kinetics.validate()?;
    let trace = rho0.trace();
    if trace.norm() > 1e-12 * rho0.norm().max(1.0) {
        return Err(Error::domain(format!("initial deviation has trace {trace}")));
    }
    if grid.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("time grid must be increasing and >= 0"));
    }
    let basis = singlet_triplet_basis();
    let st = basis.adjoint() * rho0 * basis;
    let populations = Vector5::new(st[(0, 0)].re, st[(1, 1)].re, st[(2, 2)].re, st[(3, 3)].re, 1.0);
    let generator = kinetics.generator();
    let singlet = CanonicalState::Singlet.vector();

    let mut points = Vec::with_capacity(grid.len());
    for &t in grid {
        let d = (generator * t).exp() * populations;
        // the generator conserves the population sum; remove rounding drift
        let mean = (d[0] + d[1] + d[2] + d[3]) / 4.0;
        let damp = Complex64::new((-kinetics.coherence_decay * t).exp(), 0.0);
        let evolved = Matrix4::from_fn(|r, c| {
            if r == c {
                Complex64::new(d[r] - mean, 0.0)
            } else {
                st[(r, c)] * damp
            }
        });
        let rho = basis * evolved * basis.adjoint();
        points.push(TracePoint {
            time: t,
            correlation: correlation(&rho, &singlet)?,
            std_error: 0.0,
        });
    }
    Ok(CorrelationTrace::new(singlet_label(), "spin-lock", points))
}

fn singlet_label() -> &'static str {
    CanonicalState::Singlet.label()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::{prepare_initial, PreparationForm};

    fn grid(n: usize, end: f64) -> Vec<f64> {
        (0..n).map(|k| end * k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn frozen_kinetics_keep_initial_correlation() {
        let rho = prepare_initial(PreparationForm::ProjectorForm);
        let tr = spinlock_purify(&rho, &SpinLockKinetics::frozen(), &grid(11, 30.0)).unwrap();
        for p in &tr.points {
            assert!((p.correlation - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn fast_triplet_mixing_purifies_completely() {
        let k = SpinLockKinetics {
            triplet_mixing_rate: 1e3,
            ..SpinLockKinetics::frozen()
        };
        let rho = prepare_initial(PreparationForm::ProjectorForm);
        let tr = spinlock_purify(&rho, &k, &[0.0, 0.01, 0.1]).unwrap();
        assert!((tr.points[2].correlation - 1.0).abs() < 1e-12);
    }

    #[test]
    fn default_kinetics_rise_then_fall() {
        let rho = prepare_initial(PreparationForm::ProjectorForm);
        let tr = spinlock_purify(&rho, &SpinLockKinetics::default(), &grid(401, 40.0)).unwrap();
        let c = tr.correlations();
        let (imax, max) = c.iter().copied().enumerate().fold((0, f64::MIN), |a, (i, v)| if v > a.1 { (i, v) } else { a });
        assert!((c[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-9);
        assert!(max > 0.95);
        assert!(imax > 0 && imax < c.len() - 1);
        assert!(*c.last().unwrap() < max);
    }

    #[test]
    fn triplet_total_conserved_without_singlet_exchange_or_t1() {
        let k = SpinLockKinetics {
            singlet_lifetime: f64::INFINITY,
            leak_rate: 0.0,
            t1: f64::INFINITY,
            ..SpinLockKinetics::default()
        };
        let g = k.generator();
        let d0 = Vector5::new(1.0, 0.3, -1.0, -0.3, 1.0);
        for t in [0.1, 1.0, 10.0] {
            let d = (g * t).exp() * d0;
            assert!((d[1] + d[2] + d[3] - (0.3 - 1.0 - 0.3)).abs() < 1e-12);
            let spread = (d[1] - d[3]).abs();
            assert!(spread < 0.6 * (-k.triplet_mixing_rate * t).exp() + 1e-12);
        }
    }

    #[test]
    fn tracelessness_is_preserved() {
        let g = SpinLockKinetics::default().generator();
        // columns of the population block sum to zero, the forcing too
        for col in 0..5 {
            let s: f64 = (0..4).map(|r| g[(r, col)]).sum();
            assert!(s.abs() < 1e-15, "column {col}: {s}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let rho = prepare_initial(PreparationForm::ProjectorForm);
        let k = SpinLockKinetics::default();
        assert!(spinlock_purify(&rho, &k, &[1.0, 0.5]).is_err());
        assert!(spinlock_purify(&(rho + Matrix4c::identity()), &k, &[0.0]).is_err());
        let bad = SpinLockKinetics {
            leak_rate: -1.0,
            ..k
        };
        assert!(spinlock_purify(&rho, &bad, &[0.0]).is_err());
    }
}
