use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

/// Least-squares fit of `y = A exp(-t / tau)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitResult {
    pub amplitude: f64,
    /// Seconds.
    pub tau: f64,
    /// Euclidean norm of the residual vector.
    pub residual: f64,
    /// Covariance of `(amplitude, tau)`, scaled by the residual variance.
    pub covariance: [[f64; 2]; 2],
}

pub const FIT_REL_TOL: f64 = 1e-10;
const MAX_ITERATIONS: usize = 500;

/// Fits `points` of `(t, y)`.
///
/// Starts from a log-linear regression when every `y > 0`; otherwise from
/// `A0 = y(t_min)`, `tau0 = (t_max - t_min) / 2`. Refines with
/// Levenberg-Marquardt on `(A, 1/tau)` until the relative parameter change
/// drops below `1e-10`.
pub fn fit_exponential(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {}", points.len())));
    }
    if points.iter().any(|(t, y)| !t.is_finite() || !y.is_finite()) {
        return Err(Error::Fit("non-finite data".into()));
    }
    let y0 = points[0].1;
    if points.iter().all(|&(_, y)| y == y0) {
        return Err(Error::Fit("constant data: amplitude and time constant are not separable".into()));
    }
    let t_min = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let t_max = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if t_max == t_min {
        return Err(Error::Fit("all points share one time".into()));
    }

    let mut p = initial_guess(points, t_min, t_max);
    let mut cost = sum_squares(points, p);
    let mut lambda = 1e-3;
    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        let (jtj, jtr) = normal_equations(points, p);
        let damped = jtj + Matrix2::from_diagonal(&jtj.diagonal()) * lambda;
        let step = damped
            .try_inverse()
            .ok_or_else(|| Error::Fit("singular normal equations".into()))?
            * jtr;
        let trial = p + step;
        let change = (step[0] / p[0]).abs().max((step[1] / p[1]).abs());
        let trial_cost = sum_squares(points, trial);
        if trial_cost.is_finite() && trial_cost <= cost {
            p = trial;
            cost = trial_cost;
            lambda = (lambda / 10.0).max(1e-15);
        } else {
            lambda *= 10.0;
        }
        if change < FIT_REL_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Fit(format!("no convergence after {MAX_ITERATIONS} iterations")));
    }

    let (amplitude, rate) = (p[0], p[1]);
    if !(rate > 0.0) {
        return Err(Error::Fit(format!("fitted rate {rate} is not a decay")));
    }
    let (jtj, _) = normal_equations(points, p);
    let inverse = jtj
        .try_inverse()
        .ok_or_else(|| Error::Fit("singular Jacobian at the optimum".into()))?;
    let dof = (points.len() - 2) as f64;
    let cov_rate = inverse * (cost / dof);
    // (A, k) -> (A, 1/k)
    let g = Matrix2::new(1.0, 0.0, 0.0, -1.0 / (rate * rate));
    let cov = g * cov_rate * g.transpose();
    Ok(FitResult {
        amplitude,
        tau: 1.0 / rate,
        residual: cost.sqrt(),
        covariance: [[cov[(0, 0)], cov[(0, 1)]], [cov[(1, 0)], cov[(1, 1)]]],
    })
}

fn initial_guess(points: &[(f64, f64)], t_min: f64, t_max: f64) -> Vector2<f64> {
    if points.iter().all(|&(_, y)| y > 0.0) {
        let n = points.len() as f64;
        let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
        let ml = points.iter().map(|p| p.1.ln()).sum::<f64>() / n;
        let sxy: f64 = points.iter().map(|p| (p.0 - mt) * (p.1.ln() - ml)).sum();
        let sxx: f64 = points.iter().map(|p| (p.0 - mt).powi(2)).sum();
        let slope = sxy / sxx;
        if slope < 0.0 {
            return Vector2::new((ml - slope * mt).exp(), -slope);
        }
    }
    let first = points.iter().min_by(|a, b| a.0.total_cmp(&b.0)).expect("non-empty").1;
    let amplitude = if first != 0.0 { first } else { 1.0 };
    Vector2::new(amplitude, 2.0 / (t_max - t_min))
}

fn sum_squares(points: &[(f64, f64)], p: Vector2<f64>) -> f64 {
    points.iter().map(|&(t, y)| (y - p[0] * (-p[1] * t).exp()).powi(2)).sum()
}

/// `J^T J` and `-J^T r` for the model Jacobian.
fn normal_equations(points: &[(f64, f64)], p: Vector2<f64>) -> (Matrix2<f64>, Vector2<f64>) {
    let mut jtj = Matrix2::zeros();
    let mut jtr = Vector2::zeros();
    for &(t, y) in points {
        let e = (-p[1] * t).exp();
        let j = Vector2::new(e, -p[0] * t * e);
        let r = y - p[0] * e;
        jtj += j * j.transpose();
        jtr += j * r;
    }
    (jtj, jtr)
}
