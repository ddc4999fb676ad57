//! Globally adaptive Gauss-Kronrod (7/15) integration.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd-indexed Kronrod nodes
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Integral value with its accumulated error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Clone, Copy, Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Panel {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over the union of `panels` until the summed error estimate is
/// below `rel_tol * |I|` (or `abs_tol`). Fails once `max_panels` is exceeded.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    panels: &[(f64, f64)],
    rel_tol: f64,
    abs_tol: f64,
    max_panels: usize,
) -> Result<Estimate> {
    let mut heap: BinaryHeap<Panel> = panels.iter().map(|&(a, b)| kronrod(&f, a, b)).collect();
    let mut value: f64 = heap.iter().map(|p| p.value).sum();
    let mut error: f64 = heap.iter().map(|p| p.error).sum();
    loop {
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::Quadrature(format!(
                "non-finite integrand (value {value}, error {error})"
            )));
        }
        if error <= (rel_tol * value.abs()).max(abs_tol) {
            // running sums drift; settle on a fresh total
            let value: f64 = heap.iter().map(|p| p.value).sum();
            let error: f64 = heap.iter().map(|p| p.error).sum();
            if error <= (rel_tol * value.abs()).max(abs_tol) {
                return Ok(Estimate {
                    value,
                    error,
                    intervals: heap.len(),
                });
            }
        }
        if heap.len() >= max_panels {
            return Err(Error::Quadrature(format!(
                "no convergence after {} panels: value {value:e}, error {error:e}, target {:e}",
                heap.len(),
                rel_tol * value.abs()
            )));
        }
        let worst = heap.pop().expect("non-empty panel set");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            return Err(Error::Quadrature(format!(
                "panel [{}, {}] cannot be split further; error {error:e}",
                worst.a, worst.b
            )));
        }
        let left = kronrod(&f, worst.a, mid);
        let right = kronrod(&f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        // K15 integrates degree 22 exactly
        let est = integrate(|x| x.powi(20), &[(0.0, 1.0)], 1e-14, 0.0, 10).unwrap();
        assert!((est.value - 1.0 / 21.0).abs() < 1e-15);
    }

    #[test]
    fn oscillatory_integral() {
        let est = integrate(|x| (50.0 * x).sin().powi(2), &[(0.0, 3.0)], 1e-10, 0.0, 1000).unwrap();
        let exact = 1.5 - (300.0f64).sin() / 200.0;
        assert!((est.value - exact).abs() < 1e-9, "{}", est.value - exact);
    }

    #[test]
    fn singular_endpoint_refines() {
        let est = integrate(|x: f64| x.sqrt().recip(), &[(0.0, 1.0)], 1e-8, 0.0, 2000).unwrap();
        assert!((est.value - 2.0).abs() < 1e-7);
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let res = integrate(|x| (1.0 / x).sin(), &[(0.0, 1.0)], 1e-14, 0.0, 8);
        assert!(matches!(res, Err(Error::Quadrature(_))));
    }
}
