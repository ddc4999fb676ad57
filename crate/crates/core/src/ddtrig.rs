//! Double-double trigonometry for small arguments.

use twofloat::TwoFloat;

/// Taylor series in double-double for `|x| <= 2`. Divisors stay `f64`:
/// `TwoFloat / TwoFloat` in twofloat 0.8 rounds to plain double accuracy.
pub(crate) fn sin_cos_dd(x: TwoFloat) -> (TwoFloat, TwoFloat) {
    let x2 = x * x;
    let mut term = x;
    let mut sin = x;
    let mut cos = TwoFloat::from(1.0);
    let mut cos_term = TwoFloat::from(1.0);
    let mut k = 1.0;
    loop {
        cos_term = -cos_term * x2 / (k * (k + 1.0));
        cos += cos_term;
        term = -term * x2 / ((k + 1.0) * (k + 2.0));
        sin += term;
        k += 2.0;
        if term.hi().abs() < 1e-36 && cos_term.hi().abs() < 1e-36 {
            break;
        }
    }
    (sin, cos)
}
