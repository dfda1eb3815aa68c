//! Principal-value exponential integral `Ei(x)`.

use super::AnalyticError;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082_402_43;

/// Switch from the power series to the asymptotic expansion above this `x`.
const ASYMPTOTIC_FROM: f64 = 40.0;

/// `Ei(x)` for `x != 0`.
///
/// * `x > 40`: asymptotic series `e^x/x * sum n!/x^n`, truncated at its smallest term.
/// * `x < -1`: `-E1(-x)` from the continued fraction of `E1`.
/// * otherwise: `gamma + ln|x| + sum x^n / (n n!)`.
pub fn expint_ei(x: f64) -> Result<f64, AnalyticError> {
    if x == 0.0 || x.is_nan() {
        return Err(AnalyticError::Domain(format!("Ei is singular at x = {x}")));
    }
    Ok(if x > ASYMPTOTIC_FROM {
        ei_asymptotic(x)
    } else if x < -1.0 {
        -e1_continued_fraction(-x)
    } else {
        ei_series(x)
    })
}

fn ei_series(x: f64) -> f64 {
    let mut term = x; // x^n / n!
    let mut sum = x;
    let mut n = 1.0;
    loop {
        n += 1.0;
        term *= x / n;
        let contrib = term / n;
        sum += contrib;
        if contrib.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    EULER_GAMMA + x.abs().ln() + sum
}

fn ei_asymptotic(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut n = 0.0;
    loop {
        n += 1.0;
        let next = term * n / x;
        if next >= term || next < 1e-18 {
            if next < term {
                sum += next;
            }
            break;
        }
        term = next;
        sum += term;
    }
    // e^x / x computed in log space to reach x up to ~ 716
    (x - x.ln()).exp() * sum
}

/// `E1(z)` for `z > 1` by the modified Lentz continued fraction.
fn e1_continued_fraction(z: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = z + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-z).exp()
}

/// `Ei(x0 * e^{-s})` for `x0 > 0`, `s >= 0`, stable when the argument
/// underflows: there `Ei(y) = gamma + ln y + y + O(y^2)`.
pub(crate) fn ei_scaled_down(x0: f64, s: f64) -> f64 {
    let y = x0 * (-s).exp();
    if y > 1e-150 {
        expint_ei(y).expect("argument is positive")
    } else {
        EULER_GAMMA + x0.ln() - s + y
    }
}
