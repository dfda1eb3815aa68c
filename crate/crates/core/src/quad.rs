//! Globally adaptive Gauss-Kronrod (7/15) quadrature.

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    /// False when the interval budget ran out before the tolerance was met.
    pub converged: bool,
}

/// Tolerances for [`integrate`]. The estimate is accepted once
/// `error <= max(abs, rel * |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub const fn relative(rel: f64) -> Self {
        Self {
            rel,
            abs: 0.0,
            max_intervals: 4000,
        }
    }

    pub const fn with_abs(mut self, abs: f64) -> Self {
        self.abs = abs;
        self
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::relative(1e-9)
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Single 15-point Kronrod rule with the embedded 7-point Gauss error estimate.
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    (value, error)
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

/// Integrates `f` over `[a, b]`; `a > b` flips the sign as usual.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Quadrature {
    integrate_with_breaks(&mut f, a, b, &[], tol)
}

/// Like [`integrate`], with the initial partition split at `breaks`
/// (points outside `(a, b)` are ignored).
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Quadrature {
    if a == b {
        return Quadrature {
            value: 0.0,
            error: 0.0,
            converged: true,
        };
    }
    if a > b {
        let q = integrate_with_breaks(f, b, a, breaks, tol);
        return Quadrature {
            value: -q.value,
            ..q
        };
    }
    let mut cuts = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    cuts.extend(inner);
    cuts.push(b);

    let mut pieces: Vec<Piece> = cuts
        .windows(2)
        .map(|w| {
            let (value, error) = gk15(f, w[0], w[1]);
            Piece {
                a: w[0],
                b: w[1],
                value,
                error,
            }
        })
        .collect();

    loop {
        let value: f64 = pieces.iter().map(|p| p.value).sum();
        let error: f64 = pieces.iter().map(|p| p.error).sum();
        let target = tol.abs.max(tol.rel * value.abs());
        if error <= target || !error.is_finite() {
            return Quadrature {
                value,
                error,
                converged: error.is_finite(),
            };
        }
        if pieces.len() >= tol.max_intervals {
            return Quadrature {
                value,
                error,
                converged: false,
            };
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("at least one piece");
        let p = pieces.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            // interval cannot be split further in floating point
            let value: f64 = pieces.iter().map(|p| p.value).sum::<f64>() + p.value;
            let error: f64 = pieces.iter().map(|p| p.error).sum::<f64>() + p.error;
            return Quadrature {
                value,
                error,
                converged: false,
            };
        }
        let (v1, e1) = gk15(f, p.a, mid);
        let (v2, e2) = gk15(f, mid, p.b);
        pieces.push(Piece {
            a: p.a,
            b: mid,
            value: v1,
            error: e1,
        });
        pieces.push(Piece {
            a: mid,
            b: p.b,
            value: v2,
            error: e2,
        });
    }
}

/// Brent-style safeguarded root search (bisection + secant) for a sign
/// change of `f` on `[a, b]`. Stops when the bracket is narrower than `xtol`.
pub fn find_root<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, xtol: f64) -> f64 {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    for _ in 0..200 {
        if (b - a).abs() <= xtol {
            break;
        }
        // secant guess, fall back to bisection when it leaves the middle 80%
        let mut x = b - fb * (b - a) / (fb - fa);
        let lo = a.min(b) + 0.1 * (b - a).abs();
        let hi = a.max(b) - 0.1 * (b - a).abs();
        if !(x >= lo && x <= hi) {
            x = 0.5 * (a + b);
        }
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if (fx < 0.0) == (fa < 0.0) {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let q = integrate(
            |x| x.powi(5) - 3.0 * x * x + 1.0,
            -1.0,
            2.0,
            Tolerance::default(),
        );
        let exact = (64.0 / 6.0 - 8.0 + 2.0) - (1.0 / 6.0 + 1.0 - 1.0);
        assert!((q.value - exact).abs() < 1e-13);
        assert!(q.converged);
    }

    #[test]
    fn steep_exponential() {
        let q = integrate(|x| (-50.0 * x).exp(), 0.0, 1.0, Tolerance::relative(1e-12));
        let exact = (1.0 - (-50.0f64).exp()) / 50.0;
        assert!((q.value / exact - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reversed_limits_and_breaks() {
        let mut f = |x: f64| if x < 0.3 { 1.0 } else { 2.0 };
        let q = integrate_with_breaks(&mut f, 1.0, 0.0, &[0.3], Tolerance::relative(1e-14));
        assert!((q.value + 1.7).abs() < 1e-14);
    }

    #[test]
    fn root_of_cubic() {
        let r = find_root(|x| x * x * x - 2.0, 0.0, 2.0, 1e-15);
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
    }
}
