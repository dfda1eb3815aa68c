//! Reference values and independent oracles shared by the integration tests.
//! Nothing here calls into the library's special-function or quadrature code.
#![allow(dead_code)]

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082_402_43;

/// Reference circuit: C = 1 uF, R0 = 100 kOhm, R1 = 10 kOhm, tau = 3e5 s,
/// V0 = 20 mV, V_a = 0.35 V, q0 = 0.
pub const C: f64 = 1e-6;
pub const R0: f64 = 1e5;
pub const R1: f64 = 1e4;
pub const TAU0: f64 = 3e5;
pub const V0: f64 = 0.02;
pub const VA: f64 = 0.35;

/// `Ei(x)` to 20 significant digits, computed with 50-digit arithmetic.
pub const EI_TABLE: [(f64, f64); 8] = [
    (-1.0, -0.219_383_934_395_520_273_68),
    (-0.1, -1.822_923_958_419_390_615_9),
    (0.1, -1.622_812_813_969_276_613_6),
    (1.0, 1.895_117_816_355_936_755_5),
    (5.0, 40.185_275_355_803_177_455),
    (17.5, 2_424_005.375_816_895_205_4),
    (40.0, 6_039_718_263_611_241.578_4),
    (100.0, 2.715_552_744_853_879_821_9e41),
];

/// `p0(t)` for the reference circuit at a few times (50-digit arithmetic).
pub const P0_AT_20MS: f64 = 0.464_884_723_216_439_31;
pub const P0_AT_1S: f64 = 0.445_746_899_241_689_70;

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson integration of `f` over `[a, b]` (either order) to
/// roughly `rel` relative accuracy.
pub fn simpson_integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel: f64) -> f64 {
    // coarse pass to size the tolerance
    let n = 64;
    let h = (b - a) / n as f64;
    let mut total = 0.0;
    let mut coarse = Vec::with_capacity(n);
    for k in 0..n {
        let (x0, x1) = (a + k as f64 * h, a + (k + 1) as f64 * h);
        let (f0, fm, f1) = (f(x0), f(0.5 * (x0 + x1)), f(x1));
        let s = simpson(x0, x1, f0, fm, f1);
        total += s.abs();
        coarse.push((x0, x1, f0, fm, f1, s));
    }
    let tol = rel * total / n as f64;
    coarse
        .into_iter()
        .map(|(x0, x1, f0, fm, f1, s)| adaptive(&f, x0, x1, f0, fm, f1, s, tol, 50))
        .sum()
}

/// `Ei(x) = gamma + ln|x| + int_0^x (e^t - 1)/t dt`, by adaptive Simpson.
pub fn ei_oracle(x: f64) -> f64 {
    let g = |t: f64| if t == 0.0 { 1.0 } else { t.exp_m1() / t };
    EULER_GAMMA + x.abs().ln() + simpson_integrate(g, 0.0, x, 1e-15)
}

/// Reference no-switch probability by direct quadrature of the hazard
/// `int_0^t exp(x0 e^{-s/CR0}) / tau0 ds`.
pub fn p0_oracle(t: f64) -> f64 {
    let x0 = VA / V0;
    let rc = C * R0;
    let hazard = simpson_integrate(|s| (x0 * (-s / rc).exp()).exp() / TAU0, 0.0, t, 1e-13);
    (-hazard).exp()
}

/// Raised-cosine bump of unit mass on `[a, b]`.
pub fn raised_cosine(a: f64, b: f64) -> impl Fn(f64) -> f64 + Send + Sync + Clone + 'static {
    move |q: f64| {
        if q <= a || q >= b {
            0.0
        } else {
            (1.0 - (std::f64::consts::TAU * (q - a) / (b - a)).cos()) / (b - a)
        }
    }
}

/// Width of the region where `values` exceed half their maximum, with
/// linear interpolation between sample points `x`.
pub fn half_max_width(x: &[f64], values: &[f64]) -> f64 {
    let peak = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let level = 0.5 * peak;
    let first = values.iter().position(|&v| v >= level).expect("non-empty");
    let last = values.iter().rposition(|&v| v >= level).expect("non-empty");
    let cross = |i: usize, j: usize| {
        let (v0, v1) = (values[i], values[j]);
        x[i] + (level - v0) / (v1 - v0) * (x[j] - x[i])
    };
    let left = if first == 0 {
        x[0]
    } else {
        cross(first - 1, first)
    };
    let right = if last + 1 == values.len() {
        x[last]
    } else {
        cross(last, last + 1)
    };
    right - left
}
