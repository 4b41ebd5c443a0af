//! Deterministic adaptive Gauss–Kronrod (7/15) quadrature.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("quadrature on [{a}, {b}] stopped at error estimate {error:e} after {evaluations} evaluations")]
pub struct QuadratureError {
    pub a: f64,
    pub b: f64,
    pub error: f64,
    pub evaluations: usize,
}

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
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_subdivisions: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs: 1e-12, rel: 1e-12, max_subdivisions: 2000 }
    }
}

fn kronrod<const N: usize, F: Fn(f64) -> [f64; N]>(f: &F, a: f64, b: f64) -> ([f64; N], f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = fc.map(|v| v * WGK[7]);
    let mut gauss = fc.map(|v| v * WG[3]);
    for j in 0..7 {
        let dx = half * XGK[j];
        let lo = f(centre - dx);
        let hi = f(centre + dx);
        for i in 0..N {
            let pair = lo[i] + hi[i];
            kronrod[i] += WGK[j] * pair;
            if j % 2 == 1 {
                gauss[i] += WG[j / 2] * pair;
            }
        }
    }
    let mut err = 0.0f64;
    for i in 0..N {
        err = err.max(((kronrod[i] - gauss[i]) * half).abs());
        kronrod[i] *= half;
    }
    (kronrod, err)
}

/// Integrates `f` over `[a, b]`, bisecting the interval with the largest error
/// estimate until the total estimate meets the tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64, QuadratureError> {
    integrate_vec(|x| [f(x)], a, b, tol).map(|[v]| v)
}

/// Vector-valued version of [`integrate`]; the error criterion applies to the
/// worst component.
pub fn integrate_vec<const N: usize, F: Fn(f64) -> [f64; N]>(
    f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
) -> Result<[f64; N], QuadratureError> {
    if a == b {
        return Ok([0.0; N]);
    }
    let mut pieces = vec![(a, b, kronrod(&f, a, b))];
    let mut evaluations = 15;
    loop {
        let mut total = [0.0; N];
        let mut err = 0.0;
        for (_, _, (v, e)) in &pieces {
            for i in 0..N {
                total[i] += v[i];
            }
            err += e;
        }
        let scale = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if err <= tol.abs.max(tol.rel * scale) {
            return Ok(total);
        }
        if pieces.len() >= tol.max_subdivisions {
            return Err(QuadratureError { a, b, error: err, evaluations });
        }
        let worst = pieces.iter().enumerate().max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1)).map(|(i, _)| i).unwrap();
        let (lo, hi, _) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            return Err(QuadratureError { a, b, error: err, evaluations });
        }
        pieces.push((lo, mid, kronrod(&f, lo, mid)));
        pieces.push((mid, hi, kronrod(&f, mid, hi)));
        evaluations += 30;
    }
}

/// Integrates over consecutive pieces split at `breaks` (ascending, inside `[a, b]`).
pub fn integrate_pieces<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<f64, QuadratureError> {
    integrate_pieces_vec(|x| [f(x)], a, b, breaks, tol).map(|[v]| v)
}

pub fn integrate_pieces_vec<const N: usize, F: Fn(f64) -> [f64; N]>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<[f64; N], QuadratureError> {
    let mut total = [0.0; N];
    let mut lo = a;
    let mut add = |part: [f64; N]| {
        for i in 0..N {
            total[i] += part[i];
        }
    };
    for &x in breaks.iter().filter(|&&x| x > a && x < b) {
        add(integrate_vec(&f, lo, x, tol)?);
        lo = x;
    }
    add(integrate_vec(&f, lo, b, tol)?);
    Ok(total)
}
