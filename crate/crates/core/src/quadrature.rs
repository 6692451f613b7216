//! Adaptive 1D quadrature: recursive bisection with an embedded
//! Gauss–Kronrod 7/15 pair on every panel.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError<E> {
    #[error("quadrature did not converge on [{a}, {b}] within depth {max_depth} (panel error estimate {estimate:e})")]
    NotConverged {
        a: f64,
        b: f64,
        max_depth: u32,
        estimate: f64,
    },
    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
    #[error(transparent)]
    Integrand(E),
}

/// Accuracy contract for [`integrate`]: absolute tolerance and bisection depth limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    tol: f64,
    max_depth: u32,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("quadrature tolerance must be positive and finite, got {0}")]
pub struct InvalidTolerance(pub f64);

impl QuadratureSpec {
    pub const DEFAULT_TOL: f64 = 1e-10;
    pub const DEFAULT_MAX_DEPTH: u32 = 40;

    pub fn new(tol: f64, max_depth: u32) -> Result<Self, InvalidTolerance> {
        if tol > 0.0 && tol.is_finite() {
            Ok(Self { tol, max_depth })
        } else {
            Err(InvalidTolerance(tol))
        }
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            tol: Self::DEFAULT_TOL,
            max_depth: Self::DEFAULT_MAX_DEPTH,
        }
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

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Returns `(kronrod, |kronrod - gauss|)` on one panel.
fn gauss_kronrod<E>(f: &impl Fn(f64) -> Result<f64, E>, a: f64, b: f64) -> Result<(f64, f64), E> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx)? + f(center + dx)?;
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Ok((kronrod * half, ((kronrod - gauss) * half).abs()))
}

/// Integrates `f` over `[a, b]` to an estimated absolute error of `spec.tol()`.
///
/// Panels are bisected depth-first; each half inherits half of its parent's
/// error budget. Panels are summed in left-to-right order, so the result is
/// deterministic.
pub fn integrate<E>(
    f: impl Fn(f64) -> Result<f64, E>,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<f64, QuadratureError<E>> {
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(QuadratureError::InvalidInterval { a, b });
    }
    if a == b {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let mut stack = vec![(a, b, 0u32, spec.tol)];
    while let Some((lo, hi, depth, budget)) = stack.pop() {
        let (estimate, error) = gauss_kronrod(&f, lo, hi).map_err(QuadratureError::Integrand)?;
        if error <= budget {
            total += estimate;
            continue;
        }
        let mid = 0.5 * (lo + hi);
        if depth >= spec.max_depth || mid <= lo || mid >= hi {
            return Err(QuadratureError::NotConverged {
                a: lo,
                b: hi,
                max_depth: spec.max_depth,
                estimate: error,
            });
        }
        // right half pushed first so the left half is summed first
        stack.push((mid, hi, depth + 1, 0.5 * budget));
        stack.push((lo, mid, depth + 1, 0.5 * budget));
    }
    Ok(total)
}
