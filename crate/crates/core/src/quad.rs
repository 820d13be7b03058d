//! Adaptive Gauss–Kronrod quadrature over finite, semi-infinite and
//! log-substituted ranges.
//!
//! All routines are generic over [`QuadValue`] so the same code integrates
//! real and complex integrands.

use num_complex::Complex64;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

/// Values that can be integrated: a real vector space with a norm.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Tolerance { abs, rel }
    }

    fn met(&self, error: f64, value: f64) -> bool {
        error <= self.abs.max(self.rel * value)
    }
}

/// Default tolerance used by the kernel functionals.
pub const DEFAULT_TOL: Tolerance = Tolerance::new(1e-12, 1e-10);

#[derive(Debug, Clone, Copy)]
pub struct Estimate<T> {
    pub value: T,
    pub error: f64,
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

/// One 15-point Kronrod panel with the embedded 7-point Gauss error estimate.
pub fn gk15<T: QuadValue, F: Fn(f64) -> T>(f: &F, a: f64, b: f64) -> Estimate<T> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_sum = fc.magnitude() * WGK[7];
    let mut values = [(T::zero(), T::zero()); 7];
    for (j, slot) in values.iter_mut().enumerate() {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kronrod = kronrod + (f1 + f2) * WGK[j];
        abs_sum += (f1.magnitude() + f2.magnitude()) * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + (f1 + f2) * WG[j / 2];
        }
        *slot = (f1, f2);
    }
    let mean = kronrod * 0.5;
    let mut asc = (fc - mean).magnitude() * WGK[7];
    for (j, (f1, f2)) in values.iter().enumerate() {
        asc += WGK[j] * ((*f1 - mean).magnitude() + (*f2 - mean).magnitude());
    }
    let result = kronrod * half;
    let res_abs = abs_sum * half.abs();
    let res_asc = asc * half.abs();
    let mut err = ((kronrod - gauss) * half).magnitude();
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Estimate { value: result, error: err }
}

/// A Gauss rule for a smooth panel, with fewer points on very short ones:
/// 2 points up to width `2e-3`, 3 up to `2e-2`, otherwise 7.
pub fn gauss_short<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let width = (b - a).abs();
    if width <= 2e-3 {
        let dx = half * FRAC_1_SQRT_3;
        (f(center - dx) + f(center + dx)) * half
    } else if width <= 2e-2 {
        let dx = half * SQRT_3_5;
        (f(center) * (8.0 / 9.0) + (f(center - dx) + f(center + dx)) * (5.0 / 9.0)) * half
    } else {
        gauss7(f, a, b)
    }
}

const FRAC_1_SQRT_3: f64 = 0.577_350_269_189_625_764_509_148_780_502;
const SQRT_3_5: f64 = 0.774_596_669_241_483_377_035_853_079_956;

/// The 7-point Gauss rule alone, for panels known to be smooth.
pub fn gauss7<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut sum = f(center) * WG[3];
    for j in [1, 3, 5] {
        let dx = half * XGK[j];
        sum += (f(center - dx) + f(center + dx)) * WG[j / 2];
    }
    sum * half
}

struct Panel<T> {
    a: f64,
    b: f64,
    est: Estimate<T>,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.est.error == other.est.error
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.est.error.total_cmp(&other.est.error)
    }
}

const MAX_PANELS: usize = 4000;

/// Globally adaptive GK15 on a finite interval `[a, b]`.
pub fn integrate<T: QuadValue, F: Fn(f64) -> T>(f: F, a: f64, b: f64, tol: Tolerance) -> Estimate<T> {
    if a == b {
        return Estimate { value: T::zero(), error: 0.0 };
    }
    let first = gk15(&f, a, b);
    let mut total = first.value;
    let mut total_err = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, est: first });
    while !tol.met(total_err, total.magnitude()) && heap.len() < MAX_PANELS {
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        if (worst.b - worst.a).abs() <= 1e-15 * worst.a.abs().max(worst.b.abs()).max(1e-300) {
            heap.push(worst);
            break;
        }
        let left = gk15(&f, worst.a, mid);
        let right = gk15(&f, mid, worst.b);
        total = total - worst.est.value + left.value + right.value;
        total_err += left.error + right.error - worst.est.error;
        heap.push(Panel { a: worst.a, b: mid, est: left });
        heap.push(Panel { a: mid, b: worst.b, est: right });
    }
    // Re-sum to shed accumulated cancellation from the running updates.
    let mut value = T::zero();
    let mut error = 0.0;
    for p in heap.iter() {
        value = value + p.est.value;
        error += p.est.error;
    }
    Estimate { value, error }
}

/// Integrate over consecutive panels produced by `next_panel` until a panel
/// contributes less than `1e-16` of the running total twice in a row.
fn integrate_panels<T, F, P>(f: &F, mut next_panel: P, tol: Tolerance, max_panels: usize) -> Estimate<T>
where
    T: QuadValue,
    F: Fn(f64) -> T,
    P: FnMut(usize) -> Option<(f64, f64)>,
{
    let mut value = T::zero();
    let mut error = 0.0;
    let mut quiet = 0;
    for k in 0..max_panels {
        let Some((a, b)) = next_panel(k) else { break };
        let est = integrate(f, a, b, Tolerance::new(tol.abs * 0.1, tol.rel));
        value = value + est.value;
        error += est.error;
        let contribution = est.value.magnitude();
        if contribution <= 1e-16 * value.magnitude() || contribution < 1e-300 {
            quiet += 1;
            if quiet >= 2 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    Estimate { value, error }
}

/// `∫_a^∞ f(u) du` by doubling panels of initial width `width`.
pub fn integrate_to_infinity<T: QuadValue, F: Fn(f64) -> T>(
    f: F,
    a: f64,
    width: f64,
    tol: Tolerance,
) -> Estimate<T> {
    integrate_panels(
        &f,
        |k| {
            let lo = a + width * ((1u64 << k) as f64 - 1.0);
            let hi = a + width * ((1u64 << (k + 1)) as f64 - 1.0);
            (lo.is_finite() && hi < 1e300).then_some((lo, hi))
        },
        tol,
        62,
    )
}

/// `∫_a^b f(u) du` for `0 < a < b` using `u = e^v`.
pub fn integrate_log<T: QuadValue, F: Fn(f64) -> T>(f: F, a: f64, b: f64, tol: Tolerance) -> Estimate<T> {
    integrate(
        |v| {
            let u = v.exp();
            f(u) * u
        },
        a.ln(),
        b.ln(),
        tol,
    )
}

/// Lowest log-abscissa visited by [`integrate_log_from_zero`]; `e^-700` is
/// still a normal double.
pub const LOG_FLOOR: f64 = -700.0;

/// `∫_{-∞}^{top} g(v) dv` by doubling panels, stopping at [`LOG_FLOOR`].
pub fn integrate_to_log_floor<T: QuadValue, F: Fn(f64) -> T>(g: F, top: f64, tol: Tolerance) -> Estimate<T> {
    integrate_panels(
        &g,
        |k| {
            let hi = top - ((1u64 << k) as f64 - 1.0);
            let lo = (top - ((1u64 << (k + 1)) as f64 - 1.0)).max(LOG_FLOOR);
            (hi > lo).then_some((lo, hi))
        },
        tol,
        40,
    )
}

/// `∫_0^b f(u) du` using `u = e^v` with doubling panels towards `v = -∞`.
///
/// Suited to integrands with algebraic or logarithmic behaviour at zero; the
/// range below `e^-700` is dropped.
pub fn integrate_log_from_zero<T: QuadValue, F: Fn(f64) -> T>(f: F, b: f64, tol: Tolerance) -> Estimate<T> {
    integrate_to_log_floor(
        |v: f64| {
            let u = v.exp();
            f(u) * u
        },
        b.ln(),
        tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let est = integrate(|x: f64| x.powi(5) - 3.0 * x * x, 0.0, 2.0, DEFAULT_TOL);
        assert!((est.value - (64.0 / 6.0 - 8.0)).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity_via_log() {
        // ∫_0^1 u^{-1/2} du = 2
        let est = integrate_log_from_zero(|u: f64| u.powf(-0.5), 1.0, DEFAULT_TOL);
        assert!((est.value - 2.0).abs() < 1e-10, "{}", est.value);
    }

    #[test]
    fn exponential_tail() {
        let est = integrate_to_infinity(|u: f64| (-u).exp(), 0.0, 1.0, DEFAULT_TOL);
        assert!((est.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn complex_integrand() {
        // ∫_0^π e^{ix} dx = 2i
        let est = integrate(|x: f64| Complex64::new(0.0, x).exp(), 0.0, std::f64::consts::PI, DEFAULT_TOL);
        let g = gauss7(&|x: f64| x.powi(13), 0.0, 1.0);
        assert!((g - 1.0 / 14.0).abs() < 1e-15);
        for (a, b) in [(1.0f64, 1.001f64), (1.0, 1.015), (1.0, 1.3)] {
            let exact = b.exp() - a.exp();
            assert!((gauss_short(&f64::exp, a, b) - exact).abs() < 1e-14 * exact, "{a} {b}");
        }
        assert!((est.value - Complex64::new(0.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn log_range() {
        let est = integrate_log(|u: f64| 1.0 / u, 1e-3, 1e3, DEFAULT_TOL);
        assert!((est.value - (1e6f64).ln()).abs() < 1e-10);
    }
}
