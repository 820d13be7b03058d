//! Integrands `f` of stochastic integral mappings.
//!
//! Each analytic family is specified by a density `h` on `(0, U)`; its tail
//! integral `g(t) = ∫_t^U h(u) du` is strictly decreasing and `f` is the
//! inverse of `s = g(t)`, extended by zero beyond `g(0+)`.
//!
//! | family   | `h(t)`                                   | `U` |
//! |----------|------------------------------------------|-----|
//! | `Psi`    | `t^{-α-1} e^{-t}`                        | ∞   |
//! | `PhiBar` | `(1-t)^{p-1} t^{-α-1} / Γ(p)`            | 1   |
//! | `Lambda` | `(-ln t)^{q-1} t^{-α-1} / Γ(q)`          | 1   |
//! | `GStar`  | `t^{-α-1} e^{-t^β}`                      | ∞   |
//!
//! Step kernels and the combinators `Concat`, `Negate` and `Reverse` build
//! signed piecewise integrands out of these.

use crate::error::{Error, Result};
use crate::quad::{self, QuadValue, Tolerance, DEFAULT_TOL, LOG_FLOOR};
use crate::roots::solve_decreasing;
use crate::special::{digamma, gamma, ln_gamma};
use serde_json::{json, Map, Value};

/// Tighter tolerance for the tail integral inside root finding.
const INVERT_TOL: Tolerance = Tolerance::new(1e-15, 1e-13);

/// Largest `ln t` visited when inverting families on `(0, ∞)`.
const LOG_T_MAX: f64 = 700.0;

/// `Γ(c) / Γ(c + p)` for `c, p > 0`.
fn gamma_ratio(c: f64, p: f64) -> f64 {
    if c + p < 150.0 {
        gamma(c) / gamma(c + p)
    } else {
        (ln_gamma(c) - ln_gamma(c + p)).exp()
    }
}

/// `w · e^{log_mag} · norm`, staying finite when `e^{log_mag}` alone would
/// overflow but `w` has underflowed to zero.
fn scale_by_exp<T: QuadValue>(w: T, log_mag: f64, norm: f64) -> T {
    if log_mag < 700.0 {
        w * (log_mag.exp() * norm)
    } else {
        let half = (0.5 * log_mag).exp();
        w * (half * norm) * half
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Psi { alpha: f64 },
    PhiBar { p: f64, alpha: f64 },
    Lambda { q: f64, alpha: f64 },
    GStar { alpha: f64, beta: f64 },
}

impl Family {
    pub fn alpha(&self) -> f64 {
        match *self {
            Family::Psi { alpha }
            | Family::PhiBar { alpha, .. }
            | Family::Lambda { alpha, .. }
            | Family::GStar { alpha, .. } => alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let alpha = self.alpha();
        if !(alpha.is_finite() && alpha < 2.0) {
            return Err(Error::Domain(format!("alpha must be finite and < 2, got {alpha}")));
        }
        let (name, value) = match *self {
            Family::Psi { .. } => return Ok(()),
            Family::PhiBar { p, .. } => ("p", p),
            Family::Lambda { q, .. } => ("q", q),
            Family::GStar { beta, .. } => ("beta", beta),
        };
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::Domain(format!("{name} must be finite and > 0, got {value}")));
        }
        Ok(())
    }

    /// Upper end `U` of the density's support.
    pub fn upper(&self) -> f64 {
        match self {
            Family::PhiBar { .. } | Family::Lambda { .. } => 1.0,
            Family::Psi { .. } | Family::GStar { .. } => f64::INFINITY,
        }
    }

    fn bounded(&self) -> bool {
        self.upper().is_finite()
    }

    fn split(&self) -> f64 {
        if self.bounded() {
            0.5
        } else {
            1.0
        }
    }

    fn norm(&self) -> f64 {
        match *self {
            Family::PhiBar { p, .. } => 1.0 / gamma(p),
            Family::Lambda { q, .. } => 1.0 / gamma(q),
            _ => 1.0,
        }
    }

    /// The density `h(t)`; zero outside `(0, U)`.
    pub fn density(&self, t: f64) -> f64 {
        if !(t > 0.0 && t < self.upper()) {
            return 0.0;
        }
        let power = (-self.alpha() - 1.0) * t.ln();
        (power + self.log_smooth_factor(t)).exp() * self.norm()
    }

    /// Logarithm of `h(t) t^{α+1} / norm`, valid on `(0, U)`.
    fn log_smooth_factor(&self, t: f64) -> f64 {
        match *self {
            Family::Psi { .. } => -t,
            Family::PhiBar { p, .. } => (p - 1.0) * (-t).ln_1p(),
            Family::Lambda { q, .. } => (q - 1.0) * (-t.ln()).ln(),
            Family::GStar { beta, .. } => -t.powf(beta),
        }
    }

    /// `∫_lo^hi weight(t) t^power h(t) dt`, with `lo` and `hi` clipped to
    /// `[0, U]`.
    ///
    /// Below the split point the integral runs in `v = ln t` so that the
    /// `t^{-α-1}` singularity becomes an exponential; above it bounded families
    /// switch to `d = 1 - t` and unbounded ones to doubling panels.
    pub fn integrate_weighted<T, W>(&self, power: f64, weight: W, lo: f64, hi: f64, tol: Tolerance) -> T
    where
        T: QuadValue,
        W: Fn(f64) -> T,
    {
        let upper = self.upper();
        let hi = hi.min(upper);
        let lo = lo.max(0.0);
        if !(hi > lo) {
            return T::zero();
        }
        let alpha = self.alpha();
        let norm = self.norm();
        let split = self.split();
        let mut total = T::zero();

        let left_hi = hi.min(split);
        if lo < left_hi {
            let g = |v: f64| {
                let t = v.exp();
                let log_mag = (power - alpha) * v + self.log_smooth_factor(t);
                scale_by_exp(weight(t), log_mag, norm)
            };
            let est = if lo == 0.0 {
                quad::integrate_to_log_floor(g, left_hi.ln(), tol)
            } else {
                quad::integrate(g, lo.ln(), left_hi.ln(), tol)
            };
            total = total + est.value;
        }

        let right_lo = lo.max(split);
        if right_lo < hi {
            if self.bounded() {
                // d = 1 - t, integrated in ln d
                let g = |v: f64| {
                    let d = v.exp();
                    let t = 1.0 - d;
                    let log_d_factor = match *self {
                        Family::PhiBar { p, .. } => p * v,
                        Family::Lambda { q, .. } => (q - 1.0) * (-(-d).ln_1p()).ln() + v,
                        _ => unreachable!(),
                    };
                    let log_mag = (power - alpha - 1.0) * (-d).ln_1p() + log_d_factor;
                    scale_by_exp(weight(t), log_mag, norm)
                };
                let d_hi = 1.0 - right_lo;
                let d_lo = 1.0 - hi;
                let est = if d_lo <= 0.0 {
                    quad::integrate_to_log_floor(g, d_hi.ln(), tol)
                } else {
                    quad::integrate(g, d_lo.ln(), d_hi.ln(), tol)
                };
                total = total + est.value;
            } else {
                let g = |t: f64| {
                    let log_mag = (power - alpha - 1.0) * t.ln() + self.log_smooth_factor(t);
                    scale_by_exp(weight(t), log_mag, norm)
                };
                let est = if hi.is_infinite() {
                    quad::integrate_to_infinity(g, right_lo, 1.0, tol)
                } else {
                    quad::integrate(g, right_lo, hi, tol)
                };
                total = total + est.value;
            }
        }
        total
    }

    /// `g(0+)`: finite exactly when `α < 0`.
    pub fn support_end(&self) -> f64 {
        let alpha = self.alpha();
        if alpha >= 0.0 {
            return f64::INFINITY;
        }
        let a = -alpha;
        match *self {
            Family::Psi { .. } => gamma(a),
            Family::PhiBar { p, .. } => gamma_ratio(a, p),
            Family::Lambda { q, .. } => a.powf(-q),
            Family::GStar { beta, .. } => gamma(a / beta) / beta,
        }
    }

    /// Closed-form `g(t)` for the parameter combinations that have one.
    pub fn tail_closed(&self, t: f64) -> Option<f64> {
        let power_tail = |alpha: f64| {
            // ∫_t^1 u^{-α-1} du
            if alpha == 0.0 {
                -t.ln()
            } else {
                (t.powf(-alpha) - 1.0) / alpha
            }
        };
        match *self {
            Family::Psi { alpha } if alpha == -1.0 => Some((-t).exp()),
            Family::PhiBar { p, alpha } if p == 1.0 => Some(power_tail(alpha)),
            Family::PhiBar { p, alpha } if alpha == -1.0 => Some((p * (-t).ln_1p()).exp() / gamma(p + 1.0)),
            Family::Lambda { q, alpha } if q == 1.0 => Some(power_tail(alpha)),
            Family::Lambda { q, alpha } if alpha == 0.0 => Some((-t.ln()).powf(q) / gamma(q + 1.0)),
            Family::GStar { alpha, beta } if alpha == -beta => Some((-t.powf(beta)).exp() / beta),
            _ => None,
        }
    }

    /// `g(t)` by quadrature, independent of the closed forms.
    pub fn tail_quadrature(&self, t: f64) -> f64 {
        self.tail_quadrature_tol(t, DEFAULT_TOL)
    }

    fn tail_quadrature_tol(&self, t: f64, tol: Tolerance) -> f64 {
        if t >= self.upper() {
            return 0.0;
        }
        let split = self.split();
        if self.alpha() < 0.0 && t < split {
            // g(t) = g(0+) - ∫_0^t h keeps full relative accuracy near t = 0
            self.support_end() - self.integrate_weighted(0.0, |_| 1.0, 0.0, t, tol)
        } else {
            self.integrate_weighted(0.0, |_| 1.0, t, f64::INFINITY, tol)
        }
    }

    /// `g(t)`, closed form when available.
    pub fn tail(&self, t: f64) -> f64 {
        if t >= self.upper() {
            return 0.0;
        }
        self.tail_closed(t).unwrap_or_else(|| self.tail_quadrature(t))
    }

    /// Closed-form `f(s)` for the parameter combinations that have one.
    pub fn value_closed(&self, s: f64) -> Option<f64> {
        let unit_family = |alpha: f64| {
            if alpha < 0.0 {
                let a = -alpha;
                let base = 1.0 - a * s;
                if base <= 0.0 {
                    0.0
                } else {
                    base.powf(1.0 / a)
                }
            } else if alpha == 0.0 {
                (-s).exp()
            } else {
                (-(alpha * s).ln_1p() / alpha).exp()
            }
        };
        match *self {
            Family::Psi { alpha } if alpha == -1.0 => Some(if s >= 1.0 { 0.0 } else { -s.ln() }),
            Family::PhiBar { p, alpha } if p == 1.0 => Some(unit_family(alpha)),
            Family::Lambda { q, alpha } if q == 1.0 => Some(unit_family(alpha)),
            Family::PhiBar { p, alpha } if alpha == -1.0 => {
                let x = gamma(p + 1.0) * s;
                Some(if x >= 1.0 { 0.0 } else { 1.0 - x.powf(1.0 / p) })
            }
            Family::Lambda { q, alpha } if alpha == 0.0 => Some((-(gamma(q + 1.0) * s).powf(1.0 / q)).exp()),
            Family::GStar { alpha, beta } if alpha == -beta => {
                let x = beta * s;
                Some(if x >= 1.0 { 0.0 } else { (-x.ln()).powf(1.0 / beta) })
            }
            _ => None,
        }
    }

    /// `f(s)` by bracketed root finding on the quadrature tail integral.
    pub fn invert_numeric(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return self.upper();
        }
        let s_end = self.support_end();
        if s >= s_end {
            return 0.0;
        }
        let alpha = self.alpha();
        let split = self.split();
        // For α < 0 and small t solve ∫_0^t h = g(0+) - s instead, which
        // avoids cancellation in g(0+) - ∫_0^t h.
        let remaining = s_end - s;
        let residual = |x: f64| {
            let t = x.exp();
            if alpha < 0.0 && t < split {
                remaining - self.integrate_weighted(0.0, |_| 1.0, 0.0, t, INVERT_TOL)
            } else {
                self.integrate_weighted(0.0, |_| 1.0, t, f64::INFINITY, INVERT_TOL) - s
            }
        };
        let x_max = if self.bounded() { 0.0 } else { LOG_T_MAX };
        let x_min = LOG_FLOOR + 10.0;
        let guess = if alpha < 0.0 {
            (remaining * -alpha).ln() / -alpha
        } else if alpha == 0.0 {
            -s
        } else {
            -(alpha * s).ln_1p() / alpha
        };
        let x0 = guess.clamp(x_min, x_max);
        let (lo, hi) = if residual(x0) >= 0.0 {
            let mut lo = x0;
            let mut step = 1.0;
            loop {
                let hi = (lo + step).min(x_max);
                if hi >= x_max || residual(hi) <= 0.0 {
                    break (lo, hi);
                }
                lo = hi;
                step *= 2.0;
            }
        } else {
            let mut hi = x0;
            let mut step = 1.0;
            loop {
                let lo = (hi - step).max(x_min);
                if residual(lo) >= 0.0 {
                    break (lo, hi);
                }
                if lo <= x_min {
                    return 0.0;
                }
                hi = lo;
                step *= 2.0;
            }
        };
        let x_tol = 4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1.0);
        solve_decreasing(residual, lo, hi, x_tol).exp()
    }

    /// `f(s)`, closed form when available.
    pub fn value(&self, s: f64) -> f64 {
        self.value_closed(s).unwrap_or_else(|| self.invert_numeric(s))
    }

    fn check_moment_order(&self, beta: f64) -> Result<()> {
        let alpha = self.alpha();
        if !(beta > alpha.max(0.0)) {
            return Err(Error::Divergent(format!(
                "moment of order {beta} diverges for a kernel with alpha = {alpha}"
            )));
        }
        Ok(())
    }

    /// `∫_0^∞ f(s)^β ds = ∫_0^U t^β h(t) dt` in closed form.
    pub fn moment(&self, beta: f64) -> Result<f64> {
        self.check_moment_order(beta)?;
        let c = beta - self.alpha();
        Ok(match *self {
            Family::Psi { .. } => gamma(c),
            Family::PhiBar { p, .. } => gamma_ratio(c, p),
            Family::Lambda { q, .. } => c.powf(-q),
            Family::GStar { beta: b, .. } => gamma(c / b) / b,
        })
    }

    /// Derivative of [`Family::moment`] in `β`.
    pub fn moment_derivative(&self, beta: f64) -> Result<f64> {
        let m = self.moment(beta)?;
        let c = beta - self.alpha();
        Ok(match *self {
            Family::Psi { .. } => m * digamma(c),
            Family::PhiBar { p, .. } => m * (digamma(c) - digamma(c + p)),
            Family::Lambda { q, .. } => -m * q / c,
            Family::GStar { beta: b, .. } => m * digamma(c / b) / b,
        })
    }

    /// [`Family::moment`] by quadrature.
    pub fn moment_quadrature(&self, beta: f64) -> Result<f64> {
        self.check_moment_order(beta)?;
        Ok(self.integrate_weighted(beta, |_| 1.0, 0.0, f64::INFINITY, DEFAULT_TOL))
    }

    /// `∫_lo^hi t^β h(t) dt`, the `β`-moment of `f` over the `s`-window
    /// `[g(hi), g(lo)]`.
    pub fn partial_moment(&self, beta: f64, lo: f64, hi: f64) -> f64 {
        self.integrate_weighted(beta, |_| 1.0, lo, hi, DEFAULT_TOL)
    }
}

/// Piecewise-constant kernel with cumulative offsets for `O(log n)` lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct StepKernel {
    segments: Vec<(f64, f64)>,
    offsets: Vec<f64>,
}

impl StepKernel {
    pub fn new(segments: Vec<(f64, f64)>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Domain("step kernel needs at least one segment".into()));
        }
        let mut offsets = Vec::with_capacity(segments.len() + 1);
        let mut acc = 0.0;
        offsets.push(acc);
        for &(len, height) in &segments {
            if !(len.is_finite() && len > 0.0) {
                return Err(Error::Domain(format!("segment length must be > 0, got {len}")));
            }
            if !height.is_finite() || height == 0.0 {
                return Err(Error::Domain(format!("segment height must be finite and nonzero, got {height}")));
            }
            acc += len;
            offsets.push(acc);
        }
        Ok(StepKernel { segments, offsets })
    }

    pub fn segments(&self) -> &[(f64, f64)] {
        &self.segments
    }

    pub fn total_length(&self) -> f64 {
        *self.offsets.last().unwrap()
    }

    /// Height at `s`; segments are half-open `[start, end)`.
    pub fn value(&self, s: f64) -> f64 {
        if !(s >= 0.0) || s >= self.total_length() {
            return 0.0;
        }
        let idx = self.offsets.partition_point(|&o| o <= s) - 1;
        self.segments[idx].1
    }
}

/// One monotone or constant stretch of a kernel, up to rearrangement in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Piece {
    /// `sign · f_family` on the family's full support.
    Analytic { family: Family, sign: f64 },
    Constant { length: f64, height: f64 },
}

impl Piece {
    /// `(∫_{f>0} |f|^β ds, ∫_{f<0} |f|^β ds)` in closed form.
    pub fn moment(&self, beta: f64) -> Result<(f64, f64)> {
        let (value, sign) = match *self {
            Piece::Analytic { family, sign } => (family.moment(beta)?, sign),
            Piece::Constant { length, height } => {
                if !(beta > 0.0) {
                    return Err(Error::Divergent(format!("moment of order {beta} of a step kernel")));
                }
                (length * height.abs().powf(beta), height.signum())
            }
        };
        Ok(if sign > 0.0 { (value, 0.0) } else { (0.0, value) })
    }

    fn moment_quadrature(&self, beta: f64) -> Result<(f64, f64)> {
        match *self {
            Piece::Analytic { family, sign } => {
                let value = family.moment_quadrature(beta)?;
                Ok(if sign > 0.0 { (value, 0.0) } else { (0.0, value) })
            }
            Piece::Constant { .. } => self.moment(beta),
        }
    }

    /// `∫ F(f(s)) ds` over the piece; `F` must vanish fast enough at zero
    /// for the integral to converge.
    pub fn integrate<T: QuadValue, F: Fn(f64) -> T>(&self, integrand: F, tol: Tolerance) -> T {
        match *self {
            Piece::Analytic { family, sign } => {
                family.integrate_weighted(0.0, |t| integrand(sign * t), 0.0, f64::INFINITY, tol)
            }
            Piece::Constant { length, height } => integrand(height) * length,
        }
    }

    /// `∫ |f(s)|^κ φ(f(s)) ds`.
    pub fn integrate_scaled<T: QuadValue, F: Fn(f64) -> T>(&self, kappa: f64, integrand: F, tol: Tolerance) -> T {
        match *self {
            Piece::Analytic { family, sign } => {
                family.integrate_weighted(kappa, |t| integrand(sign * t), 0.0, f64::INFINITY, tol)
            }
            Piece::Constant { length, height } => integrand(height) * (length * height.abs().powf(kappa)),
        }
    }

    pub fn support_end(&self) -> f64 {
        match self {
            Piece::Analytic { family, .. } => family.support_end(),
            Piece::Constant { length, .. } => *length,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Analytic(Family),
    Step(StepKernel),
    Concat(Vec<KernelSpec>),
    Negate(Box<KernelSpec>),
    Reverse(Box<KernelSpec>),
}

impl KernelSpec {
    pub fn psi(alpha: f64) -> Self {
        KernelSpec::Analytic(Family::Psi { alpha })
    }

    pub fn phibar(p: f64, alpha: f64) -> Self {
        KernelSpec::Analytic(Family::PhiBar { p, alpha })
    }

    pub fn lambda(q: f64, alpha: f64) -> Self {
        KernelSpec::Analytic(Family::Lambda { q, alpha })
    }

    pub fn gstar(alpha: f64, beta: f64) -> Self {
        KernelSpec::Analytic(Family::GStar { alpha, beta })
    }

    /// `f(s) = e^{-s}`.
    pub fn exp() -> Self {
        Self::phibar(1.0, 0.0)
    }

    pub fn step(segments: Vec<(f64, f64)>) -> Result<Self> {
        Ok(KernelSpec::Step(StepKernel::new(segments)?))
    }

    /// Checks parameters and that every part of a `Concat` except the last
    /// and every `Reverse` operand has finite support.
    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Analytic(family) => family.validate(),
            KernelSpec::Step(_) => Ok(()),
            KernelSpec::Concat(parts) => {
                if parts.is_empty() {
                    return Err(Error::Domain("concat needs at least one kernel".into()));
                }
                for (i, part) in parts.iter().enumerate() {
                    part.validate()?;
                    if i + 1 < parts.len() && !part.support_end().is_finite() {
                        return Err(Error::Domain("only the last kernel of a concat may have infinite support".into()));
                    }
                }
                Ok(())
            }
            KernelSpec::Negate(inner) => inner.validate(),
            KernelSpec::Reverse(inner) => {
                inner.validate()?;
                if !inner.support_end().is_finite() {
                    return Err(Error::Domain("time reversal needs a kernel with finite support".into()));
                }
                Ok(())
            }
        }
    }

    pub fn family(&self) -> Option<Family> {
        match self {
            KernelSpec::Analytic(family) => Some(*family),
            _ => None,
        }
    }

    pub fn support_end(&self) -> f64 {
        match self {
            KernelSpec::Analytic(family) => family.support_end(),
            KernelSpec::Step(step) => step.total_length(),
            KernelSpec::Concat(parts) => parts.iter().map(KernelSpec::support_end).sum(),
            KernelSpec::Negate(inner) | KernelSpec::Reverse(inner) => inner.support_end(),
        }
    }

    /// `g(t)` for an analytic family.
    pub fn tail_integral(&self, t: f64) -> Result<f64> {
        let family = self
            .family()
            .ok_or_else(|| Error::Unsupported("tail integral is defined for analytic families only".into()))?;
        if !(t > 0.0) {
            return Err(Error::Domain(format!("tail integral needs t > 0, got {t}")));
        }
        Ok(family.tail(t))
    }

    /// `f(s)` for `s ≥ 0`; zero beyond the support.
    pub fn kernel_value(&self, s: f64) -> f64 {
        let s = s.max(0.0);
        match self {
            KernelSpec::Analytic(family) => family.value(s),
            KernelSpec::Step(step) => step.value(s),
            KernelSpec::Concat(parts) => {
                let mut start = 0.0;
                for part in parts {
                    let end = part.support_end();
                    if s < start + end {
                        return part.kernel_value(s - start);
                    }
                    start += end;
                }
                0.0
            }
            KernelSpec::Negate(inner) => -inner.kernel_value(s),
            KernelSpec::Reverse(inner) => {
                let end = inner.support_end();
                if s >= end {
                    0.0
                } else {
                    inner.kernel_value(end - s)
                }
            }
        }
    }

    /// Flattens the kernel into its pieces. Time offsets are dropped: every
    /// functional `∫ F(f(s)) ds` depends only on the multiset of pieces.
    pub fn pieces(&self) -> Vec<Piece> {
        match self {
            KernelSpec::Analytic(family) => vec![Piece::Analytic { family: *family, sign: 1.0 }],
            KernelSpec::Step(step) => step
                .segments()
                .iter()
                .map(|&(length, height)| Piece::Constant { length, height })
                .collect(),
            KernelSpec::Concat(parts) => parts.iter().flat_map(KernelSpec::pieces).collect(),
            KernelSpec::Negate(inner) => inner
                .pieces()
                .into_iter()
                .map(|piece| match piece {
                    Piece::Analytic { family, sign } => Piece::Analytic { family, sign: -sign },
                    Piece::Constant { length, height } => Piece::Constant { length, height: -height },
                })
                .collect(),
            KernelSpec::Reverse(inner) => inner.pieces(),
        }
    }

    /// Largest `α` over the analytic pieces; `None` for pure step kernels.
    pub fn max_alpha(&self) -> Option<f64> {
        self.pieces()
            .iter()
            .filter_map(|piece| match piece {
                Piece::Analytic { family, .. } => Some(family.alpha()),
                Piece::Constant { .. } => None,
            })
            .reduce(f64::max)
    }

    /// `(∫_{f>0} |f|^β ds, ∫_{f<0} |f|^β ds)`.
    pub fn beta_moment(&self, beta: f64) -> Result<(f64, f64)> {
        self.sum_pieces(|piece| piece.moment(beta))
    }

    /// [`KernelSpec::beta_moment`] with quadrature for the analytic pieces.
    pub fn beta_moment_quadrature(&self, beta: f64) -> Result<(f64, f64)> {
        self.sum_pieces(|piece| piece.moment_quadrature(beta))
    }

    fn sum_pieces<F: Fn(&Piece) -> Result<(f64, f64)>>(&self, moment: F) -> Result<(f64, f64)> {
        let mut plus = 0.0;
        let mut minus = 0.0;
        for piece in self.pieces() {
            let (p, m) = moment(&piece)?;
            plus += p;
            minus += m;
        }
        Ok((plus, minus))
    }

    /// `∫ f(s)^2 ds`.
    pub fn squared_integral(&self) -> Result<f64> {
        let (plus, minus) = self.beta_moment(2.0)?;
        Ok(plus + minus)
    }

    /// `∫ f(s) ds`, finite when every analytic piece has `α < 1`.
    pub fn signed_integral(&self) -> Result<f64> {
        let (plus, minus) = self.beta_moment(1.0)?;
        Ok(plus - minus)
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let spec = parse_kernel(value)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Value {
        match self {
            KernelSpec::Analytic(Family::Psi { alpha }) => json!({"family": "psi", "alpha": alpha}),
            KernelSpec::Analytic(Family::PhiBar { p, alpha }) => json!({"family": "phibar", "p": p, "alpha": alpha}),
            KernelSpec::Analytic(Family::Lambda { q, alpha }) => json!({"family": "lambda", "q": q, "alpha": alpha}),
            KernelSpec::Analytic(Family::GStar { alpha, beta }) => {
                json!({"family": "gstar", "alpha": alpha, "beta": beta})
            }
            KernelSpec::Step(step) => {
                let segments: Vec<Value> = step.segments().iter().map(|&(l, h)| json!([l, h])).collect();
                json!({"family": "step", "segments": segments})
            }
            KernelSpec::Concat(parts) => json!({"concat": parts.iter().map(KernelSpec::to_json).collect::<Vec<_>>()}),
            KernelSpec::Negate(inner) => json!({"negate": inner.to_json()}),
            KernelSpec::Reverse(inner) => json!({"reverse": inner.to_json()}),
        }
    }
}

fn schema(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}

fn expect_keys(obj: &Map<String, Value>, allowed: &[&str]) -> Result<()> {
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(schema(format!("unknown field `{key}` in kernel")));
        }
    }
    Ok(())
}

fn number(obj: &Map<String, Value>, key: &str) -> Result<f64> {
    obj.get(key)
        .ok_or_else(|| schema(format!("kernel is missing `{key}`")))?
        .as_f64()
        .ok_or_else(|| schema(format!("kernel field `{key}` must be a number")))
}

fn parse_kernel(value: &Value) -> Result<KernelSpec> {
    if let Some(name) = value.as_str() {
        return match name {
            "exp" => Ok(KernelSpec::exp()),
            other => Err(schema(format!("unknown kernel shorthand `{other}`"))),
        };
    }
    let obj = value.as_object().ok_or_else(|| schema("kernel must be an object"))?;
    if let Some(parts) = obj.get("concat") {
        expect_keys(obj, &["concat"])?;
        let parts = parts.as_array().ok_or_else(|| schema("`concat` must be an array"))?;
        if parts.is_empty() {
            return Err(schema("`concat` must not be empty"));
        }
        return Ok(KernelSpec::Concat(parts.iter().map(parse_kernel).collect::<Result<_>>()?));
    }
    if let Some(inner) = obj.get("negate") {
        expect_keys(obj, &["negate"])?;
        return Ok(KernelSpec::Negate(Box::new(parse_kernel(inner)?)));
    }
    if let Some(inner) = obj.get("reverse") {
        expect_keys(obj, &["reverse"])?;
        return Ok(KernelSpec::Reverse(Box::new(parse_kernel(inner)?)));
    }
    let family = obj
        .get("family")
        .and_then(Value::as_str)
        .ok_or_else(|| schema("kernel needs a string `family` or a combinator key"))?;
    match family {
        "psi" => {
            expect_keys(obj, &["family", "alpha"])?;
            Ok(KernelSpec::psi(number(obj, "alpha")?))
        }
        "phibar" => {
            expect_keys(obj, &["family", "p", "alpha"])?;
            Ok(KernelSpec::phibar(number(obj, "p")?, number(obj, "alpha")?))
        }
        "lambda" => {
            expect_keys(obj, &["family", "q", "alpha"])?;
            Ok(KernelSpec::lambda(number(obj, "q")?, number(obj, "alpha")?))
        }
        "gstar" => {
            expect_keys(obj, &["family", "alpha", "beta"])?;
            Ok(KernelSpec::gstar(number(obj, "alpha")?, number(obj, "beta")?))
        }
        "step" => {
            expect_keys(obj, &["family", "segments"])?;
            let raw = obj
                .get("segments")
                .and_then(Value::as_array)
                .ok_or_else(|| schema("step kernel needs a `segments` array"))?;
            let mut segments = Vec::with_capacity(raw.len());
            for seg in raw {
                let pair = seg
                    .as_array()
                    .filter(|a| a.len() == 2)
                    .ok_or_else(|| schema("each segment must be [length, height]"))?;
                let len = pair[0].as_f64().ok_or_else(|| schema("segment length must be a number"))?;
                let height = pair[1].as_f64().ok_or_else(|| schema("segment height must be a number"))?;
                segments.push((len, height));
            }
            KernelSpec::step(segments)
        }
        other => Err(schema(format!("unknown kernel family `{other}`"))),
    }
}
