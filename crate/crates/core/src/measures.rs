//! Lévy measures in three concrete forms and their integral functionals.
//!
//! * [`LevyMeasure::Discrete`]: finitely many atoms.
//! * [`LevyMeasure::Polar`]: a finite mixture of stable radial profiles
//!   `w λ(dξ) r^{-β-1} dr`, the form taken by every completely
//!   selfdecomposable measure with finitely many `β`.
//! * [`LevyMeasure::Radial`]: tabulated radial densities along finitely many
//!   rays.
//!
//! Truncation is always `1_{|x|≤1}`.

use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};
use crate::special::{gamma, EULER_GAMMA};
use nalgebra::DVector;
use num_complex::Complex64;
use serde_json::{json, Map, Value};
use std::f64::consts::FRAC_PI_2;

pub type Vector = DVector<f64>;

/// Tolerance of the boolean structure checks.
pub const STRUCTURE_TOL: f64 = 1e-7;

const SEGMENT_TOL: Tolerance = Tolerance::new(1e-15, 1e-11);
const SAME_DIRECTION: f64 = 1e-12;
const SAME_BETA: f64 = 1e-12;
/// Fitted power-law exponents this close to a convergence boundary count as
/// on it; exact power-law tables reproduce their exponent only to rounding.
const EXPONENT_TOL: f64 = 1e-9;

pub(crate) fn same_direction(a: &Vector, b: &Vector) -> bool {
    a.len() == b.len() && (a - b).amax() <= SAME_DIRECTION
}

fn check_unit(direction: &Vector) -> Result<()> {
    if direction.is_empty() || (direction.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Validation(format!(
            "direction must be a unit vector, got norm {}",
            direction.norm()
        )));
    }
    Ok(())
}

/// Finite discrete measure on the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalMeasure {
    atoms: Vec<(Vector, f64)>,
}

impl SphericalMeasure {
    /// Builds the measure, merging repeated directions.
    pub fn new(atoms: Vec<(Vector, f64)>) -> Result<Self> {
        let mut merged: Vec<(Vector, f64)> = Vec::with_capacity(atoms.len());
        for (direction, weight) in atoms {
            check_unit(&direction)?;
            if !(weight.is_finite() && weight > 0.0) {
                return Err(Error::Validation(format!("spherical weight must be > 0, got {weight}")));
            }
            if let Some(dim) = merged.first().map(|(d, _)| d.len()) {
                if dim != direction.len() {
                    return Err(Error::DimensionMismatch { expected: dim, found: direction.len() });
                }
            }
            match merged.iter_mut().find(|(d, _)| same_direction(d, &direction)) {
                Some(slot) => slot.1 += weight,
                None => merged.push((direction, weight)),
            }
        }
        Ok(SphericalMeasure { atoms: merged })
    }

    /// Point mass at `direction`.
    pub fn point(direction: Vector) -> Result<Self> {
        Self::new(vec![(direction, 1.0)])
    }

    /// `½(δ_ξ + δ_{-ξ})`.
    pub fn symmetric(direction: Vector) -> Result<Self> {
        let negated = -direction.clone();
        Self::new(vec![(direction, 0.5), (negated, 0.5)])
    }

    pub fn atoms(&self) -> &[(Vector, f64)] {
        &self.atoms
    }

    pub fn dim(&self) -> Option<usize> {
        self.atoms.first().map(|(d, _)| d.len())
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| w).sum()
    }

    /// `∫ ξ λ(dξ)`.
    pub fn mean(&self, dim: usize) -> Vector {
        let mut v = Vector::zeros(dim);
        for (d, w) in &self.atoms {
            v.axpy(*w, d, 1.0);
        }
        v
    }

    /// Image under `ξ ↦ -ξ`.
    pub fn reflected(&self) -> Self {
        SphericalMeasure { atoms: self.atoms.iter().map(|(d, w)| (-d.clone(), *w)).collect() }
    }

    fn mix(&self, own: f64, other: &Self, theirs: f64) -> Self {
        let total = own + theirs;
        let mut atoms: Vec<(Vector, f64)> = self.atoms.iter().map(|(d, w)| (d.clone(), w * own / total)).collect();
        for (d, w) in &other.atoms {
            let w = w * theirs / total;
            match atoms.iter_mut().find(|(e, _)| same_direction(e, d)) {
                Some(slot) => slot.1 += w,
                None => atoms.push((d.clone(), w)),
            }
        }
        SphericalMeasure { atoms }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarAtom {
    pub beta: f64,
    pub weight: f64,
    pub lambda: SphericalMeasure,
}

/// `ν(B) = Σ_i w_i ∫ λ_i(dξ) ∫_0^∞ 1_B(rξ) r^{-β_i-1} dr`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GammaRep {
    atoms: Vec<PolarAtom>,
}

impl GammaRep {
    /// Builds the representation, merging atoms with equal `β` and dropping
    /// zero weights.
    pub fn new(atoms: Vec<PolarAtom>) -> Result<Self> {
        let mut rep = GammaRep { atoms: Vec::with_capacity(atoms.len()) };
        let mut dim = None;
        for atom in atoms {
            if !(atom.beta > 0.0 && atom.beta < 2.0) {
                return Err(Error::Validation(format!("beta must lie in (0, 2), got {}", atom.beta)));
            }
            if !(atom.weight.is_finite() && atom.weight >= 0.0) {
                return Err(Error::Validation(format!("atom weight must be >= 0, got {}", atom.weight)));
            }
            if (atom.lambda.total_mass() - 1.0).abs() > 1e-9 {
                return Err(Error::Validation(format!(
                    "spherical measure must have mass 1, got {}",
                    atom.lambda.total_mass()
                )));
            }
            match (dim, atom.lambda.dim()) {
                (Some(d), Some(e)) if d != e => return Err(Error::DimensionMismatch { expected: d, found: e }),
                (None, e) => dim = e,
                _ => {}
            }
            rep.push(atom);
        }
        Ok(rep)
    }

    /// Adds an atom without validation, merging with an equal `β`.
    pub(crate) fn push(&mut self, atom: PolarAtom) {
        if atom.weight == 0.0 {
            return;
        }
        match self.atoms.iter_mut().find(|a| (a.beta - atom.beta).abs() <= SAME_BETA) {
            Some(existing) => {
                existing.lambda = existing.lambda.mix(existing.weight, &atom.lambda, atom.weight);
                existing.weight += atom.weight;
            }
            None => self.atoms.push(atom),
        }
    }

    pub fn single(beta: f64, weight: f64, lambda: SphericalMeasure) -> Result<Self> {
        Self::new(vec![PolarAtom { beta, weight, lambda }])
    }

    pub fn atoms(&self) -> &[PolarAtom] {
        &self.atoms
    }

    pub fn dim(&self) -> Option<usize> {
        self.atoms.iter().find_map(|a| a.lambda.dim())
    }

    /// True iff no atom has `β ≤ α`.
    pub fn gamma_moment_check(&self, alpha: f64) -> bool {
        self.atoms.iter().all(|a| a.beta > alpha)
    }

    /// `Σ w_i β_i^{-2}`, finite for every finite atom set.
    pub fn log_moment_value(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight / (a.beta * a.beta)).sum()
    }

    /// Densities `Σ w c_ξ r^{-β-1}` on `radii`, one ray per direction.
    pub fn render(&self, radii: &[f64]) -> Result<RadialTabulated> {
        let mut rays: Vec<(Vector, Vec<f64>)> = Vec::new();
        for atom in &self.atoms {
            for (direction, c) in atom.lambda.atoms() {
                let idx = match rays.iter().position(|(d, _)| same_direction(d, direction)) {
                    Some(i) => i,
                    None => {
                        rays.push((direction.clone(), vec![0.0; radii.len()]));
                        rays.len() - 1
                    }
                };
                for (value, &r) in rays[idx].1.iter_mut().zip(radii) {
                    *value += atom.weight * c * r.powf(-atom.beta - 1.0);
                }
            }
        }
        let rays = rays
            .into_iter()
            .map(|(direction, density)| RadialRay::new(direction, radii.to_vec(), density))
            .collect::<Result<Vec<_>>>()?;
        Ok(RadialTabulated { rays })
    }
}

/// `∫_0^∞ (e^{irθ} - 1 - irθ 1_{r≤1}) r^{-β-1} dr`.
pub fn stable_cumulant(beta: f64, theta: f64) -> Complex64 {
    if theta == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let a = theta.abs();
    let value = if beta == 1.0 {
        Complex64::new(-FRAC_PI_2 * a, a * (1.0 - EULER_GAMMA - a.ln()))
    } else {
        let stable = Complex64::from_polar(gamma(-beta) * a.powf(beta), -FRAC_PI_2 * beta);
        stable + Complex64::new(0.0, a / (beta - 1.0))
    };
    if theta > 0.0 {
        value
    } else {
        value.conj()
    }
}

/// `∫_1^a r^{-β} dr`, signed (negative for `a < 1`).
pub(crate) fn power_shell(beta: f64, a: f64) -> f64 {
    if beta == 1.0 {
        a.ln()
    } else {
        let e = 1.0 - beta;
        (e * a.ln()).exp_m1() / e
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteAtom {
    pub x: Vector,
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    Zero,
    /// `h_ref (r / r_ref)^b`
    Power { r_ref: f64, h_ref: f64, b: f64 },
    /// `h0 + slope (r - r0)`
    Linear { r0: f64, h0: f64, slope: f64 },
}

impl Shape {
    fn eval(&self, r: f64) -> f64 {
        match *self {
            Shape::Zero => 0.0,
            Shape::Power { r_ref, h_ref, b } => h_ref * (b * (r / r_ref).ln()).exp(),
            Shape::Linear { r0, h0, slope } => (h0 + slope * (r - r0)).max(0.0),
        }
    }

    /// `∫_x^y r^k h(r) dr`; `∞` when divergent.
    fn moment(&self, k: f64, x: f64, y: f64) -> f64 {
        if !(y > x) {
            return 0.0;
        }
        match *self {
            Shape::Zero => 0.0,
            Shape::Power { r_ref, h_ref, b } => {
                let e = k + b + 1.0;
                let scale = h_ref * r_ref.powf(k + 1.0);
                let (lo, hi) = (x / r_ref, y / r_ref);
                if hi.is_infinite() {
                    if e >= -EXPONENT_TOL || lo == 0.0 {
                        return f64::INFINITY;
                    }
                    return scale * -(e * lo.ln()).exp() / e;
                }
                if lo == 0.0 {
                    if e <= EXPONENT_TOL {
                        return f64::INFINITY;
                    }
                    return scale * (e * hi.ln()).exp() / e;
                }
                let span = (hi / lo).ln();
                if e == 0.0 {
                    scale * span
                } else {
                    scale * (e * lo.ln()).exp() * (e * span).exp_m1() / e
                }
            }
            Shape::Linear { r0, h0, slope } => {
                let p = |k: f64| {
                    if k == -1.0 {
                        (y / x).ln()
                    } else {
                        (y.powf(k + 1.0) - x.powf(k + 1.0)) / (k + 1.0)
                    }
                };
                (h0 - slope * r0) * p(k) + slope * p(k + 1.0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Segment {
    lo: f64,
    hi: f64,
    shape: Shape,
}

/// A tabulated radial density along one direction.
///
/// Between nodes the density is log-log linear, or linear in `r` when an
/// endpoint value is zero; below the first and above the last node it
/// continues as the power law through the two outermost nodes (zero if either
/// of them is zero).
#[derive(Debug, Clone, PartialEq)]
pub struct RadialRay {
    direction: Vector,
    radii: Vec<f64>,
    density: Vec<f64>,
    segments: Vec<Segment>,
}

fn two_point(r0: f64, h0: f64, r1: f64, h1: f64) -> Shape {
    if h0 > 0.0 && h1 > 0.0 {
        Shape::Power { r_ref: r0, h_ref: h0, b: (h1 / h0).ln() / (r1 / r0).ln() }
    } else if h0 == 0.0 && h1 == 0.0 {
        Shape::Zero
    } else {
        Shape::Linear { r0, h0, slope: (h1 - h0) / (r1 - r0) }
    }
}

impl RadialRay {
    pub fn new(direction: Vector, radii: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        check_unit(&direction)?;
        if radii.len() < 2 || radii.len() != density.len() {
            return Err(Error::Validation("a ray needs at least two radii and one density per radius".into()));
        }
        if !(radii[0] > 0.0) || radii.windows(2).any(|w| !(w[1] > w[0])) || !radii.last().unwrap().is_finite() {
            return Err(Error::Validation("radii must be positive, finite and strictly increasing".into()));
        }
        if density.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
            return Err(Error::Validation("densities must be finite and >= 0".into()));
        }
        let n = radii.len();
        let mut segments = Vec::with_capacity(n + 1);
        let lower = match two_point(radii[0], density[0], radii[1], density[1]) {
            Shape::Power { b, .. } => Shape::Power { r_ref: radii[0], h_ref: density[0], b },
            _ => Shape::Zero,
        };
        segments.push(Segment { lo: 0.0, hi: radii[0], shape: lower });
        for i in 0..n - 1 {
            segments.push(Segment {
                lo: radii[i],
                hi: radii[i + 1],
                shape: two_point(radii[i], density[i], radii[i + 1], density[i + 1]),
            });
        }
        let upper = match two_point(radii[n - 2], density[n - 2], radii[n - 1], density[n - 1]) {
            Shape::Power { b, .. } => Shape::Power { r_ref: radii[n - 1], h_ref: density[n - 1], b },
            _ => Shape::Zero,
        };
        segments.push(Segment { lo: radii[n - 1], hi: f64::INFINITY, shape: upper });
        if let Shape::Power { b, .. } = lower {
            if b <= -3.0 {
                return Err(Error::Validation(format!(
                    "density near zero grows like r^{b}, so ∫ r² ν(dr) diverges"
                )));
            }
        }
        if let Shape::Power { b, .. } = upper {
            if b >= -1.0 {
                return Err(Error::Validation(format!("density tail decays like r^{b}, so ν is not finite away from 0")));
            }
        }
        Ok(RadialRay { direction, radii, density, segments })
    }

    pub fn direction(&self) -> &Vector {
        &self.direction
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    fn segment_index(&self, r: f64) -> usize {
        self.segments.partition_point(|s| s.lo <= r).saturating_sub(1)
    }

    pub fn density_at(&self, r: f64) -> f64 {
        if !(r > 0.0) {
            return 0.0;
        }
        self.segments[self.segment_index(r)].shape.eval(r)
    }

    /// `a ↦ ∫_1^a r h(r) dr` (negative for `a < 1`), with the whole segments
    /// summed once outward from `r = 1`.
    pub(crate) fn first_moment_from_one(&self) -> impl Fn(f64) -> f64 + '_ {
        let home = self.segment_index(1.0);
        let full: Vec<f64> = self.segments.iter().map(|seg| seg.shape.moment(1.0, seg.lo, seg.hi)).collect();
        // outward[j]: whole segments strictly between `home` and `j`
        let mut outward = vec![0.0; self.segments.len()];
        for j in home + 2..self.segments.len() {
            outward[j] = outward[j - 1] + full[j - 1];
        }
        for j in (0..home.saturating_sub(1)).rev() {
            outward[j] = outward[j + 1] + full[j + 1];
        }
        move |a: f64| {
            let j = self.segment_index(a);
            let seg = |i: usize| &self.segments[i];
            if j == home {
                if a >= 1.0 {
                    seg(j).shape.moment(1.0, 1.0, a)
                } else {
                    -seg(j).shape.moment(1.0, a, 1.0)
                }
            } else if j > home {
                seg(home).shape.moment(1.0, 1.0, seg(home).hi) + outward[j] + seg(j).shape.moment(1.0, seg(j).lo, a)
            } else {
                -(seg(j).shape.moment(1.0, a, seg(j).hi) + outward[j] + seg(home).shape.moment(1.0, seg(home).lo, 1.0))
            }
        }
    }

    /// `Σ span(t_lo, t_hi, k)` over the segments, in the variable `t = u/r`
    /// with `k(t) = h(u/t)`, for increasing `t` up to `t_max`.
    pub(crate) fn sum_over_segments<F>(&self, u: f64, t_max: f64, span: F) -> f64
    where
        F: Fn(f64, f64, &dyn Fn(f64) -> f64) -> f64,
    {
        let mut total = 0.0;
        for seg in self.segments.iter().rev() {
            let lo = if seg.hi.is_infinite() { 0.0 } else { u / seg.hi };
            if lo >= t_max {
                break;
            }
            if matches!(seg.shape, Shape::Zero) {
                continue;
            }
            let hi = if seg.lo == 0.0 { f64::INFINITY } else { u / seg.lo };
            let shape = seg.shape;
            total += span(lo, hi.min(t_max), &|t: f64| shape.eval(u / t));
        }
        total
    }

    /// Exponent of the power-law continuation beyond the last node, if the
    /// continuation is not identically zero.
    pub fn upper_exponent(&self) -> Option<f64> {
        match self.segments.last().unwrap().shape {
            Shape::Power { b, .. } => Some(b),
            _ => None,
        }
    }

    /// `∫_x^y r^k h(r) dr`; `∞` when divergent.
    pub fn moment_between(&self, k: f64, x: f64, y: f64) -> f64 {
        if !(y > x) {
            return 0.0;
        }
        let mut total = 0.0;
        let start = self.segment_index(x);
        for seg in &self.segments[start..] {
            if seg.lo >= y {
                break;
            }
            total += seg.shape.moment(k, seg.lo.max(x), seg.hi.min(y));
        }
        total
    }

    /// `∫_x^y F(r) h(r) dr` by quadrature on each segment in `ln r`.
    fn integrate_between<F: Fn(f64) -> Complex64>(&self, f: &F, x: f64, y: f64) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        let start = self.segment_index(x);
        for seg in &self.segments[start..] {
            if seg.lo >= y {
                break;
            }
            if matches!(seg.shape, Shape::Zero) {
                continue;
            }
            let (a, b) = (seg.lo.max(x), seg.hi.min(y));
            if a > 0.0 && b > a && b.is_finite() {
                let shape = seg.shape;
                total += quad::integrate_log(|r| f(r) * shape.eval(r), a, b, SEGMENT_TOL).value;
            }
        }
        total
    }

    /// `∫_1^∞ r^k ln(r) h(r) dr`; `∞` when divergent.
    fn log_moment_outside(&self, k: f64) -> f64 {
        let n = self.radii.len();
        let last = self.radii[n - 1];
        let inner = if last > 1.0 {
            self.integrate_between(&|r: f64| Complex64::new(r.powf(k) * r.ln(), 0.0), 1.0, last).re
        } else {
            0.0
        };
        let start = last.max(1.0);
        let tail = match self.segments.last().unwrap().shape {
            Shape::Power { r_ref, h_ref, b } => {
                let e = k + b + 1.0;
                if e >= -EXPONENT_TOL {
                    return f64::INFINITY;
                }
                // ∫_S^∞ h_ref (r/R)^b r^k ln r dr with r = S ρ
                let at_start = h_ref * (b * (start / r_ref).ln()).exp();
                at_start * start.powf(k + 1.0) * (-start.ln() / e + 1.0 / (e * e))
            }
            _ => 0.0,
        };
        inner + tail
    }

    /// `∫_0^∞ (e^{irθ} - 1 - irθ 1_{r≤1}) h(r) dr`.
    pub fn cumulant(&self, theta: f64) -> Complex64 {
        if theta == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let integrand = |r: f64| {
            let x = r * theta;
            let half = (0.5 * x).sin();
            let compensator = if r <= 1.0 { x } else { 0.0 };
            Complex64::new(-2.0 * half * half, x.sin() - compensator)
        };
        let n = self.radii.len();
        let first = self.radii[0];
        let last = self.radii[n - 1];
        let mut total = Complex64::new(0.0, 0.0);

        // power series on (0, cut) where |rθ| ≤ 1 and r ≤ 1
        let cut = first.min(1.0).min(1.0 / theta.abs());
        let lower = self.segments[0].shape;
        if !matches!(lower, Shape::Zero) {
            // factor = (iθ)^k / k!
            let mut factor = Complex64::new(0.0, theta);
            for k in 2..200 {
                factor *= Complex64::new(0.0, theta) / k as f64;
                let term = factor * lower.moment(k as f64, 0.0, cut);
                total += term;
                if term.norm() <= 1e-17 * total.norm() {
                    break;
                }
            }
        }
        // quadrature from cut to the start of the upper tail
        let tail_start = last.max(1.0);
        for (a, b) in [(cut, 1.0f64.min(tail_start)), (1.0f64.max(cut), tail_start)] {
            if b > a {
                total += self.integrate_between(&integrand, a, b);
            }
        }
        // upper tail by contour rotation r = R + iy
        if let Shape::Power { r_ref, h_ref, b } = self.segments[n].shape {
            let big_r = tail_start;
            let h_r = h_ref * (b * (big_r / r_ref).ln()).exp();
            let a = theta.abs();
            let k = quad::integrate_to_infinity(
                |y: f64| Complex64::new(1.0, y / big_r).powf(b) * (-a * y).exp(),
                0.0,
                1.0 / a,
                SEGMENT_TOL,
            )
            .value;
            let oscillatory = Complex64::new(0.0, 1.0) * Complex64::from_polar(1.0, a * big_r) * k * h_r;
            let oscillatory = if theta > 0.0 { oscillatory } else { oscillatory.conj() };
            total += oscillatory - h_r * big_r / (-b - 1.0);
        }
        total
    }

    /// Image under `x ↦ a x`.
    pub fn dilated(&self, a: f64) -> Self {
        let s = a.abs();
        let radii = self.radii.iter().map(|r| r * s).collect();
        let density = self.density.iter().map(|h| h / s).collect();
        let direction = if a < 0.0 { -self.direction.clone() } else { self.direction.clone() };
        RadialRay::new(direction, radii, density).expect("dilation preserves validity")
    }

    /// Density multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        let density = self.density.iter().map(|h| h * c).collect();
        RadialRay::new(self.direction.clone(), self.radii.clone(), density).expect("scaling preserves validity")
    }
}

/// Inverse-CDF sampler for the normalized restriction of a ray density to
/// `r > ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct RaySampler {
    segments: Vec<Segment>,
    cumulative: Vec<f64>,
}

impl RadialRay {
    pub fn sampler(&self, eps: f64) -> RaySampler {
        let mut segments = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for seg in &self.segments {
            if seg.hi <= eps || matches!(seg.shape, Shape::Zero) {
                continue;
            }
            let lo = seg.lo.max(eps);
            acc += seg.shape.moment(0.0, lo, seg.hi);
            segments.push(Segment { lo, ..*seg });
            cumulative.push(acc);
        }
        RaySampler { segments, cumulative }
    }
}

impl RaySampler {
    /// `∫_ε^∞ h(r) dr`.
    pub fn mass(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// The radius at which the normalized mass above `ε` reaches `u ∈ [0, 1]`.
    pub fn radius(&self, u: f64) -> f64 {
        let target = u * self.mass();
        let i = self.cumulative.partition_point(|&c| c < target).min(self.segments.len() - 1);
        let seg = self.segments[i];
        let m = target - if i == 0 { 0.0 } else { self.cumulative[i - 1] };
        let lo = seg.lo;
        let h_lo = seg.shape.eval(lo);
        let r = match seg.shape {
            Shape::Power { b, .. } => {
                let e = b + 1.0;
                if e.abs() < 1e-12 {
                    lo * (m / (h_lo * lo)).exp()
                } else {
                    lo * (1.0 + m * e / (h_lo * lo)).powf(1.0 / e)
                }
            }
            Shape::Linear { slope, .. } => {
                let root = (h_lo * h_lo + 2.0 * slope * m).max(0.0).sqrt();
                lo + 2.0 * m / (h_lo + root)
            }
            Shape::Zero => lo,
        };
        r.clamp(lo, seg.hi)
    }
}

/// Tabulated radial densities along finitely many rays; rays may repeat a
/// direction, in which case their densities add.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RadialTabulated {
    rays: Vec<RadialRay>,
}

impl RadialTabulated {
    pub fn new(rays: Vec<RadialRay>) -> Result<Self> {
        if let Some(first) = rays.first() {
            let dim = first.direction.len();
            if let Some(bad) = rays.iter().find(|r| r.direction.len() != dim) {
                return Err(Error::DimensionMismatch { expected: dim, found: bad.direction.len() });
            }
        }
        Ok(RadialTabulated { rays })
    }

    pub fn rays(&self) -> &[RadialRay] {
        &self.rays
    }

    pub fn dim(&self) -> Option<usize> {
        self.rays.first().map(|r| r.direction.len())
    }

    /// Merges rays sharing a direction onto the union of their grids.
    pub fn consolidated(&self) -> Self {
        let mut groups: Vec<Vec<&RadialRay>> = Vec::new();
        for ray in &self.rays {
            match groups.iter_mut().find(|g| same_direction(&g[0].direction, &ray.direction)) {
                Some(group) => group.push(ray),
                None => groups.push(vec![ray]),
            }
        }
        let rays = groups
            .into_iter()
            .map(|group| {
                if group.len() == 1 {
                    return group[0].clone();
                }
                let mut radii: Vec<f64> = group.iter().flat_map(|r| r.radii.iter().copied()).collect();
                radii.sort_by(f64::total_cmp);
                radii.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
                let density = radii.iter().map(|&r| group.iter().map(|ray| ray.density_at(r)).sum()).collect();
                RadialRay::new(group[0].direction.clone(), radii, density).expect("merged ray is valid")
            })
            .collect();
        RadialTabulated { rays }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum LevyMeasure {
    #[default]
    Zero,
    Discrete(Vec<DiscreteAtom>),
    Radial(RadialTabulated),
    Polar(GammaRep),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevyDiagnostics {
    pub levy_integral: f64,
    pub ok: bool,
}

/// `e^{iu} - 1 - iu`, accurate for small `u`.
fn compensated_exp(u: f64) -> Complex64 {
    let half = (0.5 * u).sin();
    let im = if u.abs() < 1e-2 {
        let u2 = u * u;
        -u * u2 / 6.0 * (1.0 - u2 / 20.0 * (1.0 - u2 / 42.0))
    } else {
        u.sin() - u
    };
    Complex64::new(-2.0 * half * half, im)
}

fn levy_integrand_discrete(x: &Vector, z: &Vector) -> Complex64 {
    let theta = z.dot(x);
    let compensator = if x.norm() <= 1.0 { theta } else { 0.0 };
    Complex64::new(theta.cos() - 1.0, theta.sin() - compensator)
}

impl LevyMeasure {
    pub fn discrete(atoms: Vec<(Vector, f64)>) -> Result<Self> {
        let mut merged: Vec<DiscreteAtom> = Vec::new();
        for (x, mass) in atoms {
            if x.norm() == 0.0 || !x.iter().all(|c| c.is_finite()) {
                return Err(Error::Validation("discrete atoms must be finite and nonzero".into()));
            }
            if !(mass.is_finite() && mass > 0.0) {
                return Err(Error::Validation(format!("atom mass must be > 0, got {mass}")));
            }
            if let Some(first) = merged.first() {
                if first.x.len() != x.len() {
                    return Err(Error::DimensionMismatch { expected: first.x.len(), found: x.len() });
                }
            }
            match merged.iter_mut().find(|a| (&a.x - &x).amax() <= 1e-15 * x.amax()) {
                Some(atom) => atom.mass += mass,
                None => merged.push(DiscreteAtom { x, mass }),
            }
        }
        Ok(if merged.is_empty() { LevyMeasure::Zero } else { LevyMeasure::Discrete(merged) })
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            LevyMeasure::Zero => None,
            LevyMeasure::Discrete(atoms) => atoms.first().map(|a| a.x.len()),
            LevyMeasure::Radial(tab) => tab.dim(),
            LevyMeasure::Polar(rep) => rep.dim(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LevyMeasure::Zero => "zero",
            LevyMeasure::Discrete(_) => "discrete",
            LevyMeasure::Radial(_) => "radial",
            LevyMeasure::Polar(_) => "polar",
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            LevyMeasure::Zero => true,
            LevyMeasure::Discrete(atoms) => atoms.is_empty(),
            LevyMeasure::Radial(tab) => tab.rays.is_empty(),
            LevyMeasure::Polar(rep) => rep.atoms.is_empty(),
        }
    }

    /// `∫ min(1, |x|²) ν(dx)`.
    pub fn validate(&self) -> LevyDiagnostics {
        let levy_integral = match self {
            LevyMeasure::Zero => 0.0,
            LevyMeasure::Discrete(atoms) => atoms.iter().map(|a| a.mass * a.x.norm_squared().min(1.0)).sum(),
            LevyMeasure::Polar(rep) => rep
                .atoms
                .iter()
                .map(|a| a.weight * a.lambda.total_mass() * (1.0 / (2.0 - a.beta) + 1.0 / a.beta))
                .sum(),
            LevyMeasure::Radial(tab) => tab
                .rays
                .iter()
                .map(|r| r.moment_between(2.0, 0.0, 1.0) + r.moment_between(0.0, 1.0, f64::INFINITY))
                .sum(),
        };
        LevyDiagnostics { levy_integral, ok: levy_integral.is_finite() }
    }

    /// `∫_{1<|x|≤a} x ν(dx)`.
    pub fn tail_vector_integral(&self, a: f64, dim: usize) -> Vector {
        self.shell_vector(a, dim)
    }

    /// `∫ x (1_{|x|≤a} - 1_{|x|≤1}) ν(dx)`: the shell `1 < |x| ≤ a` for
    /// `a > 1`, minus the shell `a < |x| ≤ 1` for `a < 1`.
    pub fn shell_vector(&self, a: f64, dim: usize) -> Vector {
        let mut v = Vector::zeros(dim);
        match self {
            LevyMeasure::Zero => {}
            LevyMeasure::Discrete(atoms) => {
                for atom in atoms {
                    let r = atom.x.norm();
                    let inside_new = r <= a;
                    let inside_one = r <= 1.0;
                    if inside_new != inside_one {
                        let sign = if inside_new { 1.0 } else { -1.0 };
                        v.axpy(sign * atom.mass, &atom.x, 1.0);
                    }
                }
            }
            LevyMeasure::Polar(rep) => {
                for atom in &rep.atoms {
                    v.axpy(atom.weight * power_shell(atom.beta, a), &atom.lambda.mean(dim), 1.0);
                }
            }
            LevyMeasure::Radial(tab) => {
                for ray in &tab.rays {
                    let m = if a >= 1.0 { ray.moment_between(1.0, 1.0, a) } else { -ray.moment_between(1.0, a, 1.0) };
                    v.axpy(m, &ray.direction, 1.0);
                }
            }
        }
        v
    }

    /// `∫_{|x|>1} |x|^κ ν(dx)`; `∞` when divergent.
    pub fn abs_moment_outside(&self, kappa: f64) -> f64 {
        match self {
            LevyMeasure::Zero => 0.0,
            LevyMeasure::Discrete(atoms) => atoms
                .iter()
                .filter(|a| a.x.norm() > 1.0)
                .map(|a| a.mass * a.x.norm().powf(kappa))
                .sum(),
            LevyMeasure::Polar(rep) => rep
                .atoms
                .iter()
                .map(|a| {
                    if a.beta > kappa {
                        a.weight * a.lambda.total_mass() / (a.beta - kappa)
                    } else {
                        f64::INFINITY
                    }
                })
                .sum(),
            LevyMeasure::Radial(tab) => {
                tab.rays.iter().map(|r| r.moment_between(kappa, 1.0, f64::INFINITY)).sum()
            }
        }
    }

    /// `∫_{|x|>1} ln|x| ν(dx)`; `∞` when divergent.
    pub fn log_moment_outside(&self) -> f64 {
        match self {
            LevyMeasure::Zero => 0.0,
            LevyMeasure::Discrete(atoms) => {
                atoms.iter().filter(|a| a.x.norm() > 1.0).map(|a| a.mass * a.x.norm().ln()).sum()
            }
            LevyMeasure::Polar(rep) => rep
                .atoms
                .iter()
                .map(|a| a.weight * a.lambda.total_mass() / (a.beta * a.beta))
                .sum(),
            LevyMeasure::Radial(tab) => tab.rays.iter().map(|r| r.log_moment_outside(0.0)).sum(),
        }
    }

    /// `∫_{|x|>1} x ν(dx)` when absolutely convergent.
    pub fn mean_tail(&self, dim: usize) -> Option<Vector> {
        if !self.abs_moment_outside(1.0).is_finite() {
            return None;
        }
        self.weak_mean_tail(dim)
    }

    /// `lim_{a→∞} ∫_{1<|x|≤a} x ν(dx)` when the limit exists.
    pub fn weak_mean_tail(&self, dim: usize) -> Option<Vector> {
        match self {
            LevyMeasure::Zero => Some(Vector::zeros(dim)),
            LevyMeasure::Discrete(atoms) => {
                let mut v = Vector::zeros(dim);
                for atom in atoms.iter().filter(|a| a.x.norm() > 1.0) {
                    v.axpy(atom.mass, &atom.x, 1.0);
                }
                Some(v)
            }
            LevyMeasure::Polar(rep) => {
                let mut v = Vector::zeros(dim);
                for atom in &rep.atoms {
                    let mean = atom.lambda.mean(dim);
                    if atom.beta > 1.0 {
                        v.axpy(atom.weight / (atom.beta - 1.0), &mean, 1.0);
                    } else if mean.amax() > 1e-12 * atom.lambda.total_mass() {
                        return None;
                    }
                }
                Some(v)
            }
            LevyMeasure::Radial(tab) => radial_weak_mean_tail(tab, dim),
        }
    }

    /// `lim_{a→∞} ∫_1^a s^{-1} ds ∫_{|x|>s} x ν(dx)`, which equals
    /// `∫_{|x|>1} x ln|x| ν(dx)`; absent unless `∫_{|x|>1} |x| ν < ∞`.
    pub fn alpha1_domain_tail(&self, dim: usize) -> Option<Vector> {
        if !self.abs_moment_outside(1.0).is_finite() {
            return None;
        }
        let mut v = Vector::zeros(dim);
        match self {
            LevyMeasure::Zero => {}
            LevyMeasure::Discrete(atoms) => {
                for atom in atoms.iter().filter(|a| a.x.norm() > 1.0) {
                    v.axpy(atom.mass * atom.x.norm().ln(), &atom.x, 1.0);
                }
            }
            LevyMeasure::Polar(rep) => {
                for atom in &rep.atoms {
                    let e = atom.beta - 1.0;
                    v.axpy(atom.weight / (e * e), &atom.lambda.mean(dim), 1.0);
                }
            }
            LevyMeasure::Radial(tab) => {
                for ray in &tab.rays {
                    let m = ray.log_moment_outside(1.0);
                    if !m.is_finite() {
                        return None;
                    }
                    v.axpy(m, &ray.direction, 1.0);
                }
            }
        }
        Some(v)
    }

    /// `∫ (e^{i⟨z,x⟩} - 1 - i⟨z,x⟩ 1_{|x|≤1}) ν(dx)`.
    pub fn cumulant(&self, z: &Vector) -> Complex64 {
        match self {
            LevyMeasure::Zero => Complex64::new(0.0, 0.0),
            LevyMeasure::Discrete(atoms) => atoms.iter().map(|a| levy_integrand_discrete(&a.x, z) * a.mass).sum(),
            LevyMeasure::Polar(rep) => rep
                .atoms
                .iter()
                .flat_map(|a| {
                    a.lambda
                        .atoms()
                        .iter()
                        .map(move |(d, c)| stable_cumulant(a.beta, z.dot(d)) * (a.weight * c))
                })
                .sum(),
            LevyMeasure::Radial(tab) => tab.rays.iter().map(|r| r.cumulant(z.dot(&r.direction))).sum(),
        }
    }

    /// `∫ (e^{i⟨z,x⟩} - 1 - i⟨z,x⟩) ν(dx)` without cancellation against a
    /// drift; `None` unless `∫_{|x|>1} |x| ν < ∞` or for tabulated measures.
    pub fn compensated_cumulant(&self, z: &Vector) -> Option<Complex64> {
        self.compensated_cumulant_scaled(z, 1.0, 0.0)
    }

    /// The compensated cumulant at `x z` divided by `|x|^κ`, evaluated so
    /// that neither factor underflows for tiny `x`.
    pub fn compensated_cumulant_scaled(&self, z: &Vector, x: f64, kappa: f64) -> Option<Complex64> {
        if !self.abs_moment_outside(1.0).is_finite() {
            return None;
        }
        let zero = Complex64::new(0.0, 0.0);
        if x == 0.0 {
            return Some(zero);
        }
        let log_x = x.abs().ln();
        match self {
            LevyMeasure::Zero => Some(zero),
            LevyMeasure::Discrete(atoms) => Some(
                atoms
                    .iter()
                    .map(|a| {
                        let theta = z.dot(&a.x);
                        let u = x * theta;
                        let v = if u.abs() < 1e-2 {
                            let u2 = u * u;
                            let re = -0.5 * theta * theta * ((2.0 - kappa) * log_x).exp()
                                * (1.0 - u2 / 12.0 * (1.0 - u2 / 30.0));
                            let im = -x.signum() * theta.powi(3) / 6.0
                                * ((3.0 - kappa) * log_x).exp()
                                * (1.0 - u2 / 20.0 * (1.0 - u2 / 42.0));
                            Complex64::new(re, im)
                        } else {
                            compensated_exp(u) * (-kappa * log_x).exp()
                        };
                        v * a.mass
                    })
                    .sum(),
            ),
            LevyMeasure::Polar(rep) => Some(
                rep.atoms
                    .iter()
                    .flat_map(|a| {
                        a.lambda.atoms().iter().map(move |(d, c)| {
                            let theta = z.dot(d);
                            if theta == 0.0 {
                                return zero;
                            }
                            let magnitude = ((a.beta - kappa) * log_x + a.beta * theta.abs().ln()).exp();
                            let v = Complex64::from_polar(
                                gamma(-a.beta) * magnitude,
                                -FRAC_PI_2 * a.beta * (x * theta).signum(),
                            );
                            v * (a.weight * c)
                        })
                    })
                    .sum(),
            ),
            LevyMeasure::Radial(_) => None,
        }
    }

    /// Image under `x ↦ a x` for `a ≠ 0`.
    pub fn dilated(&self, a: f64) -> Self {
        match self {
            LevyMeasure::Zero => LevyMeasure::Zero,
            LevyMeasure::Discrete(atoms) => LevyMeasure::Discrete(
                atoms.iter().map(|atom| DiscreteAtom { x: &atom.x * a, mass: atom.mass }).collect(),
            ),
            LevyMeasure::Polar(rep) => {
                let mut out = GammaRep::default();
                for atom in &rep.atoms {
                    let lambda = if a < 0.0 { atom.lambda.reflected() } else { atom.lambda.clone() };
                    out.push(PolarAtom { beta: atom.beta, weight: atom.weight * a.abs().powf(atom.beta), lambda });
                }
                LevyMeasure::Polar(out)
            }
            LevyMeasure::Radial(tab) => {
                LevyMeasure::Radial(RadialTabulated { rays: tab.rays.iter().map(|r| r.dilated(a)).collect() })
            }
        }
    }

    /// `c ν` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        match self {
            LevyMeasure::Zero => LevyMeasure::Zero,
            LevyMeasure::Discrete(atoms) => LevyMeasure::Discrete(
                atoms.iter().map(|atom| DiscreteAtom { x: atom.x.clone(), mass: atom.mass * c }).collect(),
            ),
            LevyMeasure::Polar(rep) => LevyMeasure::Polar(GammaRep {
                atoms: rep
                    .atoms
                    .iter()
                    .map(|atom| PolarAtom { weight: atom.weight * c, ..atom.clone() })
                    .collect(),
            }),
            LevyMeasure::Radial(tab) => {
                LevyMeasure::Radial(RadialTabulated { rays: tab.rays.iter().map(|r| r.scaled(c)).collect() })
            }
        }
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        parse_levy(value)
    }

    pub fn to_json(&self) -> Value {
        let vec = |v: &Vector| Value::from(v.iter().copied().collect::<Vec<f64>>());
        match self {
            LevyMeasure::Zero => json!({"kind": "zero"}),
            LevyMeasure::Discrete(atoms) => json!({
                "kind": "discrete",
                "atoms": atoms.iter().map(|a| json!({"x": vec(&a.x), "mass": a.mass})).collect::<Vec<_>>(),
            }),
            LevyMeasure::Polar(rep) => json!({
                "kind": "polar",
                "atoms": rep.atoms.iter().map(|a| json!({
                    "beta": a.beta,
                    "weight": a.weight,
                    "lambda": a.lambda.atoms().iter()
                        .map(|(d, w)| json!({"direction": vec(d), "weight": w}))
                        .collect::<Vec<_>>(),
                })).collect::<Vec<_>>(),
            }),
            LevyMeasure::Radial(tab) => json!({
                "kind": "radial",
                "rays": tab.rays.iter().map(|r| json!({
                    "direction": vec(&r.direction),
                    "radii": r.radii,
                    "density": r.density,
                })).collect::<Vec<_>>(),
            }),
        }
    }
}

/// Weak-mean tail of a tabulated measure from the explicit power-law tails:
/// divergent rays are grouped by growth exponent and must cancel exactly.
fn radial_weak_mean_tail(tab: &RadialTabulated, dim: usize) -> Option<Vector> {
    let mut finite = Vector::zeros(dim);
    // (exponent e of a^e, or 0 for ln a; coefficient vector; scale)
    let mut groups: Vec<(f64, Vector, f64)> = Vec::new();
    for ray in &tab.rays {
        let n = ray.radii.len();
        let last = ray.radii[n - 1];
        let start = last.max(1.0);
        let body = ray.moment_between(1.0, 1.0, start);
        match ray.segments[n].shape {
            Shape::Power { r_ref, h_ref, b } if b + 2.0 >= -EXPONENT_TOL => {
                let e = if (b + 2.0).abs() <= EXPONENT_TOL { 0.0 } else { b + 2.0 };
                let big_r2 = h_ref * r_ref * r_ref;
                // ∫_start^a r h(r) dr = coef·(a^e, or ln a when e = 0) + rest
                let (coef, rest) = if e == 0.0 {
                    (big_r2, -big_r2 * start.ln())
                } else {
                    (big_r2 * r_ref.powf(-e) / e, -big_r2 * (start / r_ref).powf(e) / e)
                };
                finite.axpy(body + rest, &ray.direction, 1.0);
                let contribution = &ray.direction * coef;
                match groups.iter_mut().find(|(ge, _, _)| (ge - e).abs() <= 1e-9) {
                    Some(group) => {
                        group.1 += &contribution;
                        group.2 += coef.abs();
                    }
                    None => groups.push((e, contribution, coef.abs())),
                }
            }
            _ => finite.axpy(ray.moment_between(1.0, 1.0, f64::INFINITY), &ray.direction, 1.0),
        }
    }
    if groups.iter().all(|(_, v, scale)| v.amax() <= 1e-9 * scale) {
        Some(finite)
    } else {
        None
    }
}

fn schema(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}

pub(crate) fn expect_keys(obj: &Map<String, Value>, allowed: &[&str], what: &str) -> Result<()> {
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(schema(format!("unknown field `{key}` in {what}")));
        }
    }
    Ok(())
}

pub(crate) fn field<'a>(obj: &'a Map<String, Value>, key: &str, what: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| schema(format!("{what} is missing `{key}`")))
}

pub(crate) fn as_number(value: &Value, what: &str) -> Result<f64> {
    value.as_f64().ok_or_else(|| schema(format!("{what} must be a number")))
}

pub(crate) fn as_numbers(value: &Value, what: &str) -> Result<Vec<f64>> {
    value
        .as_array()
        .ok_or_else(|| schema(format!("{what} must be an array of numbers")))?
        .iter()
        .map(|v| as_number(v, what))
        .collect()
}

fn as_objects<'a>(value: &'a Value, what: &str) -> Result<Vec<&'a Map<String, Value>>> {
    value
        .as_array()
        .ok_or_else(|| schema(format!("{what} must be an array")))?
        .iter()
        .map(|v| v.as_object().ok_or_else(|| schema(format!("each entry of {what} must be an object"))))
        .collect()
}

fn parse_levy(value: &Value) -> Result<LevyMeasure> {
    let obj = value.as_object().ok_or_else(|| schema("Lévy measure must be an object"))?;
    let kind = field(obj, "kind", "Lévy measure")?
        .as_str()
        .ok_or_else(|| schema("`kind` must be a string"))?;
    match kind {
        "zero" => {
            expect_keys(obj, &["kind"], "Lévy measure")?;
            Ok(LevyMeasure::Zero)
        }
        "discrete" => {
            expect_keys(obj, &["kind", "atoms"], "Lévy measure")?;
            let mut atoms = Vec::new();
            for atom in as_objects(field(obj, "atoms", "discrete measure")?, "atoms")? {
                expect_keys(atom, &["x", "mass"], "discrete atom")?;
                let x = as_numbers(field(atom, "x", "discrete atom")?, "`x`")?;
                let mass = as_number(field(atom, "mass", "discrete atom")?, "`mass`")?;
                atoms.push((Vector::from_vec(x), mass));
            }
            LevyMeasure::discrete(atoms)
        }
        "polar" => {
            expect_keys(obj, &["kind", "atoms"], "Lévy measure")?;
            let mut atoms = Vec::new();
            for atom in as_objects(field(obj, "atoms", "polar measure")?, "atoms")? {
                expect_keys(atom, &["beta", "weight", "lambda"], "polar atom")?;
                let beta = as_number(field(atom, "beta", "polar atom")?, "`beta`")?;
                let weight = as_number(field(atom, "weight", "polar atom")?, "`weight`")?;
                let mut lambda = Vec::new();
                for entry in as_objects(field(atom, "lambda", "polar atom")?, "`lambda`")? {
                    expect_keys(entry, &["direction", "weight"], "spherical atom")?;
                    let d = as_numbers(field(entry, "direction", "spherical atom")?, "`direction`")?;
                    let w = as_number(field(entry, "weight", "spherical atom")?, "`weight`")?;
                    lambda.push((Vector::from_vec(d), w));
                }
                atoms.push(PolarAtom { beta, weight, lambda: SphericalMeasure::new(lambda)? });
            }
            Ok(LevyMeasure::Polar(GammaRep::new(atoms)?))
        }
        "radial" => {
            expect_keys(obj, &["kind", "rays"], "Lévy measure")?;
            let mut rays = Vec::new();
            for ray in as_objects(field(obj, "rays", "radial measure")?, "rays")? {
                expect_keys(ray, &["direction", "radii", "density"], "ray")?;
                let d = as_numbers(field(ray, "direction", "ray")?, "`direction`")?;
                let radii = as_numbers(field(ray, "radii", "ray")?, "`radii`")?;
                let density = as_numbers(field(ray, "density", "ray")?, "`density`")?;
                rays.push(RadialRay::new(Vector::from_vec(d), radii, density)?);
            }
            Ok(LevyMeasure::Radial(RadialTabulated::new(rays)?))
        }
        other => Err(schema(format!("unknown Lévy measure kind `{other}`"))),
    }
}

/// Divided differences of orders `0..=order` with a matching rounding scale:
/// `scales[j][i]` bounds `Σ |k_m w_m|` over the terms of `diffs[j][i]`.
fn divided_differences(u: &[f64], k: &[f64], order: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut diffs = vec![k.to_vec()];
    let mut scales = vec![k.iter().map(|v| v.abs()).collect::<Vec<_>>()];
    for j in 1..=order {
        let prev = &diffs[j - 1];
        let prev_scale = &scales[j - 1];
        let mut next = Vec::with_capacity(prev.len().saturating_sub(1));
        let mut next_scale = Vec::with_capacity(prev.len().saturating_sub(1));
        for i in 0..prev.len().saturating_sub(1) {
            let width = u[i + j] - u[i];
            next.push((prev[i + 1] - prev[i]) / width);
            next_scale.push((prev_scale[i + 1] + prev_scale[i]) / width);
        }
        diffs.push(next);
        scales.push(next_scale);
    }
    (diffs, scales)
}

fn alternates(u: &[f64], k: &[f64], order: usize) -> bool {
    let (diffs, scales) = divided_differences(u, k, order);
    (0..=order).all(|j| {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        diffs[j]
            .iter()
            .zip(&scales[j])
            .all(|(d, s)| sign * d >= -STRUCTURE_TOL * s)
    })
}

/// Monotonicity of order `p` of `k(u) = u^{α+1} h(u)` sampled on `u`.
///
/// Requires `(-1)^j Δ^j k ≥ -tol·scale` for `j = 0..=p`, where `scale` is the
/// rounding bound of each divided difference, and that `k` vanishes at
/// infinity: either `k` at the last node is below `tol·max k`, or the power
/// law through the last two nodes decreases.
pub fn monotone_order_check(u: &[f64], h: &[f64], p: usize, alpha: f64) -> Result<bool> {
    if p < 1 {
        return Err(Error::Domain("monotone order must be >= 1".into()));
    }
    if u.len() != h.len() || u.len() < p + 2 {
        return Err(Error::Domain(format!("order {p} needs at least {} grid points", p + 2)));
    }
    if u.windows(2).any(|w| !(w[1] > w[0])) || !(u[0] > 0.0) {
        return Err(Error::Validation("grid must be positive and strictly increasing".into()));
    }
    let k: Vec<f64> = u.iter().zip(h).map(|(&x, &y)| x.powf(alpha + 1.0) * y).collect();
    if !alternates(u, &k, p) {
        return Ok(false);
    }
    let n = k.len();
    let max = k.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let last = k[n - 1];
    let vanishing = last <= STRUCTURE_TOL * max
        || (k[n - 2] > 0.0 && last > 0.0 && (last / k[n - 2]).ln() / (u[n - 1] / u[n - 2]).ln() < 0.0);
    Ok(vanishing)
}

/// Spacing in `y = ln r` of the grid used by the complete-monotonicity test.
const LINF_SPACING: f64 = 0.1;
const LINF_ORDER: usize = 6;

fn ray_is_linf(ray: &RadialRay) -> bool {
    let radii = ray.radii();
    let n = radii.len();
    let (y0, y1) = (radii[0].ln(), radii[n - 1].ln());
    let native = (y1 - y0) / (n - 1) as f64;
    let uniform = radii
        .iter()
        .enumerate()
        .all(|(i, r)| (r.ln() - (y0 + native * i as f64)).abs() <= 1e-9 * (1.0 + y0.abs().max(y1.abs())));
    // Exact node values when the grid is log-uniform, otherwise resample.
    let (ys, qs): (Vec<f64>, Vec<f64>) = if uniform {
        let stride = ((LINF_SPACING / native).ceil() as usize).max(1);
        (0..n)
            .step_by(stride)
            .map(|i| (radii[i].ln(), radii[i] * ray.density()[i]))
            .unzip()
    } else {
        let m = ((y1 - y0) / LINF_SPACING).ceil() as usize + 1;
        let step = (y1 - y0) / (m - 1) as f64;
        (0..m)
            .map(|i| {
                let y = y0 + step * i as f64;
                (y, y.exp() * ray.density_at(y.exp()))
            })
            .unzip()
    };
    if ys.len() < LINF_ORDER + 2 {
        return false;
    }
    alternates(&ys, &qs, LINF_ORDER)
}

/// Whether the measure has the completely selfdecomposable structure:
/// structurally for Polar, by an order-6 complete-monotonicity test of
/// `q(y) = e^y h(e^y)` per ray for Radial, never for Discrete.
pub fn linf_structure_check(m: &LevyMeasure) -> bool {
    match m {
        LevyMeasure::Zero | LevyMeasure::Polar(_) => true,
        LevyMeasure::Discrete(_) => false,
        LevyMeasure::Radial(tab) => tab.consolidated().rays().iter().all(ray_is_linf),
    }
}

/// `n` log-spaced points from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e1() -> Vector {
        Vector::from_vec(vec![1.0])
    }

    fn polar(beta: f64, weight: f64, lambda: SphericalMeasure) -> LevyMeasure {
        LevyMeasure::Polar(GammaRep::single(beta, weight, lambda).unwrap())
    }

    #[test]
    fn first_moment_from_one_matches_direct_sums() {
        let radii = log_grid(0.05, 30.0, 40);
        let density: Vec<f64> = radii.iter().map(|r| r.powf(-1.7) * (-0.1 * r).exp()).collect();
        let ray = RadialRay::new(e1(), radii, density).unwrap();
        let from_one = ray.first_moment_from_one();
        for a in [0.001, 0.05, 0.3, 0.99, 1.0, 1.01, 4.0, 30.0, 500.0] {
            let direct = if a >= 1.0 { ray.moment_between(1.0, 1.0, a) } else { -ray.moment_between(1.0, a, 1.0) };
            assert!((from_one(a) - direct).abs() <= 1e-13 * direct.abs().max(1.0), "a={a}");
        }
        // 1 below the first node
        let ray = RadialRay::new(e1(), vec![2.0, 3.0, 5.0], vec![1.0, 0.5, 0.1]).unwrap();
        let from_one = ray.first_moment_from_one();
        assert!((from_one(4.0) - ray.moment_between(1.0, 1.0, 4.0)).abs() < 1e-14);
    }

    #[test]
    fn validate_examples() {
        assert_eq!(LevyMeasure::Zero.validate(), LevyDiagnostics { levy_integral: 0.0, ok: true });
        let d = LevyMeasure::discrete(vec![(Vector::from_vec(vec![2.0, 0.0]), 3.0)]).unwrap();
        assert_eq!(d.validate().levy_integral, 3.0);
        let p = polar(1.0, 1.0, SphericalMeasure::point(e1()).unwrap());
        assert!((p.validate().levy_integral - 2.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_and_log_moment_checks() {
        let lambda = SphericalMeasure::point(e1()).unwrap();
        let rep = |betas: &[f64]| {
            GammaRep::new(betas.iter().map(|&b| PolarAtom { beta: b, weight: 1.0, lambda: lambda.clone() }).collect())
                .unwrap()
        };
        assert!(rep(&[1.5]).gamma_moment_check(1.0));
        assert!(!rep(&[0.5]).gamma_moment_check(0.5));
        assert!(!rep(&[0.5, 1.5]).gamma_moment_check(1.0));
        let two = GammaRep::single(0.5, 2.0, lambda.clone()).unwrap();
        assert_eq!(two.log_moment_value(), 8.0);
        assert_eq!(GammaRep::default().log_moment_value(), 0.0);
        assert!((rep(&[1.0, 0.1]).log_moment_value() - 101.0).abs() < 1e-12);
    }

    #[test]
    fn tail_vectors() {
        let p = polar(1.5, 1.0, SphericalMeasure::point(e1()).unwrap());
        assert!((p.weak_mean_tail(1).unwrap()[0] - 2.0).abs() < 1e-15);
        let far = p.tail_vector_integral(1e12, 1)[0];
        assert!((far - 2.0).abs() < 1e-5);
        let slow = polar(0.8, 1.0, SphericalMeasure::point(e1()).unwrap());
        assert!(slow.weak_mean_tail(1).is_none());
        let sym = polar(0.8, 1.0, SphericalMeasure::symmetric(e1()).unwrap());
        assert_eq!(sym.weak_mean_tail(1).unwrap()[0], 0.0);
        assert_eq!(sym.tail_vector_integral(5.0, 1)[0], 0.0);
        let d = LevyMeasure::discrete(vec![(Vector::from_vec(vec![3.0]), 5.0)]).unwrap();
        assert_eq!(d.tail_vector_integral(2.0, 1)[0], 0.0);
    }

    #[test]
    fn alpha1_tails() {
        let p = polar(1.5, 1.0, SphericalMeasure::point(e1()).unwrap());
        assert!((p.alpha1_domain_tail(1).unwrap()[0] - 4.0).abs() < 1e-14);
        let d = LevyMeasure::discrete(vec![(Vector::from_vec(vec![2.0]), 1.0)]).unwrap();
        assert!((d.alpha1_domain_tail(1).unwrap()[0] - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!(polar(0.9, 1.0, SphericalMeasure::point(e1()).unwrap()).alpha1_domain_tail(1).is_none());
    }

    fn stable_cumulant_quadrature(beta: f64, theta: f64) -> Complex64 {
        // direct oscillatory quadrature, tail beyond 2000 dropped with its
        // analytic leading term removed
        let f = |r: f64| {
            let x = r * theta;
            let comp = if r <= 1.0 { x } else { 0.0 };
            let half = (0.5 * x).sin();
            if r < 1e-100 {
                return Complex64::new(0.0, 0.0);
            }
            Complex64::new(-2.0 * half * half, x.sin() - comp) * r.powf(-beta - 1.0)
        };
        let tol = Tolerance::new(1e-13, 1e-12);
        let head = quad::integrate_log_from_zero(f, 1.0, tol).value;
        let mut body = Complex64::new(0.0, 0.0);
        let mut a = 1.0;
        while a < 2e4 {
            body += quad::integrate(f, a, a + 1.0, tol).value;
            a += 1.0;
        }
        // ∫_A^∞ (e^{irθ} - 1) r^{-β-1}: the oscillatory part is O(A^{-β-1}/θ)
        head + body - Complex64::new(a.powf(-beta) / beta, 0.0)
    }

    #[test]
    fn stable_cumulant_matches_quadrature() {
        for &beta in &[0.5, 1.0, 1.5] {
            for &theta in &[0.7, -1.3] {
                let closed = stable_cumulant(beta, theta);
                let numeric = stable_cumulant_quadrature(beta, theta);
                assert!((closed - numeric).norm() < 1e-5, "β={beta} θ={theta}: {closed} vs {numeric}");
            }
        }
    }

    #[test]
    fn radial_cumulant_of_rendered_polar() {
        // one β per direction keeps every rendered ray an exact power law
        let rep = GammaRep::new(vec![
            PolarAtom {
                beta: 0.6,
                weight: 1.0,
                lambda: SphericalMeasure::point(Vector::from_vec(vec![1.0, 0.0])).unwrap(),
            },
            PolarAtom {
                beta: 1.4,
                weight: 0.5,
                lambda: SphericalMeasure::point(Vector::from_vec(vec![0.6, -0.8])).unwrap(),
            },
        ])
        .unwrap();
        let tab = rep.render(&log_grid(1e-3, 1e3, 301)).unwrap();
        let radial = LevyMeasure::Radial(tab);
        let exact = LevyMeasure::Polar(rep);
        for z in [[0.3, 0.1], [-1.0, 2.0], [4.0, 0.5]] {
            let z = Vector::from_vec(z.to_vec());
            let a = radial.cumulant(&z);
            let b = exact.cumulant(&z);
            assert!((a - b).norm() < 1e-9 * b.norm().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn radial_tails_are_exact_for_power_laws() {
        let lambda = SphericalMeasure::point(e1()).unwrap();
        let rep = GammaRep::single(1.5, 1.0, lambda).unwrap();
        let radial = LevyMeasure::Radial(rep.render(&log_grid(0.1, 10.0, 21)).unwrap());
        assert!((radial.weak_mean_tail(1).unwrap()[0] - 2.0).abs() < 1e-12);
        assert!((radial.alpha1_domain_tail(1).unwrap()[0] - 4.0).abs() < 1e-9);
        assert!((radial.validate().levy_integral - (1.0 / 0.5 + 1.0 / 1.5)).abs() < 1e-12);
        let cauchy = GammaRep::single(1.0, 1.0, SphericalMeasure::point(e1()).unwrap()).unwrap();
        let cauchy = LevyMeasure::Radial(cauchy.render(&log_grid(0.1, 10.0, 21)).unwrap());
        assert!(cauchy.weak_mean_tail(1).is_none());
        let sym = GammaRep::single(1.0, 1.0, SphericalMeasure::symmetric(e1()).unwrap()).unwrap();
        let sym = LevyMeasure::Radial(sym.render(&log_grid(0.1, 10.0, 21)).unwrap());
        assert!(sym.weak_mean_tail(1).unwrap()[0].abs() < 1e-12);
    }

    #[test]
    fn monotone_orders() {
        let u: Vec<f64> = (1..=40).map(|i| i as f64 * 0.05).collect();
        let step: Vec<f64> = u.iter().map(|&x| if x <= 1.0 { 1.0 } else { 0.0 }).collect();
        // α = -1 makes k = h
        assert!(monotone_order_check(&u, &step, 1, -1.0).unwrap());
        assert!(!monotone_order_check(&u, &step, 2, -1.0).unwrap());
        let exp: Vec<f64> = u.iter().map(|&x| (-x).exp()).collect();
        assert!(monotone_order_check(&u, &exp, 6, -1.0).unwrap());
        let h: Vec<f64> = u.iter().map(|&x| x.powf(-1.5) * (-x).exp()).collect();
        assert!(monotone_order_check(&u, &h, 6, 0.5).unwrap());
        assert!(!monotone_order_check(&u, &u, 1, -1.0).unwrap());
        assert!(monotone_order_check(&u[..3], &exp[..3], 2, -1.0).is_err());
    }

    #[test]
    fn linf_examples() {
        let lambda = SphericalMeasure::point(e1()).unwrap();
        let rep = GammaRep::new(vec![
            PolarAtom { beta: 0.2, weight: 1.0, lambda: lambda.clone() },
            PolarAtom { beta: 1.8, weight: 3.0, lambda: lambda.clone() },
            PolarAtom { beta: 1.0, weight: 0.5, lambda },
        ])
        .unwrap();
        let grid = log_grid(1e-3, 1e3, 400);
        assert!(linf_structure_check(&LevyMeasure::Radial(rep.render(&grid).unwrap())));
        let power = RadialRay::new(e1(), grid.clone(), grid.iter().map(|r| r.powi(-2)).collect()).unwrap();
        assert!(linf_structure_check(&LevyMeasure::Radial(RadialTabulated::new(vec![power]).unwrap())));
        let tempered =
            RadialRay::new(e1(), grid.clone(), grid.iter().map(|r| r.powi(-2) * (-r).exp()).collect()).unwrap();
        assert!(!linf_structure_check(&LevyMeasure::Radial(RadialTabulated::new(vec![tempered]).unwrap())));
        let d = LevyMeasure::discrete(vec![(e1(), 1.0)]).unwrap();
        assert!(!linf_structure_check(&d));
    }

    #[test]
    fn dilation_of_polar_weights() {
        let p = polar(1.0, 1.0, SphericalMeasure::point(e1()).unwrap());
        let LevyMeasure::Polar(rep) = p.dilated(2.0) else { panic!() };
        assert!((rep.atoms()[0].weight - 2.0).abs() < 1e-15);
        let LevyMeasure::Polar(rep) = p.dilated(-2.0) else { panic!() };
        assert_eq!(rep.atoms()[0].lambda.atoms()[0].0[0], -1.0);
    }

    #[test]
    fn json_round_trip() {
        let lambda = SphericalMeasure::new(vec![
            (Vector::from_vec(vec![0.6, 0.8]), 0.25),
            (Vector::from_vec(vec![-1.0, 0.0]), 0.75),
        ])
        .unwrap();
        let measures = vec![
            LevyMeasure::Zero,
            LevyMeasure::discrete(vec![(Vector::from_vec(vec![1.0, 2.0]), 0.5)]).unwrap(),
            LevyMeasure::Polar(GammaRep::single(0.7, 2.0, lambda).unwrap()),
            LevyMeasure::Radial(
                RadialTabulated::new(vec![RadialRay::new(
                    Vector::from_vec(vec![0.0, 1.0]),
                    vec![0.5, 1.0, 2.0],
                    vec![4.0, 1.0, 0.25],
                )
                .unwrap()])
                .unwrap(),
            ),
        ];
        for m in measures {
            assert_eq!(LevyMeasure::from_json(&m.to_json()).unwrap(), m);
        }
        assert!(matches!(
            LevyMeasure::from_json(&json!({"kind": "zero", "atoms": []})),
            Err(Error::Schema(_))
        ));
        assert!(LevyMeasure::from_json(&json!({"kind": "radial", "rays": [
            {"direction": [1.0], "radii": [2.0, 1.0], "density": [1.0, 1.0]}
        ]}))
        .is_err());
    }
}
