//! The stochastic integral mapping `Φ_f ρ = ℒ(∫_0^∞ f(s) dX_s^{(ρ)})` on
//! Lévy triplets, its inverse on completely selfdecomposable targets, and
//! membership tests for its range and its limit classes.
//!
//! `Φ_f` depends on `f` only through the multiset of its pieces, so every
//! formula below is a sum over [`Piece`]s:
//!
//! * `A ↦ ∫ f(s)² ds · A`
//! * `ν ↦ ∫ ds ∫ 1_B(f(s)x) ν(dx)`
//! * `γ ↦ ∫ f(s) [γ + ∫ x (1_{|f(s)x|≤1} - 1_{|x|≤1}) ν(dx)] ds`
//!
//! For an analytic piece with `α ≥ 1` the last integral does not converge
//! absolutely; there the location is fixed by the requirement that the image
//! has weak mean zero, the characterization of the range of such maps.

use crate::error::{Error, Result};
use crate::idlaw::{add_measures, default_z_panel, panel_distance, Triplet};
use crate::kernels::{Family, KernelSpec, Piece};
use crate::measures::{
    linf_structure_check, log_grid, monotone_order_check, GammaRep, LevyMeasure, PolarAtom, RadialRay,
    RadialTabulated, Vector, DiscreteAtom,
};
use crate::quad::{self, Tolerance};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Value};

/// Cross-check tolerance when the image is computed in closed form.
pub const EXACT_CHECK_TOL: f64 = 1e-6;
/// Cross-check tolerance when the image Lévy measure is tabulated.
pub const TABULATED_CHECK_TOL: f64 = 1e-4;
/// A mean or weak mean counts as zero below `MEAN_ZERO_TOL · max(1, |γ|)`.
pub const MEAN_ZERO_TOL: f64 = 1e-8;
/// Round-trip tolerance of [`invert_map`].
pub const INVERSE_TOL: f64 = 1e-7;
/// Grid on which Polar measures are tabulated for [`range_check`].
pub const RANGE_GRID: (f64, f64, usize) = (1e-3, 1e3, 400);
/// Order of the divided-difference proxy for complete monotonicity.
pub const CM_ORDER: usize = 6;

const GAMMA_TOL: Tolerance = Tolerance::new(1e-14, 1e-10);
const PUSH_TOL: Tolerance = Tolerance::new(1e-300, 1e-10);
const CHECK_TOL: Tolerance = Tolerance::new(1e-13, 1e-10);
const NODES_PER_DECADE: f64 = 100.0;
/// Widest span in `ln t` integrated by a single Gauss rule in a pushforward.
const GAUSS_SPAN: f64 = 0.05;
const GRID_START: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// A list of named pass/fail conditions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    pub conditions: Vec<Condition>,
}

impl Diagnostics {
    fn push(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.conditions.push(Condition { name: name.into(), passed, detail: detail.into() });
    }

    pub fn holds(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Condition> {
        self.conditions.iter().filter(|c| !c.passed).collect()
    }

    fn failure_message(&self) -> String {
        self.failures()
            .iter()
            .map(|c| format!("{} ({})", c.name, c.detail))
            .collect::<Vec<_>>()
            .join("; ")
    }

    pub fn to_json(&self) -> Value {
        json!({
            "holds": self.holds(),
            "conditions": self.conditions.iter().map(|c| json!({
                "name": c.name,
                "passed": c.passed,
                "detail": c.detail,
            })).collect::<Vec<_>>(),
        })
    }
}

/// How the image triplet was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// No approximation: zero Lévy measure, or atoms moved by step pieces.
    Exact,
    /// Γ-multipliers on a Polar measure.
    ExactPolar,
    /// Radial densities computed by quadrature on a log grid.
    PushforwardRadial,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::ExactPolar => "exact-polar",
            Method::PushforwardRadial => "pushforward-radial",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapReport {
    pub domain: Diagnostics,
    pub output: Triplet,
    pub method: Method,
    /// Largest `|C_out(z) - ∫ C_in(f(s)z) ds| / max(1, |C_out(z)|)` over the
    /// panel; `None` when the input is Radial (the quadrature would nest
    /// one quadrature inside another).
    pub cross_check: Option<f64>,
    pub cross_check_tol: f64,
}

impl MapReport {
    pub fn cross_check_ok(&self) -> bool {
        self.cross_check.is_none_or(|r| r <= self.cross_check_tol)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "method": self.method.tag(),
            "input_in_domain": self.domain.holds(),
            "domain": self.domain.to_json(),
            "output": self.output.to_json(),
            "residuals": {
                "cumulant_quadrature": self.cross_check,
                "tolerance": self.cross_check_tol,
                "ok": self.cross_check_ok(),
            },
        })
    }
}

/// `α` that governs the domain: `None` when `f` has compact support.
fn domain_alpha(spec: &KernelSpec) -> Option<f64> {
    if spec.support_end().is_finite() {
        None
    } else {
        spec.max_alpha()
    }
}

fn is_zero_vector(v: &Vector, gamma: &Vector) -> bool {
    v.amax() <= MEAN_ZERO_TOL * gamma.amax().max(1.0)
}

/// Integrability conditions on `ν` alone.
fn levy_conditions(alpha: f64, m: &LevyMeasure, dim: usize, d: &mut Diagnostics) {
    if alpha < 0.0 {
        d.push("alpha < 0", true, "every infinitely divisible law is in the domain");
    } else if alpha == 0.0 {
        let v = m.log_moment_outside();
        d.push("log moment", v.is_finite(), format!("∫_{{|x|>1}} ln|x| ν(dx) = {v}"));
    } else {
        let v = m.abs_moment_outside(alpha);
        d.push("alpha moment", v.is_finite(), format!("∫_{{|x|>1}} |x|^{alpha} ν(dx) = {v}"));
    }
    if alpha == 1.0 {
        let tail = m.alpha1_domain_tail(dim);
        d.push(
            "iterated tail limit",
            tail.is_some(),
            match tail {
                Some(v) => format!("lim ∫_1^a s^-1 ds ∫_{{|x|>s}} x ν(dx) = {:?}", v.as_slice()),
                None => "the limit does not exist".into(),
            },
        );
    }
}

fn mean_condition(t: &Triplet, d: &mut Diagnostics) {
    match t.mean() {
        Some(m) => d.push("mean zero", is_zero_vector(&m, &t.gamma), format!("mean = {:?}", m.as_slice())),
        None => d.push("mean zero", false, "the mean does not exist"),
    }
}

fn weak_mean_condition(t: &Triplet, d: &mut Diagnostics) {
    match t.weak_mean() {
        Some(m) => d.push("weak mean zero", is_zero_vector(&m, &t.gamma), format!("weak mean = {:?}", m.as_slice())),
        None => d.push("weak mean zero", false, "the weak mean does not exist"),
    }
}

/// Whether `t` lies in the domain of `Φ_f`, condition by condition.
pub fn domain_check(spec: &KernelSpec, t: &Triplet) -> Diagnostics {
    let mut d = Diagnostics::default();
    let Some(alpha) = domain_alpha(spec) else {
        d.push("compact support", true, format!("f vanishes beyond s = {}", spec.support_end()));
        return d;
    };
    levy_conditions(alpha, &t.levy, t.dim(), &mut d);
    if alpha >= 1.0 {
        mean_condition(t, &mut d);
    }
    d
}

/// `Φ_f ρ` with the default panel of cross-check points.
pub fn apply_map(spec: &KernelSpec, t: &Triplet) -> Result<MapReport> {
    apply_map_on(spec, t, &default_z_panel(t.dim()))
}

/// `Φ_f ρ`, cross-checked against `∫ C_ρ(f(s)z) ds` at the points `zs`.
pub fn apply_map_on(spec: &KernelSpec, t: &Triplet, zs: &[Vector]) -> Result<MapReport> {
    spec.validate()?;
    let domain = domain_check(spec, t);
    if !domain.holds() {
        return Err(Error::Domain(format!("not in the domain of the mapping: {}", domain.failure_message())));
    }
    let dim = t.dim();
    let pieces = spec.pieces();
    let images = pieces.iter().map(|p| piece_levy(p, &t.levy)).collect::<Result<Vec<_>>>()?;
    let mut levy = LevyMeasure::Zero;
    for image in &images {
        levy = add_measures(&levy, image)?.0;
    }
    let mut gamma = Vector::zeros(dim);
    for (piece, image) in pieces.iter().zip(&images) {
        gamma += piece_gamma(piece, t, image)?;
    }
    let a = &t.a * spec.squared_integral()?;
    let output = Triplet::new(a, levy, gamma)?;

    let method = match &t.levy {
        LevyMeasure::Zero => Method::Exact,
        LevyMeasure::Polar(_) => Method::ExactPolar,
        LevyMeasure::Discrete(_) if matches!(output.levy, LevyMeasure::Discrete(_)) => Method::Exact,
        _ => Method::PushforwardRadial,
    };
    let (cross_check, cross_check_tol) = match (&t.levy, method) {
        (LevyMeasure::Radial(_), _) => (None, TABULATED_CHECK_TOL),
        (_, Method::PushforwardRadial) => (Some(cross_check(&pieces, t, &output, zs)), TABULATED_CHECK_TOL),
        _ => (Some(cross_check(&pieces, t, &output, zs)), EXACT_CHECK_TOL),
    };
    Ok(MapReport { domain, output, method, cross_check, cross_check_tol })
}

/// The Lévy-measure part of `Φ_f` alone.
pub fn apply_map_levy(spec: &KernelSpec, m: &LevyMeasure) -> Result<LevyMeasure> {
    spec.validate()?;
    if let Some(alpha) = domain_alpha(spec) {
        let mut d = Diagnostics::default();
        levy_conditions(alpha, m, m.dim().unwrap_or(1), &mut d);
        if !d.holds() {
            return Err(Error::Domain(format!("Lévy measure not integrable: {}", d.failure_message())));
        }
    }
    let mut out = LevyMeasure::Zero;
    for piece in spec.pieces() {
        out = add_measures(&out, &piece_levy(&piece, m)?)?.0;
    }
    Ok(out)
}

/// `∫ C_in(f(s) z) ds` at every panel point.
pub fn cumulant_by_quadrature(spec: &KernelSpec, t: &Triplet, zs: &[Vector]) -> Vec<Complex64> {
    let pieces = spec.pieces();
    zs.par_iter().map(|z| quadrature_cumulant(&pieces, t, z)).collect()
}

fn quadrature_cumulant(pieces: &[Piece], t: &Triplet, z: &Vector) -> Complex64 {
    // Near s where f(s) → 0 a mean-zero cumulant is o(|f|); evaluating it as
    // drift plus compensated jumps would cancel catastrophically there.
    let mean_zero = t.mean().is_some_and(|m| is_zero_vector(&m, &t.gamma)) && !matches!(t.levy, LevyMeasure::Radial(_));
    // The mean-zero cumulant is divided by |f| so that it cannot underflow
    // where the kernel density is huge.
    pieces
        .iter()
        .map(|p| {
            if mean_zero {
                let gauss = z.dot(&(&t.a * z));
                p.integrate_scaled(
                    1.0,
                    |f| {
                        let jumps = t.levy.compensated_cumulant_scaled(z, f, 1.0).expect("mean exists");
                        jumps - 0.5 * gauss * f.abs()
                    },
                    CHECK_TOL,
                )
            } else {
                p.integrate(|f| t.cumulant(&(z * f)), CHECK_TOL)
            }
        })
        .sum()
}

fn cross_check(pieces: &[Piece], t: &Triplet, output: &Triplet, zs: &[Vector]) -> f64 {
    zs.par_iter()
        .map(|z| {
            let exact = output.cumulant(z);
            (exact - quadrature_cumulant(pieces, t, z)).norm() / exact.norm().max(1.0)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, |acc: f64, r| if r.is_nan() || acc.is_nan() { f64::NAN } else { acc.max(r) })
}

fn piece_levy(piece: &Piece, m: &LevyMeasure) -> Result<LevyMeasure> {
    Ok(match (*piece, m) {
        (_, LevyMeasure::Zero) => LevyMeasure::Zero,
        (Piece::Constant { length, height }, m) => m.dilated(height).scaled(length),
        (Piece::Analytic { family, sign }, LevyMeasure::Polar(rep)) => {
            let mut out = GammaRep::default();
            for atom in rep.atoms() {
                let lambda = if sign > 0.0 { atom.lambda.clone() } else { atom.lambda.reflected() };
                out.push(PolarAtom { beta: atom.beta, weight: atom.weight * family.moment(atom.beta)?, lambda });
            }
            LevyMeasure::Polar(out)
        }
        (Piece::Analytic { family, sign }, LevyMeasure::Discrete(atoms)) => {
            LevyMeasure::Radial(render_discrete(&family, sign, atoms)?)
        }
        (Piece::Analytic { family, sign }, LevyMeasure::Radial(tab)) => {
            LevyMeasure::Radial(push_radial(&family, sign, tab)?)
        }
    })
}

/// Nodes in `t` on which the image of a point mass is tabulated: log-spaced
/// from `1e-8`, up to where `h` is negligible for unbounded families, and
/// accumulating at `t = 1` for bounded ones.
fn kernel_grid(family: &Family) -> Vec<f64> {
    let count = |lo: f64, hi: f64| ((hi / lo).log10() * NODES_PER_DECADE).ceil() as usize + 1;
    match *family {
        Family::Psi { .. } | Family::GStar { .. } => {
            let top = match *family {
                Family::GStar { beta, .. } => 50f64.powf(1.0 / beta),
                _ => 50.0,
            };
            log_grid(GRID_START, top, count(GRID_START, top))
        }
        Family::PhiBar { .. } | Family::Lambda { .. } => {
            let mut nodes = log_grid(GRID_START, 0.9, count(GRID_START, 0.9));
            nodes.pop();
            let gaps = log_grid(1e-12, 0.1, count(1e-12, 0.1));
            nodes.extend(gaps.iter().rev().map(|d| 1.0 - d));
            nodes.push(1.0);
            nodes
        }
    }
}

/// Image of atoms `m δ_x` under `s ↦ sign·f(s)`: density
/// `m h(u/|x|)/|x|` along `sign·x/|x|`.
fn render_discrete(family: &Family, sign: f64, atoms: &[DiscreteAtom]) -> Result<RadialTabulated> {
    let grid = kernel_grid(family);
    let h: Vec<f64> = grid.iter().map(|&t| family.density(t)).collect();
    let rays = atoms
        .iter()
        .map(|atom| {
            let r0 = atom.x.norm();
            RadialRay::new(
                &atom.x * (sign / r0),
                grid.iter().map(|t| t * r0).collect(),
                h.iter().map(|v| atom.mass * v / r0).collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    RadialTabulated::new(rays)
}

/// Image of tabulated rays: `h_out(u) = ∫ h_in(u/t) t^{-1} h_f(t) dt`, on the
/// input grid, split where `u/t` crosses a node.
fn push_radial(family: &Family, sign: f64, tab: &RadialTabulated) -> Result<RadialTabulated> {
    let rays = tab
        .rays()
        .iter()
        .map(|ray| {
            let density: Vec<f64> = ray.radii().par_iter().map(|&u| image_density(family, ray, u)).collect();
            RadialRay::new(ray.direction() * sign, ray.radii().to_vec(), density)
        })
        .collect::<Result<Vec<_>>>()?;
    RadialTabulated::new(rays)
}

fn image_density(family: &Family, ray: &RadialRay, u: f64) -> f64 {
    let upper = family.upper();
    // (1 - t)^{p-1} and (-ln t)^{q-1} are smooth at t = 1 for integer exponents
    let smooth_at_upper = match *family {
        Family::PhiBar { p, .. } => p.fract() == 0.0,
        Family::Lambda { q, .. } => q.fract() == 0.0,
        _ => true,
    };
    ray.sum_over_segments(u, upper, |lo, hi, k| {
        // short spans clear of a rough endpoint are smooth in ln t
        let smooth = lo > 0.0
            && hi.is_finite()
            && (hi / lo).ln() <= GAUSS_SPAN
            && (smooth_at_upper || upper - hi >= 4.0 * (hi - lo));
        if smooth {
            quad::gauss_short(
                &|v: f64| {
                    let t = v.exp();
                    k(t) * family.density(t)
                },
                lo.ln(),
                hi.ln(),
            )
        } else {
            family.integrate_weighted(-1.0, k, lo, hi, PUSH_TOL)
        }
    })
}

/// `(m(β) - m(1)) / (1 - β)` = `∫ t · (t^{β-1} - 1)/(1-β) h(t) dt`, the
/// contribution of one stable profile to [`shell_moment`].
fn polar_shell_coefficient(family: &Family, beta: f64) -> Result<f64> {
    if (beta - 1.0).abs() < 1e-4 {
        // central difference quotient; error O((β - 1)²)
        return Ok(-family.moment_derivative(0.5 * (1.0 + beta))?);
    }
    Ok((family.moment(beta)? - family.moment(1.0)?) / (1.0 - beta))
}

/// `∫ t D(1/t) h(t) dt` with `D(a) = ∫ x (1_{|x|≤a} - 1_{|x|≤1}) ν(dx)`.
fn shell_moment(family: &Family, m: &LevyMeasure, dim: usize) -> Result<Vector> {
    let mut v = Vector::zeros(dim);
    match m {
        LevyMeasure::Zero => {}
        LevyMeasure::Polar(rep) => {
            for atom in rep.atoms() {
                let c = polar_shell_coefficient(family, atom.beta)?;
                v.axpy(atom.weight * c, &atom.lambda.mean(dim), 1.0);
            }
        }
        LevyMeasure::Discrete(atoms) => {
            for atom in atoms {
                let r = atom.x.norm();
                let c = if r <= 1.0 {
                    -family.integrate_weighted(1.0, |_| 1.0, 1.0 / r, f64::INFINITY, GAMMA_TOL)
                } else {
                    family.integrate_weighted(1.0, |_| 1.0, 0.0, 1.0 / r, GAMMA_TOL)
                };
                v.axpy(atom.mass * c, &atom.x, 1.0);
            }
        }
        LevyMeasure::Radial(tab) => {
            for ray in tab.rays() {
                let from_one = ray.first_moment_from_one();
                let shell = |t: f64| from_one(1.0 / t);
                let mut breaks: Vec<f64> = ray.radii().iter().map(|r| 1.0 / r).chain([1.0]).collect();
                breaks.sort_by(f64::total_cmp);
                let mut total = 0.0;
                let mut lo = 0.0;
                for &b in &breaks {
                    total += family.integrate_weighted(1.0, shell, lo, b, GAMMA_TOL);
                    lo = b;
                }
                total += family.integrate_weighted(1.0, shell, lo, f64::INFINITY, GAMMA_TOL);
                v.axpy(total, ray.direction(), 1.0);
            }
        }
    }
    Ok(v)
}

fn piece_gamma(piece: &Piece, t: &Triplet, image: &LevyMeasure) -> Result<Vector> {
    let dim = t.dim();
    match *piece {
        Piece::Constant { length, height } => {
            Ok((&t.gamma + t.levy.shell_vector(1.0 / height.abs(), dim)) * (length * height))
        }
        Piece::Analytic { family, .. } if family.alpha() >= 1.0 => image
            .weak_mean_tail(dim)
            .map(|v| -v)
            .ok_or_else(|| Error::Domain("the image Lévy measure has no weak mean".into())),
        Piece::Analytic { family, sign } => {
            let m1 = family.moment(1.0)?;
            Ok((&t.gamma * m1 + shell_moment(&family, &t.levy, dim)?) * sign)
        }
    }
}

/// The preimage under an analytic `Φ_f` of a target with Polar (or zero)
/// Lévy measure in the matching limit class.
pub fn invert_map(spec: &KernelSpec, target: &Triplet) -> Result<Triplet> {
    spec.validate()?;
    let family = spec
        .family()
        .ok_or_else(|| Error::Unsupported("inversion needs a single analytic kernel family".into()))?;
    let alpha = family.alpha();
    let rep = match &target.levy {
        LevyMeasure::Zero => GammaRep::default(),
        LevyMeasure::Polar(rep) => rep.clone(),
        other => {
            return Err(Error::Unsupported(format!("inversion needs a Polar Lévy measure, got {}", other.kind())))
        }
    };
    let class = limit_class_check(alpha, target);
    if !class.holds() {
        return Err(Error::Range(format!("target is not in the range: {}", class.failure_message())));
    }
    let dim = target.dim();
    let mut pre = GammaRep::default();
    for atom in rep.atoms() {
        pre.push(PolarAtom { weight: atom.weight / family.moment(atom.beta)?, ..atom.clone() });
    }
    let levy = LevyMeasure::Polar(pre);
    let gamma = if alpha >= 1.0 {
        -levy.mean_tail(dim).ok_or_else(|| Error::Range("preimage has no mean".into()))?
    } else {
        (&target.gamma - shell_moment(&family, &levy, dim)?) / family.moment(1.0)?
    };
    let a = &target.a / spec.squared_integral()?;
    let levy = if levy.is_zero() { LevyMeasure::Zero } else { levy };
    let rho = Triplet::new(a, levy, gamma)?;

    let zs = default_z_panel(dim);
    let image = apply_map_on(spec, &rho, &zs)?;
    let residual = panel_distance(&image.output, target, &zs);
    if residual > INVERSE_TOL {
        return Err(Error::Validation(format!("preimage reproduces the target only to {residual:e}")));
    }
    Ok(rho)
}

/// The orbit `Φ_f ρ, Φ_f² ρ, …` up to `n` steps or the first step whose
/// input leaves the domain.
#[derive(Debug)]
pub struct Iteration {
    pub reports: Vec<MapReport>,
    /// The 1-based step that failed, with its error.
    pub stopped: Option<(usize, Error)>,
}

pub fn iterate_map(spec: &KernelSpec, t: &Triplet, n: usize) -> Result<Iteration> {
    iterate_map_on(spec, t, n, &default_z_panel(t.dim()))
}

/// [`iterate_map`] with the cross-check run on the panel `zs`.
pub fn iterate_map_on(spec: &KernelSpec, t: &Triplet, n: usize, zs: &[Vector]) -> Result<Iteration> {
    if n == 0 {
        return Err(Error::Domain("the number of iterations must be at least 1".into()));
    }
    let mut reports: Vec<MapReport> = Vec::with_capacity(n);
    for step in 1..=n {
        let input = reports.last().map_or(t, |r| &r.output);
        match apply_map_on(spec, input, zs) {
            Ok(report) => reports.push(report),
            Err(e) => return Ok(Iteration { reports, stopped: Some((step, e)) }),
        }
    }
    Ok(Iteration { reports, stopped: None })
}

/// The fixed class of `Ψ_α`-type mappings that a given `α` selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitClass {
    /// Completely selfdecomposable laws (`α ≤ 0`).
    Linf,
    /// Γ supported in `(α, 2)` (`0 < α < 1`).
    LinfAlpha2,
    /// Γ supported in `(1, 2)` and weak mean 0 (`α = 1`).
    Linf12WeakMean0,
    /// Γ supported in `(α, 2)` and mean 0 (`1 < α < 2`).
    LinfAlpha2Mean0,
}

impl LimitClass {
    pub fn for_alpha(alpha: f64) -> Option<Self> {
        Some(match alpha {
            a if a <= 0.0 => LimitClass::Linf,
            a if a < 1.0 => LimitClass::LinfAlpha2,
            a if a == 1.0 => LimitClass::Linf12WeakMean0,
            a if a < 2.0 => LimitClass::LinfAlpha2Mean0,
            _ => return None,
        })
    }

    pub fn tag(&self) -> &'static str {
        match self {
            LimitClass::Linf => "L_inf",
            LimitClass::LinfAlpha2 => "L_inf(alpha,2)",
            LimitClass::Linf12WeakMean0 => "L_inf(1,2) with weak mean 0",
            LimitClass::LinfAlpha2Mean0 => "L_inf(alpha,2) with mean 0",
        }
    }
}

/// Membership of `t` in the limit class for `α`.
pub fn limit_class_check(alpha: f64, t: &Triplet) -> Diagnostics {
    let mut d = Diagnostics::default();
    let Some(class) = LimitClass::for_alpha(alpha) else {
        d.push("alpha < 2", false, format!("alpha = {alpha}"));
        return d;
    };
    d.push(
        "completely selfdecomposable",
        linf_structure_check(&t.levy),
        format!("{} Lévy measure", t.levy.kind()),
    );
    if alpha > 0.0 {
        let (passed, detail) = match &t.levy {
            LevyMeasure::Zero => (true, "no jumps".to_string()),
            LevyMeasure::Discrete(_) => (false, "discrete measure".to_string()),
            LevyMeasure::Polar(rep) => {
                let betas: Vec<f64> = rep.atoms().iter().map(|a| a.beta).collect();
                (rep.gamma_moment_check(alpha), format!("indices {betas:?}"))
            }
            LevyMeasure::Radial(tab) => {
                let exponents: Vec<Option<f64>> =
                    tab.consolidated().rays().iter().map(RadialRay::upper_exponent).collect();
                let ok = exponents.iter().all(|b| b.is_none_or(|b| b < -alpha - 1.0 - 1e-9));
                (ok, format!("tail exponents {exponents:?} must be < {}", -alpha - 1.0))
            }
        };
        d.push("index support in (alpha, 2)", passed, detail);
    }
    match class {
        LimitClass::Linf12WeakMean0 => weak_mean_condition(t, &mut d),
        LimitClass::LinfAlpha2Mean0 => mean_condition(t, &mut d),
        _ => {}
    }
    d
}

/// Membership of `t` in the range of `Φ̄_{p,α}` (monotone of order `p`,
/// integer `p`) or of `Ψ_α` (complete monotonicity, tested at order 6).
pub fn range_check(family: &Family, t: &Triplet) -> Result<Diagnostics> {
    let (order, alpha) = match *family {
        Family::PhiBar { p, alpha } if p >= 1.0 && p.fract() == 0.0 => (p as usize, alpha),
        Family::PhiBar { p, .. } => {
            return Err(Error::Unsupported(format!("range test needs an integer order p, got {p}")))
        }
        Family::Psi { alpha } => (CM_ORDER, alpha),
        _ => return Err(Error::Unsupported("range test is defined for the Φ̄ and Ψ families".into())),
    };
    let mut d = Diagnostics::default();
    let rays = match &t.levy {
        LevyMeasure::Zero => Vec::new(),
        LevyMeasure::Discrete(_) => {
            d.push(
                "absolutely continuous Lévy measure",
                false,
                "the image of a point mass is spread along a ray, so a discrete Lévy measure is never in the range",
            );
            return Ok(d);
        }
        LevyMeasure::Polar(rep) => {
            let (lo, hi, n) = RANGE_GRID;
            rep.render(&log_grid(lo, hi, n))?.rays().to_vec()
        }
        LevyMeasure::Radial(tab) => tab.consolidated().rays().to_vec(),
    };
    for (i, ray) in rays.iter().enumerate() {
        let passed = monotone_order_check(ray.radii(), ray.density(), order, alpha)?;
        d.push(
            "monotone of order p",
            passed,
            format!("ray {i} along {:?}: u^(alpha+1) h(u) at order {order}", ray.direction().as_slice()),
        );
    }
    if alpha == 1.0 {
        weak_mean_condition(t, &mut d);
    } else if alpha > 1.0 {
        mean_condition(t, &mut d);
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::idlaw::Matrix;
    use crate::measures::SphericalMeasure;
    use crate::special::gamma;

    fn v1(x: f64) -> Vector {
        Vector::from_vec(vec![x])
    }

    fn polar(atoms: &[(f64, f64)], lambda: &SphericalMeasure, gamma: f64) -> Triplet {
        let rep = GammaRep::new(
            atoms.iter().map(|&(beta, weight)| PolarAtom { beta, weight, lambda: lambda.clone() }).collect(),
        )
        .unwrap();
        Triplet::pure_jump(LevyMeasure::Polar(rep), v1(gamma)).unwrap()
    }

    fn right() -> SphericalMeasure {
        SphericalMeasure::point(v1(1.0)).unwrap()
    }

    fn weights(t: &Triplet) -> Vec<(f64, f64)> {
        let LevyMeasure::Polar(rep) = &t.levy else { panic!("not polar") };
        rep.atoms().iter().map(|a| (a.beta, a.weight)).collect()
    }

    #[test]
    fn domain_examples() {
        let t = polar(&[(0.3, 1.0)], &right(), 0.0);
        assert!(domain_check(&KernelSpec::psi(-1.0), &t).holds());
        let d = domain_check(&KernelSpec::psi(0.5), &t);
        assert!(!d.holds());
        assert_eq!(d.failures()[0].name, "alpha moment");
        // β = 1.8, mean zero: γ = -w/(β - 1)
        let t = polar(&[(1.8, 1.0)], &right(), -1.0 / 0.8);
        assert!(domain_check(&KernelSpec::psi(1.5), &t).holds());
        let shifted = polar(&[(1.8, 1.0)], &right(), 0.0);
        let d = domain_check(&KernelSpec::psi(1.5), &shifted);
        assert_eq!(d.failures().iter().map(|c| c.name.as_str()).collect::<Vec<_>>(), vec!["mean zero"]);
        let step = KernelSpec::step(vec![(1.0, 2.0)]).unwrap();
        assert!(domain_check(&step, &shifted).holds());
    }

    #[test]
    fn polar_multipliers() {
        let t = polar(&[(1.5, 1.0)], &right(), 0.0);
        let out = apply_map(&KernelSpec::psi(0.0), &t).unwrap();
        assert_eq!(out.method, Method::ExactPolar);
        assert!((weights(&out.output)[0].1 - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-14);
        assert!(out.cross_check_ok(), "{:?}", out.cross_check);

        let m = apply_map_levy(&KernelSpec::psi(1.0), &t.levy).unwrap();
        let LevyMeasure::Polar(rep) = m else { panic!() };
        assert!((rep.atoms()[0].weight - std::f64::consts::PI.sqrt()).abs() < 1e-13);
        assert_eq!(apply_map_levy(&KernelSpec::psi(1.0), &LevyMeasure::Zero).unwrap(), LevyMeasure::Zero);
        let LevyMeasure::Polar(rep) = apply_map_levy(&KernelSpec::lambda(2.0, 0.0), &polar(&[(0.5, 1.0)], &right(), 0.0).levy).unwrap() else {
            panic!()
        };
        assert!((rep.atoms()[0].weight - 4.0).abs() < 1e-13);
    }

    #[test]
    fn gaussian_variance_halves() {
        let t = Triplet::gaussian(Matrix::identity(2, 2), Vector::zeros(2)).unwrap();
        let out = apply_map(&KernelSpec::exp(), &t).unwrap();
        assert!((out.output.a.clone() - Matrix::identity(2, 2) * 0.5).amax() < 1e-14);
        assert_eq!(out.method, Method::Exact);
    }

    #[test]
    fn signed_kernels_reflect() {
        let lambda = SphericalMeasure::new(vec![(v1(1.0), 0.7), (v1(-1.0), 0.3)]).unwrap();
        let t = polar(&[(0.6, 1.0), (1.4, 0.5)], &lambda, 0.2);
        let spec = KernelSpec::Concat(vec![
            KernelSpec::step(vec![(0.5, -1.5), (0.3, 2.0)]).unwrap(),
            KernelSpec::Negate(Box::new(KernelSpec::phibar(2.0, -0.5))),
            KernelSpec::psi(0.3),
        ]);
        let out = apply_map(&spec, &t).unwrap();
        assert!(out.cross_check.unwrap() < 1e-8, "{:?}", out.cross_check);
    }

    #[test]
    fn cross_check_across_alpha() {
        let lambda = SphericalMeasure::new(vec![(v1(1.0), 0.8), (v1(-1.0), 0.2)]).unwrap();
        for alpha in [-1.0, -0.5, 0.0, 0.5, 1.5] {
            let mut t = polar(&[(1.6, 1.0), (1.9, 0.4)], &lambda, 0.0);
            if alpha > 1.0 {
                t.gamma = -t.levy.mean_tail(1).unwrap();
            }
            for spec in [KernelSpec::psi(alpha), KernelSpec::phibar(2.0, alpha)] {
                let out = apply_map(&spec, &t).unwrap();
                assert!(out.cross_check.unwrap() < 1e-6, "alpha={alpha}: {:?}", out.cross_check);
            }
        }
    }

    #[test]
    fn point_mass_image() {
        let t = Triplet::pure_jump(LevyMeasure::discrete(vec![(v1(2.0), 1.5)]).unwrap(), v1(0.1)).unwrap();
        let out = apply_map(&KernelSpec::psi(0.0), &t).unwrap();
        assert_eq!(out.method, Method::PushforwardRadial);
        let LevyMeasure::Radial(tab) = &out.output.levy else { panic!() };
        let ray = &tab.rays()[0];
        for &u in &[0.01, 0.5, 2.0, 7.0] {
            // c (u/r0)^{-1} e^{-u/r0} / r0
            let expected = 1.5 * (u / 2.0f64).powi(-1) * (-u / 2.0).exp() / 2.0;
            assert!((ray.density_at(u) - expected).abs() < 1e-3 * expected, "u={u}");
        }
        assert!(out.cross_check_ok(), "{:?}", out.cross_check);
        let range = range_check(&Family::Psi { alpha: 0.0 }, &out.output).unwrap();
        assert!(range.holds(), "{range:?}");
    }

    #[test]
    fn bounded_family_on_point_mass() {
        let t = Triplet::pure_jump(LevyMeasure::discrete(vec![(v1(-0.5), 2.0), (v1(3.0), 0.25)]).unwrap(), v1(0.0))
            .unwrap();
        for spec in [KernelSpec::phibar(1.0, -1.0), KernelSpec::phibar(3.0, 0.5), KernelSpec::lambda(2.0, 0.0)] {
            let out = apply_map(&spec, &t).unwrap();
            assert!(out.cross_check_ok(), "{spec:?}: {:?}", out.cross_check);
        }
    }

    #[test]
    fn step_kernel_moves_atoms() {
        let t = Triplet::pure_jump(LevyMeasure::discrete(vec![(v1(0.8), 1.0)]).unwrap(), v1(0.5)).unwrap();
        let out = apply_map(&KernelSpec::step(vec![(2.0, 1.5)]).unwrap(), &t).unwrap();
        assert_eq!(out.method, Method::Exact);
        assert!(out.cross_check.unwrap() < 1e-14);
        let LevyMeasure::Discrete(atoms) = &out.output.levy else { panic!() };
        assert!((atoms[0].x[0] - 1.2).abs() < 1e-15 && (atoms[0].mass - 2.0).abs() < 1e-15);
    }

    #[test]
    fn radial_input_matches_polar() {
        // the same stable profile as Polar and as a table
        let t = polar(&[(0.8, 1.0)], &right(), 0.3);
        let LevyMeasure::Polar(rep) = &t.levy else { panic!() };
        let tab = rep.render(&log_grid(1e-3, 1e3, 200)).unwrap();
        let tr = Triplet::pure_jump(LevyMeasure::Radial(tab), v1(0.3)).unwrap();
        for spec in [KernelSpec::psi(0.2), KernelSpec::phibar(2.0, -0.5)] {
            let exact = apply_map(&spec, &t).unwrap();
            let tabulated = apply_map(&spec, &tr).unwrap();
            assert_eq!(tabulated.method, Method::PushforwardRadial);
            let zs = default_z_panel(1);
            let dist = panel_distance(&tabulated.output, &exact.output, &zs);
            assert!(dist < 1e-6, "{spec:?}: {dist}");
        }
    }

    #[test]
    fn inversion_round_trips() {
        let lambda = SphericalMeasure::new(vec![(v1(1.0), 0.6), (v1(-1.0), 0.4)]).unwrap();
        let t = polar(&[(1.5, (std::f64::consts::PI).sqrt() / 2.0)], &right(), 0.0);
        let rho = invert_map(&KernelSpec::psi(0.0), &t).unwrap();
        assert!((weights(&rho)[0].1 - 1.0).abs() < 1e-14);

        let bad = polar(&[(0.9, 1.0)], &right(), 0.0);
        assert!(matches!(invert_map(&KernelSpec::psi(1.0), &bad), Err(Error::Range(_))));

        for alpha in [-1.0, 0.0, 0.5, 1.0, 1.5] {
            let mut target = polar(&[(1.6, 0.7), (1.85, 1.1)], &lambda, 0.4);
            if alpha >= 1.0 {
                target.gamma = -target.levy.weak_mean_tail(1).unwrap();
            }
            for spec in [KernelSpec::psi(alpha), KernelSpec::phibar(1.5, alpha)] {
                let rho = invert_map(&spec, &target).unwrap();
                let back = apply_map(&spec, &rho).unwrap().output;
                assert!(panel_distance(&back, &target, &default_z_panel(1)) < 1e-9, "alpha={alpha}");
            }
        }
    }

    #[test]
    fn iteration() {
        let t = polar(&[(0.7, 2.0)], &right(), 0.0);
        let orbit = iterate_map(&KernelSpec::psi(0.0), &t, 2).unwrap();
        assert!(orbit.stopped.is_none());
        assert!((weights(&orbit.reports[1].output)[0].1 - 2.0 * gamma(0.7).powi(2)).abs() < 1e-12);
        let once = iterate_map(&KernelSpec::psi(0.0), &t, 1).unwrap();
        assert_eq!(once.reports[0], apply_map(&KernelSpec::psi(0.0), &t).unwrap());
        // a nonzero mean leaves the domain at the first step
        let off = polar(&[(1.8, 1.0)], &right(), 3.0);
        let orbit = iterate_map(&KernelSpec::psi(1.5), &off, 3).unwrap();
        assert!(orbit.reports.is_empty());
        assert_eq!(orbit.stopped.as_ref().unwrap().0, 1);
    }

    #[test]
    fn limit_class_examples() {
        assert!(!limit_class_check(0.7, &polar(&[(0.5, 1.0)], &right(), 0.0)).holds());
        assert!(limit_class_check(1.0, &polar(&[(1.5, 1.0)], &right(), -2.0)).holds());
        assert!(!limit_class_check(1.0, &polar(&[(1.5, 1.0)], &right(), 0.0)).holds());
        assert!(limit_class_check(1.5, &polar(&[(1.8, 1.0)], &right(), -1.0 / 0.8)).holds());
        assert_eq!(LimitClass::for_alpha(-0.5), Some(LimitClass::Linf));
        assert_eq!(LimitClass::for_alpha(1.0), Some(LimitClass::Linf12WeakMean0));
        assert_eq!(LimitClass::for_alpha(2.0), None);
    }

    #[test]
    fn range_examples() {
        let t = Triplet::pure_jump(LevyMeasure::discrete(vec![(v1(1.0), 1.0)]).unwrap(), v1(0.0)).unwrap();
        assert!(!range_check(&Family::PhiBar { p: 1.0, alpha: -1.0 }, &t).unwrap().holds());
        let p = polar(&[(0.6, 1.0), (1.3, 0.5)], &right(), 0.0);
        assert!(range_check(&Family::Psi { alpha: 0.5 }, &p).unwrap().holds());
        assert!(!range_check(&Family::Psi { alpha: 0.9 }, &p).unwrap().holds());
        assert!(matches!(range_check(&Family::PhiBar { p: 1.5, alpha: 0.0 }, &p), Err(Error::Unsupported(_))));
    }
}
