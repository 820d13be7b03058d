//! Monte Carlo oracle: samples of `∫_0^T f(s) dX_s` for the Lévy process
//! with `ℒ(X_1) = ρ`, and empirical characteristic function comparisons.
//!
//! Jumps with `|x| > ε` are simulated at exact Poisson times; smaller jumps
//! are dropped and compensated in the drift. The Gaussian and drift parts of
//! the integral are Gaussian with mean `γ_ε ∫f` and covariance `A ∫f²`, and
//! are drawn in one step.

use crate::error::{Error, Result};
use crate::idlaw::{Matrix, Triplet};
use crate::kernels::{Family, KernelSpec, Piece, StepKernel};
use crate::quad::Tolerance;
use crate::mapping::domain_check;
use crate::measures::{log_grid, LevyMeasure, RaySampler, Vector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde_json::{json, Value};

/// Infinite-support kernels are truncated where `|f| < TRUNCATION`.
pub const TRUNCATION: f64 = 1e-6;
/// Largest standardized ECF deviation that still passes.
pub const ECF_THRESHOLD: f64 = 4.0;
pub const MIN_ECF_PATHS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MCConfig {
    /// `None` chooses the support end, or the time where `|f| < 1e-6`.
    pub horizon: Option<f64>,
    pub n_paths: usize,
    /// Jumps with `|x| ≤ jump_cutoff` are compensated in the drift.
    pub jump_cutoff: f64,
    pub master_seed: u64,
}

impl MCConfig {
    pub fn new(n_paths: usize, master_seed: u64) -> Self {
        MCConfig { horizon: None, n_paths, jump_cutoff: 1e-3, master_seed }
    }

    fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::Domain("at least one path is needed".into()));
        }
        if !(self.jump_cutoff > 0.0 && self.jump_cutoff <= 1.0) {
            return Err(Error::Domain(format!("jump cutoff must lie in (0, 1], got {}", self.jump_cutoff)));
        }
        if let Some(t) = self.horizon {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Domain(format!("horizon must be positive and finite, got {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub samples: Vec<Vector>,
    pub horizon: f64,
    /// `ν(|x| > ε)`.
    pub jump_rate: f64,
    /// `∫_{|x|≤ε} |x|² ν(dx)`, the variance left out per unit time.
    pub small_jump_variance: f64,
}

/// Time after which `|f| < TRUNCATION`, or the support end.
fn auto_horizon(spec: &KernelSpec) -> f64 {
    match spec {
        _ if spec.support_end().is_finite() => spec.support_end(),
        KernelSpec::Analytic(family) => family.tail(TRUNCATION),
        KernelSpec::Negate(inner) => auto_horizon(inner),
        KernelSpec::Concat(parts) => {
            let (last, head) = parts.split_last().expect("validated concat is non-empty");
            head.iter().map(KernelSpec::support_end).sum::<f64>() + auto_horizon(last)
        }
        KernelSpec::Step(_) | KernelSpec::Reverse(_) => unreachable!("finite support"),
    }
}

/// `(∫_0^T f ds, ∫_0^T f² ds)`.
fn horizon_integrals(spec: &KernelSpec, horizon: f64) -> Result<(f64, f64)> {
    let (plus1, minus1) = spec.beta_moment(1.0)?;
    let f2 = spec.squared_integral()?;
    if horizon >= spec.support_end() {
        return Ok((plus1 - minus1, f2));
    }
    // beyond T only the infinite last piece remains: ∫_T^∞ f^k = ∫_0^{|f(T)|} t^k h(t) dt
    let Some(Piece::Analytic { family, sign }) = spec.pieces().last().copied() else {
        unreachable!("infinite support ends with an analytic piece")
    };
    let t_end = spec.kernel_value(horizon).abs();
    let tail1 = family.partial_moment(1.0, 0.0, t_end);
    let tail2 = family.partial_moment(2.0, 0.0, t_end);
    Ok((plus1 - minus1 - sign * tail1, f2 - tail2))
}

fn small_jump_variance(m: &LevyMeasure, eps: f64) -> f64 {
    match m {
        LevyMeasure::Zero => 0.0,
        LevyMeasure::Discrete(atoms) => atoms
            .iter()
            .filter(|a| a.x.norm() <= eps)
            .map(|a| a.mass * a.x.norm_squared())
            .sum(),
        LevyMeasure::Polar(rep) => rep
            .atoms()
            .iter()
            .map(|a| a.weight * a.lambda.total_mass() * eps.powf(2.0 - a.beta) / (2.0 - a.beta))
            .sum(),
        LevyMeasure::Radial(tab) => tab.rays().iter().map(|r| r.moment_between(2.0, 0.0, eps)).sum(),
    }
}

/// How a jump is drawn once its component is chosen.
enum Component {
    Atom(Vector),
    /// Radius `ε U^{-1/β}` along `direction`.
    Stable { direction: Vector, beta: f64 },
    Ray { direction: Vector, sampler: RaySampler },
}

struct JumpTable {
    components: Vec<Component>,
    cumulative: Vec<f64>,
    eps: f64,
}

impl JumpTable {
    fn new(m: &LevyMeasure, eps: f64) -> Result<Self> {
        let mut components = Vec::new();
        let mut weights = Vec::new();
        match m {
            LevyMeasure::Zero => {}
            LevyMeasure::Discrete(atoms) => {
                for atom in atoms.iter().filter(|a| a.x.norm() > eps) {
                    components.push(Component::Atom(atom.x.clone()));
                    weights.push(atom.mass);
                }
            }
            LevyMeasure::Polar(rep) => {
                for atom in rep.atoms() {
                    for (direction, c) in atom.lambda.atoms() {
                        components.push(Component::Stable { direction: direction.clone(), beta: atom.beta });
                        weights.push(atom.weight * c * eps.powf(-atom.beta) / atom.beta);
                    }
                }
            }
            LevyMeasure::Radial(tab) => {
                for ray in tab.rays() {
                    let sampler = ray.sampler(eps);
                    weights.push(sampler.mass());
                    components.push(Component::Ray { direction: ray.direction().clone(), sampler });
                }
            }
        }
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in weights {
            acc += w;
            cumulative.push(acc);
        }
        if !acc.is_finite() {
            return Err(Error::Divergent(format!("ν(|x| > {eps}) is infinite")));
        }
        Ok(JumpTable { components, cumulative, eps })
    }

    fn rate(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> Vector {
        let target = rng.random::<f64>() * self.rate();
        let i = self.cumulative.partition_point(|&c| c <= target).min(self.components.len() - 1);
        let u = 1.0 - rng.random::<f64>();
        match &self.components[i] {
            Component::Atom(x) => x.clone(),
            Component::Stable { direction, beta } => direction * (self.eps * u.powf(-1.0 / beta)),
            Component::Ray { direction, sampler } => direction * sampler.radius(u),
        }
    }
}

const TABLE_NODES_PER_DECADE: f64 = 200.0;
const TABLE_TOL: Tolerance = Tolerance::new(1e-300, 1e-13);

/// `f` of one family for repeated evaluation: closed form when available,
/// otherwise cubic Hermite interpolation of `ln t` against `s = g(t)` with
/// the exact slopes `-1/(t h(t))`, and root finding outside the table.
struct FamilyTable {
    family: Family,
    closed: bool,
    /// ascending, `ln s` at the nodes
    s: Vec<f64>,
    x: Vec<f64>,
    slope: Vec<f64>,
}

impl FamilyTable {
    fn new(family: Family) -> Self {
        let closed = family.value_closed(0.5 * family.support_end().min(1.0)).is_some();
        if closed {
            return FamilyTable { family, closed, s: Vec::new(), x: Vec::new(), slope: Vec::new() };
        }
        let count = |lo: f64, hi: f64| ((hi / lo).log10() * TABLE_NODES_PER_DECADE).ceil() as usize + 1;
        let t: Vec<f64> = match family {
            Family::PhiBar { .. } | Family::Lambda { .. } => {
                // near t = 1 the spacing follows 1 - t
                let mut nodes = log_grid(1e-12, 0.5, count(1e-12, 0.5));
                nodes.pop();
                let gaps = log_grid(1e-12, 0.5, count(1e-12, 0.5));
                nodes.extend(gaps.iter().rev().map(|d| 1.0 - d));
                nodes
            }
            Family::GStar { beta, .. } => log_grid(1e-12, 50f64.powf(1.0 / beta), count(1e-12, 50f64.powf(1.0 / beta))),
            Family::Psi { .. } => log_grid(1e-12, 50.0, count(1e-12, 50.0)),
        };
        // g at each node by accumulating the short integrals downwards
        let n = t.len();
        let mut g = vec![0.0; n];
        g[n - 1] = family.tail(t[n - 1]);
        for i in (0..n - 1).rev() {
            g[i] = g[i + 1] + family.integrate_weighted(0.0, |_| 1.0, t[i], t[i + 1], TABLE_TOL);
        }
        // d ln t / d ln s
        let slope: Vec<f64> = t.iter().zip(&g).map(|(&ti, &gi)| -gi / (ti * family.density(ti))).collect();
        FamilyTable {
            family,
            closed,
            s: g.into_iter().rev().map(f64::ln).collect(),
            x: t.iter().rev().map(|ti| ti.ln()).collect(),
            slope: slope.into_iter().rev().collect(),
        }
    }

    fn value(&self, s: f64) -> f64 {
        if self.closed || self.s.is_empty() || s <= 0.0 {
            return self.family.value(s);
        }
        let u = s.ln();
        if u <= self.s[0] || u >= *self.s.last().unwrap() {
            return self.family.value(s);
        }
        let i = self.s.partition_point(|&v| v < u);
        let (u0, u1) = (self.s[i - 1], self.s[i]);
        let w = u1 - u0;
        let tau = (u - u0) / w;
        let (t2, t3) = (tau * tau, tau * tau * tau);
        let x = (2.0 * t3 - 3.0 * t2 + 1.0) * self.x[i - 1]
            + (t3 - 2.0 * t2 + tau) * w * self.slope[i - 1]
            + (-2.0 * t3 + 3.0 * t2) * self.x[i]
            + (t3 - t2) * w * self.slope[i];
        x.exp()
    }
}

/// A [`KernelSpec`] prepared for many evaluations of `f(s)`.
enum FastKernel {
    Family(FamilyTable),
    Step(StepKernel),
    /// parts with their start times and lengths
    Concat(Vec<(f64, f64, FastKernel)>),
    Negate(Box<FastKernel>),
    Reverse(Box<FastKernel>, f64),
}

impl FastKernel {
    fn new(spec: &KernelSpec) -> Self {
        match spec {
            KernelSpec::Analytic(family) => FastKernel::Family(FamilyTable::new(*family)),
            KernelSpec::Step(step) => FastKernel::Step(step.clone()),
            KernelSpec::Concat(parts) => {
                let mut start = 0.0;
                let mut out = Vec::with_capacity(parts.len());
                for part in parts {
                    let len = part.support_end();
                    out.push((start, len, FastKernel::new(part)));
                    start += len;
                }
                FastKernel::Concat(out)
            }
            KernelSpec::Negate(inner) => FastKernel::Negate(Box::new(FastKernel::new(inner))),
            KernelSpec::Reverse(inner) => FastKernel::Reverse(Box::new(FastKernel::new(inner)), inner.support_end()),
        }
    }

    fn value(&self, s: f64) -> f64 {
        let s = s.max(0.0);
        match self {
            FastKernel::Family(table) => table.value(s),
            FastKernel::Step(step) => step.value(s),
            FastKernel::Concat(parts) => {
                for (start, len, part) in parts {
                    if s < start + len {
                        return part.value(s - start);
                    }
                }
                0.0
            }
            FastKernel::Negate(inner) => -inner.value(s),
            FastKernel::Reverse(inner, end) => {
                if s >= *end {
                    0.0
                } else {
                    inner.value(end - s)
                }
            }
        }
    }
}

/// Independent samples of `∫_0^T f(s) dX_s`; bit-identical for a given
/// configuration whatever the thread count.
pub fn sample_path_integral(spec: &KernelSpec, t: &Triplet, cfg: &MCConfig) -> Result<Simulation> {
    cfg.validate()?;
    spec.validate()?;
    let domain = domain_check(spec, t);
    if !domain.holds() {
        let failed: Vec<&str> = domain.failures().iter().map(|c| c.name.as_str()).collect();
        return Err(Error::Domain(format!("not in the domain of the mapping: {}", failed.join(", "))));
    }
    if !spec.support_end().is_finite() && spec.max_alpha().is_some_and(|a| a >= 1.0) {
        return Err(Error::Unsupported(
            "simulation of improper integrals with alpha >= 1 needs centering and is not implemented".into(),
        ));
    }
    let required = auto_horizon(spec);
    let horizon = match cfg.horizon {
        Some(h) if spec.support_end().is_finite() && h < required => {
            return Err(Error::Domain(format!("horizon {h} is shorter than the support end {required}")))
        }
        Some(h) => h,
        None => required,
    };
    let (f1, f2) = horizon_integrals(spec, horizon)?;
    let dim = t.dim();
    let eps = cfg.jump_cutoff;
    let drift = (&t.gamma + t.levy.shell_vector(eps, dim)) * f1;
    let root = psd_root(&t.a) * f2.max(0.0).sqrt();
    let has_gaussian = root.amax() > 0.0;
    let jumps = JumpTable::new(&t.levy, eps)?;
    let jump_rate = jumps.rate();
    let kernel = if jump_rate > 0.0 { Some(FastKernel::new(spec)) } else { None };
    let poisson = if jump_rate > 0.0 { Some(Poisson::new(jump_rate * horizon).map_err(|e| Error::Domain(e.to_string()))?) } else { None };

    let samples = (0..cfg.n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.master_seed);
            rng.set_stream(path as u64);
            let mut y = drift.clone();
            if has_gaussian {
                let z = Vector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
                y += &root * z;
            }
            if let (Some(poisson), Some(kernel)) = (&poisson, &kernel) {
                let count = poisson.sample(&mut rng) as u64;
                for _ in 0..count {
                    let s = horizon * rng.random::<f64>();
                    let jump = jumps.sample(&mut rng);
                    y.axpy(kernel.value(s), &jump, 1.0);
                }
            }
            y
        })
        .collect();
    Ok(Simulation { samples, horizon, jump_rate, small_jump_variance: small_jump_variance(&t.levy, eps) })
}

/// `L` with `L Lᵀ = A` for a positive semidefinite `A`.
fn psd_root(a: &Matrix) -> Matrix {
    let eigen = a.clone().symmetric_eigen();
    let sqrt = eigen.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eigen.eigenvectors * Matrix::from_diagonal(&sqrt)
}

/// `N^{-1} Σ_k e^{i⟨z, Y_k⟩}`, summed in sample order.
pub fn empirical_cf(samples: &[Vector], z: &Vector) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    for y in samples {
        let theta = z.dot(y);
        sum += Complex64::new(theta.cos(), theta.sin());
    }
    sum / samples.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct EcfPoint {
    pub z: Vector,
    pub empirical: Complex64,
    /// The analytic CF, or the second sample's ECF in a two-sample report.
    pub reference: Complex64,
    pub std_error: f64,
    /// `max(|Δ Re|, |Δ Im|) / std_error`.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ECFReport {
    pub n_paths: usize,
    pub points: Vec<EcfPoint>,
    pub max_deviation: f64,
    pub passed: bool,
}

impl ECFReport {
    fn from_points(n_paths: usize, points: Vec<EcfPoint>) -> Self {
        let max_deviation = points
            .iter()
            .map(|p| p.deviation)
            .fold(0.0, |acc: f64, d| if d.is_nan() || acc.is_nan() { f64::NAN } else { acc.max(d) });
        ECFReport { n_paths, points, max_deviation, passed: max_deviation <= ECF_THRESHOLD }
    }

    pub fn to_json(&self) -> Value {
        let c = |v: Complex64| json!([v.re, v.im]);
        json!({
            "n_paths": self.n_paths,
            "max_deviation": self.max_deviation,
            "threshold": ECF_THRESHOLD,
            "passed": self.passed,
            "points": self.points.iter().map(|p| json!({
                "z": p.z.iter().copied().collect::<Vec<f64>>(),
                "empirical": c(p.empirical),
                "reference": c(p.reference),
                "std_error": p.std_error,
                "deviation": p.deviation,
            })).collect::<Vec<_>>(),
        })
    }
}

fn deviation(diff: Complex64, se: f64) -> f64 {
    let d = diff.re.abs().max(diff.im.abs());
    if se > 0.0 {
        d / se
    } else if d <= 1e-12 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Empirical CF against `exp(C(z))` of an analytic triplet, with standard
/// error `sqrt((1 - |φ̂|²)/N)`.
pub fn ecf_compare(samples: &[Vector], analytic: &Triplet, zs: &[Vector]) -> Result<ECFReport> {
    let n = samples.len();
    if n < MIN_ECF_PATHS {
        return Err(Error::Domain(format!("ECF comparison needs at least {MIN_ECF_PATHS} samples, got {n}")));
    }
    let points = zs
        .par_iter()
        .map(|z| {
            let empirical = empirical_cf(samples, z);
            let reference = analytic.cumulant(z).exp();
            let std_error = ((1.0 - empirical.norm_sqr()).max(0.0) / n as f64).sqrt();
            EcfPoint { z: z.clone(), empirical, reference, std_error, deviation: deviation(empirical - reference, std_error) }
        })
        .collect();
    Ok(ECFReport::from_points(n, points))
}

/// Two independent samples of what should be the same law.
pub fn ecf_compare_samples(a: &[Vector], b: &[Vector], zs: &[Vector]) -> Result<ECFReport> {
    let (na, nb) = (a.len(), b.len());
    if na.min(nb) < MIN_ECF_PATHS {
        return Err(Error::Domain(format!("ECF comparison needs at least {MIN_ECF_PATHS} samples per side")));
    }
    let points = zs
        .par_iter()
        .map(|z| {
            let empirical = empirical_cf(a, z);
            let reference = empirical_cf(b, z);
            let var = (1.0 - empirical.norm_sqr()).max(0.0) / na as f64
                + (1.0 - reference.norm_sqr()).max(0.0) / nb as f64;
            let std_error = var.sqrt();
            EcfPoint { z: z.clone(), empirical, reference, std_error, deviation: deviation(empirical - reference, std_error) }
        })
        .collect();
    Ok(ECFReport::from_points(na.min(nb), points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::idlaw::default_z_panel;
    use crate::mapping::apply_map;
    use crate::measures::{GammaRep, RadialRay, RadialTabulated, SphericalMeasure};

    fn v1(x: f64) -> Vector {
        Vector::from_vec(vec![x])
    }

    #[test]
    fn tabulated_kernel_matches_exact_values() {
        let specs = [
            KernelSpec::phibar(2.0, -0.5),
            KernelSpec::phibar(0.5, 0.3),
            KernelSpec::psi(0.5),
            KernelSpec::lambda(2.5, -0.7),
            KernelSpec::gstar(0.2, 1.5),
            KernelSpec::Concat(vec![
                KernelSpec::Negate(Box::new(KernelSpec::psi(-0.5))),
                KernelSpec::step(vec![(0.5, 2.0)]).unwrap(),
                KernelSpec::psi(-1.0),
            ]),
        ];
        for spec in &specs {
            let fast = FastKernel::new(spec);
            let end = auto_horizon(spec);
            for k in 0..200 {
                let s = end * (k as f64 + 0.37) / 200.0;
                let (a, b) = (fast.value(s), spec.kernel_value(s));
                assert!((a - b).abs() <= 1e-9 * b.abs().max(1e-6), "{spec:?} s={s}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn deterministic_drift() {
        let t = Triplet::gaussian(Matrix::zeros(1, 1), v1(0.7)).unwrap();
        let spec = KernelSpec::step(vec![(1.0, 1.0)]).unwrap();
        let sim = sample_path_integral(&spec, &t, &MCConfig::new(50, 1)).unwrap();
        assert!(sim.samples.iter().all(|y| y[0] == 0.7));
    }

    #[test]
    fn gaussian_variance_halves() {
        let t = Triplet::gaussian(Matrix::from_element(1, 1, 2.0), v1(0.0)).unwrap();
        let cfg = MCConfig { horizon: Some(20.0), ..MCConfig::new(20_000, 3) };
        let sim = sample_path_integral(&KernelSpec::exp(), &t, &cfg).unwrap();
        let n = sim.samples.len() as f64;
        let var = sim.samples.iter().map(|y| y[0] * y[0]).sum::<f64>() / n;
        // SE of a Gaussian variance estimate: σ² sqrt(2/n)
        assert!((var - 1.0).abs() < 3.0 * (2.0 / n).sqrt(), "{var}");
    }

    #[test]
    fn reproducible_across_thread_counts() {
        let lambda = SphericalMeasure::symmetric(v1(1.0)).unwrap();
        let t = Triplet::new(
            Matrix::from_element(1, 1, 0.5),
            LevyMeasure::Polar(GammaRep::single(0.6, 1.0, lambda).unwrap()),
            v1(0.1),
        )
        .unwrap();
        let spec = KernelSpec::phibar(2.0, -0.5);
        let cfg = MCConfig { jump_cutoff: 1e-2, ..MCConfig::new(500, 42) };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let a = one.install(|| sample_path_integral(&spec, &t, &cfg).unwrap().samples);
        let b = sample_path_integral(&spec, &t, &cfg).unwrap().samples;
        assert_eq!(a, b);
        let c = sample_path_integral(&spec, &t, &MCConfig { master_seed: 43, ..cfg }).unwrap().samples;
        assert_ne!(a, c);
    }

    #[test]
    fn ecf_detects_wrong_variance() {
        let t = Triplet::gaussian(Matrix::identity(1, 1), v1(0.0)).unwrap();
        let sim = sample_path_integral(&KernelSpec::exp(), &t, &MCConfig::new(20_000, 9)).unwrap();
        let zs = default_z_panel(1);
        let exact = apply_map(&KernelSpec::exp(), &t).unwrap().output;
        let report = ecf_compare(&sim.samples, &exact, &zs).unwrap();
        assert!(report.passed, "{}", report.max_deviation);
        let mut wrong = exact.clone();
        wrong.a *= 2.0;
        let report = ecf_compare(&sim.samples, &wrong, &zs).unwrap();
        assert!(!report.passed);
        let zero = ecf_compare(&sim.samples, &exact, &[v1(0.0)]).unwrap();
        assert_eq!(zero.points[0].empirical, Complex64::new(1.0, 0.0));
        assert_eq!(zero.points[0].reference, Complex64::new(1.0, 0.0));
        assert!(ecf_compare(&sim.samples[..10], &exact, &zs).is_err());
    }

    #[test]
    fn radial_sampler_follows_density() {
        // density 2 r^{-2.5} on [1e-2, 1e2] with power tails: mass above ε
        let grid = crate::measures::log_grid(1e-2, 1e2, 50);
        let ray = RadialRay::new(v1(1.0), grid.clone(), grid.iter().map(|r| 2.0 * r.powf(-2.5)).collect()).unwrap();
        let sampler = ray.sampler(0.1);
        assert!((sampler.mass() - 2.0 * 0.1f64.powf(-1.5) / 1.5).abs() < 1e-9 * sampler.mass());
        for u in [0.0, 0.1, 0.5, 0.9, 0.999] {
            let r = sampler.radius(u);
            // closed-form inverse of the normalized Pareto tail
            let expected = 0.1 * (1.0 - u).powf(-1.0 / 1.5);
            assert!((r - expected).abs() < 1e-9 * expected, "u={u}: {r} vs {expected}");
        }
        let tab = RadialTabulated::new(vec![ray]).unwrap();
        let t = Triplet::pure_jump(LevyMeasure::Radial(tab), v1(0.0)).unwrap();
        let sim = sample_path_integral(&KernelSpec::step(vec![(1.0, 1.0)]).unwrap(), &t, &MCConfig::new(10, 5)).unwrap();
        assert!((sim.jump_rate - 2.0 * 1e-3f64.powf(-1.5) / 1.5).abs() < 1e-6 * sim.jump_rate);
    }

    #[test]
    fn infinite_support_alpha_one_is_unsupported() {
        let lambda = SphericalMeasure::point(v1(1.0)).unwrap();
        let t = Triplet::pure_jump(LevyMeasure::Polar(GammaRep::single(1.5, 1.0, lambda).unwrap()), v1(-2.0)).unwrap();
        assert!(matches!(
            sample_path_integral(&KernelSpec::psi(1.0), &t, &MCConfig::new(10, 1)),
            Err(Error::Unsupported(_))
        ));
    }
}
