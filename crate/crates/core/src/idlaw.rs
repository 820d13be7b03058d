//! Lévy triplets `(A, ν, γ)`, their cumulant functions and the operator
//! algebra on infinitely divisible laws: dilation `T_a`, convolution power
//! `P_t`, convolution, the symmetrization `U` and the mixture `V`.

use crate::error::{Error, Result};
use crate::measures::{expect_keys, field, as_numbers, log_grid, GammaRep, LevyMeasure, RadialTabulated, Vector};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Value};

pub type Matrix = DMatrix<f64>;

/// Grid used when a Polar measure must be tabulated to be added to a Radial one.
pub const MIXED_GRID: (f64, f64, usize) = (1e-4, 1e4, 600);

#[derive(Debug, Clone, PartialEq)]
pub struct Triplet {
    pub a: Matrix,
    pub levy: LevyMeasure,
    pub gamma: Vector,
}

impl Triplet {
    pub fn new(a: Matrix, levy: LevyMeasure, gamma: Vector) -> Result<Self> {
        let d = gamma.len();
        if d == 0 {
            return Err(Error::Validation("dimension must be at least 1".into()));
        }
        if a.nrows() != d || a.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: a.nrows() });
        }
        if let Some(m) = levy.dim() {
            if m != d {
                return Err(Error::DimensionMismatch { expected: d, found: m });
            }
        }
        let scale = a.amax().max(1.0);
        if (&a - a.transpose()).amax() > 1e-10 * scale {
            return Err(Error::Validation("A must be symmetric".into()));
        }
        let min_eigen = a.clone().symmetric_eigenvalues().min();
        if min_eigen < -1e-10 * scale {
            return Err(Error::Validation(format!("A must be positive semidefinite (eigenvalue {min_eigen})")));
        }
        if !gamma.iter().all(|g| g.is_finite()) || !a.iter().all(|v| v.is_finite()) {
            return Err(Error::Validation("A and gamma must be finite".into()));
        }
        let diag = levy.validate();
        if !diag.ok {
            return Err(Error::Validation("Lévy measure is not integrable against min(1, |x|²)".into()));
        }
        Ok(Triplet { a, levy, gamma })
    }

    /// `N(0, A)` shifted by `gamma` has triplet `(A, 0, gamma)`.
    pub fn gaussian(a: Matrix, gamma: Vector) -> Result<Self> {
        Self::new(a, LevyMeasure::Zero, gamma)
    }

    /// A triplet with no Gaussian part.
    pub fn pure_jump(levy: LevyMeasure, gamma: Vector) -> Result<Self> {
        let d = gamma.len();
        Self::new(Matrix::zeros(d, d), levy, gamma)
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    /// `C(z) = -½⟨z, Az⟩ + ∫ (e^{i⟨z,x⟩} - 1 - i⟨z,x⟩ 1_{|x|≤1}) ν(dx) + i⟨γ, z⟩`.
    pub fn cumulant(&self, z: &Vector) -> Complex64 {
        let gaussian = -0.5 * z.dot(&(&self.a * z));
        Complex64::new(gaussian, self.gamma.dot(z)) + self.levy.cumulant(z)
    }

    /// Cumulant at every point of `zs`, evaluated in parallel, in order.
    pub fn cumulant_panel(&self, zs: &[Vector]) -> Vec<Complex64> {
        zs.par_iter().map(|z| self.cumulant(z)).collect()
    }

    /// `γ + ∫_{|x|>1} x ν(dx)` when `∫_{|x|>1} |x| ν < ∞`.
    pub fn mean(&self) -> Option<Vector> {
        self.levy.mean_tail(self.dim()).map(|tail| &self.gamma + tail)
    }

    /// `γ + lim_{a→∞} ∫_{1<|x|≤a} x ν(dx)` when the limit exists.
    pub fn weak_mean(&self) -> Option<Vector> {
        self.levy.weak_mean_tail(self.dim()).map(|tail| &self.gamma + tail)
    }

    /// `T_a`: the law of `aX`.
    pub fn dilate(&self, a: f64) -> Result<Self> {
        if a == 0.0 || !a.is_finite() {
            return Err(Error::Domain(format!("dilation factor must be finite and nonzero, got {a}")));
        }
        let shell = self.levy.shell_vector(1.0 / a.abs(), self.dim());
        Ok(Triplet { a: &self.a * (a * a), levy: self.levy.dilated(a), gamma: (&self.gamma + shell) * a })
    }

    /// `P_t`: the law whose characteristic function is `φ^t`.
    pub fn power(&self, t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!("convolution power must be > 0, got {t}")));
        }
        Ok(Triplet { a: &self.a * t, levy: self.levy.scaled(t), gamma: &self.gamma * t })
    }

    /// `self * other`.
    pub fn convolve(&self, other: &Triplet) -> Result<Self> {
        Ok(self.convolve_reporting(other)?.0)
    }

    /// Convolution plus a flag telling whether a Polar measure had to be
    /// tabulated on [`MIXED_GRID`] (a lossy step).
    pub fn convolve_reporting(&self, other: &Triplet) -> Result<(Self, bool)> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        let (levy, rendered) = add_measures(&self.levy, &other.levy)?;
        Ok((Triplet { a: &self.a + &other.a, levy, gamma: &self.gamma + &other.gamma }, rendered))
    }

    /// `Uρ = P_{1/2}ρ * T_{-1}P_{1/2}ρ`.
    pub fn sym_u(&self) -> Result<Self> {
        let half = self.power(0.5)?;
        half.convolve(&half.dilate(-1.0)?)
    }

    /// `Vρ = P_{a₁}ρ * P_{1-a₁}T_{-1}ρ`.
    pub fn mix_v(&self, a1: f64) -> Result<Self> {
        if !(a1 > 0.0 && a1 < 1.0) {
            return Err(Error::Domain(format!("mixture weight must lie in (0, 1), got {a1}")));
        }
        self.power(a1)?.convolve(&self.dilate(-1.0)?.power(1.0 - a1)?)
    }

    /// Whether `b^α A = b² A` and `b^α ν = T_b ν`, the conditions for
    /// `P_{b^α}ρ = T_bρ * δ_γ`.
    pub fn is_semistable(&self, b: f64, alpha: f64) -> Result<bool> {
        if !(b > 1.0 && b.is_finite()) {
            return Err(Error::Domain(format!("span must be > 1, got {b}")));
        }
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::Domain(format!("index must lie in (0, 2], got {alpha}")));
        }
        let ba = b.powf(alpha);
        let scale = self.a.amax().max(f64::MIN_POSITIVE);
        if (&self.a * (ba - b * b)).amax() > 1e-9 * b * b * scale {
            return Ok(false);
        }
        Ok(match &self.levy {
            LevyMeasure::Zero => true,
            LevyMeasure::Polar(rep) => rep.atoms().iter().all(|a| (a.beta - alpha).abs() <= 1e-12),
            LevyMeasure::Discrete(atoms) => {
                let scaled = self.levy.scaled(ba);
                let dilated = self.levy.dilated(b);
                let (LevyMeasure::Discrete(lhs), LevyMeasure::Discrete(rhs)) = (scaled, dilated) else {
                    unreachable!()
                };
                atoms.len() == rhs.len()
                    && rhs.iter().all(|r| {
                        lhs.iter().any(|l| {
                            (&l.x - &r.x).amax() <= 1e-12 * r.x.amax() && (l.mass - r.mass).abs() <= 1e-9 * r.mass
                        })
                    })
            }
            LevyMeasure::Radial(tab) => radial_semistable(tab, b, ba),
        })
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let obj = value.as_object().ok_or_else(|| Error::Schema("triplet must be an object".into()))?;
        expect_keys(obj, &["A", "levy", "gamma"], "triplet")?;
        let gamma = as_numbers(field(obj, "gamma", "triplet")?, "`gamma`")?;
        let d = gamma.len();
        let a = as_numbers(field(obj, "A", "triplet")?, "`A`")?;
        if a.len() != d * d {
            return Err(Error::Schema(format!("`A` must hold {} entries (row-major {d}×{d}), got {}", d * d, a.len())));
        }
        let levy = LevyMeasure::from_json(field(obj, "levy", "triplet")?)?;
        Triplet::new(Matrix::from_row_slice(d, d, &a), levy, Vector::from_vec(gamma))
    }

    pub fn to_json(&self) -> Value {
        let d = self.dim();
        let a: Vec<f64> = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| self.a[(i, j)]).collect();
        json!({
            "A": a,
            "levy": self.levy.to_json(),
            "gamma": self.gamma.iter().copied().collect::<Vec<f64>>(),
        })
    }
}

fn radial_semistable(tab: &RadialTabulated, b: f64, ba: f64) -> bool {
    // T_b ν has density h(r/b)/b along the same ray
    tab.consolidated().rays().iter().all(|ray| {
        let first = ray.radii()[0];
        ray.radii()
            .iter()
            .zip(ray.density())
            .filter(|(r, _)| **r / b >= first)
            .all(|(&r, &h)| {
                let lhs = ba * h;
                let rhs = ray.density_at(r / b) / b;
                (lhs - rhs).abs() <= 1e-6 * lhs.abs().max(rhs.abs())
            })
    })
}

/// `ν₁ + ν₂`, tabulating a Polar summand when the other one is Radial.
pub fn add_measures(m1: &LevyMeasure, m2: &LevyMeasure) -> Result<(LevyMeasure, bool)> {
    use LevyMeasure::*;
    Ok(match (m1, m2) {
        (Zero, m) | (m, Zero) => (m.clone(), false),
        (Discrete(a), Discrete(b)) => {
            let atoms = a.iter().chain(b).map(|atom| (atom.x.clone(), atom.mass)).collect();
            (LevyMeasure::discrete(atoms)?, false)
        }
        (Polar(a), Polar(b)) => {
            let mut rep = a.clone();
            for atom in b.atoms() {
                rep.push(atom.clone());
            }
            (Polar(rep), false)
        }
        (Radial(a), Radial(b)) => (Radial(concat_rays(a, b)?), false),
        (Polar(p), Radial(r)) | (Radial(r), Polar(p)) => (Radial(concat_rays(r, &render_mixed(p)?)?), true),
        (Discrete(_), _) | (_, Discrete(_)) => {
            return Err(Error::Unsupported(
                "a discrete Lévy measure cannot be added to an absolutely continuous one".into(),
            ))
        }
    })
}

fn render_mixed(rep: &GammaRep) -> Result<RadialTabulated> {
    let (lo, hi, n) = MIXED_GRID;
    rep.render(&log_grid(lo, hi, n))
}

fn concat_rays(a: &RadialTabulated, b: &RadialTabulated) -> Result<RadialTabulated> {
    RadialTabulated::new(a.rays().iter().chain(b.rays()).cloned().collect())
}

/// `a_n` of `V^n ρ = P_{a_n}ρ * P_{1-a_n}T_{-1}ρ`: `a_1 = a₁`,
/// `a_n = 1 - a₁ + a_{n-1}(2a₁ - 1)`.
pub fn v_weight(a1: f64, n: usize) -> f64 {
    let mut a = a1;
    for _ in 1..n {
        a = 1.0 - a1 + a * (2.0 * a1 - 1.0);
    }
    a
}

/// Ten evaluation points in `ℝ^d` spread over several directions and radii.
pub fn default_z_panel(dim: usize) -> Vec<Vector> {
    (1..=10)
        .map(|k| {
            let radius = 0.25 * k as f64;
            let mut v = Vector::zeros(dim);
            for (j, c) in v.iter_mut().enumerate() {
                // a different mixture of axes for each k, with alternating signs
                *c = ((k * (j + 1)) as f64 * 0.7).cos();
            }
            if v.norm() == 0.0 {
                v[0] = 1.0;
            }
            let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
            let norm = v.norm();
            v * (sign * radius / norm)
        })
        .collect()
}

/// Largest `|C₁(z) - C₂(z)| / max(1, |C₂(z)|)` over the panel.
pub fn panel_distance(t1: &Triplet, t2: &Triplet, zs: &[Vector]) -> f64 {
    let c1 = t1.cumulant_panel(zs);
    let c2 = t2.cumulant_panel(zs);
    c1.iter().zip(&c2).map(|(a, b)| (a - b).norm() / b.norm().max(1.0)).fold(0.0, f64::max)
}
