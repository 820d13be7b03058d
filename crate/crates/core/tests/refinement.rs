//! Halving the jump cutoff must not move the simulated law by more than the
//! Monte Carlo noise once the compensated small jumps are negligible.

use levymap::idlaw::default_z_panel;
use levymap::mapping::apply_map;
use levymap::montecarlo::{ecf_compare, ecf_compare_samples, sample_path_integral, MCConfig};
use levymap::{GammaRep, KernelSpec, LevyMeasure, SphericalMeasure, Triplet, Vector};

const PATHS: usize = 10_000;
const SEED: u64 = 2024;

fn symmetric_polar(beta: f64) -> Triplet {
    let lambda = SphericalMeasure::symmetric(Vector::from_vec(vec![1.0])).unwrap();
    let rep = GammaRep::single(beta, 1.0, lambda).unwrap();
    Triplet::pure_jump(LevyMeasure::Polar(rep), Vector::from_vec(vec![0.0])).unwrap()
}

fn check(spec: &KernelSpec, beta: f64, eps: f64) {
    let input = symmetric_polar(beta);
    let zs = default_z_panel(1);
    let coarse = sample_path_integral(spec, &input, &MCConfig { jump_cutoff: eps, ..MCConfig::new(PATHS, SEED) }).unwrap();
    let fine =
        sample_path_integral(spec, &input, &MCConfig { jump_cutoff: eps / 2.0, ..MCConfig::new(PATHS, SEED + 1) })
            .unwrap();

    // Dropping centered jumps of variance v per unit time moves the CF by at
    // most |z|² v ∫f² / 2; this must sit below two standard errors.
    let f2 = spec.squared_integral().unwrap();
    let report = ecf_compare_samples(&coarse.samples, &fine.samples, &zs).unwrap();
    for p in &report.points {
        let bound = 0.5 * p.z.norm_squared() * coarse.small_jump_variance * f2;
        assert!(bound < 2.0 * p.std_error, "z = {}: bias bound {bound} vs 2 SE {}", p.z[0], 2.0 * p.std_error);
        assert!(p.deviation < 2.0, "z = {}: eps -> eps/2 moved the ECF by {} SE", p.z[0], p.deviation);
    }

    // both runs agree with the analytic image as well
    let analytic = apply_map(spec, &input).unwrap().output;
    for sim in [&coarse, &fine] {
        let r = ecf_compare(&sim.samples, &analytic, &zs).unwrap();
        assert!(r.passed, "max deviation {}", r.max_deviation);
    }
}

#[test]
fn halving_cutoff_exp_kernel() {
    check(&KernelSpec::exp(), 0.5, 0.02);
}

#[test]
fn halving_cutoff_psi0_kernel() {
    check(&KernelSpec::psi(0.0), 0.5, 0.02);
}
