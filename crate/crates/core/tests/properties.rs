use levymap::mapping::apply_map;
use levymap::{Family, GammaRep, KernelSpec, LevyMeasure, PolarAtom, SphericalMeasure, Triplet, Vector};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![
        (-2.0..1.5f64).prop_map(|alpha| Family::Psi { alpha }),
        (0.5..4.0f64, -2.0..0.9f64).prop_map(|(p, alpha)| Family::PhiBar { p, alpha }),
        (0.3..3.0f64, -2.0..0.9f64).prop_map(|(q, alpha)| Family::Lambda { q, alpha }),
        (-2.0..-0.2f64, 0.5..3.0f64).prop_map(|(alpha, beta)| Family::GStar { alpha, beta }),
    ]
}

/// Polar triplet on the line with indices in (0.1, 1.9) and a Gaussian part.
fn polar_triplet() -> impl Strategy<Value = Triplet> {
    (
        prop::collection::vec((0.1..1.9f64, 0.05..2.0f64, 0.0..1.0f64), 1..4),
        0.0..2.0f64,
        -1.0..1.0f64,
    )
        .prop_map(|(atoms, a, gamma)| {
            let atoms = atoms
                .into_iter()
                .map(|(beta, weight, right)| {
                    let lambda = if right == 0.0 {
                        SphericalMeasure::point(Vector::from_vec(vec![-1.0])).unwrap()
                    } else {
                        SphericalMeasure::new(vec![
                            (Vector::from_vec(vec![1.0]), right),
                            (Vector::from_vec(vec![-1.0]), 1.0 - right),
                        ])
                        .unwrap()
                    };
                    PolarAtom { beta, weight, lambda }
                })
                .collect();
            let levy = LevyMeasure::Polar(GammaRep::new(atoms).unwrap());
            Triplet::new(DMatrix::from_element(1, 1, a), levy, Vector::from_vec(vec![gamma])).unwrap()
        })
}

fn z1() -> impl Strategy<Value = Vector> {
    (-3.0..3.0f64).prop_map(|z| Vector::from_vec(vec![z]))
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inverse_kernel_round_trips(family in family(), s in 0.01..20.0f64) {
        let t = family.invert_numeric(s);
        if s >= family.support_end() {
            prop_assert_eq!(t, 0.0);
            return Ok(());
        }
        prop_assert!(t > 0.0 && t <= family.upper());
        prop_assume!(t < family.upper());
        prop_assert!(close(family.tail(t), s, 1e-9), "g(f(s)) = {} for s = {s}", family.tail(t));
    }

    #[test]
    fn kernel_is_nonincreasing(family in family(), s in 0.01..10.0f64, ds in 0.001..5.0f64) {
        let spec = KernelSpec::Analytic(family);
        prop_assert!(spec.kernel_value(s + ds) <= spec.kernel_value(s));
    }

    #[test]
    fn cumulant_is_hermitian(t in polar_triplet(), z in z1()) {
        let c = t.cumulant(&z);
        let c_neg = t.cumulant(&(-&z));
        prop_assert!((c - c_neg.conj()).norm() <= 1e-10 * c.norm().max(1.0));
        prop_assert!(c.re <= 1e-12);
        prop_assert_eq!(t.cumulant(&Vector::from_vec(vec![0.0])).norm(), 0.0);
    }

    #[test]
    fn dilation_and_power_commute(t in polar_triplet(), a in 0.2..5.0f64, c in 0.2..5.0f64, z in z1()) {
        let left = t.dilate(a).unwrap().power(c).unwrap().cumulant(&z);
        let right = t.power(c).unwrap().dilate(a).unwrap().cumulant(&z);
        prop_assert!((left - right).norm() <= 1e-9 * left.norm().max(1.0));
        // and both equal c·C(az)
        let direct = t.cumulant(&(&z * a)) * c;
        prop_assert!((left - direct).norm() <= 1e-9 * direct.norm().max(1.0));
    }

    #[test]
    fn convolution_adds_cumulants(t1 in polar_triplet(), t2 in polar_triplet(), z in z1()) {
        let sum = t1.convolve(&t2).unwrap().cumulant(&z);
        let parts = t1.cumulant(&z) + t2.cumulant(&z);
        prop_assert!((sum - parts).norm() <= 1e-9 * parts.norm().max(1.0));
    }

    #[test]
    fn lambda_moments_form_a_semigroup(q1 in 0.2..3.0f64, q2 in 0.2..3.0f64, alpha in -1.5..1.5f64, gap in 0.1..2.0f64) {
        let beta = alpha + gap;
        prop_assume!(beta < 2.0 && beta > 0.0);
        let m = |q: f64| KernelSpec::lambda(q, alpha).beta_moment(beta).unwrap().0;
        prop_assert!(close(m(q1) * m(q2), m(q1 + q2), 1e-9));
    }

    #[test]
    fn polar_image_matches_quadrature(alpha in -1.5..0.9f64, gap in 0.1..1.0f64, p in 0.5..3.0f64) {
        let beta = alpha + gap;
        prop_assume!(beta > 0.05 && beta < 1.95);
        let lambda = SphericalMeasure::symmetric(Vector::from_vec(vec![1.0])).unwrap();
        let rep = GammaRep::single(beta, 1.0, lambda).unwrap();
        let input = Triplet::pure_jump(LevyMeasure::Polar(rep), Vector::from_vec(vec![0.0])).unwrap();
        for spec in [KernelSpec::psi(alpha), KernelSpec::phibar(p, alpha)] {
            let report = apply_map(&spec, &input).unwrap();
            let residual = report.cross_check.unwrap();
            prop_assert!(residual <= report.cross_check_tol, "residual {residual} for {:?}", spec.to_json());
        }
    }
}
