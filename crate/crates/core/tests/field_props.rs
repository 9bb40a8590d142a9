mod common;

use common::{c, field};
use dirac_split::{
    l2_distance, l2_norm, restrict_to_coarse, sample_initial_data, InitialProfile, Mesh,
    SamplingMode, SpinorField,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn distance_is_symmetric_and_zero_on_self(a in field(40, 2.0), b in field(40, 2.0)) {
        // same τ as `a`
        let b = SpinorField::new(
            Mesh::new(a.tau(), b.mesh().j_min(), b.mesh().j_max()).unwrap(),
            b.u().to_vec(),
            b.v().to_vec(),
            0,
        ).unwrap();
        prop_assert_eq!(l2_distance(&a, &a, 0).unwrap(), 0.0);
        let ab = l2_distance(&a, &b, 0).unwrap();
        let ba = l2_distance(&b, &a, 0).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-14 * (1.0 + ab));
    }

    #[test]
    fn distance_is_norm_of_difference(a in field(40, 2.0), s in -3.0f64..3.0) {
        let b = a.shifted(3).add_scaled(&a, s).unwrap();
        let d = l2_distance(&a, &b, 0).unwrap();
        let diff = a.add_scaled(&b, -1.0).unwrap();
        let n = l2_norm(&diff);
        prop_assert!((d - n).abs() <= 1e-13 * (1.0 + n), "{} vs {}", d, n);
    }

    #[test]
    fn triangle_inequality(a in field(30, 1.0), k1 in -5i64..5, k2 in -5i64..5) {
        let b = a.shifted(k1).add_scaled(&a, 0.5).unwrap();
        let cc = a.shifted(k2);
        let ab = l2_distance(&a, &b, 0).unwrap();
        let bc = l2_distance(&b, &cc, 0).unwrap();
        let ac = l2_distance(&a, &cc, 0).unwrap();
        prop_assert!(ac <= ab + bc + 1e-13);
    }

    #[test]
    fn mass_is_tau_times_density_sum(a in field(60, 2.0)) {
        let naive: f64 = a.densities().sum::<f64>() * a.tau();
        prop_assert!((a.mass() - naive).abs() <= 1e-13 * naive.max(1e-300));
        let n = l2_norm(&a);
        prop_assert!((n * n - a.mass()).abs() <= 1e-13 * a.mass().max(1e-300));
    }

    #[test]
    fn shift_is_an_isometry(a in field(40, 2.0), k in -40i64..40) {
        let s = a.shifted(k);
        prop_assert_eq!(s.u(), a.u());
        prop_assert_eq!(s.mesh().j_min(), a.mesh().j_min() - k);
        prop_assert_eq!(l2_distance(&s, &a, -k).unwrap(), 0.0);
    }

    #[test]
    fn coarse_restriction_contracts(a in field(40, 2.0)) {
        let a = a.aligned(2).unwrap();
        let coarse = restrict_to_coarse(&a, 2).unwrap();
        prop_assert!(coarse.mass() <= a.mass() * (1.0 + 1e-14));
    }

    #[test]
    fn restriction_is_linear(a in field(32, 1.0), s in -2.0f64..2.0) {
        let a = a.aligned(4).unwrap();
        let b = a.add_scaled(&a, s).unwrap();
        let ra = restrict_to_coarse(&a, 4).unwrap();
        let rb = restrict_to_coarse(&b, 4).unwrap();
        let expect = ra.add_scaled(&ra, s).unwrap();
        prop_assert!(l2_distance(&rb, &expect, 0).unwrap() <= 1e-14 * (1.0 + l2_norm(&rb)));
    }

    #[test]
    fn constant_profile_cell_average_is_constant(re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let z = c(re, im);
        let profile = InitialProfile::homogeneous(z, z * c(0.0, 1.0));
        let mesh = profile.default_mesh(0.125).unwrap();
        let f = sample_initial_data(&profile, &mesh, SamplingMode::CellAverage).unwrap();
        for (u, v) in f.u().iter().zip(f.v()) {
            prop_assert!((u - z).norm() <= 1e-15 * (1.0 + z.norm()));
            prop_assert!((v - z * c(0.0, 1.0)).norm() <= 1e-15 * (1.0 + z.norm()));
        }
    }
}

#[test]
fn gaussian_cell_average_matches_quadrature() {
    let (center, width, k) = (0.1, 0.3, 2.5);
    let profile = InitialProfile::GaussianPacket {
        center,
        width,
        u: [1.0, 0.5],
        v: [0.0, -0.7],
        wavenumber: k,
        extent: None,
    };
    let tau = 0.125;
    let mesh = profile.default_mesh(tau).unwrap();
    let f = sample_initial_data(&profile, &mesh, SamplingMode::CellAverage).unwrap();
    let value = |x: f64| {
        let g = (-(x - center).powi(2) / (2.0 * width * width)).exp();
        c(0.0, k * x).exp() * g
    };
    let points = 10_000;
    for j in -8..=8 {
        let mut sum = c(0.0, 0.0);
        for p in 0..points {
            let x = (j as f64 + (p as f64 + 0.5) / points as f64) * tau;
            sum += value(x);
        }
        let mean = sum / points as f64;
        let expect = mean * c(1.0, 0.5);
        assert!(
            (f.u_at(j) - expect).norm() < 1e-8,
            "cell {j}: {} vs {expect}",
            f.u_at(j)
        );
        assert!((f.v_at(j) - mean * c(0.0, -0.7)).norm() < 1e-8);
    }
}

#[test]
fn point_sample_reads_profile_at_left_node() {
    let profile = InitialProfile::gaussian(0.0, 0.5, c(1.0, 0.0), c(0.0, 1.0));
    let mesh = profile.default_mesh(0.25).unwrap();
    let f = sample_initial_data(&profile, &mesh, SamplingMode::PointSample).unwrap();
    assert_eq!(f.u_at(0), c(1.0, 0.0));
    // exp(−x²/(2w²)) at x = 1/4, w = 1/2
    assert!((f.u_at(1).re - (-0.125f64).exp()).abs() < 1e-15);
    assert!((f.v_at(-1).im - (-0.125f64).exp()).abs() < 1e-15);
}
