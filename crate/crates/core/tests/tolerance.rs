mod common;

use common::*;
use flapmech::mech::{dims_of, DimKind};
use flapmech::pipeline::evaluate_mechanism;
use flapmech::tolerance::*;
use flapmech::{PipelineConfig, UvlmParams};
use proptest::prelude::*;

fn quick() -> PipelineConfig {
    PipelineConfig { uvlm: UvlmParams { panels: 10, time_divisor: 1, cycles: 2, ..Default::default() }, ..Default::default() }
}

#[test]
fn sobol_leading_points() {
    let p = sobol_points(3, 4, 0).unwrap();
    assert_eq!(p[0], vec![0.0, 0.0, 0.0]);
    assert_eq!(p[1], vec![0.5, 0.5, 0.5]);
    assert_eq!(p[2], vec![0.75, 0.25, 0.25]);
    assert_eq!(p[3], vec![0.25, 0.75, 0.75]);
    assert_eq!(sobol_points(3, 3, 1).unwrap(), p[1..].to_vec());
    assert!(sobol_points(0, 4, 0).is_err());
    assert!(sobol_points(MAX_DIM + 1, 4, 0).is_err());
}

#[test]
fn sobol_stratifies_each_axis() {
    for k in [3u32, 6, 9] {
        let n = 1usize << k;
        let pts = sobol_points(MAX_DIM, n, 0).unwrap();
        for d in 0..MAX_DIM {
            let mut bins = vec![0; n];
            for p in &pts {
                bins[(p[d] * n as f64) as usize] += 1;
            }
            assert!(bins.iter().all(|&b| b == 1), "dim {d}, 2^{k}");
            let mean = pts.iter().map(|p| p[d]).sum::<f64>() / n as f64;
            assert_eq!(mean, (n - 1) as f64 / (2 * n) as f64);
        }
    }
}

#[test]
fn nominal_point_is_identity() {
    for t in [topology_d(), topology_c(), topology_k()] {
        let m = mech(&t);
        let dims = dims_of(&m);
        let band = ToleranceBand::default();
        let same = perturb_design(&dims, &m, &band, &vec![0.5; dims.len()]).unwrap();
        assert_eq!(same, dims);
        let low = perturb_design(&dims, &m, &band, &vec![0.0; dims.len()]).unwrap();
        let half = band_half_widths(&dims, &m, &band);
        for ((a, b), h) in low.entries.iter().zip(&dims.entries).zip(&half) {
            assert!((b.value - a.value - h).abs() < 1e-12);
            if matches!(a.kind, DimKind::Length { .. } | DimKind::SliderCoord { .. }) {
                assert_eq!(*h, 0.5);
            }
        }
        assert!(perturb_design(&dims, &m, &band, &[0.5]).is_err());
    }
}

#[test]
fn slider_coordinates_are_toleranced() {
    let m = mech(&topology_k());
    let dims = dims_of(&m);
    assert!(dims.entries.iter().any(|e| matches!(e.kind, DimKind::SliderCoord { .. })));
}

#[test]
fn angle_band_uses_shorter_arm() {
    let m = mech(&topology_d());
    let dims = dims_of(&m);
    let band = ToleranceBand::default();
    let half = band_half_widths(&dims, &m, &band);
    let t = m.ternaries()[0];
    let len = |member: usize| dims.entries.iter().find(|e| e.kind == DimKind::Length { member }).unwrap().value;
    let k = dims.entries.iter().position(|e| matches!(e.kind, DimKind::Angle { .. })).unwrap();
    assert!((half[k] - 0.5 / len(t.a).min(len(t.b))).abs() < 1e-15);
    let fixed = ToleranceBand { angle_tolerance: AngleTolerance::Radians(0.01), ..band };
    assert_eq!(band_half_widths(&dims, &m, &fixed)[k], 0.01);
}

#[test]
fn band_partition_and_zero_control() {
    let m = mech(&topology_d());
    let cfg = quick();
    let reference = evaluate_mechanism(&m, &cfg).loads.unwrap();
    let band = ToleranceBand { n_samples: 12, ..Default::default() };
    let r = analyze_band(&m, &band, &reference, &cfg).unwrap();
    assert_eq!(r.singular_count + r.defective_count + r.violating_count + r.feasible_count, 12);
    assert_eq!(r.samples.len(), 12);
    assert_eq!(r.samples[0].sobol_index, 1);
    for s in &r.samples {
        assert_eq!(s.category == Category::Feasible, !(s.amplitude_violation || s.fti_violation) && s.category != Category::Singular && s.category != Category::Defective);
    }

    let zero = ToleranceBand { tolerance_mm: 0.0, n_samples: 4, ..Default::default() };
    let z = analyze_band(&m, &zero, &reference, &cfg).unwrap();
    assert_eq!(z.feasible_count, 4);
    assert_eq!((z.singularity_pct, z.amplitude_violation_pct, z.fti_violation_count), (0.0, 0.0, 0));
    let p = z.power_decrease_pct.unwrap();
    assert!(p.mean.abs() < 1e-12 && p.std.abs() < 1e-12);
    assert!(z.torque_increase_pct.unwrap().mean.abs() < 1e-12);
}

#[test]
fn invalid_band_rejected() {
    let m = mech(&topology_d());
    let cfg = quick();
    let reference = evaluate_mechanism(&m, &cfg).loads.unwrap();
    for band in [
        ToleranceBand { tolerance_mm: -1.0, ..Default::default() },
        ToleranceBand { n_samples: 0, ..Default::default() },
        ToleranceBand { angle_tolerance: AngleTolerance::Radians(f64::NAN), ..Default::default() },
    ] {
        assert!(matches!(analyze_band(&m, &band, &reference, &cfg), Err(ToleranceError::Band(_))));
    }
}

#[test]
fn mean_std_examples() {
    assert!(MeanStd::of(&[]).is_none());
    let s = MeanStd::of(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap();
    assert_eq!((s.mean, s.count), (5.0, 8));
    assert!((s.std - (32.0f64 / 7.0).sqrt()).abs() < 1e-15);
    assert_eq!(MeanStd::of(&[3.0]).unwrap().std, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn perturbation_stays_in_band(seed in 0usize..500, tol in 0.0..1.0f64) {
        let m = mech(&topology_c());
        let dims = dims_of(&m);
        let band = ToleranceBand { tolerance_mm: tol, ..Default::default() };
        let p = &sobol_points(dims.len(), 1, seed).unwrap()[0];
        let out = perturb_design(&dims, &m, &band, p).unwrap();
        let half = band_half_widths(&dims, &m, &band);
        for ((a, b), h) in out.entries.iter().zip(&dims.entries).zip(&half) {
            prop_assert!((a.value - b.value).abs() <= h + 1e-12);
        }
    }

    // nested bands: the same point moves proportionally farther in the wider band
    #[test]
    fn perturbation_scales_with_band(seed in 0usize..500, t in 0.05..0.5f64, ratio in 1.0..4.0f64) {
        let m = mech(&topology_d());
        let dims = dims_of(&m);
        let p = &sobol_points(dims.len(), 1, seed).unwrap()[0];
        let narrow = perturb_design(&dims, &m, &ToleranceBand { tolerance_mm: t, ..Default::default() }, p).unwrap();
        let wide = perturb_design(&dims, &m, &ToleranceBand { tolerance_mm: t * ratio, ..Default::default() }, p).unwrap();
        for ((n, w), d) in narrow.entries.iter().zip(&wide.entries).zip(&dims.entries) {
            prop_assert!(((w.value - d.value) - ratio * (n.value - d.value)).abs() < 1e-9);
        }
    }
}
