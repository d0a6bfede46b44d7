//! Acceptance criteria. Run with `--nocapture` to see one line per criterion.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use common::*;
use flapmech::fem::*;
use flapmech::loads::{frequency_rescale, LoadSummary};
use flapmech::mech::{grashof_margin, quick_return_ratio, ConstraintLimits, StageGeometry, DEFAULT_DELTA_QRR, DEFAULT_GRASHOF_OFFSET};
use flapmech::optimize::{dominates, pareto_search, power_at_lift, OptimizationConfig};
use flapmech::pipeline::{evaluate_design, run_pipeline};
use flapmech::tolerance::{analyze_band, Category, ToleranceBand};
use flapmech::uvlm::*;
use flapmech::{FlapEnvironment, PipelineConfig, Vec2};
use nalgebra::{DMatrix, SMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(n: u32, name: &str, ok: bool, detail: String) {
    println!("criterion {n:>2} {}: {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {detail}");
}

fn quick() -> PipelineConfig {
    PipelineConfig { uvlm: UvlmParams { panels: 10, time_divisor: 1, cycles: 2, ..Default::default() }, ..Default::default() }
}

fn unwrap_angle(d: f64) -> f64 {
    (d + PI).rem_euclid(2.0 * PI) - PI
}

#[test]
fn c01_fem_matches_loop_closure() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let p = FemParams { steps: 72, g: 1e9, ..Default::default() };
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 20 {
        let (l23, l34, l41): (f64, f64, f64) = (rng.random_range(2.0..5.0), rng.random_range(2.0..5.0), rng.random_range(2.0..5.0));
        // unit crank shortest and Grashof with room to spare
        let l = l23.max(l34).max(l41);
        if 1.0 + l > l23 + l34 + l41 - l - 0.5 || (l23 - l34).abs() > l41 - 1.5 || l23 + l34 < l41 + 1.5 {
            continue;
        }
        let beta = rng.random_range(-PI..PI);
        let ground = Vec2::new(l41 * beta.cos(), l41 * beta.sin());
        let tr = simulate_revolution(&mech(&fourbar(l23, l34, l41, beta, 1.0)), &p);
        assert!(!tr.singular, "{l23} {l34} {l41} {beta}: {:?}", tr.singular_reason);
        let phi = tr.phi();
        let psi0 = rocker_angle(0.0, l23, l34, ground, 1.0).unwrap();
        for k in 0..tr.steps() {
            let psi = rocker_angle(tr.crank_angle[k], l23, l34, ground, 1.0).unwrap();
            worst = worst.max(unwrap_angle(phi[k + 1] - (psi - psi0)).abs());
        }
        done += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(1, "FEM vs loop closure", worst < 1e-4 && secs < 5.0, format!("max error {worst:.2e} rad, {secs:.2} s for 20 linkages"));
}

fn rel_fro(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(1e-300)
}

fn random_state(rng: &mut ChaCha8Rng, nodes: [usize; 2]) -> ElementState {
    let l0: f64 = rng.random_range(0.5..3.0);
    let th: f64 = rng.random_range(-PI..PI);
    let l = l0 * rng.random_range(0.95..1.05);
    let x1 = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
    ElementState {
        nodes,
        rest_length: l0,
        rest_angle: th + rng.random_range(-0.3..0.3),
        x: [x1[0], x1[1], x1[0] + l * th.cos(), x1[1] + l * th.sin()],
        spring: rng.random_range(0.0..5.0),
        torque: rng.random_range(-1.0..1.0),
        axial: 10f64.powf(rng.random_range(0.0..3.0)),
    }
}

#[test]
fn c02_tangent_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h = 1e-6;
    let mut worst = [0.0f64; 3];
    for _ in 0..100 {
        // single element
        let e = random_state(&mut rng, [0, 1]);
        let k = element_tangent(&e).unwrap();
        let mut fd = SMatrix::<f64, 4, 4>::zeros();
        for c in 0..4 {
            let (mut a, mut b) = (e, e);
            a.x[c] += h;
            b.x[c] -= h;
            fd.set_column(c, &((element_residual(&a).unwrap() - element_residual(&b).unwrap()) / (2.0 * h)));
        }
        worst[0] = worst[0].max((k - fd).norm() / k.norm());

        // ternary coupling sharing node 1
        let mut e2 = random_state(&mut rng, [1, 2]);
        let (dx, dy) = (e.x[2] - e2.x[0], e.x[3] - e2.x[1]);
        e2.x = [e.x[2], e.x[3], e2.x[2] + dx, e2.x[3] + dy];
        let (r1, r2) = (e.rest_angle + rng.random_range(-0.1..0.1), e2.rest_angle + rng.random_range(-0.1..0.1));
        let kt = rng.random_range(1.0..1e3);
        let t = ternary_residual_tangent(&e, &e2, r1, r2, kt).unwrap();
        let full = DMatrix::from_fn(8, 8, |r, c| match (r < 4, c < 4) {
            (true, true) => t.k11[(r, c)],
            (true, false) => t.k12[(r, c - 4)],
            (false, true) => t.k21[(r - 4, c)],
            (false, false) => t.k22[(r - 4, c - 4)],
        });
        let g = |a: &ElementState, b: &ElementState| {
            let t = ternary_residual_tangent(a, b, r1, r2, kt).unwrap();
            nalgebra::DVector::from_iterator(8, t.g1.iter().chain(t.g2.iter()).copied())
        };
        let mut fd8 = DMatrix::zeros(8, 8);
        for c in 0..8 {
            let (mut a1, mut b1, mut a2, mut b2) = (e, e2, e, e2);
            if c < 4 {
                a1.x[c] += h;
                a2.x[c] -= h;
            } else {
                b1.x[c - 4] += h;
                b2.x[c - 4] -= h;
            }
            fd8.set_column(c, &((g(&a1, &b1) - g(&a2, &b2)) / (2.0 * h)));
        }
        worst[1] = worst[1].max(rel_fro(&full, &fd8));
    }

    // assembled system of the shipped ternary topology around perturbed states
    let m = mech(&topology_d());
    let p = FemParams::default();
    let model = FemModel::new(&m, &p);
    let x0 = model.initial_positions();
    for _ in 0..100 {
        let x: Vec<f64> = x0.iter().map(|v| v + rng.random_range(-0.02..0.02)).collect();
        let (_, k) = model.assemble_full(&x).unwrap();
        let hs = 1e-7;
        let mut fd = DMatrix::zeros(x.len(), x.len());
        for c in 0..x.len() {
            let (mut a, mut b) = (x.clone(), x.clone());
            a[c] += hs;
            b[c] -= hs;
            let col = (model.assemble_full(&a).unwrap().0 - model.assemble_full(&b).unwrap().0) / (2.0 * hs);
            fd.set_column(c, &col);
        }
        worst[2] = worst[2].max(rel_fro(&k, &fd));
    }
    let ok = worst.iter().all(|w| *w < 1e-4);
    verdict(2, "tangent consistency", ok, format!("element {:.1e}, ternary 8x8 {:.1e}, assembled {:.1e}", worst[0], worst[1], worst[2]));
}

#[test]
fn c03_kelvin_conservation() {
    let kin = ChordKinematics::harmonic(4.0, 64, PitchProfile::fruit_fly());
    let p = UvlmParams { panels: 20, time_divisor: 2, cycles: 3, ..Default::default() };
    let r = simulate_cycles(&kin, &p, 1e3).unwrap();
    let worst_run = r.kelvin.iter().map(|k| k.abs()).fold(0.0, f64::max);

    // post-shed bookkeeping through the stepping interface
    let spc = steps_per_cycle(&kin, &p).unwrap();
    let max_age = (p.truncation_cycles * spc as f64).round() as usize;
    let mut s = Solver::new(&kin, &p, 1e3, 4.0 / spc as f64, max_age).unwrap();
    let mut worst_step: f64 = 0.0;
    for _ in 0..3 * spc {
        let rec = s.advance().unwrap();
        let n = p.panels;
        worst_step = worst_step.max(rec.kelvin.abs()).max((rec.gamma[..n].iter().sum::<f64>() + s.wake.total_circulation()).abs());
    }
    let ok = worst_run < 1e-10 && worst_step < 1e-10 && !r.truncation_steps.is_empty();
    verdict(
        3,
        "Kelvin conservation",
        ok,
        format!("max |sum gamma| {worst_run:.1e} over {} steps, {:.1e} after shedding, {} truncations", r.t.len(), worst_step, r.truncation_steps.len()),
    );
}

#[test]
fn c04_thin_airfoil_limit() {
    let a = 5f64.to_radians();
    let kin = ChordKinematics::Steady { omega_tilde: 1.0, alpha: a };
    let r = simulate_steady(&kin, &UvlmParams::default(), 1e4, 50.0).unwrap();
    let cl = *r.c_l.last().unwrap();
    let target = 2.0 * PI * a.sin();
    let err = (cl - target).abs() / target;
    verdict(4, "thin-airfoil limit", err < 0.05, format!("C_L {cl:.4} vs {target:.4} ({:.2}%)", 100.0 * err));
}

#[test]
fn c05_convergence_delta() {
    // operating-point period of the shipped linkages, 2 phi0 r2 / c
    let kin = ChordKinematics::harmonic(10.8, 64, PitchProfile::Harmonic { mid_stroke_deg: 45.0 });
    let run = |n, nt| {
        let p = UvlmParams { panels: n, time_divisor: nt, cycles: 3, ..Default::default() };
        let t = Instant::now();
        let r = simulate_cycles(&kin, &p, 1e3).unwrap();
        (r.cycle_means[2].c_l, t.elapsed().as_secs_f64() / 3.0)
    };
    let (coarse, per_cycle) = run(20, 2);
    let (fine, _) = run(40, 4);
    let d = (coarse - fine).abs();
    verdict(
        5,
        "UVLM convergence",
        d <= 0.03,
        format!("C_L {coarse:.4} (20, 2) vs {fine:.4} (40, 4), delta {d:.4}; {per_cycle:.2} s per cycle at N=20"),
    );
}

#[test]
fn c06_periodicity() {
    let kin = ChordKinematics::harmonic(10.8, 64, PitchProfile::fruit_fly());
    let p = UvlmParams { cycles: 4, ..Default::default() };
    let r = simulate_cycles(&kin, &p, 1e3).unwrap();
    let (c3, c4) = (r.cycle_means[2].c_l, r.cycle_means[3].c_l);
    let d = (c3 - c4).abs() / c4.abs();
    verdict(6, "periodicity", d < 0.02, format!("cycle 3 {c3:.4}, cycle 4 {c4:.4} ({:.2}%)", 100.0 * d));
}

#[test]
fn c07_frequency_invariance() {
    let m = mech(&topology_d());
    let cls: Vec<f64> = [10.0, 15.0, 20.0]
        .iter()
        .map(|&f| {
            let cfg = PipelineConfig { environment: FlapEnvironment { frequency_hz: f, ..Default::default() }, ..Default::default() };
            let run = run_pipeline(&m, &cfg, false);
            assert!(run.evaluation.feasible(), "{f} Hz: {:?}", run.evaluation.failure);
            run.evaluation.loads.unwrap().mean_cl
        })
        .collect();
    let lo = cls.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = cls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = (hi - lo) / lo.abs();
    verdict(
        7,
        "frequency invariance",
        spread < 0.02,
        format!("mean C_L {:.4}/{:.4}/{:.4} at 10/15/20 Hz, spread {:.2}%", cls[0], cls[1], cls[2], 100.0 * spread),
    );
}

#[test]
fn c08_scaling_laws() {
    let base = LoadSummary { mean_lift_gf: 17.3, mean_power_w: 0.91, peak_torque_kgcm: 0.21, f_hz: 15.0, phi0_deg: 140.0, mean_cl: 1.4 };
    let mut worst: f64 = 0.0;
    for ratio in [0.25, 0.5, 1.0, 1.7, 2.0, 3.0, 10.0] {
        let f = base.f_hz * ratio;
        let r = frequency_rescale(&base, base.mean_lift_gf * ratio * ratio).unwrap();
        let errs = [
            (r.f_hz - f) / f,
            (r.mean_lift_gf - base.mean_lift_gf * ratio.powi(2)) / r.mean_lift_gf,
            (r.mean_power_w - base.mean_power_w * ratio.powi(3)) / r.mean_power_w,
            (r.peak_torque_kgcm - base.peak_torque_kgcm * ratio.powi(2)) / r.peak_torque_kgcm,
        ];
        worst = errs.iter().fold(worst, |w, e| w.max(e.abs()));
    }
    verdict(8, "scaling laws", worst < 8.0 * f64::EPSILON, format!("max relative deviation {worst:.1e}"));
}

#[test]
fn c09_optimization() {
    let m = mech(&topology_d());
    let cfg = quick();
    let seed = m.design();
    let opt = OptimizationConfig { population: 16, budget: 600, ..Default::default() };
    let t = Instant::now();
    let out = pareto_search(&m, std::slice::from_ref(&seed), &cfg, &opt, None).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let limits = ConstraintLimits::default();
    assert_eq!((limits.fti_min, limits.phi_min_deg), (0.65, 120.0));

    let entries = &out.archive.entries;
    let feasible = entries.iter().all(|e| {
        let ev = evaluate_design(&e.design, &m, &cfg);
        let r = ev.report.clone().unwrap();
        ev.feasible()
            && r.link_ratio_ok
            && r.grashof_margin.is_none_or(|g| g >= 0.0)
            && r.qrr.is_none_or(|q| (q - 1.0).abs() <= limits.delta_qrr)
            && r.amplitude_deg >= 120.0
            && r.fti_cr >= 0.65
            && r.box_violation.unwrap_or(0.0) <= 0.0
            && ev.objectives() == Some(e.objectives())
    });
    let nondominated = entries.iter().all(|a| entries.iter().all(|b| !dominates(b.objectives(), a.objectives())));
    let (l0, p0) = out.seed_objectives[0];
    let best = entries.iter().map(|e| power_at_lift(e.mean_lift, e.mean_power, l0)).fold(f64::INFINITY, f64::min);
    let gain = 100.0 * (p0 - best) / p0;
    let ok = !entries.is_empty() && feasible && nondominated && gain > 0.0 && out.evaluations_run <= 2000;
    verdict(
        9,
        "optimization",
        ok,
        format!(
            "{} entries from {} evaluations in {secs:.0} s, feasible {feasible}, nondominated {nondominated}, power at seed lift -{gain:.1}%",
            entries.len(),
            out.evaluations_run
        ),
    );
}

#[test]
fn c10_robustness_bookkeeping() {
    let m = mech(&topology_d());
    let cfg = quick();
    let reference = run_pipeline(&m, &cfg, false).evaluation.loads.unwrap();
    let band = ToleranceBand { tolerance_mm: 0.5, n_samples: 100, ..Default::default() };
    let a = analyze_band(&m, &band, &reference, &cfg).unwrap();
    let b = analyze_band(&m, &band, &reference, &cfg).unwrap();
    let same = a == b && serde_json::to_string(&a).unwrap() == serde_json::to_string(&b).unwrap();
    let parts = a.singular_count + a.defective_count + a.violating_count + a.feasible_count;
    let by_record = [Category::Singular, Category::Defective, Category::Violating, Category::Feasible]
        .map(|c| a.samples.iter().filter(|s| s.category == c).count());
    let partition = parts == 100 && by_record == [a.singular_count, a.defective_count, a.violating_count, a.feasible_count];

    let zero = analyze_band(&m, &ToleranceBand { tolerance_mm: 0.0, n_samples: 100, ..band }, &reference, &cfg).unwrap();
    let control = zero.feasible_count == 100 && zero.singularity_pct == 0.0 && zero.amplitude_violation_pct == 0.0 && zero.fti_violation_count == 0;

    let json: serde_json::Value = serde_json::to_value(&a).unwrap();
    let schema = ["singularity_pct", "amplitude_violation_pct", "power_decrease_pct", "torque_increase_pct"]
        .iter()
        .all(|k| json.get(*k).is_some())
        && a.power_decrease_pct.is_some_and(|s| s.std.is_finite())
        && a.torque_increase_pct.is_some();
    let ok = same && partition && control && schema;
    let pd = a.power_decrease_pct.map_or("n/a".into(), |s| format!("{:.1} ± {:.1}", s.mean, s.std));
    let ti = a.torque_increase_pct.map_or("n/a".into(), |s| format!("{:.1} ± {:.1}", s.mean, s.std));
    verdict(
        10,
        "robustness bookkeeping",
        ok,
        format!(
            "reproducible {same}, partition {}/{}/{}/{} singular/defective/violating/feasible, zero band {} feasible, singularity {:.0}%, amplitude violations {:.0}%, power decrease {pd} %, torque increase {ti} %",
            a.singular_count, a.defective_count, a.violating_count, a.feasible_count, zero.feasible_count, a.singularity_pct, a.amplitude_violation_pct
        ),
    );
}

#[test]
fn c11_constraint_formulas() {
    let inline = StageGeometry::CrankSlider { l12: 1.0, l23: 3.5, offset: 0.0 };
    let q_inline = quick_return_ratio(&inline).unwrap();
    let mut scaled = true;
    for g in [
        StageGeometry::CrankRocker { l12: 1.0, l23: 4.0, l34: 3.0, l41: 3.0 },
        StageGeometry::CrankRocker { l12: 1.2, l23: 2.9, l34: 2.2, l41: 3.1 },
        StageGeometry::CrankSlider { l12: 1.0, l23: 3.0, offset: 0.7 },
    ] {
        for s in [0.1, 3.0, 25.0] {
            let (a, b) = (quick_return_ratio(&g).unwrap(), quick_return_ratio(&g.scaled(s)).unwrap());
            scaled &= (a - b).abs() < 1e-12 * a;
        }
        if let StageGeometry::CrankRocker { l12, l23, l34, l41 } = g {
            for s in [0.1, 3.0, 25.0] {
                let (a, b) = (grashof_margin(l12, l23, l34, l41, 0.4), grashof_margin(l12 * s, l23 * s, l34 * s, l41 * s, 0.4));
                scaled &= (a - b).abs() < 1e-12 * a.abs().max(1.0);
            }
        }
    }
    let defaults = DEFAULT_DELTA_QRR == 0.01 && DEFAULT_GRASHOF_OFFSET == 0.4;
    let ok = q_inline == 1.0 && scaled && defaults;
    verdict(11, "constraint formulas", ok, format!("in-line QRR {q_inline}, scale invariant {scaled}, defaults delta {DEFAULT_DELTA_QRR} offset {DEFAULT_GRASHOF_OFFSET}"));
}
