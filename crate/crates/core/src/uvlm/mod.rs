//! Two-dimensional unsteady vortex-lattice model of a rigid flat chord.
//!
//! Lengths are scaled by the chord and velocities by the reference sweep speed.
//! Circulation is positive counter-clockwise. The chord runs from the leading
//! edge along `e = (-cos a, -sin a)`; the upper normal is `n = (-sin a, cos a)`,
//! so a chord at pitch `a < 90 deg` leads with its leading edge when moving in +X.
//!
//! Each panel carries a lumped vortex at its quarter point and a collocation point
//! at three quarters. One more bound vortex sits a quarter panel behind the
//! trailing edge and is released into the wake after every step.

mod kernel;
mod kinematics;
mod wake;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use kernel::{core_radius4, induced_velocity_bound, induced_velocity_wake, vatistas, wake_velocity};
pub use kinematics::{ChordKinematics, ChordState, PitchProfile};
pub use wake::{truncate_wake, WakeState, BLOB_POSITION};

use kernel::regularized_sum;
use crate::Vec2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum UvlmError {
    #[error("vortex evaluated at its own position")]
    SingularEvaluation,
    #[error("singular influence matrix at step {0}")]
    SingularMatrix(usize),
    #[error("nonfinite circulation at step {0}")]
    NonFinite(usize),
    #[error("invalid parameters: {0}")]
    Params(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UvlmParams {
    pub panels: usize,
    /// Steps per panel length of travel at peak speed.
    pub time_divisor: usize,
    /// Squire parameter of the core-growth model.
    pub a1: f64,
    /// Lamb constant.
    pub lamb: f64,
    /// Leading-edge suction efficiency once the flow separates.
    pub eta: f64,
    pub alpha_c_deg: f64,
    /// Chordwise station of the pitch axis, from the leading edge.
    pub pivot_fraction: f64,
    pub cycles: usize,
    /// Vortices older than this many cycles are merged into the blob.
    pub truncation_cycles: f64,
}

impl Default for UvlmParams {
    fn default() -> Self {
        Self {
            panels: 20,
            time_divisor: 2,
            a1: 0.1,
            lamb: 1.25643,
            eta: 0.2,
            alpha_c_deg: 12.0,
            pivot_fraction: 0.25,
            cycles: 3,
            truncation_cycles: 1.5,
        }
    }
}

impl UvlmParams {
    pub fn validate(&self) -> Result<(), UvlmError> {
        let bad = |m: &str| Err(UvlmError::Params(m.into()));
        if self.panels < 1 || self.time_divisor < 1 || self.cycles < 1 {
            return bad("panels, time_divisor and cycles must be positive");
        }
        if !(self.eta >= 0.0 && self.eta <= 1.0) {
            return bad("eta must lie in [0, 1]");
        }
        if !(self.a1 >= 0.0 && self.lamb > 0.0 && self.truncation_cycles > 0.0) {
            return bad("a1, lamb and truncation_cycles must be positive");
        }
        if !(0.0..=1.0).contains(&self.pivot_fraction) {
            return bad("pivot_fraction must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Chordwise stations measured from the leading edge.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelLayout {
    pub panels: usize,
    pub panel_length: f64,
    /// N panel vortices followed by the trailing-edge vortex.
    pub vortex_station: Vec<f64>,
    pub collocation_station: Vec<f64>,
}

impl PanelLayout {
    pub fn new(n: usize) -> Self {
        let d = 1.0 / n as f64;
        let mut vortex_station: Vec<f64> = (0..n).map(|j| (j as f64 + 0.25) * d).collect();
        vortex_station.push(1.0 + 0.25 * d);
        let collocation_station = (0..n).map(|j| (j as f64 + 0.75) * d).collect();
        Self { panels: n, panel_length: d, vortex_station, collocation_station }
    }
}

/// Chord placement at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChordFrame {
    pub pivot: Vec2,
    pub pivot_fraction: f64,
    pub alpha: f64,
}

impl ChordFrame {
    pub fn chordwise(&self) -> Vec2 {
        Vec2::new(-self.alpha.cos(), -self.alpha.sin())
    }

    pub fn normal(&self) -> Vec2 {
        Vec2::new(-self.alpha.sin(), self.alpha.cos())
    }

    pub fn point(&self, station: f64) -> Vec2 {
        self.pivot + self.chordwise() * (station - self.pivot_fraction)
    }

    /// Rigid-body velocity of a chord point.
    pub fn body_velocity(&self, p: Vec2, s: &ChordState) -> Vec2 {
        let r = p - self.pivot;
        Vec2::new(s.omega_tilde - s.alpha_dot_tilde * r.y, s.alpha_dot_tilde * r.x)
    }
}

/// Quantities recorded at one time level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub omega_tilde: f64,
    pub omega_tilde_prime: f64,
    pub alpha: f64,
    pub gamma: Vec<f64>,
    pub delta_cp: Vec<f64>,
    pub c_f: f64,
    pub c_les: f64,
    pub c_l: f64,
    pub c_h: f64,
    pub c_d: f64,
    /// Bound + wake + blob circulation.
    pub kelvin: f64,
    pub impenetrability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleMeans {
    pub c_l: f64,
    pub c_h: f64,
    pub c_d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeroCoefficients {
    pub dt: f64,
    pub steps_per_cycle: usize,
    pub cycle_count: usize,
    pub t: Vec<f64>,
    pub omega_tilde: Vec<f64>,
    pub omega_tilde_prime: Vec<f64>,
    pub alpha: Vec<f64>,
    pub c_f: Vec<f64>,
    pub c_l: Vec<f64>,
    pub c_h: Vec<f64>,
    pub c_d: Vec<f64>,
    pub c_les: Vec<f64>,
    pub kelvin: Vec<f64>,
    pub impenetrability: Vec<f64>,
    pub cycle_means: Vec<CycleMeans>,
    pub truncation_steps: Vec<usize>,
}

impl AeroCoefficients {
    /// Step index range of cycle `c` (0-based).
    pub fn cycle_range(&self, c: usize) -> std::ops::Range<usize> {
        c * self.steps_per_cycle..((c + 1) * self.steps_per_cycle).min(self.t.len())
    }

    pub fn last_cycle(&self) -> std::ops::Range<usize> {
        self.cycle_range(self.cycle_count.saturating_sub(1))
    }
}

/// Time-marching solver state.
pub struct Solver<'a> {
    kin: &'a ChordKinematics,
    params: UvlmParams,
    re: f64,
    layout: PanelLayout,
    dt: f64,
    max_age_steps: usize,
    pub wake: WakeState,
    prev_gamma: Vec<f64>,
    pivot_x: f64,
    step: usize,
}

impl<'a> Solver<'a> {
    pub fn new(kin: &'a ChordKinematics, params: &UvlmParams, re: f64, dt: f64, max_age_steps: usize) -> Result<Self, UvlmError> {
        params.validate()?;
        if !(re > 0.0) || !(dt > 0.0) {
            return Err(UvlmError::Params("Re and dt must be positive".into()));
        }
        let layout = PanelLayout::new(params.panels);
        Ok(Self {
            kin,
            params: *params,
            re,
            prev_gamma: vec![0.0; params.panels + 1],
            layout,
            dt,
            max_age_steps,
            wake: WakeState::default(),
            pivot_x: 0.0,
            step: 0,
        })
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn layout(&self) -> &PanelLayout {
        &self.layout
    }

    fn frame(&self, s: &ChordState) -> ChordFrame {
        ChordFrame { pivot: Vec2::new(self.pivot_x, 0.0), pivot_fraction: self.params.pivot_fraction, alpha: s.alpha }
    }

    fn core_radii(&self, t: f64) -> Vec<f64> {
        let w = &self.wake;
        let (re, a1, lamb) = (self.re, self.params.a1, self.params.lamb);
        (0..w.len()).map(|k| core_radius4(w.gamma[k], t - w.shed_time[k], re, a1, lamb)).collect()
    }

    /// Bound circulations from impenetrability and Kelvin closure.
    pub fn assemble_and_solve(
        &self,
        frame: &ChordFrame,
        s: &ChordState,
        rc4: &[f64],
    ) -> Result<(Vec<f64>, Vec<Vec2>, f64), UvlmError> {
        let n = self.layout.panels;
        let nrm = frame.normal();
        let bound: Vec<Vec2> = self.layout.vortex_station.iter().map(|&st| frame.point(st)).collect();
        let cps: Vec<Vec2> = self.layout.collocation_station.iter().map(|&st| frame.point(st)).collect();
        let uw: Vec<Vec2> = cps.iter().map(|&c| wake_velocity(c, &self.wake, rc4)).collect();
        let mut a = DMatrix::zeros(n + 1, n + 1);
        let mut rhs = DVector::zeros(n + 1);
        for j in 0..n {
            for i in 0..=n {
                let u = induced_velocity_bound(cps[j], &[(bound[i], 1.0)])?;
                a[(j, i)] = u.dot(&nrm);
            }
            rhs[j] = (frame.body_velocity(cps[j], s) - uw[j]).dot(&nrm);
        }
        for i in 0..=n {
            a[(n, i)] = 1.0;
        }
        rhs[n] = -self.wake.total_circulation();
        let gamma = a.clone().lu().solve(&rhs).ok_or(UvlmError::SingularMatrix(self.step))?;
        if gamma.iter().any(|g| !g.is_finite()) {
            return Err(UvlmError::NonFinite(self.step));
        }
        let resid = (&a * &gamma - &rhs).rows(0, n).amax();
        Ok((gamma.iter().copied().collect(), uw, resid))
    }

    /// Advance one time level: solve, evaluate loads, shed and convect.
    pub fn advance(&mut self) -> Result<StepRecord, UvlmError> {
        let t = self.time();
        if self.step > 0 {
            self.pivot_x += self.kin.displacement(t - self.dt, t);
        }
        let s = self.kin.state(t);
        let frame = self.frame(&s);
        let rc4 = self.core_radii(t);
        let (gamma, uw, impenetrability) = self.assemble_and_solve(&frame, &s, &rc4)?;
        let n = self.layout.panels;
        let d = self.layout.panel_length;
        let (ehat, nhat) = (frame.chordwise(), frame.normal());

        // unsteady Bernoulli jump, lower minus upper, per panel
        let mut delta_cp = Vec::with_capacity(n);
        let mut acc = 0.0;
        for j in 0..n {
            acc += (gamma[j] - self.prev_gamma[j]) / self.dt;
            let ubar = (uw[j] - Vec2::new(s.omega_tilde, 0.0)).dot(&ehat);
            delta_cp.push(2.0 * (ubar * gamma[j] / d + acc));
        }
        let c_f: f64 = delta_cp.iter().sum::<f64>() * d;

        // leading-edge suction from the flow at the first vortex, its own term excluded
        let bound: Vec<(Vec2, f64)> =
            self.layout.vortex_station.iter().zip(&gamma).map(|(&st, &g)| (frame.point(st), g)).collect();
        let lepv = bound[0].0;
        let q = induced_velocity_bound(lepv, &bound[1..])? + wake_velocity(lepv, &self.wake, &rc4) - frame.body_velocity(lepv, &s);
        let c_les = -2.0 * gamma[0] * q.dot(&nhat);

        let aoa = s.alpha.min(std::f64::consts::PI - s.alpha);
        let force = if aoa > self.params.alpha_c_deg.to_radians() {
            nhat * (c_f + self.params.eta * s.alpha.cos().signum() * c_les.abs())
        } else {
            nhat * c_f + ehat * c_les
        };
        let c_l = force.y;
        let c_h = force.x;
        let c_d = -s.omega_tilde.signum() * c_h;
        let kelvin = gamma.iter().sum::<f64>() + self.wake.total_circulation();

        // convect free vortices and the trailing-edge vortex
        let te = bound[n].0;
        let vel = self.convection_velocities(&bound, te, &rc4);
        let mut wake = std::mem::take(&mut self.wake);
        let nw = wake.len();
        wake.convect(&vel[..nw], self.dt);
        wake.push(te + vel[nw] * self.dt, gamma[n], t, self.step);
        wake.last_velocity[nw] = Some(vel[nw]);
        self.wake = wake;
        self.step += 1;
        truncate_wake(&mut self.wake, self.step, self.max_age_steps);
        self.prev_gamma.clone_from(&gamma);

        Ok(StepRecord {
            t,
            omega_tilde: s.omega_tilde,
            omega_tilde_prime: self.kin.sweep_acceleration(t),
            alpha: s.alpha,
            gamma,
            delta_cp,
            c_f,
            c_les,
            c_l,
            c_h,
            c_d,
            kelvin,
            impenetrability,
        })
    }

    /// Velocities at every wake vortex followed by the trailing-edge vortex.
    fn convection_velocities(&self, bound: &[(Vec2, f64)], te: Vec2, rc4: &[f64]) -> Vec<Vec2> {
        let w = &self.wake;
        let nw = w.len();
        let nb = bound.len();
        let target = |i: usize| -> Vec2 {
            let (px, pz, own_rc4) = if i < nw { (w.x[i], w.z[i], rc4[i]) } else { (te.x, te.y, 0.0) };
            let (mut u, mut v) = regularized_sum(px, pz, &w.x, &w.z, &w.gamma, rc4);
            // bound vortices seen through the receiving vortex core; TEV skips itself
            let nbound = if i < nw { nb } else { nb - 1 };
            for (b, g) in &bound[..nbound] {
                let (du, dv) = vatistas(px - b.x, pz - b.y, *g, own_rc4);
                u += du;
                v += dv;
            }
            let (du, dv) = vatistas(px - w.blob_position.x, pz - w.blob_position.y, w.blob_gamma, 0.0);
            Vec2::new(u + du, v + dv)
        };
        if nw > 256 {
            (0..=nw).into_par_iter().map(target).collect()
        } else {
            (0..=nw).map(target).collect()
        }
    }
}

fn collect(records: Vec<StepRecord>, dt: f64, steps_per_cycle: usize, truncs: Vec<usize>) -> AeroCoefficients {
    let cycle_count = records.len().checked_div(steps_per_cycle).unwrap_or(0);
    let pick = |f: fn(&StepRecord) -> f64| records.iter().map(f).collect::<Vec<f64>>();
    let mut out = AeroCoefficients {
        dt,
        steps_per_cycle,
        cycle_count,
        t: pick(|r| r.t),
        omega_tilde: pick(|r| r.omega_tilde),
        omega_tilde_prime: pick(|r| r.omega_tilde_prime),
        alpha: pick(|r| r.alpha),
        c_f: pick(|r| r.c_f),
        c_l: pick(|r| r.c_l),
        c_h: pick(|r| r.c_h),
        c_d: pick(|r| r.c_d),
        c_les: pick(|r| r.c_les),
        kelvin: pick(|r| r.kelvin),
        impenetrability: pick(|r| r.impenetrability),
        cycle_means: Vec::new(),
        truncation_steps: truncs,
    };
    out.cycle_means = (0..cycle_count)
        .map(|c| {
            let r = out.cycle_range(c);
            let mean = |v: &[f64]| v[r.clone()].iter().sum::<f64>() / r.len() as f64;
            CycleMeans { c_l: mean(&out.c_l), c_h: mean(&out.c_h), c_d: mean(&out.c_d) }
        })
        .collect();
    out
}

fn march(
    kin: &ChordKinematics,
    params: &UvlmParams,
    re: f64,
    dt: f64,
    steps: usize,
    max_age: usize,
    steps_per_cycle: usize,
) -> Result<AeroCoefficients, UvlmError> {
    let mut solver = Solver::new(kin, params, re, dt, max_age)?;
    let mut records = Vec::with_capacity(steps);
    let mut truncs = Vec::new();
    for _ in 0..steps {
        let blob = solver.wake.blob_gamma;
        let before = solver.wake.len();
        records.push(solver.advance()?);
        if solver.wake.len() <= before && solver.wake.blob_gamma != blob {
            truncs.push(solver.step - 1);
        }
    }
    Ok(collect(records, dt, steps_per_cycle, truncs))
}

/// Steps per cycle for a periodic motion: peak travel of one panel takes
/// `time_divisor` steps, rounded so that a cycle holds a whole number of steps.
pub fn steps_per_cycle(kin: &ChordKinematics, params: &UvlmParams) -> Option<usize> {
    let period = kin.period()?;
    let vmax = kin.max_speed().max(1e-12);
    let dt = (1.0 / params.panels as f64 / vmax) / params.time_divisor as f64;
    Some(((period / dt).ceil() as usize).max(8))
}

/// March a periodic motion for `params.cycles` cycles.
pub fn simulate_cycles(kin: &ChordKinematics, params: &UvlmParams, re: f64) -> Result<AeroCoefficients, UvlmError> {
    let period = kin.period().ok_or_else(|| UvlmError::Params("kinematics are not periodic".into()))?;
    let spc = steps_per_cycle(kin, params).expect("periodic");
    let dt = period / spc as f64;
    let max_age = (params.truncation_cycles * spc as f64).round() as usize;
    march(kin, params, re, dt, spc * params.cycles, max_age, spc)
}

/// Impulsive start into steady translation, run for `travel` chord lengths.
pub fn simulate_steady(kin: &ChordKinematics, params: &UvlmParams, re: f64, travel: f64) -> Result<AeroCoefficients, UvlmError> {
    let speed = kin.max_speed();
    if !(speed > 0.0) {
        return Err(UvlmError::Params("steady run needs a nonzero speed".into()));
    }
    let dt = 1.0 / params.panels as f64 / speed / params.time_divisor as f64;
    let steps = (travel / (speed * dt)).round() as usize;
    march(kin, params, re, dt, steps, usize::MAX, 0)
}
