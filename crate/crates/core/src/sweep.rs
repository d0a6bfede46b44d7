//! Sweep-angle profiles derived from a crank revolution.
//!
//! Interval `k` of the trace spans nodes `k` and `k+1` of the cumulative angle
//! `phi`. Velocities live at interval midpoints, `t_k = (k + 1/2) dt`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::fem::LinkageTrace;

/// |omega_tilde| below this counts as zero when looking for reversals.
pub const ZERO_BAND: f64 = 1e-6;
const CLOSURE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SweepError {
    #[error("trace is singular")]
    Singular,
    #[error("trace does not close (net output rotation {0:.3e} rad)")]
    NotClosed(f64),
    #[error("empty trace")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepProfile {
    pub phi: Vec<f64>,
    pub omega: Vec<f64>,
    pub omega_dot: Vec<f64>,
    pub amplitude_phi0: f64,
    pub frequency_f: f64,
    /// Reference sweep rate `2 phi0 f`.
    pub omega_ref: f64,
    /// Reference time `c / (omega_ref r2)`.
    pub t_ref: f64,
    /// Cycle period in reference times.
    pub period_tilde: f64,
    pub t: Vec<f64>,
    pub t_tilde: Vec<f64>,
    pub omega_tilde: Vec<f64>,
    pub omega_tilde_prime: Vec<f64>,
    pub defect: bool,
    pub zero_crossings: usize,
    /// Node index of the phi maximum that opens the downstroke.
    pub downstroke_start: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Amplitude {
    pub phi0: f64,
    pub reversals: usize,
    pub defect: bool,
    pub downstroke_start: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("fewer than two stroke reversals ({0})")]
pub struct DefectError(pub usize);

fn signs(deltas: &[f64], band: f64) -> Vec<i8> {
    deltas
        .iter()
        .map(|d| if d.abs() < band { 0 } else if *d > 0.0 { 1 } else { -1 })
        .collect()
}

/// Cyclic sign changes of a periodic sequence, skipping zero entries.
/// Returns `(from, to)` index pairs of the nonzero entries around each change.
fn sign_changes(s: &[i8]) -> Vec<(usize, usize)> {
    let n = s.len();
    let nz: Vec<usize> = (0..n).filter(|&i| s[i] != 0).collect();
    let mut out = Vec::new();
    for (k, &i) in nz.iter().enumerate() {
        let j = nz[(k + 1) % nz.len()];
        if s[i] != s[j] {
            out.push((i, j));
        }
    }
    out
}

/// Smallest half-cycle span, with the cycle split at the velocity reversals.
///
/// `phi` holds M+1 cumulative angles of a closed cycle.
pub fn amplitude(phi: &[f64]) -> Result<Amplitude, DefectError> {
    let m = phi.len().saturating_sub(1);
    if m < 2 {
        return Err(DefectError(0));
    }
    let deltas: Vec<f64> = phi.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = deltas.iter().map(|d| d.abs()).sum::<f64>() / m as f64;
    let s = signs(&deltas, ZERO_BAND * mean);
    let changes = sign_changes(&s);
    let n = changes.len();
    if n < 2 {
        return Err(DefectError(n));
    }
    // node where the change happens: end of the last interval before the flip
    let nodes: Vec<usize> = changes.iter().map(|&(i, _)| (i + 1) % m).collect();
    let start = (0..n)
        .filter(|&k| s[changes[k].0] > 0)
        .max_by(|&a, &b| phi[nodes[a]].total_cmp(&phi[nodes[b]]))
        .unwrap_or(0);
    // with two reversals both spans coincide; with more, the smallest span counts
    let phi0 = (0..n)
        .map(|k| (phi[nodes[(start + k) % n]] - phi[nodes[(start + k + 1) % n]]).abs())
        .fold(f64::INFINITY, f64::min);
    Ok(Amplitude { phi0, reversals: n, defect: n != 2, downstroke_start: nodes[start] })
}

/// Count of sign changes in a cyclic velocity sequence and the defect flag.
pub fn detect_defect(omega_tilde: &[f64]) -> (bool, usize) {
    let c = sign_changes(&signs(omega_tilde, ZERO_BAND)).len();
    (c != 2, c)
}

/// Times of velocity reversals by linear interpolation between midpoints.
pub fn reversal_times(omega_tilde: &[f64], dt: f64) -> Vec<f64> {
    let m = omega_tilde.len();
    sign_changes(&signs(omega_tilde, ZERO_BAND))
        .into_iter()
        .map(|(i, j)| {
            let (a, b) = (omega_tilde[i], omega_tilde[j]);
            let span = if j > i { j - i } else { j + m - i } as f64;
            let t = (i as f64 + 0.5 + span * a / (a - b)) * dt;
            t.rem_euclid(m as f64 * dt)
        })
        .collect()
}

/// Sweep profile at flapping frequency `f`; `r2_over_chord` sets the reference time.
pub fn profile_from_trace(trace: &LinkageTrace, f: f64, r2_over_chord: f64) -> Result<SweepProfile, SweepError> {
    if trace.singular {
        return Err(SweepError::Singular);
    }
    let m = trace.delta_phi.len();
    if m < 3 {
        return Err(SweepError::Empty);
    }
    let phi = trace.phi();
    let net = phi[m];
    let turns = (net / (2.0 * PI)).round();
    if (net - turns * 2.0 * PI).abs() > CLOSURE_TOL {
        return Err(SweepError::NotClosed(net));
    }
    let dt = 1.0 / (f * m as f64);
    let omega: Vec<f64> = trace.delta_phi.iter().map(|d| d / dt).collect();
    let omega_dot: Vec<f64> =
        (0..m).map(|k| (omega[(k + 1) % m] - omega[(k + m - 1) % m]) / (2.0 * dt)).collect();

    let (phi0, start) = match amplitude(&phi) {
        Ok(a) => (a.phi0, a.downstroke_start),
        Err(_) => (0.0, 0),
    };
    // a full-rotation output has no amplitude; scale by its mean rate instead
    let omega_ref = if phi0 > 0.0 { 2.0 * phi0 * f } else { net.abs().max(f64::MIN_POSITIVE) * f };
    let t_ref = 1.0 / (omega_ref * r2_over_chord);
    let t: Vec<f64> = (0..m).map(|k| (k as f64 + 0.5) * dt).collect();
    let omega_tilde: Vec<f64> = omega.iter().map(|w| w / omega_ref).collect();
    let (defect, crossings) = detect_defect(&omega_tilde);
    Ok(SweepProfile {
        t_tilde: t.iter().map(|v| v / t_ref).collect(),
        omega_tilde_prime: omega_dot.iter().map(|a| a * t_ref / omega_ref).collect(),
        omega_tilde,
        t,
        phi,
        omega,
        omega_dot,
        amplitude_phi0: phi0,
        frequency_f: f,
        omega_ref,
        t_ref,
        period_tilde: 1.0 / (f * t_ref),
        defect: defect || phi0 == 0.0,
        zero_crossings: crossings,
        downstroke_start: start,
    })
}

/// Sweep samples in the aerodynamic frame: cycle starts at the downstroke and
/// the downstroke runs in the positive direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeroSweep {
    /// Cycle fraction of each sample (interval midpoints).
    pub fraction: Vec<f64>,
    pub omega_tilde: Vec<f64>,
    pub omega_tilde_prime: Vec<f64>,
    pub period_tilde: f64,
}

impl SweepProfile {
    pub fn steps(&self) -> usize {
        self.omega.len()
    }

    pub fn aero_sweep(&self) -> AeroSweep {
        let m = self.steps();
        let idx = |i: usize| (self.downstroke_start + i) % m;
        AeroSweep {
            fraction: (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect(),
            omega_tilde: (0..m).map(|i| -self.omega_tilde[idx(i)]).collect(),
            omega_tilde_prime: (0..m).map(|i| -self.omega_tilde_prime[idx(i)]).collect(),
            period_tilde: self.period_tilde,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi_of(f: impl Fn(f64) -> f64, m: usize) -> Vec<f64> {
        (0..=m).map(|k| f(2.0 * PI * k as f64 / m as f64)).collect()
    }

    #[test]
    fn sine_amplitude() {
        let a = amplitude(&phi_of(|t| (60f64).to_radians() * t.sin(), 72)).unwrap();
        assert!((a.phi0.to_degrees() - 120.0).abs() < 1e-9);
        assert_eq!(a.reversals, 2);
        assert!(!a.defect);
        // phi maximum at a quarter revolution
        assert_eq!(a.downstroke_start, 18);
    }

    #[test]
    fn amplitude_is_angle_not_time() {
        // downstroke takes a third of the revolution, upstroke the rest
        let m = 72;
        let amp = 130f64.to_radians();
        let phi: Vec<f64> = (0..=m)
            .map(|k| {
                let s = k as f64 / m as f64;
                if s < 1.0 / 3.0 {
                    amp * (1.0 - 3.0 * s)
                } else {
                    amp * (s - 1.0 / 3.0) * 1.5
                }
            })
            .collect();
        let a = amplitude(&phi).unwrap();
        assert!((a.phi0 - amp).abs() < 1e-12);
    }

    #[test]
    fn four_reversals_are_defective() {
        // 0 -> 125 -> 120 -> 125(?) shape: spans 125, 5, 5, 125
        let pts = [0.0, 125.0, 120.0, 125.0, 0.0];
        let m = 72;
        let phi: Vec<f64> = (0..=m)
            .map(|k| {
                let s = k as f64 / m as f64 * 4.0;
                let i = (s.floor() as usize).min(3);
                let u = s - i as f64;
                (pts[i] + (pts[i + 1] - pts[i]) * u).to_radians()
            })
            .collect();
        let a = amplitude(&phi).unwrap();
        assert_eq!(a.reversals, 4);
        assert!(a.defect);
        assert!((a.phi0.to_degrees() - 5.0).abs() < 1e-9);
    }

    #[test]
    fn monotone_is_defect() {
        let phi: Vec<f64> = (0..=10).map(|k| k as f64).collect();
        assert_eq!(amplitude(&phi), Err(DefectError(0)));
    }

    #[test]
    fn defect_detection() {
        let m = 72;
        let w: Vec<f64> = (0..m).map(|k| (2.0 * PI * (k as f64 + 0.5) / m as f64).cos()).collect();
        assert_eq!(detect_defect(&w), (false, 2));
        let w2: Vec<f64> = (0..m)
            .map(|k| {
                let t = 2.0 * PI * (k as f64 + 0.5) / m as f64;
                t.cos() + 1.5 * (2.0 * t).cos()
            })
            .collect();
        assert_eq!(detect_defect(&w2), (true, 4));
        assert_eq!(detect_defect(&vec![0.3; m]), (true, 0));
    }

    #[test]
    fn reversal_time_interpolation() {
        let dt = 0.125;
        // linear ramp through zero between midpoints 1 and 2
        let w = [1.0, 0.5, -0.5, -1.0, -0.5, -0.25, 0.25, 0.5];
        let r = reversal_times(&w, dt);
        assert_eq!(r.len(), 2);
        assert!((r[0] - 2.0 * dt).abs() < 1e-12);
        assert!((r[1] - 6.0 * dt).abs() < 1e-12);
    }
}
