//! Prescribed chord motion in reference units.

use std::f64::consts::PI;

use crate::spline::{PeriodicSpline, SplineError};

/// Instantaneous chord motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChordState {
    pub omega_tilde: f64,
    pub alpha: f64,
    pub alpha_dot_tilde: f64,
}

/// Pitch angle over one cycle, as a function of the cycle fraction.
#[derive(Debug, Clone, PartialEq)]
pub enum PitchProfile {
    /// Constant mid-stroke angle with cosine ramps centred on the reversals.
    Trapezoid { mid_stroke_deg: f64, ramp_fraction: f64 },
    /// `90 - (90 - mid) sin(2 pi n)` degrees.
    Harmonic { mid_stroke_deg: f64 },
    /// Tabulated degrees against cycle fraction.
    Table(PeriodicSpline),
    Constant(f64),
}

impl PitchProfile {
    pub fn fruit_fly() -> Self {
        PitchProfile::Trapezoid { mid_stroke_deg: 40.0, ramp_fraction: 0.25 }
    }

    pub fn from_table(fraction: &[f64], alpha_deg: &[f64]) -> Result<Self, SplineError> {
        Ok(PitchProfile::Table(PeriodicSpline::new(fraction, alpha_deg, 1.0)?))
    }

    /// Angle (rad) and its derivative per unit cycle fraction.
    pub fn eval(&self, n: f64) -> (f64, f64) {
        let n = n.rem_euclid(1.0);
        match self {
            PitchProfile::Constant(a) => (*a, 0.0),
            PitchProfile::Harmonic { mid_stroke_deg } => {
                let amp = (90.0 - mid_stroke_deg).to_radians();
                let w = 2.0 * PI;
                (PI / 2.0 - amp * (w * n).sin(), -amp * w * (w * n).cos())
            }
            PitchProfile::Table(s) => (s.eval(n).to_radians(), s.derivative(n).to_radians()),
            PitchProfile::Trapezoid { mid_stroke_deg, ramp_fraction } => {
                let amp = (90.0 - mid_stroke_deg).to_radians();
                let r = *ramp_fraction;
                let half = r / 2.0;
                let down = mid_stroke_deg.to_radians();
                // distance from the reversal at 0 (wrapped) and at 0.5
                let n0 = if n > 0.5 { n - 1.0 } else { n };
                if n0.abs() < half {
                    let p = PI * (n0 + half) / r;
                    (PI / 2.0 + amp * p.cos(), -amp * p.sin() * PI / r)
                } else if (n - 0.5).abs() < half {
                    let p = PI * (n - 0.5 + half) / r;
                    (PI / 2.0 - amp * p.cos(), amp * p.sin() * PI / r)
                } else if n < 0.5 {
                    (down, 0.0)
                } else {
                    (PI - down, 0.0)
                }
            }
        }
    }
}

/// Chord kinematics over time in reference units.
#[derive(Debug, Clone, PartialEq)]
pub enum ChordKinematics {
    /// Impulsive start into steady translation.
    Steady { omega_tilde: f64, alpha: f64 },
    /// Periodic flapping with period `period_tilde`.
    Periodic { period_tilde: f64, omega: PeriodicSpline, pitch: PitchProfile },
}

impl ChordKinematics {
    /// Periodic motion from cycle-fraction samples of the sweep velocity.
    pub fn periodic(
        period_tilde: f64,
        fraction: &[f64],
        omega_tilde: &[f64],
        pitch: PitchProfile,
    ) -> Result<Self, SplineError> {
        Ok(ChordKinematics::Periodic { period_tilde, omega: PeriodicSpline::new(fraction, omega_tilde, 1.0)?, pitch })
    }

    /// Harmonic sweep `(pi/2) sin(2 pi n)` with unit mean speed.
    pub fn harmonic(period_tilde: f64, samples: usize, pitch: PitchProfile) -> Self {
        let fr: Vec<f64> = (0..samples).map(|i| i as f64 / samples as f64).collect();
        let w: Vec<f64> = fr.iter().map(|n| PI / 2.0 * (2.0 * PI * n).sin()).collect();
        Self::periodic(period_tilde, &fr, &w, pitch).expect("uniform knots")
    }

    pub fn period(&self) -> Option<f64> {
        match self {
            ChordKinematics::Steady { .. } => None,
            ChordKinematics::Periodic { period_tilde, .. } => Some(*period_tilde),
        }
    }

    pub fn state(&self, t: f64) -> ChordState {
        match self {
            ChordKinematics::Steady { omega_tilde, alpha } => {
                ChordState { omega_tilde: *omega_tilde, alpha: *alpha, alpha_dot_tilde: 0.0 }
            }
            ChordKinematics::Periodic { period_tilde, omega, pitch } => {
                let n = t / period_tilde;
                let (alpha, da) = pitch.eval(n);
                ChordState { omega_tilde: omega.eval(n), alpha, alpha_dot_tilde: da / period_tilde }
            }
        }
    }

    /// Sweep acceleration `d omega_tilde / d t_tilde`.
    pub fn sweep_acceleration(&self, t: f64) -> f64 {
        match self {
            ChordKinematics::Steady { .. } => 0.0,
            ChordKinematics::Periodic { period_tilde, omega, .. } => omega.derivative(t / period_tilde) / period_tilde,
        }
    }

    /// Largest sweep speed, sampled finely over one cycle.
    pub fn max_speed(&self) -> f64 {
        match self {
            ChordKinematics::Steady { omega_tilde, .. } => omega_tilde.abs(),
            ChordKinematics::Periodic { omega, .. } => {
                (0..4096).map(|i| omega.eval(i as f64 / 4096.0).abs()).fold(0.0, f64::max)
            }
        }
    }

    /// Pivot travel between two times (Simpson rule).
    pub(crate) fn displacement(&self, t0: f64, t1: f64) -> f64 {
        let (a, m, b) =
            (self.state(t0).omega_tilde, self.state(0.5 * (t0 + t1)).omega_tilde, self.state(t1).omega_tilde);
        (t1 - t0) / 6.0 * (a + 4.0 * m + b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_shape() {
        let p = PitchProfile::Trapezoid { mid_stroke_deg: 40.0, ramp_fraction: 0.25 };
        let deg = |n: f64| p.eval(n).0.to_degrees();
        assert!((deg(0.25) - 40.0).abs() < 1e-12);
        assert!((deg(0.75) - 140.0).abs() < 1e-12);
        assert!((deg(0.5) - 90.0).abs() < 1e-12);
        assert!((deg(0.0) - 90.0).abs() < 1e-12);
        assert!((deg(0.375) - 40.0).abs() < 1e-9);
        assert!((deg(0.625) - 140.0).abs() < 1e-9);
        // slope against a central difference
        let h = 1e-6;
        for n in [0.02, 0.45, 0.55, 0.93] {
            let fd = (p.eval(n + h).0 - p.eval(n - h).0) / (2.0 * h);
            assert!((fd - p.eval(n).1).abs() < 1e-5);
        }
    }

    #[test]
    fn harmonic_sweep_has_unit_mean_speed() {
        let k = ChordKinematics::harmonic(10.0, 64, PitchProfile::Constant(0.5));
        let n = 2000;
        let mean: f64 = (0..n).map(|i| k.state(10.0 * (i as f64 + 0.5) / n as f64).omega_tilde.abs()).sum::<f64>()
            / n as f64;
        assert!((mean - 1.0).abs() < 1e-4);
        assert!((k.max_speed() - PI / 2.0).abs() < 1e-4);
    }
}
