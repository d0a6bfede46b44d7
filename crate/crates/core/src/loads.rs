//! Blade-element reduction of chord coefficients to wing loads.
//!
//! Everything is CGS internally. Lift is reported in gram-force, power in watts
//! and input torque in kg·cm.

use serde::{Deserialize, Serialize};

use crate::uvlm::AeroCoefficients;

/// Standard gravity in cm/s².
pub const G0: f64 = 980.665;
const DYN_CM_PER_KG_CM: f64 = 1000.0 * G0;
const ERG_PER_JOULE: f64 = 1e7;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LoadError {
    #[error("invalid morphology: {0}")]
    Morphology(&'static str),
    #[error("invalid environment: {0}")]
    Environment(&'static str),
    #[error("target lift must be positive (got {0})")]
    TargetLift(f64),
    #[error("reference lift must be positive (got {0})")]
    ReferenceLift(f64),
    #[error("series lengths differ")]
    Length,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WingMorphology {
    /// Wing length R (cm).
    pub length_cm: f64,
    pub aspect_ratio: f64,
    /// Nondimensional second moment of area, squared.
    pub r2_sq: f64,
    /// Nondimensional third moment of area, cubed.
    pub r3_cu: f64,
    pub thickness_cm: f64,
    pub rod_diameter_cm: f64,
    /// g/cc
    pub rod_density: f64,
    /// g/cc
    pub membrane_density: f64,
}

impl Default for WingMorphology {
    fn default() -> Self {
        Self {
            length_cm: 22.0,
            aspect_ratio: 3.7425,
            r2_sq: 0.472,
            r3_cu: 0.3415,
            thickness_cm: 10e-4,
            rod_diameter_cm: 0.08,
            rod_density: 1.6,
            membrane_density: 1.39,
        }
    }
}

impl WingMorphology {
    pub fn validate(&self) -> Result<(), LoadError> {
        let m = LoadError::Morphology;
        if !(self.length_cm > 0.0 && self.aspect_ratio > 0.0) {
            return Err(m("length and aspect ratio must be positive"));
        }
        if !(self.r2_sq > 0.0 && self.r2_sq < 1.0 && self.r3_cu > 0.0 && self.r3_cu < 1.0) {
            return Err(m("area moments must lie in (0, 1)"));
        }
        if !(self.thickness_cm > 0.0) {
            return Err(m("thickness must be positive"));
        }
        if !(self.rod_diameter_cm >= 0.0 && self.rod_density >= 0.0 && self.membrane_density >= 0.0) {
            return Err(m("rod and membrane values must be nonnegative"));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.length_cm * self.length_cm / self.aspect_ratio
    }

    pub fn mean_chord(&self) -> f64 {
        self.length_cm / self.aspect_ratio
    }

    pub fn r2_hat(&self) -> f64 {
        self.r2_sq.sqrt()
    }

    /// r2 / c, the sweep-to-chord length ratio used by the chord model.
    pub fn r2_over_chord(&self) -> f64 {
        self.r2_hat() * self.aspect_ratio
    }

    /// Total skeleton rod length: six spars plus a root rod of 2/5 chord.
    pub fn rod_length(&self) -> f64 {
        6.0 * self.length_cm + 0.4 * self.mean_chord()
    }

    /// Effective wing density: skeleton mass smeared over the membrane.
    pub fn wing_density(&self) -> f64 {
        let rc = 0.5 * self.rod_diameter_cm;
        let m_c = self.rod_length() * std::f64::consts::PI * rc * rc * self.rod_density;
        m_c / (self.area() * self.thickness_cm) + self.membrane_density
    }

    pub fn reynolds(&self, env: &FlapEnvironment, phi0: f64) -> f64 {
        2.0 * phi0 * env.frequency_hz * self.length_cm.powi(2) * self.r2_hat() / (self.aspect_ratio * env.viscosity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlapEnvironment {
    pub frequency_hz: f64,
    /// g/cc
    pub density: f64,
    /// cm²/s
    pub viscosity: f64,
}

impl Default for FlapEnvironment {
    fn default() -> Self {
        Self { frequency_hz: 15.0, density: 1.225e-3, viscosity: 0.1568 }
    }
}

impl FlapEnvironment {
    pub fn validate(&self) -> Result<(), LoadError> {
        if self.frequency_hz > 0.0 && self.density > 0.0 && self.viscosity > 0.0 {
            Ok(())
        } else {
            Err(LoadError::Environment("frequency, density and viscosity must be positive"))
        }
    }
}

fn omega_ref(env: &FlapEnvironment, phi0: f64) -> f64 {
    2.0 * phi0 * env.frequency_hz
}

/// Lift in gf for each coefficient sample.
pub fn lift_series(c_l: &[f64], morph: &WingMorphology, env: &FlapEnvironment, phi0: f64) -> Vec<f64> {
    let w = omega_ref(env, phi0);
    let scale = 0.5 * env.density * w * w * morph.r2_sq * morph.length_cm.powi(2) * morph.area();
    c_l.iter().map(|c| c * scale / G0).collect()
}

/// Mechanical power in W.
pub fn power_series(
    c_h: &[f64],
    omega_tilde: &[f64],
    omega_tilde_prime: &[f64],
    morph: &WingMorphology,
    env: &FlapEnvironment,
    phi0: f64,
) -> Result<Vec<f64>, LoadError> {
    if c_h.len() != omega_tilde.len() || c_h.len() != omega_tilde_prime.len() {
        return Err(LoadError::Length);
    }
    let w = omega_ref(env, phi0);
    let scale = env.density * w.powi(3) * morph.length_cm.powi(3) * morph.area();
    let inertia = morph.wing_density() / env.density * morph.thickness_cm / morph.mean_chord() * morph.r2_hat().powi(3);
    Ok((0..c_h.len())
        .map(|k| scale * (inertia * omega_tilde_prime[k] - 0.5 * c_h[k] * morph.r3_cu) * omega_tilde[k] / ERG_PER_JOULE)
        .collect())
}

/// Peak crank torque (kg·cm) from power in W at uniform crank speed.
pub fn peak_input_torque(power_w: &[f64], f: f64) -> f64 {
    power_w.iter().map(|p| (p * ERG_PER_JOULE / (2.0 * std::f64::consts::PI * f)).abs()).fold(0.0, f64::max)
        / DYN_CM_PER_KG_CM
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadResult {
    /// Seconds.
    pub t: Vec<f64>,
    pub lift_gf: Vec<f64>,
    /// Torques about the flapping axis, dyn·cm.
    pub tau_aero: Vec<f64>,
    pub tau_inertial: Vec<f64>,
    pub tau_mech: Vec<f64>,
    pub power_w: Vec<f64>,
    pub summary: LoadSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadSummary {
    pub mean_lift_gf: f64,
    pub mean_power_w: f64,
    pub peak_torque_kgcm: f64,
    pub f_hz: f64,
    pub phi0_deg: f64,
    #[serde(rename = "mean_CL")]
    pub mean_cl: f64,
}

/// Full load reduction, averaged over the last simulated cycle.
pub fn compute_loads(
    aero: &AeroCoefficients,
    morph: &WingMorphology,
    env: &FlapEnvironment,
    phi0: f64,
    r2_over_chord: f64,
) -> Result<LoadResult, LoadError> {
    morph.validate()?;
    env.validate()?;
    let w = omega_ref(env, phi0);
    let t_ref = 1.0 / (w * r2_over_chord);
    let lift_gf = lift_series(&aero.c_l, morph, env, phi0);
    let power_w = power_series(&aero.c_h, &aero.omega_tilde, &aero.omega_tilde_prime, morph, env, phi0)?;

    let s = morph.area();
    let r = morph.length_cm;
    let q = 0.5 * env.density * w * w * r.powi(3) * s * morph.r3_cu;
    let inertia = morph.wing_density() * morph.thickness_cm * s * r * r * morph.r2_sq;
    let tau_aero: Vec<f64> = aero.c_h.iter().map(|c| q * c).collect();
    let tau_inertial: Vec<f64> = aero.omega_tilde_prime.iter().map(|a| inertia * a * w / t_ref).collect();
    let tau_mech: Vec<f64> = tau_inertial.iter().zip(&tau_aero).map(|(i, a)| i - a).collect();

    let range = if aero.cycle_count > 0 { aero.last_cycle() } else { 0..aero.t.len() };
    let mean = |v: &[f64]| if range.is_empty() { 0.0 } else { v[range.clone()].iter().sum::<f64>() / range.len() as f64 };
    let summary = LoadSummary {
        mean_lift_gf: mean(&lift_gf),
        mean_power_w: mean(&power_w),
        peak_torque_kgcm: peak_input_torque(&power_w[range.clone()], env.frequency_hz),
        f_hz: env.frequency_hz,
        phi0_deg: phi0.to_degrees(),
        mean_cl: mean(&aero.c_l),
    };
    Ok(LoadResult { t: aero.t.iter().map(|t| t * t_ref).collect(), lift_gf, tau_aero, tau_inertial, tau_mech, power_w, summary })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rescaled {
    pub f_hz: f64,
    pub mean_lift_gf: f64,
    pub mean_power_w: f64,
    pub peak_torque_kgcm: f64,
}

/// Frequency that produces `target_lift` with frozen coefficients, and the
/// power and torque at that frequency.
pub fn frequency_rescale(reference: &LoadSummary, target_lift: f64) -> Result<Rescaled, LoadError> {
    if !(target_lift > 0.0) {
        return Err(LoadError::TargetLift(target_lift));
    }
    if !(reference.mean_lift_gf > 0.0) {
        return Err(LoadError::ReferenceLift(reference.mean_lift_gf));
    }
    let ratio = (target_lift / reference.mean_lift_gf).sqrt();
    Ok(Rescaled {
        f_hz: reference.f_hz * ratio,
        mean_lift_gf: target_lift,
        mean_power_w: reference.mean_power_w * ratio.powi(3),
        peak_torque_kgcm: reference.peak_torque_kgcm * ratio * ratio,
    })
}
