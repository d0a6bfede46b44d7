//! Linkage → sweep → chord aerodynamics → wing loads.

use serde::{Deserialize, Serialize};

use crate::fem::{simulate_revolution, FemParams, LinkageTrace};
use crate::loads::{compute_loads, FlapEnvironment, LoadResult, LoadSummary, WingMorphology};
use crate::mech::{ConstraintLimits, ConstraintReport, DesignVector, Mechanism};
use crate::sweep::{profile_from_trace, SweepError, SweepProfile};
use crate::uvlm::{simulate_cycles, AeroCoefficients, ChordKinematics, PitchProfile, UvlmParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureTag {
    Singular,
    Defect,
    Assembly,
    Aero,
}

impl std::fmt::Display for FailureTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FailureTag::Singular => "singular",
            FailureTag::Defect => "defect",
            FailureTag::Assembly => "assembly",
            FailureTag::Aero => "aero",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub fem: FemParams,
    pub uvlm: UvlmParams,
    pub morphology: WingMorphology,
    pub environment: FlapEnvironment,
    pub pitch: PitchProfile,
    pub limits: ConstraintLimits,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            fem: FemParams::default(),
            uvlm: UvlmParams::default(),
            morphology: WingMorphology::default(),
            environment: FlapEnvironment::default(),
            pitch: PitchProfile::fruit_fly(),
            limits: ConstraintLimits::default(),
        }
    }
}

/// Outcome of one design evaluation. Objectives are present only when the
/// design is kinematically feasible and the aerodynamic stage succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub failure: Option<FailureTag>,
    pub report: Option<ConstraintReport>,
    pub loads: Option<LoadSummary>,
}

impl Evaluation {
    pub fn failed(tag: FailureTag) -> Self {
        Self { failure: Some(tag), report: None, loads: None }
    }

    pub fn feasible(&self) -> bool {
        self.failure.is_none() && self.report.as_ref().is_some_and(|r| r.feasible) && self.loads.is_some()
    }

    /// (mean lift gf, mean power W) for feasible designs.
    pub fn objectives(&self) -> Option<(f64, f64)> {
        if self.feasible() {
            self.loads.map(|l| (l.mean_lift_gf, l.mean_power_w))
        } else {
            None
        }
    }

    /// Ranking penalty for infeasible points. Failed stages rank below any
    /// evaluated constraint violation.
    pub fn violation(&self) -> f64 {
        match (self.failure, &self.report) {
            (None, Some(r)) => r.violation,
            (Some(FailureTag::Aero), Some(r)) => r.violation + 1e3,
            (Some(FailureTag::Defect), Some(r)) => r.violation + 1e6,
            (Some(FailureTag::Defect), None) => 1e6 + 1.0,
            (Some(FailureTag::Singular), _) => 1e7,
            (Some(FailureTag::Assembly), _) => 1e8,
            (Some(FailureTag::Aero), None) | (None, None) => 1e3,
        }
    }
}

/// Kinematic intermediate results.
#[derive(Debug, Clone)]
pub struct KinematicRun {
    pub trace: LinkageTrace,
    pub profile: Result<SweepProfile, SweepError>,
    pub report: Option<ConstraintReport>,
    pub failure: Option<FailureTag>,
}

pub fn run_kinematics(mech: &Mechanism, cfg: &PipelineConfig) -> KinematicRun {
    let trace = simulate_revolution(mech, &cfg.fem);
    let profile = profile_from_trace(&trace, cfg.environment.frequency_hz, cfg.morphology.r2_over_chord());
    let (report, failure) = match &profile {
        Err(SweepError::Singular) | Err(SweepError::Empty) => (None, Some(FailureTag::Singular)),
        Err(SweepError::NotClosed(_)) => (None, Some(FailureTag::Defect)),
        Ok(p) => {
            let r = ConstraintReport::evaluate(mech, &trace.node_history, p.amplitude_phi0, trace.fti_cr(), &cfg.limits);
            (Some(r), p.defect.then_some(FailureTag::Defect))
        }
    };
    KinematicRun { trace, profile, report, failure }
}

/// Chord kinematics in the aerodynamic frame for a sweep profile.
pub fn chord_kinematics(profile: &SweepProfile, pitch: &PitchProfile) -> ChordKinematics {
    let s = profile.aero_sweep();
    ChordKinematics::periodic(s.period_tilde, &s.fraction, &s.omega_tilde, pitch.clone())
        .expect("uniform cycle fractions")
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub kinematics: KinematicRun,
    pub aero: Option<AeroCoefficients>,
    pub loads: Option<LoadResult>,
    pub evaluation: Evaluation,
}

/// Aerodynamic and load stages for an already simulated, nondefective profile.
pub fn run_aero(
    profile: &SweepProfile,
    cfg: &PipelineConfig,
) -> Result<(AeroCoefficients, LoadResult), FailureTag> {
    let kin = chord_kinematics(profile, &cfg.pitch);
    let phi0 = profile.amplitude_phi0;
    let re = cfg.morphology.reynolds(&cfg.environment, phi0);
    let aero = simulate_cycles(&kin, &cfg.uvlm, re).map_err(|_| FailureTag::Aero)?;
    let loads = compute_loads(&aero, &cfg.morphology, &cfg.environment, phi0, cfg.morphology.r2_over_chord())
        .map_err(|_| FailureTag::Aero)?;
    if !loads.summary.mean_lift_gf.is_finite() || !loads.summary.mean_power_w.is_finite() {
        return Err(FailureTag::Aero);
    }
    Ok((aero, loads))
}

/// Full pipeline. With `force_aero` the chord model also runs on kinematically
/// infeasible (but nondefective) linkages.
pub fn run_pipeline(mech: &Mechanism, cfg: &PipelineConfig, force_aero: bool) -> PipelineRun {
    let kinematics = run_kinematics(mech, cfg);
    let mut evaluation = Evaluation { failure: kinematics.failure, report: kinematics.report.clone(), loads: None };
    let mut aero = None;
    let mut loads = None;
    let go = evaluation.failure.is_none()
        && (force_aero || kinematics.report.as_ref().is_some_and(|r| r.feasible));
    if go {
        let profile = kinematics.profile.as_ref().expect("nondefective profile");
        match run_aero(profile, cfg) {
            Ok((a, l)) => {
                evaluation.loads = Some(l.summary);
                aero = Some(a);
                loads = Some(l);
            }
            Err(tag) => evaluation.failure = Some(tag),
        }
    }
    PipelineRun { kinematics, aero, loads, evaluation }
}

pub fn evaluate_mechanism(mech: &Mechanism, cfg: &PipelineConfig) -> Evaluation {
    run_pipeline(mech, cfg, false).evaluation
}

/// Evaluate a design vector on the topology of `base`.
pub fn evaluate_design(design: &DesignVector, base: &Mechanism, cfg: &PipelineConfig) -> Evaluation {
    match base.with_design(design) {
        Ok(m) => evaluate_mechanism(&m, cfg),
        Err(_) => Evaluation::failed(FailureTag::Assembly),
    }
}
