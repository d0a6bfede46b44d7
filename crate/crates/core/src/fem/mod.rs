//! Quasistatic nonlinear truss model of a linkage driven through one crank revolution.
//!
//! Every member is a two-node truss element. Rigid members carry a stiff axial
//! spring, slider members carry none. The crank has a soft rotational spring whose
//! rest angle advances by one step at a time. In the locked state a stiff spring on
//! the output member resists the same increment, which yields the mechanical
//! advantage.

mod element;
mod system;

use serde::{Deserialize, Serialize};

pub use element::{element_residual, element_tangent, ternary_residual_tangent, ElementState, TernaryContribution};
pub use system::{newton_step, FemModel, NewtonOutcome};

use crate::mech::Mechanism;
use crate::Vec2;
use element::wrap_angle;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FemParams {
    pub k_in: f64,
    pub k_out: f64,
    pub k_tern: f64,
    /// Axial stiffness of rigid members.
    pub g: f64,
    /// Crank steps per revolution.
    pub steps: usize,
    pub nr_tol: f64,
    pub nr_max_iter: usize,
}

impl Default for FemParams {
    fn default() -> Self {
        Self { k_in: 1.0, k_out: 1e8, k_tern: 1e8, g: 1e9, steps: 72, nr_tol: 1e-6, nr_max_iter: 50 }
    }
}

impl FemParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.k_in > 0.0) {
            return Err("k_in must be positive".into());
        }
        for (name, v) in [("k_out", self.k_out), ("k_tern", self.k_tern), ("g", self.g)] {
            if !(v >= 1e6 * self.k_in) {
                return Err(format!("{name} must be at least 1e6 * k_in"));
            }
        }
        if self.steps < 36 {
            return Err("steps must be at least 36".into());
        }
        if !(self.nr_tol > 0.0) || self.nr_max_iter == 0 {
            return Err("invalid Newton settings".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FemError {
    #[error("element between nodes {nodes:?} collapsed to zero length")]
    Collapsed { nodes: [usize; 2] },
    #[error("ternary members do not share exactly one node")]
    TernaryNotShared,
    #[error("singular tangent matrix")]
    SingularTangent,
    #[error("Newton iteration did not converge (residual {0:.3e})")]
    NotConverged(f64),
    #[error("zero force on the output member")]
    ZeroForce,
}

/// Why a revolution was classified singular.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularReason {
    Newton(String),
    /// Crank failed to follow its spring.
    Jam,
    /// Output jumped to another assembly branch.
    BranchJump,
    MechanicalAdvantage,
    LowFti,
    ZeroForce,
}

/// Result of one crank revolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkageTrace {
    /// Crank spring rest angle after each step.
    pub crank_angle: Vec<f64>,
    pub delta_phi: Vec<f64>,
    pub ma: Vec<f64>,
    pub efr: Vec<f64>,
    pub fti: Vec<f64>,
    /// Nodal positions at the unlocked equilibrium after each step.
    pub node_history: Vec<Vec<Vec2>>,
    pub singular: bool,
    pub singular_step: Option<usize>,
    pub singular_reason: Option<SingularReason>,
}

impl LinkageTrace {
    pub fn steps(&self) -> usize {
        self.delta_phi.len()
    }

    pub fn fti_cr(&self) -> f64 {
        self.fti.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Cumulative output rotation starting from zero (M+1 values).
    pub fn phi(&self) -> Vec<f64> {
        let mut phi = Vec::with_capacity(self.delta_phi.len() + 1);
        let mut acc = 0.0;
        phi.push(0.0);
        for d in &self.delta_phi {
            acc += d;
            phi.push(acc);
        }
        phi
    }
}

/// Sine of the angle between the output link and the force acting on it.
pub fn compute_efr(output_dir: Vec2, force: Vec2) -> Result<f64, FemError> {
    let (fn_, ln) = (force.norm(), output_dir.norm());
    if !(fn_ > 0.0) || !(ln > 0.0) {
        return Err(FemError::ZeroForce);
    }
    Ok((force.y * output_dir.x - force.x * output_dir.y) / (fn_ * ln))
}

const MA_LIMIT: f64 = 1e8;
const FTI_FLOOR: f64 = 1e-3;

pub fn simulate_revolution(mech: &Mechanism, params: &FemParams) -> LinkageTrace {
    let m = params.steps;
    let dtheta = 2.0 * std::f64::consts::PI / m as f64;
    let mut model = FemModel::new(mech, params);
    let crank = mech.input_member();
    let output = mech.output_member();
    let driver = mech.driver_member();
    let (out_ground, out_free) = mech.output_nodes();

    let mut trace = LinkageTrace {
        crank_angle: Vec::with_capacity(m),
        delta_phi: Vec::with_capacity(m),
        ma: Vec::with_capacity(m),
        efr: Vec::with_capacity(m),
        fti: Vec::with_capacity(m),
        node_history: Vec::with_capacity(m),
        singular: false,
        singular_step: None,
        singular_reason: None,
    };
    let fail = |trace: &mut LinkageTrace, k: usize, reason: SingularReason| {
        trace.singular = true;
        trace.singular_step = Some(k);
        trace.singular_reason = Some(reason);
    };

    let mut x = model.initial_positions();
    let theta_start = model.elements[crank].rest_angle;
    let mut phi_prev = model.member_angle(&x, output);

    for k in 0..m {
        let theta0 = theta_start + dtheta * (k + 1) as f64;
        model.elements[crank].rest_angle = theta0;
        model.elements[output].spring = 0.0;
        if let Err(e) = newton_step(&model, &mut x, params) {
            fail(&mut trace, k, SingularReason::Newton(e.to_string()));
            return trace;
        }
        let lag = wrap_angle(model.member_angle(&x, crank) - theta0);
        if lag.abs() > 0.05 * dtheta {
            fail(&mut trace, k, SingularReason::Jam);
            return trace;
        }
        let phi = model.member_angle(&x, output);
        let dphi = wrap_angle(phi - phi_prev);
        if dphi.abs() > std::f64::consts::FRAC_PI_2 {
            fail(&mut trace, k, SingularReason::BranchJump);
            return trace;
        }

        // locked probe from the unlocked equilibrium
        let mut xl = x.clone();
        model.elements[crank].rest_angle = theta0 + dtheta;
        model.elements[output].spring = params.k_out;
        model.elements[output].rest_angle = phi;
        let probe = newton_step(&model, &mut xl, params);
        model.elements[output].spring = 0.0;
        if let Err(e) = probe {
            fail(&mut trace, k, SingularReason::Newton(format!("locked: {e}")));
            return trace;
        }
        let dphi_lock = wrap_angle(model.member_angle(&xl, output) - phi);
        let tau_in = params.k_in * wrap_angle(theta0 + dtheta - model.member_angle(&xl, crank));
        let ma = params.k_out * dphi_lock / tau_in;
        let force = model.node_force(&xl, driver, out_free);
        let dir = Vec2::new(xl[2 * out_free] - xl[2 * out_ground], xl[2 * out_free + 1] - xl[2 * out_ground + 1]);
        let efr = match (force, ma.is_finite()) {
            (Ok(f), true) => compute_efr(dir, f),
            (Ok(_), false) => {
                fail(&mut trace, k, SingularReason::MechanicalAdvantage);
                return trace;
            }
            (Err(e), _) => Err(e),
        };
        let Ok(efr) = efr else {
            fail(&mut trace, k, SingularReason::ZeroForce);
            return trace;
        };

        trace.crank_angle.push(theta0);
        trace.delta_phi.push(dphi);
        trace.ma.push(ma);
        trace.efr.push(efr);
        trace.fti.push((ma * efr).abs());
        trace.node_history.push((0..mech.node_count()).map(|n| Vec2::new(x[2 * n], x[2 * n + 1])).collect());
        phi_prev = phi;

        if ma.abs() > MA_LIMIT {
            fail(&mut trace, k, SingularReason::MechanicalAdvantage);
            return trace;
        }
    }
    if trace.fti_cr() < FTI_FLOOR {
        let k = trace.fti.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i);
        trace.singular = true;
        trace.singular_step = k;
        trace.singular_reason = Some(SingularReason::LowFti);
    }
    trace
}
