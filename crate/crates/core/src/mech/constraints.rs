//! Closed-form kinematic constraints on a candidate mechanism.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::polygon::{ConvexPolygon, GeometryError};
use super::topology::{Mechanism, MemberKind, StageGeometry};
use crate::Vec2;

pub const DEFAULT_GRASHOF_OFFSET: f64 = 0.4;
pub const DEFAULT_DELTA_QRR: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstraintLimits {
    pub r_max: f64,
    pub phi_min_deg: f64,
    pub fti_min: f64,
    pub delta_qrr: f64,
    pub grashof_offset: f64,
}

impl Default for ConstraintLimits {
    fn default() -> Self {
        Self {
            r_max: 5.0,
            phi_min_deg: 120.0,
            fti_min: 0.65,
            delta_qrr: DEFAULT_DELTA_QRR,
            grashof_offset: DEFAULT_GRASHOF_OFFSET,
        }
    }
}

/// `(l23 + l34 + l41 + offset) - (l12 + 2 max(l23, l34, l41))` on lengths
/// normalized by the crank `l12`; satisfied when nonnegative.
pub fn grashof_margin(l12: f64, l23: f64, l34: f64, l41: f64, offset: f64) -> f64 {
    let (a, b, c) = (l23 / l12, l34 / l12, l41 / l12);
    (a + b + c + offset) - (1.0 + 2.0 * a.max(b).max(c))
}

fn acos_checked(x: f64) -> Result<f64, GeometryError> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(GeometryError::NoLimitPositions(x));
    }
    Ok(x.acos())
}

/// Ratio of crank angles swept during the two output half-strokes.
pub fn quick_return_ratio(stage: &StageGeometry) -> Result<f64, GeometryError> {
    let (t1, t2) = match *stage {
        StageGeometry::CrankRocker { l12, l23, l34, l41 } => {
            for l in [l12, l23, l34, l41] {
                if !(l > 0.0) {
                    return Err(GeometryError::NonPositiveLength(l));
                }
            }
            let (dm, dp) = (l23 - l12, l23 + l12);
            if dm <= 0.0 {
                return Err(GeometryError::NonPositiveLength(dm));
            }
            let t2 = acos_checked((l34 * l34 - (l41 * l41 + dm * dm)) / (2.0 * l41 * dm))? + PI;
            let t1 = acos_checked((l34 * l34 - (l41 * l41 + dp * dp)) / (2.0 * l41 * dp))?;
            (t1, t2)
        }
        StageGeometry::CrankSlider { l12, l23, offset } => {
            let dm = l23 - l12;
            if !(l12 > 0.0) || dm <= 0.0 {
                return Err(GeometryError::NonPositiveLength(dm.min(l12)));
            }
            let t2 = acos_checked(offset / dm)? + PI;
            let t1 = acos_checked(offset / (l23 + l12))?;
            (t1, t2)
        }
    };
    let span = t2 - t1;
    Ok(span / (2.0 * PI - span))
}

/// Largest signed distance of any node outside the polygon over all recorded steps.
pub fn box_violation(history: &[Vec<Vec2>], polygon: &ConvexPolygon) -> Result<f64, GeometryError> {
    let mut worst = f64::NEG_INFINITY;
    for step in history {
        for p in step {
            worst = worst.max(polygon.signed_distance(*p));
        }
    }
    if worst == f64::NEG_INFINITY {
        return Err(GeometryError::DegeneratePolygon("empty trace"));
    }
    Ok(worst)
}

/// Smallest and largest rigid-member length relative to the crank, crank excluded.
pub fn link_ratios(m: &Mechanism) -> (f64, f64) {
    let crank = m.member_length(m.input_member());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (k, mem) in m.members().iter().enumerate() {
        if k == m.input_member() || mem.kind != MemberKind::Rigid {
            continue;
        }
        let r = m.member_length(k) / crank;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    (lo, hi)
}

/// Outcome of the six kinematic constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub link_ratio_ok: bool,
    /// Ratio farthest outside (or closest to) the admissible interval.
    pub worst_link_ratio: f64,
    /// Present for crank-rocker input stages.
    pub grashof_margin: Option<f64>,
    /// None when the limit positions do not exist.
    pub qrr: Option<f64>,
    pub amplitude_deg: f64,
    pub fti_cr: f64,
    /// None when the mechanism file has no box polygon.
    pub box_violation: Option<f64>,
    pub feasible: bool,
    /// Normalized sum of constraint violations, zero iff feasible.
    pub violation: f64,
}

/// Per-constraint pass flags, in the order link ratio, Grashof, QRR, amplitude, FTI, box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintFlags(pub [bool; 6]);

impl ConstraintReport {
    pub fn evaluate(
        m: &Mechanism,
        history: &[Vec<Vec2>],
        amplitude_rad: f64,
        fti_cr: f64,
        limits: &ConstraintLimits,
    ) -> Self {
        let (lo, hi) = link_ratios(m);
        let link_ratio_ok = lo > 1.0 && hi <= limits.r_max;
        let worst_link_ratio = if (lo - 1.0) < (limits.r_max - hi) / limits.r_max { lo } else { hi };
        let link_v = (1.0 - lo).max(0.0) + ((hi - limits.r_max) / limits.r_max).max(0.0);

        let stage = m.stage_geometry();
        let grashof = match stage {
            StageGeometry::CrankRocker { l12, l23, l34, l41 } => {
                Some(grashof_margin(l12, l23, l34, l41, limits.grashof_offset))
            }
            StageGeometry::CrankSlider { .. } => None,
        };
        let grashof_ok = grashof.is_none_or(|g| g >= 0.0);
        let grashof_v = grashof.map_or(0.0, |g| (-g).max(0.0));

        let qrr = quick_return_ratio(&stage).ok();
        let qrr_ok = qrr.is_some_and(|q| (q - 1.0).abs() < limits.delta_qrr);
        let qrr_v = qrr.map_or(1.0, |q| ((q - 1.0).abs() - limits.delta_qrr).max(0.0) / limits.delta_qrr);

        let amplitude_deg = amplitude_rad.to_degrees();
        let amp_ok = amplitude_deg >= limits.phi_min_deg;
        let amp_v = ((limits.phi_min_deg - amplitude_deg) / limits.phi_min_deg).max(0.0);

        let fti_ok = fti_cr >= limits.fti_min;
        let fti_v = ((limits.fti_min - fti_cr) / limits.fti_min).max(0.0);

        let box_violation = m.polygon().and_then(|p| box_violation(history, p).ok());
        let box_ok = box_violation.is_none_or(|b| b <= 0.0);
        let box_v = box_violation.map_or(0.0, |b| b.max(0.0));

        let flags = [link_ratio_ok, grashof_ok, qrr_ok, amp_ok, fti_ok, box_ok];
        let feasible = flags.iter().all(|f| *f);
        let mut violation = link_v + grashof_v + qrr_v + amp_v + fti_v + box_v;
        if !feasible {
            violation = violation.max(1e-12);
        } else {
            violation = 0.0;
        }
        Self {
            link_ratio_ok,
            worst_link_ratio,
            grashof_margin: grashof,
            qrr,
            amplitude_deg,
            fti_cr,
            box_violation,
            feasible,
            violation,
        }
    }

    pub fn flags(&self, limits: &ConstraintLimits) -> ConstraintFlags {
        ConstraintFlags([
            self.link_ratio_ok,
            self.grashof_margin.is_none_or(|g| g >= 0.0),
            self.qrr.is_some_and(|q| (q - 1.0).abs() < limits.delta_qrr),
            self.amplitude_deg >= limits.phi_min_deg,
            self.fti_cr >= limits.fti_min,
            self.box_violation.is_none_or(|b| b <= 0.0),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grashof_examples() {
        assert!((grashof_margin(1.0, 2.0, 2.0, 2.0, 0.4) - 1.4).abs() < 1e-12);
        assert!((grashof_margin(1.0, 3.0, 3.0, 3.0, 0.4) - 2.4).abs() < 1e-12);
        assert!((grashof_margin(2.0, 2.0, 2.0, 2.0, 0.4) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn qrr_crank_rocker_reference() {
        let q = quick_return_ratio(&StageGeometry::CrankRocker { l12: 1.0, l23: 4.0, l34: 3.0, l41: 3.0 })
            .unwrap();
        // independent evaluation: theta2 = acos(-1/2) + pi, theta1 = acos(-5/6)
        let t2 = (-0.5f64).acos() + PI;
        let t1 = (-5.0f64 / 6.0).acos();
        let expect = (t2 - t1) / (2.0 * PI - (t2 - t1));
        assert!((q - expect).abs() < 1e-14);
        assert!((q - 0.744).abs() < 1e-3);
    }

    #[test]
    fn qrr_inline_slider_is_one() {
        let q = quick_return_ratio(&StageGeometry::CrankSlider { l12: 1.0, l23: 3.0, offset: 0.0 }).unwrap();
        assert_eq!(q, 1.0);
    }

    #[test]
    fn qrr_geometry_error() {
        let r = quick_return_ratio(&StageGeometry::CrankRocker { l12: 1.0, l23: 1.5, l34: 8.0, l41: 1.2 });
        assert!(matches!(r, Err(GeometryError::NoLimitPositions(_))));
        let r = quick_return_ratio(&StageGeometry::CrankSlider { l12: 1.0, l23: 2.0, offset: 1.5 });
        assert!(r.is_err());
    }
}
