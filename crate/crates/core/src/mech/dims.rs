//! Physical dimension vectors and reassembly of perturbed linkages.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::polygon::cross;
use super::topology::{DesignError, DesignVector, Mechanism, MemberKind, SliderAxis};
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DimKind {
    /// Rigid member length (member index).
    Length { member: usize },
    /// Fixed slider coordinate measured from the crank pivot (node index).
    SliderCoord { node: usize, axis: SliderAxis },
    /// Included ternary angle (ternary index).
    Angle { ternary: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimEntry {
    pub label: String,
    pub kind: DimKind,
    /// mm for lengths and slider coordinates, rad for angles.
    pub value: f64,
}

impl DimEntry {
    pub fn is_angle(&self) -> bool {
        matches!(self.kind, DimKind::Angle { .. })
    }
}

/// Manufacturing dimensions: rigid lengths in member order, slider coordinates,
/// then included ternary angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionVector {
    pub entries: Vec<DimEntry>,
    pub crank_length_mm: f64,
}

impl DimensionVector {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.label.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AssemblyError {
    #[error("dimension vector does not match the topology")]
    Mismatch,
    #[error("nonpositive length {0} in entry {1}")]
    NonPositive(f64, String),
    #[error("included angle {0} outside (0, pi]")]
    BadAngle(f64),
    #[error("assembly failure: loop closure infeasible (residual {0:.3e})")]
    NoAssembly(f64),
    #[error(transparent)]
    Design(#[from] DesignError),
}

pub fn dims_from_design(v: &DesignVector, mech: &Mechanism) -> Result<DimensionVector, DesignError> {
    let m = mech.with_design(v)?;
    Ok(dims_of(&m))
}

/// Dimension vector of a mechanism at its current positions.
pub fn dims_of(m: &Mechanism) -> DimensionVector {
    let scale = m.crank_length_mm();
    let id = |n: usize| m.node_id(n);
    let mut entries = Vec::new();
    for (k, mem) in m.members().iter().enumerate() {
        if mem.kind == MemberKind::Rigid {
            entries.push(DimEntry {
                label: format!("l{}{}", id(mem.i), id(mem.j)),
                kind: DimKind::Length { member: k },
                value: m.member_length(k) * scale,
            });
        }
    }
    let pivot = m.positions()[m.pivot()];
    for &(node, axis) in m.sliders() {
        let c = axis.fixed_coord();
        entries.push(DimEntry {
            label: format!("{}{}", if c == 0 { "x" } else { "y" }, id(node)),
            kind: DimKind::SliderCoord { node, axis },
            value: (m.positions()[node][c] - pivot[c]) * scale,
        });
    }
    for (t, tr) in m.ternaries().iter().enumerate() {
        let far = |k: usize| {
            let mem = m.members()[k];
            if mem.i == tr.apex {
                mem.j
            } else {
                mem.i
            }
        };
        entries.push(DimEntry {
            label: format!("a{}{}{}", id(far(tr.a)), id(tr.apex), id(far(tr.b))),
            kind: DimKind::Angle { ternary: t },
            value: m.ternary_angle(t).abs(),
        });
    }
    DimensionVector { entries, crank_length_mm: scale }
}

/// Rebuild nodal coordinates from (possibly perturbed) dimensions.
///
/// Lengths are renormalized by the perturbed crank. A minimum-norm Gauss-Newton
/// iteration starting at `reference` selects the nearest assembly branch. The
/// first grounded node after the pivot keeps its reference direction.
pub fn design_from_dims(
    d: &DimensionVector,
    mech: &Mechanism,
    reference: &DesignVector,
) -> Result<DesignVector, AssemblyError> {
    let crank = mech.input_member();
    let crank_len = d
        .entries
        .iter()
        .find(|e| e.kind == DimKind::Length { member: crank })
        .map(|e| e.value)
        .ok_or(AssemblyError::Mismatch)?;
    for e in &d.entries {
        if e.is_angle() {
            if !(e.value > 0.0 && e.value <= std::f64::consts::PI) {
                return Err(AssemblyError::BadAngle(e.value));
            }
        } else if matches!(e.kind, DimKind::Length { .. }) && !(e.value > 0.0) {
            return Err(AssemblyError::NonPositive(e.value, e.label.clone()));
        }
    }
    let nominal = dims_of(mech);
    if nominal.entries.len() != d.entries.len()
        || nominal.entries.iter().zip(&d.entries).any(|(a, b)| a.kind != b.kind)
    {
        return Err(AssemblyError::Mismatch);
    }

    let base = mech.with_design(reference)?;
    let ref_signs: Vec<f64> =
        (0..base.ternaries().len()).map(|t| base.ternary_angle(t).signum()).collect();
    let pivot = base.pivot();
    let anchor = (0..base.node_count()).find(|&n| n != pivot && base.grounded()[n]);
    let anchor_dir = anchor.map(|g| {
        let r = base.positions()[g] - base.positions()[pivot];
        r / r.norm()
    });

    let mut slider_offset = 0.0;
    let mut targets = Vec::new();
    for e in &d.entries {
        match e.kind {
            DimKind::SliderCoord { node, axis } if Some((node, axis.fixed_coord())) == base.layout().slider_slot => {
                slider_offset = e.value / crank_len;
            }
            DimKind::Length { member } if member == crank => {}
            DimKind::Angle { ternary } => targets.push((e.kind, ref_signs[ternary] * e.value)),
            _ => targets.push((e.kind, e.value / crank_len)),
        }
    }

    let layout = base.layout().clone();
    let mut x = DVector::from_vec(reference.coords.clone());
    let mut positions: Vec<Vec2> = base.positions().to_vec();
    let place = |x: &DVector<f64>, positions: &mut Vec<Vec2>| {
        for (&(n, k), &c) in layout.slots.iter().zip(x.iter()) {
            positions[n][k] = c;
        }
        if let Some((n, k)) = layout.slider_slot {
            positions[n][k] = positions[pivot][k] + slider_offset;
        }
    };
    let col: std::collections::HashMap<(usize, usize), usize> =
        layout.slots.iter().enumerate().map(|(c, s)| (*s, c)).collect();
    let neq = targets.len() + usize::from(anchor.is_some());

    let mut res = f64::INFINITY;
    for _ in 0..100 {
        place(&x, &mut positions);
        let mut r = DVector::zeros(neq);
        let mut jac = DMatrix::zeros(neq, x.len());
        let put = |row: usize, node: usize, g: Vec2, jac: &mut DMatrix<f64>| {
            for k in 0..2 {
                if let Some(&c) = col.get(&(node, k)) {
                    jac[(row, c)] += g[k];
                }
            }
        };
        for (row, (kind, target)) in targets.iter().enumerate() {
            match *kind {
                DimKind::Length { member } => {
                    let m = base.members()[member];
                    let dv = positions[m.j] - positions[m.i];
                    let l = dv.norm();
                    r[row] = l - target;
                    put(row, m.j, dv / l, &mut jac);
                    put(row, m.i, -dv / l, &mut jac);
                }
                DimKind::SliderCoord { node, axis } => {
                    let k = axis.fixed_coord();
                    r[row] = positions[node][k] - positions[pivot][k] - target;
                    let mut g = Vec2::zeros();
                    g[k] = 1.0;
                    put(row, node, g, &mut jac);
                }
                DimKind::Angle { ternary } => {
                    let tr = base.ternaries()[ternary];
                    let far = |k: usize| {
                        let mem = base.members()[k];
                        if mem.i == tr.apex {
                            mem.j
                        } else {
                            mem.i
                        }
                    };
                    let (na, nb) = (far(tr.a), far(tr.b));
                    let u = positions[na] - positions[tr.apex];
                    let v = positions[nb] - positions[tr.apex];
                    let ang = cross(u, v).atan2(u.dot(&v));
                    r[row] = wrap(ang - target);
                    let gu = -Vec2::new(-u.y, u.x) / u.norm_squared();
                    let gv = Vec2::new(-v.y, v.x) / v.norm_squared();
                    put(row, na, gu, &mut jac);
                    put(row, nb, gv, &mut jac);
                    put(row, tr.apex, -gu - gv, &mut jac);
                }
            }
        }
        if let (Some(g), Some(u)) = (anchor, anchor_dir) {
            let row = neq - 1;
            r[row] = cross(u, positions[g] - positions[pivot]);
            put(row, g, Vec2::new(-u.y, u.x), &mut jac);
        }
        res = r.amax();
        if !res.is_finite() {
            break;
        }
        if res < 1e-13 {
            let mut v = DesignVector::new(x.iter().copied().collect());
            v.slider_offset = slider_offset;
            mech.with_design(&v)?;
            return Ok(v);
        }
        let svd = jac.svd(true, true);
        let Ok(dx) = svd.solve(&r, 1e-10) else { break };
        if dx.amax() < 1e-15 {
            break;
        }
        x -= dx;
    }
    Err(AssemblyError::NoAssembly(res))
}

fn wrap(a: f64) -> f64 {
    use std::f64::consts::PI;
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}
