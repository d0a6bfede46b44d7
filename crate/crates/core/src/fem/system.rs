use nalgebra::{DMatrix, DVector};

use super::element::{element_residual, element_tangent, ternary_residual_tangent, ElementState};
use super::{FemError, FemParams};
use crate::mech::{Mechanism, MemberKind};
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TernaryLink {
    pub a: usize,
    pub b: usize,
    pub rest_a: f64,
    pub rest_b: f64,
}

/// Assembled truss: one element per member, ternary couplings and the free DOF map.
#[derive(Debug, Clone, PartialEq)]
pub struct FemModel {
    pub elements: Vec<ElementState>,
    pub ternaries: Vec<TernaryLink>,
    pub k_tern: f64,
    /// Global DOF index of each free coordinate.
    pub free: Vec<usize>,
    /// Free-coordinate slot of each global DOF.
    pub slot: Vec<Option<usize>>,
    initial: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOutcome {
    pub iterations: usize,
    pub residual: f64,
}

impl FemModel {
    pub fn new(mech: &Mechanism, params: &FemParams) -> Self {
        let pos = mech.positions();
        let initial: Vec<f64> = pos.iter().flat_map(|p| [p.x, p.y]).collect();
        let elements: Vec<ElementState> = mech
            .members()
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let x = [pos[m.i].x, pos[m.i].y, pos[m.j].x, pos[m.j].y];
                let d = pos[m.j] - pos[m.i];
                ElementState {
                    nodes: [m.i, m.j],
                    rest_length: d.norm(),
                    rest_angle: d.y.atan2(d.x),
                    x,
                    spring: if k == mech.input_member() { params.k_in } else { 0.0 },
                    torque: 0.0,
                    axial: if m.kind == MemberKind::Rigid { params.g } else { 0.0 },
                }
            })
            .collect();
        let ternaries = mech
            .ternaries()
            .iter()
            .map(|t| TernaryLink { a: t.a, b: t.b, rest_a: elements[t.a].rest_angle, rest_b: elements[t.b].rest_angle })
            .collect();
        let n = pos.len();
        let mut fixed = vec![false; 2 * n];
        for (node, g) in mech.grounded().iter().enumerate() {
            if *g {
                fixed[2 * node] = true;
                fixed[2 * node + 1] = true;
            }
        }
        for &(node, axis) in mech.sliders() {
            fixed[2 * node + axis.fixed_coord()] = true;
        }
        let free: Vec<usize> = (0..2 * n).filter(|d| !fixed[*d]).collect();
        let mut slot = vec![None; 2 * n];
        for (s, d) in free.iter().enumerate() {
            slot[*d] = Some(s);
        }
        Self { elements, ternaries, k_tern: params.k_tern, free, slot, initial }
    }

    pub fn initial_positions(&self) -> Vec<f64> {
        self.initial.clone()
    }

    fn placed(&self, k: usize, x: &[f64]) -> ElementState {
        let mut e = self.elements[k];
        let [i, j] = e.nodes;
        e.x = [x[2 * i], x[2 * i + 1], x[2 * j], x[2 * j + 1]];
        e
    }

    pub fn member_angle(&self, x: &[f64], k: usize) -> f64 {
        self.placed(k, x).angle()
    }

    fn dofs(e: &ElementState) -> [usize; 4] {
        let [i, j] = e.nodes;
        [2 * i, 2 * i + 1, 2 * j, 2 * j + 1]
    }

    /// Internal force of member `k` at `node`, including its ternary coupling terms.
    pub fn node_force(&self, x: &[f64], k: usize, node: usize) -> Result<Vec2, FemError> {
        let e = self.placed(k, x);
        let mut g = element_residual(&e)?;
        for t in &self.ternaries {
            if t.a == k || t.b == k {
                let c = ternary_residual_tangent(&self.placed(t.a, x), &self.placed(t.b, x), t.rest_a, t.rest_b, self.k_tern)?;
                g += if t.a == k { c.g1 } else { c.g2 };
            }
        }
        let off = if e.nodes[0] == node { 0 } else { 2 };
        Ok(Vec2::new(g[off], g[off + 1]))
    }

    /// Global residual and tangent over all 2n DOFs.
    pub fn assemble_full(&self, x: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>), FemError> {
        let nd = x.len();
        let mut g = DVector::zeros(nd);
        let mut kt = DMatrix::zeros(nd, nd);
        for k in 0..self.elements.len() {
            let e = self.placed(k, x);
            let d = Self::dofs(&e);
            let ge = element_residual(&e)?;
            let ke = element_tangent(&e)?;
            for r in 0..4 {
                g[d[r]] += ge[r];
                for c in 0..4 {
                    kt[(d[r], d[c])] += ke[(r, c)];
                }
            }
        }
        for t in &self.ternaries {
            let (ea, eb) = (self.placed(t.a, x), self.placed(t.b, x));
            let c = ternary_residual_tangent(&ea, &eb, t.rest_a, t.rest_b, self.k_tern)?;
            let (da, db) = (Self::dofs(&ea), Self::dofs(&eb));
            for r in 0..4 {
                g[da[r]] += c.g1[r];
                g[db[r]] += c.g2[r];
                for s in 0..4 {
                    kt[(da[r], da[s])] += c.k11[(r, s)];
                    kt[(da[r], db[s])] += c.k12[(r, s)];
                    kt[(db[r], da[s])] += c.k21[(r, s)];
                    kt[(db[r], db[s])] += c.k22[(r, s)];
                }
            }
        }
        Ok((g, kt))
    }

    /// Residual and tangent with fixed DOF rows and columns removed.
    pub fn assemble(&self, x: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>), FemError> {
        let (g, kt) = self.assemble_full(x)?;
        let nf = self.free.len();
        let gf = DVector::from_iterator(nf, self.free.iter().map(|&d| g[d]));
        let kf = DMatrix::from_fn(nf, nf, |r, c| kt[(self.free[r], self.free[c])]);
        Ok((gf, kf))
    }
}

/// Newton-Raphson on the free DOFs, updating `x` in place.
///
/// Converges when the free residual drops below `nr_tol`, or when the update
/// reaches round-off level; the second case covers the force noise of very stiff
/// members.
pub fn newton_step(model: &FemModel, x: &mut [f64], params: &FemParams) -> Result<NewtonOutcome, FemError> {
    let scale = 1.0 + x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut last = f64::INFINITY;
    for it in 0..=params.nr_max_iter {
        let (g, kt) = model.assemble(x)?;
        let res = g.amax();
        if !res.is_finite() {
            return Err(FemError::SingularTangent);
        }
        if res < params.nr_tol {
            return Ok(NewtonOutcome { iterations: it, residual: res });
        }
        if it == params.nr_max_iter {
            break;
        }
        let dx = kt.lu().solve(&(-g)).ok_or(FemError::SingularTangent)?;
        if dx.iter().any(|v| !v.is_finite()) {
            return Err(FemError::SingularTangent);
        }
        for (s, &d) in model.free.iter().enumerate() {
            x[d] += dx[s];
        }
        let step = dx.amax();
        if step < 1e-14 * scale && res < 1e4 * params.nr_tol {
            return Ok(NewtonOutcome { iterations: it + 1, residual: res });
        }
        last = res;
    }
    Err(FemError::NotConverged(last))
}
