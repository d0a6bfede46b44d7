use nalgebra::{Matrix4, Vector4};

use super::FemError;

/// Two-node truss element with an optional rotational spring at its first node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementState {
    pub nodes: [usize; 2],
    pub rest_length: f64,
    /// Spring rest orientation.
    pub rest_angle: f64,
    /// Current positions `[x1, y1, x2, y2]`.
    pub x: [f64; 4],
    pub spring: f64,
    pub torque: f64,
    pub axial: f64,
}

const COLLAPSE_TOL: f64 = 1e-12;

fn bt_b() -> Matrix4<f64> {
    Matrix4::new(
        1.0, 0.0, -1.0, 0.0, //
        0.0, 1.0, 0.0, -1.0, //
        -1.0, 0.0, 1.0, 0.0, //
        0.0, -1.0, 0.0, 1.0,
    )
}

/// Derivative of `z` with respect to the nodal positions.
fn bt_c() -> Matrix4<f64> {
    Matrix4::new(
        0.0, -1.0, 0.0, 1.0, //
        1.0, 0.0, -1.0, 0.0, //
        0.0, 1.0, 0.0, -1.0, //
        -1.0, 0.0, 1.0, 0.0,
    )
}

pub(crate) fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

impl ElementState {
    pub fn delta(&self) -> (f64, f64) {
        (self.x[2] - self.x[0], self.x[3] - self.x[1])
    }

    pub fn length(&self) -> f64 {
        let (dx, dy) = self.delta();
        dx.hypot(dy)
    }

    pub fn angle(&self) -> f64 {
        let (dx, dy) = self.delta();
        dy.atan2(dx)
    }

    /// Rotation from the spring rest orientation, wrapped to (-pi, pi].
    pub fn rotation(&self) -> f64 {
        wrap_angle(self.angle() - self.rest_angle)
    }

    pub fn y(&self) -> Vector4<f64> {
        let (dx, dy) = self.delta();
        Vector4::new(-dx, -dy, dx, dy)
    }

    pub fn z(&self) -> Vector4<f64> {
        let (dx, dy) = self.delta();
        Vector4::new(dy, -dx, -dy, dx)
    }

    fn checked_length(&self) -> Result<f64, FemError> {
        let l = self.length();
        if !(l > COLLAPSE_TOL) {
            return Err(FemError::Collapsed { nodes: self.nodes });
        }
        Ok(l)
    }

    /// Stored energy: axial strain, spring and the work of the applied torque.
    pub fn energy(&self) -> f64 {
        let l = self.length();
        let dt = self.rotation();
        let axial = if self.axial > 0.0 {
            0.5 * self.axial * (l - self.rest_length).powi(2) / self.rest_length
        } else {
            0.0
        };
        axial + 0.5 * self.spring * dt * dt - self.torque * dt
    }

    fn coefficients(&self) -> Result<(f64, f64, f64, f64, f64, f64), FemError> {
        let l = self.checked_length()?;
        let a = if self.axial > 0.0 {
            self.axial * (l - self.rest_length) / (l * self.rest_length)
        } else {
            0.0
        };
        let l2 = l * l;
        let b = (self.spring * self.rotation() - self.torque) / l2;
        let c = if self.axial > 0.0 { self.axial / (l2 * l) } else { 0.0 };
        let d = self.spring / (l2 * l2);
        let e = 2.0 * b / l2;
        Ok((l, a, b, c, d, e))
    }
}

/// Internal force vector `g = a y + b z`.
pub fn element_residual(e: &ElementState) -> Result<Vector4<f64>, FemError> {
    let (_, a, b, ..) = e.coefficients()?;
    Ok(e.y() * a + e.z() * b)
}

/// Tangent stiffness `c yy' + a B'B + b B'C - e zy' + d zz'`.
pub fn element_tangent(e: &ElementState) -> Result<Matrix4<f64>, FemError> {
    let (_, a, b, c, d, ee) = e.coefficients()?;
    let (y, z) = (e.y(), e.z());
    Ok(y * y.transpose() * c + bt_b() * a + bt_c() * b - z * y.transpose() * ee + z * z.transpose() * d)
}

/// Coupling terms of a stiff torsional link between two members.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TernaryContribution {
    pub g1: Vector4<f64>,
    pub g2: Vector4<f64>,
    pub k11: Matrix4<f64>,
    pub k12: Matrix4<f64>,
    pub k21: Matrix4<f64>,
    pub k22: Matrix4<f64>,
    /// Relative rotation `dtheta1 - dtheta2`.
    pub relative_rotation: f64,
}

/// Coupling energy `K/2 (dtheta1 - dtheta2)^2` where each rotation is measured
/// from the given rest orientation. Only the coupling terms are returned.
pub fn ternary_residual_tangent(
    e1: &ElementState,
    e2: &ElementState,
    rest1: f64,
    rest2: f64,
    k_tern: f64,
) -> Result<TernaryContribution, FemError> {
    let shared = e1.nodes.iter().filter(|n| e2.nodes.contains(n)).count();
    if shared != 1 {
        return Err(FemError::TernaryNotShared);
    }
    let l1 = e1.checked_length()?;
    let l2 = e2.checked_length()?;
    let rel = wrap_angle(wrap_angle(e1.angle() - rest1) - wrap_angle(e2.angle() - rest2));
    let (y1, z1, y2, z2) = (e1.y(), e1.z(), e2.y(), e2.z());
    let (l1s, l2s) = (l1 * l1, l2 * l2);
    let block = |b: f64, ls: f64, y: &Vector4<f64>, z: &Vector4<f64>| {
        let d = k_tern / (ls * ls);
        let e = 2.0 * b / ls;
        z * z.transpose() * d + bt_c() * b - z * y.transpose() * e
    };
    let b1 = k_tern * rel / l1s;
    let b2 = -k_tern * rel / l2s;
    let cross = -k_tern / (l1s * l2s);
    Ok(TernaryContribution {
        g1: z1 * b1,
        g2: z2 * b2,
        k11: block(b1, l1s, &y1, &z1),
        k22: block(b2, l2s, &y2, &z2),
        k12: z1 * z2.transpose() * cross,
        k21: z2 * z1.transpose() * cross,
        relative_rotation: rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn elem(x: [f64; 4]) -> ElementState {
        ElementState {
            nodes: [0, 1],
            rest_length: 1.0,
            rest_angle: 0.0,
            x,
            spring: 0.0,
            torque: 0.0,
            axial: 1e3,
        }
    }

    #[test]
    fn undeformed_has_zero_residual() {
        let e = elem([0.0, 0.0, 1.0, 0.0]);
        assert_eq!(element_residual(&e).unwrap(), Vector4::zeros());
        let mut t = e;
        t.x = [3.0, -2.0, 4.0, -2.0];
        assert!(element_residual(&t).unwrap().norm() < 1e-12);
    }

    #[test]
    fn collapsed_element_errors() {
        let e = elem([1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(element_residual(&e), Err(FemError::Collapsed { .. })));
    }

    #[test]
    fn undeformed_tangent_is_psd_with_rigid_nullspace() {
        let e = elem([0.2, 0.1, 1.0, 0.7]);
        let mut e = e;
        e.rest_length = e.length();
        let k = element_tangent(&e).unwrap();
        assert!((k - k.transpose()).norm() < 1e-12);
        let eig = k.symmetric_eigen();
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        for v in &vals[..3] {
            assert!(v.abs() < 1e-9 * vals[3]);
        }
        assert!(vals[3] > 0.0);
        let tx = Vector4::new(1.0, 0.0, 1.0, 0.0);
        let ty = Vector4::new(0.0, 1.0, 0.0, 1.0);
        assert!((k * tx).norm() < 1e-9 && (k * ty).norm() < 1e-9);
    }

    #[test]
    fn zero_moment_tangent_is_symmetric() {
        let mut e = elem([0.0, 0.0, 1.3, 0.4]);
        e.spring = 2.0;
        e.rest_angle = e.angle();
        let k = element_tangent(&e).unwrap();
        assert!((k - k.transpose()).norm() < 1e-12);
    }

    #[test]
    fn equal_rotations_give_no_coupling_torque() {
        let mut a = elem([0.0, 0.0, 1.0, 0.0]);
        let mut b = elem([0.0, 0.0, 0.0, 1.0]);
        b.nodes = [0, 2];
        let (ra, rb) = (a.angle(), b.angle());
        let rot = 0.3f64;
        a.x = [0.0, 0.0, rot.cos(), rot.sin()];
        b.x = [0.0, 0.0, -rot.sin(), rot.cos()];
        let c = ternary_residual_tangent(&a, &b, ra, rb, 1e8).unwrap();
        assert!(c.relative_rotation.abs() < 1e-15);
        assert!(c.g1.norm() < 1e-6 && c.g2.norm() < 1e-6);
    }

    #[test]
    fn swapping_members_swaps_cross_blocks() {
        let a = elem([0.0, 0.0, 1.0, 0.2]);
        let mut b = elem([0.0, 0.0, -0.3, 1.1]);
        b.nodes = [0, 2];
        let c = ternary_residual_tangent(&a, &b, 0.1, 1.9, 1e3).unwrap();
        let s = ternary_residual_tangent(&b, &a, 1.9, 0.1, 1e3).unwrap();
        assert!((c.k12 - s.k21).norm() < 1e-9);
        assert!((c.k21 - s.k12).norm() < 1e-9);
        assert!((c.k12 - c.k21.transpose()).norm() < 1e-9);
        assert!((c.g1 - s.g2).norm() < 1e-9);
    }

    #[test]
    fn rejects_non_sharing_members() {
        let a = elem([0.0, 0.0, 1.0, 0.0]);
        let mut b = elem([2.0, 0.0, 3.0, 0.0]);
        b.nodes = [2, 3];
        assert!(matches!(
            ternary_residual_tangent(&a, &b, 0.0, 0.0, 1.0),
            Err(FemError::TernaryNotShared)
        ));
    }
}
