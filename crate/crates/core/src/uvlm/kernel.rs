//! Point-vortex induced velocities, counter-clockwise circulation positive.

use std::f64::consts::PI;

use super::wake::WakeState;
use super::UvlmError;
use crate::Vec2;

const TWO_PI: f64 = 2.0 * PI;

/// Velocity at `p` from singular point vortices `(position, circulation)`.
pub fn induced_velocity_bound(p: Vec2, vortices: &[(Vec2, f64)]) -> Result<Vec2, UvlmError> {
    let mut u = Vec2::zeros();
    for (r0, g) in vortices {
        let d = p - r0;
        let r2 = d.norm_squared();
        if r2 < 1e-24 {
            return Err(UvlmError::SingularEvaluation);
        }
        u += Vec2::new(-d.y, d.x) * (g / (TWO_PI * r2));
    }
    Ok(u)
}

/// Regularized kernel `G/(2 pi) k x d / sqrt(|d|^4 + rc^4)`.
#[inline(always)]
pub fn vatistas(dx: f64, dz: f64, gamma: f64, rc4: f64) -> (f64, f64) {
    let r2 = dx * dx + dz * dz;
    let den = (r2 * r2 + rc4).sqrt();
    if den == 0.0 {
        return (0.0, 0.0);
    }
    let f = gamma / (TWO_PI * den);
    (-dz * f, dx * f)
}

/// Core-growth radius to the fourth power, `(4 alpha_L (1/Re + a1 |G|) age)^2`.
#[inline]
pub fn core_radius4(gamma: f64, age: f64, re: f64, a1: f64, lamb: f64) -> f64 {
    let rc2 = 4.0 * lamb * (1.0 / re + a1 * gamma.abs()) * age.max(0.0);
    rc2 * rc2
}

/// Velocity at `p` from all wake vortices and the far-field blob.
pub fn induced_velocity_wake(p: Vec2, wake: &WakeState, re: f64, a1: f64, lamb: f64, t_now: f64) -> Vec2 {
    let rc4: Vec<f64> =
        (0..wake.len()).map(|k| core_radius4(wake.gamma[k], t_now - wake.shed_time[k], re, a1, lamb)).collect();
    wake_velocity(p, wake, &rc4)
}

/// As [`induced_velocity_wake`] with core radii already evaluated.
pub fn wake_velocity(p: Vec2, wake: &WakeState, rc4: &[f64]) -> Vec2 {
    let (u, w) = regularized_sum(p.x, p.y, &wake.x, &wake.z, &wake.gamma, rc4);
    let (du, dw) = vatistas(p.x - wake.blob_position.x, p.y - wake.blob_position.y, wake.blob_gamma, 0.0);
    Vec2::new(u + du, w + dw)
}

/// Sum of [`vatistas`] over source arrays. Coincident points contribute zero.
pub(crate) fn regularized_sum(px: f64, pz: f64, xs: &[f64], zs: &[f64], gs: &[f64], rc4: &[f64]) -> (f64, f64) {
    let n = xs.len().min(zs.len()).min(gs.len()).min(rc4.len());
    let (xs, zs, gs, rc4) = (&xs[..n], &zs[..n], &gs[..n], &rc4[..n]);
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx") {
            // SAFETY: avx support checked above; slices share length n.
            return unsafe { avx::regularized_sum(px, pz, xs, zs, gs, rc4) };
        }
    }
    scalar_sum(px, pz, xs, zs, gs, rc4)
}

// Lane layout matches the vector path so both give identical sums.
fn scalar_sum(px: f64, pz: f64, xs: &[f64], zs: &[f64], gs: &[f64], rc4: &[f64]) -> (f64, f64) {
    const L: usize = 4;
    let n = xs.len();
    let mut u = [0.0f64; L];
    let mut w = [0.0f64; L];
    let mut lane = |l: usize, k: usize| {
        let dx = px - xs[k];
        let dz = pz - zs[k];
        let r2 = dx * dx + dz * dz;
        let f = gs[k] / (TWO_PI * (r2 * r2 + rc4[k]).sqrt().max(f64::MIN_POSITIVE));
        u[l] -= dz * f;
        w[l] += dx * f;
    };
    for k in 0..n / L * L {
        lane(k % L, k);
    }
    for k in n / L * L..n {
        lane(0, k);
    }
    ((u[0] + u[1]) + (u[2] + u[3]), (w[0] + w[1]) + (w[2] + w[3]))
}

#[cfg(target_arch = "x86_64")]
mod avx {
    use std::arch::x86_64::*;

    use super::TWO_PI;

    #[target_feature(enable = "avx")]
    pub(super) unsafe fn regularized_sum(
        px: f64,
        pz: f64,
        xs: &[f64],
        zs: &[f64],
        gs: &[f64],
        rc4: &[f64],
    ) -> (f64, f64) {
        let n = xs.len();
        let body = n / 4 * 4;
        let vpx = _mm256_set1_pd(px);
        let vpz = _mm256_set1_pd(pz);
        let two_pi = _mm256_set1_pd(TWO_PI);
        let tiny = _mm256_set1_pd(f64::MIN_POSITIVE);
        let mut u = _mm256_setzero_pd();
        let mut w = _mm256_setzero_pd();
        let mut k = 0;
        while k < body {
            let dx = _mm256_sub_pd(vpx, _mm256_loadu_pd(xs.as_ptr().add(k)));
            let dz = _mm256_sub_pd(vpz, _mm256_loadu_pd(zs.as_ptr().add(k)));
            let r2 = _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dz, dz));
            let q = _mm256_add_pd(_mm256_mul_pd(r2, r2), _mm256_loadu_pd(rc4.as_ptr().add(k)));
            let den = _mm256_max_pd(_mm256_sqrt_pd(q), tiny);
            let f = _mm256_div_pd(_mm256_loadu_pd(gs.as_ptr().add(k)), _mm256_mul_pd(two_pi, den));
            u = _mm256_sub_pd(u, _mm256_mul_pd(dz, f));
            w = _mm256_add_pd(w, _mm256_mul_pd(dx, f));
            k += 4;
        }
        let mut ua = [0.0f64; 4];
        let mut wa = [0.0f64; 4];
        _mm256_storeu_pd(ua.as_mut_ptr(), u);
        _mm256_storeu_pd(wa.as_mut_ptr(), w);
        for j in body..n {
            let dx = px - xs[j];
            let dz = pz - zs[j];
            let r2 = dx * dx + dz * dz;
            let f = gs[j] / (TWO_PI * (r2 * r2 + rc4[j]).sqrt().max(f64::MIN_POSITIVE));
            ua[0] -= dz * f;
            wa[0] += dx * f;
        }
        ((ua[0] + ua[1]) + (ua[2] + ua[3]), (wa[0] + wa[1]) + (wa[2] + wa[3]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_vortex() {
        let u = induced_velocity_bound(Vec2::new(1.0, 0.0), &[(Vec2::zeros(), TWO_PI)]).unwrap();
        assert!((u - Vec2::new(0.0, 1.0)).norm() < 1e-15);
        let u2 = induced_velocity_bound(Vec2::new(2.0, 0.0), &[(Vec2::zeros(), TWO_PI)]).unwrap();
        assert!((u2.norm() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn opposite_pair_adds_at_midpoint() {
        let single = induced_velocity_bound(Vec2::zeros(), &[(Vec2::new(-1.0, 0.0), 1.0)]).unwrap();
        let pair =
            induced_velocity_bound(Vec2::zeros(), &[(Vec2::new(-1.0, 0.0), 1.0), (Vec2::new(1.0, 0.0), -1.0)]).unwrap();
        assert!((pair - single * 2.0).norm() < 1e-15);
    }

    #[test]
    fn coincident_point_is_error() {
        assert!(induced_velocity_bound(Vec2::zeros(), &[(Vec2::zeros(), 1.0)]).is_err());
    }

    #[test]
    fn regularized_kernel() {
        assert_eq!(vatistas(0.0, 0.0, 1.0, 0.5), (0.0, 0.0));
        let (u, w) = vatistas(1.0, 0.0, TWO_PI, 1.0);
        assert!((u.hypot(w) - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        let (u, w) = vatistas(3.0, 4.0, 1.0, 0.0);
        let s = induced_velocity_bound(Vec2::new(3.0, 4.0), &[(Vec2::zeros(), 1.0)]).unwrap();
        assert!((u - s.x).abs() < 1e-15 && (w - s.y).abs() < 1e-15);
    }

    #[test]
    fn vector_sum_matches_scalar() {
        let n = 37;
        let xs: Vec<f64> = (0..n).map(|k| (k as f64 * 0.37).sin() * 3.0).collect();
        let zs: Vec<f64> = (0..n).map(|k| (k as f64 * 0.91).cos()).collect();
        let gs: Vec<f64> = (0..n).map(|k| 0.1 - 0.007 * k as f64).collect();
        let mut rc4: Vec<f64> = (0..n).map(|k| 1e-4 * k as f64).collect();
        rc4[0] = 0.0;
        for (px, pz) in [(0.3, -0.2), (xs[0], zs[0]), (xs[5], zs[5])] {
            let a = regularized_sum(px, pz, &xs, &zs, &gs, &rc4);
            let b = scalar_sum(px, pz, &xs, &zs, &gs, &rc4);
            assert_eq!(a.0.to_bits(), b.0.to_bits());
            assert_eq!(a.1.to_bits(), b.1.to_bits());
            let mut e = (0.0, 0.0);
            for k in 0..n {
                let (du, dw) = vatistas(px - xs[k], pz - zs[k], gs[k], rc4[k]);
                e.0 += du;
                e.1 += dw;
            }
            assert!((a.0 - e.0).abs() < 1e-12 && (a.1 - e.1).abs() < 1e-12);
        }
    }
}
