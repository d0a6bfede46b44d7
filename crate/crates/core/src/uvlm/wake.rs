use serde::{Deserialize, Serialize};

use crate::Vec2;

pub const BLOB_POSITION: [f64; 2] = [1e8, 0.0];

/// Shed vortices in structure-of-arrays layout plus the far-field blob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WakeState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub gamma: Vec<f64>,
    pub shed_time: Vec<f64>,
    /// Step index at which each vortex was shed.
    pub shed_step: Vec<usize>,
    /// Velocity used in the previous convection, absent for a fresh vortex.
    #[serde(default)]
    pub last_velocity: Vec<Option<Vec2>>,
    pub blob_gamma: f64,
    pub blob_shed_time: f64,
    pub blob_position: Vec2,
}

impl Default for WakeState {
    fn default() -> Self {
        Self {
            x: Vec::new(),
            z: Vec::new(),
            gamma: Vec::new(),
            shed_time: Vec::new(),
            shed_step: Vec::new(),
            last_velocity: Vec::new(),
            blob_gamma: 0.0,
            blob_shed_time: 0.0,
            blob_position: Vec2::new(BLOB_POSITION[0], BLOB_POSITION[1]),
        }
    }
}

impl WakeState {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn push(&mut self, p: Vec2, gamma: f64, shed_time: f64, shed_step: usize) {
        self.x.push(p.x);
        self.z.push(p.y);
        self.gamma.push(gamma);
        self.shed_time.push(shed_time);
        self.shed_step.push(shed_step);
        self.last_velocity.push(None);
    }

    /// Circulation of free vortices and blob.
    pub fn total_circulation(&self) -> f64 {
        self.gamma.iter().sum::<f64>() + self.blob_gamma
    }

    /// Advect every vortex with the two-step Adams-Bashforth rule, or a forward
    /// Euler step for vortices without a previous velocity. Circulations are untouched.
    pub fn convect(&mut self, velocity: &[Vec2], dt: f64) {
        assert_eq!(velocity.len(), self.len());
        for (k, v) in velocity.iter().enumerate() {
            let step = match self.last_velocity[k] {
                Some(p) => v * 1.5 - p * 0.5,
                None => *v,
            };
            self.x[k] += step.x * dt;
            self.z[k] += step.y * dt;
            self.last_velocity[k] = Some(*v);
        }
    }
}

/// Merge vortices older than `max_age_steps` into the blob. Vortices are stored
/// oldest first, so the aged ones form a prefix.
pub fn truncate_wake(wake: &mut WakeState, current_step: usize, max_age_steps: usize) {
    let cut = wake.shed_step.iter().take_while(|&&s| current_step.saturating_sub(s) > max_age_steps).count();
    if cut == 0 {
        return;
    }
    let merged: f64 = wake.gamma[..cut].iter().sum();
    wake.blob_gamma += merged;
    wake.x.drain(..cut);
    wake.z.drain(..cut);
    wake.gamma.drain(..cut);
    wake.shed_time.drain(..cut);
    wake.shed_step.drain(..cut);
    wake.last_velocity.drain(..cut);
    if let Some(first) = wake.shed_time.first() {
        wake.blob_shed_time = *first;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> WakeState {
        let mut w = WakeState::default();
        w.push(Vec2::new(0.0, 0.0), 0.3, 0.0, 0);
        w.push(Vec2::new(1.0, 0.0), -0.1, 0.1, 1);
        w.push(Vec2::new(2.0, 0.0), 0.05, 0.2, 2);
        w
    }

    #[test]
    fn young_wake_unchanged() {
        let mut w = sample();
        let before = w.clone();
        truncate_wake(&mut w, 2, 10);
        assert_eq!(w, before);
    }

    #[test]
    fn aged_vortex_moves_to_blob() {
        let mut w = sample();
        let total = w.total_circulation();
        truncate_wake(&mut w, 5, 4);
        assert_eq!(w.len(), 2);
        assert_eq!(w.blob_gamma, 0.3);
        assert!((w.total_circulation() - total).abs() < 1e-14);
        assert_eq!(w.blob_shed_time, 0.1);
    }
}
