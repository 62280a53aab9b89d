//! EH-time selection and max-min power control for a fixed SF assignment.

mod eh_time;
mod power;

pub use eh_time::{
    cap_matching_ratio, closed_form_for, eh_time_select, grid_search, grid_search_exhaustive, max_off_ratio,
    select_eh_ratios, EhTimeMode, EhTimePolicy, GridOutcome,
};
pub use power::{
    feasible, fixed_point_powers, maxmin_power, FixedPoint, PowerProblem, PowerSolution, DEFAULT_TOL_NATS,
    FIXED_POINT_MAX_ITER, FIXED_POINT_REL_TOL, MAX_BISECTION_STEPS,
};

use crate::collision::{collision_matrix, CollisionMatrix, CollisionMode, TxWindow};
use crate::energy::EnergyState;
use crate::error::{Error, Result};
use crate::interference::{interference_weights, CorrelationPolicy, WeightMatrix};
use crate::phy::SpreadingFactor;

/// The active users of one cell with their SFs fixed. Everything the EH
/// time and power stages need.
#[derive(Debug, Clone)]
pub struct UplinkSystem {
    pub gains: Vec<f64>,
    pub toa_s: Vec<f64>,
    pub sfs: Vec<SpreadingFactor>,
    pub harvest_w: Vec<f64>,
    pub p_t_w: f64,
    pub noise_w: f64,
    /// `(1 - d) / d`.
    pub off_ratio: f64,
    pub correlation: CorrelationPolicy,
    pub col_mode: CollisionMode,
}

impl UplinkSystem {
    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if self.toa_s.len() != n || self.sfs.len() != n || self.harvest_w.len() != n {
            return Err(Error::config("uplink system dimensions disagree"));
        }
        if n == 0 {
            return Err(Error::EmptyActiveSet);
        }
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if !self.gains.iter().all(|&g| finite_pos(g)) {
            return Err(Error::NonFinite("channel gain"));
        }
        if !self.toa_s.iter().all(|&t| finite_pos(t)) {
            return Err(Error::NonFinite("time on air"));
        }
        if !self.harvest_w.iter().all(|&e| e.is_finite() && e >= 0.0) {
            return Err(Error::NonFinite("harvest rate"));
        }
        if !finite_pos(self.p_t_w) || !finite_pos(self.noise_w) || !finite_pos(self.off_ratio) {
            return Err(Error::NonFinite("system scalar"));
        }
        Ok(())
    }

    pub fn energy(&self, i: usize, ratio: f64) -> EnergyState {
        EnergyState::new(self.harvest_w[i], self.toa_s[i], ratio)
    }

    pub fn caps(&self, ratios: &[f64]) -> Vec<f64> {
        ratios
            .iter()
            .enumerate()
            .map(|(i, &k)| self.energy(i, k).power_cap(self.p_t_w))
            .collect()
    }

    /// Transmission starts when harvesting ends.
    pub fn windows(&self, ratios: &[f64]) -> Vec<TxWindow> {
        ratios
            .iter()
            .enumerate()
            .map(|(i, &k)| TxWindow::new(self.energy(i, k).eh_time_s(), self.toa_s[i]))
            .collect()
    }

    pub fn collisions(&self, ratios: &[f64]) -> CollisionMatrix {
        collision_matrix(&self.windows(ratios), self.col_mode)
    }

    pub fn weights(&self, ratios: &[f64]) -> WeightMatrix {
        interference_weights(&self.collisions(ratios), &self.toa_s, &self.sfs, &self.correlation)
    }

    /// Max-min powers for the given EH ratios.
    pub fn solve(&self, ratios: &[f64], tol: f64) -> Result<PowerSolution> {
        let caps = self.caps(ratios);
        let w = self.weights(ratios);
        maxmin_power(&PowerProblem::new(&self.gains, &caps, &w, self.noise_w), tol)
    }
}
