//! One Monte Carlo trial: topology, activation, SFs, EH times, powers, rates.

use serde::{Deserialize, Serialize};

use super::config::{PowerMode, ScenarioConfig};
use crate::collision::CollisionMode;
use crate::energy::harvest_rate;
use crate::error::{Error, Result, Stage, StageExt};
use crate::geometry::{sample_topology, Topology};
use crate::interference::{rate_report, CorrelationKind, RateReport};
use crate::optimizer::{maxmin_power, select_eh_ratios, EhTimeMode, PowerProblem, UplinkSystem};
use crate::phy::{noise_power, time_on_air};
use crate::sf_alloc::{activate, allocate, link_budgets, Candidate, SfAssignment, SfPolicy};

/// The policy choices of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub sf_policy: SfPolicy,
    pub corr_policy: CorrelationKind,
    pub col_mode: CollisionMode,
    pub eh_mode: EhTimeMode,
    pub power_mode: PowerMode,
}

impl Variant {
    pub fn of(cfg: &ScenarioConfig) -> Self {
        Variant {
            sf_policy: cfg.sf_policy,
            corr_policy: cfg.corr_policy.kind,
            col_mode: cfg.col_mode,
            eh_mode: cfg.eh_policy.mode,
            power_mode: cfg.power_mode,
        }
    }

    /// `cfg` with this variant's choices written in.
    pub fn apply(&self, cfg: &ScenarioConfig) -> ScenarioConfig {
        let mut out = cfg.clone();
        out.sf_policy = self.sf_policy;
        out.corr_policy.kind = self.corr_policy;
        out.col_mode = self.col_mode;
        out.eh_policy.mode = self.eh_mode;
        out.power_mode = self.power_mode;
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    pub density_per_km2: f64,
    pub variant: Variant,
    /// Users in the cell.
    pub users: usize,
    /// Users that reach the gateway and got an SF.
    pub active: usize,
    /// Active users per SF, SF7 first.
    pub sf_counts: [usize; 6],
    pub active_ids: Vec<usize>,
    pub sfs: Vec<u8>,
    pub harvest_w: Vec<f64>,
    /// `tau / T_a` per active user.
    pub eh_ratios: Vec<f64>,
    pub caps_w: Vec<f64>,
    pub powers_w: Vec<f64>,
    pub rates: RateReport,
    /// Solver optimum; `None` for full-cap runs.
    pub t_star_nats: Option<f64>,
    pub solver_evaluations: usize,
    pub solver_converged: bool,
    /// Active users with nothing to transmit with. They stay in the minimum.
    pub zero_cap_users: usize,
}

/// Everything up to and including SF allocation.
#[derive(Debug, Clone)]
pub struct Allocation {
    pub topology: Topology,
    pub harvest_w: Vec<f64>,
    pub candidates: Vec<Candidate>,
    pub assignment: SfAssignment,
}

fn scenario_at(cfg: &ScenarioConfig, density: f64) -> ScenarioConfig {
    let mut c = cfg.clone();
    c.geometry.user_density_per_km2 = density;
    c
}

/// Harvest rate of every user of `topology`.
pub fn harvest_rates(cfg: &ScenarioConfig, topology: &Topology) -> Vec<f64> {
    topology
        .users
        .iter()
        .map(|u| harvest_rate(cfg.beacon_tx_w * u.beacon_gain, &cfg.eh))
        .collect()
}

pub fn run_allocation(cfg: &ScenarioConfig, seed: u64, density: f64) -> Result<Allocation> {
    let cfg = scenario_at(cfg, density);
    cfg.validate()?;
    let topology = sample_topology(&cfg.geometry, seed).stage(Stage::Topology)?;
    let harvest_w = harvest_rates(&cfg, &topology);
    let candidates = link_budgets(&topology, &harvest_w, &cfg.phy, cfg.p_t_w());
    let active = activate(&candidates, &cfg.phy).stage(Stage::Activation)?;
    if active.is_empty() {
        return Err(Error::EmptyActiveSet.at(Stage::Activation));
    }
    let assignment =
        allocate(cfg.sf_policy, &active, &cfg.phy, cfg.geometry.cell_radius_m).stage(Stage::SfAllocation)?;
    Ok(Allocation {
        topology,
        harvest_w,
        candidates,
        assignment,
    })
}

/// Runs the whole pipeline. Deterministic in `(cfg, seed, density)`.
pub fn run_trial(cfg: &ScenarioConfig, seed: u64, density: f64) -> Result<TrialResult> {
    let alloc = run_allocation(cfg, seed, density)?;
    finish_trial(cfg, seed, density, &alloc)
}

/// The stages after SF allocation, for a precomputed [`Allocation`].
pub fn finish_trial(cfg: &ScenarioConfig, seed: u64, density: f64, alloc: &Allocation) -> Result<TrialResult> {
    let ids = &alloc.assignment.active_ids;
    let phy = &cfg.phy;
    let sfs: Vec<_> = ids.iter().map(|&i| alloc.assignment.sf_of[&i]).collect();
    let sys = UplinkSystem {
        gains: ids.iter().map(|&i| alloc.topology.users[i].gain).collect(),
        toa_s: sfs.iter().map(|&s| time_on_air(s, phy)).collect(),
        harvest_w: ids.iter().map(|&i| alloc.harvest_w[i]).collect(),
        sfs: sfs.clone(),
        p_t_w: cfg.p_t_w(),
        noise_w: noise_power(phy),
        off_ratio: phy.off_ratio(),
        correlation: cfg.corr_policy.clone(),
        col_mode: cfg.col_mode,
    };
    let tol = cfg.solver_tol_nats;
    let eh_ratios = select_eh_ratios(&sys, &cfg.eh_policy, tol).stage(Stage::EhTime)?;
    let caps = sys.caps(&eh_ratios);
    let weights = sys.weights(&eh_ratios);
    let (powers, t_star, evaluations, converged) = match cfg.power_mode {
        PowerMode::Maxmin => {
            let sol = maxmin_power(&PowerProblem::new(&sys.gains, &caps, &weights, sys.noise_w), tol)
                .stage(Stage::PowerControl)?;
            (sol.powers_w, Some(sol.t_star_nats), sol.iterations, sol.converged)
        }
        PowerMode::FullCap => (caps.clone(), None, 0, true),
    };
    let rates = rate_report(&powers, &sys.gains, &weights, sys.noise_w).stage(Stage::Rates)?;
    Ok(TrialResult {
        seed,
        density_per_km2: density,
        variant: crate::harness::Variant::of(cfg),
        users: alloc.topology.users.len(),
        active: ids.len(),
        sf_counts: alloc.assignment.group_sizes,
        active_ids: ids.clone(),
        sfs: sfs.iter().map(|s| s.value()).collect(),
        harvest_w: sys.harvest_w.clone(),
        eh_ratios,
        zero_cap_users: caps.iter().filter(|&&c| c == 0.0).count(),
        caps_w: caps,
        powers_w: powers,
        rates,
        t_star_nats: t_star,
        solver_evaluations: evaluations,
        solver_converged: converged,
    })
}
