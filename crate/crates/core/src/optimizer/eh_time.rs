//! Harvest-time selection.
//!
//! Harvest times are handled as ratios `kappa = tau / T_a`. The two closed
//! forms are `kappa_1 = (1 - d) / d` (harvest for the whole off time) and
//! `kappa_2 = min(P_t / E, kappa_1)` (harvest just long enough to reach the
//! transmit power limit). The grid search is a per-user coordinate search
//! over `kappa_1 j / G`, `j = 1..=G`, plus `kappa_2`.

use serde::{Deserialize, Serialize};

use super::power::{bisect, solve_subset, PowerProblem};
use super::UplinkSystem;
use crate::collision::{pair_collision, CollisionMode, TxWindow};
use crate::error::{Error, Result};
use crate::interference::{pair_weight, WeightMatrix};
use crate::phy::PhyParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EhTimeMode {
    #[default]
    MaxOffTime,
    CapMatching,
    GridSearch,
}

impl EhTimeMode {
    pub fn label(self) -> &'static str {
        match self {
            EhTimeMode::MaxOffTime => "max_off_time",
            EhTimeMode::CapMatching => "cap_matching",
            EhTimeMode::GridSearch => "grid_search",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EhTimePolicy {
    pub mode: EhTimeMode,
    pub grid_points: usize,
    /// Coordinate sweeps over all users; stops early once a sweep changes nothing.
    pub passes: usize,
}

impl Default for EhTimePolicy {
    fn default() -> Self {
        EhTimePolicy {
            mode: EhTimeMode::MaxOffTime,
            grid_points: 64,
            passes: 1,
        }
    }
}

impl EhTimePolicy {
    pub fn with_mode(mode: EhTimeMode) -> Self {
        EhTimePolicy {
            mode,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_points < 2 {
            return Err(Error::config("eh_policy.grid_points must be at least 2"));
        }
        if self.passes < 1 {
            return Err(Error::config("eh_policy.passes must be at least 1"));
        }
        Ok(())
    }
}

/// The closed form that is optimal for a collision mode: the whole off
/// time when overlaps shrink with later starts, the cap-matching time when
/// overlaps ignore the start times.
pub fn closed_form_for(col_mode: CollisionMode) -> EhTimeMode {
    match col_mode {
        CollisionMode::EhDependent => EhTimeMode::MaxOffTime,
        CollisionMode::WorstCase => EhTimeMode::CapMatching,
    }
}

pub fn max_off_ratio(phy: &PhyParams) -> f64 {
    phy.off_ratio()
}

/// `min(P_t / E, kappa_1)`; a user that harvests nothing gets `kappa_1`.
pub fn cap_matching_ratio(p_t_w: f64, harvest_w: f64, off_ratio: f64) -> f64 {
    if harvest_w > 0.0 {
        let mut k = p_t_w / harvest_w;
        // round up so that k E reaches P_t exactly
        while k * harvest_w < p_t_w {
            k = k.next_up();
        }
        k.min(off_ratio)
    } else {
        off_ratio
    }
}

/// Harvest time in seconds for one user under a closed-form mode.
pub fn eh_time_select(time_on_air_s: f64, harvest_w: f64, p_t_w: f64, phy: &PhyParams, mode: EhTimeMode) -> Result<f64> {
    let off = phy.off_ratio();
    let ratio = match mode {
        EhTimeMode::MaxOffTime => off,
        EhTimeMode::CapMatching => cap_matching_ratio(p_t_w, harvest_w, off),
        EhTimeMode::GridSearch => {
            return Err(Error::config("grid search couples all users; use select_eh_ratios"));
        }
    };
    Ok(ratio * time_on_air_s)
}

fn closed_form_ratios(sys: &UplinkSystem, mode: EhTimeMode) -> Vec<f64> {
    match mode {
        EhTimeMode::CapMatching => sys
            .harvest_w
            .iter()
            .map(|&e| cap_matching_ratio(sys.p_t_w, e, sys.off_ratio))
            .collect(),
        _ => vec![sys.off_ratio; sys.len()],
    }
}

/// EH ratios for every user of `sys`.
pub fn select_eh_ratios(sys: &UplinkSystem, policy: &EhTimePolicy, tol: f64) -> Result<Vec<f64>> {
    policy.validate()?;
    sys.validate()?;
    match policy.mode {
        EhTimeMode::GridSearch => Ok(grid_search(sys, policy, tol)?.ratios),
        mode => Ok(closed_form_ratios(sys, mode)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub ratios: Vec<f64>,
    /// Max-min rate at `ratios`, nats.
    pub min_rate_nats: f64,
    /// Closed form the search started from.
    pub start: EhTimeMode,
    /// Accepted coordinate moves.
    pub moves: usize,
    /// Feasibility evaluations spent.
    pub evaluations: usize,
}

fn user_order(sys: &UplinkSystem) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sys.len()).collect();
    order.sort_by(|&a, &b| sys.toa_s[b].total_cmp(&sys.toa_s[a]).then(a.cmp(&b)));
    order
}

fn candidate_ratios(sys: &UplinkSystem, policy: &EhTimePolicy, n: usize) -> Vec<f64> {
    let g = policy.grid_points;
    let mut out: Vec<f64> = (1..=g)
        .map(|j| if j == g { sys.off_ratio } else { sys.off_ratio * j as f64 / g as f64 })
        .collect();
    let k2 = cap_matching_ratio(sys.p_t_w, sys.harvest_w[n], sys.off_ratio);
    if !out.contains(&k2) {
        out.push(k2);
    }
    out
}

/// Starting point: the better closed form, the mode's own on a tie.
fn starting_state(sys: &UplinkSystem, tol: f64) -> Result<(EhTimeMode, GridState<'_>)> {
    let preferred = closed_form_for(sys.col_mode);
    let other = match preferred {
        EhTimeMode::MaxOffTime => EhTimeMode::CapMatching,
        _ => EhTimeMode::MaxOffTime,
    };
    let sp = GridState::new(sys, closed_form_ratios(sys, preferred), tol)?;
    let mut so = GridState::new(sys, closed_form_ratios(sys, other), tol)?;
    Ok(if so.objective() > sp.objective() {
        so.evaluations += sp.evaluations;
        (other, so)
    } else {
        let mut sp = sp;
        sp.evaluations += so.evaluations;
        (preferred, sp)
    })
}

/// Coordinate search state with the interference graph split into
/// independent blocks, so a move only re-solves the blocks it touches.
struct GridState<'a> {
    sys: &'a UplinkSystem,
    tol: f64,
    ratios: Vec<f64>,
    windows: Vec<TxWindow>,
    caps: Vec<f64>,
    w: WeightMatrix,
    comps: Vec<Vec<usize>>,
    comp_of: Vec<usize>,
    comp_t: Vec<f64>,
    evaluations: usize,
}

struct Candidate {
    ratio: f64,
    cap: f64,
    /// `w'_{n,m}`
    row: Vec<f64>,
    /// `w'_{m,n}`
    col: Vec<f64>,
}

impl<'a> GridState<'a> {
    fn new(sys: &'a UplinkSystem, ratios: Vec<f64>, tol: f64) -> Result<Self> {
        let mut s = GridState {
            sys,
            tol,
            windows: sys.windows(&ratios),
            caps: sys.caps(&ratios),
            w: sys.weights(&ratios),
            ratios,
            comps: Vec::new(),
            comp_of: vec![0; sys.len()],
            comp_t: Vec::new(),
            evaluations: 0,
        };
        s.refresh()?;
        Ok(s)
    }

    fn problem(&self) -> PowerProblem<'_> {
        PowerProblem::new(&self.sys.gains, &self.caps, &self.w, self.sys.noise_w)
    }

    fn refresh(&mut self) -> Result<()> {
        self.comps = self.w.components();
        let mut comp_t = Vec::with_capacity(self.comps.len());
        for (c, comp) in self.comps.iter().enumerate() {
            for &i in comp {
                self.comp_of[i] = c;
            }
            let sol = solve_subset(&self.problem(), comp, self.tol)?;
            self.evaluations += sol.iterations;
            comp_t.push(sol.t);
        }
        self.comp_t = comp_t;
        Ok(())
    }

    fn objective(&self) -> f64 {
        self.comp_t.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn candidate(&self, n: usize, ratio: f64) -> Candidate {
        let sys = self.sys;
        let e = sys.energy(n, ratio);
        let win = TxWindow::new(e.eh_time_s(), sys.toa_s[n]);
        let len = sys.len();
        let mut row = vec![0.0; len];
        let mut col = vec![0.0; len];
        for m in (0..len).filter(|&m| m != n) {
            let c = pair_collision(&win, &self.windows[m], sys.col_mode);
            row[m] = pair_weight(c, sys.toa_s[m], sys.correlation.correlation(sys.sfs[m], sys.sfs[n], false));
            col[m] = pair_weight(c, sys.toa_s[n], sys.correlation.correlation(sys.sfs[n], sys.sfs[m], false));
        }
        Candidate {
            ratio,
            cap: e.power_cap(sys.p_t_w),
            row,
            col,
        }
    }

    /// No larger cap and no smaller weights: cannot raise any block.
    fn dominated(&self, n: usize, c: &Candidate) -> bool {
        c.cap <= self.caps[n] && (0..self.sys.len()).all(|m| c.row[m] >= self.w.get(n, m) && c.col[m] >= self.w.get(m, n))
    }

    fn try_user(&mut self, n: usize, policy: &EhTimePolicy) -> Result<bool> {
        let current = self.objective();
        let floor = current + self.tol;
        let cn = self.comp_of[n];
        // another block already at the minimum caps any gain from moving n
        if self.comp_t.iter().enumerate().any(|(c, &t)| c != cn && t <= floor) {
            return Ok(false);
        }
        let cands: Vec<Candidate> = candidate_ratios(self.sys, policy, n)
            .into_iter()
            .filter(|&k| k != self.ratios[n])
            .map(|k| self.candidate(n, k))
            .filter(|c| !self.dominated(n, c))
            .collect();
        if cands.is_empty() {
            return Ok(false);
        }

        // groups: the other blocks as they are, plus the pieces n's block
        // falls into without n
        let rest: Vec<usize> = self.comps[cn].iter().copied().filter(|&m| m != n).collect();
        let pieces: Vec<Vec<usize>> = self
            .w
            .submatrix(&rest)
            .components()
            .into_iter()
            .map(|p| p.into_iter().map(|k| rest[k]).collect())
            .collect();
        let mut group_members: Vec<Vec<usize>> = Vec::new();
        let mut group_t: Vec<f64> = Vec::new();
        let mut group_of = vec![usize::MAX; self.sys.len()];
        for (c, comp) in self.comps.iter().enumerate() {
            if c != cn {
                for &i in comp {
                    group_of[i] = group_members.len();
                }
                group_members.push(comp.clone());
                group_t.push(self.comp_t[c]);
            }
        }
        for piece in pieces {
            let sol = solve_subset(&self.problem(), &piece, self.tol)?;
            self.evaluations += sol.iterations;
            // a piece only loses by merging, so it bounds every candidate
            if sol.t <= floor {
                return Ok(false);
            }
            for &i in &piece {
                group_of[i] = group_members.len();
            }
            group_members.push(piece);
            group_t.push(sol.t);
        }

        let sys = self.sys;
        let mut best: Option<(f64, usize)> = None;
        for (ci, c) in cands.iter().enumerate() {
            let threshold = best.map_or(floor, |(v, _)| v.max(floor));
            let solo = (c.cap * sys.gains[n] / sys.noise_w).ln_1p();
            if solo <= threshold {
                continue;
            }
            let mut touched = vec![false; group_members.len()];
            for m in (0..sys.len()).filter(|&m| m != n) {
                if c.row[m] > 0.0 || c.col[m] > 0.0 {
                    touched[group_of[m]] = true;
                }
            }
            let untouched = (0..group_members.len())
                .filter(|&g| !touched[g])
                .map(|g| group_t[g])
                .fold(f64::INFINITY, f64::min);
            if untouched <= threshold {
                continue;
            }
            if (0..group_members.len()).any(|g| touched[g] && group_t[g] <= threshold) {
                continue;
            }
            let mut idx = vec![n];
            for g in (0..group_members.len()).filter(|&g| touched[g]) {
                idx.extend_from_slice(&group_members[g]);
            }
            idx.sort_unstable();
            let mut sub = WeightMatrix::zeros(idx.len());
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let v = if i == n {
                        c.row[j]
                    } else if j == n {
                        c.col[i]
                    } else {
                        self.w.get(i, j)
                    };
                    sub.set(a, b, v);
                }
            }
            let gains: Vec<f64> = idx.iter().map(|&i| sys.gains[i]).collect();
            let caps: Vec<f64> = idx.iter().map(|&i| if i == n { c.cap } else { self.caps[i] }).collect();
            let sol = bisect(&PowerProblem::new(&gains, &caps, &sub, sys.noise_w), self.tol)?;
            self.evaluations += sol.iterations;
            let value = untouched.min(sol.t);
            if value > threshold {
                best = Some((value, ci));
            }
        }

        let Some((_, ci)) = best else {
            return Ok(false);
        };
        let c = &cands[ci];
        self.ratios[n] = c.ratio;
        self.caps[n] = c.cap;
        self.windows[n] = TxWindow::new(sys.energy(n, c.ratio).eh_time_s(), sys.toa_s[n]);
        for m in (0..sys.len()).filter(|&m| m != n) {
            self.w.set(n, m, c.row[m]);
            self.w.set(m, n, c.col[m]);
        }
        self.refresh()?;
        Ok(true)
    }
}

/// Per-user coordinate search over the EH-ratio grid.
///
/// Starts from the better closed form, so it never ends below either.
/// Users are visited in descending time on air; a move is taken only when
/// it raises the max-min rate by more than `tol`.
pub fn grid_search(sys: &UplinkSystem, policy: &EhTimePolicy, tol: f64) -> Result<GridOutcome> {
    policy.validate()?;
    sys.validate()?;
    let (start, mut state) = starting_state(sys, tol)?;
    let order = user_order(sys);
    let mut moves = 0;
    for _ in 0..policy.passes {
        let mut changed = false;
        for &n in &order {
            if state.try_user(n, policy)? {
                moves += 1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(GridOutcome {
        min_rate_nats: state.objective(),
        ratios: state.ratios,
        start,
        moves,
        evaluations: state.evaluations,
    })
}

/// The same search re-solving the whole system for every candidate.
/// Slow; kept as a reference for [`grid_search`].
pub fn grid_search_exhaustive(sys: &UplinkSystem, policy: &EhTimePolicy, tol: f64) -> Result<GridOutcome> {
    policy.validate()?;
    sys.validate()?;
    let (start, state) = starting_state(sys, tol)?;
    let (mut ratios, mut current, mut evaluations) = (state.ratios.clone(), state.objective(), state.evaluations);
    let mut moves = 0;
    for _ in 0..policy.passes {
        let mut changed = false;
        for &n in &user_order(sys) {
            let floor = current + tol;
            let mut best: Option<(f64, f64)> = None;
            for k in candidate_ratios(sys, policy, n) {
                if k == ratios[n] {
                    continue;
                }
                let mut trial = ratios.clone();
                trial[n] = k;
                let sol = sys.solve(&trial, tol)?;
                evaluations += sol.iterations;
                let threshold = best.map_or(floor, |(v, _)| v.max(floor));
                if sol.t_star_nats > threshold {
                    best = Some((sol.t_star_nats, k));
                }
            }
            if let Some((v, k)) = best {
                ratios[n] = k;
                current = v;
                moves += 1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(GridOutcome {
        ratios,
        min_rate_nats: current,
        start,
        moves,
        evaluations,
    })
}
