//! Max-min power control by bisection on a common rate target.
//!
//! For a target `t` every user needs SINR `gamma = e^t - 1`. In received
//! power units `x_n = p_n g_n` that is `x >= gamma (W x + sigma^2)`, whose
//! componentwise-minimal solution is the limit of the monotone iteration
//! `x <- gamma (W x + sigma^2)` started at zero. The limit exists exactly
//! when `I - gamma W` is a nonsingular M-matrix; it is computed here by
//! Gaussian elimination without pivoting, whose pivots are all positive
//! iff that holds. `t` is feasible iff the limit respects every cap.
//! Feasibility is monotone in `t`, so the largest feasible target is found
//! by bisection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interference::WeightMatrix;

/// Bisection bracket width, nats.
pub const DEFAULT_TOL_NATS: f64 = 1e-6;
/// Upper bound on bisection steps per component.
pub const MAX_BISECTION_STEPS: usize = 60;
/// Iteration cap for the fixed-point route.
pub const FIXED_POINT_MAX_ITER: usize = 10_000;
/// Relative convergence tolerance for the fixed-point route.
pub const FIXED_POINT_REL_TOL: f64 = 1e-12;

/// Relative slack when comparing a solved power against its cap.
const CAP_SLACK: f64 = 1e-12;

/// One max-min power control instance over the active users.
#[derive(Debug, Clone, Copy)]
pub struct PowerProblem<'a> {
    pub gains: &'a [f64],
    pub caps: &'a [f64],
    pub weights: &'a WeightMatrix,
    pub noise_w: f64,
}

impl<'a> PowerProblem<'a> {
    pub fn new(gains: &'a [f64], caps: &'a [f64], weights: &'a WeightMatrix, noise_w: f64) -> Self {
        PowerProblem {
            gains,
            caps,
            weights,
            noise_w,
        }
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    fn check(&self) -> Result<()> {
        let n = self.gains.len();
        if self.caps.len() != n || self.weights.len() != n {
            return Err(Error::config("power problem dimensions disagree"));
        }
        if !(self.noise_w.is_finite() && self.noise_w > 0.0) {
            return Err(Error::NonFinite("noise power"));
        }
        if self.gains.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::NonFinite("channel gain"));
        }
        if self.caps.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::NonFinite("power cap"));
        }
        for i in 0..n {
            if self.weights.row(i).iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                return Err(Error::NonFinite("interference weight"));
            }
        }
        Ok(())
    }

    /// Solo rate bound `ln(1 + cap g / sigma^2)` of user `i`.
    pub fn solo_rate(&self, i: usize) -> f64 {
        (self.caps[i] * self.gains[i] / self.noise_w).ln_1p()
    }
}

/// Minimal received powers meeting SINR `gamma` everywhere, or `None`
/// when no finite solution exists.
fn minimal_received_powers(gamma: f64, w: &WeightMatrix, noise_w: f64) -> Option<Vec<f64>> {
    let n = w.len();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        let row = w.row(i);
        for j in 0..n {
            a[i * n + j] = if i == j { 1.0 } else { -gamma * row[j] };
        }
    }
    let mut b = vec![gamma * noise_w; n];
    for k in 0..n {
        let (upper, lower) = a.split_at_mut((k + 1) * n);
        let pivot_row = &upper[k * n..];
        let pivot = pivot_row[k];
        if !(pivot > 0.0) {
            return None;
        }
        let bk = b[k];
        for (i, row) in lower.chunks_exact_mut(n).enumerate() {
            let f = row[k] / pivot;
            if f != 0.0 {
                for (x, y) in row[k + 1..].iter_mut().zip(&pivot_row[k + 1..]) {
                    *x -= f * y;
                }
                b[k + 1 + i] -= f * bk;
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let row = &a[i * n..(i + 1) * n];
        let s: f64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(u, v)| u * v).sum();
        x[i] = (b[i] - s) / row[i];
        if !(x[i].is_finite() && x[i] >= 0.0) {
            return None;
        }
    }
    Some(x)
}

/// Whether every user can reach rate `t` (nats) within its cap. Returns the
/// componentwise-minimal feasible powers when it can.
pub fn feasible(t: f64, problem: &PowerProblem<'_>) -> Result<Option<Vec<f64>>> {
    problem.check()?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::NonFinite("rate target"));
    }
    let n = problem.len();
    let gamma = t.exp_m1();
    if gamma == 0.0 {
        return Ok(Some(vec![0.0; n]));
    }
    let Some(x) = minimal_received_powers(gamma, problem.weights, problem.noise_w) else {
        return Ok(None);
    };
    let mut powers = Vec::with_capacity(n);
    for i in 0..n {
        let p = x[i] / problem.gains[i];
        let cap = problem.caps[i];
        if p > cap * (1.0 + CAP_SLACK) {
            return Ok(None);
        }
        powers.push(p.min(cap));
    }
    Ok(Some(powers))
}

/// Outcome of the plain fixed-point iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum FixedPoint {
    /// Converged below every cap.
    Feasible { powers: Vec<f64>, iterations: usize },
    /// Some iterate crossed a cap, so the limit does too.
    Infeasible { iterations: usize },
    /// Neither happened within the iteration cap.
    Undecided { powers: Vec<f64> },
}

/// `p_n <- gamma (sum_m w_nm p_m g_m + sigma^2) / g_n` from zero.
///
/// The iterates increase monotonically towards the minimal solution, which
/// makes a cap violation at any step conclusive.
pub fn fixed_point_powers(t: f64, problem: &PowerProblem<'_>, max_iter: usize, rel_tol: f64) -> Result<FixedPoint> {
    problem.check()?;
    let n = problem.len();
    let gamma = t.exp_m1();
    let mut p = vec![0.0; n];
    let mut next = vec![0.0; n];
    for it in 1..=max_iter {
        let mut delta: f64 = 0.0;
        for i in 0..n {
            let interference: f64 = problem
                .weights
                .row(i)
                .iter()
                .enumerate()
                .map(|(m, w)| w * p[m] * problem.gains[m])
                .sum();
            next[i] = gamma * (interference + problem.noise_w) / problem.gains[i];
            if next[i] > problem.caps[i] * (1.0 + CAP_SLACK) {
                return Ok(FixedPoint::Infeasible { iterations: it });
            }
            let change = (next[i] - p[i]).abs();
            if next[i] > 0.0 {
                delta = delta.max(change / next[i]);
            }
        }
        std::mem::swap(&mut p, &mut next);
        if delta <= rel_tol {
            return Ok(FixedPoint::Feasible { powers: p, iterations: it });
        }
    }
    Ok(FixedPoint::Undecided { powers: p })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSolution {
    pub powers_w: Vec<f64>,
    /// Largest common rate target found feasible, nats.
    pub t_star_nats: f64,
    /// Feasibility evaluations performed.
    pub iterations: usize,
    pub converged: bool,
    /// `(low, high)` brackets of the limiting component.
    pub bracket_history: Vec<(f64, f64)>,
}

/// Result of bisecting one coupled component.
#[derive(Debug, Clone)]
pub(crate) struct ComponentSolution {
    pub t: f64,
    pub powers: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<(f64, f64)>,
}

/// Bisection over one instance, treated as a single block.
pub(crate) fn bisect(problem: &PowerProblem<'_>, tol: f64) -> Result<ComponentSolution> {
    let n = problem.len();
    if n == 1 && problem.weights.is_all_zero() {
        return Ok(ComponentSolution {
            t: problem.solo_rate(0),
            powers: problem.caps.to_vec(),
            iterations: 0,
            converged: true,
            history: Vec::new(),
        });
    }
    let mut lo = 0.0;
    let mut lo_powers = vec![0.0; n];
    // every user is bounded by its own noise-limited rate
    let mut hi = (0..n).map(|i| problem.solo_rate(i)).fold(f64::INFINITY, f64::min);
    let mut history = vec![(lo, hi)];
    let mut iterations = 1;
    if let Some(p) = feasible(hi, problem)? {
        return Ok(ComponentSolution {
            t: hi,
            powers: p,
            iterations,
            converged: true,
            history,
        });
    }
    while hi - lo > tol && iterations <= MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        iterations += 1;
        match feasible(mid, problem)? {
            Some(p) => {
                lo = mid;
                lo_powers = p;
            }
            None => hi = mid,
        }
        history.push((lo, hi));
    }
    Ok(ComponentSolution {
        t: lo,
        powers: lo_powers,
        iterations,
        converged: hi - lo <= tol,
        history,
    })
}

/// Solves the instance restricted to `idx`.
pub(crate) fn solve_subset(problem: &PowerProblem<'_>, idx: &[usize], tol: f64) -> Result<ComponentSolution> {
    let gains: Vec<f64> = idx.iter().map(|&i| problem.gains[i]).collect();
    let caps: Vec<f64> = idx.iter().map(|&i| problem.caps[i]).collect();
    let w = problem.weights.submatrix(idx);
    bisect(&PowerProblem::new(&gains, &caps, &w, problem.noise_w), tol)
}

/// Max-min power allocation.
///
/// Users that cannot interfere with each other are split into independent
/// blocks. Each block is bisected on its own and keeps the powers of its
/// own optimum, so blocks that are not limiting run above the common
/// target; `t_star_nats` is the minimum over blocks.
pub fn maxmin_power(problem: &PowerProblem<'_>, tol: f64) -> Result<PowerSolution> {
    if problem.is_empty() {
        return Err(Error::EmptyActiveSet);
    }
    problem.check()?;
    if !(tol > 0.0) {
        return Err(Error::config("solver tolerance must be positive"));
    }
    let mut powers = vec![0.0; problem.len()];
    let mut t_star = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = true;
    let mut bracket_history = Vec::new();
    for comp in problem.weights.components() {
        let sol = solve_subset(problem, &comp, tol)?;
        for (k, &i) in comp.iter().enumerate() {
            powers[i] = sol.powers[k];
        }
        iterations += sol.iterations;
        converged &= sol.converged;
        if sol.t < t_star {
            t_star = sol.t;
            bracket_history = sol.history;
        }
    }
    Ok(PowerSolution {
        powers_w: powers,
        t_star_nats: t_star,
        iterations,
        converged,
        bracket_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interference::{rate_report, sinr};
    use proptest::prelude::*;

    #[test]
    fn zero_target_is_feasible_at_zero_power() {
        let w = WeightMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let p = PowerProblem::new(&[1.0, 1.0], &[1.0, 1.0], &w, 0.1);
        assert_eq!(feasible(0.0, &p).unwrap(), Some(vec![0.0, 0.0]));
    }

    #[test]
    fn single_user_cap_bound() {
        let w = WeightMatrix::zeros(1);
        let p = PowerProblem::new(&[2.0], &[0.5], &w, 0.1);
        let solo = (0.5f64 * 2.0 / 0.1).ln_1p();
        assert!(feasible(solo * 0.999, &p).unwrap().is_some());
        assert!(feasible(solo * 1.001, &p).unwrap().is_none());
        let sol = maxmin_power(&p, DEFAULT_TOL_NATS).unwrap();
        assert_eq!(sol.powers_w, vec![0.5]);
        assert_eq!(sol.t_star_nats, solo);
    }

    #[test]
    fn decoupled_users_run_at_cap() {
        let w = WeightMatrix::zeros(2);
        let gains = [1e-7, 3e-8];
        let caps = [0.01, 0.05];
        let p = PowerProblem::new(&gains, &caps, &w, 2e-15);
        let sol = maxmin_power(&p, DEFAULT_TOL_NATS).unwrap();
        assert_eq!(sol.powers_w, caps.to_vec());
        assert_eq!(sol.t_star_nats, p.solo_rate(0).min(p.solo_rate(1)));
    }

    #[test]
    fn non_finite_inputs_rejected() {
        let w = WeightMatrix::zeros(1);
        let p = PowerProblem::new(&[f64::NAN], &[1.0], &w, 0.1);
        assert!(matches!(feasible(0.1, &p), Err(Error::NonFinite(_))));
        let p = PowerProblem::new(&[1.0], &[1.0], &w, 0.1);
        assert!(feasible(f64::INFINITY, &p).is_err());
        let w = WeightMatrix::from_rows(&[vec![0.0, f64::NAN], vec![0.0, 0.0]]);
        let p = PowerProblem::new(&[1.0, 1.0], &[1.0, 1.0], &w, 0.1);
        assert!(feasible(0.1, &p).is_err());
    }

    #[test]
    fn empty_problem_is_an_error() {
        let w = WeightMatrix::zeros(0);
        assert!(matches!(
            maxmin_power(&PowerProblem::new(&[], &[], &w, 1.0), 1e-6),
            Err(Error::EmptyActiveSet)
        ));
    }

    #[test]
    fn symmetric_pair_matches_closed_form() {
        // two fully colliding users with equal gains: gamma* = X / (sigma^2 + X)
        let w = WeightMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let (g, cap, noise) = (1e-7, 0.02, 2e-15);
        let (gains, caps) = ([g, g], [cap, cap]);
        let p = PowerProblem::new(&gains, &caps, &w, noise);
        let sol = maxmin_power(&p, 1e-9).unwrap();
        let x = cap * g;
        let expect = (x / (noise + x)).ln_1p();
        assert!((sol.t_star_nats - expect).abs() < 1e-8);
        assert!(sol.converged);
    }

    #[test]
    fn fixed_point_route_agrees_with_direct_solve() {
        let w = WeightMatrix::from_rows(&[
            vec![0.0, 0.3, 0.1],
            vec![0.2, 0.0, 0.4],
            vec![0.5, 0.1, 0.0],
        ]);
        let gains = [1.0, 0.5, 2.0];
        let caps = [1.0, 1.0, 1.0];
        let p = PowerProblem::new(&gains, &caps, &w, 0.05);
        for t in [0.05, 0.2, 0.4, 0.6, 0.9, 1.5] {
            let direct = feasible(t, &p).unwrap();
            match fixed_point_powers(t, &p, FIXED_POINT_MAX_ITER, FIXED_POINT_REL_TOL).unwrap() {
                FixedPoint::Feasible { powers, .. } => {
                    let d = direct.expect("direct route should agree");
                    for (a, b) in powers.iter().zip(&d) {
                        assert!((a - b).abs() <= 1e-9 * b.max(1e-12), "{t}: {a} vs {b}");
                    }
                }
                FixedPoint::Infeasible { .. } => assert!(direct.is_none(), "{t}"),
                FixedPoint::Undecided { .. } => panic!("no decision at t = {t}"),
            }
        }
    }

    #[test]
    fn solution_meets_targets_and_caps() {
        let w = WeightMatrix::from_rows(&[
            vec![0.0, 1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.25],
            vec![0.0, 0.0, 0.6, 0.0],
        ]);
        let gains = [1e-7, 2e-8, 5e-9, 1e-8];
        let caps = [0.05, 0.05, 0.001, 0.02];
        let p = PowerProblem::new(&gains, &caps, &w, 2e-15);
        let sol = maxmin_power(&p, DEFAULT_TOL_NATS).unwrap();
        let report = rate_report(&sol.powers_w, &gains, &w, 2e-15).unwrap();
        for (i, r) in report.per_user_rate_nats.iter().enumerate() {
            assert!(sol.powers_w[i] <= caps[i]);
            assert!(*r >= sol.t_star_nats - DEFAULT_TOL_NATS, "{i}: {r}");
        }
        assert!((report.min_rate_nats - sol.t_star_nats).abs() < 1e-6);
        assert!(!sol.bracket_history.is_empty());
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
        (2usize..6).prop_flat_map(|n| {
            (
                proptest::collection::vec(0.1f64..2.0, n),
                proptest::collection::vec(0.1f64..1.0, n),
                proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, n), n),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn feasibility_is_monotone((g, c, rows) in instance(), t1 in 0.0f64..3.0, t2 in 0.0f64..3.0) {
            let w = WeightMatrix::from_rows(&rows);
            let p = PowerProblem::new(&g, &c, &w, 0.05);
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            if feasible(hi, &p).unwrap().is_some() {
                prop_assert!(feasible(lo, &p).unwrap().is_some());
            }
        }

        #[test]
        fn feasible_powers_achieve_the_target((g, c, rows) in instance(), t in 0.0f64..1.0) {
            let w = WeightMatrix::from_rows(&rows);
            let p = PowerProblem::new(&g, &c, &w, 0.05);
            if let Some(powers) = feasible(t, &p).unwrap() {
                for i in 0..g.len() {
                    prop_assert!(powers[i] <= c[i]);
                    let r = sinr(i, &powers, &g, &w, 0.05).ln_1p();
                    prop_assert!(r >= t - 1e-9);
                }
            }
        }
    }
}
