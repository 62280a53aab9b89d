//! Packet collision time between harvest-then-transmit users.
//!
//! Every user starts harvesting at a common time origin and transmits one
//! packet as soon as harvesting ends, so user `n` occupies the channel on
//! `[tau_n, tau_n + T_a,n]`. The closed form below splits on whether the
//! later starter also has the longer packet; [`collision_time_oracle`] is a
//! direct interval intersection used to cross-check it.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxWindow {
    /// Transmission start, equal to the harvest time.
    pub start_s: f64,
    /// Time on air.
    pub duration_s: f64,
}

impl TxWindow {
    pub fn new(start_s: f64, duration_s: f64) -> Self {
        debug_assert!(start_s >= 0.0 && duration_s > 0.0);
        TxWindow { start_s, duration_s }
    }

    pub fn end_s(&self) -> f64 {
        self.start_s + self.duration_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CollisionMode {
    /// Overlap computed from the actual harvest times.
    #[default]
    EhDependent,
    /// Every pair assumed to end together: overlap is the shorter packet.
    WorstCase,
}

impl CollisionMode {
    pub fn label(self) -> &'static str {
        match self {
            CollisionMode::EhDependent => "eh_dependent",
            CollisionMode::WorstCase => "worst_case",
        }
    }
}

/// Branch taken when start order and duration order agree (or either
/// difference is zero).
pub(crate) fn aligned_branch(gap: f64, shorter: f64) -> f64 {
    if gap >= shorter {
        0.0
    } else {
        shorter - gap
    }
}

/// Branch taken when the later starter has the shorter packet.
pub(crate) fn crossed_branch(gap: f64, duration_gap: f64, shorter: f64, longer: f64) -> f64 {
    if gap >= longer {
        0.0
    } else if gap >= duration_gap {
        longer - gap
    } else {
        shorter
    }
}

/// Overlap in seconds between two transmissions.
pub fn collision_time(a: &TxWindow, b: &TxWindow) -> f64 {
    let d_start = a.start_s - b.start_s;
    let d_dur = a.duration_s - b.duration_s;
    let gap = d_start.abs();
    let longer = a.duration_s.max(b.duration_s);
    let shorter = a.duration_s.min(b.duration_s);
    let aligned = d_start == 0.0 || d_dur == 0.0 || (d_start > 0.0) == (d_dur > 0.0);
    if aligned {
        aligned_branch(gap, shorter)
    } else {
        crossed_branch(gap, d_dur.abs(), shorter, longer)
    }
}

/// Interval intersection length.
pub fn collision_time_oracle(a: &TxWindow, b: &TxWindow) -> f64 {
    (a.end_s().min(b.end_s()) - a.start_s.max(b.start_s)).max(0.0)
}

/// Upper bound on the overlap, reached when both packets end together.
pub fn worst_case_collision(ta_n: f64, ta_m: f64) -> f64 {
    ta_n.min(ta_m)
}

/// Symmetric `n x n` matrix of pairwise overlaps. The diagonal holds each
/// user's own time on air.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CollisionMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for i in 0..self.n {
            let line: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(",")).map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Pair overlap under `mode`.
pub fn pair_collision(a: &TxWindow, b: &TxWindow, mode: CollisionMode) -> f64 {
    match mode {
        CollisionMode::EhDependent => collision_time(a, b),
        CollisionMode::WorstCase => worst_case_collision(a.duration_s, b.duration_s),
    }
}

pub fn collision_matrix(windows: &[TxWindow], mode: CollisionMode) -> CollisionMatrix {
    let n = windows.len();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        data[i * n + i] = windows[i].duration_s;
        for j in i + 1..n {
            let c = pair_collision(&windows[i], &windows[j], mode);
            data[i * n + j] = c;
            data[j * n + i] = c;
        }
    }
    CollisionMatrix { n, data }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(start: f64, dur: f64) -> TxWindow {
        TxWindow::new(start, dur)
    }

    #[test]
    fn full_overlap() {
        assert_eq!(collision_time(&w(2.0, 0.3), &w(2.0, 0.3)), 0.3);
        // the oracle goes through end = start + duration and can lose an ulp
        assert!((collision_time_oracle(&w(2.0, 0.3), &w(2.0, 0.3)) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn aligned_far_apart() {
        // later start, longer packet, gap >= shorter
        assert_eq!(collision_time(&w(5.0, 1.0), &w(4.0, 0.5)), 0.0);
        assert_eq!(collision_time(&w(4.0, 0.5), &w(5.0, 1.0)), 0.0);
    }

    #[test]
    fn sf7_vs_sf12_at_max_off_time() {
        let a = w(4.511232, 0.045568);
        let b = w(111.919104, 1.130496);
        assert_eq!(collision_time(&a, &b), 0.0);
        assert_eq!(collision_time_oracle(&a, &b), 0.0);
    }

    #[test]
    fn inner_containment() {
        let a = w(0.0, 1.130496);
        let b = w(0.5, 0.045568);
        assert_eq!(collision_time(&a, &b), 0.045568);
        assert_eq!(collision_time(&b, &a), 0.045568);
    }

    #[test]
    fn crossed_partial_overlap() {
        // later starter shorter, but sticks out past the longer one's end
        let a = w(0.0, 1.0);
        let b = w(0.8, 0.5);
        assert!((collision_time(&a, &b) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn worst_case_is_min() {
        assert_eq!(worst_case_collision(0.045568, 1.130496), 0.045568);
        assert_eq!(worst_case_collision(0.3, 0.3), 0.3);
    }

    #[test]
    fn branches_agree_on_sign_ties() {
        // equal starts
        for (d1, d2) in [(0.3, 0.7), (0.7, 0.3), (1.0, 1.0)] {
            let (s, l) = (f64::min(d1, d2), f64::max(d1, d2));
            assert_eq!(aligned_branch(0.0, s), crossed_branch(0.0, l - s, s, l));
        }
        // equal durations
        for gap in [0.0, 0.1, 0.5, 0.99, 1.0, 2.0] {
            assert_eq!(aligned_branch(gap, 1.0), crossed_branch(gap, 0.0, 1.0, 1.0));
        }
    }

    #[test]
    fn matrix_shapes() {
        let m = collision_matrix(&[w(1.0, 0.2)], CollisionMode::EhDependent);
        assert_eq!(m.len(), 1);
        assert_eq!(m.get(0, 0), 0.2);

        let a = [w(0.0, 0.1), w(3.0, 0.4), w(9.0, 1.0)];
        let b = [w(7.0, 0.1), w(0.0, 0.4), w(1.0, 1.0)];
        let ma = collision_matrix(&a, CollisionMode::WorstCase);
        let mb = collision_matrix(&b, CollisionMode::WorstCase);
        assert_eq!(ma, mb);
        assert_eq!(ma.get(1, 2), 0.4);
    }

    #[test]
    fn csv_dump() {
        let m = collision_matrix(&[w(0.0, 0.1), w(0.05, 0.1)], CollisionMode::EhDependent);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("col.csv");
        m.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().next().unwrap(), "0.1,0.05");
    }

    fn window() -> impl Strategy<Value = TxWindow> {
        (0.0f64..120.0, 1e-3f64..2.0).prop_map(|(s, d)| TxWindow::new(s, d))
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(a in window(), b in window()) {
            let c = collision_time(&a, &b);
            prop_assert_eq!(c, collision_time(&b, &a));
            prop_assert!(c >= 0.0);
            prop_assert!(c <= worst_case_collision(a.duration_s, b.duration_s));
        }

        #[test]
        fn matches_interval_overlap(a in window(), b in window()) {
            let scale = a.end_s().max(b.end_s());
            prop_assert!((collision_time(&a, &b) - collision_time_oracle(&a, &b)).abs() <= 1e-12 * scale);
        }
    }
}
