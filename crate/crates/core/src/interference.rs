//! Waveform correlation policies, collision-weighted SINR and rates.
//!
//! Interference from user `m` onto user `n` is scaled by the fraction of
//! `m`'s packet that overlaps `n`'s (`col_nm / T_a,m`) and by the
//! correlation between their spreading codes.

use serde::{Deserialize, Serialize};

use crate::collision::CollisionMatrix;
use crate::error::{Error, Result};
use crate::phy::SpreadingFactor;
use crate::units::nats_to_bits;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationKind {
    /// Orthogonal waveforms: no multiuser interference.
    None,
    /// Only users on the same SF interfere.
    CoSfOnly,
    /// Same-SF and cross-SF interference.
    #[default]
    CoAndInterSf,
    /// Explicit 6x6 SF-pair table.
    Custom,
}

impl CorrelationKind {
    pub fn label(self) -> &'static str {
        match self {
            CorrelationKind::None => "none",
            CorrelationKind::CoSfOnly => "co_sf_only",
            CorrelationKind::CoAndInterSf => "co_and_inter_sf",
            CorrelationKind::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelationPolicy {
    pub kind: CorrelationKind,
    pub rho_co: f64,
    pub rho_inter: f64,
    /// SF-pair correlations for `kind = "custom"`, SF7 first.
    pub custom: Option<Vec<Vec<f64>>>,
}

impl Default for CorrelationPolicy {
    fn default() -> Self {
        CorrelationPolicy {
            kind: CorrelationKind::CoAndInterSf,
            rho_co: 1.0,
            rho_inter: 1.0,
            custom: None,
        }
    }
}

impl CorrelationPolicy {
    pub fn of_kind(kind: CorrelationKind) -> Self {
        CorrelationPolicy {
            kind,
            ..CorrelationPolicy::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let in_range = |v: f64| (0.0..=1.0).contains(&v);
        if !in_range(self.rho_co) || !in_range(self.rho_inter) {
            return Err(Error::config("correlation factors must lie in [0, 1]"));
        }
        match (&self.kind, &self.custom) {
            (CorrelationKind::Custom, None) => {
                Err(Error::config("correlation.kind = custom needs a custom table"))
            }
            (CorrelationKind::Custom, Some(t)) => {
                if t.len() != 6 || t.iter().any(|r| r.len() != 6) {
                    return Err(Error::config("custom correlation table must be 6x6"));
                }
                for i in 0..6 {
                    for j in 0..6 {
                        if !in_range(t[i][j]) {
                            return Err(Error::config("custom correlation outside [0, 1]"));
                        }
                        if t[i][j] != t[j][i] {
                            return Err(Error::config("custom correlation table is not symmetric"));
                        }
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Correlation factor between the waveforms of two users.
    pub fn correlation(&self, sf_n: SpreadingFactor, sf_m: SpreadingFactor, same_user: bool) -> f64 {
        if same_user {
            return 1.0;
        }
        let same_sf = sf_n == sf_m;
        match self.kind {
            CorrelationKind::None => 0.0,
            CorrelationKind::CoSfOnly if same_sf => self.rho_co,
            CorrelationKind::CoSfOnly => 0.0,
            CorrelationKind::CoAndInterSf if same_sf => self.rho_co,
            CorrelationKind::CoAndInterSf => self.rho_inter,
            CorrelationKind::Custom => self
                .custom
                .as_ref()
                .map_or(0.0, |t| t[sf_n.index()][sf_m.index()]),
        }
    }
}

/// Dense square matrix of interference weights. Entry `(n, m)` scales
/// `m`'s received power into `n`'s interference; the diagonal is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    n: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn zeros(n: usize) -> Self {
        WeightMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Builds from row-major rows. Diagonal entries are forced to zero.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = WeightMatrix::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n, "weight matrix must be square");
            for (j, &v) in r.iter().enumerate() {
                if i != j {
                    m.set(i, j, v);
                }
            }
        }
        m
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Whether users `i` and `j` interfere in either direction.
    pub fn coupled(&self, i: usize, j: usize) -> bool {
        self.get(i, j) > 0.0 || self.get(j, i) > 0.0
    }

    /// Principal submatrix on `idx`.
    pub fn submatrix(&self, idx: &[usize]) -> WeightMatrix {
        let k = idx.len();
        let mut m = WeightMatrix::zeros(k);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m.data[a * k + b] = self.get(i, j);
            }
        }
        m
    }

    pub fn is_all_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// Connected components of the coupling graph, each sorted ascending,
    /// ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n;
        let mut label = vec![usize::MAX; n];
        let mut comps = Vec::new();
        for root in 0..n {
            if label[root] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut stack = vec![root];
            let mut members = Vec::new();
            label[root] = id;
            while let Some(i) = stack.pop() {
                members.push(i);
                for j in 0..n {
                    if label[j] == usize::MAX && self.coupled(i, j) {
                        label[j] = id;
                        stack.push(j);
                    }
                }
            }
            members.sort_unstable();
            comps.push(members);
        }
        comps
    }
}

/// Interference weight of `m` onto `n`: `(col_nm / T_a,m) rho_mn`.
pub fn pair_weight(col_nm: f64, toa_m: f64, rho_mn: f64) -> f64 {
    col_nm / toa_m * rho_mn
}

/// Weights for every ordered pair of users.
pub fn interference_weights(
    col: &CollisionMatrix,
    toa: &[f64],
    sfs: &[SpreadingFactor],
    policy: &CorrelationPolicy,
) -> WeightMatrix {
    let n = col.len();
    assert!(toa.len() == n && sfs.len() == n);
    let mut w = WeightMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let rho = policy.correlation(sfs[j], sfs[i], false);
                w.set(i, j, pair_weight(col.get(i, j), toa[j], rho));
            }
        }
    }
    w
}

/// Interference plus noise seen by user `n`.
pub fn interference_plus_noise(n: usize, powers: &[f64], gains: &[f64], w: &WeightMatrix, noise_w: f64) -> f64 {
    w.row(n)
        .iter()
        .zip(powers.iter().zip(gains))
        .enumerate()
        .filter(|(m, _)| *m != n)
        .map(|(_, (wt, (p, g)))| wt * p * g)
        .sum::<f64>()
        + noise_w
}

/// Linear SINR of user `n`.
pub fn sinr(n: usize, powers: &[f64], gains: &[f64], w: &WeightMatrix, noise_w: f64) -> f64 {
    powers[n] * gains[n] / interference_plus_noise(n, powers, gains, w, noise_w)
}

/// Shannon rate in nats per channel use.
pub fn rate_nats(sinr: f64) -> f64 {
    sinr.ln_1p()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub per_user_rate_nats: Vec<f64>,
    pub min_rate_nats: f64,
    pub sinr_linear: Vec<f64>,
}

impl RateReport {
    pub fn mean_rate_nats(&self) -> f64 {
        self.per_user_rate_nats.iter().sum::<f64>() / self.per_user_rate_nats.len() as f64
    }

    pub fn min_rate_bits(&self) -> f64 {
        nats_to_bits(self.min_rate_nats)
    }

    pub fn mean_rate_bits(&self) -> f64 {
        nats_to_bits(self.mean_rate_nats())
    }
}

/// SINR and rate of every active user for the given powers.
pub fn rate_report(powers: &[f64], gains: &[f64], w: &WeightMatrix, noise_w: f64) -> Result<RateReport> {
    if powers.is_empty() {
        return Err(Error::EmptyActiveSet);
    }
    let sinr_linear: Vec<f64> = (0..powers.len())
        .map(|n| sinr(n, powers, gains, w, noise_w))
        .collect();
    let per_user_rate_nats: Vec<f64> = sinr_linear.iter().map(|&s| rate_nats(s)).collect();
    let min_rate_nats = per_user_rate_nats.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(RateReport {
        per_user_rate_nats,
        min_rate_nats,
        sinr_linear,
    })
}
