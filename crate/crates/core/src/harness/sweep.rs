//! Density sweeps: densities x seeds x policy variants, run in parallel.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{PowerMode, ScenarioConfig};
use super::trial::{finish_trial, run_allocation, TrialResult, Variant};
use crate::collision::CollisionMode;
use crate::error::{Error, Result};
use crate::interference::CorrelationKind;
use crate::optimizer::EhTimeMode;
use crate::sf_alloc::SfPolicy;
use crate::units::nats_to_bits;

/// splitmix64 finaliser.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Topology seed of a sweep cell. Depends only on the user seed and the
/// density index, so every variant of a cell sees the same topology.
pub fn cell_seed(seed: u64, density_index: usize) -> u64 {
    splitmix64(seed ^ splitmix64(density_index as u64))
}

/// One trial of a sweep, flattened for CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub density_per_km2: f64,
    pub seed: u64,
    pub trial_seed: u64,
    pub sf_policy: SfPolicy,
    pub corr_policy: CorrelationKind,
    pub col_mode: CollisionMode,
    pub eh_mode: EhTimeMode,
    pub power_mode: PowerMode,
    pub users: usize,
    pub active: usize,
    pub min_rate_nats: f64,
    pub min_rate_bits: f64,
    pub mean_rate_nats: f64,
    pub mean_rate_bits: f64,
    pub sf7: usize,
    pub sf8: usize,
    pub sf9: usize,
    pub sf10: usize,
    pub sf11: usize,
    pub sf12: usize,
}

impl SweepRow {
    pub fn from_trial(t: &TrialResult, trial_seed: u64) -> Self {
        let c = t.sf_counts;
        SweepRow {
            density_per_km2: t.density_per_km2,
            seed: t.seed,
            trial_seed,
            sf_policy: t.variant.sf_policy,
            corr_policy: t.variant.corr_policy,
            col_mode: t.variant.col_mode,
            eh_mode: t.variant.eh_mode,
            power_mode: t.variant.power_mode,
            users: t.users,
            active: t.active,
            min_rate_nats: t.rates.min_rate_nats,
            min_rate_bits: t.rates.min_rate_bits(),
            mean_rate_nats: t.rates.mean_rate_nats(),
            mean_rate_bits: t.rates.mean_rate_bits(),
            sf7: c[0],
            sf8: c[1],
            sf9: c[2],
            sf10: c[3],
            sf11: c[4],
            sf12: c[5],
        }
    }

    pub fn variant(&self) -> Variant {
        Variant {
            sf_policy: self.sf_policy,
            corr_policy: self.corr_policy,
            col_mode: self.col_mode,
            eh_mode: self.eh_mode,
            power_mode: self.power_mode,
        }
    }

    pub fn sf_counts(&self) -> [usize; 6] {
        [self.sf7, self.sf8, self.sf9, self.sf10, self.sf11, self.sf12]
    }
}

/// Per-cell statistics over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub density_per_km2: f64,
    pub sf_policy: SfPolicy,
    pub corr_policy: CorrelationKind,
    pub col_mode: CollisionMode,
    pub eh_mode: EhTimeMode,
    pub power_mode: PowerMode,
    pub trials: usize,
    pub mean_min_rate_nats: f64,
    pub p10_min_rate_nats: f64,
    pub p50_min_rate_nats: f64,
    pub p90_min_rate_nats: f64,
    pub mean_min_rate_bits: f64,
    pub mean_rate_nats: f64,
    pub mean_active: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Density-major, then seed, then variant, in configuration order.
    pub rows: Vec<SweepRow>,
}

/// Linear-interpolated percentile of sorted data, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

impl SweepResult {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows_for<'a>(&'a self, v: &'a Variant) -> impl Iterator<Item = &'a SweepRow> + 'a {
        self.rows.iter().filter(move |r| r.variant() == *v)
    }

    /// One summary per (density, variant), in first-appearance order.
    pub fn aggregate(&self) -> Vec<CellSummary> {
        let mut keys: Vec<(f64, Variant)> = Vec::new();
        for r in &self.rows {
            let k = (r.density_per_km2, r.variant());
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        keys.into_iter()
            .map(|(d, v)| {
                let rows: Vec<&SweepRow> = self
                    .rows
                    .iter()
                    .filter(|r| r.density_per_km2 == d && r.variant() == v)
                    .collect();
                let mut mins: Vec<f64> = rows.iter().map(|r| r.min_rate_nats).collect();
                mins.sort_by(f64::total_cmp);
                let mean_min = mean(mins.iter().copied());
                CellSummary {
                    density_per_km2: d,
                    sf_policy: v.sf_policy,
                    corr_policy: v.corr_policy,
                    col_mode: v.col_mode,
                    eh_mode: v.eh_mode,
                    power_mode: v.power_mode,
                    trials: rows.len(),
                    mean_min_rate_nats: mean_min,
                    p10_min_rate_nats: percentile(&mins, 0.1),
                    p50_min_rate_nats: percentile(&mins, 0.5),
                    p90_min_rate_nats: percentile(&mins, 0.9),
                    mean_min_rate_bits: nats_to_bits(mean_min),
                    mean_rate_nats: mean(rows.iter().map(|r| r.mean_rate_nats)),
                    mean_active: mean(rows.iter().map(|r| r.active as f64)),
                }
            })
            .collect()
    }
}

/// Variants spanned by `cfg.sweep`, crossed in the order sf, corr, col, eh, power.
pub fn variants(cfg: &ScenarioConfig) -> Vec<Variant> {
    fn axis<T: Copy>(list: &[T], base: T) -> Vec<T> {
        if list.is_empty() {
            vec![base]
        } else {
            list.to_vec()
        }
    }
    let a = &cfg.sweep;
    let mut out = Vec::new();
    for &sf_policy in &axis(&a.sf_policy, cfg.sf_policy) {
        for &corr_policy in &axis(&a.corr_policy, cfg.corr_policy.kind) {
            for &col_mode in &axis(&a.col_mode, cfg.col_mode) {
                for &eh_mode in &axis(&a.eh_mode, cfg.eh_policy.mode) {
                    for &power_mode in &axis(&a.power_mode, cfg.power_mode) {
                        out.push(Variant {
                            sf_policy,
                            corr_policy,
                            col_mode,
                            eh_mode,
                            power_mode,
                        });
                    }
                }
            }
        }
    }
    out
}

fn run_cell(cfg: &ScenarioConfig, variants: &[Variant], seed: u64, di: usize, density: f64) -> Result<Vec<SweepRow>> {
    let trial_seed = cell_seed(seed, di);
    let mut rows = Vec::with_capacity(variants.len());
    // SF allocation depends only on the SF policy; reuse it across variants
    let mut allocs = Vec::new();
    for v in variants {
        let vc = v.apply(cfg);
        let k = match allocs.iter().position(|(p, _)| *p == v.sf_policy) {
            Some(k) => k,
            None => {
                allocs.push((v.sf_policy, run_allocation(&vc, trial_seed, density)?));
                allocs.len() - 1
            }
        };
        let mut t = finish_trial(&vc, trial_seed, density, &allocs[k].1)?;
        t.seed = seed;
        rows.push(SweepRow::from_trial(&t, trial_seed));
    }
    Ok(rows)
}

/// Runs every (density, seed) cell of `cfg` for the given variants.
///
/// Cells run in parallel; output order and values do not depend on the
/// worker count.
pub fn run_sweep_variants(cfg: &ScenarioConfig, variants: &[Variant]) -> Result<SweepResult> {
    cfg.validate()?;
    if cfg.density_sweep.is_empty() {
        return Err(Error::config("density_sweep must not be empty"));
    }
    if variants.is_empty() {
        return Err(Error::config("no sweep variants"));
    }
    let seeds = cfg.seed_list();
    let cells: Vec<(usize, f64, u64)> = cfg
        .density_sweep
        .iter()
        .enumerate()
        .flat_map(|(di, &d)| seeds.iter().map(move |&s| (di, d, s)))
        .collect();
    let per_cell: Vec<Vec<SweepRow>> = cells
        .par_iter()
        .map(|&(di, d, s)| run_cell(cfg, variants, s, di, d))
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        rows: per_cell.into_iter().flatten().collect(),
    })
}

pub fn run_sweep(cfg: &ScenarioConfig) -> Result<SweepResult> {
    run_sweep_variants(cfg, &variants(cfg))
}

/// Header-first CSV; an empty slice gives a header-only file.
pub(crate) fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| Error::csv(path, e))).collect()
}

pub const SWEEP_COLUMNS: [&str; 20] = [
    "density_per_km2",
    "seed",
    "trial_seed",
    "sf_policy",
    "corr_policy",
    "col_mode",
    "eh_mode",
    "power_mode",
    "users",
    "active",
    "min_rate_nats",
    "min_rate_bits",
    "mean_rate_nats",
    "mean_rate_bits",
    "sf7",
    "sf8",
    "sf9",
    "sf10",
    "sf11",
    "sf12",
];

pub const SUMMARY_COLUMNS: [&str; 14] = [
    "density_per_km2",
    "sf_policy",
    "corr_policy",
    "col_mode",
    "eh_mode",
    "power_mode",
    "trials",
    "mean_min_rate_nats",
    "p10_min_rate_nats",
    "p50_min_rate_nats",
    "p90_min_rate_nats",
    "mean_min_rate_bits",
    "mean_rate_nats",
    "mean_active",
];

/// Writes one row per trial.
pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    write_rows(path, &SWEEP_COLUMNS, &result.rows)
}

/// Writes one row per (density, variant).
pub fn emit_summary_csv(result: &SweepResult, path: &Path) -> Result<()> {
    write_rows(path, &SUMMARY_COLUMNS, &result.aggregate())
}

pub fn read_csv(path: &Path) -> Result<SweepResult> {
    Ok(SweepResult { rows: read_rows(path)? })
}
