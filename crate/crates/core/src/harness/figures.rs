//! Per-figure CSV tables.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::sweep::{run_sweep_variants, write_rows, CellSummary, SUMMARY_COLUMNS};
use super::trial::{run_allocation, Variant};
use crate::collision::CollisionMode;
use crate::error::{Error, Result};
use crate::interference::CorrelationKind;
use crate::optimizer::{closed_form_for, EhTimeMode};
use crate::phy::SpreadingFactor;
use crate::sf_alloc::SfPolicy;
use crate::units::nats_to_bits;

pub const FIG3_FILE: &str = "fig3_sf_histogram.csv";
pub const FIG4_FILE: &str = "fig4_ehtime_agreement.csv";
pub const FIG5_FILE: &str = "fig5_minrate_vs_density.csv";

const COL_MODES: [CollisionMode; 2] = [CollisionMode::EhDependent, CollisionMode::WorstCase];

/// Mean number of users per SF for one allocation policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig3Row {
    pub sf_policy: SfPolicy,
    pub sf: u8,
    pub trials: usize,
    pub mean_users: f64,
    pub mean_fraction: f64,
}

pub const FIG3_COLUMNS: [&str; 5] = ["sf_policy", "sf", "trials", "mean_users", "mean_fraction"];

/// SF histograms at the scenario's own user density, every policy, every seed.
pub fn fig3_rows(cfg: &ScenarioConfig) -> Result<Vec<Fig3Row>> {
    cfg.validate()?;
    let seeds = cfg.seed_list();
    let density = cfg.geometry.user_density_per_km2;
    let mut out = Vec::new();
    for policy in SfPolicy::ALL {
        let mut c = cfg.clone();
        c.sf_policy = policy;
        let counts: Vec<[usize; 6]> = seeds
            .par_iter()
            .map(|&s| run_allocation(&c, s, density).map(|a| a.assignment.group_sizes))
            .collect::<Result<_>>()?;
        let trials = counts.len();
        for sf in SpreadingFactor::ALL {
            let i = sf.index();
            let users: f64 = counts.iter().map(|c| c[i] as f64).sum::<f64>() / trials as f64;
            let fraction: f64 = counts
                .iter()
                .map(|c| c[i] as f64 / c.iter().sum::<usize>().max(1) as f64)
                .sum::<f64>()
                / trials as f64;
            out.push(Fig3Row {
                sf_policy: policy,
                sf: sf.value(),
                trials,
                mean_users: users,
                mean_fraction: fraction,
            });
        }
    }
    Ok(out)
}

/// Mean min-rate of each EH-time mode against the closed form matched to
/// the collision mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig4Row {
    pub density_per_km2: f64,
    pub col_mode: CollisionMode,
    pub eh_mode: EhTimeMode,
    pub trials: usize,
    pub mean_min_rate_nats: f64,
    pub mean_min_rate_bits: f64,
    /// Mean min-rate over that of the matched closed form.
    pub ratio_to_matched: f64,
}

pub const FIG4_COLUMNS: [&str; 7] = [
    "density_per_km2",
    "col_mode",
    "eh_mode",
    "trials",
    "mean_min_rate_nats",
    "mean_min_rate_bits",
    "ratio_to_matched",
];

pub fn fig4_variants(cfg: &ScenarioConfig) -> Vec<Variant> {
    let base = Variant::of(cfg);
    let mut out = Vec::new();
    for col_mode in COL_MODES {
        for eh_mode in [EhTimeMode::MaxOffTime, EhTimeMode::CapMatching, EhTimeMode::GridSearch] {
            out.push(Variant {
                col_mode,
                eh_mode,
                ..base
            });
        }
    }
    out
}

pub fn fig4_rows(cfg: &ScenarioConfig) -> Result<Vec<Fig4Row>> {
    let summary = run_sweep_variants(cfg, &fig4_variants(cfg))?.aggregate();
    let mut out = Vec::new();
    for s in &summary {
        let matched = summary
            .iter()
            .find(|m| {
                m.density_per_km2 == s.density_per_km2
                    && m.col_mode == s.col_mode
                    && m.eh_mode == closed_form_for(s.col_mode)
            })
            .ok_or_else(|| Error::config("matched closed form missing from sweep"))?;
        out.push(Fig4Row {
            density_per_km2: s.density_per_km2,
            col_mode: s.col_mode,
            eh_mode: s.eh_mode,
            trials: s.trials,
            mean_min_rate_nats: s.mean_min_rate_nats,
            mean_min_rate_bits: nats_to_bits(s.mean_min_rate_nats),
            ratio_to_matched: s.mean_min_rate_nats / matched.mean_min_rate_nats,
        });
    }
    Ok(out)
}

/// Every SF policy under both interference scenarios and both collision
/// modes, each collision mode with its matched EH time.
pub fn fig5_variants(cfg: &ScenarioConfig) -> Vec<Variant> {
    let mut out = Vec::new();
    for sf_policy in SfPolicy::ALL {
        for corr_policy in [CorrelationKind::CoSfOnly, CorrelationKind::CoAndInterSf] {
            for col_mode in COL_MODES {
                out.push(Variant {
                    sf_policy,
                    corr_policy,
                    col_mode,
                    eh_mode: closed_form_for(col_mode),
                    power_mode: cfg.power_mode,
                });
            }
        }
    }
    out
}

pub fn fig5_rows(cfg: &ScenarioConfig) -> Result<Vec<CellSummary>> {
    Ok(run_sweep_variants(cfg, &fig5_variants(cfg))?.aggregate())
}

/// Writes the three figure tables into `dir` and returns their paths.
pub fn write_figures(cfg: &ScenarioConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let p3 = dir.join(FIG3_FILE);
    write_rows(&p3, &FIG3_COLUMNS, &fig3_rows(cfg)?)?;
    let p4 = dir.join(FIG4_FILE);
    write_rows(&p4, &FIG4_COLUMNS, &fig4_rows(cfg)?)?;
    let p5 = dir.join(FIG5_FILE);
    write_rows(&p5, &SUMMARY_COLUMNS, &fig5_rows(cfg)?)?;
    Ok(vec![p3, p4, p5])
}
