//! Spreading-factor assignment.
//!
//! Four policies share one activation rule: a user takes part only if its
//! RSSI at full budget, `min(P_t, ((1-d)/d) E) g`, reaches the SF12
//! sensitivity. Then:
//!
//! - `unfair`: users ranked by RSSI are cut into six equal groups, the
//!   strongest getting SF7.
//! - `fair`: same ranking, group shares proportional to `f / 2^f`.
//! - `distance`: six equal-width rings around the gateway.
//! - `pathloss`: the lowest SF whose sensitivity the RSSI meets.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::energy::max_power;
use crate::error::{Error, Result};
use crate::geometry::{rssi, Topology};
use crate::phy::{PhyParams, SpreadingFactor};
use crate::units::{dbm_to_watts, watts_to_dbm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SfPolicy {
    #[default]
    Unfair,
    Fair,
    Distance,
    Pathloss,
}

impl SfPolicy {
    pub const ALL: [SfPolicy; 4] = [SfPolicy::Unfair, SfPolicy::Fair, SfPolicy::Distance, SfPolicy::Pathloss];

    pub fn label(self) -> &'static str {
        match self {
            SfPolicy::Unfair => "unfair",
            SfPolicy::Fair => "fair",
            SfPolicy::Distance => "distance",
            SfPolicy::Pathloss => "pathloss",
        }
    }
}

/// A user's link budget at full transmit budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub id: usize,
    pub rssi_w: f64,
    pub distance_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SfAssignment {
    pub policy: SfPolicy,
    /// Active users, ascending id.
    pub active_ids: Vec<usize>,
    pub sf_of: BTreeMap<usize, SpreadingFactor>,
    /// Users per SF, SF7 first.
    pub group_sizes: [usize; 6],
}

impl SfAssignment {
    fn from_pairs(policy: SfPolicy, pairs: impl IntoIterator<Item = (usize, SpreadingFactor)>) -> Self {
        let sf_of: BTreeMap<usize, SpreadingFactor> = pairs.into_iter().collect();
        let mut group_sizes = [0; 6];
        for sf in sf_of.values() {
            group_sizes[sf.index()] += 1;
        }
        SfAssignment {
            policy,
            active_ids: sf_of.keys().copied().collect(),
            sf_of,
            group_sizes,
        }
    }

    pub fn sf(&self, id: usize) -> Option<SpreadingFactor> {
        self.sf_of.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.active_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active_ids.is_empty()
    }
}

/// Full-budget RSSI for every user of the topology.
pub fn link_budgets(topology: &Topology, harvest_rates: &[f64], phy: &PhyParams, p_t_w: f64) -> Vec<Candidate> {
    topology
        .users
        .iter()
        .map(|u| Candidate {
            id: u.id,
            rssi_w: rssi(max_power(p_t_w, harvest_rates[u.id], phy), u.gain),
            distance_m: u.distance_m,
        })
        .collect()
}

/// Users whose RSSI reaches the SF12 sensitivity (inclusive).
pub fn activate(candidates: &[Candidate], phy: &PhyParams) -> Result<Vec<Candidate>> {
    let threshold = phy.sensitivity_min_w()?;
    Ok(candidates.iter().filter(|c| c.rssi_w >= threshold).copied().collect())
}

/// Sorts by RSSI descending, ties by ascending id.
pub fn rank_by_rssi(active: &[Candidate]) -> Vec<Candidate> {
    let mut ranked = active.to_vec();
    ranked.sort_by(|a, b| b.rssi_w.total_cmp(&a.rssi_w).then(a.id.cmp(&b.id)));
    ranked
}

/// Shares of the fair policy, proportional to `f / 2^f` for SF7..SF12.
pub fn fair_fractions() -> [f64; 6] {
    let w: Vec<f64> = SpreadingFactor::ALL
        .iter()
        .map(|sf| f64::from(sf.value()) / f64::from(1u32 << sf.value()))
        .collect();
    let total: f64 = w.iter().sum();
    std::array::from_fn(|i| w[i] / total)
}

/// Integer group sizes summing to `total`, by the largest-remainder rule.
/// Equal remainders go to the lower SF first.
pub fn largest_remainder(shares: &[f64; 6], total: usize) -> [usize; 6] {
    let quotas: Vec<f64> = shares.iter().map(|s| s * total as f64).collect();
    let mut sizes: [usize; 6] = std::array::from_fn(|i| quotas[i].floor() as usize);
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..6).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    sizes
}

fn allocate_ranked(policy: SfPolicy, ranked: &[Candidate], sizes: [usize; 6]) -> SfAssignment {
    let sf_iter = sizes
        .iter()
        .enumerate()
        .flat_map(|(i, &k)| std::iter::repeat_n(SpreadingFactor::from_index(i), k));
    SfAssignment::from_pairs(policy, ranked.iter().map(|c| c.id).zip(sf_iter))
}

/// Six near-equal RSSI-ranked groups.
pub fn allocate_unfair(ranked: &[Candidate]) -> Result<SfAssignment> {
    if ranked.is_empty() {
        return Err(Error::EmptyActiveSet);
    }
    let sizes = largest_remainder(&[1.0 / 6.0; 6], ranked.len());
    Ok(allocate_ranked(SfPolicy::Unfair, ranked, sizes))
}

/// RSSI-ranked groups with shares `f / 2^f`.
pub fn allocate_fair(ranked: &[Candidate]) -> Result<SfAssignment> {
    if ranked.is_empty() {
        return Err(Error::EmptyActiveSet);
    }
    let sizes = largest_remainder(&fair_fractions(), ranked.len());
    Ok(allocate_ranked(SfPolicy::Fair, ranked, sizes))
}

/// Ring index for a distance: `[iR/6, (i+1)R/6)`, outermost ring closed.
pub fn ring_sf(distance_m: f64, cell_radius_m: f64) -> SpreadingFactor {
    let width = cell_radius_m / 6.0;
    let ring = (distance_m / width).floor();
    SpreadingFactor::from_index((ring.max(0.0) as usize).min(5))
}

pub fn allocate_distance(active: &[Candidate], cell_radius_m: f64) -> SfAssignment {
    SfAssignment::from_pairs(
        SfPolicy::Distance,
        active.iter().map(|c| (c.id, ring_sf(c.distance_m, cell_radius_m))),
    )
}

/// Lowest SF whose sensitivity `rssi_w` meets, if any.
pub fn pathloss_sf(rssi_w: f64, phy: &PhyParams) -> Result<Option<SpreadingFactor>> {
    for sf in SpreadingFactor::ALL {
        if rssi_w >= dbm_to_watts(phy.sensitivity(sf)?) {
            return Ok(Some(sf));
        }
    }
    Ok(None)
}

pub fn allocate_pathloss(active: &[Candidate], phy: &PhyParams) -> Result<SfAssignment> {
    let mut pairs = Vec::with_capacity(active.len());
    for c in active {
        if let Some(sf) = pathloss_sf(c.rssi_w, phy)? {
            pairs.push((c.id, sf));
        }
    }
    Ok(SfAssignment::from_pairs(SfPolicy::Pathloss, pairs))
}

/// Runs `policy` on an already activated user set.
pub fn allocate(policy: SfPolicy, active: &[Candidate], phy: &PhyParams, cell_radius_m: f64) -> Result<SfAssignment> {
    match policy {
        SfPolicy::Unfair => allocate_unfair(&rank_by_rssi(active)),
        SfPolicy::Fair => allocate_fair(&rank_by_rssi(active)),
        SfPolicy::Distance => Ok(allocate_distance(active, cell_radius_m)),
        SfPolicy::Pathloss => allocate_pathloss(active, phy),
    }
}

#[derive(Debug, Serialize)]
struct AssignmentRow<'a> {
    user_id: usize,
    sf: u8,
    rssi_dbm: f64,
    policy: &'a str,
}

/// Writes `user_id,sf,rssi_dbm,policy` rows.
pub fn write_assignment_csv(path: &Path, assignment: &SfAssignment, candidates: &[Candidate]) -> Result<()> {
    let rssi_of: BTreeMap<usize, f64> = candidates.iter().map(|c| (c.id, c.rssi_w)).collect();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    for (&id, sf) in &assignment.sf_of {
        w.serialize(AssignmentRow {
            user_id: id,
            sf: sf.value(),
            rssi_dbm: rssi_of.get(&id).map_or(f64::NAN, |&r| watts_to_dbm(r)),
            policy: assignment.policy.label(),
        })
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cands(rssi: &[f64]) -> Vec<Candidate> {
        rssi.iter()
            .enumerate()
            .map(|(id, &r)| Candidate { id, rssi_w: r, distance_m: 10.0 })
            .collect()
    }

    #[test]
    fn activation_threshold_inclusive() {
        let phy = PhyParams::default();
        let thr = phy.sensitivity_min_w().unwrap();
        let c = cands(&[thr, thr * 0.999, 1e-9, 0.0]);
        let ids: Vec<usize> = activate(&c, &phy).unwrap().iter().map(|c| c.id).collect();
        assert_eq!(ids, vec![0, 2]);
        let near = cands(&[1e-9; 5]);
        assert_eq!(activate(&near, &phy).unwrap().len(), 5);
    }

    #[test]
    fn unfair_sizes() {
        assert_eq!(largest_remainder(&[1.0 / 6.0; 6], 600), [100; 6]);
        assert_eq!(largest_remainder(&[1.0 / 6.0; 6], 601), [101, 100, 100, 100, 100, 100]);
        assert_eq!(largest_remainder(&[1.0 / 6.0; 6], 5), [1, 1, 1, 1, 1, 0]);
    }

    #[test]
    fn fair_shares_and_sizes() {
        let f = fair_fractions();
        let expect = [0.4498, 0.2570, 0.1446, 0.0803, 0.0442, 0.0241];
        for i in 0..6 {
            assert!((f[i] - expect[i]).abs() < 5e-5, "{i}: {}", f[i]);
        }
        assert_eq!(largest_remainder(&f, 600), [270, 154, 87, 48, 27, 14]);
        assert_eq!(largest_remainder(&f, 314), [141, 81, 45, 25, 14, 8]);
        assert_eq!(largest_remainder(&f, 1), [1, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn single_user_fair_gets_sf7() {
        let a = allocate_fair(&cands(&[1e-9])).unwrap();
        assert_eq!(a.sf(0), Some(SpreadingFactor::MIN));
    }

    #[test]
    fn ranked_groups_follow_rssi() {
        let c = cands(&[1e-9, 5e-9, 3e-9, 4e-9, 2e-9, 6e-9]);
        let a = allocate_unfair(&rank_by_rssi(&c)).unwrap();
        assert_eq!(a.sf(5).unwrap().value(), 7);
        assert_eq!(a.sf(1).unwrap().value(), 8);
        assert_eq!(a.sf(0).unwrap().value(), 12);
        assert_eq!(a.group_sizes, [1; 6]);
    }

    #[test]
    fn rssi_ties_broken_by_id() {
        let c = cands(&[1e-9, 1e-9, 1e-9]);
        let ranked = rank_by_rssi(&c);
        assert_eq!(ranked.iter().map(|c| c.id).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn empty_ranked_set_is_an_error() {
        assert!(allocate_unfair(&[]).is_err());
        assert!(allocate_fair(&[]).is_err());
    }

    #[test]
    fn distance_rings() {
        let r = 100.0;
        assert_eq!(ring_sf(0.01 * r, r).value(), 7);
        assert_eq!(ring_sf(r, r).value(), 12);
        assert_eq!(ring_sf(r / 6.0, r).value(), 8);
        assert_eq!(ring_sf(r / 6.0 - 1e-9, r).value(), 7);
    }

    #[test]
    fn pathloss_brackets() {
        let phy = PhyParams::default();
        let w = |dbm: f64| dbm_to_watts(dbm);
        assert_eq!(pathloss_sf(w(-100.0), &phy).unwrap().unwrap().value(), 7);
        assert_eq!(pathloss_sf(w(-123.0), &phy).unwrap().unwrap().value(), 7);
        assert_eq!(pathloss_sf(w(-127.0), &phy).unwrap().unwrap().value(), 9);
        assert_eq!(pathloss_sf(w(-138.0), &phy).unwrap(), None);
        let c = cands(&[w(-127.0), w(-140.0)]);
        let active = activate(&c, &phy).unwrap();
        let a = allocate_pathloss(&active, &phy).unwrap();
        assert_eq!(a.active_ids, vec![0]);
    }

    #[test]
    fn assignment_csv() {
        let c = cands(&[1e-9, 2e-9]);
        let a = allocate_unfair(&rank_by_rssi(&c)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sf.csv");
        write_assignment_csv(&p, &a, &c).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("user_id,sf,rssi_dbm,policy\n0,8,"));
    }

    proptest! {
        #[test]
        fn policies_partition_active_users(
            rssi in proptest::collection::vec(-130.0f64..-40.0, 1..200),
            dist in proptest::collection::vec(1.0f64..100.0, 200),
        ) {
            let phy = PhyParams::default();
            let c: Vec<Candidate> = rssi.iter().enumerate()
                .map(|(id, &r)| Candidate { id, rssi_w: dbm_to_watts(r), distance_m: dist[id] })
                .collect();
            let active = activate(&c, &phy).unwrap();
            for policy in SfPolicy::ALL {
                let a = allocate(policy, &active, &phy, 100.0).unwrap();
                prop_assert_eq!(a.active_ids.len(), active.len());
                prop_assert_eq!(a.group_sizes.iter().sum::<usize>(), active.len());
            }
            let unfair = allocate(SfPolicy::Unfair, &active, &phy, 100.0).unwrap();
            let sizes = unfair.group_sizes;
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            let fair = allocate(SfPolicy::Fair, &active, &phy, 100.0).unwrap();
            prop_assert!(fair.group_sizes.windows(2).all(|w| w[0] >= w[1]));
            // ranked policies put every SF7 user above every SF12 user
            for a in [&unfair, &fair] {
                let r = |id: usize| c[id].rssi_w;
                let lo7 = a.sf_of.iter().filter(|(_, s)| s.value() == 7).map(|(id, _)| r(*id)).fold(f64::INFINITY, f64::min);
                let hi12 = a.sf_of.iter().filter(|(_, s)| s.value() == 12).map(|(id, _)| r(*id)).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(lo7 >= hi12);
            }
        }
    }
}
