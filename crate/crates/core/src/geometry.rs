//! Random cell topologies: users and power beacons placed uniformly in a
//! disk around the gateway, with Rayleigh block fading on every link.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How many nodes a trial places for a given density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CountMode {
    /// `round(density * area)` every trial.
    #[default]
    Mean,
    /// Poisson-distributed with that mean.
    Poisson,
}

/// Fading on the beacon-to-user harvesting links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BeaconFading {
    /// Unit-mean exponential draw per link, fixed for the trial.
    #[default]
    PerTrial,
    /// Deterministic unit gain (fading averaged out).
    MeanField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub cell_radius_m: f64,
    pub user_density_per_km2: f64,
    pub beacon_density_per_km2: f64,
    pub pathloss_exponent: f64,
    /// Guard radius around the gateway and around each beacon.
    pub min_distance_m: f64,
    pub count_mode: CountMode,
    pub beacon_fading: BeaconFading,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            cell_radius_m: 100.0,
            user_density_per_km2: 1e4,
            beacon_density_per_km2: 1e3,
            pathloss_exponent: 3.5,
            min_distance_m: 1.0,
            count_mode: CountMode::Mean,
            beacon_fading: BeaconFading::PerTrial,
        }
    }
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cell_radius_m > 0.0 && self.cell_radius_m.is_finite()) {
            return Err(Error::config("geometry.cell_radius_m must be positive"));
        }
        if !(self.user_density_per_km2 >= 0.0 && self.beacon_density_per_km2 >= 0.0) {
            return Err(Error::config("geometry densities must be non-negative"));
        }
        if !(self.pathloss_exponent > 2.0) {
            return Err(Error::config("geometry.pathloss_exponent must exceed 2"));
        }
        if !(self.min_distance_m > 0.0 && self.min_distance_m < self.cell_radius_m) {
            return Err(Error::config(
                "geometry.min_distance_m must lie in (0, cell_radius_m)",
            ));
        }
        Ok(())
    }

    /// Cell area in km².
    pub fn area_km2(&self) -> f64 {
        PI * (self.cell_radius_m / 1000.0).powi(2)
    }

    pub fn expected_users(&self) -> f64 {
        self.user_density_per_km2 * self.area_km2()
    }

    pub fn expected_beacons(&self) -> f64 {
        self.beacon_density_per_km2 * self.area_km2()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// One LoRa end device and its uplink channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserNode {
    pub id: usize,
    pub position: Point,
    pub distance_m: f64,
    pub fading: f64,
    /// Uplink gain `h d^-alpha`.
    pub gain: f64,
    /// `sum_b h_bn d_bn^-alpha` over all beacons; multiply by the beacon
    /// transmit power to get the received harvesting power.
    pub beacon_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beacon {
    pub id: usize,
    pub position: Point,
    pub distance_m: f64,
}

/// A sampled cell. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub cell_radius_m: f64,
    pub pathloss_exponent: f64,
    pub users: Vec<UserNode>,
    pub beacons: Vec<Beacon>,
    pub seed: Option<u64>,
}

/// Linear channel gain `fading * distance^-alpha`.
pub fn channel_gain(distance_m: f64, alpha: f64, fading: f64) -> f64 {
    fading * distance_m.powf(-alpha)
}

/// Received signal strength at the gateway, watts.
pub fn rssi(p_max_w: f64, gain: f64) -> f64 {
    p_max_w * gain
}

fn node_count(mean: f64, mode: CountMode, rng: &mut ChaCha8Rng) -> usize {
    match mode {
        CountMode::Mean => mean.round() as usize,
        CountMode::Poisson if mean > 0.0 => {
            let draw: f64 = Poisson::new(mean).expect("positive mean").sample(rng);
            draw as usize
        }
        CountMode::Poisson => 0,
    }
}

/// Uniform point in the annulus `r_min <= r <= r_max`.
fn uniform_in_annulus(r_min: f64, r_max: f64, rng: &mut ChaCha8Rng) -> Point {
    let u: f64 = rng.random();
    let r = (r_min * r_min + u * (r_max * r_max - r_min * r_min)).sqrt();
    let theta = 2.0 * PI * rng.random::<f64>();
    Point {
        x: r * theta.cos(),
        y: r * theta.sin(),
    }
}

fn unit_exponential(rng: &mut ChaCha8Rng) -> f64 {
    // Exp1 can return exactly zero with negligible probability; keep gains positive.
    let h: f64 = Exp1.sample(rng);
    h.max(f64::MIN_POSITIVE)
}

/// Samples a topology. Deterministic in `(cfg, seed)`.
pub fn sample_topology(cfg: &GeometryConfig, seed: u64) -> Result<Topology> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = cfg.cell_radius_m;
    let alpha = cfg.pathloss_exponent;

    let n_users = node_count(cfg.expected_users(), cfg.count_mode, &mut rng);
    if n_users == 0 {
        return Err(Error::EmptyTopology);
    }
    let n_beacons = node_count(cfg.expected_beacons(), cfg.count_mode, &mut rng);

    let user_pos: Vec<Point> = (0..n_users)
        .map(|_| uniform_in_annulus(cfg.min_distance_m, r, &mut rng))
        .collect();
    let user_fading: Vec<f64> = (0..n_users).map(|_| unit_exponential(&mut rng)).collect();
    let beacons: Vec<Beacon> = (0..n_beacons)
        .map(|id| {
            let position = uniform_in_annulus(0.0, r, &mut rng);
            Beacon {
                id,
                position,
                distance_m: position.norm(),
            }
        })
        .collect();

    let users = user_pos
        .into_iter()
        .zip(user_fading)
        .enumerate()
        .map(|(id, (position, fading))| {
            let distance_m = position.norm().max(cfg.min_distance_m);
            let beacon_gain = beacons
                .iter()
                .map(|b| {
                    let h = match cfg.beacon_fading {
                        BeaconFading::PerTrial => unit_exponential(&mut rng),
                        BeaconFading::MeanField => 1.0,
                    };
                    let d = position.distance(b.position).max(cfg.min_distance_m);
                    channel_gain(d, alpha, h)
                })
                .sum();
            UserNode {
                id,
                position,
                distance_m,
                fading,
                gain: channel_gain(distance_m, alpha, fading),
                beacon_gain,
            }
        })
        .collect();

    Ok(Topology {
        cell_radius_m: r,
        pathloss_exponent: alpha,
        users,
        beacons,
        seed: Some(seed),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    User,
    Beacon,
}

/// One CSV row of a topology dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRow {
    pub id: usize,
    pub kind: NodeKind,
    pub x: f64,
    pub y: f64,
    pub distance: f64,
    pub fading: Option<f64>,
    pub gain: Option<f64>,
    pub beacon_gain: Option<f64>,
    pub harvest_rate_w: Option<f64>,
}

impl Topology {
    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    /// Rows for the CSV dump. `harvest_rates` (per user, watts) is optional.
    pub fn rows(&self, harvest_rates: Option<&[f64]>) -> Vec<NodeRow> {
        let users = self.users.iter().map(|u| NodeRow {
            id: u.id,
            kind: NodeKind::User,
            x: u.position.x,
            y: u.position.y,
            distance: u.distance_m,
            fading: Some(u.fading),
            gain: Some(u.gain),
            beacon_gain: Some(u.beacon_gain),
            harvest_rate_w: harvest_rates.map(|e| e[u.id]),
        });
        let beacons = self.beacons.iter().map(|b| NodeRow {
            id: b.id,
            kind: NodeKind::Beacon,
            x: b.position.x,
            y: b.position.y,
            distance: b.distance_m,
            fading: None,
            gain: None,
            beacon_gain: None,
            harvest_rate_w: None,
        });
        users.chain(beacons).collect()
    }

    pub fn write_csv(&self, path: &Path, harvest_rates: Option<&[f64]>) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        for row in self.rows(harvest_rates) {
            w.serialize(row).map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Loads a dump written by [`Topology::write_csv`]. Cell radius and
    /// path-loss exponent are not part of the file and come from `cfg`.
    pub fn read_csv(path: &Path, cfg: &GeometryConfig) -> Result<Topology> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut users = Vec::new();
        let mut beacons = Vec::new();
        for row in r.deserialize::<NodeRow>() {
            let row = row.map_err(|e| Error::csv(path, e))?;
            let position = Point { x: row.x, y: row.y };
            match row.kind {
                NodeKind::User => {
                    let missing = || Error::config(format!("user {} lacks channel columns", row.id));
                    users.push(UserNode {
                        id: row.id,
                        position,
                        distance_m: row.distance,
                        fading: row.fading.ok_or_else(missing)?,
                        gain: row.gain.ok_or_else(missing)?,
                        beacon_gain: row.beacon_gain.ok_or_else(missing)?,
                    })
                }
                NodeKind::Beacon => beacons.push(Beacon {
                    id: row.id,
                    position,
                    distance_m: row.distance,
                }),
            }
        }
        if users.iter().enumerate().any(|(i, u)| u.id != i) {
            return Err(Error::config("user ids must be 0..n in order"));
        }
        if users.is_empty() {
            return Err(Error::EmptyTopology);
        }
        Ok(Topology {
            cell_radius_m: cfg.cell_radius_m,
            pathloss_exponent: cfg.pathloss_exponent,
            users,
            beacons,
            seed: None,
        })
    }
}
