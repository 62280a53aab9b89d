//! LoRa physical-layer arithmetic for the 125 kHz uplink channels.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::units::dbm_to_watts;

/// Thermal noise floor at 290 K, dBm/Hz.
pub const THERMAL_NOISE_DBM_HZ: f64 = -174.0;

/// A LoRa spreading factor, SF7 through SF12.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct SpreadingFactor(u8);

impl SpreadingFactor {
    pub const MIN: SpreadingFactor = SpreadingFactor(7);
    pub const MAX: SpreadingFactor = SpreadingFactor(12);

    /// All six spreading factors in ascending order.
    pub const ALL: [SpreadingFactor; 6] = [
        SpreadingFactor(7),
        SpreadingFactor(8),
        SpreadingFactor(9),
        SpreadingFactor(10),
        SpreadingFactor(11),
        SpreadingFactor(12),
    ];

    pub fn new(value: u8) -> Result<Self> {
        if (7..=12).contains(&value) {
            Ok(SpreadingFactor(value))
        } else {
            Err(Error::config(format!("spreading factor {value} outside 7..=12")))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// Position in [`SpreadingFactor::ALL`] (SF7 is 0).
    pub fn index(self) -> usize {
        (self.0 - 7) as usize
    }

    pub fn from_index(index: usize) -> Self {
        Self::ALL[index]
    }

    /// Low data rate optimisation flag, set for SF11 and SF12.
    pub fn low_data_rate(self) -> bool {
        self.0 >= 11
    }
}

impl TryFrom<u8> for SpreadingFactor {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        SpreadingFactor::new(value)
    }
}

impl From<SpreadingFactor> for u8 {
    fn from(sf: SpreadingFactor) -> u8 {
        sf.0
    }
}

impl fmt::Display for SpreadingFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SF{}", self.0)
    }
}

/// Gateway sensitivity for SF7..SF12 at 125 kHz, dBm.
pub const DEFAULT_SENSITIVITY_DBM: [f64; 6] = [-123.0, -126.0, -129.0, -132.0, -134.5, -137.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhyParams {
    pub bandwidth_hz: f64,
    pub payload_bytes: u32,
    /// Coding rate index CR, i.e. 4/(4+CR).
    pub coding_rate: u32,
    pub preamble_symbols: f64,
    pub duty_cycle: f64,
    pub noise_figure_db: f64,
    /// Sensitivity thresholds indexed SF7 first.
    pub sensitivity_dbm: Vec<f64>,
}

impl Default for PhyParams {
    fn default() -> Self {
        PhyParams {
            bandwidth_hz: 125_000.0,
            payload_bytes: 10,
            coding_rate: 1,
            preamble_symbols: 12.25,
            duty_cycle: 0.01,
            noise_figure_db: 6.0,
            sensitivity_dbm: DEFAULT_SENSITIVITY_DBM.to_vec(),
        }
    }
}

impl PhyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(Error::config("phy.bandwidth_hz must be positive"));
        }
        if self.payload_bytes == 0 {
            return Err(Error::config("phy.payload_bytes must be at least 1"));
        }
        if !(self.duty_cycle > 0.0 && self.duty_cycle < 1.0) {
            return Err(Error::config("phy.duty_cycle must lie in (0, 1)"));
        }
        if !(self.preamble_symbols >= 0.0) {
            return Err(Error::config("phy.preamble_symbols must be non-negative"));
        }
        if self.sensitivity_dbm.len() != SpreadingFactor::ALL.len() {
            return Err(Error::config(format!(
                "phy.sensitivity_dbm needs one entry per SF7..SF12, got {}",
                self.sensitivity_dbm.len()
            )));
        }
        if self.sensitivity_dbm.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::config(
                "phy.sensitivity_dbm must be strictly decreasing in SF",
            ));
        }
        Ok(())
    }

    /// `(1 - d) / d`: the off-time multiple of the time on air.
    pub fn off_ratio(&self) -> f64 {
        (1.0 - self.duty_cycle) / self.duty_cycle
    }

    /// Gateway sensitivity at `sf`, dBm.
    pub fn sensitivity(&self, sf: SpreadingFactor) -> Result<f64> {
        self.sensitivity_dbm
            .get(sf.index())
            .copied()
            .ok_or_else(|| Error::config(format!("no sensitivity configured for {sf}")))
    }

    /// SF12 sensitivity, the activation threshold, in watts.
    pub fn sensitivity_min_w(&self) -> Result<f64> {
        self.sensitivity(SpreadingFactor::MAX).map(dbm_to_watts)
    }
}

/// Number of payload symbols.
///
/// `8 + max(ceil((8 PL - 4 SF + 28 + 16) / (4 (SF - 2 DE))) (CR + 4), 0)`
pub fn payload_symbols(sf: SpreadingFactor, phy: &PhyParams) -> f64 {
    let sf_v = i64::from(sf.value());
    let de = i64::from(sf.low_data_rate());
    let num = 8 * i64::from(phy.payload_bytes) - 4 * sf_v + 28 + 16;
    let den = 4 * (sf_v - 2 * de);
    // ceil division for a positive denominator
    let blocks = num.div_euclid(den) + i64::from(num.rem_euclid(den) != 0);
    let extra = (blocks * (i64::from(phy.coding_rate) + 4)).max(0);
    (8 + extra) as f64
}

/// Total symbols per packet: preamble, payload and the 4.25-symbol sync.
pub fn packet_symbols(sf: SpreadingFactor, phy: &PhyParams) -> f64 {
    phy.preamble_symbols + payload_symbols(sf, phy) + 4.25
}

/// Packet time on air in seconds.
pub fn time_on_air(sf: SpreadingFactor, phy: &PhyParams) -> f64 {
    packet_symbols(sf, phy) * f64::from(1u32 << sf.value()) / phy.bandwidth_hz
}

/// Mandatory silence after a packet of duration `t_a` under the duty cycle.
pub fn time_off(t_a: f64, phy: &PhyParams) -> f64 {
    phy.off_ratio() * t_a
}

/// Receiver noise power in dBm.
pub fn noise_power_dbm(phy: &PhyParams) -> f64 {
    THERMAL_NOISE_DBM_HZ + phy.noise_figure_db + 10.0 * phy.bandwidth_hz.log10()
}

/// Receiver noise power in watts.
pub fn noise_power(phy: &PhyParams) -> f64 {
    dbm_to_watts(noise_power_dbm(phy))
}
