//! Energy harvesting: received beacon power, rectifier models and the
//! harvest-then-transmit power budget.
//!
//! A user harvests for `tau` seconds at a constant rate `E` (watts), then
//! spends the whole harvest on a single packet of duration `T_a`. Leftover
//! energy is discarded; nothing carries over between packets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phy::PhyParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EhModelKind {
    Linear,
    #[default]
    Sigmoidal,
}

/// Rectifier model mapping received RF power to harvested power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EhModel {
    pub kind: EhModelKind,
    pub linear_efficiency: f64,
    /// Sigmoid steepness, 1/W.
    pub sigmoid_a: f64,
    /// Sigmoid turn-on point, W.
    pub sigmoid_b: f64,
    /// Saturation power, W. Also caps the linear model.
    pub sigmoid_m: f64,
}

impl Default for EhModel {
    fn default() -> Self {
        EhModel {
            kind: EhModelKind::Sigmoidal,
            linear_efficiency: 0.5,
            sigmoid_a: 1500.0,
            sigmoid_b: 0.0022,
            sigmoid_m: 0.024,
        }
    }
}

impl EhModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.linear_efficiency > 0.0 && self.linear_efficiency <= 1.0) {
            return Err(Error::config("eh.linear_efficiency must lie in (0, 1]"));
        }
        if !(self.sigmoid_a > 0.0 && self.sigmoid_b > 0.0 && self.sigmoid_m > 0.0) {
            return Err(Error::config("eh sigmoid parameters a, b, M must be positive"));
        }
        Ok(())
    }
}

/// `1 / (1 + e^-z)` without overflow for large `|z|`.
fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Received harvesting power from a set of beacon links `(distance, fading)`.
pub fn received_beacon_power<I>(beacon_tx_w: f64, alpha: f64, links: I) -> f64
where
    I: IntoIterator<Item = (f64, f64)>,
{
    links
        .into_iter()
        .map(|(d, h)| beacon_tx_w * crate::geometry::channel_gain(d, alpha, h))
        .sum()
}

/// Harvested power `E` for received RF power `p_rec`, clamped to `[0, M]`.
///
/// The sigmoidal model is shifted and rescaled so that zero input gives
/// exactly zero output.
pub fn harvest_rate(p_rec: f64, model: &EhModel) -> f64 {
    let m = model.sigmoid_m;
    let e = match model.kind {
        EhModelKind::Linear => model.linear_efficiency * p_rec,
        EhModelKind::Sigmoidal => {
            let omega = logistic(-model.sigmoid_a * model.sigmoid_b);
            let beta = m * logistic(model.sigmoid_a * (p_rec - model.sigmoid_b));
            (beta - m * omega) / (1.0 - omega)
        }
    };
    e.clamp(0.0, m)
}

/// Transmit power used for activation and SF assignment:
/// `min(P_t, ((1 - d) / d) E)`.
pub fn max_power(p_t_w: f64, harvest_rate_w: f64, phy: &PhyParams) -> f64 {
    p_t_w.min(phy.off_ratio() * harvest_rate_w)
}

/// Per-user harvesting state for one packet.
///
/// The harvest time is stored as a multiple of the time on air so that
/// the closed-form choices (multiples of `T_a`) stay exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyState {
    pub harvest_rate_w: f64,
    pub time_on_air_s: f64,
    /// `tau / T_a`.
    pub eh_ratio: f64,
}

impl EnergyState {
    pub fn new(harvest_rate_w: f64, time_on_air_s: f64, eh_ratio: f64) -> Self {
        EnergyState {
            harvest_rate_w,
            time_on_air_s,
            eh_ratio,
        }
    }

    pub fn from_eh_time(harvest_rate_w: f64, time_on_air_s: f64, eh_time_s: f64) -> Self {
        Self::new(harvest_rate_w, time_on_air_s, eh_time_s / time_on_air_s)
    }

    pub fn eh_time_s(&self) -> f64 {
        self.eh_ratio * self.time_on_air_s
    }

    /// Energy collected during the harvest window, joules.
    pub fn harvested_energy_j(&self) -> f64 {
        self.eh_time_s() * self.harvest_rate_w
    }

    /// Power available while transmitting: harvested energy spread over `T_a`.
    pub fn harvested_power_w(&self) -> f64 {
        self.eh_ratio * self.harvest_rate_w
    }

    /// Box constraint for the power optimiser: `min(P_t, tau E / T_a)`.
    pub fn power_cap(&self, p_t_w: f64) -> f64 {
        p_t_w.min(self.harvested_power_w())
    }

    /// Whether the harvest time respects the duty-cycle off time.
    pub fn within_off_time(&self, phy: &PhyParams) -> bool {
        self.eh_ratio >= 0.0 && self.eh_ratio <= phy.off_ratio()
    }
}
