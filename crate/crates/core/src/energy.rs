//! Per-request node energy and lifetime (retries) model.
//!
//! Every node in the authentication chain spends energy on four things:
//! image capture, template extraction, radio/body-channel traffic and payload
//! encryption. The model is linear in each of those counts, so a node's cost
//! for one request is a plain sum of count × unit-cost terms, and the number of
//! requests a budget supports is the ratio of budget to that sum.
//!
//! All quantities are SI: joules, meters and bits. Budgets quoted in W·hr are
//! converted with [`watt_hours`].

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Converts a W·hr figure into joules.
pub fn watt_hours<T: Scalar>(wh: T) -> T {
    wh * T::lit(3600.0)
}

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot read parameter file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed parameter file: {0}")]
    Parse(String),
}

/// Unit costs and budgets of the wearable authentication chain.
///
/// Defaults reproduce the reference parameter table: WBAN 10 nJ/bit, HBC
/// 79 pJ/bit, LoRa 68 µJ/bit at 500 m, encryption 100 pJ/bit, capacitive and
/// optical captures at 22.3 nJ and 66 mJ, 2.94 J per high-accuracy
/// extraction, a 40032-byte image and a 176-byte template.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyParams<T> {
    pub e_bit_wban: T,
    pub e_bit_hbc: T,
    /// LoRa cost per bit at `d_ref`.
    pub e_bit_lora_ref: T,
    pub d_ref: T,
    pub e_bit_encrypt: T,
    pub e_capture_capacitive: T,
    pub e_capture_optical: T,
    pub e_te_high: T,
    /// No reference value exists for the lightweight extractor; it must be
    /// configured before any lightweight extraction is charged.
    pub e_te_light: Option<T>,
    pub image_bits: u64,
    pub template_bits: u64,
    /// Joules harvested per hour.
    pub budget_rf_harvest: T,
    /// Joules per coin-cell charge.
    pub budget_coin_cell: T,
    /// Joules per hub battery charge, before `hub_share` is applied.
    pub budget_hub_total: T,
    pub hub_share: T,
}

impl<T: Scalar> Default for EnergyParams<T> {
    fn default() -> Self {
        Self {
            e_bit_wban: T::lit(10e-9),
            e_bit_hbc: T::lit(79e-12),
            e_bit_lora_ref: T::lit(68e-6),
            d_ref: T::lit(500.0),
            e_bit_encrypt: T::lit(100e-12),
            e_capture_capacitive: T::lit(22.3e-9),
            e_capture_optical: T::lit(66e-3),
            e_te_high: T::lit(2.94),
            e_te_light: None,
            image_bits: 40032 * 8,
            template_bits: 176 * 8,
            budget_rf_harvest: watt_hours(T::lit(1e-6)),
            budget_coin_cell: watt_hours(T::lit(100e-3)),
            budget_hub_total: watt_hours(T::lit(4.5)),
            hub_share: T::lit(0.10),
        }
    }
}

impl<T: Scalar> EnergyParams<T> {
    pub fn validate(&self) -> Result<(), EnergyError> {
        let positive = [
            ("e_bit_wban", self.e_bit_wban),
            ("e_bit_hbc", self.e_bit_hbc),
            ("e_bit_lora_ref", self.e_bit_lora_ref),
            ("d_ref", self.d_ref),
            ("e_bit_encrypt", self.e_bit_encrypt),
            ("e_capture_capacitive", self.e_capture_capacitive),
            ("e_capture_optical", self.e_capture_optical),
            ("e_te_high", self.e_te_high),
        ];
        for (name, v) in positive {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(EnergyError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(light) = self.e_te_light {
            if !(light > T::zero()) || !light.is_finite() {
                return Err(EnergyError::Config(format!("e_te_light must be positive, got {light}")));
            }
        }
        let budgets = [
            ("budget_rf_harvest", self.budget_rf_harvest),
            ("budget_coin_cell", self.budget_coin_cell),
            ("budget_hub_total", self.budget_hub_total),
        ];
        for (name, v) in budgets {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(EnergyError::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(self.hub_share > T::zero() && self.hub_share <= T::one()) {
            return Err(EnergyError::Config(format!("hub_share must lie in (0, 1], got {}", self.hub_share)));
        }
        if self.image_bits <= self.template_bits {
            return Err(EnergyError::Config(format!(
                "image_bits ({}) must exceed template_bits ({})",
                self.image_bits, self.template_bits
            )));
        }
        Ok(())
    }

    /// Share of the hub battery available to authentication.
    pub fn hub_budget(&self) -> T {
        self.budget_hub_total * self.hub_share
    }

    pub fn capture_energy(&self, sensor: SensorKind) -> T {
        match sensor {
            SensorKind::Capacitive => self.e_capture_capacitive,
            SensorKind::Optical => self.e_capture_optical,
            SensorKind::None => T::zero(),
        }
    }

    pub fn te_energy(&self, variant: TeVariant) -> Result<T, EnergyError> {
        match variant {
            TeVariant::HighAccuracy => Ok(self.e_te_high),
            TeVariant::Lightweight => self
                .e_te_light
                .ok_or_else(|| EnergyError::Config("lightweight extraction energy (e_te_light) is not set".into())),
        }
    }
}

impl<T> EnergyParams<T>
where
    T: Scalar + serde::de::DeserializeOwned,
{
    /// Parses a flat `key = value` file. Keys are the field names; absent keys
    /// keep their defaults.
    pub fn from_toml_str(text: &str) -> Result<Self, EnergyError> {
        let params: Self = toml::from_str(text).map_err(|e| EnergyError::Parse(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EnergyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| EnergyError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    Capacitive,
    Optical,
    /// Hub and cloud roles capture nothing.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeVariant {
    HighAccuracy,
    Lightweight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Wban,
    Hbc,
    Lora,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Wban, Channel::Hbc, Channel::Lora];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Wban => "wban",
            Channel::Hbc => "hbc",
            Channel::Lora => "lora",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Bit counts per channel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelBits {
    pub wban: u64,
    pub hbc: u64,
    pub lora: u64,
}

impl ChannelBits {
    pub fn get(&self, ch: Channel) -> u64 {
        match ch {
            Channel::Wban => self.wban,
            Channel::Hbc => self.hbc,
            Channel::Lora => self.lora,
        }
    }

    pub fn add(&mut self, ch: Channel, bits: u64) {
        match ch {
            Channel::Wban => self.wban += bits,
            Channel::Hbc => self.hbc += bits,
            Channel::Lora => self.lora += bits,
        }
    }

    pub fn total(&self) -> u64 {
        self.wban + self.hbc + self.lora
    }
}

/// What a node did while serving one (or several) requests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeActivity<T> {
    pub captures: u64,
    pub te_high: u64,
    pub te_light: u64,
    pub bits_rx: ChannelBits,
    pub bits_tx: ChannelBits,
    pub bits_encrypted: u64,
    /// Link distance in meters; required once any bits touch LoRa.
    pub lora_distance: Option<T>,
}

impl<T: Scalar> NodeActivity<T> {
    pub fn add_te(&mut self, variant: TeVariant, runs: u64) {
        match variant {
            TeVariant::HighAccuracy => self.te_high += runs,
            TeVariant::Lightweight => self.te_light += runs,
        }
    }

    /// Combines two activity records. Both must agree on the LoRa distance
    /// when both specify one.
    pub fn merge(&self, other: &Self) -> Result<Self, EnergyError> {
        let lora_distance = match (self.lora_distance, other.lora_distance) {
            (Some(a), Some(b)) if a != b => {
                return Err(EnergyError::Domain(format!(
                    "cannot merge activities at different LoRa distances ({a} m vs {b} m)"
                )))
            }
            (a, b) => a.or(b),
        };
        let sum = |x: ChannelBits, y: ChannelBits| ChannelBits {
            wban: x.wban + y.wban,
            hbc: x.hbc + y.hbc,
            lora: x.lora + y.lora,
        };
        Ok(Self {
            captures: self.captures + other.captures,
            te_high: self.te_high + other.te_high,
            te_light: self.te_light + other.te_light,
            bits_rx: sum(self.bits_rx, other.bits_rx),
            bits_tx: sum(self.bits_tx, other.bits_tx),
            bits_encrypted: self.bits_encrypted + other.bits_encrypted,
            lora_distance,
        })
    }
}

/// Node energy split by cost term.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown<T> {
    pub capture: T,
    pub te: T,
    pub comm: T,
    pub encrypt: T,
}

impl<T: Scalar> EnergyBreakdown<T> {
    pub fn total(&self) -> T {
        self.capture + self.te + self.comm + self.encrypt
    }
}

/// LoRa cost per bit at `distance`, scaled quadratically from the reference
/// distance.
pub fn lora_energy_per_bit<T: Scalar>(distance: T, params: &EnergyParams<T>) -> Result<T, EnergyError> {
    if !(distance > T::zero()) || !distance.is_finite() {
        return Err(EnergyError::Domain(format!("LoRa distance must be positive, got {distance}")));
    }
    let ratio = distance / params.d_ref;
    Ok(params.e_bit_lora_ref * ratio * ratio)
}

/// Cost of transmitting `bits` over `ch`.
pub fn tx_energy<T: Scalar>(
    ch: Channel,
    bits: u64,
    lora_distance: Option<T>,
    params: &EnergyParams<T>,
) -> Result<T, EnergyError> {
    if bits == 0 {
        return Ok(T::zero());
    }
    let per_bit = match ch {
        Channel::Wban => params.e_bit_wban,
        Channel::Hbc => params.e_bit_hbc,
        Channel::Lora => {
            let d = lora_distance.ok_or_else(|| EnergyError::Domain("LoRa traffic requires a link distance".into()))?;
            lora_energy_per_bit(d, params)?
        }
    };
    Ok(T::count(bits) * per_bit)
}

/// Cost of receiving `bits` over `ch`. Body links charge the transmit rate;
/// LoRa reception happens at the unconstrained base station and is free.
pub fn rx_energy<T: Scalar>(ch: Channel, bits: u64, params: &EnergyParams<T>) -> T {
    match ch {
        Channel::Wban => T::count(bits) * params.e_bit_wban,
        Channel::Hbc => T::count(bits) * params.e_bit_hbc,
        Channel::Lora => T::zero(),
    }
}

pub fn energy_breakdown<T: Scalar>(
    activity: &NodeActivity<T>,
    sensor: SensorKind,
    params: &EnergyParams<T>,
) -> Result<EnergyBreakdown<T>, EnergyError> {
    let capture = T::count(activity.captures) * params.capture_energy(sensor);

    let mut te = T::count(activity.te_high) * params.e_te_high;
    if activity.te_light > 0 {
        te += T::count(activity.te_light) * params.te_energy(TeVariant::Lightweight)?;
    }

    let mut comm = T::zero();
    for ch in Channel::ALL {
        comm += tx_energy(ch, activity.bits_tx.get(ch), activity.lora_distance, params)?;
        comm += rx_energy(ch, activity.bits_rx.get(ch), params);
    }

    let encrypt = T::count(activity.bits_encrypted) * params.e_bit_encrypt;
    Ok(EnergyBreakdown { capture, te, comm, encrypt })
}

/// Energy a node spends on `activity`: capture + extraction + communication +
/// encryption.
pub fn node_energy<T: Scalar>(
    activity: &NodeActivity<T>,
    sensor: SensorKind,
    params: &EnergyParams<T>,
) -> Result<T, EnergyError> {
    energy_breakdown(activity, sensor, params).map(|b| b.total())
}

/// Number of requests `available` joules can pay for at `per_request` joules
/// each, as a real-valued rate.
pub fn retries<T: Scalar>(available: T, per_request: T) -> Result<T, EnergyError> {
    if !(per_request > T::zero()) {
        return Err(EnergyError::Domain(format!("per-request energy must be positive, got {per_request}")));
    }
    if !(available >= T::zero()) {
        return Err(EnergyError::Domain(format!("available energy must be non-negative, got {available}")));
    }
    Ok(available / per_request)
}

/// Whole requests per charge, as printed in lifetime plots.
pub fn display_count<T: Scalar>(rate: T) -> u64 {
    rate.floor().to_u64().unwrap_or(0)
}

/// Retries-per-hour display: three decimals below 0.01, two below 10, one
/// above.
pub fn display_rate<T: Scalar>(rate: T) -> String {
    let v = rate.as_f64();
    if v < 0.01 {
        format!("{v:.3}")
    } else if v < 10.0 {
        format!("{v:.2}")
    } else {
        format!("{v:.1}")
    }
}
