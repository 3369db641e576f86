//! Resource-allocation design space: where template extraction runs, which
//! on-body link carries the sensor data, and what that means for sensor and
//! hub lifetimes.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::energy::{
    display_count, display_rate, energy_breakdown, retries, Channel, EnergyBreakdown, EnergyError, EnergyParams,
    NodeActivity, SensorKind, TeVariant,
};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeLocation {
    Sensor,
    Hub,
    Cloud,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnBodyChannel {
    Wban,
    Hbc,
}

impl OnBodyChannel {
    pub fn channel(self) -> Channel {
        match self {
            OnBodyChannel::Wban => Channel::Wban,
            OnBodyChannel::Hbc => Channel::Hbc,
        }
    }

    /// Body-coupled links stay on the skin and carry plaintext.
    pub fn needs_encryption(self) -> bool {
        matches!(self, OnBodyChannel::Wban)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorType {
    Capacitive,
    Optical,
}

impl From<SensorType> for SensorKind {
    fn from(s: SensorType) -> Self {
        match s {
            SensorType::Capacitive => SensorKind::Capacitive,
            SensorType::Optical => SensorKind::Optical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerSource {
    RfHarvest,
    CoinCell,
}

impl PowerSource {
    /// Harvested budgets are per hour, battery budgets per charge.
    pub fn is_hourly(self) -> bool {
        matches!(self, PowerSource::RfHarvest)
    }

    pub fn budget<T: Scalar>(self, params: &EnergyParams<T>) -> T {
        match self {
            PowerSource::RfHarvest => params.budget_rf_harvest,
            PowerSource::CoinCell => params.budget_coin_cell,
        }
    }
}

macro_rules! snake_display {
    ($($ty:ty),*) => {$(
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let s = serde_json::to_value(self).map_err(|_| fmt::Error)?;
                f.write_str(s.as_str().ok_or(fmt::Error)?)
            }
        }
    )*};
}
snake_display!(TeLocation, OnBodyChannel, SensorType, PowerSource);

/// The six allocations of extraction site × on-body link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Allocation {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl Allocation {
    pub const ALL: [Allocation; 6] =
        [Allocation::A, Allocation::B, Allocation::C, Allocation::D, Allocation::E, Allocation::F];

    pub fn te_location(self) -> TeLocation {
        match self {
            Allocation::A | Allocation::B => TeLocation::Sensor,
            Allocation::C | Allocation::D => TeLocation::Hub,
            Allocation::E | Allocation::F => TeLocation::Cloud,
        }
    }

    pub fn channel(self) -> OnBodyChannel {
        match self {
            Allocation::A | Allocation::C | Allocation::E => OnBodyChannel::Wban,
            Allocation::B | Allocation::D | Allocation::F => OnBodyChannel::Hbc,
        }
    }

    pub fn from_parts(te: TeLocation, ch: OnBodyChannel) -> Self {
        match (te, ch) {
            (TeLocation::Sensor, OnBodyChannel::Wban) => Allocation::A,
            (TeLocation::Sensor, OnBodyChannel::Hbc) => Allocation::B,
            (TeLocation::Hub, OnBodyChannel::Wban) => Allocation::C,
            (TeLocation::Hub, OnBodyChannel::Hbc) => Allocation::D,
            (TeLocation::Cloud, OnBodyChannel::Wban) => Allocation::E,
            (TeLocation::Cloud, OnBodyChannel::Hbc) => Allocation::F,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct SystemConfig<T> {
    pub te_location: TeLocation,
    pub on_body_channel: OnBodyChannel,
    pub sensor_type: SensorType,
    pub sensor_power: PowerSource,
    /// Hub-to-base-station distance in meters.
    #[serde(default = "default_distance")]
    pub lora_distance: T,
    #[serde(default = "default_variant")]
    pub te_variant: TeVariant,
}

fn default_distance<T: Scalar>() -> T {
    T::lit(1000.0)
}

fn default_variant() -> TeVariant {
    TeVariant::HighAccuracy
}

impl<T: Scalar> SystemConfig<T> {
    pub fn new(allocation: Allocation, sensor_type: SensorType, sensor_power: PowerSource) -> Self {
        Self {
            te_location: allocation.te_location(),
            on_body_channel: allocation.channel(),
            sensor_type,
            sensor_power,
            lora_distance: default_distance(),
            te_variant: TeVariant::HighAccuracy,
        }
    }

    pub fn allocation(&self) -> Allocation {
        Allocation::from_parts(self.te_location, self.on_body_channel)
    }

    /// Every allocation × sensor × power source combination, in a fixed order.
    pub fn grid() -> Vec<Self> {
        let mut out = Vec::with_capacity(24);
        for alloc in Allocation::ALL {
            for sensor in [SensorType::Optical, SensorType::Capacitive] {
                for power in [PowerSource::RfHarvest, PowerSource::CoinCell] {
                    out.push(Self::new(alloc, sensor, power));
                }
            }
        }
        out
    }
}

/// Bits leaving the sensor over the on-body link.
pub fn on_body_bits<T: Scalar>(config: &SystemConfig<T>, params: &EnergyParams<T>) -> u64 {
    match config.te_location {
        TeLocation::Sensor => params.template_bits,
        TeLocation::Hub | TeLocation::Cloud => params.image_bits,
    }
}

/// Bits the hub uplinks over LoRa.
pub fn uplink_bits<T: Scalar>(config: &SystemConfig<T>, params: &EnergyParams<T>) -> u64 {
    match config.te_location {
        TeLocation::Sensor | TeLocation::Hub => params.template_bits,
        TeLocation::Cloud => params.image_bits,
    }
}

/// Per-request activity of the sensor and the hub under `config`.
pub fn derive_activities<T: Scalar>(
    config: &SystemConfig<T>,
    params: &EnergyParams<T>,
) -> (NodeActivity<T>, NodeActivity<T>) {
    let body = config.on_body_channel.channel();
    let body_bits = on_body_bits(config, params);
    let lora_bits = uplink_bits(config, params);

    let mut sensor = NodeActivity::<T> { captures: 1, ..Default::default() };
    if config.te_location == TeLocation::Sensor {
        sensor.add_te(config.te_variant, 1);
    }
    sensor.bits_tx.add(body, body_bits);
    if config.on_body_channel.needs_encryption() {
        sensor.bits_encrypted = body_bits;
    }

    let mut hub = NodeActivity::<T>::default();
    hub.bits_rx.add(body, body_bits);
    if config.te_location == TeLocation::Hub {
        hub.add_te(config.te_variant, 1);
    }
    hub.bits_encrypted = lora_bits;
    hub.bits_tx.lora = lora_bits;
    hub.lora_distance = Some(config.lora_distance);

    (sensor, hub)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct LifetimeReport<T> {
    pub config: SystemConfig<T>,
    pub sensor_energy_per_request: T,
    pub sensor_breakdown: EnergyBreakdown<T>,
    pub hub_energy_per_request: T,
    pub hub_breakdown: EnergyBreakdown<T>,
    pub sensor_budget: T,
    pub hub_budget: T,
    /// Per hour for harvested sensors, per charge for coin cells.
    pub sensor_retries: T,
    pub hub_retries: T,
    pub feasible: bool,
}

impl<T: Scalar> LifetimeReport<T> {
    /// Sensor lifetime formatted the way plots and tables print it.
    pub fn sensor_retries_display(&self) -> String {
        if self.config.sensor_power.is_hourly() {
            display_rate(self.sensor_retries)
        } else {
            display_count(self.sensor_retries).to_string()
        }
    }
}

pub fn evaluate<T: Scalar>(
    config: &SystemConfig<T>,
    params: &EnergyParams<T>,
) -> Result<LifetimeReport<T>, EnergyError> {
    let (sensor_act, hub_act) = derive_activities(config, params);
    let sensor_breakdown = energy_breakdown(&sensor_act, config.sensor_type.into(), params)?;
    let hub_breakdown = energy_breakdown(&hub_act, SensorKind::None, params)?;
    let sensor_energy = sensor_breakdown.total();
    let hub_energy = hub_breakdown.total();
    let sensor_budget = config.sensor_power.budget(params);
    let hub_budget = params.hub_budget();
    let sensor_retries = retries(sensor_budget, sensor_energy)?;
    let hub_retries = retries(hub_budget, hub_energy)?;
    Ok(LifetimeReport {
        config: *config,
        sensor_energy_per_request: sensor_energy,
        sensor_breakdown,
        hub_energy_per_request: hub_energy,
        hub_breakdown,
        sensor_budget,
        hub_budget,
        sensor_retries,
        hub_retries,
        feasible: sensor_retries >= T::one(),
    })
}

/// Column order of the harvested-sensor summary matrix.
pub const TABLE2_COLUMNS: [(TeLocation, OnBodyChannel); 4] = [
    (TeLocation::Sensor, OnBodyChannel::Wban),
    (TeLocation::Sensor, OnBodyChannel::Hbc),
    (TeLocation::Hub, OnBodyChannel::Wban),
    (TeLocation::Hub, OnBodyChannel::Hbc),
];

pub const TABLE2_HEADER: [&str; 5] = ["sensor", "te_sensor_wban", "te_sensor_hbc", "te_hub_wban", "te_hub_hbc"];

/// Retries per hour of an RF-harvesting sensor, optical row first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2<T> {
    pub rows: Vec<Table2Row<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2Row<T> {
    pub sensor: SensorType,
    pub values: [T; 4],
    pub display: [String; 4],
}

pub fn table2<T: Scalar>(params: &EnergyParams<T>) -> Result<Table2<T>, EnergyError> {
    let mut rows = Vec::with_capacity(2);
    for sensor in [SensorType::Optical, SensorType::Capacitive] {
        let mut values = [T::zero(); 4];
        for (slot, (te, ch)) in values.iter_mut().zip(TABLE2_COLUMNS) {
            let cfg = SystemConfig::<T>::new(Allocation::from_parts(te, ch), sensor, PowerSource::RfHarvest);
            *slot = evaluate(&cfg, params)?.sensor_retries;
        }
        let display = values.map(display_rate);
        rows.push(Table2Row { sensor, values, display });
    }
    Ok(Table2 { rows })
}

impl<T: Scalar> Table2<T> {
    pub fn value(&self, sensor: SensorType, te: TeLocation, ch: OnBodyChannel) -> Option<T> {
        let col = TABLE2_COLUMNS.iter().position(|&c| c == (te, ch))?;
        self.rows.iter().find(|r| r.sensor == sensor).map(|r| r.values[col])
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TABLE2_HEADER)?;
        for row in &self.rows {
            let sensor = row.sensor.to_string();
            let mut rec = vec![sensor.as_str()];
            rec.extend(row.display.iter().map(String::as_str));
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Displayed values keyed by column name, one object per sensor.
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<_> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = serde_json::Map::new();
                obj.insert("sensor".into(), row.sensor.to_string().into());
                for (name, shown) in TABLE2_HEADER[1..].iter().zip(&row.display) {
                    let v: f64 = shown.parse().expect("display strings are decimal numbers");
                    obj.insert((*name).into(), v.into());
                }
                serde_json::Value::Object(obj)
            })
            .collect();
        serde_json::json!({ "unit": "retries_per_hour", "rows": rows })
    }
}

/// One row of the sensor lifetime sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Figure4Record<T> {
    pub sensor: SensorType,
    pub te_location: TeLocation,
    pub channel: OnBodyChannel,
    pub power: PowerSource,
    pub capture_j: T,
    pub te_j: T,
    pub comm_j: T,
    pub encrypt_j: T,
    pub total_j: T,
    pub budget_j: T,
    pub retries: T,
    pub retries_display: String,
}

pub const FIGURE4_HEADER: [&str; 12] = [
    "sensor",
    "te_location",
    "channel",
    "power",
    "capture_j",
    "te_j",
    "comm_j",
    "encrypt_j",
    "total_j",
    "budget_j",
    "retries",
    "retries_display",
];

/// Sensor energy breakdown and lifetime for sensor type × extraction site
/// (sensor or hub) × on-body link × power source.
pub fn figure4_export<T: Scalar>(params: &EnergyParams<T>) -> Result<Vec<Figure4Record<T>>, EnergyError> {
    let mut out = Vec::with_capacity(16);
    for sensor in [SensorType::Optical, SensorType::Capacitive] {
        for te in [TeLocation::Sensor, TeLocation::Hub] {
            for ch in [OnBodyChannel::Wban, OnBodyChannel::Hbc] {
                for power in [PowerSource::CoinCell, PowerSource::RfHarvest] {
                    let cfg = SystemConfig::<T>::new(Allocation::from_parts(te, ch), sensor, power);
                    let r = evaluate(&cfg, params)?;
                    let b = r.sensor_breakdown;
                    out.push(Figure4Record {
                        sensor,
                        te_location: te,
                        channel: ch,
                        power,
                        capture_j: b.capture,
                        te_j: b.te,
                        comm_j: b.comm,
                        encrypt_j: b.encrypt,
                        total_j: r.sensor_energy_per_request,
                        budget_j: r.sensor_budget,
                        retries: r.sensor_retries,
                        retries_display: r.sensor_retries_display(),
                    });
                }
            }
        }
    }
    Ok(out)
}

pub fn write_figure4_csv<T: Scalar, W: Write>(records: &[Figure4Record<T>], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FIGURE4_HEADER)?;
    for r in records {
        w.write_record([
            r.sensor.to_string(),
            r.te_location.to_string(),
            r.channel.to_string(),
            r.power.to_string(),
            r.capture_j.to_string(),
            r.te_j.to_string(),
            r.comm_j.to_string(),
            r.encrypt_j.to_string(),
            r.total_j.to_string(),
            r.budget_j.to_string(),
            r.retries.to_string(),
            r.retries_display.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
