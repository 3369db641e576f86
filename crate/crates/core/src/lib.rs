pub mod channel;
pub mod cipher;
pub mod codec;
pub mod design;
pub mod energy;
pub mod fingerprint;
pub mod matcher;
pub mod scalar;
pub mod sim;

pub use scalar::Scalar;

pub type EnergyParamsF64 = energy::EnergyParams<f64>;
pub type EnergyParamsF32 = energy::EnergyParams<f32>;
pub type SystemConfigF64 = design::SystemConfig<f64>;
pub type SystemConfigF32 = design::SystemConfig<f32>;
pub type LifetimeReportF64 = design::LifetimeReport<f64>;
pub type LifetimeReportF32 = design::LifetimeReport<f32>;
pub type ChannelModelF64 = channel::ChannelModel<f64>;
pub type ChannelModelF32 = channel::ChannelModel<f32>;
pub type WaveformF64 = channel::Waveform<f64>;
pub type WaveformF32 = channel::Waveform<f32>;
pub type HbcLinkF64 = channel::HbcLink<f64>;
pub type HbcLinkF32 = channel::HbcLink<f32>;
