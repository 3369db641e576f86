//! Body-channel link model: framing, Manchester line code, impairments, the
//! high-pass bias stage and two receiver front ends.
//!
//! The WBAN radio is modelled as an error-free pipe ([`Link::Ideal`]); only
//! the capacitive body channel has a waveform model.

mod frame;
mod modem;
mod sweep;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

pub use frame::{
    crc16, encode_frame, frame_bits, frame_bits_len, manchester, parse_frame, MAX_PAYLOAD, PREAMBLE, SYNC_WORD,
};
pub use modem::{ber, demodulate, eye_opening, highpass_bias, receive_decode, symbol_statistics, transmit, RxStats};
pub use sweep::{hum_sweep, write_sweep_csv, SweepConfig, SweepPoint, SWEEP_HEADER};

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("payload of {0} bytes exceeds the 65535-byte frame limit")]
    FrameTooLarge(usize),
    #[error("bit period must be an even number of samples >= 4, got {0}")]
    BitPeriod(usize),
    #[error("high-pass cutoff {cutoff} Hz must lie in (0, {nyquist}) Hz")]
    Cutoff { cutoff: f64, nyquist: f64 },
    #[error("invalid channel model: {0}")]
    Model(String),
    #[error("sync word not found")]
    Sync,
    #[error("frame check failed")]
    Integrity,
    #[error("frame ends before its declared length")]
    Truncated,
    #[error("bit sequences differ in length ({tx} vs {rx})")]
    LengthMismatch { tx: usize, rx: usize },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiveMode {
    /// Sign of the sample in the middle of each symbol.
    DirectSample,
    /// Sign of the sum over each symbol.
    IntegrateAndDump,
}

impl ReceiveMode {
    pub const ALL: [ReceiveMode; 2] = [ReceiveMode::DirectSample, ReceiveMode::IntegrateAndDump];

    pub fn name(self) -> &'static str {
        match self {
            ReceiveMode::DirectSample => "direct_sample",
            ReceiveMode::IntegrateAndDump => "integrate_and_dump",
        }
    }
}

/// Impairments between transmitter and receiver. Amplitudes are relative to
/// the unit transmit amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct ChannelModel<T> {
    /// Linear gain applied to the transmitted symbols.
    pub attenuation: T,
    pub hum_amplitude: T,
    /// Hz.
    pub hum_frequency: T,
    /// Radians.
    pub hum_phase: T,
    /// Standard deviation of additive white Gaussian noise per sample.
    pub noise_sigma: T,
    /// Cutoff (Hz) of the receiver's first-order high-pass bias stage; none
    /// means the stage is bypassed.
    pub highpass_cutoff: Option<T>,
}

impl<T: Scalar> Default for ChannelModel<T> {
    fn default() -> Self {
        Self {
            attenuation: T::one(),
            hum_amplitude: T::zero(),
            hum_frequency: T::lit(60.0),
            hum_phase: T::zero(),
            noise_sigma: T::zero(),
            highpass_cutoff: None,
        }
    }
}

impl<T: Scalar> ChannelModel<T> {
    /// No attenuation, hum, noise or bias stage.
    pub fn clean() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |m: &str| Err(ChannelError::Model(m.to_string()));
        let finite = [self.attenuation, self.hum_amplitude, self.hum_frequency, self.hum_phase, self.noise_sigma];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("parameters must be finite");
        }
        if self.attenuation < T::zero() || self.attenuation > T::one() {
            return bad("attenuation must lie in [0, 1]");
        }
        if self.hum_amplitude < T::zero() || self.noise_sigma < T::zero() || self.hum_frequency < T::zero() {
            return bad("hum amplitude, hum frequency and noise must be non-negative");
        }
        Ok(())
    }

    /// True when the link cannot corrupt a frame.
    pub fn is_impairment_free(&self) -> bool {
        self.attenuation == T::one() && self.hum_amplitude == T::zero() && self.noise_sigma == T::zero()
    }
}

/// Sampled received or transmitted signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform<T> {
    /// Samples per second.
    pub sample_rate: T,
    /// Samples per data bit (two Manchester symbols).
    pub bit_period: usize,
    pub samples: Vec<T>,
}

impl<T: Scalar> Waveform<T> {
    pub fn symbol_len(&self) -> usize {
        self.bit_period / 2
    }

    pub fn rms(&self) -> T {
        if self.samples.is_empty() {
            return T::zero();
        }
        let sq: T = self.samples.iter().map(|&v| v * v).sum();
        (sq / T::count(self.samples.len() as u64)).sqrt()
    }

    /// `index,value` rows with a header line.
    pub fn write_csv(&self, path: &Path) -> Result<(), ChannelError> {
        let csv_err = |source| ChannelError::Csv { path: path.to_path_buf(), source };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["index", "value"]).map_err(csv_err)?;
        for (i, v) in self.samples.iter().enumerate() {
            w.write_record([i.to_string(), v.to_string()]).map_err(csv_err)?;
        }
        w.flush().map_err(|source| ChannelError::Io { path: path.to_path_buf(), source })
    }

    /// Reads a waveform written by [`Waveform::write_csv`]; the index column
    /// must count up from zero.
    pub fn read_csv(path: &Path, sample_rate: T, bit_period: usize) -> Result<Self, ChannelError> {
        let csv_err = |source| ChannelError::Csv { path: path.to_path_buf(), source };
        let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
        let mut samples = Vec::new();
        for (expected, row) in r.deserialize::<(usize, f64)>().enumerate() {
            let (index, value) = row.map_err(csv_err)?;
            if index != expected {
                return Err(ChannelError::Model(format!("{}: sample index {index} out of order", path.display())));
            }
            samples.push(T::lit(value));
        }
        Ok(Self { sample_rate, bit_period, samples })
    }
}

/// Physical-layer settings of the body-channel link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct HbcLink<T> {
    pub model: ChannelModel<T>,
    pub sample_rate: T,
    pub bit_period: usize,
    pub mode: ReceiveMode,
}

impl<T: Scalar> Default for HbcLink<T> {
    fn default() -> Self {
        Self {
            model: ChannelModel::default(),
            sample_rate: T::lit(1.6e6),
            bit_period: 16,
            mode: ReceiveMode::IntegrateAndDump,
        }
    }
}

impl<T: Scalar> HbcLink<T> {
    /// Modulates, impairs, filters and demodulates one frame.
    pub fn deliver(&self, payload: &[u8], seed: u64) -> Result<Vec<u8>, ChannelError> {
        let symbols = encode_frame(payload)?;
        let mut w = transmit(&symbols, self.sample_rate, self.bit_period, &self.model, seed)?;
        if let Some(fc) = self.model.highpass_cutoff {
            w = highpass_bias(&w, fc)?;
        }
        receive_decode(&w, self.mode)
    }
}

/// How bytes cross an on-body hop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub enum Link<T> {
    /// Error-free bit pipe (the WBAN radio, or a clean body channel).
    Ideal,
    Hbc(HbcLink<T>),
}

impl<T: Scalar> Link<T> {
    pub fn deliver(&self, payload: &[u8], seed: u64) -> Result<Vec<u8>, ChannelError> {
        match self {
            Link::Ideal => {
                if payload.len() > MAX_PAYLOAD {
                    return Err(ChannelError::FrameTooLarge(payload.len()));
                }
                Ok(payload.to_vec())
            }
            Link::Hbc(link) => link.deliver(payload, seed),
        }
    }

    /// True when every delivery returns the payload unchanged.
    pub fn is_lossless(&self) -> bool {
        match self {
            Link::Ideal => true,
            Link::Hbc(l) => l.model.is_impairment_free(),
        }
    }
}
