//! Hum-amplitude sweeps comparing the two receiver front ends on identical
//! seeded waveforms.

use std::io::Write;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{frame_bits, highpass_bias, manchester, transmit, ChannelError, ChannelModel, ReceiveMode, RxStats};
use crate::scalar::Scalar;

pub const SWEEP_HEADER: [&str; 4] = ["hum_amplitude", "mode", "ber", "eye_opening"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct SweepConfig<T> {
    /// Impairments other than the hum amplitude, which the sweep sets.
    pub model: ChannelModel<T>,
    pub hum_amplitudes: Vec<T>,
    pub modes: Vec<ReceiveMode>,
    /// One random payload and one noise realization per seed.
    pub seeds: Vec<u64>,
    pub payload_len: usize,
    pub sample_rate: T,
    pub bit_period: usize,
}

impl<T: Scalar> Default for SweepConfig<T> {
    fn default() -> Self {
        Self {
            model: ChannelModel {
                noise_sigma: T::lit(0.5),
                highpass_cutoff: Some(T::lit(10e3)),
                ..ChannelModel::default()
            },
            hum_amplitudes: [0.0, 0.5, 1.0, 2.0, 5.0, 10.0].map(T::lit).to_vec(),
            modes: ReceiveMode::ALL.to_vec(),
            seeds: (1..=4).collect(),
            payload_len: 176,
            sample_rate: T::lit(1.6e6),
            bit_period: 16,
        }
    }
}

/// BER pooled over all seeds; eye opening averaged over seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub hum_amplitude: f64,
    pub mode: ReceiveMode,
    pub ber: f64,
    pub eye_opening: f64,
}

/// Rows ordered by hum amplitude, then by the configured mode order.
pub fn hum_sweep<T: Scalar>(cfg: &SweepConfig<T>) -> Result<Vec<SweepPoint>, ChannelError> {
    let mut out = Vec::with_capacity(cfg.hum_amplitudes.len() * cfg.modes.len());
    for &hum in &cfg.hum_amplitudes {
        let model = ChannelModel { hum_amplitude: hum, ..cfg.model };
        let mut errors = vec![0usize; cfg.modes.len()];
        let mut bits = 0usize;
        let mut eye = vec![0.0; cfg.modes.len()];
        for &seed in &cfg.seeds {
            let mut payload = vec![0u8; cfg.payload_len];
            ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut payload);
            let tx = frame_bits(&payload)?;
            let mut w = transmit(&manchester(&tx), cfg.sample_rate, cfg.bit_period, &model, seed)?;
            if let Some(fc) = model.highpass_cutoff {
                w = highpass_bias(&w, fc)?;
            }
            bits += tx.len();
            for (k, &mode) in cfg.modes.iter().enumerate() {
                let stats = RxStats::measure(&w, mode, &tx)?;
                errors[k] += stats.bit_errors;
                eye[k] += stats.eye_opening;
            }
        }
        for (k, &mode) in cfg.modes.iter().enumerate() {
            out.push(SweepPoint {
                hum_amplitude: hum.as_f64(),
                mode,
                ber: if bits == 0 { 0.0 } else { errors[k] as f64 / bits as f64 },
                eye_opening: if cfg.seeds.is_empty() { 0.0 } else { eye[k] / cfg.seeds.len() as f64 },
            });
        }
    }
    Ok(out)
}

pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for p in points {
        w.write_record([
            p.hum_amplitude.to_string(),
            p.mode.name().to_string(),
            format!("{:.6}", p.ber),
            format!("{:.6}", p.eye_opening),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrator_never_loses() {
        let points = hum_sweep(&SweepConfig::<f64>::default()).unwrap();
        assert_eq!(points.len(), 12);
        for pair in points.chunks_exact(2) {
            let (direct, iad) = (pair[0], pair[1]);
            assert_eq!((direct.mode, iad.mode), (ReceiveMode::DirectSample, ReceiveMode::IntegrateAndDump));
            assert!(iad.ber <= direct.ber, "{pair:?}");
            if direct.eye_opening > 0.0 {
                assert!(iad.eye_opening > direct.eye_opening, "{pair:?}");
            }
        }
        assert!(points.iter().any(|p| p.mode == ReceiveMode::DirectSample && p.ber > 0.0));
    }

    #[test]
    fn csv_shape() {
        let cfg = SweepConfig::<f64> { hum_amplitudes: vec![0.0, 1.0], seeds: vec![9], ..SweepConfig::default() };
        let mut buf = Vec::new();
        write_sweep_csv(&hum_sweep(&cfg).unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "hum_amplitude,mode,ber,eye_opening");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,direct_sample,"));
    }
}
