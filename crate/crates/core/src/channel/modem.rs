use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{manchester, parse_frame, ChannelError, ChannelModel, ReceiveMode, Waveform};
use crate::scalar::Scalar;

fn check_bit_period(bit_period: usize) -> Result<(), ChannelError> {
    if bit_period < 4 || bit_period % 2 != 0 {
        return Err(ChannelError::BitPeriod(bit_period));
    }
    Ok(())
}

/// Expands ±1 symbols to `bit_period / 2` samples each, scales by the
/// attenuation and adds hum and seeded Gaussian noise.
pub fn transmit<T: Scalar>(
    symbols: &[i8],
    sample_rate: T,
    bit_period: usize,
    model: &ChannelModel<T>,
    seed: u64,
) -> Result<Waveform<T>, ChannelError> {
    check_bit_period(bit_period)?;
    model.validate()?;
    if !(sample_rate > T::zero() && sample_rate.is_finite()) {
        return Err(ChannelError::Model("sample rate must be positive".into()));
    }
    let sym_len = bit_period / 2;
    let omega = T::lit(std::f64::consts::TAU) * model.hum_frequency / sample_rate;
    let mut noise = (model.noise_sigma > T::zero()).then(|| {
        let normal = Normal::new(0.0, model.noise_sigma.as_f64()).expect("sigma validated");
        (ChaCha8Rng::seed_from_u64(seed), normal)
    });
    let samples = (0..symbols.len() * sym_len)
        .map(|n| {
            let mut v = T::lit(symbols[n / sym_len] as f64) * model.attenuation;
            if model.hum_amplitude > T::zero() {
                v += model.hum_amplitude * (omega * T::count(n as u64) + model.hum_phase).sin();
            }
            if let Some((rng, normal)) = noise.as_mut() {
                v += T::lit(normal.sample(rng));
            }
            v
        })
        .collect();
    Ok(Waveform { sample_rate, bit_period, samples })
}

/// First-order RC high-pass, `y[n] = α (y[n−1] + x[n] − x[n−1])` with
/// `α = RC / (RC + 1/fs)`, starting from rest.
pub fn highpass_bias<T: Scalar>(w: &Waveform<T>, cutoff: T) -> Result<Waveform<T>, ChannelError> {
    let nyquist = w.sample_rate / T::lit(2.0);
    if !(cutoff > T::zero() && cutoff < nyquist) {
        return Err(ChannelError::Cutoff { cutoff: cutoff.as_f64(), nyquist: nyquist.as_f64() });
    }
    let rc = T::one() / (T::lit(std::f64::consts::TAU) * cutoff);
    let alpha = rc / (rc + T::one() / w.sample_rate);
    let mut prev_x = T::zero();
    let mut prev_y = T::zero();
    let samples = w
        .samples
        .iter()
        .map(|&x| {
            prev_y = alpha * (prev_y + x - prev_x);
            prev_x = x;
            prev_y
        })
        .collect();
    Ok(Waveform { samples, ..*w })
}

/// One decision statistic per whole symbol: the middle sample, or the mean
/// over the symbol.
pub fn symbol_statistics<T: Scalar>(w: &Waveform<T>, mode: ReceiveMode) -> Vec<T> {
    let len = w.symbol_len().max(1);
    w.samples
        .chunks_exact(len)
        .map(|sym| match mode {
            ReceiveMode::DirectSample => sym[len / 2],
            ReceiveMode::IntegrateAndDump => sym.iter().copied().sum::<T>() / T::count(len as u64),
        })
        .collect()
}

/// Hard Manchester decisions: a bit is 1 when its first half is the larger.
pub fn demodulate<T: Scalar>(w: &Waveform<T>, mode: ReceiveMode) -> Vec<bool> {
    symbol_statistics(w, mode).chunks_exact(2).map(|p| p[0] > p[1]).collect()
}

/// Demodulates, hunts for the sync word and checks the CRC. A frame that
/// fails its check is withheld.
pub fn receive_decode<T: Scalar>(w: &Waveform<T>, mode: ReceiveMode) -> Result<Vec<u8>, ChannelError> {
    parse_frame(&demodulate(w, mode))
}

/// Worst-case decision margin over the largest statistic, in `[0, 1]`.
///
/// With `reference` symbols the margin of each symbol is its statistic times
/// the symbol sent, so any wrong-signed symbol closes the eye; without one
/// it is `min |s| / max |s|`.
pub fn eye_opening<T: Scalar>(w: &Waveform<T>, mode: ReceiveMode, reference: Option<&[i8]>) -> T {
    let stats = symbol_statistics(w, mode);
    let peak = stats.iter().fold(T::zero(), |m, s| m.max(s.abs()));
    if stats.is_empty() || peak == T::zero() {
        return T::zero();
    }
    let worst = match reference {
        Some(r) => stats.iter().zip(r).map(|(&s, &sym)| s * T::lit(sym as f64)).fold(T::infinity(), T::min),
        None => stats.iter().fold(T::infinity(), |m, s| m.min(s.abs())),
    };
    if !worst.is_finite() {
        return T::zero();
    }
    (worst / peak).max(T::zero())
}

/// Hamming distance over length; an empty pair has rate 0.
pub fn ber(tx: &[bool], rx: &[bool]) -> Result<f64, ChannelError> {
    if tx.len() != rx.len() {
        return Err(ChannelError::LengthMismatch { tx: tx.len(), rx: rx.len() });
    }
    if tx.is_empty() {
        return Ok(0.0);
    }
    Ok(tx.iter().zip(rx).filter(|(a, b)| a != b).count() as f64 / tx.len() as f64)
}

/// Receiver-side measurements against the known transmitted frame bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RxStats {
    pub bits: usize,
    pub bit_errors: usize,
    pub ber: f64,
    pub eye_opening: f64,
}

impl RxStats {
    pub fn measure<T: Scalar>(w: &Waveform<T>, mode: ReceiveMode, tx_bits: &[bool]) -> Result<Self, ChannelError> {
        let rx = demodulate(w, mode);
        let ber = ber(tx_bits, &rx)?;
        let bit_errors = tx_bits.iter().zip(&rx).filter(|(a, b)| a != b).count();
        let eye = eye_opening(w, mode, Some(&manchester(tx_bits))).as_f64();
        Ok(Self { bits: tx_bits.len(), bit_errors, ber, eye_opening: eye })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{encode_frame, frame_bits};
    use proptest::prelude::*;
    use std::f64::consts::{PI, TAU};

    const FS: f64 = 1.6e6;
    const BP: usize = 16;

    fn clean() -> ChannelModel<f64> {
        ChannelModel::clean()
    }

    #[test]
    fn rectangular_when_clean() {
        let symbols = [1i8, -1, -1, 1];
        let w = transmit(&symbols, FS, 4, &clean(), 0).unwrap();
        assert_eq!(w.samples, vec![1.0, 1.0, -1.0, -1.0, -1.0, -1.0, 1.0, 1.0]);
        assert!(matches!(transmit(&symbols, FS, 5, &clean(), 0), Err(ChannelError::BitPeriod(5))));
        assert!(matches!(transmit(&symbols, FS, 2, &clean(), 0), Err(ChannelError::BitPeriod(2))));
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let m = ChannelModel { noise_sigma: 0.3, ..clean() };
        let s = encode_frame(b"abc").unwrap();
        let a = transmit(&s, FS, BP, &m, 42).unwrap();
        assert_eq!(a, transmit(&s, FS, BP, &m, 42).unwrap());
        assert_ne!(a, transmit(&s, FS, BP, &m, 43).unwrap());
    }

    /// Magnitude of the DFT bin nearest `f`.
    fn dft_mag(x: &[f64], fs: f64, f: f64) -> f64 {
        let k = (f * x.len() as f64 / fs).round();
        let (mut re, mut im) = (0.0, 0.0);
        for (n, v) in x.iter().enumerate() {
            let ph = TAU * k * n as f64 / x.len() as f64;
            re += v * ph.cos();
            im -= v * ph.sin();
        }
        re.hypot(im)
    }

    #[test]
    fn hum_dominates_spectrum() {
        // low sample rate keeps the DFT small; 0.5 s of signal
        let fs = 4000.0;
        let m = ChannelModel { attenuation: 0.1, hum_amplitude: 0.5, ..clean() };
        let symbols: Vec<i8> = (0..1000).map(|i| if i % 3 == 0 { 1 } else { -1 }).collect();
        let w = transmit(&symbols, fs, 4, &m, 0).unwrap();
        let hum = dft_mag(&w.samples, fs, 60.0);
        for f in [20.0, 120.0, 500.0, 1000.0, 1500.0] {
            assert!(hum > 3.0 * dft_mag(&w.samples, fs, f), "{f} Hz");
        }
    }

    #[test]
    fn highpass_removes_hum() {
        let m = ChannelModel { attenuation: 0.0, hum_amplitude: 1.0, ..clean() };
        let w = transmit(&vec![1i8; 40_000], FS, BP, &m, 0).unwrap();
        let out = highpass_bias(&w, 10e3).unwrap();
        assert!(out.rms() < 0.01 * w.rms(), "{} vs {}", out.rms(), w.rms());
        // the analytic first-order response at 60 Hz
        let h = 60.0 / (60.0f64.powi(2) + 10e3f64.powi(2)).sqrt();
        assert!(h < 0.01);
    }

    #[test]
    fn highpass_kills_dc() {
        let w = Waveform { sample_rate: FS, bit_period: BP, samples: vec![1.0; 20_000] };
        let out = highpass_bias(&w, 10e3).unwrap();
        assert!(out.samples.last().unwrap().abs() < 1e-6);
        assert!(highpass_bias(&w, FS).is_err());
        assert!(highpass_bias(&w, 0.0).is_err());
    }

    #[test]
    fn highpass_passes_signal_band() {
        let s = encode_frame(&[0x5A; 64]).unwrap();
        let w = transmit(&s, FS, BP, &clean(), 0).unwrap();
        let out = highpass_bias(&w, 10e3).unwrap();
        let n = w.samples.len() as f64;
        let dot: f64 = w.samples.iter().zip(&out.samples).map(|(a, b)| a * b).sum::<f64>() / n;
        let rho = dot / (w.rms() * out.rms());
        assert!(rho >= 0.9, "rho = {rho}");
        assert_eq!(receive_decode(&out, ReceiveMode::IntegrateAndDump).unwrap(), vec![0x5A; 64]);
        assert_eq!(receive_decode(&out, ReceiveMode::DirectSample).unwrap(), vec![0x5A; 64]);
    }

    #[test]
    fn no_signal_no_sync() {
        let m = ChannelModel { attenuation: 0.0, ..clean() };
        let w = transmit(&encode_frame(b"lost").unwrap(), FS, BP, &m, 0).unwrap();
        for mode in ReceiveMode::ALL {
            assert!(matches!(receive_decode(&w, mode), Err(ChannelError::Sync)));
        }
    }

    #[test]
    fn clean_eye_is_open() {
        let s = encode_frame(b"eye").unwrap();
        let w = transmit(&s, FS, BP, &clean(), 0).unwrap();
        for mode in ReceiveMode::ALL {
            assert_eq!(eye_opening(&w, mode, None), 1.0);
            assert_eq!(eye_opening(&w, mode, Some(&s)), 1.0);
        }
    }

    #[test]
    fn integrator_opens_eye_against_in_band_interference() {
        // A tone with exactly one period per symbol integrates to zero over
        // each symbol but peaks at every symbol midpoint.
        let s = encode_frame(b"interference").unwrap();
        let sym_rate = FS / (BP / 2) as f64;
        let m = ChannelModel { hum_amplitude: 5.0, hum_frequency: sym_rate, hum_phase: PI / 2.0, ..clean() };
        let w = transmit(&s, FS, BP, &m, 0).unwrap();
        let direct = eye_opening(&w, ReceiveMode::DirectSample, Some(&s));
        let iad = eye_opening(&w, ReceiveMode::IntegrateAndDump, Some(&s));
        assert!(direct < 0.05, "{direct}");
        assert!(iad > direct && iad > 0.9, "{iad}");
        assert!(receive_decode(&w, ReceiveMode::IntegrateAndDump).is_ok());
    }

    #[test]
    fn integrator_wins_under_hum_and_noise() {
        let payload: Vec<u8> = (0..200u32).map(|i| (i * 37 % 251) as u8).collect();
        let bits = frame_bits(&payload).unwrap();
        let m = ChannelModel { hum_amplitude: 2.0, noise_sigma: 0.8, highpass_cutoff: Some(10e3), ..clean() };
        let w = transmit(&manchester(&bits), FS, BP, &m, 7).unwrap();
        let w = highpass_bias(&w, 10e3).unwrap();
        let direct = RxStats::measure(&w, ReceiveMode::DirectSample, &bits).unwrap();
        let iad = RxStats::measure(&w, ReceiveMode::IntegrateAndDump, &bits).unwrap();
        assert!(iad.ber < direct.ber, "{iad:?} {direct:?}");
        assert!(receive_decode(&w, ReceiveMode::DirectSample).is_err());
        assert_eq!(receive_decode(&w, ReceiveMode::IntegrateAndDump).unwrap(), payload);
    }

    #[test]
    fn ber_arithmetic() {
        let a: Vec<bool> = (0..1000).map(|i| i % 3 == 0).collect();
        assert_eq!(ber(&a, &a).unwrap(), 0.0);
        let inv: Vec<bool> = a.iter().map(|b| !b).collect();
        assert_eq!(ber(&a, &inv).unwrap(), 1.0);
        let mut one = a.clone();
        one[500] = !one[500];
        assert_eq!(ber(&a, &one).unwrap(), 0.001);
        assert!(matches!(ber(&a, &a[1..]), Err(ChannelError::LengthMismatch { .. })));
    }

    #[test]
    fn single_precision_path() {
        let s = encode_frame(b"f32").unwrap();
        let m = ChannelModel::<f32> { noise_sigma: 0.1, ..ChannelModel::clean() };
        let w = transmit(&s, 1.6e6f32, BP, &m, 3).unwrap();
        assert_eq!(receive_decode(&w, ReceiveMode::IntegrateAndDump).unwrap(), b"f32");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn clean_round_trip(payload in prop::collection::vec(any::<u8>(), 0..1024), bp in 2usize..6) {
            let w = transmit(&encode_frame(&payload).unwrap(), FS, 2 * bp, &clean(), 0).unwrap();
            prop_assert_eq!(w.samples.len() % w.bit_period, 0);
            for mode in ReceiveMode::ALL {
                prop_assert_eq!(&receive_decode(&w, mode).unwrap(), &payload);
            }
        }
    }
}
