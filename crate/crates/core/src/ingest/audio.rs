use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const TARGET_RATE: u32 = 22_050;
pub const FFT_SIZE: usize = 2048;
pub const HOP: usize = 512;
const FIR_TAPS: usize = 63;

/// Affine map between tone frequency and speed, `f = alpha * v + beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AudioPrior {
    pub alpha: f64,
    pub beta: f64,
}

impl AudioPrior {
    pub fn tone(&self, v: f64) -> f64 {
        self.alpha * v + self.beta
    }
}

/// Per-frame spectral features. Frame `k` starts at sample `k * HOP` and is
/// timestamped at its centre.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AudioFeatures {
    pub sample_rate: u32,
    pub times: Vec<f64>,
    pub rms: Vec<f64>,
    pub centroid: Vec<f64>,
    pub peak: Vec<f64>,
}

impl AudioFeatures {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn frame_rate(&self) -> f64 {
        self.sample_rate as f64 / HOP as f64
    }
}

/// Reads a 16-bit PCM WAV as mono samples in `[-1, 1)`.
pub fn read_wav(path: impl AsRef<Path>) -> Result<(Vec<f64>, u32)> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Audio(format!("{}: {other}", path.display())),
    })?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::Audio(format!(
            "{}: unsupported encoding ({:?}, {} bits); expected 16-bit PCM",
            path.display(),
            spec.sample_format,
            spec.bits_per_sample
        )));
    }
    let ch = spec.channels.max(1) as usize;
    let raw: Vec<i16> = reader
        .into_samples::<i16>()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Audio(format!("{}: {e}", path.display())))?;
    let mono = raw
        .chunks(ch)
        .map(|fr| fr.iter().map(|&s| s as f64 / 32768.0).sum::<f64>() / ch as f64)
        .collect();
    Ok((mono, spec.sample_rate))
}

/// Writes mono samples as 16-bit PCM, clipping to `[-1, 1]`.
pub fn write_wav(path: impl AsRef<Path>, samples: &[f64], sample_rate: u32) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let wrap = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Audio(format!("{}: {other}", path.display())),
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(wrap)?;
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        w.write_sample(v).map_err(wrap)?;
    }
    w.finalize().map_err(wrap)
}

/// Windowed-sinc low-pass at `cutoff` cycles per sample (Blackman window).
fn lowpass_taps(cutoff: f64, n: usize) -> Vec<f64> {
    let mid = (n - 1) as f64 / 2.0;
    let mut h: Vec<f64> = (0..n)
        .map(|i| {
            let x = i as f64 - mid;
            let sinc = if x == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * std::f64::consts::PI * cutoff * x).sin() / (std::f64::consts::PI * x)
            };
            let a = 2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64;
            sinc * (0.42 - 0.5 * a.cos() + 0.08 * (2.0 * a).cos())
        })
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= sum);
    h
}

/// Low-pass then keep every second sample.
pub fn decimate_by_two(samples: &[f64]) -> Vec<f64> {
    let h = lowpass_taps(0.225, FIR_TAPS);
    let half = FIR_TAPS / 2;
    (0..samples.len().div_ceil(2))
        .map(|k| {
            let c = 2 * k;
            h.iter()
                .enumerate()
                .filter_map(|(j, w)| {
                    let idx = (c + j).checked_sub(half)?;
                    samples.get(idx).map(|s| w * s)
                })
                .sum()
        })
        .collect()
}

/// Brings audio to 22.05 kHz. Only 44.1 kHz input is resampled.
pub fn to_target_rate(samples: Vec<f64>, sample_rate: u32) -> Result<Vec<f64>> {
    match sample_rate {
        TARGET_RATE => Ok(samples),
        r if r == 2 * TARGET_RATE => Ok(decimate_by_two(&samples)),
        r => Err(Error::Audio(format!(
            "unsupported sample rate {r} Hz; expected 22050 or 44100"
        ))),
    }
}

struct Stft {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
}

impl Stft {
    fn new() -> Self {
        let window = (0..FFT_SIZE)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / FFT_SIZE as f64;
                0.5 - 0.5 * a.cos()
            })
            .collect();
        Self {
            fft: FftPlanner::new().plan_fft_forward(FFT_SIZE),
            window,
        }
    }

    /// Magnitudes of bins `0..=FFT_SIZE/2`.
    fn magnitudes(&self, frame: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = (0..FFT_SIZE)
            .map(|i| Complex::new(frame.get(i).copied().unwrap_or(0.0) * self.window[i], 0.0))
            .collect();
        self.fft.process(&mut buf);
        buf[..=FFT_SIZE / 2].iter().map(|c| c.norm()).collect()
    }
}

fn frame_starts(n: usize) -> Vec<usize> {
    if n <= FFT_SIZE {
        return vec![0];
    }
    (0..=(n - FFT_SIZE) / HOP).map(|k| k * HOP).collect()
}

/// RMS, spectral centroid and peak frequency per STFT frame of samples
/// already at `sample_rate`. Audio shorter than one frame is zero-padded.
pub fn wav_features(samples: &[f64], sample_rate: u32) -> Result<AudioFeatures> {
    if samples.is_empty() {
        return Err(Error::Audio("empty audio".into()));
    }
    let stft = Stft::new();
    let sr = sample_rate as f64;
    let bin_hz = sr / FFT_SIZE as f64;
    let mut out = AudioFeatures {
        sample_rate,
        ..Default::default()
    };
    for start in frame_starts(samples.len()) {
        let frame = &samples[start..(start + FFT_SIZE).min(samples.len())];
        let rms = (frame.iter().map(|v| v * v).sum::<f64>() / FFT_SIZE as f64).sqrt();
        let mag = stft.magnitudes(frame);
        let total: f64 = mag.iter().sum();
        let centroid = if total > 0.0 {
            mag.iter()
                .enumerate()
                .map(|(k, m)| k as f64 * bin_hz * m)
                .sum::<f64>()
                / total
        } else {
            0.0
        };
        let peak = argmax(&mag, 0, mag.len()) as f64 * bin_hz;
        out.times.push((start + FFT_SIZE / 2) as f64 / sr);
        out.rms.push(rms);
        out.centroid.push(centroid);
        out.peak.push(peak);
    }
    Ok(out)
}

/// Reads, downmixes and resamples a WAV, then extracts frame features.
pub fn wav_file_features(path: impl AsRef<Path>) -> Result<AudioFeatures> {
    let (samples, sr) = read_wav(path)?;
    let samples = to_target_rate(samples, sr)?;
    wav_features(&samples, TARGET_RATE)
}

fn argmax(v: &[f64], lo: usize, hi: usize) -> usize {
    let mut best = lo;
    for k in lo..hi {
        if v[k] > v[best] {
            best = k;
        }
    }
    best
}

/// Peak frequency inside each `[lo, hi)` Hz band per frame, refined by a
/// parabola through the log magnitudes around the peak bin.
pub fn band_peaks(
    samples: &[f64],
    sample_rate: u32,
    bands: &[(f64, f64)],
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if samples.is_empty() {
        return Err(Error::Audio("empty audio".into()));
    }
    let sr = sample_rate as f64;
    let bin_hz = sr / FFT_SIZE as f64;
    let nbins = FFT_SIZE / 2 + 1;
    let ranges: Vec<(usize, usize)> = bands
        .iter()
        .map(|&(lo, hi)| {
            let a = (lo / bin_hz).ceil().max(1.0) as usize;
            let b = ((hi / bin_hz).floor() as usize).min(nbins - 1);
            if lo >= hi || a >= b {
                Err(Error::InvalidArgument(format!(
                    "empty frequency band [{lo}, {hi})"
                )))
            } else {
                Ok((a, b))
            }
        })
        .collect::<Result<_>>()?;
    let stft = Stft::new();
    let mut times = Vec::new();
    let mut peaks = vec![Vec::new(); bands.len()];
    for start in frame_starts(samples.len()) {
        let mag = stft.magnitudes(&samples[start..(start + FFT_SIZE).min(samples.len())]);
        times.push((start + FFT_SIZE / 2) as f64 / sr);
        for (b, &(lo, hi)) in ranges.iter().enumerate() {
            let k = argmax(&mag, lo, hi);
            let (l, c, r) = (
                mag[k - 1].max(1e-300).ln(),
                mag[k].max(1e-300).ln(),
                mag[k + 1].max(1e-300).ln(),
            );
            let den = l - 2.0 * c + r;
            let shift = if den < 0.0 {
                (0.5 * (l - r) / den).clamp(-0.5, 0.5)
            } else {
                0.0
            };
            peaks[b].push((k as f64 + shift) * bin_hz);
        }
    }
    Ok((times, peaks))
}

/// `v = (f - beta) / alpha`
pub fn apply_audio_prior(freqs: &[f64], prior: AudioPrior) -> Result<Vec<f64>> {
    if prior.alpha == 0.0 || !prior.alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "audio prior alpha must be finite and non-zero, got {}",
            prior.alpha
        )));
    }
    Ok(freqs
        .iter()
        .map(|f| (f - prior.beta) / prior.alpha)
        .collect())
}

/// Sum of sinusoids whose instantaneous frequencies follow `freqs[i](t)`,
/// sampled `n` times at `sample_rate`.
pub fn synth_tones(
    freqs: &[&dyn Fn(f64) -> f64],
    amplitude: f64,
    sample_rate: u32,
    n: usize,
) -> Vec<f64> {
    let dt = 1.0 / sample_rate as f64;
    let mut phase = vec![0.0f64; freqs.len()];
    (0..n)
        .map(|i| {
            let t = i as f64 * dt;
            let mut s = 0.0;
            for (p, f) in phase.iter_mut().zip(freqs) {
                s += amplitude * p.sin();
                *p = (*p + 2.0 * std::f64::consts::PI * f(t) * dt) % (2.0 * std::f64::consts::PI);
            }
            s
        })
        .collect()
}

/// Adds white Gaussian noise at the given signal-to-noise ratio in dB.
pub fn add_noise_snr<G: Rng>(samples: &[f64], snr_db: f64, rng: &mut G) -> Vec<f64> {
    let power = samples.iter().map(|v| v * v).sum::<f64>() / samples.len().max(1) as f64;
    let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
    if !(sigma > 0.0) {
        return samples.to_vec();
    }
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    samples.iter().map(|v| v + normal.sample(rng)).collect()
}
