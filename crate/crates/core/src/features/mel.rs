//! Log-mel filterbank extraction: Hamming-windowed STFT power spectra pushed
//! through a triangular mel filterbank, log-compressed with a hard floor.

use super::{FeatureError, FeatureSequence};
use rustfft::{num_complex::Complex, FftPlanner};

/// Analysis window shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Hamming,
    Rectangular,
}

/// Front-end settings. The defaults give 39 log-mel coefficients from
/// Hamming-windowed 25 ms frames hopped by 10 ms, no pre-emphasis, flooring
/// energies at 1e-10 before the log.
#[derive(Debug, Clone, Copy)]
pub struct MelConfig {
    pub sample_rate: u32,
    pub window_ms: f64,
    pub hop_ms: f64,
    pub n_filters: usize,
    pub energy_floor: f64,
    pub window: WindowKind,
    /// Optional first-order pre-emphasis coefficient (x[n] − α·x[n−1]).
    pub pre_emphasis: Option<f64>,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            window_ms: 25.0,
            hop_ms: 10.0,
            n_filters: 39,
            energy_floor: 1e-10,
            window: WindowKind::Hamming,
            pre_emphasis: None,
        }
    }
}

impl MelConfig {
    pub fn window_samples(&self) -> usize {
        (self.sample_rate as f64 * self.window_ms / 1000.0).round() as usize
    }

    pub fn hop_samples(&self) -> usize {
        (self.sample_rate as f64 * self.hop_ms / 1000.0).round() as usize
    }
}

/// Log-mel feature sequence of `samples`. Frame count is
/// `floor((n − window) / hop) + 1`; trailing samples that do not fill a
/// window are dropped.
pub fn mel_spectra(samples: &[f64], config: &MelConfig) -> Result<FeatureSequence, FeatureError> {
    if config.sample_rate < 8000 {
        return Err(FeatureError::SampleRateTooLow {
            rate: config.sample_rate,
        });
    }
    if config.n_filters == 0 {
        return Err(FeatureError::BadConfig("n_filters must be positive".into()));
    }
    if !(config.energy_floor > 0.0) {
        return Err(FeatureError::BadConfig(
            "energy_floor must be positive".into(),
        ));
    }
    if config.window_ms <= 0.0 || config.hop_ms <= 0.0 {
        return Err(FeatureError::BadConfig(
            "window and hop must be positive".into(),
        ));
    }
    let window = config.window_samples();
    let hop = config.hop_samples();
    if samples.len() < window {
        return Err(FeatureError::InputTooShort {
            samples: samples.len(),
            window,
        });
    }
    if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
        return Err(FeatureError::NonFinite { index });
    }

    let emphasized;
    let samples = match config.pre_emphasis {
        None => samples,
        Some(alpha) => {
            emphasized = std::iter::once(samples[0])
                .chain(samples.windows(2).map(|w| w[1] - alpha * w[0]))
                .collect::<Vec<f64>>();
            &emphasized
        }
    };

    let n_fft = window.next_power_of_two();
    let n_bins = n_fft / 2 + 1;
    let taper: Vec<f64> = (0..window)
        .map(|n| match config.window {
            WindowKind::Hamming => {
                0.54 - 0.46
                    * (2.0 * std::f64::consts::PI * n as f64 / (window - 1) as f64).cos()
            }
            WindowKind::Rectangular => 1.0,
        })
        .collect();
    let filters = triangular_filters(config, n_fft, n_bins);

    let n_frames = (samples.len() - window) / hop + 1;
    let mut fft_planner = FftPlanner::new();
    let fft = fft_planner.plan_fft_forward(n_fft);
    let mut data = Vec::with_capacity(n_frames * config.n_filters);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    for t in 0..n_frames {
        let frame = &samples[t * hop..t * hop + window];
        for (slot, (s, w)) in buf.iter_mut().zip(frame.iter().zip(&taper)) {
            *slot = Complex::new(s * w, 0.0);
        }
        for slot in buf.iter_mut().skip(window) {
            *slot = Complex::new(0.0, 0.0);
        }
        fft.process(&mut buf);
        let power: Vec<f64> = buf[..n_bins].iter().map(|c| c.norm_sqr()).collect();
        for filter in &filters {
            let energy: f64 = filter
                .iter()
                .map(|(bin, weight)| weight * power[*bin])
                .sum();
            data.push(energy.max(config.energy_floor).ln());
        }
    }
    FeatureSequence::with_timing(config.n_filters, data, config.window_ms, config.hop_ms)
}

/// Center frequency (Hz) of filter `i` (0-based) for analytic checks in
/// tests: filters sit at equal mel spacing between 0 and Nyquist.
pub fn filter_center_hz(config: &MelConfig, i: usize) -> f64 {
    let nyquist = config.sample_rate as f64 / 2.0;
    let top = hz_to_mel(nyquist);
    let step = top / (config.n_filters + 1) as f64;
    mel_to_hz(step * (i + 1) as f64)
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Sparse triangular filters as (bin, weight) lists over the one-sided
/// spectrum.
fn triangular_filters(config: &MelConfig, n_fft: usize, n_bins: usize) -> Vec<Vec<(usize, f64)>> {
    let nyquist = config.sample_rate as f64 / 2.0;
    let top = hz_to_mel(nyquist);
    let step = top / (config.n_filters + 1) as f64;
    let edges_hz: Vec<f64> = (0..config.n_filters + 2)
        .map(|i| mel_to_hz(step * i as f64))
        .collect();
    let bin_hz = config.sample_rate as f64 / n_fft as f64;
    (0..config.n_filters)
        .map(|f| {
            let (lo, mid, hi) = (edges_hz[f], edges_hz[f + 1], edges_hz[f + 2]);
            let mut weights = Vec::new();
            for bin in 0..n_bins {
                let freq = bin as f64 * bin_hz;
                let w = if freq <= mid {
                    (freq - lo) / (mid - lo)
                } else {
                    (hi - freq) / (hi - mid)
                };
                if w > 0.0 {
                    weights.push((bin, w));
                }
            }
            weights
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_second_at_16k_yields_98_frames() {
        let samples = vec![0.0; 16_000];
        let config = MelConfig::default();
        let feats = mel_spectra(&samples, &config).unwrap();
        assert_eq!(feats.num_frames(), 98);
        assert_eq!(feats.dim(), 39);
    }

    #[test]
    fn silence_hits_the_log_floor_exactly() {
        let config = MelConfig::default();
        let feats = mel_spectra(&vec![0.0; 4000], &config).unwrap();
        let floor = 1e-10f64.ln();
        assert!(feats.data().iter().all(|v| *v == floor));
    }

    #[test]
    fn pure_tone_peaks_at_the_matching_filter() {
        let config = MelConfig::default();
        let hz = 1000.0;
        let samples: Vec<f64> = (0..8000)
            .map(|n| (2.0 * std::f64::consts::PI * hz * n as f64 / 16_000.0).sin())
            .collect();
        let feats = mel_spectra(&samples, &config).unwrap();
        let frame = feats.frame(feats.num_frames() / 2);
        let argmax = frame
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let expected = (0..config.n_filters)
            .min_by(|a, b| {
                let da = (filter_center_hz(&config, *a) - hz).abs();
                let db = (filter_center_hz(&config, *b) - hz).abs();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        assert!(
            (argmax as isize - expected as isize).abs() <= 1,
            "tone peaked at filter {argmax}, expected near {expected}"
        );
    }

    #[test]
    fn higher_tone_peaks_at_higher_filter() {
        let config = MelConfig::default();
        let peak_of = |hz: f64| {
            let samples: Vec<f64> = (0..8000)
                .map(|n| (2.0 * std::f64::consts::PI * hz * n as f64 / 16_000.0).sin())
                .collect();
            let feats = mel_spectra(&samples, &config).unwrap();
            let frame = feats.frame(feats.num_frames() / 2);
            frame
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0
        };
        assert!(peak_of(400.0) < peak_of(1200.0));
        assert!(peak_of(1200.0) < peak_of(3500.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let config = MelConfig::default();
        assert!(matches!(
            mel_spectra(&vec![0.0; 100], &config),
            Err(FeatureError::InputTooShort { .. })
        ));
        assert!(matches!(
            mel_spectra(&[0.0, f64::NAN, 0.0], &config),
            Err(FeatureError::NonFinite { .. }) | Err(FeatureError::InputTooShort { .. })
        ));
        let low = MelConfig {
            sample_rate: 4000,
            ..MelConfig::default()
        };
        assert!(matches!(
            mel_spectra(&vec![0.0; 4000], &low),
            Err(FeatureError::SampleRateTooLow { .. })
        ));
    }

    #[test]
    fn amplitude_scaling_never_decreases_log_energies() {
        let config = MelConfig::default();
        let samples: Vec<f64> = (0..3200)
            .map(|n| {
                (2.0 * std::f64::consts::PI * 700.0 * n as f64 / 16_000.0).sin()
                    * (0.002 + 0.3 * ((n as f64 / 500.0).sin().abs()))
            })
            .collect();
        let scaled: Vec<f64> = samples.iter().map(|v| v * 4.0).collect();
        let base = mel_spectra(&samples, &config).unwrap();
        let louder = mel_spectra(&scaled, &config).unwrap();
        for (a, b) in base.data().iter().zip(louder.data()) {
            assert!(*b >= *a - 1e-12, "louder coefficient dropped: {a} -> {b}");
        }
    }

    #[test]
    fn timing_metadata_propagates() {
        let config = MelConfig::default();
        let feats = mel_spectra(&vec![0.0; 4000], &config).unwrap();
        assert_eq!(feats.frame_length_ms(), 25.0);
        assert_eq!(feats.frame_shift_ms(), 10.0);
        assert!(feats.duration_s() > 0.0);
    }

    #[test]
    fn nan_rejected_even_when_long_enough() {
        let config = MelConfig::default();
        let mut samples = vec![0.0; 1000];
        samples[500] = f64::INFINITY;
        assert!(matches!(
            mel_spectra(&samples, &config),
            Err(FeatureError::NonFinite { index: 500 })
        ));
    }
}
