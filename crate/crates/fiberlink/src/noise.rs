//! Stochastic input models: power-law fiber phase noise, the system noise
//! floor, the RF reference source, and seeded synthesis of time series with
//! a prescribed spectrum.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;

/// Per-kilometre power-law coefficients of a phase-noise spectrum
/// `h_m3·f⁻³ + h_m2·f⁻² + h_m1·f⁻¹ + h_0`, to be scaled by link length and
/// the squared carrier angular frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawCoeffs {
    pub h_m3: f64,
    pub h_m2: f64,
    pub h_m1: f64,
    pub h_0: f64,
}

impl PowerLawCoeffs {
    pub const ZERO: PowerLawCoeffs = PowerLawCoeffs {
        h_m3: 0.0,
        h_m2: 0.0,
        h_m1: 0.0,
        h_0: 0.0,
    };

    /// Raw power-law sum at frequency `f` (Hz), before any scaling.
    pub fn eval(&self, f: f64) -> f64 {
        assert!(f > 0.0, "power-law spectrum requires f > 0");
        self.h_m3 / (f * f * f) + self.h_m2 / (f * f) + self.h_m1 / f + self.h_0
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::ZERO
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("h_m3", self.h_m3),
            ("h_m2", self.h_m2),
            ("h_m1", self.h_m1),
            ("h_0", self.h_0),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "power-law coefficient {name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for PowerLawCoeffs {
    /// Typical per-km coefficients of installed telecom fiber at a 2 GHz
    /// carrier (dominant flicker term, weak white floor).
    fn default() -> Self {
        PowerLawCoeffs {
            h_m3: 1.0e-34,
            h_m2: 2.0e-34,
            h_m1: 6.0e-33,
            h_0: 5.0e-37,
        }
    }
}

/// System noise floor: a white single-sideband level in dBc/Hz (amplified
/// spontaneous emission plus detection electronics) and optional extra
/// absolute power-law terms (slow environmental pickup in the station
/// hardware).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseFloorSpec {
    /// White SSB level L(f) in dBc/Hz; `None` disables the white part.
    pub white_ssb_dbc_per_hz: Option<f64>,
    /// Extra absolute (not per-km) power-law terms added on top.
    pub extra: PowerLawCoeffs,
}

impl NoiseFloorSpec {
    pub const OFF: NoiseFloorSpec = NoiseFloorSpec {
        white_ssb_dbc_per_hz: None,
        extra: PowerLawCoeffs::ZERO,
    };
}

impl Default for NoiseFloorSpec {
    /// -78 dBc/Hz white floor plus a small f⁻³ term modeling sub-hertz
    /// environmental sensitivity of the station electronics.
    fn default() -> Self {
        NoiseFloorSpec {
            white_ssb_dbc_per_hz: Some(-78.0),
            extra: PowerLawCoeffs {
                h_m3: 6.5e-18,
                h_m2: 0.0,
                h_m1: 0.0,
                h_0: 0.0,
            },
        }
    }
}

/// Phase-noise spectrum of the RF reference source feeding the chain.
/// Defaults to absent (treated as zero): a clean frequency standard.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RfSourceSpec {
    /// Absolute power-law spectrum of the source, if modeled.
    pub psd: Option<PowerLawCoeffs>,
}

impl RfSourceSpec {
    pub fn psd_at(&self, f: f64) -> f64 {
        match &self.psd {
            Some(c) => c.eval(f),
            None => 0.0,
        }
    }
}

/// One-sided phase-noise PSD of a fiber sub-link, rad²/Hz:
/// `ω_r² · L · (h₋₃ f⁻³ + h₋₂ f⁻² + h₋₁ f⁻¹ + h₀)`.
pub fn fiber_psd(
    coeffs: &PowerLawCoeffs,
    length_km: f64,
    carrier_angular_freq: f64,
    f: f64,
) -> f64 {
    assert!(length_km >= 0.0, "link length must be >= 0");
    assert!(f > 0.0, "fiber_psd requires f > 0");
    if length_km == 0.0 {
        return 0.0;
    }
    carrier_angular_freq * carrier_angular_freq * length_km * coeffs.eval(f)
}

/// One-sided phase-noise PSD of the per-station noise floor, rad²/Hz.
/// The white SSB level converts as S_φ = 2·10^(L/10) (small-angle
/// convention: each sideband carries half of the phase-noise power).
pub fn floor_psd(spec: &NoiseFloorSpec, f: f64) -> f64 {
    assert!(f > 0.0, "floor_psd requires f > 0");
    let white = match spec.white_ssb_dbc_per_hz {
        Some(dbc) => 2.0 * 10f64.powf(dbc / 10.0),
        None => 0.0,
    };
    let extra = if spec.extra.is_zero() {
        0.0
    } else {
        spec.extra.eval(f)
    };
    white + extra
}

/// Synthesizes a real phase time series whose one-sided PSD matches
/// `target_psd` (rad²/Hz), by spectral shaping of white Gaussian noise.
/// Deterministic per seed. `n_samples` must be a power of two.
///
/// Negative-order components are band-limited below the resolution
/// 1/(n·Δt): the DC bin is zero, so the series has exactly zero mean.
pub fn synthesize_series(
    target_psd: &dyn Fn(f64) -> f64,
    sample_rate: f64,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if sample_rate <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "sample_rate must be > 0, got {sample_rate}"
        )));
    }
    if !n_samples.is_power_of_two() || n_samples < 8 {
        return Err(Error::InvalidArgument(format!(
            "n_samples must be a power of two >= 8, got {n_samples}"
        )));
    }
    let n = n_samples;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;

    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    let df = sample_rate / n as f64;
    // Bin amplitude A with E|X_k|² = 2A² reproduces a one-sided PSD of
    // S(f_k) after the conjugate bin is counted: S = 2·E|X_k|²/(n·fs).
    for k in 1..n / 2 {
        let f = k as f64 * df;
        let s = target_psd(f);
        debug_assert!(s >= 0.0, "target PSD must be >= 0");
        let amp = (s * sample_rate * n as f64).sqrt() / 2.0;
        let g1: f64 = normal.sample(&mut rng);
        let g2: f64 = normal.sample(&mut rng);
        spec[k] = Complex64::new(amp * g1, amp * g2);
        spec[n - k] = spec[k].conj();
    }
    // Nyquist bin is its own conjugate: real, with the full 2A² power.
    {
        let f = (n / 2) as f64 * df;
        let amp = (target_psd(f) * sample_rate * n as f64).sqrt() / 2.0;
        let g: f64 = normal.sample(&mut rng);
        spec[n / 2] = Complex64::new(amp * std::f64::consts::SQRT_2 * g, 0.0);
    }

    let fft = FftPlanner::new().plan_fft_inverse(n);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(&mut spec, &mut scratch);
    drop(scratch);

    let inv_n = 1.0 / n as f64;
    Ok(spec.iter().map(|c| c.re * inv_n).collect())
}

/// Welch PSD estimate (one-sided, rad²/Hz) with a Hann window over
/// `n_segments` non-overlapping segments. Returns (freqs, psd) without the
/// DC bin. Intended for validation of synthesized/simulated series.
pub fn welch_psd(series: &[f64], sample_rate: f64, n_segments: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n_segments >= 1);
    let seg_len = (series.len() / n_segments).next_power_of_two() / 2;
    assert!(seg_len >= 8, "series too short for Welch estimate");
    let window: Vec<f64> = (0..seg_len)
        .map(|i| {
            let x = std::f64::consts::PI * i as f64 / seg_len as f64;
            x.sin() * x.sin()
        })
        .collect();
    let win_power: f64 = window.iter().map(|w| w * w).sum();

    let fft = FftPlanner::new().plan_fft_forward(seg_len);
    let mut acc = vec![0.0; seg_len / 2];
    let mut used = 0;
    for seg in series.chunks_exact(seg_len).take(n_segments * 2) {
        let mut buf: Vec<Complex64> = seg
            .iter()
            .zip(&window)
            .map(|(x, w)| Complex64::new(x * w, 0.0))
            .collect();
        fft.process(&mut buf);
        for k in 1..seg_len / 2 + 1 {
            let p = buf[k].norm_sqr();
            acc[k - 1] += p;
        }
        used += 1;
    }
    let scale = 2.0 / (sample_rate * win_power * used as f64);
    let freqs = (1..seg_len / 2 + 1)
        .map(|k| k as f64 * sample_rate / seg_len as f64)
        .collect();
    let psd = acc.iter().map(|p| p * scale).collect();
    (freqs, psd)
}
