//! Batch experiment drivers: split-ratio × total-length grids for a single
//! relay station, and the N-station chain vs cascaded-span comparison.

use crate::error::{Error, Result};
use crate::freqdomain::{cascaded_psd, default_grid, residual_psd_chain};
use crate::stability::{psd_to_adev, AdevCurve, DEFAULT_F_HIGH};
use crate::topology::ChainTopology;

/// A ratio × total-length sweep over single-relay chains.
///
/// `ratios` are front-length fractions in (0, 1): ratio r over total length
/// L places the relay station after r·L km of fiber.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    /// Template chain; only the two sub-link lengths are overwritten.
    pub base: ChainTopology,
    pub total_lengths_km: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Averaging times at which ADEV is tabulated, s.
    pub taus: Vec<f64>,
}

impl SweepSpec {
    /// Sweep with default chain parameters and metrics at τ = 1 s, 10⁴ s.
    pub fn with_defaults(total_lengths_km: Vec<f64>, ratios: Vec<f64>) -> SweepSpec {
        SweepSpec {
            base: ChainTopology::with_defaults(vec![100.0, 100.0]),
            total_lengths_km,
            ratios,
            taus: vec![1.0, 1e4],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.base.n_stations() != 1 {
            return Err(Error::InvalidArgument(format!(
                "ratio sweep needs a single-relay template, got {} stations",
                self.base.n_stations()
            )));
        }
        if self.total_lengths_km.is_empty() || self.ratios.is_empty() || self.taus.is_empty() {
            return Err(Error::InvalidArgument(
                "sweep axes and tau list must be nonempty".into(),
            ));
        }
        for &l in &self.total_lengths_km {
            if !(l > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "total length must be > 0, got {l}"
                )));
            }
        }
        for &r in &self.ratios {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "ratio must lie strictly in (0, 1), got {r}"
                )));
            }
        }
        Ok(())
    }
}

/// One grid cell: ADEV per requested τ, or the recorded failure.
#[derive(Debug, Clone)]
pub struct GridRow {
    pub total_km: f64,
    pub ratio: f64,
    pub adev: Vec<f64>,
    pub error: Option<String>,
}

/// Evaluates the full ratio × length grid through the frequency-domain
/// engine. Cell failures are recorded in the row and the sweep continues.
pub fn ratio_length_grid(spec: &SweepSpec) -> Result<Vec<GridRow>> {
    spec.validate()?;
    let grid = default_grid();
    let mut rows = Vec::with_capacity(spec.total_lengths_km.len() * spec.ratios.len());
    for &total in &spec.total_lengths_km {
        for &ratio in &spec.ratios {
            let mut chain = spec.base.clone();
            chain.sublinks_km = vec![ratio * total, (1.0 - ratio) * total];
            let cell = residual_psd_chain(&chain, &grid).and_then(|psd| {
                psd_to_adev(&psd, chain.delivered_carrier_hz(), &spec.taus, DEFAULT_F_HIGH)
            });
            rows.push(match cell {
                Ok(curve) => GridRow {
                    total_km: total,
                    ratio,
                    adev: curve.sigmas,
                    error: None,
                },
                Err(e) => GridRow {
                    total_km: total,
                    ratio,
                    adev: Vec::new(),
                    error: Some(e.to_string()),
                },
            });
        }
    }
    Ok(rows)
}

/// Outcome of comparing an N-station chain with a cascade of independently
/// compensated spans over the same total length.
#[derive(Debug, Clone)]
pub struct ChainVsCascade {
    pub chain: AdevCurve,
    pub cascade: AdevCurve,
    /// True when the chain is at least as stable as the cascade at the
    /// first requested τ.
    pub chain_at_least_as_good: bool,
}

/// Evaluates both architectures over `total_km` of fiber with default
/// noise models: `n_mars` equally spaced relay stations vs `n_stages`
/// independently compensated equal spans.
pub fn chain_vs_cascade(
    base: &ChainTopology,
    total_km: f64,
    n_mars: usize,
    n_stages: usize,
    taus: &[f64],
) -> Result<ChainVsCascade> {
    if !(total_km > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "total length must be > 0, got {total_km}"
        )));
    }
    if n_mars < 1 || taus.is_empty() {
        return Err(Error::InvalidArgument(
            "need n_mars >= 1 and a nonempty tau list".into(),
        ));
    }
    let grid = default_grid();
    let n_links = n_mars + 1;
    let mut chain = base.clone();
    chain.sublinks_km = vec![total_km / n_links as f64; n_links];
    if chain.pll.len() != 1 {
        chain.pll = vec![*base.pll_for_any()];
    }
    let nu0 = chain.delivered_carrier_hz();
    let chain_psd = residual_psd_chain(&chain, &grid)?;
    let cascade_psd = cascaded_psd(&chain, n_stages, &grid)?;
    let chain_adev = psd_to_adev(&chain_psd, nu0, taus, DEFAULT_F_HIGH)?;
    let cascade_adev = psd_to_adev(&cascade_psd, nu0, taus, DEFAULT_F_HIGH)?;
    let chain_at_least_as_good = chain_adev.sigmas[0] <= cascade_adev.sigmas[0];
    Ok(ChainVsCascade {
        chain: chain_adev,
        cascade: cascade_adev,
        chain_at_least_as_good,
    })
}
