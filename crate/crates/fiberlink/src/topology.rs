//! Chain topology: local site → relay stations → remote site, with the
//! ordered fiber sub-links between them and the derived propagation delays.

use crate::error::{Error, Result};
use crate::noise::{NoiseFloorSpec, PowerLawCoeffs, RfSourceSpec};
use crate::pll::PllParams;

/// Signal propagation speed in the fiber, m/s.
pub const FIBER_VELOCITY: f64 = 2.0e8;

/// One-way propagation delay of a sub-link, seconds.
pub fn delay(length_km: f64) -> f64 {
    assert!(length_km >= 0.0, "negative sub-link length");
    1000.0 * length_km / FIBER_VELOCITY
}

/// Full description of a compensated transfer chain.
///
/// `sublinks_km` has N+1 entries for N relay stations; a single entry is a
/// plain single-span compensated link (the building block of the cascaded
/// scheme). Station k (1-based) sits between sub-links k-1 and k.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTopology {
    /// Distributed RF standard frequency ν (Hz); ω_r = 2πν. Station VCOs
    /// run at ω_r/2 and the delivered tone is at ν/2.
    pub carrier_hz: f64,
    /// Ordered sub-link lengths, LS side first, km.
    pub sublinks_km: Vec<f64>,
    /// Per-station loop constants; one entry is shared by all stations,
    /// otherwise the list must have one entry per station.
    pub pll: Vec<PllParams>,
    /// Per-km fiber noise coefficients (shared by all sub-links).
    pub fiber_noise: PowerLawCoeffs,
    /// Per-station noise floor.
    pub floor: NoiseFloorSpec,
    /// RF reference source noise.
    pub rf: RfSourceSpec,
}

impl ChainTopology {
    /// Chain with default noise models and shared default loop constants.
    pub fn with_defaults(sublinks_km: Vec<f64>) -> ChainTopology {
        ChainTopology {
            carrier_hz: 2.0e9,
            sublinks_km,
            pll: vec![PllParams::default()],
            fiber_noise: PowerLawCoeffs::default(),
            floor: NoiseFloorSpec::default(),
            rf: RfSourceSpec::default(),
        }
    }

    /// Number of relay stations N.
    pub fn n_stations(&self) -> usize {
        self.sublinks_km.len().saturating_sub(1)
    }

    /// Angular frequency of the distributed standard, rad/s.
    pub fn omega_r(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.carrier_hz
    }

    /// Frequency of the tone delivered at station outputs and at the remote
    /// site (half the standard; stations lock their VCOs at ω_r/2).
    pub fn delivered_carrier_hz(&self) -> f64 {
        self.carrier_hz / 2.0
    }

    /// One-way delays τ_0..τ_N of all sub-links, seconds.
    pub fn delays(&self) -> Vec<f64> {
        self.sublinks_km.iter().map(|&l| delay(l)).collect()
    }

    /// Loop constants of station `k` (1-based).
    pub fn pll_for(&self, k: usize) -> &PllParams {
        assert!(k >= 1 && k <= self.n_stations());
        if self.pll.len() == 1 {
            &self.pll[0]
        } else {
            &self.pll[k - 1]
        }
    }

    /// Checks all structural invariants, reporting the first failing field.
    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_hz > 0.0) {
            return Err(Error::Topology(format!(
                "carrier_hz must be > 0, got {}",
                self.carrier_hz
            )));
        }
        if self.sublinks_km.is_empty() {
            return Err(Error::Topology("no sub-links".into()));
        }
        for (i, &l) in self.sublinks_km.iter().enumerate() {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(Error::Topology(format!(
                    "sub-link {i} has invalid length {l}"
                )));
            }
        }
        let n = self.n_stations();
        if self.pll.is_empty() || (self.pll.len() != 1 && self.pll.len() != n) {
            return Err(Error::Topology(format!(
                "pll list must have 1 (shared) or {} entries, got {}",
                n,
                self.pll.len()
            )));
        }
        for (i, p) in self.pll.iter().enumerate() {
            p.validate().map_err(|e| {
                Error::Topology(format!("pll entry {i}: {e}"))
            })?;
        }
        self.fiber_noise.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delay_reference_values() {
        assert_eq!(delay(100.0), 5e-4);
        assert_eq!(delay(0.0), 0.0);
        assert!((delay(260.0) - 1.3e-3).abs() < 1e-18);
    }

    #[test]
    fn delay_linear_in_length() {
        for l in [0.5, 7.0, 123.0] {
            assert!((delay(3.0 * l) - 3.0 * delay(l)).abs() < 1e-18);
        }
    }

    #[test]
    fn field_config_validates() {
        let chain = ChainTopology::with_defaults(vec![260.0, 280.0]);
        assert!(chain.validate().is_ok());
        assert_eq!(chain.n_stations(), 1);
        assert_eq!(chain.delivered_carrier_hz(), 1.0e9);
    }

    #[test]
    fn empty_chain_rejected() {
        let chain = ChainTopology::with_defaults(vec![]);
        let err = chain.validate().unwrap_err().to_string();
        assert!(err.contains("no sub-links"));
    }

    #[test]
    fn negative_length_names_index() {
        let chain = ChainTopology::with_defaults(vec![100.0, -2.0, 50.0]);
        let err = chain.validate().unwrap_err().to_string();
        assert!(err.contains("sub-link 1"), "{err}");
    }

    #[test]
    fn pll_list_length_checked() {
        let mut chain = ChainTopology::with_defaults(vec![100.0, 100.0, 100.0]);
        chain.pll = vec![PllParams::default(); 3];
        let err = chain.validate().unwrap_err().to_string();
        assert!(err.contains("pll list"), "{err}");
        chain.pll = vec![PllParams::default(); 2];
        assert!(chain.validate().is_ok());
        assert_eq!(chain.pll_for(2), &chain.pll[1]);
    }

    #[test]
    fn single_span_is_legal() {
        let chain = ChainTopology::with_defaults(vec![540.0]);
        assert!(chain.validate().is_ok());
        assert_eq!(chain.n_stations(), 0);
    }
}
