//! Exact static lock algebra of the relay chain.
//!
//! With all loops settled and delays absorbed into the per-link offsets,
//! the last station locks its VCO to half the reference phase minus its
//! rear-link offset, and each earlier station's lock follows by
//! back-substitution. Reassembling the delivered signal at any tap then
//! cancels every link offset exactly, which is the point of the scheme.

use crate::error::{Error, Result};

/// Solved static phases of a chain: the reference phase φ_r, per-link
/// offsets φ_p,0..N, and the resulting station lock phases φ_c,1..N.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticPhaseState {
    pub phi_r: f64,
    pub phi_p: Vec<f64>,
    pub phi_c: Vec<f64>,
}

/// Output tap at which the recovered phase is assembled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tap {
    /// Remote site: the rear-link signal doubled back up to the reference
    /// frequency.
    RemoteSite,
    /// Stabilized output of relay station k (1-based, k < N).
    Mars(usize),
}

/// Computes the steady-state lock phases for N = `phi_p.len() - 1` ≥ 1
/// stations: `φ_cN = φ_r/2 − φ_pN`, then
/// `φ_ck = φ_r − φ_c,k+1 − φ_pk` for k = N−1..1.
pub fn solve_static_locks(phi_r: f64, phi_p: &[f64]) -> Result<StaticPhaseState> {
    if phi_p.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two link offsets (one station)".into(),
        ));
    }
    let n = phi_p.len() - 1;
    let mut phi_c = vec![0.0; n];
    phi_c[n - 1] = phi_r / 2.0 - phi_p[n];
    for k in (0..n - 1).rev() {
        phi_c[k] = phi_r - phi_c[k + 1] - phi_p[k + 1];
    }
    Ok(StaticPhaseState {
        phi_r,
        phi_p: phi_p.to_vec(),
        phi_c,
    })
}

/// Phase of the recovered reference at a tap. Identically φ_r for every
/// tap and any inputs — the cancellation is algebraically exact.
pub fn recovered_output_phase(state: &StaticPhaseState, tap: Tap) -> Result<f64> {
    let n = state.phi_c.len();
    match tap {
        Tap::RemoteSite => {
            // the rear link adds its offset once more; doubling restores ω_r
            Ok(2.0 * (state.phi_c[n - 1] + state.phi_p[n]))
        }
        Tap::Mars(k) => {
            if k < 1 || k >= n {
                return Err(Error::InvalidArgument(format!(
                    "tap must satisfy 1 <= k < N = {n}, got {k}"
                )));
            }
            Ok(state.phi_c[k - 1] + state.phi_c[k] + state.phi_p[k])
        }
    }
}
