//! Frequency-domain residual phase-noise spectra.
//!
//! Every relay station locks its VCO with a loop fed by round-trip
//! comparisons on the two adjacent sub-links, so the locked phases
//! φ_c,1..N(ω) satisfy a complex tridiagonal linear system per frequency:
//! each station couples only to its neighbours (through one-way delayed
//! corrections) and to itself (through its own round trips). Solving that
//! system per noise source gives the transfer coefficients from every
//! sub-link noise process and the RF source to the delivered output, and
//! the residual PSD follows by incoherent summation. For a single relay the
//! system collapses to one equation with a closed form that the generic
//! path must reproduce.

use crate::error::{Error, Result};
use crate::noise::{fiber_psd, floor_psd};
use crate::topology::ChainTopology;
use num_complex::Complex64;

/// Frequency grid paired with a one-sided phase-noise PSD, rad²/Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity {
    pub freqs: Vec<f64>,
    pub values: Vec<f64>,
}

impl SpectralDensity {
    pub fn new(freqs: Vec<f64>, values: Vec<f64>) -> Result<SpectralDensity> {
        if freqs.len() != values.len() {
            return Err(Error::InvalidArgument(
                "freqs and values must have equal length".into(),
            ));
        }
        for w in freqs.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidArgument(
                    "freqs must be strictly increasing".into(),
                ));
            }
        }
        if freqs.first().map_or(false, |&f| f <= 0.0) {
            return Err(Error::InvalidArgument("freqs must be > 0".into()));
        }
        for &v in &values {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "PSD values must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(SpectralDensity { freqs, values })
    }

    /// SSB representation L(f) = S/2, in dBc/Hz.
    pub fn to_dbc(&self) -> Vec<f64> {
        self.values.iter().map(|&s| 10.0 * (s / 2.0).log10()).collect()
    }
}

/// Logarithmic frequency grid with `points_per_decade` points per decade,
/// inclusive of both endpoints.
pub fn log_grid(fmin: f64, fmax: f64, points_per_decade: usize) -> Vec<f64> {
    assert!(fmin > 0.0 && fmax > fmin && points_per_decade > 0);
    let decades = (fmax / fmin).log10();
    let n = (decades * points_per_decade as f64).round() as usize;
    let mut grid: Vec<f64> = (0..=n)
        .map(|i| fmin * 10f64.powf(i as f64 / points_per_decade as f64))
        .collect();
    if let Some(last) = grid.last_mut() {
        *last = fmax;
    }
    grid
}

/// Default analysis grid: 10⁻⁶..10⁵ Hz, 200 points per decade. The decades
/// below a millihertz carry the slow environmental floor terms that set
/// long-τ stability.
pub fn default_grid() -> Vec<f64> {
    log_grid(1e-6, 1e5, 200)
}

/// sinc(x) = sin(x)/x (unnormalized), accurate near zero.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        1.0 - x2 / 6.0 * (1.0 - x2 / 20.0)
    } else {
        x.sin() / x
    }
}

/// 1 - sinc(x) without cancellation for small x.
fn one_minus_sinc(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        x2 / 6.0 - x2 * x2 / 120.0 + x2 * x2 * x2 / 5040.0
    } else {
        1.0 - x.sin() / x
    }
}

fn cis(phase: f64) -> Complex64 {
    Complex64::new(phase.cos(), phase.sin())
}

/// Closed-form residual PSD at the remote site for a single-relay chain
/// (exactly two sub-links). The relay loop sees its own correction return
/// after both adjacent round trips, giving the denominator
/// `D = 1 + G(e^{-j2ωτ₀} + e^{-j2ωτ₁})`; the front link enters with the
/// anti-correlated round-trip weight `√(2[1-sinc 2ωτ₀])`, the rear link
/// with the correlated weight `√(2[1+sinc 2ωτ₁])`.
pub fn residual_psd_single_mars(
    chain: &ChainTopology,
    freqs: &[f64],
) -> Result<SpectralDensity> {
    chain.validate()?;
    if chain.sublinks_km.len() != 2 {
        return Err(Error::Topology(format!(
            "single-relay form needs exactly 2 sub-links, got {}",
            chain.sublinks_km.len()
        )));
    }
    let taus = chain.delays();
    let (tau0, tau1) = (taus[0], taus[1]);
    let omega_r = chain.omega_r();
    let g_params = chain.pll_for(1);
    let floor = &chain.floor;

    let mut values = Vec::with_capacity(freqs.len());
    for &f in freqs {
        let (h_front, h_rear, h_rf) = single_mars_weights(g_params, tau0, tau1, f)?;
        let sp0 = fiber_psd(&chain.fiber_noise, chain.sublinks_km[0], omega_r, f);
        let sp1 = fiber_psd(&chain.fiber_noise, chain.sublinks_km[1], omega_r, f);
        let s_rf = chain.rf.psd_at(f);
        values.push(h_front * sp0 + h_rear * sp1 + h_rf * s_rf + floor_psd(floor, f));
    }
    SpectralDensity::new(freqs.to_vec(), values)
}

/// Squared transfer magnitudes of the single-relay closed form at one
/// frequency: weights applied to the front-link, rear-link and RF-source
/// PSDs respectively.
pub fn single_mars_weights(
    pll: &crate::pll::PllParams,
    tau0: f64,
    tau1: f64,
    f: f64,
) -> Result<(f64, f64, f64)> {
    let w = 2.0 * std::f64::consts::PI * f;
    let g = pll.open_loop_gain(w);
    let d = Complex64::new(1.0, 0.0) + g * (cis(-2.0 * w * tau0) + cis(-2.0 * w * tau1));
    if d.norm() == 0.0 || !d.is_finite() {
        return Err(Error::SingularSystem { freq: f });
    }
    let front_weight = (2.0 * one_minus_sinc(2.0 * w * tau0)).sqrt();
    let rear_weight = (2.0 * (1.0 + sinc(2.0 * w * tau1))).sqrt();
    let h_front = (g * cis(-w * tau1) * front_weight / d).norm_sqr();
    let h_rear = (Complex64::new(1.0, 0.0) - g * cis(-w * tau1) * rear_weight / d).norm_sqr();
    let h_rf = (Complex64::new(1.0, 0.0) - 2.0 * g * cis(-w * (tau0 + tau1)) / d).norm_sqr();
    Ok((h_front, h_rear, h_rf))
}

/// Complex tridiagonal system in the station unknowns φ_c,1..N at one
/// frequency, with one right-hand side per noise source (sub-link noises
/// φ_p,0..N first, RF source last).
#[derive(Debug, Clone)]
pub struct ChainSystem {
    pub freq: f64,
    /// Sub-diagonal (length N, first entry unused).
    pub sub: Vec<Complex64>,
    /// Diagonal (length N).
    pub diag: Vec<Complex64>,
    /// Super-diagonal (length N, last entry unused).
    pub sup: Vec<Complex64>,
    /// One RHS column per source: N+1 sub-link sources, then the RF source.
    pub rhs: Vec<Vec<Complex64>>,
}

/// Station transfer solutions: `x[source][station]` is φ_c,station per unit
/// source amplitude, sources ordered as in [`ChainSystem::rhs`].
#[derive(Debug, Clone)]
pub struct TransferSet {
    pub freq: f64,
    pub x: Vec<Vec<Complex64>>,
}

/// Builds the per-frequency tridiagonal system for a chain with N ≥ 1
/// stations. Station 1 compares against the local site (front round trip in
/// its own diagonal, anti-correlated front-link weight), interior stations
/// compare their two neighbours' delayed corrections, and station N closes
/// the loop over the far round trip (correlated rear-link weight). For
/// N = 1 the first and last conditions merge into a single equation.
pub fn build_chain_system(chain: &ChainTopology, omega: f64) -> Result<ChainSystem> {
    chain.validate()?;
    let n = chain.n_stations();
    if n < 1 {
        return Err(Error::Topology(
            "chain system needs at least one station".into(),
        ));
    }
    if !(omega > 0.0) {
        return Err(Error::InvalidArgument("omega must be > 0".into()));
    }
    let taus = chain.delays();
    let w = omega;
    let n_sources = n + 2; // N+1 sub-links plus RF

    let mut sub = vec![Complex64::new(0.0, 0.0); n];
    let mut diag = vec![Complex64::new(0.0, 0.0); n];
    let mut sup = vec![Complex64::new(0.0, 0.0); n];
    let mut rhs = vec![vec![Complex64::new(0.0, 0.0); n]; n_sources];
    let rf = n_sources - 1;

    if n == 1 {
        let g = chain.pll_for(1).open_loop_gain(w);
        diag[0] = Complex64::new(1.0, 0.0)
            + g * (cis(-2.0 * w * taus[0]) + cis(-2.0 * w * taus[1]));
        rhs[0][0] = g * (2.0 * one_minus_sinc(2.0 * w * taus[0])).sqrt();
        rhs[1][0] = -g * (2.0 * (1.0 + sinc(2.0 * w * taus[1]))).sqrt();
        rhs[rf][0] = g * cis(-w * taus[0]);
        return Ok(ChainSystem {
            freq: w / (2.0 * std::f64::consts::PI),
            sub,
            diag,
            sup,
            rhs,
        });
    }

    // Station 1: round trip to the local site plus the correction arriving
    // from station 2.
    {
        let g = chain.pll_for(1).open_loop_gain(w);
        diag[0] = Complex64::new(1.0, 0.0) + g * cis(-2.0 * w * taus[0]);
        sup[0] = g * cis(-w * taus[1]);
        rhs[0][0] = g * (2.0 * one_minus_sinc(2.0 * w * taus[0])).sqrt();
        rhs[1][0] = -g;
        rhs[rf][0] = g * cis(-w * taus[0]);
    }
    // Interior stations compare the corrections of both neighbours.
    for k in 2..n {
        let g = chain.pll_for(k).open_loop_gain(w);
        let i = k - 1;
        sub[i] = -g * cis(-w * taus[k - 1]);
        diag[i] = Complex64::new(1.0, 0.0);
        sup[i] = g * cis(-w * taus[k]);
        rhs[k - 1][i] = g;
        rhs[k][i] = -g;
    }
    // Station N: correction from station N-1 plus its own far round trip.
    {
        let g = chain.pll_for(n).open_loop_gain(w);
        let i = n - 1;
        sub[i] = -g * cis(-w * taus[n - 1]);
        diag[i] = Complex64::new(1.0, 0.0) + g * cis(-2.0 * w * taus[n]);
        rhs[n - 1][i] = g;
        rhs[n][i] = -g * (2.0 * (1.0 + sinc(2.0 * w * taus[n]))).sqrt();
    }

    Ok(ChainSystem {
        freq: w / (2.0 * std::f64::consts::PI),
        sub,
        diag,
        sup,
        rhs,
    })
}

/// Thomas elimination for one complex tridiagonal right-hand side.
fn solve_tridiagonal(
    sub: &[Complex64],
    diag: &[Complex64],
    sup: &[Complex64],
    b: &[Complex64],
    freq: f64,
) -> Result<Vec<Complex64>> {
    let n = diag.len();
    let mut c = vec![Complex64::new(0.0, 0.0); n];
    let mut d = vec![Complex64::new(0.0, 0.0); n];
    let mut denom = diag[0];
    if denom.norm() < 1e-300 {
        return Err(Error::SingularSystem { freq });
    }
    if n > 1 {
        c[0] = sup[0] / denom;
    }
    d[0] = b[0] / denom;
    for i in 1..n {
        denom = diag[i] - sub[i] * c[i - 1];
        if denom.norm() < 1e-300 || !denom.is_finite() {
            return Err(Error::SingularSystem { freq });
        }
        if i + 1 < n {
            c[i] = sup[i] / denom;
        }
        d[i] = (b[i] - sub[i] * d[i - 1]) / denom;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        let xi = x[i] - c[i] * x[i + 1];
        x[i] = xi;
    }
    Ok(x)
}

/// Solves the system for every source and verifies each solution's residual
/// `‖Ax−b‖/‖b‖ < 1e-10`.
pub fn solve_transfer_set(system: &ChainSystem) -> Result<TransferSet> {
    let n = system.diag.len();
    let mut x_all = Vec::with_capacity(system.rhs.len());
    for b in &system.rhs {
        let x = solve_tridiagonal(&system.sub, &system.diag, &system.sup, b, system.freq)?;
        // residual check
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            let mut ax = system.diag[i] * x[i];
            if i > 0 {
                ax += system.sub[i] * x[i - 1];
            }
            if i + 1 < n {
                ax += system.sup[i] * x[i + 1];
            }
            num += (ax - b[i]).norm_sqr();
            den += b[i].norm_sqr();
        }
        if den > 0.0 && num.sqrt() / den.sqrt() > 1e-10 {
            return Err(Error::SingularSystem { freq: system.freq });
        }
        x_all.push(x);
    }
    Ok(TransferSet {
        freq: system.freq,
        x: x_all,
    })
}

/// Residual PSD at the remote site via the generic chain solver, valid for
/// any N ≥ 1. The remote site receives station N's correction delayed by
/// the last sub-link plus that link's own noise; doubling to the standard
/// frequency doubles the RF-source transfer. Noise sources are mutually
/// uncorrelated, so contributions add in power. The floor enters as N
/// independent station floors.
pub fn residual_psd_chain_generic(
    chain: &ChainTopology,
    freqs: &[f64],
) -> Result<SpectralDensity> {
    chain.validate()?;
    let n = chain.n_stations();
    if n < 1 {
        return Err(Error::Topology("need at least one station".into()));
    }
    let taus = chain.delays();
    let omega_r = chain.omega_r();
    let mut link_psds = vec![0.0; n + 1];
    let mut values = Vec::with_capacity(freqs.len());
    for &f in freqs {
        let w = 2.0 * std::f64::consts::PI * f;
        let system = build_chain_system(chain, w)?;
        let ts = solve_transfer_set(&system)?;
        for (k, s) in link_psds.iter_mut().enumerate() {
            *s = fiber_psd(&chain.fiber_noise, chain.sublinks_km[k], omega_r, f);
        }
        let e_last = cis(-w * taus[n]);
        let mut total = 0.0;
        for k in 0..=n {
            let mut t = ts.x[k][n - 1] * e_last;
            if k == n {
                t += Complex64::new(1.0, 0.0);
            }
            total += t.norm_sqr() * link_psds[k];
        }
        let t_rf = 2.0 * ts.x[n + 1][n - 1] * e_last - Complex64::new(1.0, 0.0);
        total += t_rf.norm_sqr() * chain.rf.psd_at(f);
        total += n as f64 * floor_psd(&chain.floor, f);
        values.push(total);
    }
    SpectralDensity::new(freqs.to_vec(), values)
}

/// Residual PSD at the remote site. Chains with one station use the closed
/// form; longer chains the tridiagonal solver; a station-less single span
/// is treated as a compensated span with a zero-length rear link.
pub fn residual_psd_chain(chain: &ChainTopology, freqs: &[f64]) -> Result<SpectralDensity> {
    match chain.n_stations() {
        0 => {
            let mut span = chain.clone();
            span.sublinks_km = vec![chain.sublinks_km[0], 0.0];
            residual_psd_single_mars(&span, freqs)
        }
        1 => residual_psd_single_mars(chain, freqs),
        _ => residual_psd_chain_generic(chain, freqs),
    }
}

/// Residual PSD of the stabilized output of interior station `k` (1-based,
/// k < N): its own correction plus the delayed correction of station k+1
/// plus the joining sub-link's noise. The floor counts the k+1 stations on
/// the path from the local site. The last station's output has no closed
/// analytic form here and is available through the time-domain simulation
/// only.
pub fn mars_output_psd(
    chain: &ChainTopology,
    station: usize,
    freqs: &[f64],
) -> Result<SpectralDensity> {
    chain.validate()?;
    let n = chain.n_stations();
    if station < 1 || station >= n {
        return Err(Error::InvalidArgument(format!(
            "station must satisfy 1 <= k < N = {n}, got {station}"
        )));
    }
    let taus = chain.delays();
    let omega_r = chain.omega_r();
    let k = station;
    let mut values = Vec::with_capacity(freqs.len());
    for &f in freqs {
        let w = 2.0 * std::f64::consts::PI * f;
        let system = build_chain_system(chain, w)?;
        let ts = solve_transfer_set(&system)?;
        let e_k = cis(-w * taus[k]);
        let mut total = 0.0;
        for s in 0..=n {
            let mut t = ts.x[s][k - 1] + e_k * ts.x[s][k];
            if s == k {
                t += Complex64::new(1.0, 0.0);
            }
            total += t.norm_sqr() * fiber_psd(&chain.fiber_noise, chain.sublinks_km[s], omega_r, f);
        }
        let t_rf = ts.x[n + 1][k - 1] + e_k * ts.x[n + 1][k] - Complex64::new(1.0, 0.0);
        total += t_rf.norm_sqr() * chain.rf.psd_at(f);
        total += (k + 1) as f64 * floor_psd(&chain.floor, f);
        values.push(total);
    }
    SpectralDensity::new(freqs.to_vec(), values)
}

/// Uncompensated reference: raw accumulated fiber noise of all sub-links
/// plus the source and one measurement floor.
pub fn free_running_psd(chain: &ChainTopology, freqs: &[f64]) -> Result<SpectralDensity> {
    chain.validate()?;
    let omega_r = chain.omega_r();
    let total_km: f64 = chain.sublinks_km.iter().sum();
    let values = freqs
        .iter()
        .map(|&f| {
            fiber_psd(&chain.fiber_noise, total_km, omega_r, f)
                + chain.rf.psd_at(f)
                + floor_psd(&chain.floor, f)
        })
        .collect();
    SpectralDensity::new(freqs.to_vec(), values)
}

/// Cascaded scheme over the chain's total length: `stages` independently
/// compensated equal spans in series (each a compensated span with a
/// zero-length rear link, regenerating the tone for the next span);
/// independent residuals add in power.
pub fn cascaded_psd(
    chain: &ChainTopology,
    stages: usize,
    freqs: &[f64],
) -> Result<SpectralDensity> {
    if stages < 1 {
        return Err(Error::InvalidArgument("stages must be >= 1".into()));
    }
    chain.validate()?;
    let total_km: f64 = chain.sublinks_km.iter().sum();
    let mut stage = chain.clone();
    stage.sublinks_km = vec![total_km / stages as f64, 0.0];
    stage.pll = vec![*chain.pll_for_any()];
    let single = residual_psd_single_mars(&stage, freqs)?;
    let values = single.values.iter().map(|&s| s * stages as f64).collect();
    SpectralDensity::new(freqs.to_vec(), values)
}

impl ChainTopology {
    /// A loop-constant set usable for derived single-station configurations
    /// (the shared entry, or the first station's).
    pub fn pll_for_any(&self) -> &crate::pll::PllParams {
        &self.pll[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{NoiseFloorSpec, PowerLawCoeffs, RfSourceSpec};
    use crate::pll::PllParams;

    fn two_span(l0: f64, l1: f64) -> ChainTopology {
        ChainTopology::with_defaults(vec![l0, l1])
    }

    #[test]
    fn grid_shape() {
        let g = log_grid(1e-2, 1e3, 10);
        assert_eq!(g.len(), 51);
        assert_eq!(g[0], 1e-2);
        assert_eq!(*g.last().unwrap(), 1e3);
        let d = default_grid();
        assert_eq!(d.len(), 11 * 200 + 1);
    }

    #[test]
    fn sinc_behaviour() {
        assert_eq!(sinc(0.0), 1.0);
        assert!((sinc(1e-5) - (1.0 - 1e-10 / 6.0)).abs() < 1e-18);
        assert!((sinc(2.0) - 2f64.sin() / 2.0).abs() < 1e-15);
        // leading term x²/6; next correction is x⁴/120 ≈ 8e-19 here
        assert!((one_minus_sinc(1e-4) - 1e-8 / 6.0).abs() < 2e-18);
    }

    #[test]
    fn open_loop_reduces_to_rear_link_noise() {
        // With G = 0 the relay does nothing: the output sees the rear link
        // raw, the front link not at all.
        let mut chain = two_span(100.0, 100.0);
        chain.pll = vec![PllParams {
            k_p: 1e-300,
            k_i: 0.0,
            ..PllParams::default()
        }];
        let freqs = [0.01, 1.0, 100.0];
        let got = residual_psd_single_mars(&chain, &freqs).unwrap();
        for (i, &f) in freqs.iter().enumerate() {
            let expect = fiber_psd(&chain.fiber_noise, 100.0, chain.omega_r(), f)
                + floor_psd(&chain.floor, f);
            assert!((got.values[i] - expect).abs() / expect < 1e-9);
        }
    }

    #[test]
    fn front_link_transparent_at_dc() {
        // The front-link transfer weight vanishes ~f² as f -> 0 (passive
        // compensation: the local site pre-cancels what it will see return).
        let p = PllParams::default();
        let tau = crate::topology::delay(100.0);
        let (w_lo, _, _) = single_mars_weights(&p, tau, tau, 1e-8).unwrap();
        let (w_hi, _, _) = single_mars_weights(&p, tau, tau, 1e-6).unwrap();
        assert!(w_lo > 0.0);
        let ratio = w_lo / w_hi;
        assert!((ratio - 1e-4).abs() / 1e-4 < 1e-2, "ratio {ratio:e}");
    }

    #[test]
    fn symmetric_low_freq_limit() {
        // τ0 = τ1, large |G|, ω -> 0: the rear-link suppression tends to
        // |1 - 2G/(1+2G)|² = 1/|1+2G|².
        // Short links and moderate frequency keep the delay phase ωτ far
        // below 1/|2G| so the symbolic limit is numerically visible.
        let p = PllParams::default();
        let tau = crate::topology::delay(0.05);
        let f = 10.0;
        let (_, h_rear, _) = single_mars_weights(&p, tau, tau, f).unwrap();
        let g = p.open_loop_gain(2.0 * std::f64::consts::PI * f);
        assert!(g.norm() > 10.0);
        let expect = 1.0 / (Complex64::new(1.0, 0.0) + 2.0 * g).norm_sqr();
        assert!(
            (h_rear - expect).abs() / expect < 0.01,
            "{h_rear:e} vs {expect:e}"
        );
    }

    #[test]
    fn generic_solver_matches_closed_form_for_one_station() {
        let chain = two_span(120.0, 80.0);
        let freqs = log_grid(1e-6, 1e5, 40);
        let closed = residual_psd_single_mars(&chain, &freqs).unwrap();
        let generic = residual_psd_chain_generic(&chain, &freqs).unwrap();
        for i in 0..freqs.len() {
            let rel = (closed.values[i] - generic.values[i]).abs() / closed.values[i];
            assert!(rel < 1e-10, "rel {rel:e} at {} Hz", freqs[i]);
        }
    }

    #[test]
    fn all_zero_gain_system_is_identity() {
        let mut chain = ChainTopology::with_defaults(vec![10.0, 10.0, 10.0]);
        chain.pll = vec![PllParams {
            k_p: 1e-300,
            k_i: 0.0,
            ..PllParams::default()
        }];
        let sys = build_chain_system(&chain, 1.0).unwrap();
        for i in 0..2 {
            assert!((sys.diag[i] - Complex64::new(1.0, 0.0)).norm() < 1e-290);
        }
        for rhs in &sys.rhs {
            for v in rhs {
                assert!(v.norm() < 1e-290);
            }
        }
    }

    #[test]
    fn two_station_system_shape() {
        let chain = ChainTopology::with_defaults(vec![100.0, 50.0, 100.0]);
        let w = 2.0 * std::f64::consts::PI * 10.0;
        let sys = build_chain_system(&chain, w).unwrap();
        assert_eq!(sys.diag.len(), 2);
        let g = chain.pll_for(1).open_loop_gain(w);
        let taus = chain.delays();
        // off-diagonal couplings are one-way-delayed loop gains
        assert!((sys.sup[0] - g * cis(-w * taus[1])).norm() < 1e-12 * g.norm());
        assert!((sys.sub[1] + g * cis(-w * taus[1])).norm() < 1e-12 * g.norm());
        // deterministic
        let sys2 = build_chain_system(&chain, w).unwrap();
        assert_eq!(sys.diag, sys2.diag);
        assert_eq!(sys.rhs, sys2.rhs);
    }

    #[test]
    fn tridiagonal_matches_dense_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let n = 5;
            let mut sub = vec![Complex64::new(0.0, 0.0); n];
            let mut diag = vec![Complex64::new(0.0, 0.0); n];
            let mut sup = vec![Complex64::new(0.0, 0.0); n];
            let mut b = vec![Complex64::new(0.0, 0.0); n];
            let c = |rng: &mut rand_chacha::ChaCha8Rng| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            };
            for i in 0..n {
                sub[i] = c(&mut rng);
                sup[i] = c(&mut rng);
                diag[i] = c(&mut rng) + Complex64::new(4.0, 0.0); // diagonally dominant
                b[i] = c(&mut rng);
            }
            let x = solve_tridiagonal(&sub, &diag, &sup, &b, 1.0).unwrap();

            // dense Gaussian elimination oracle
            let mut a = vec![vec![Complex64::new(0.0, 0.0); n]; n];
            for i in 0..n {
                a[i][i] = diag[i];
                if i > 0 {
                    a[i][i - 1] = sub[i];
                }
                if i + 1 < n {
                    a[i][i + 1] = sup[i];
                }
            }
            let mut bb = b.clone();
            for col in 0..n {
                let piv = (col..n)
                    .max_by(|&p, &q| a[p][col].norm().total_cmp(&a[q][col].norm()))
                    .unwrap();
                a.swap(col, piv);
                bb.swap(col, piv);
                for row in col + 1..n {
                    let factor = a[row][col] / a[col][col];
                    for j in col..n {
                        let v = a[col][j];
                        a[row][j] -= factor * v;
                    }
                    let v = bb[col];
                    bb[row] -= factor * v;
                }
            }
            let mut y = vec![Complex64::new(0.0, 0.0); n];
            for i in (0..n).rev() {
                let mut s = bb[i];
                for j in i + 1..n {
                    s -= a[i][j] * y[j];
                }
                y[i] = s / a[i][i];
            }
            for i in 0..n {
                assert!((x[i] - y[i]).norm() < 1e-12, "row {i}");
            }
        }
    }

    #[test]
    fn chain_psd_finite_and_nonnegative() {
        let chain = ChainTopology::with_defaults(vec![100.0, 100.0, 100.0, 100.0]);
        let freqs = log_grid(1e-6, 1e5, 20);
        let psd = residual_psd_chain(&chain, &freqs).unwrap();
        for &v in &psd.values {
            assert!(v.is_finite() && v >= 0.0);
        }
    }

    #[test]
    fn chain_with_zero_fiber_noise_is_floor_only() {
        let mut chain = ChainTopology::with_defaults(vec![100.0, 100.0, 100.0]);
        chain.fiber_noise = PowerLawCoeffs::ZERO;
        chain.rf = RfSourceSpec::default();
        let freqs = [0.1, 10.0];
        let psd = residual_psd_chain(&chain, &freqs).unwrap();
        for (i, &f) in freqs.iter().enumerate() {
            let expect = 2.0 * floor_psd(&chain.floor, f);
            assert!((psd.values[i] - expect).abs() / expect < 1e-12);
        }
    }

    #[test]
    fn interior_station_output_cleaner_than_remote_end() {
        // Symmetric two-station chain: the first station's output is at
        // least as stable as the remote end below the first servo bump.
        let chain = ChainTopology::with_defaults(vec![30.0, 30.0, 30.0]);
        let freqs = log_grid(1e-4, 50.0, 20);
        let mid = mars_output_psd(&chain, 1, &freqs).unwrap();
        let end = residual_psd_chain(&chain, &freqs).unwrap();
        for i in 0..freqs.len() {
            assert!(
                mid.values[i] <= end.values[i] * 1.0001,
                "at {} Hz: {:e} vs {:e}",
                freqs[i],
                mid.values[i],
                end.values[i]
            );
        }
    }

    #[test]
    fn last_station_output_rejected() {
        let chain = ChainTopology::with_defaults(vec![100.0, 100.0]);
        assert!(mars_output_psd(&chain, 1, &[1.0]).is_err());
        let chain3 = ChainTopology::with_defaults(vec![100.0, 100.0, 100.0]);
        assert!(mars_output_psd(&chain3, 2, &[1.0]).is_err());
        assert!(mars_output_psd(&chain3, 1, &[1.0]).is_ok());
    }

    #[test]
    fn free_running_additivity() {
        let freqs = [1e-3, 1.0, 1e3];
        let a = free_running_psd(&ChainTopology::with_defaults(vec![260.0]), &freqs).unwrap();
        let b = free_running_psd(&ChainTopology::with_defaults(vec![280.0]), &freqs).unwrap();
        let c = free_running_psd(&ChainTopology::with_defaults(vec![540.0]), &freqs).unwrap();
        let floor: Vec<f64> = freqs
            .iter()
            .map(|&f| floor_psd(&NoiseFloorSpec::default(), f))
            .collect();
        for i in 0..freqs.len() {
            let sum = a.values[i] + b.values[i] - floor[i];
            assert!((sum - c.values[i]).abs() / c.values[i] < 1e-12);
        }
    }

    #[test]
    fn compensation_suppresses_fiber_noise_by_30_db() {
        // With the station floor switched off so it cannot mask the fiber
        // contribution, the compensated 1 Hz PSD sits > 30 dB below the
        // free-running link.
        let mut chain = ChainTopology::with_defaults(vec![260.0, 280.0]);
        chain.floor = NoiseFloorSpec::OFF;
        let f = [1.0];
        let free = free_running_psd(&chain, &f).unwrap().values[0];
        let comp = residual_psd_chain(&chain, &f).unwrap().values[0];
        assert!(10.0 * (free / comp).log10() > 30.0, "{free:e} vs {comp:e}");
    }

    #[test]
    fn one_stage_cascade_equals_single_span() {
        let chain = ChainTopology::with_defaults(vec![200.0]);
        let freqs = log_grid(1e-4, 1e4, 10);
        let cas = cascaded_psd(&chain, 1, &freqs).unwrap();
        let span = residual_psd_chain(&chain, &freqs).unwrap();
        assert_eq!(cas.values, span.values);
    }

    #[test]
    fn cascade_stages_scale_psd_linearly() {
        let chain = ChainTopology::with_defaults(vec![3000.0]);
        let freqs = [1e-3, 1.0, 100.0];
        let one = cascaded_psd(&ChainTopology::with_defaults(vec![100.0]), 1, &freqs).unwrap();
        let thirty = cascaded_psd(&chain, 30, &freqs).unwrap();
        for i in 0..freqs.len() {
            assert!((thirty.values[i] - 30.0 * one.values[i]).abs() / thirty.values[i] < 1e-12);
        }
    }

    #[test]
    fn dbc_conversion() {
        let sd = SpectralDensity::new(vec![1.0], vec![3.1698e-8]).unwrap();
        assert!((sd.to_dbc()[0] + 78.0).abs() < 0.01);
    }
}
