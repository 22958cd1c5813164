//! Time-domain simulation of the full compensation chain: transport-delay
//! lines, phase detectors, PI controllers and VCO integrators, with colored
//! link noise injected identically into forward and backward traversals
//! (reciprocity). Provides an independent check of the frequency-domain
//! engine and the only route to the last station's stabilized output.
//!
//! Everything runs in baseband phase deviations: frequencies are
//! pre-matched and φ_r ≡ 0, so every reported series is directly the
//! residual against the reference.

use crate::error::{Error, Result};
use crate::noise::{fiber_psd, floor_psd, synthesize_series};
use crate::topology::ChainTopology;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Minimum number of samples per nonzero transport delay.
const MIN_SAMPLES_PER_DELAY: f64 = 20.0;
/// Allowed delay rounding error, fraction of the delay.
const MAX_DELAY_ROUNDING: f64 = 0.05;
/// Phase magnitude treated as divergence of the loop.
const DIVERGENCE_THRESHOLD: f64 = 1e6;

/// Configuration of one simulation run.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub chain: ChainTopology,
    /// Requested sample rate, Hz; raised automatically until every nonzero
    /// sub-link delay spans at least 20 samples.
    pub sample_rate: f64,
    /// Simulated span, s.
    pub duration: f64,
    pub seed: u64,
    /// Initial transient to discard in analyses, s.
    pub settle_time: f64,
    /// Initial VCO phase offset applied to every station, rad. Zero keeps
    /// a noiseless chain exactly at lock from the start.
    pub initial_offset_rad: f64,
    /// When set, replaces the synthesized link noise with constant per-link
    /// phase offsets (one per sub-link) for static cross-checks.
    pub static_link_offsets: Option<Vec<f64>>,
    /// Record the stabilized output of every station in addition to the
    /// remote-site residual (memory-heavy on long runs).
    pub record_mars_outputs: bool,
}

impl SimConfig {
    pub fn new(chain: ChainTopology, duration: f64, seed: u64) -> SimConfig {
        SimConfig {
            chain,
            sample_rate: 1e4,
            duration,
            seed,
            settle_time: (duration / 10.0).min(10.0),
            initial_offset_rad: 0.0,
            static_link_offsets: None,
            record_mars_outputs: false,
        }
    }

    /// Smallest nonzero one-way sub-link delay, if any.
    fn min_nonzero_delay(&self) -> Option<f64> {
        self.chain
            .delays()
            .into_iter()
            .filter(|&t| t > 0.0)
            .min_by(f64::total_cmp)
    }

    /// Sample rate actually used: the requested rate times the smallest
    /// integer factor that resolves the shortest nonzero delay with at
    /// least 20 samples.
    pub fn effective_sample_rate(&self) -> f64 {
        match self.min_nonzero_delay() {
            Some(tau) => {
                let factor = (MIN_SAMPLES_PER_DELAY / (self.sample_rate * tau)).ceil();
                self.sample_rate * factor.max(1.0)
            }
            None => self.sample_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.chain.validate()?;
        if !(self.sample_rate > 0.0) {
            return Err(Error::InvalidArgument("sample_rate must be > 0".into()));
        }
        if !(self.duration > self.settle_time) || self.settle_time < 0.0 {
            return Err(Error::InvalidArgument(
                "need duration > settle_time >= 0".into(),
            ));
        }
        if let Some(offsets) = &self.static_link_offsets {
            if offsets.len() != self.chain.sublinks_km.len() {
                return Err(Error::InvalidArgument(format!(
                    "static_link_offsets needs one entry per sub-link ({}), got {}",
                    self.chain.sublinks_km.len(),
                    offsets.len()
                )));
            }
        }
        if self.chain.n_stations() < 1 {
            return Err(Error::Topology(
                "simulation needs at least one station".into(),
            ));
        }
        let fs = self.effective_sample_rate();
        for tau in self.chain.delays() {
            if tau == 0.0 {
                continue;
            }
            let rounded = (tau * fs).round() / fs;
            let rel_err = (rounded - tau).abs() / tau;
            if rel_err > MAX_DELAY_ROUNDING {
                return Err(Error::UnresolvableDelay {
                    delay: tau,
                    sample_rate: fs,
                    rel_err: rel_err * 100.0,
                });
            }
        }
        Ok(())
    }
}

/// Result of one run; all series are at [`SimResult::sample_rate`] and
/// include the settle transient (first [`SimResult::settle_samples`]
/// points).
#[derive(Debug, Clone)]
pub struct SimResult {
    pub sample_rate: f64,
    pub settle_samples: usize,
    /// Residual phase at the remote site, rad.
    pub rs_residual: Vec<f64>,
    /// Residual phase of each station's stabilized output, rad
    /// (stations 1..N); empty unless requested.
    pub mars_outputs: Vec<Vec<f64>>,
    /// Final VCO phases φ_c,1..N, rad.
    pub final_station_phases: Vec<f64>,
}

/// One-station history ring buffer.
struct Ring {
    buf: Vec<f64>,
    mask: usize,
}

impl Ring {
    fn new(capacity: usize, fill: f64) -> Ring {
        let cap = capacity.next_power_of_two();
        Ring {
            buf: vec![fill; cap],
            mask: cap - 1,
        }
    }
    #[inline]
    fn put(&mut self, i: usize, v: f64) {
        self.buf[i & self.mask] = v;
    }
    /// Value at step `i - d`; before the start of time returns the fill
    /// value still present in the buffer.
    #[inline]
    fn get(&self, i: usize, d: usize) -> f64 {
        self.buf[i.wrapping_sub(d) & self.mask]
    }
}

enum LinkNoise {
    None,
    Static(f64),
    Series(Vec<f64>),
}

impl LinkNoise {
    #[inline]
    fn at(&self, i: isize) -> f64 {
        match self {
            LinkNoise::None => 0.0,
            LinkNoise::Static(v) => *v,
            LinkNoise::Series(s) => {
                if i < 0 {
                    0.0
                } else {
                    s[i as usize]
                }
            }
        }
    }
}

/// Runs the time-domain simulation.
///
/// Per station the loop integrates
/// `v = K_PFD·ε`, `u = K_P·v + K_I·∫v`, `dφ_c/dt = −K_VCO·u`
/// with ε assembled from delayed neighbour corrections and link noise:
/// the first station sees its own front round trip and the anti-correlated
/// front-link noise difference, interior stations compare the two
/// neighbours' one-way-delayed corrections, and the last station sees its
/// far round trip with the correlated rear-link noise sum. Link noise is
/// injected lumped at the link output per traversal (valid well below 1/τ,
/// the band the stability numbers live in).
pub fn simulate(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let chain = &cfg.chain;
    let n_st = chain.n_stations();
    let fs = cfg.effective_sample_rate();
    let dt = 1.0 / fs;
    let n = (cfg.duration * fs).round() as usize;
    let settle_samples = (cfg.settle_time * fs).round() as usize;
    let taus = chain.delays();
    let omega_r = chain.omega_r();

    // delays in samples: one-way d[k] per sub-link, round trips for the
    // first and last station
    let d: Vec<usize> = taus.iter().map(|&t| (t * fs).round() as usize).collect();
    let r_front = (2.0 * taus[0] * fs).round() as usize;
    let r_rear = (2.0 * taus[n_st] * fs).round() as usize;

    // deterministic sub-seed schedule: links, RF, remote-site floor,
    // station floors
    let mut seeder = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut next_seed = || seeder.next_u64();
    let n_fft = n.next_power_of_two().max(8);

    let mut links: Vec<LinkNoise> = Vec::with_capacity(n_st + 1);
    for k in 0..=n_st {
        let seed = next_seed();
        if let Some(offsets) = &cfg.static_link_offsets {
            links.push(LinkNoise::Static(offsets[k]));
            continue;
        }
        let length = chain.sublinks_km[k];
        if length == 0.0 || chain.fiber_noise.is_zero() {
            links.push(LinkNoise::None);
            continue;
        }
        let target = |f: f64| fiber_psd(&chain.fiber_noise, length, omega_r, f);
        let mut series = synthesize_series(&target, fs, n_fft, seed)?;
        series.truncate(n);
        series.shrink_to_fit();
        links.push(LinkNoise::Series(series));
    }
    let rf_seed = next_seed();
    let rf = match &chain.rf.psd {
        Some(coeffs) if !coeffs.is_zero() && cfg.static_link_offsets.is_none() => {
            let c = *coeffs;
            let mut series = synthesize_series(&|f| c.eval(f), fs, n_fft, rf_seed)?;
            series.truncate(n);
            series.shrink_to_fit();
            LinkNoise::Series(series)
        }
        _ => LinkNoise::None,
    };
    let floor_on = cfg.static_link_offsets.is_none()
        && (chain.floor.white_ssb_dbc_per_hz.is_some() || !chain.floor.extra.is_zero());
    let mut floor_series = |seed: u64| -> Result<LinkNoise> {
        if !floor_on {
            return Ok(LinkNoise::None);
        }
        let spec = chain.floor;
        let mut series = synthesize_series(&|f| floor_psd(&spec, f), fs, n_fft, seed)?;
        series.truncate(n);
        series.shrink_to_fit();
        Ok(LinkNoise::Series(series))
    };
    let rs_floor_seed = next_seed();
    let mars_floor_seeds: Vec<u64> = (0..n_st).map(|_| next_seed()).collect();
    let rs_floor = floor_series(rs_floor_seed)?;
    let mars_floors: Vec<LinkNoise> = if cfg.record_mars_outputs {
        mars_floor_seeds
            .into_iter()
            .map(&mut floor_series)
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    // station state
    let max_delay = d.iter().copied().max().unwrap_or(0).max(r_front).max(r_rear);
    let mut hist: Vec<Ring> = (0..n_st)
        .map(|_| Ring::new(max_delay + 1, cfg.initial_offset_rad))
        .collect();
    let mut acc = vec![0.0; n_st];
    let mut cur = vec![cfg.initial_offset_rad; n_st];
    let gains: Vec<(f64, f64, f64)> = (1..=n_st)
        .map(|k| {
            let p = chain.pll_for(k);
            (
                dt * p.k_vco * p.k_p * p.k_pfd, // proportional path per step
                p.k_pfd * dt,                   // integrator input per step
                dt * p.k_vco * p.k_i,           // integral path per step
            )
        })
        .collect();

    let mut rs_residual = Vec::with_capacity(n);
    let mut mars_outputs: Vec<Vec<f64>> = if cfg.record_mars_outputs {
        (0..n_st).map(|_| Vec::with_capacity(n)).collect()
    } else {
        Vec::new()
    };
    let mut eps = vec![0.0; n_st];

    for i in 0..n {
        for k in 0..n_st {
            hist[k].put(i, cur[k]);
        }
        let ii = i as isize;

        // error signals
        if n_st == 1 {
            eps[0] = hist[0].get(i, r_front) + hist[0].get(i, r_rear)
                + links[1].at(ii) + links[1].at(ii - d[1] as isize)
                - links[0].at(ii) + links[0].at(ii - d[0] as isize)
                - rf.at(ii - d[0] as isize);
        } else {
            eps[0] = hist[0].get(i, r_front) + hist[1].get(i, d[1])
                + links[1].at(ii)
                - links[0].at(ii) + links[0].at(ii - d[0] as isize)
                - rf.at(ii - d[0] as isize);
            for k in 1..n_st - 1 {
                eps[k] = hist[k + 1].get(i, d[k + 1]) + links[k + 1].at(ii)
                    - hist[k - 1].get(i, d[k])
                    - links[k].at(ii);
            }
            let last = n_st - 1;
            eps[last] = hist[last].get(i, r_rear)
                + links[n_st].at(ii)
                + links[n_st].at(ii - d[n_st] as isize)
                - hist[last - 1].get(i, d[last])
                - links[last].at(ii);
        }

        // outputs
        let res = hist[n_st - 1].get(i, d[n_st]) + links[n_st].at(ii) + rs_floor.at(ii);
        rs_residual.push(res);
        if cfg.record_mars_outputs {
            for k in 0..n_st {
                let out = if k + 1 < n_st {
                    // interior station: own correction plus the delayed one
                    // of the next station plus the joining link
                    cur[k] + hist[k + 1].get(i, d[k + 1]) + links[k + 1].at(ii)
                } else if n_st >= 2 {
                    // last station recovers against its upstream neighbour
                    cur[k] + hist[k - 1].get(i, d[k]) + links[k].at(ii)
                } else {
                    // single station recovers against the local site
                    cur[0] - hist[0].get(i, r_front) + links[0].at(ii)
                        - links[0].at(ii - d[0] as isize)
                        + rf.at(ii - d[0] as isize)
                };
                mars_outputs[k].push(out + mars_floors[k].at(ii));
            }
        }

        // loop update
        for k in 0..n_st {
            let (c_p, c_acc, c_i) = gains[k];
            acc[k] += c_acc * eps[k];
            cur[k] -= c_p * eps[k] + c_i * acc[k];
            if !cur[k].is_finite() || cur[k].abs() > DIVERGENCE_THRESHOLD {
                return Err(Error::LoopDivergence {
                    time: i as f64 * dt,
                    threshold: DIVERGENCE_THRESHOLD,
                });
            }
        }
    }

    Ok(SimResult {
        sample_rate: fs,
        settle_samples,
        rs_residual,
        mars_outputs,
        final_station_phases: cur,
    })
}

/// Lock summary of a run.
#[derive(Debug, Clone)]
pub struct LockReport {
    pub sample_rate: f64,
    pub locked: bool,
    /// First time after which the remote-site residual stays below the
    /// threshold, s.
    pub lock_time: Option<f64>,
    pub final_abs_residual: f64,
    pub max_abs_after_settle: f64,
}

/// Runs the simulation and summarizes the settle transient: lock time is
/// the first instant after which |residual| never exceeds `threshold`
/// again. A chain that never meets the threshold is flagged unlocked.
pub fn lock_report(cfg: &SimConfig, threshold: f64) -> Result<LockReport> {
    let sim = simulate(cfg)?;
    let res = &sim.rs_residual;
    let last_bad = res.iter().rposition(|v| v.abs() >= threshold);
    let (locked, lock_time) = match last_bad {
        None => (true, Some(0.0)),
        Some(i) if i + 1 < res.len() => (true, Some((i + 1) as f64 / sim.sample_rate)),
        Some(_) => (false, None),
    };
    let tail = &res[sim.settle_samples.min(res.len())..];
    Ok(LockReport {
        sample_rate: sim.sample_rate,
        locked,
        lock_time,
        final_abs_residual: res.last().map_or(0.0, |v| v.abs()),
        max_abs_after_settle: tail.iter().fold(0.0, |m, v| m.max(v.abs())),
    })
}
