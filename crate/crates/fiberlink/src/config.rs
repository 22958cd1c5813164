//! Flat structured-text run configuration: `key = value` lines with dotted
//! keys, `#` comments, comma-separated lists. Unknown keys are rejected so
//! typos fail loudly instead of silently running defaults.

use crate::error::{Error, Result};
use crate::freqdomain::log_grid;
use crate::noise::PowerLawCoeffs;
use crate::oracle::SimConfig;
use crate::stability::DEFAULT_F_HIGH;
use crate::sweep::SweepSpec;
use crate::topology::ChainTopology;

/// Fully resolved configuration of a run; every command reads the subset
/// it needs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub chain: ChainTopology,
    /// Rescale the loop constants so the servo bandwidth respects the
    /// longest sub-link delay (needed for stable time-domain runs on long
    /// links).
    pub delay_safe_gains: bool,
    pub grid_fmin: f64,
    pub grid_fmax: f64,
    pub grid_ppd: usize,
    pub taus: Vec<f64>,
    pub f_high: f64,
    pub sim_sample_rate: f64,
    pub sim_duration: f64,
    pub sim_seed: u64,
    pub sim_settle_time: f64,
    pub sim_initial_offset: f64,
    pub sweep_total_lengths_km: Vec<f64>,
    pub sweep_ratios: Vec<f64>,
    pub sweep_total_km: f64,
    pub sweep_n_mars: usize,
    pub sweep_n_stages: usize,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            chain: ChainTopology::with_defaults(vec![100.0, 100.0]),
            delay_safe_gains: false,
            grid_fmin: 1e-6,
            grid_fmax: 1e5,
            grid_ppd: 200,
            taus: vec![1.0, 10.0, 100.0, 1e3, 1e4],
            f_high: DEFAULT_F_HIGH,
            sim_sample_rate: 1e4,
            sim_duration: 100.0,
            sim_seed: 1,
            sim_settle_time: 10.0,
            sim_initial_offset: 0.0,
            sweep_total_lengths_km: vec![100.0, 200.0, 300.0],
            sweep_ratios: vec![0.5, 0.7, 0.9],
            sweep_total_km: 3000.0,
            sweep_n_mars: 29,
            sweep_n_stages: 30,
        }
    }
}

impl RunConfig {
    /// Parses the flat key = value format, starting from defaults.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            cfg.apply(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        RunConfig::parse(&text)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "chain.sublinks_km" => self.chain.sublinks_km = parse_list(value)?,
            "chain.carrier_hz" => self.chain.carrier_hz = parse_f64(value)?,
            "pll.kp" => self.shared_pll()?.k_p = parse_f64(value)?,
            "pll.ki" => self.shared_pll()?.k_i = parse_f64(value)?,
            "pll.kpfd" => self.shared_pll()?.k_pfd = parse_f64(value)?,
            "pll.kvco" => self.shared_pll()?.k_vco = parse_f64(value)?,
            "pll.delay_safe" => self.delay_safe_gains = parse_bool(value)?,
            "noise.h_m3" => self.chain.fiber_noise.h_m3 = parse_f64(value)?,
            "noise.h_m2" => self.chain.fiber_noise.h_m2 = parse_f64(value)?,
            "noise.h_m1" => self.chain.fiber_noise.h_m1 = parse_f64(value)?,
            "noise.h_0" => self.chain.fiber_noise.h_0 = parse_f64(value)?,
            "floor.white_dbc" => {
                self.chain.floor.white_ssb_dbc_per_hz = if value.eq_ignore_ascii_case("off") {
                    None
                } else {
                    Some(parse_f64(value)?)
                }
            }
            "floor.extra_h_m3" => self.chain.floor.extra.h_m3 = parse_f64(value)?,
            "rf.h_m3" => self.rf_psd().h_m3 = parse_f64(value)?,
            "rf.h_m2" => self.rf_psd().h_m2 = parse_f64(value)?,
            "rf.h_m1" => self.rf_psd().h_m1 = parse_f64(value)?,
            "rf.h_0" => self.rf_psd().h_0 = parse_f64(value)?,
            "grid.fmin" => self.grid_fmin = parse_f64(value)?,
            "grid.fmax" => self.grid_fmax = parse_f64(value)?,
            "grid.ppd" => self.grid_ppd = parse_usize(value)?,
            "adev.taus" => self.taus = parse_list(value)?,
            "adev.f_high" => self.f_high = parse_f64(value)?,
            "sim.sample_rate" => self.sim_sample_rate = parse_f64(value)?,
            "sim.duration" => self.sim_duration = parse_f64(value)?,
            "sim.seed" => self.sim_seed = parse_u64(value)?,
            "sim.settle_time" => self.sim_settle_time = parse_f64(value)?,
            "sim.initial_offset" => self.sim_initial_offset = parse_f64(value)?,
            "sweep.total_lengths_km" => self.sweep_total_lengths_km = parse_list(value)?,
            "sweep.ratios" => self.sweep_ratios = parse_list(value)?,
            "sweep.total_km" => self.sweep_total_km = parse_f64(value)?,
            "sweep.n_mars" => self.sweep_n_mars = parse_usize(value)?,
            "sweep.n_stages" => self.sweep_n_stages = parse_usize(value)?,
            other => {
                return Err(Error::Config(format!("unknown key '{other}'")));
            }
        }
        Ok(())
    }

    fn shared_pll(&mut self) -> Result<&mut crate::pll::PllParams> {
        if self.chain.pll.len() != 1 {
            return Err(Error::Config(
                "pll.* keys require the shared loop-constant set".into(),
            ));
        }
        Ok(&mut self.chain.pll[0])
    }

    fn rf_psd(&mut self) -> &mut PowerLawCoeffs {
        self.chain
            .rf
            .psd
            .get_or_insert(PowerLawCoeffs::ZERO)
    }

    pub fn validate(&self) -> Result<()> {
        self.chain.validate()?;
        if !(self.grid_fmin > 0.0 && self.grid_fmax > self.grid_fmin) || self.grid_ppd == 0 {
            return Err(Error::Config(format!(
                "invalid grid {}:{}:{}",
                self.grid_fmin, self.grid_fmax, self.grid_ppd
            )));
        }
        if self.taus.is_empty() || self.taus.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::Config("adev.taus must be positive".into()));
        }
        if !(self.f_high > 0.0) {
            return Err(Error::Config("adev.f_high must be > 0".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        log_grid(self.grid_fmin, self.grid_fmax, self.grid_ppd)
    }

    /// Chain with the delay-safe gain rescaling applied if requested.
    pub fn effective_chain(&self) -> ChainTopology {
        let mut chain = self.chain.clone();
        if self.delay_safe_gains {
            let max_tau = chain.delays().into_iter().fold(0.0, f64::max);
            chain.pll = chain.pll.iter().map(|p| p.delay_safe(max_tau)).collect();
        }
        chain
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            chain: self.effective_chain(),
            sample_rate: self.sim_sample_rate,
            duration: self.sim_duration,
            seed: self.sim_seed,
            settle_time: self.sim_settle_time,
            initial_offset_rad: self.sim_initial_offset,
            static_link_offsets: None,
            record_mars_outputs: false,
        }
    }

    pub fn sweep_spec(&self) -> SweepSpec {
        let mut base = self.effective_chain();
        if base.sublinks_km.len() != 2 {
            base.sublinks_km = vec![100.0, 100.0];
            if base.pll.len() != 1 {
                base.pll = vec![*base.pll_for_any()];
            }
        }
        SweepSpec {
            base,
            total_lengths_km: self.sweep_total_lengths_km.clone(),
            ratios: self.sweep_ratios.clone(),
            taus: self.taus.clone(),
        }
    }
}

fn parse_f64(value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("expected a number, got '{value}'")))
}

fn parse_usize(value: &str) -> Result<usize> {
    value
        .parse::<usize>()
        .map_err(|_| Error::Config(format!("expected a nonnegative integer, got '{value}'")))
}

fn parse_u64(value: &str) -> Result<u64> {
    value
        .parse::<u64>()
        .map_err(|_| Error::Config(format!("expected a nonnegative integer, got '{value}'")))
}

fn parse_bool(value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("expected a boolean, got '{value}'"))),
    }
}

fn parse_list(value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|p| parse_f64(p.trim()))
        .collect()
}

/// Built-in configurations mirroring the reference scenarios.
pub const PRESETS: &[(&str, &str)] = &[
    (
        "two_span_100_100",
        include_str!("../presets/two_span_100_100.cfg"),
    ),
    (
        "two_span_120_80",
        include_str!("../presets/two_span_120_80.cfg"),
    ),
    ("relay_3000km", include_str!("../presets/relay_3000km.cfg")),
    ("field_260_280", include_str!("../presets/field_260_280.cfg")),
    (
        "oracle_two_span",
        include_str!("../presets/oracle_two_span.cfg"),
    ),
];

pub fn preset(name: &str) -> Result<RunConfig> {
    match PRESETS.iter().find(|(n, _)| *n == name) {
        Some((_, text)) => RunConfig::parse(text),
        None => Err(Error::Config(format!(
            "unknown preset '{name}' (available: {})",
            PRESETS
                .iter()
                .map(|(n, _)| *n)
                .collect::<Vec<_>>()
                .join(", ")
        ))),
    }
}
