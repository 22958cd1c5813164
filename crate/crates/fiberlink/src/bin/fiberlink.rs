//! Command-line front end: PSD/ADEV evaluation, time-domain simulation,
//! parameter sweeps and the self-verification suite. Exit codes: 0 ok,
//! 1 verification or evaluation failure, 2 usage/config error.

use clap::{Parser, Subcommand};
use fiberlink::config::{preset, RunConfig};
use fiberlink::error::Error;
use fiberlink::fixtures::{self, FixtureStatus};
use fiberlink::freqdomain::{
    cascaded_psd, free_running_psd, log_grid, residual_psd_chain, SpectralDensity,
};
use fiberlink::oracle::{simulate, SimConfig};
use fiberlink::phase_algebra::{recovered_output_phase, solve_static_locks, Tap};
use fiberlink::stability::{adev_from_series, psd_to_adev};
use fiberlink::sweep::{chain_vs_cascade, ratio_length_grid};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fiberlink", version, about = "RF transfer chain analysis")]
struct Cli {
    /// Configuration file (flat key = value format).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in preset name.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Simulation seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Frequency grid override, FMIN:FMAX:PPD.
    #[arg(long, global = true)]
    grid: Option<String>,
    /// Averaging-time override, comma-separated seconds.
    #[arg(long, global = true, value_delimiter = ',')]
    taus: Option<Vec<f64>>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write residual, free-running and cascaded phase-noise PSDs.
    Psd,
    /// Write the ADEV curve from the chain config or a PSD file.
    Adev {
        /// Convert a previously written PSD CSV instead of the config.
        #[arg(long)]
        psd_file: Option<PathBuf>,
    },
    /// Run the time-domain simulation; write the residual series and its ADEV.
    Oracle,
    /// Run the ratio/length grid and the chain-vs-cascade comparison.
    Sweep,
    /// Run the self-verification suite and regenerate golden fixtures.
    Verify,
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "--config and --preset are mutually exclusive".into(),
            ))
        }
        (Some(path), None) => RunConfig::from_file(path)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.sim_seed = seed;
    }
    if let Some(spec) = &cli.grid {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!(
                "--grid must be FMIN:FMAX:PPD, got '{spec}'"
            )));
        }
        cfg.grid_fmin = parts[0]
            .parse()
            .map_err(|_| Error::Config(format!("bad grid fmin '{}'", parts[0])))?;
        cfg.grid_fmax = parts[1]
            .parse()
            .map_err(|_| Error::Config(format!("bad grid fmax '{}'", parts[1])))?;
        cfg.grid_ppd = parts[2]
            .parse()
            .map_err(|_| Error::Config(format!("bad grid ppd '{}'", parts[2])))?;
    }
    if let Some(taus) = &cli.taus {
        cfg.taus = taus.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Provenance comment lines for CSV outputs.
fn fingerprint(cfg: &RunConfig) -> String {
    let digest = fixtures::sha256_hex(&format!("{cfg:?}"));
    format!("# config fingerprint: {}\n", &digest[..16])
}

fn write_psd_csv(path: &Path, cfg: &RunConfig, psd: &SpectralDensity) -> Result<(), Error> {
    let mut out = fingerprint(cfg);
    out.push_str("f_hz,psd_rad2_per_hz,ssb_dbc_per_hz\n");
    for ((f, s), dbc) in psd.freqs.iter().zip(&psd.values).zip(psd.to_dbc()) {
        out.push_str(&format!("{f:e},{s:e},{dbc:e}\n"));
    }
    fixtures::write_atomic(path, &out)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn read_psd_csv(path: &Path) -> Result<SpectralDensity, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read PSD file {}: {e}", path.display())))?;
    let mut freqs = Vec::new();
    let mut values = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let mut cols = line.split(',');
        let (f, s) = (cols.next(), cols.next());
        match (f.and_then(|v| v.parse().ok()), s.and_then(|v| v.parse().ok())) {
            (Some(f), Some(s)) => {
                freqs.push(f);
                values.push(s);
            }
            _ => {
                return Err(Error::Config(format!(
                    "malformed PSD row in {}: '{line}'",
                    path.display()
                )))
            }
        }
    }
    SpectralDensity::new(freqs, values)
}

fn cmd_psd(cfg: &RunConfig, out_dir: &Path) -> Result<(), Error> {
    let grid = cfg.grid();
    let chain = cfg.effective_chain();
    write_psd_csv(
        &out_dir.join("psd_chain.csv"),
        cfg,
        &residual_psd_chain(&chain, &grid)?,
    )?;
    write_psd_csv(
        &out_dir.join("psd_free_running.csv"),
        cfg,
        &free_running_psd(&chain, &grid)?,
    )?;
    write_psd_csv(
        &out_dir.join("psd_cascaded.csv"),
        cfg,
        &cascaded_psd(&chain, cfg.sweep_n_stages, &grid)?,
    )?;
    Ok(())
}

fn cmd_adev(cfg: &RunConfig, out_dir: &Path, psd_file: Option<&Path>) -> Result<(), Error> {
    let chain = cfg.effective_chain();
    let psd = match psd_file {
        Some(path) => read_psd_csv(path)?,
        None => residual_psd_chain(&chain, &cfg.grid())?,
    };
    let curve = psd_to_adev(&psd, chain.delivered_carrier_hz(), &cfg.taus, cfg.f_high)?;
    let mut out = fingerprint(cfg);
    out.push_str("tau_s,adev\n");
    for (t, s) in curve.taus.iter().zip(&curve.sigmas) {
        out.push_str(&format!("{t:e},{s:e}\n"));
    }
    let path = out_dir.join("adev.csv");
    fixtures::write_atomic(&path, &out)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_oracle(cfg: &RunConfig, out_dir: &Path) -> Result<(), Error> {
    let sim_cfg: SimConfig = cfg.sim_config();
    let sim = simulate(&sim_cfg)?;
    let dt = 1.0 / sim.sample_rate;
    let mut out = fingerprint(cfg);
    out.push_str("t_s,phi_rad\n");
    for (i, phi) in sim.rs_residual.iter().enumerate() {
        out.push_str(&format!("{:e},{phi:e}\n", i as f64 * dt));
    }
    let series_path = out_dir.join("oracle_residual.csv");
    fixtures::write_atomic(&series_path, &out)?;
    println!("wrote {}", series_path.display());

    let tail = &sim.rs_residual[sim.settle_samples.min(sim.rs_residual.len())..];
    let usable: Vec<f64> = cfg
        .taus
        .iter()
        .copied()
        .filter(|t| ((t * sim.sample_rate).round() as usize) * 3 <= tail.len())
        .collect();
    if usable.is_empty() {
        return Err(Error::InvalidArgument(
            "no requested tau fits in the simulated span".into(),
        ));
    }
    let (curve, counts) = adev_from_series(
        tail,
        sim.sample_rate,
        cfg.chain.delivered_carrier_hz(),
        &usable,
    )?;
    let mut out = fingerprint(cfg);
    out.push_str(&format!("# seed: {}\n", cfg.sim_seed));
    out.push_str("tau_s,adev,n_terms\n");
    for ((t, s), c) in curve.taus.iter().zip(&curve.sigmas).zip(&counts) {
        out.push_str(&format!("{t:e},{s:e},{c}\n"));
    }
    let adev_path = out_dir.join("oracle_adev.csv");
    fixtures::write_atomic(&adev_path, &out)?;
    println!("wrote {}", adev_path.display());
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig, out_dir: &Path) -> Result<(), Error> {
    let spec = cfg.sweep_spec();
    let rows = ratio_length_grid(&spec)?;
    let mut out = fingerprint(cfg);
    out.push_str("total_km,ratio");
    for t in &spec.taus {
        out.push_str(&format!(",adev_{t:e}s"));
    }
    out.push_str(",error\n");
    for row in &rows {
        out.push_str(&format!("{:e},{:e}", row.total_km, row.ratio));
        if row.adev.is_empty() {
            for _ in &spec.taus {
                out.push_str(",nan");
            }
        } else {
            for s in &row.adev {
                out.push_str(&format!(",{s:e}"));
            }
        }
        out.push_str(&format!(",{}\n", row.error.as_deref().unwrap_or("")));
    }
    let grid_path = out_dir.join("sweep_grid.csv");
    fixtures::write_atomic(&grid_path, &out)?;
    println!("wrote {}", grid_path.display());

    let cmp = chain_vs_cascade(
        &cfg.effective_chain(),
        cfg.sweep_total_km,
        cfg.sweep_n_mars,
        cfg.sweep_n_stages,
        &cfg.taus,
    )?;
    let mut out = fingerprint(cfg);
    out.push_str("tau_s,adev_chain,adev_cascade\n");
    for ((t, c), s) in cmp.chain.taus.iter().zip(&cmp.chain.sigmas).zip(&cmp.cascade.sigmas) {
        out.push_str(&format!("{t:e},{c:e},{s:e}\n"));
    }
    let cmp_path = out_dir.join("chain_vs_cascade.csv");
    fixtures::write_atomic(&cmp_path, &out)?;
    println!("wrote {}", cmp_path.display());
    println!(
        "chain at least as stable as cascade at tau = {} s: {}",
        cfg.taus[0], cmp.chain_at_least_as_good
    );
    Ok(())
}

fn check(name: &str, ok: bool, failures: &mut Vec<String>) {
    println!("{}: {name}", if ok { "PASS" } else { "FAIL" });
    if !ok {
        failures.push(name.to_string());
    }
}

fn cmd_verify(cfg: &RunConfig, out_dir: &Path) -> Result<bool, Error> {
    let mut failures = Vec::new();

    // static lock algebra: recovery is exact at every tap
    let phi_p = [0.21, -0.47, 0.9, -1.3];
    let state = solve_static_locks(0.83, &phi_p)?;
    let mut ok = (recovered_output_phase(&state, Tap::RemoteSite)? - 0.83).abs() < 1e-12;
    for k in 1..state.phi_c.len() {
        ok &= (recovered_output_phase(&state, Tap::Mars(k))? - 0.83).abs() < 1e-12;
    }
    check("static lock recovery identity", ok, &mut failures);

    // closed-form vs generic solver on the configured two-span geometry
    let mut chain = cfg.effective_chain();
    if chain.sublinks_km.len() != 2 {
        chain.sublinks_km = vec![100.0, 100.0];
        chain.pll = vec![*chain.pll_for_any()];
    }
    let grid = log_grid(1e-4, 1e4, 20);
    let closed = fiberlink::freqdomain::residual_psd_single_mars(&chain, &grid)?;
    let generic = fiberlink::freqdomain::residual_psd_chain_generic(&chain, &grid)?;
    let ok = closed
        .values
        .iter()
        .zip(&generic.values)
        .all(|(a, b)| (a - b).abs() <= 1e-10 * a.abs().max(*b));
    check("closed-form vs generic chain solver", ok, &mut failures);

    // cascade scaling: M identical stages add in power, sqrt(M) in ADEV;
    // the total length scales with M so the stage span stays fixed
    let total_km: f64 = chain.sublinks_km.iter().sum();
    let mut nine_chain = chain.clone();
    nine_chain.sublinks_km = vec![9.0 * total_km / 2.0; 2];
    let single = cascaded_psd(&chain, 1, &grid)?;
    let nine = cascaded_psd(&nine_chain, 9, &grid)?;
    let ok = single
        .values
        .iter()
        .zip(&nine.values)
        .all(|(a, b)| (9.0 * a - b).abs() <= 1e-9 * b.abs());
    check("cascade power scaling law", ok, &mut failures);

    // golden fixtures
    let reports = fixtures::regenerate_fixtures(&out_dir.join("fixtures"))?;
    for report in reports {
        let ok = matches!(report.status, FixtureStatus::Match | FixtureStatus::Created);
        check(&format!("fixture {}", report.name), ok, &mut failures);
    }

    if failures.is_empty() {
        Ok(true)
    } else {
        eprintln!("failed identities: {}", failures.join(", "));
        Ok(false)
    }
}

fn run(cli: &Cli) -> Result<bool, Error> {
    let cfg = load_config(cli)?;
    std::fs::create_dir_all(&cli.out)?;
    match &cli.cmd {
        Cmd::Psd => cmd_psd(&cfg, &cli.out).map(|_| true),
        Cmd::Adev { psd_file } => cmd_adev(&cfg, &cli.out, psd_file.as_deref()).map(|_| true),
        Cmd::Oracle => cmd_oracle(&cfg, &cli.out).map(|_| true),
        Cmd::Sweep => cmd_sweep(&cfg, &cli.out).map(|_| true),
        Cmd::Verify => cmd_verify(&cfg, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
