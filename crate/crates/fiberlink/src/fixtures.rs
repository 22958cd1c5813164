//! Golden CSV fixtures regenerated from the built-in presets, with a
//! manifest mapping each fixture to a checksum and a tolerance class.
//! Figure-level reference numbers are never treated as bit-exact: only
//! the closed-form algebra fixture uses the exact class.

use crate::config::{preset, PRESETS};
use crate::error::{Error, Result};
use crate::freqdomain::{cascaded_psd, log_grid, residual_psd_chain};
use crate::phase_algebra::{recovered_output_phase, solve_static_locks, Tap};
use crate::stability::psd_to_adev;
use sha2::{Digest, Sha256};
use std::io::Write as _;
use std::path::Path;

/// How regenerated values are compared against the stored fixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ToleranceClass {
    /// Byte-identical file.
    Exact,
    /// Every numeric field within the given relative tolerance.
    Relative(f64),
    /// Every numeric field within the given factor band (e.g. 1.5 allows
    /// ±50%); used for figure-level reference targets.
    Band(f64),
}

impl ToleranceClass {
    pub fn label(&self) -> String {
        match self {
            ToleranceClass::Exact => "exact".into(),
            ToleranceClass::Relative(t) => format!("rel-{t:e}"),
            ToleranceClass::Band(b) => format!("band-{b}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GoldenFixture {
    pub name: &'static str,
    pub preset: &'static str,
    pub tolerance: ToleranceClass,
}

/// Fixtures shipped with the crate.
pub fn builtin_fixtures() -> Vec<GoldenFixture> {
    vec![
        GoldenFixture {
            name: "psd_two_span_100_100",
            preset: "two_span_100_100",
            tolerance: ToleranceClass::Relative(1e-10),
        },
        GoldenFixture {
            name: "adev_two_span_100_100",
            preset: "two_span_100_100",
            tolerance: ToleranceClass::Relative(1e-10),
        },
        GoldenFixture {
            name: "adev_two_span_120_80",
            preset: "two_span_120_80",
            tolerance: ToleranceClass::Relative(1e-10),
        },
        GoldenFixture {
            name: "adev_relay_3000km",
            preset: "relay_3000km",
            tolerance: ToleranceClass::Relative(1e-10),
        },
        GoldenFixture {
            name: "static_locks_example",
            preset: "two_span_100_100",
            tolerance: ToleranceClass::Exact,
        },
    ]
}

pub fn sha256_hex(data: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(data.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn fingerprint_header(fixture: &GoldenFixture) -> Result<String> {
    let text = PRESETS
        .iter()
        .find(|(n, _)| *n == fixture.preset)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            Error::Config(format!(
                "fixture '{}' references missing preset '{}'",
                fixture.name, fixture.preset
            ))
        })?;
    Ok(format!(
        "# fixture: {}\n# preset: {} ({})\n",
        fixture.name,
        fixture.preset,
        &sha256_hex(text)[..12]
    ))
}

/// Deterministically regenerates the content of one fixture.
pub fn generate_content(fixture: &GoldenFixture) -> Result<String> {
    let header = fingerprint_header(fixture)?;
    let cfg = preset(fixture.preset)?;
    let mut out = header;
    match fixture.name {
        "psd_two_span_100_100" => {
            let grid = log_grid(1e-3, 1e3, 20);
            let psd = residual_psd_chain(&cfg.chain, &grid)?;
            out.push_str("f_hz,psd_rad2_per_hz,ssb_dbc_per_hz\n");
            for ((f, s), dbc) in psd.freqs.iter().zip(&psd.values).zip(psd.to_dbc()) {
                out.push_str(&format!("{f:e},{s:e},{dbc:e}\n"));
            }
        }
        "adev_two_span_100_100" | "adev_two_span_120_80" => {
            let psd = residual_psd_chain(&cfg.chain, &cfg.grid())?;
            let curve = psd_to_adev(&psd, cfg.chain.delivered_carrier_hz(), &cfg.taus, cfg.f_high)?;
            out.push_str("tau_s,adev\n");
            for (t, s) in curve.taus.iter().zip(&curve.sigmas) {
                out.push_str(&format!("{t:e},{s:e}\n"));
            }
        }
        "adev_relay_3000km" => {
            let grid = cfg.grid();
            let chain_psd = residual_psd_chain(&cfg.chain, &grid)?;
            let cascade_psd = cascaded_psd(&cfg.chain, cfg.sweep_n_stages, &grid)?;
            let nu0 = cfg.chain.delivered_carrier_hz();
            let chain_adev = psd_to_adev(&chain_psd, nu0, &cfg.taus, cfg.f_high)?;
            let cascade_adev = psd_to_adev(&cascade_psd, nu0, &cfg.taus, cfg.f_high)?;
            out.push_str("tau_s,adev_chain,adev_cascade\n");
            for ((t, c), s) in cfg.taus.iter().zip(&chain_adev.sigmas).zip(&cascade_adev.sigmas) {
                out.push_str(&format!("{t:e},{c:e},{s:e}\n"));
            }
        }
        "static_locks_example" => {
            let phi_p = [0.11, -0.52, 0.73, 0.04, -0.9];
            let state = solve_static_locks(1.25, &phi_p)?;
            out.push_str("station,phi_c_rad,recovered_rad\n");
            let n = state.phi_c.len();
            for k in 1..=n {
                let recovered = if k < n {
                    recovered_output_phase(&state, Tap::Mars(k))?
                } else {
                    recovered_output_phase(&state, Tap::RemoteSite)?
                };
                out.push_str(&format!("{k},{:e},{recovered:e}\n", state.phi_c[k - 1]));
            }
        }
        other => {
            return Err(Error::Config(format!("unknown fixture '{other}'")));
        }
    }
    Ok(out)
}

/// Writes `content` to `path` atomically: temp file in the same directory,
/// then rename.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(content.as_bytes())?;
    tmp.persist(path)
        .map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum FixtureStatus {
    /// No stored file; fixture written fresh.
    Created,
    /// Stored file matches under its tolerance class.
    Match,
    /// Stored file disagrees; the message names the first offending field.
    Drift(String),
    /// The generating preset is missing or generation failed.
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct FixtureReport {
    pub name: String,
    pub status: FixtureStatus,
}

fn numeric_fields(content: &str) -> Vec<f64> {
    content
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .flat_map(|l| l.split(','))
        .filter_map(|v| v.trim().parse::<f64>().ok())
        .collect()
}

fn compare(stored: &str, fresh: &str, tol: ToleranceClass) -> FixtureStatus {
    match tol {
        ToleranceClass::Exact => {
            if stored == fresh {
                FixtureStatus::Match
            } else {
                FixtureStatus::Drift("byte content differs".into())
            }
        }
        ToleranceClass::Relative(t) | ToleranceClass::Band(t) => {
            let limit = match tol {
                ToleranceClass::Relative(t) => t,
                _ => t - 1.0,
            };
            let a = numeric_fields(stored);
            let b = numeric_fields(fresh);
            if a.len() != b.len() {
                return FixtureStatus::Drift(format!(
                    "field count changed: {} vs {}",
                    a.len(),
                    b.len()
                ));
            }
            for (i, (x, y)) in a.iter().zip(&b).enumerate() {
                let scale = x.abs().max(y.abs()).max(f64::MIN_POSITIVE);
                let rel = (x - y).abs() / scale;
                if rel > limit {
                    return FixtureStatus::Drift(format!(
                        "field {i}: stored {x:e} vs regenerated {y:e} (rel {rel:.2e})"
                    ));
                }
            }
            FixtureStatus::Match
        }
    }
}

/// Regenerates the given fixtures under `dir`, comparing against any
/// stored copies, writing missing ones, and rewriting the manifest.
/// Idempotent: a second run on an untouched directory reports all-match.
pub fn regenerate_with(dir: &Path, fixtures: &[GoldenFixture]) -> Result<Vec<FixtureReport>> {
    std::fs::create_dir_all(dir)?;
    let mut reports = Vec::with_capacity(fixtures.len());
    let mut manifest = String::new();
    for fixture in fixtures {
        let fresh = match generate_content(fixture) {
            Ok(c) => c,
            Err(e) => {
                reports.push(FixtureReport {
                    name: fixture.name.to_string(),
                    status: FixtureStatus::Failed(e.to_string()),
                });
                continue;
            }
        };
        let path = dir.join(format!("{}.csv", fixture.name));
        let status = match std::fs::read_to_string(&path) {
            Ok(stored) => compare(&stored, &fresh, fixture.tolerance),
            Err(_) => {
                write_atomic(&path, &fresh)?;
                FixtureStatus::Created
            }
        };
        manifest.push_str(&format!(
            "{}\t{}\t{}\n",
            fixture.name,
            sha256_hex(&fresh),
            fixture.tolerance.label()
        ));
        reports.push(FixtureReport {
            name: fixture.name.to_string(),
            status,
        });
    }
    write_atomic(&dir.join("manifest.txt"), &manifest)?;
    Ok(reports)
}

/// Regenerates the built-in fixture set.
pub fn regenerate_fixtures(dir: &Path) -> Result<Vec<FixtureReport>> {
    regenerate_with(dir, &builtin_fixtures())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_directory_is_populated_then_stable() {
        let dir = tempfile::tempdir().unwrap();
        let first = regenerate_fixtures(dir.path()).unwrap();
        assert!(first.iter().all(|r| r.status == FixtureStatus::Created), "{first:?}");
        assert!(dir.path().join("manifest.txt").exists());
        assert!(dir.path().join("adev_two_span_100_100.csv").exists());
        let second = regenerate_fixtures(dir.path()).unwrap();
        assert!(second.iter().all(|r| r.status == FixtureStatus::Match), "{second:?}");
    }

    #[test]
    fn tampered_fixture_reported_as_drift_by_name() {
        let dir = tempfile::tempdir().unwrap();
        regenerate_fixtures(dir.path()).unwrap();
        // simulate a result drift (e.g. a perturbed loop constant) by
        // doubling one stored ADEV value
        let path = dir.path().join("adev_two_span_100_100.csv");
        let stored = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = stored.lines().map(String::from).collect();
        let last = lines.last().unwrap().clone();
        let (tau, sigma) = last.split_once(',').unwrap();
        let doubled: f64 = sigma.parse::<f64>().unwrap() * 2.0;
        *lines.last_mut().unwrap() = format!("{tau},{doubled:e}");
        std::fs::write(&path, lines.join("\n") + "\n").unwrap();
        let reports = regenerate_fixtures(dir.path()).unwrap();
        let hit = reports
            .iter()
            .find(|r| r.name == "adev_two_span_100_100")
            .unwrap();
        assert!(matches!(hit.status, FixtureStatus::Drift(_)), "{hit:?}");
        for other in reports.iter().filter(|r| r.name != "adev_two_span_100_100") {
            assert_eq!(other.status, FixtureStatus::Match, "{other:?}");
        }
    }

    #[test]
    fn missing_preset_flagged() {
        let dir = tempfile::tempdir().unwrap();
        let bogus = [GoldenFixture {
            name: "psd_two_span_100_100",
            preset: "no_such_preset",
            tolerance: ToleranceClass::Exact,
        }];
        let reports = regenerate_with(dir.path(), &bogus).unwrap();
        assert!(matches!(reports[0].status, FixtureStatus::Failed(_)));
    }

    #[test]
    fn exact_class_is_byte_stable() {
        let f = builtin_fixtures()
            .into_iter()
            .find(|f| f.tolerance == ToleranceClass::Exact)
            .unwrap();
        assert_eq!(generate_content(&f).unwrap(), generate_content(&f).unwrap());
    }

    #[test]
    fn manifest_lists_every_fixture_with_checksum() {
        let dir = tempfile::tempdir().unwrap();
        regenerate_fixtures(dir.path()).unwrap();
        let manifest = std::fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
        let lines: Vec<&str> = manifest.lines().collect();
        assert_eq!(lines.len(), builtin_fixtures().len());
        for line in lines {
            let parts: Vec<&str> = line.split('\t').collect();
            assert_eq!(parts.len(), 3, "{line}");
            assert_eq!(parts[1].len(), 64);
        }
    }
}
