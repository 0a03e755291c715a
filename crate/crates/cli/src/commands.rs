//! The `analyze`, `stability` and `bands` commands.

use std::path::Path;

use gfloquet::bloch::{band_edges, band_scan, detect_interior_extrema, BandRecord, ExtremaReport};
use gfloquet::monodromy::{
    floquet_spectrum_with, verify_floquet_form, SpectrumOptions, Truncation, VerificationReport,
};
use gfloquet::perturbation::{
    linearize, phase_mode_alignment, stability_verdict, CycleSource, LimitCycle, StabilityReport,
};
use gfloquet::{validate_system, Multiplier, PeriodicGrid, ValidationReport};
use nalgebra::DVector;
use serde::Serialize;

use crate::config::{self, AnalyzeConfig, BandsConfig, StabilityConfig};
use crate::output::{ensure_dir, fingerprint, number, write_csv, write_json};
use crate::{builtins, CliError, Options};

/// Fraction of energies that must succeed for `bands` to exit with 0.
pub const MIN_SUCCESS_FRACTION: f64 = 0.9;

fn origin(opts: &Options) -> String {
    opts.config.display().to_string()
}

#[derive(Serialize)]
struct SpectrumFile<'a> {
    config_sha256: &'a str,
    system: &'a str,
    operator_fingerprint: String,
    period: f64,
    samples: usize,
    memory_depth: f64,
    truncation: Option<Truncation>,
    match_tolerance: f64,
    retained: usize,
    multipliers: &'a [Multiplier],
}

#[derive(Serialize)]
struct VerifyFile<'a> {
    config_sha256: &'a str,
    validation: &'a ValidationReport,
    verification: &'a VerificationReport,
    worst_residual: f64,
}

pub fn analyze(text: &str, opts: &Options) -> Result<i32, CliError> {
    let hash = fingerprint(text.as_bytes(), opts);
    let cfg: AnalyzeConfig = config::parse(text, &origin(opts))?;
    let samples = opts.grid.unwrap_or(cfg.samples);
    let match_tolerance = opts.tol.unwrap_or(cfg.match_tolerance);
    let prepared = builtins::linear_system(&cfg.system, samples)?;
    let grid = PeriodicGrid::new(prepared.period, samples, prepared.memory_depth)?;
    let validation = validate_system(&prepared.system, &grid)?;
    if !validation.passed {
        return Err(CliError::Config(format!("system is not admissible: {validation:?}")));
    }
    let options = SpectrumOptions { match_tolerance, modes: cfg.modes, ..SpectrumOptions::default() };
    let dec = floquet_spectrum_with(&prepared.system, &grid, &options)?;
    let verification = verify_floquet_form(&prepared.system, &grid, &dec)?;
    log::info!("{} multipliers retained, worst residual {:.3e}", dec.p_retained(), verification.worst());

    ensure_dir(&opts.out)?;
    write_json(
        &opts.out,
        "spectrum.json",
        &SpectrumFile {
            config_sha256: &hash,
            system: prepared.name,
            operator_fingerprint: prepared.system.fingerprint(&grid),
            period: grid.period(),
            samples,
            memory_depth: grid.memory_depth(),
            truncation: prepared.truncation,
            match_tolerance,
            retained: dec.p_retained(),
            multipliers: &dec.multipliers,
        },
    )?;
    let n = prepared.system.dimension();
    let mut header = vec!["sigma".to_string()];
    for m in 0..dec.modes.len() {
        for c in 1..=n {
            header.push(format!("mode{m}_re_{c}"));
            header.push(format!("mode{m}_im_{c}"));
        }
    }
    let rows: Vec<Vec<String>> = (0..=samples)
        .map(|j| {
            let mut row = vec![number(j as f64 * grid.step())];
            for mode in &dec.modes {
                for z in mode.samples[j].iter() {
                    row.push(number(z.re));
                    row.push(number(z.im));
                }
            }
            row
        })
        .collect();
    write_csv(&opts.out, "modes.csv", &hash, &header, &rows)?;
    write_json(
        &opts.out,
        "verify.json",
        &VerifyFile {
            config_sha256: &hash,
            validation: &validation,
            verification: &verification,
            worst_residual: verification.worst(),
        },
    )?;
    Ok(0)
}

/// Reads `t, y1, ..., yn` rows with uniformly spaced `t`; a header line is allowed.
pub fn read_cycle(path: &Path, dimension: usize) -> Result<(f64, Vec<DVector<f64>>), CliError> {
    let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let values: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let values = match values {
            Ok(v) => v,
            Err(_) if i == 0 => continue,
            Err(e) => return Err(bad(format!("row {}: {e}", i + 1))),
        };
        if values.len() != dimension + 1 {
            return Err(bad(format!(
                "row {} has {} columns, expected {} (t and {dimension} state components)",
                i + 1,
                values.len(),
                dimension + 1
            )));
        }
        times.push(values[0]);
        samples.push(DVector::from_column_slice(&values[1..]));
    }
    if samples.len() < 9 {
        return Err(bad(format!("need at least 9 rows, got {}", samples.len())));
    }
    let period = times[times.len() - 1] - times[0];
    if !(period.is_finite() && period > 0.0) {
        return Err(bad(format!("time column must increase, spans {period}")));
    }
    let h = period / (times.len() - 1) as f64;
    if let Some(j) = (0..times.len()).find(|&j| (times[j] - times[0] - j as f64 * h).abs() > 1e-6 * h) {
        return Err(bad(format!("time column is not uniformly spaced at row {}", j + 1)));
    }
    Ok((period, samples))
}

#[derive(Serialize)]
struct CycleInfo {
    source: CycleSource,
    period: f64,
    intervals: usize,
    dimension: usize,
    wrap_residual: f64,
    residual: f64,
}

#[derive(Serialize)]
struct StabilityFile<'a> {
    config_sha256: &'a str,
    system: &'a str,
    autonomous: bool,
    cycle: CycleInfo,
    samples: usize,
    fd_step: f64,
    #[serde(flatten)]
    report: &'a StabilityReport,
    phase_mode_alignment: Option<f64>,
    multipliers: &'a [Multiplier],
}

pub fn stability(text: &str, opts: &Options) -> Result<i32, CliError> {
    let hash = fingerprint(text.as_bytes(), opts);
    let cfg: StabilityConfig = config::parse(text, &origin(opts))?;
    let field = builtins::nonlinear_system(&cfg.system);
    let n = field.system.dimension();
    let (period, samples, source) = match &cfg.cycle_file {
        Some(file) => {
            let base = opts.config.parent().unwrap_or(Path::new("."));
            let (t, s) = read_cycle(&base.join(file), n)?;
            (t, s, CycleSource::UserSupplied)
        }
        None => {
            let (t, s) = builtins::builtin_cycle(&cfg.system, opts.grid.unwrap_or(cfg.cycle_samples))?;
            (t, s, CycleSource::ExternallyComputed)
        }
    };
    let cycle = LimitCycle::new(period, samples, source)?;
    let residual = cycle.residual(&field.system);
    let linear = linearize(&field.system, &cycle, cfg.fd_step)?;
    let samples = opts.grid.or(cfg.samples).unwrap_or(cycle.intervals());
    let grid = PeriodicGrid::new(cycle.period(), samples, field.system.memory_depth())?;
    let options = SpectrumOptions { match_tolerance: cfg.match_tolerance, modes: 4, ..SpectrumOptions::default() };
    let dec = floquet_spectrum_with(&linear, &grid, &options)?;
    let autonomous = cfg.autonomous.unwrap_or(field.autonomous);
    let unit_tol = opts.tol.unwrap_or(cfg.unit_tol);
    let report = stability_verdict(&dec, autonomous, unit_tol)?;
    let alignment = report
        .trivial_multiplier
        .and_then(|mu| dec.modes.iter().find(|m| m.multiplier == mu))
        .and_then(|mode| phase_mode_alignment(mode, &cycle));
    log::info!("verdict {:?}, phase error {:?}", report.verdict, report.phase_error);

    ensure_dir(&opts.out)?;
    write_json(
        &opts.out,
        "stability.json",
        &StabilityFile {
            config_sha256: &hash,
            system: field.name,
            autonomous,
            cycle: CycleInfo {
                source: cycle.source(),
                period: cycle.period(),
                intervals: cycle.intervals(),
                dimension: n,
                wrap_residual: cycle.wrap_residual(),
                residual,
            },
            samples,
            fd_step: cfg.fd_step,
            report: &report,
            phase_mode_alignment: alignment,
            multipliers: &dec.multipliers,
        },
    )?;
    Ok(0)
}

#[derive(Serialize)]
struct ExtremaFile<'a> {
    config_sha256: &'a str,
    #[serde(flatten)]
    report: &'a ExtremaReport,
}

#[derive(Serialize)]
struct DiagnosticsFile<'a> {
    config_sha256: &'a str,
    lattice: f64,
    samples: usize,
    unit_tol: f64,
    energies: usize,
    failures: usize,
    success_fraction: f64,
    band_edges: Option<Vec<f64>>,
    records: &'a [BandRecord],
}

pub fn energy_grid(min: f64, max: f64, count: usize) -> Result<Vec<f64>, CliError> {
    if !(min.is_finite() && max.is_finite()) {
        return Err(CliError::Config(format!("energy range [{min}, {max}] is not finite")));
    }
    match count {
        0 => Err(CliError::Config("energy range is empty: count is 0".into())),
        1 if min == max => Ok(vec![min]),
        _ if max <= min => Err(CliError::Config(format!("energy range is empty: max {max} <= min {min}"))),
        1 => Err(CliError::Config("a single energy needs min == max".into())),
        _ => Ok((0..count).map(|i| min + (max - min) * i as f64 / (count - 1) as f64).collect()),
    }
}

pub fn bands(text: &str, opts: &Options) -> Result<i32, CliError> {
    let hash = fingerprint(text.as_bytes(), opts);
    let cfg: BandsConfig = config::parse(text, &origin(opts))?;
    let energies = energy_grid(cfg.energies.min, cfg.energies.max, cfg.energies.count)?;
    let pot = builtins::potential(&cfg.potential)?;
    let samples = opts.grid.unwrap_or(cfg.samples);
    let unit_tol = opts.tol.unwrap_or(cfg.unit_tol);
    let grid = PeriodicGrid::new(pot.lattice(), samples, 0.0)?;
    let diagram = band_scan(&pot, &energies, &grid, unit_tol)?;
    for rec in &diagram.records {
        if let Some(err) = &rec.error {
            log::warn!("E = {}: {err}", rec.energy);
        }
    }
    let failures = diagram.failures();
    let success_fraction = 1.0 - failures as f64 / energies.len() as f64;
    let extrema = detect_interior_extrema(&diagram);
    let edges = match cfg.edge_tolerance {
        Some(tol) if tol > 0.0 => Some(band_edges(&pot, &diagram, &grid, tol)?),
        Some(tol) => return Err(CliError::Config(format!("edge_tolerance must be positive, got {tol}"))),
        None => None,
    };

    ensure_dir(&opts.out)?;
    let width = diagram.records.iter().map(|r| r.p).max().unwrap_or(0);
    let mut header = vec!["energy".to_string(), "p".to_string()];
    header.extend((1..=width).map(|i| format!("k{i}")));
    let rows: Vec<Vec<String>> = diagram
        .records
        .iter()
        .map(|r| {
            let mut row = vec![number(r.energy), if r.error.is_some() { String::new() } else { r.p.to_string() }];
            row.extend(r.k_values.iter().map(|&k| number(k)));
            row
        })
        .collect();
    write_csv(&opts.out, "bands.csv", &hash, &header, &rows)?;
    write_json(&opts.out, "extrema.json", &ExtremaFile { config_sha256: &hash, report: &extrema })?;
    write_json(
        &opts.out,
        "diagnostics.json",
        &DiagnosticsFile {
            config_sha256: &hash,
            lattice: diagram.lattice,
            samples,
            unit_tol,
            energies: energies.len(),
            failures,
            success_fraction,
            band_edges: edges,
            records: &diagram.records,
        },
    )?;
    if success_fraction < MIN_SUCCESS_FRACTION {
        eprintln!("gfloquet: {failures} of {} energies failed", energies.len());
        return Ok(3);
    }
    Ok(0)
}
