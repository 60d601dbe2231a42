mod args;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde::de::DeserializeOwned;

use args::{
    AuditArgs, AuditArm, BasisArg, CalibrateArgs, CenteringArg, Cli, Command, FeatureFormat, PlotArgs, SynthArgs,
};
use subaudit_core::cohort::{
    attach_features, partition, read_cohort_csv, read_features, write_cohort_csv, write_feature_bin, write_feature_csv,
};
use subaudit_core::error::{AuditError, ErrorKind};
use subaudit_core::featspace::{AgeBracketing, Bandwidth};
use subaudit_core::hyptest::{Centering, ConoverBasis};
use subaudit_core::pipeline::{
    calibrate, run_audit, ArmSelection, AuditConfig, AuditReport, CalibrationConfig, InputDigest,
};
use subaudit_core::report::{calibration_csv, default_figures, emit_figures, emit_tables, write_outputs};
use subaudit_core::synth::{generate_cohort, CohortSpec};

type Result<T> = std::result::Result<T, AuditError>;

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Validation => 1,
        ErrorKind::Data => 2,
        ErrorKind::Degenerate => 3,
    }
}

fn kind_name(kind: ErrorKind) -> &'static str {
    match kind {
        ErrorKind::Validation => "validation",
        ErrorKind::Data => "data",
        ErrorKind::Degenerate => "degenerate",
    }
}

/// One `key=value` diagnostic line; the message is quoted and kept on one line.
fn diag(level: &str, code: &str, msg: &str) {
    let msg = msg
        .replace('\\', "\\\\")
        .replace('"', "\\\"")
        .replace(['\n', '\r'], " ");
    eprintln!("level={level} code={code} msg=\"{msg}\"");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            diag("error", "validation", first.trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    if let Err(e) = configure_threads() {
        diag("error", kind_name(e.kind()), &e.to_string());
        return ExitCode::from(exit_code(e.kind()));
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            diag("error", kind_name(e.kind()), &e.to_string());
            ExitCode::from(exit_code(e.kind()))
        }
    }
}

/// Sizes the global pool from AUDIT_THREADS when set.
fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("AUDIT_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| AuditError::Invalid(format!("AUDIT_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| AuditError::Invalid(format!("cannot size thread pool: {e}")))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Audit { arm } => match arm {
            AuditArm::Perf(a) => audit(a, ArmSelection::PERFORMANCE),
            AuditArm::Features(a) => audit(a, ArmSelection::FEATURES),
            AuditArm::All(a) => audit(a, ArmSelection::ALL),
        },
        Command::Synth(a) => synth(a),
        Command::Calibrate(a) => calibrate_cmd(a),
        Command::Plot(a) => plot(a),
    }
}

/// Parses a JSON options file. Returns the value and whether it set `seed`.
fn load_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<(T, bool)> {
    let text =
        std::fs::read_to_string(path).map_err(|e| AuditError::Invalid(format!("{what} {}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| AuditError::Invalid(format!("{what} {}: {e}", path.display())))?;
    let has_seed = value.get("seed").is_some();
    let parsed =
        serde_json::from_value(value).map_err(|e| AuditError::Invalid(format!("{what} {}: {e}", path.display())))?;
    Ok((parsed, has_seed))
}

fn centering(c: CenteringArg) -> Centering {
    match c {
        CenteringArg::Mean => Centering::Mean,
        CenteringArg::Median => Centering::Median,
    }
}

fn parse_bandwidth(raw: &str) -> Result<Bandwidth> {
    match raw.to_ascii_lowercase().as_str() {
        "scott" => Ok(Bandwidth::Scott),
        "silverman" => Ok(Bandwidth::Silverman),
        other => other
            .parse::<f64>()
            .ok()
            .filter(|h| *h > 0.0 && h.is_finite())
            .map(Bandwidth::Fixed)
            .ok_or_else(|| {
                AuditError::Invalid(format!(
                    "bandwidth must be scott, silverman or a positive number, got {raw:?}"
                ))
            }),
    }
}

fn random_seed() -> u64 {
    rand::random()
}

/// Defaults, then the config file, then flags. Returns the config and
/// whether the seed was generated here.
fn audit_config(a: &AuditArgs) -> Result<(AuditConfig, bool)> {
    let (mut c, file_seed) = match &a.config {
        Some(p) => load_json::<AuditConfig>(p, "config")?,
        None => (AuditConfig::default(), false),
    };
    let mut generated = false;
    match a.seed {
        Some(s) => c.seed = s,
        None if !file_seed => {
            c.seed = random_seed();
            generated = true;
        }
        None => {}
    }
    if let Some(v) = a.alpha {
        c.alpha = v;
    }
    if let Some(v) = a.sample_size {
        c.sample_size = Some(v);
    }
    if let Some(v) = a.repeats {
        c.repeats = v;
    }
    if let Some(v) = a.modes {
        c.modes = v;
    }
    if let Some(v) = a.levene_centering {
        c.levene_centering = centering(v);
    }
    if let Some(v) = a.conover_basis {
        c.conover_basis = match v {
            BasisArg::Groups => ConoverBasis::Groups,
            BasisArg::Omnibus => ConoverBasis::Omnibus,
        };
    }
    if a.posthoc_adjust {
        c.posthoc_adjust = true;
    }
    if let Some(v) = &a.bandwidth {
        c.bandwidth = parse_bandwidth(v)?;
    }
    if let Some(v) = a.kde_grid_points {
        c.kde_grid_points = v;
    }
    if let Some(v) = a.viz_brackets {
        c.viz_brackets = v;
    }
    if let Some(v) = &a.viz_edges {
        c.viz_edges = Some(AgeBracketing::new(v.clone()).map_err(|e| e.context("--viz-edges"))?);
    }
    if let Some(v) = &a.test_edges {
        c.test_brackets = AgeBracketing::new(v.clone()).map_err(|e| e.context("--test-edges"))?;
    }
    if let Some(v) = a.feature_sample_size {
        c.feature_sample_size = Some(v);
    }
    if a.no_full {
        c.run_full = false;
    }
    if a.no_balanced {
        c.run_balanced = false;
    }
    if a.no_feature_balanced {
        c.feature_balanced = false;
    }
    if a.no_kde {
        c.kde = false;
    }
    c.validate()?;
    Ok((c, generated))
}

fn audit(a: AuditArgs, selection: ArmSelection) -> Result<()> {
    let (config, generated) = audit_config(&a)?;
    if selection.features && a.features.is_none() {
        return Err(AuditError::Invalid("the feature audit needs --features".into()));
    }
    if generated {
        diag("info", "seed", &format!("no --seed given; using {}", config.seed));
    }

    let mut inputs = vec![InputDigest::of_file("cohort", &a.cohort)?];
    let mut records = read_cohort_csv(&a.cohort)?;
    let features = match (&a.features, selection.features) {
        (Some(path), true) => {
            inputs.push(InputDigest::of_file("features", path)?);
            if let Some(ids) = &a.feature_ids {
                inputs.push(InputDigest::of_file("feature_ids", ids)?);
            }
            let m = read_features(path, a.feature_ids.as_deref())?;
            let missing = attach_features(&mut records, &m);
            if missing > 0 {
                diag(
                    "warn",
                    "features",
                    &format!("{missing} cohort records have no feature row"),
                );
            }
            Some(m)
        }
        _ => None,
    };
    let part = partition(records)?;
    let report = run_audit(&part, features.as_ref(), &config, selection, inputs, generated)?;
    let paths = write_outputs(&report, &a.out)?;
    print_paths(&paths);
    Ok(())
}

fn print_paths(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut spec = match &a.spec {
        Some(p) => load_json::<CohortSpec>(p, "spec")?.0,
        None => CohortSpec::default(),
    };
    if let Some(n) = a.uniform {
        let seed = spec.seed;
        let features = spec.features.clone();
        spec = CohortSpec::uniform(n, seed);
        spec.features = features;
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(d) = a.dim {
        spec.features.dim = d;
    }
    spec.validate()?;
    let (records, features) = generate_cohort(&spec)?;
    std::fs::create_dir_all(&a.out).map_err(|e| AuditError::io(&a.out, e))?;
    let cohort = a.out.join("cohort.csv");
    write_cohort_csv(&cohort, &records)?;
    let mut written = vec![cohort];
    match a.feature_format {
        FeatureFormat::Csv => {
            let path = a.out.join("features.csv");
            write_feature_csv(&path, &features)?;
            written.push(path);
        }
        FeatureFormat::Bin => {
            let (path, ids) = (a.out.join("features.bin"), a.out.join("features.bin.ids"));
            write_feature_bin(&path, &ids, &features)?;
            written.extend([path, ids]);
        }
    }
    let spec_path = a.out.join("spec.json");
    let json = serde_json::to_string_pretty(&spec).expect("spec serializes") + "\n";
    std::fs::write(&spec_path, json).map_err(|e| AuditError::io(&spec_path, e))?;
    written.push(spec_path);
    for p in &written {
        let d = InputDigest::of_file("output", p)?;
        println!("{}  {}", d.sha256, p.display());
    }
    Ok(())
}

fn calibrate_cmd(a: CalibrateArgs) -> Result<()> {
    let (mut c, file_seed) = match &a.config {
        Some(p) => load_json::<CalibrationConfig>(p, "config")?,
        None => (CalibrationConfig::default(), false),
    };
    match a.seed {
        Some(s) => c.seed = s,
        None if !file_seed => {
            c.seed = random_seed();
            diag("info", "seed", &format!("no --seed given; using {}", c.seed));
        }
        None => {}
    }
    if let Some(v) = a.trials {
        c.trials = v;
    }
    if let Some(v) = a.group_size {
        c.group_size = v;
    }
    if let Some(v) = a.alpha {
        c.alpha = v;
    }
    if let Some(v) = a.levene_centering {
        c.levene_centering = centering(v);
    }
    if let Some(v) = a.modes {
        c.modes = v;
    }
    if let Some(v) = a.feature_dim {
        c.feature_dim = v;
    }
    if let Some(v) = a.error_sd {
        c.error_sd = v;
    }
    if let Some(v) = a.confidence {
        c.confidence = v;
    }
    c.validate()?;
    let summary = calibrate(&c)?;
    println!(
        "{:<36} {:>6} {:>8} {:>17} covers alpha",
        "test", "reject", "rate", "interval"
    );
    for r in &summary.rates {
        println!(
            "{:<36} {:>6} {:>8.4} [{:.4}, {:.4}] {}",
            r.test, r.rejections, r.rate, r.ci_low, r.ci_high, r.covers_alpha
        );
    }
    if let Some(out) = &a.out {
        std::fs::create_dir_all(out).map_err(|e| AuditError::io(out, e))?;
        let json_path = out.join("calibration.json");
        let json = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
        std::fs::write(&json_path, json).map_err(|e| AuditError::io(&json_path, e))?;
        let csv_path = out.join("calibration.csv");
        std::fs::write(&csv_path, calibration_csv(&summary)?).map_err(|e| AuditError::io(&csv_path, e))?;
    }
    Ok(())
}

fn plot(a: PlotArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.report).map_err(|e| AuditError::io(&a.report, e))?;
    let report = AuditReport::from_json(&text).map_err(|e| e.context(a.report.display().to_string()))?;
    std::fs::create_dir_all(&a.out).map_err(|e| AuditError::io(&a.out, e))?;
    let mut paths = emit_tables(&report, &a.out)?;
    paths.extend(emit_figures(&report, &default_figures(), &a.out)?);
    print_paths(&paths);
    Ok(())
}
