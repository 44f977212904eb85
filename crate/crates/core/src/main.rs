//! Command-line entry point for the probe falsification harness.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use probe_falsify::attribution::{
    directional_attribution, emit_tempering_plan, magnitude_attribution, ArtifactThresholds,
    HeadActivations,
};
use probe_falsify::dataset::{load_labels, load_split, DatasetError, LoadedSplit};
use probe_falsify::error::MathError;
use probe_falsify::metrics::{assertion_matrix, coverage_to_label, positive_rate};
use probe_falsify::numerics::pca_top2;
use probe_falsify::pipeline::{
    run_pipeline, step1_cv, step2_fresh_transfer, PipelineError, PipelineReport, RunConfig,
    StepResult, Verdict,
};
use probe_falsify::report::{
    emit_plot_data, emit_report, to_canonical_json, PlotKind, ReportError,
};
use probe_falsify::synth::{write_bundle, HeadSynthConfig, SynthConfig};

#[derive(Parser)]
#[command(name = "probe-falsify", version, about = "Falsification harness for linear hidden-state probes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and check every input a run config references; no compute,
    /// no writes.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Execute the five-step pipeline and write the report.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Exit 1 when the final verdict is falsified (for CI).
        #[arg(long)]
        strict: bool,
        /// Emit plot data: --plot <kind> <path>; kinds are auc_collapse,
        /// axis_sweep, pca_scatter, asym_curve. Repeatable.
        #[arg(long = "plot", num_args = 2, value_names = ["KIND", "PATH"], action = ArgAction::Append)]
        plot: Vec<String>,
    },
    /// Fit and evaluate a single axis (CV + fresh transfer).
    Probe {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        axis: String,
        /// Comma-separated C values, e.g. 1.0,0.1.
        #[arg(long)]
        c_grid: Option<String>,
        #[arg(long)]
        k_folds: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the main gate's minimum AUC.
        #[arg(long)]
        gate_auc: Option<f64>,
        /// Override the main gate's maximum asymmetry.
        #[arg(long)]
        gate_asym: Option<f64>,
        #[arg(long)]
        assert_threshold: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank heads by cohort attribution and optionally emit a tempering
    /// plan.
    Attrib {
        /// Manifest naming the head activation file and labels.
        #[arg(long)]
        manifest: PathBuf,
        /// magnitude or directional.
        #[arg(long, default_value = "magnitude")]
        method: String,
        /// Emit a tempering plan over the top-k heads.
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long, default_value = "0.9,0.7,0.5,0.3")]
        lambdas: String,
        /// Plan output path (requires --top-k).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The 2x2 correctness-by-delivery matrix from a labels file.
    Baseline {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Project features to the top two principal components.
    Pca {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "factual")]
        axis: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate synthetic oracle datasets and a ready-to-run config.
    Synth {
        /// planted, cv-trap, null, collapse (two models), or attrib
        /// (planted plus head activations).
        #[arg(long, default_value = "planted")]
        preset: String,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Outcome categories mapped to process exit codes.
enum CliError {
    /// Bad flags, unreadable/invalid inputs: exit 2.
    Input(String),
    /// Numerical or unexpected internal failure: exit 3.
    Internal(String),
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<MathError> for CliError {
    fn from(e: MathError) -> Self {
        match e {
            MathError::Numerics(_) => CliError::Internal(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Step {
                source: MathError::Numerics(_),
                ..
            } => CliError::Internal(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Serialize(msg) => CliError::Internal(msg),
            _ => CliError::Input(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn dispatch(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Validate { config } => cmd_validate(&config),
        Command::Run {
            config,
            out,
            strict,
            plot,
        } => cmd_run(&config, &out, strict, &plot),
        Command::Probe {
            config,
            axis,
            c_grid,
            k_folds,
            seed,
            gate_auc,
            gate_asym,
            assert_threshold,
            out,
        } => cmd_probe(
            &config,
            &axis,
            c_grid.as_deref(),
            k_folds,
            seed,
            gate_auc,
            gate_asym,
            assert_threshold,
            out.as_deref(),
        ),
        Command::Attrib {
            manifest,
            method,
            top_k,
            lambdas,
            out,
        } => cmd_attrib(&manifest, &method, top_k, &lambdas, out.as_deref()),
        Command::Baseline { labels, out } => cmd_baseline(&labels, out.as_deref()),
        Command::Pca {
            manifest,
            axis,
            out,
        } => cmd_pca(&manifest, &axis, &out),
        Command::Synth {
            preset,
            out_dir,
            seed,
        } => cmd_synth(&preset, &out_dir, seed),
    }
}

fn cmd_validate(config_path: &Path) -> Result<u8, CliError> {
    let config = RunConfig::load(config_path)?;
    let base = base_dir(config_path);

    let mut checked = Vec::new();
    let mut specs = vec![("a", &config.models.a)];
    if let Some(b) = &config.models.b {
        specs.push(("b", b));
    }
    for (name, spec) in specs {
        for (split_name, rel) in [
            ("train", &spec.train_manifest),
            ("fresh", &spec.fresh_manifest),
        ] {
            let path = resolve(&base, rel);
            let split = load_split(&path)?;
            let anchor = config.anchor_axis();
            if split.dataset.axis_labels(anchor).is_none() {
                return Err(CliError::Input(format!(
                    "model {name} {split_name}: anchor axis '{anchor}' missing"
                )));
            }
            checked.push(format!(
                "model {name} {split_name}: n={} d={} axes=[{}] pos_rate({})={:.6}",
                split.dataset.n,
                split.dataset.d,
                split.dataset.axes().join(", "),
                anchor,
                positive_rate(split.dataset.axis_labels(anchor).unwrap()),
            ));
        }
    }
    for line in checked {
        println!("ok: {line}");
    }
    println!("ok: config valid");
    Ok(0)
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn verdict_name(report: &PipelineReport) -> &'static str {
    match report.final_verdict {
        Verdict::OperatorSurvives => "operator_survives",
        Verdict::Falsified => "falsified",
    }
}

fn print_step_line(step: &StepResult) {
    let best = step.best();
    println!(
        "step {:?}: best_c={:.6} auc={:.6} asym={:.6} gate={}{}",
        step.step_id,
        step.best_c,
        best.auc,
        best.asymmetry.asymmetry,
        if step.gate.passed { "PASS" } else { "FAIL" },
        if step.gate.degenerate_override {
            " (degenerate override)"
        } else {
            ""
        },
    );
}

fn cmd_run(config_path: &Path, out: &Path, strict: bool, plot: &[String]) -> Result<u8, CliError> {
    let plots: Vec<(PlotKind, PathBuf)> = plot
        .chunks(2)
        .map(|pair| {
            let kind: PlotKind = pair[0].parse()?;
            Ok((kind, PathBuf::from(&pair[1])))
        })
        .collect::<Result<_, ReportError>>()?;

    let config = RunConfig::load(config_path)?;
    let (report, bundle) = run_pipeline(&config, &base_dir(config_path))?;

    emit_report(&report, out)?;
    for (kind, path) in &plots {
        emit_plot_data(*kind, &bundle, path)?;
    }

    for step in &report.steps {
        print_step_line(step);
    }
    println!(
        "failure_mode={} final_verdict={}",
        to_canonical_json(&report.failure_mode)?.trim().trim_matches('"'),
        verdict_name(&report)
    );
    println!("report written to {}", out.display());

    if strict && report.final_verdict == Verdict::Falsified {
        return Ok(1);
    }
    Ok(0)
}

#[derive(Serialize)]
struct ProbeOutput {
    axis: String,
    cv: StepResult,
    fresh: StepResult,
}

#[allow(clippy::too_many_arguments)]
fn cmd_probe(
    config_path: &Path,
    axis: &str,
    c_grid: Option<&str>,
    k_folds: Option<usize>,
    seed: Option<u64>,
    gate_auc: Option<f64>,
    gate_asym: Option<f64>,
    assert_threshold: Option<f64>,
    out: Option<&Path>,
) -> Result<u8, CliError> {
    let config = RunConfig::load(config_path)?;
    let base = base_dir(config_path);
    let train = load_split(&resolve(&base, &config.models.a.train_manifest))?;
    let fresh = load_split(&resolve(&base, &config.models.a.fresh_manifest))?;

    let grid = match c_grid {
        Some(raw) => parse_f64_list(raw)?,
        None => config.c_grid.clone(),
    };
    let k = k_folds.unwrap_or(config.k_folds);
    let seed = seed.unwrap_or(config.seed);
    let mut main_gate = config.gates.main;
    if let Some(v) = gate_auc {
        main_gate.min_auc = v;
    }
    if let Some(v) = gate_asym {
        main_gate.max_asym = v;
    }
    let mut passthrough = config.gates.passthrough;
    if let Some(v) = assert_threshold {
        main_gate.assert_threshold = v;
        passthrough.assert_threshold = v;
    }
    main_gate
        .validate("gate overrides")
        .map_err(|e| CliError::Input(e.to_string()))?;

    let det = &config.detectors;
    let cv = step1_cv(&train.dataset, axis, &grid, &passthrough, k, seed, det)
        .map_err(CliError::from)?;
    let transfer =
        step2_fresh_transfer(&train.dataset, &fresh.dataset, axis, &grid, &main_gate, det)
            .map_err(CliError::from)?;

    let output = ProbeOutput {
        axis: axis.to_string(),
        cv,
        fresh: transfer.result,
    };
    let text = to_canonical_json(&output)?;
    print!("{text}");
    if let Some(path) = out {
        std::fs::write(path, &text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    }
    Ok(0)
}

fn parse_f64_list(raw: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Input(format!("bad number '{s}' in list")))
        })
        .collect()
}

fn head_activations_from_split(split: &LoadedSplit) -> Result<HeadActivations, CliError> {
    let tensor = split
        .head_activations
        .as_ref()
        .ok_or_else(|| CliError::Input("manifest names no head_activation_file".to_string()))?;
    let acts = tensor.to_array3()?;
    let labels = split
        .dataset
        .axis_labels("factual")
        .ok_or_else(|| CliError::Input("labels lack a factual axis for cohorts".to_string()))?;
    HeadActivations::new(acts, labels.to_vec(), None).map_err(CliError::from)
}

#[derive(Serialize)]
struct AttribInvocation<'a> {
    manifest: String,
    method: &'a str,
    top_k: Option<usize>,
    lambdas: &'a [f64],
}

fn cmd_attrib(
    manifest_path: &Path,
    method: &str,
    top_k: Option<usize>,
    lambdas_raw: &str,
    out: Option<&Path>,
) -> Result<u8, CliError> {
    let split = load_split(manifest_path)?;
    let head_acts = head_activations_from_split(&split)?;
    let lambdas = parse_f64_list(lambdas_raw)?;

    let ranked = match method {
        "magnitude" => magnitude_attribution(&head_acts)?,
        "directional" => directional_attribution(&head_acts, &ArtifactThresholds::default())?,
        other => {
            return Err(CliError::Input(format!(
                "unknown method '{other}' (magnitude or directional)"
            )))
        }
    };
    print!("{}", to_canonical_json(&ranked)?);

    if let Some(k) = top_k {
        let invocation = AttribInvocation {
            manifest: manifest_path.display().to_string(),
            method,
            top_k,
            lambdas: &lambdas,
        };
        let mut hasher = Sha256::new();
        hasher.update(to_canonical_json(&invocation)?.as_bytes());
        let generated_from = format!("{:x}", hasher.finalize());

        let plan = emit_tempering_plan(&ranked, k, &lambdas, method, &generated_from)?;
        let text = to_canonical_json(&plan)?;
        match out {
            Some(path) => {
                std::fs::write(path, &text)
                    .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                println!("plan written to {}", path.display());
            }
            None => print!("{text}"),
        }
    } else if out.is_some() {
        return Err(CliError::Input("--out requires --top-k".to_string()));
    }
    Ok(0)
}

#[derive(Serialize)]
struct BaselineOutput {
    n: usize,
    correct_assertive: usize,
    correct_hedged: usize,
    wrong_assertive: usize,
    wrong_hedged: usize,
    p_assert_correct: f64,
    p_assert_wrong: f64,
    asymmetry: f64,
}

fn cmd_baseline(labels_path: &Path, out: Option<&Path>) -> Result<u8, CliError> {
    let records = load_labels(labels_path)?;
    if records.is_empty() {
        return Err(CliError::Input("labels file has no records".to_string()));
    }
    let mut correct = Vec::with_capacity(records.len());
    let mut assertive = Vec::with_capacity(records.len());
    for rec in &records {
        let coverage = rec
            .coverage
            .ok_or_else(|| CliError::Input(format!("record '{}' lacks coverage", rec.id)))?;
        let is_assertive = rec.assertive.ok_or_else(|| {
            CliError::Input(format!("record '{}' lacks the assertive flag", rec.id))
        })?;
        correct.push(coverage_to_label(coverage, 0.5)? == 1);
        assertive.push(is_assertive);
    }
    let (matrix, asymmetry) = assertion_matrix(&correct, &assertive)?;
    let output = BaselineOutput {
        n: matrix.n(),
        correct_assertive: matrix.correct_assertive,
        correct_hedged: matrix.correct_hedged,
        wrong_assertive: matrix.wrong_assertive,
        wrong_hedged: matrix.wrong_hedged,
        p_assert_correct: matrix.p_assert_correct(),
        p_assert_wrong: matrix.p_assert_wrong(),
        asymmetry,
    };
    let text = to_canonical_json(&output)?;
    print!("{text}");
    if let Some(path) = out {
        std::fs::write(path, &text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    }
    Ok(0)
}

fn cmd_pca(manifest_path: &Path, axis: &str, out: &Path) -> Result<u8, CliError> {
    let split = load_split(manifest_path)?;
    let x = split.dataset.features.to_array2()?;
    let labels = split
        .dataset
        .axis_labels(axis)
        .ok_or_else(|| CliError::Input(format!("axis '{axis}' missing from labels")))?;
    let points = pca_top2(&x)?;
    println!(
        "explained_variance=[{:.6}, {:.6}] n={}",
        points.explained_variance[0],
        points.explained_variance[1],
        points.coords.len()
    );
    let bundle = probe_falsify::pipeline::PlotBundle {
        pca: Some((points, labels.to_vec())),
        ..Default::default()
    };
    emit_plot_data(PlotKind::PcaScatter, &bundle, out)?;
    println!("scatter written to {}", out.display());
    Ok(0)
}

fn cmd_synth(preset: &str, out_dir: &Path, seed: Option<u64>) -> Result<u8, CliError> {
    let seed_a = seed.unwrap_or(42);
    let mut model_b: Option<SynthConfig> = None;
    let mut head_cfg: Option<HeadSynthConfig> = None;

    let model_a = match preset {
        "planted" => SynthConfig {
            seed: seed_a,
            ..SynthConfig::default()
        },
        "cv-trap" => SynthConfig {
            signal_in_fresh: false,
            seed: seed_a,
            ..SynthConfig::default()
        },
        "null" => SynthConfig {
            signal_strength: 0.0,
            seed: seed_a,
            ..SynthConfig::default()
        },
        "collapse" => {
            // model A: in-distribution signal that vanishes on fresh;
            // model B: no signal plus a fresh positive-rate cliff
            model_b = Some(SynthConfig {
                signal_strength: 0.0,
                base_rate_train: 0.56,
                base_rate_fresh: 0.047,
                seed: seed_a + 1,
                ..SynthConfig::default()
            });
            SynthConfig {
                signal_in_fresh: false,
                base_rate_train: 0.58,
                base_rate_fresh: 0.285,
                n_layers: 4,
                signal_layer: 3,
                n_null_axes: 4,
                seed: seed_a,
                ..SynthConfig::default()
            }
        }
        "attrib" => {
            head_cfg = Some(HeadSynthConfig {
                seed: seed_a,
                ..HeadSynthConfig::default()
            });
            SynthConfig {
                seed: seed_a,
                ..SynthConfig::default()
            }
        }
        other => {
            return Err(CliError::Input(format!(
                "unknown preset '{other}' (planted, cv-trap, null, collapse, attrib)"
            )))
        }
    };

    let paths_a = write_bundle(out_dir, "model_a", &model_a, head_cfg.as_ref())?;
    let models_b = match &model_b {
        Some(cfg) => {
            let paths_b = write_bundle(out_dir, "model_b", cfg, None)?;
            Some(probe_falsify::pipeline::ModelSpec {
                train_manifest: paths_b.train_manifest,
                fresh_manifest: paths_b.fresh_manifest,
            })
        }
        None => None,
    };

    let mut axes = vec!["factual".to_string()];
    for k in 0..model_a.n_null_axes {
        axes.push(format!("null-{}", k + 1));
    }
    let config = RunConfig {
        models: probe_falsify::pipeline::Models {
            a: probe_falsify::pipeline::ModelSpec {
                train_manifest: paths_a.train_manifest,
                fresh_manifest: paths_a.fresh_manifest,
            },
            b: models_b,
        },
        axes,
        c_grid: vec![1.0, 0.1],
        k_folds: 5,
        seed: seed_a,
        gates: Default::default(),
        detectors: Default::default(),
        steps: None,
    };
    let config_path = out_dir.join("run_config.json");
    std::fs::write(&config_path, to_canonical_json(&config)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", config_path.display())))?;
    println!("bundle written to {}", out_dir.display());
    println!("run config: {}", config_path.display());
    Ok(0)
}
