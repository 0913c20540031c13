//! Stage implementations behind the subcommands: each one loads its
//! inputs, runs a library operation, writes the stage's files into the
//! output directory, and prints a short summary.

use crate::config::{
    build_grid, build_train_config, parse_override, parse_range, parse_shape, pick, pick_opt,
    PipelineConfig,
};
use clap::Args;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use symkan::analysis::{
    add_noise, energy_error, format_comparison, kendall_tau, morris, pearson, rmse, spearman,
    ComparisonRow, Mlp, MlpTrainConfig, MorrisConfig, train_mlp,
};
use symkan::data::{generate_dab, load_csv, load_csv_matrix, DabParams, Dataset};
use symkan::network::EdgeActivation;
use symkan::plot::write_plots;
use symkan::symbolic::{emit_formula, refine, snap_network, RefineConfig, SnapConfig};
use symkan::training::{prune, train, TraceRow};
use symkan::unsupervised::{train_unsupervised, UnsupervisedConfig};
use symkan::{Error, KanNetwork, Result};

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON config file; explicit flags take precedence over it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for stage outputs (model.json, reports, plots/)
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Seed for every random choice this command makes
    #[arg(long)]
    pub seed: Option<u64>,
}

impl CommonArgs {
    fn file_config(&self) -> Result<PipelineConfig> {
        match &self.config {
            Some(path) => PipelineConfig::load(path),
            None => Ok(PipelineConfig::default()),
        }
    }
}

struct StagePaths {
    out_dir: PathBuf,
}

impl StagePaths {
    fn new(out_dir: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&out_dir)?;
        Ok(Self { out_dir })
    }

    fn model(&self) -> PathBuf {
        self.out_dir.join("model.json")
    }

    fn formula(&self) -> PathBuf {
        self.out_dir.join("formula.txt")
    }

    fn train_trace(&self) -> PathBuf {
        self.out_dir.join("train_trace.csv")
    }

    fn prune_report(&self) -> PathBuf {
        self.out_dir.join("prune_report.json")
    }

    fn snap_report(&self) -> PathBuf {
        self.out_dir.join("snap_report.json")
    }

    fn metrics(&self) -> PathBuf {
        self.out_dir.join("metrics.csv")
    }

    fn importance(&self) -> PathBuf {
        self.out_dir.join("importance_report.json")
    }

    fn plots(&self) -> PathBuf {
        self.out_dir.join("plots")
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn write_trace_csv(path: &Path, trace: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["step", "total", "prediction", "l1", "entropy"])?;
    for row in trace {
        w.write_record([
            row.step.to_string(),
            format!("{:?}", row.total),
            format!("{:?}", row.prediction),
            format!("{:?}", row.l1),
            format!("{:?}", row.entropy),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Plot emission never aborts a stage; a failure becomes a warning.
fn plots_best_effort(net: &KanNetwork, xs: &[Vec<f64>], dir: &Path) {
    if let Err(e) = write_plots(net, xs, dir) {
        eprintln!("warning: plot emission failed: {e}");
    }
}

fn load_split(
    data: &Path,
    features: Option<&[String]>,
    target: &str,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let (dataset, stats) = load_csv(data, features, target)?;
    if stats.rows_dropped > 0 {
        eprintln!(
            "warning: dropped {} of {} rows with missing or non-numeric values",
            stats.rows_dropped, stats.rows_read
        );
    }
    dataset.split(train_fraction, seed)
}

/// Normalize a dataset into the network's training space.
fn to_normalized(net: &KanNetwork, ds: &Dataset) -> (Vec<Vec<f64>>, Vec<f64>) {
    let zs = net.input_normalizer().apply_all(&ds.xs);
    let yn = ds
        .ys
        .iter()
        .map(|&y| net.output_denormalizer().normalize(y))
        .collect();
    (zs, yn)
}

/// Multiplicative noise on every feature value, row-major deterministic.
fn noisy_inputs(xs: &[Vec<f64>], level: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    if level == 0.0 {
        return Ok(xs.to_vec());
    }
    let width = xs.first().map_or(0, Vec::len);
    let flat: Vec<f64> = xs.iter().flatten().copied().collect();
    let noisy = add_noise(&flat, level, seed)?;
    Ok(noisy.chunks(width).map(<[f64]>::to_vec).collect())
}

/// List spline edges as human-readable coordinates.
fn spline_edges(net: &KanNetwork) -> Vec<String> {
    let mut found = Vec::new();
    for (l, layer) in net.layers().iter().enumerate() {
        for j in 0..layer.n_out() {
            for i in 0..layer.n_in() {
                if matches!(layer.edge(j, i), EdgeActivation::Spline { .. }) {
                    found.push(format!("{l}/{j}/{i}"));
                }
            }
        }
    }
    found
}

fn write_formula(net: &KanNetwork, path: &Path) -> Result<String> {
    let expr = emit_formula(net)?;
    let rounded = format!("{} = {}", net.target_name(), expr.render_rounded(2));
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "{rounded}")?;
    writeln!(file)?;
    writeln!(file, "{}", expr.render_full())?;
    Ok(rounded)
}

#[derive(Debug, Args)]
pub struct SimulateDabArgs {
    /// Output CSV path
    #[arg(long, default_value = "dab.csv")]
    pub out: PathBuf,
    /// Number of rows to draw
    #[arg(long, default_value_t = 50_000)]
    pub rows: usize,
    /// Phase-shift ratio range, as lo,hi inside (0, 1)
    #[arg(long, default_value = "0.3,0.7")]
    pub d_range: String,
    /// Drop rows whose D falls strictly inside this lo,hi band
    #[arg(long)]
    pub exclude: Option<String>,
    /// Input-side DC voltage
    #[arg(long, default_value_t = 100.0)]
    pub v_in: f64,
    /// Transformer turns ratio
    #[arg(long, default_value_t = 1.0)]
    pub turns_ratio: f64,
    /// Series inductance in henries
    #[arg(long, default_value_t = 60e-6)]
    pub inductance: f64,
    /// Switching frequency in hertz
    #[arg(long, default_value_t = 50e3)]
    pub frequency: f64,
    /// Transferred power in watts
    #[arg(long, default_value_t = 100.0 / 3.0)]
    pub power: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, serde::Serialize)]
struct DabSidecar {
    rows_written: usize,
    d_range: (f64, f64),
    exclude: Option<(f64, f64)>,
    v_in: f64,
    turns_ratio: f64,
    inductance: f64,
    frequency: f64,
    power: f64,
    coefficient: f64,
    seed: u64,
}

pub fn stage_simulate_dab(args: &SimulateDabArgs) -> Result<()> {
    let d_range = parse_range(&args.d_range)?;
    let exclude = args.exclude.as_deref().map(parse_range).transpose()?;
    let params = DabParams {
        v_in: args.v_in,
        n: args.turns_ratio,
        l: args.inductance,
        f: args.frequency,
        p: args.power,
    };
    let mut dataset = generate_dab(&params, d_range, args.rows, args.seed)?;
    if let Some((lo, hi)) = exclude {
        if !(lo < hi) {
            return Err(Error::InvalidConfig(format!(
                "exclusion band ({lo}, {hi}) is empty"
            )));
        }
        let keep: Vec<usize> = (0..dataset.len())
            .filter(|&i| {
                let d = dataset.xs[i][0];
                d <= lo || d >= hi
            })
            .collect();
        if keep.is_empty() {
            return Err(Error::NoUsableRows);
        }
        dataset = Dataset::new(
            dataset.feature_names.clone(),
            dataset.target_name.clone(),
            keep.iter().map(|&i| dataset.xs[i].clone()).collect(),
            keep.iter().map(|&i| dataset.ys[i]).collect(),
        )?;
    }
    dataset.to_csv(&args.out)?;
    let sidecar = DabSidecar {
        rows_written: dataset.len(),
        d_range,
        exclude,
        v_in: params.v_in,
        turns_ratio: params.n,
        inductance: params.l,
        frequency: params.f,
        power: params.p,
        coefficient: params.coefficient(),
        seed: args.seed,
    };
    let meta_path = args.out.with_extension("meta.json");
    write_json(&meta_path, &sidecar)?;
    println!(
        "wrote {} rows to {} (coefficient {:.6})",
        dataset.len(),
        args.out.display(),
        params.coefficient()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Dataset CSV
    #[arg(long)]
    pub data: PathBuf,
    /// Layer widths, comma separated (input first)
    #[arg(long)]
    pub shape: Option<String>,
    /// Spline grid as intervals,order
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Feature columns, comma separated; default is every non-target column
    #[arg(long)]
    pub features: Option<String>,
    /// Target column name
    #[arg(long)]
    pub target: Option<String>,
}

fn split_names(spec: &str) -> Vec<String> {
    spec.split(',').map(|s| s.trim().to_string()).collect()
}

pub fn stage_train(args: &TrainArgs) -> Result<()> {
    let file = args.common.file_config()?;
    let seed = pick(args.common.seed, file.seed, 0);
    let paths = StagePaths::new(pick(
        args.common.out_dir.clone(),
        file.out_dir.clone(),
        PathBuf::from("."),
    ))?;
    let shape = match &args.shape {
        Some(s) => parse_shape(s)?,
        None => file
            .shape
            .clone()
            .ok_or_else(|| Error::InvalidConfig("no network shape given".into()))?,
    };
    let grid_settings = match &args.grid {
        Some(s) => {
            let (g, k) = parse_range(s)?;
            if g.fract() != 0.0 || k.fract() != 0.0 || g < 1.0 || k < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "grid '{s}' must be positive integers intervals,order"
                )));
            }
            Some(crate::config::GridSettings {
                intervals: g as usize,
                order: k as usize,
            })
        }
        None => file.grid,
    };
    let grid = build_grid(grid_settings)?;
    let train_fraction = pick(args.train_fraction, file.train_fraction, 0.8);
    let features = pick_opt(args.features.as_deref().map(split_names), file.features.clone());
    let target = pick(args.target.clone(), file.target.clone(), "V_out".into());
    let train_config = build_train_config(
        &file,
        args.lambda,
        args.learning_rate,
        args.max_steps,
        args.batch_size,
        seed,
    );

    let (train_ds, _test) = load_split(
        &args.data,
        features.as_deref(),
        &target,
        train_fraction,
        seed,
    )?;
    if shape[0] != train_ds.n_features() {
        return Err(Error::InvalidConfig(format!(
            "shape starts with {} inputs but the dataset has {} features",
            shape[0],
            train_ds.n_features()
        )));
    }

    let (normalizer, constant) =
        symkan::data::Normalizer::fit(&train_ds.xs, &train_ds.feature_names)?;
    for name in &constant {
        eprintln!("warning: feature '{name}' is constant; it normalizes to 0");
    }
    let denormalizer = symkan::data::Denormalizer::fit(&train_ds.ys)?;

    let mut net = KanNetwork::init(&shape, &grid, seed)?;
    net.set_scaling(normalizer, denormalizer)?;
    net.set_names(train_ds.feature_names.clone(), target.clone())?;

    let (zs, yn) = to_normalized(&net, &train_ds);
    let report = train(&mut net, &zs, &yn, &train_config)?;

    net.save(&paths.model())?;
    write_trace_csv(&paths.train_trace(), &report.trace)?;
    plots_best_effort(&net, &train_ds.xs, &paths.plots());

    match report.converged_at {
        Some(step) => println!(
            "trained shape {shape:?} for {} steps (converged at step {step})",
            report.steps_run
        ),
        None => println!("trained shape {shape:?} for {} steps", report.steps_run),
    }
    println!(
        "final loss: total {:.6e}, prediction {:.6e}, l1 {:.6e}, entropy {:.6e}",
        report.final_loss.total,
        report.final_loss.prediction,
        report.final_loss.l1,
        report.final_loss.entropy
    );
    println!("wrote {}", paths.model().display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct PruneArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub data: PathBuf,
    /// Model to prune; defaults to <out-dir>/model.json
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Node importance cutoff
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
}

pub fn stage_prune(args: &PruneArgs) -> Result<()> {
    let file = args.common.file_config()?;
    let seed = pick(args.common.seed, file.seed, 0);
    let paths = StagePaths::new(pick(
        args.common.out_dir.clone(),
        file.out_dir.clone(),
        PathBuf::from("."),
    ))?;
    let model_path = args.model.clone().unwrap_or_else(|| paths.model());
    let threshold = pick(args.threshold, file.prune_threshold, 1e-2);
    let train_fraction = pick(args.train_fraction, file.train_fraction, 0.8);

    let net = KanNetwork::load(&model_path)?;
    let (train_ds, _) = load_split(
        &args.data,
        Some(net.feature_names()),
        net.target_name(),
        train_fraction,
        seed,
    )?;
    let zs = net.input_normalizer().apply_all(&train_ds.xs);
    let (pruned, report) = prune(&net, &zs, threshold)?;

    pruned.save(&paths.model())?;
    write_json(&paths.prune_report(), &report)?;
    plots_best_effort(&pruned, &train_ds.xs, &paths.plots());

    println!(
        "pruned {:?} -> {:?} at threshold {threshold}",
        report.shape_before, report.shape_after
    );
    if !report.forced_keep.is_empty() {
        eprintln!(
            "warning: hidden layers {:?} kept their strongest node despite falling below the threshold",
            report.forced_keep
        );
    }
    println!("wrote {}", paths.model().display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct SymbolifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Lowest acceptable fit quality before an edge stays a spline
    #[arg(long)]
    pub r2_floor: Option<f64>,
    /// Force an edge onto a basis: layer/out/in:basis (repeatable)
    #[arg(long = "override")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
}

pub fn stage_symbolify(args: &SymbolifyArgs) -> Result<()> {
    let file = args.common.file_config()?;
    let seed = pick(args.common.seed, file.seed, 0);
    let paths = StagePaths::new(pick(
        args.common.out_dir.clone(),
        file.out_dir.clone(),
        PathBuf::from("."),
    ))?;
    let model_path = args.model.clone().unwrap_or_else(|| paths.model());
    let train_fraction = pick(args.train_fraction, file.train_fraction, 0.8);

    let override_specs: Vec<String> = if args.overrides.is_empty() {
        file.overrides.clone().unwrap_or_default()
    } else {
        args.overrides.clone()
    };
    let mut snap_config = SnapConfig {
        r2_floor: pick(args.r2_floor, file.r2_floor, SnapConfig::default().r2_floor),
        ..SnapConfig::default()
    };
    for spec in &override_specs {
        snap_config.overrides.push(parse_override(spec)?);
    }

    let mut net = KanNetwork::load(&model_path)?;
    let (train_ds, _) = load_split(
        &args.data,
        Some(net.feature_names()),
        net.target_name(),
        train_fraction,
        seed,
    )?;
    let zs = net.input_normalizer().apply_all(&train_ds.xs);
    let report = snap_network(&mut net, &zs, &snap_config)?;

    net.save(&paths.model())?;
    write_json(&paths.snap_report(), &report)?;
    plots_best_effort(&net, &train_ds.xs, &paths.plots());

    for decision in &report.decisions {
        let name = match &decision.chosen {
            Some(fit) => fit.basis.name().to_string(),
            None => "unsnapped".to_string(),
        };
        let r2 = decision
            .chosen
            .as_ref()
            .map(|f| format!("{:.6}", f.r2))
            .unwrap_or_else(|| "-".into());
        let forced = if decision.forced { " (forced)" } else { "" };
        println!(
            "edge {}/{}/{} -> {name} r2={r2}{forced}",
            decision.layer, decision.out, decision.inp
        );
    }
    if report.fully_snapped() {
        let rounded = write_formula(&net, &paths.formula())?;
        println!("{rounded}");
        println!("wrote {}", paths.formula().display());
    } else {
        let left: Vec<String> = report
            .unsnapped()
            .iter()
            .map(|(l, j, i)| format!("{l}/{j}/{i}"))
            .collect();
        eprintln!(
            "warning: {} edge(s) stayed splines ({}); no formula emitted",
            left.len(),
            left.join(", ")
        );
    }
    println!("wrote {}", paths.model().display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
}

pub fn stage_refine(args: &RefineArgs) -> Result<()> {
    let file = args.common.file_config()?;
    let seed = pick(args.common.seed, file.seed, 0);
    let paths = StagePaths::new(pick(
        args.common.out_dir.clone(),
        file.out_dir.clone(),
        PathBuf::from("."),
    ))?;
    let model_path = args.model.clone().unwrap_or_else(|| paths.model());
    let train_fraction = pick(args.train_fraction, file.train_fraction, 0.8);
    let defaults = RefineConfig::default();
    let refine_config = RefineConfig {
        learning_rate: pick(
            args.learning_rate,
            file.refine_learning_rate,
            defaults.learning_rate,
        ),
        max_steps: pick(args.max_steps, file.refine_max_steps, defaults.max_steps),
        ..defaults
    };

    let mut net = KanNetwork::load(&model_path)?;
    let still_splines = spline_edges(&net);
    if !still_splines.is_empty() {
        return Err(Error::Unsnapped(still_splines.join(", ")));
    }
    let (train_ds, _) = load_split(
        &args.data,
        Some(net.feature_names()),
        net.target_name(),
        train_fraction,
        seed,
    )?;
    let (zs, yn) = to_normalized(&net, &train_ds);
    let report = refine(&mut net, &zs, &yn, &refine_config)?;

    net.save(&paths.model())?;
    let rounded = write_formula(&net, &paths.formula())?;

    println!(
        "refined for {} steps: loss {:.6e} -> {:.6e}",
        report.steps_run, report.initial_loss, report.final_loss
    );
    println!("{rounded}");
    println!("wrote {}", paths.model().display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Multiplicative input noise level for a robustness column
    #[arg(long)]
    pub noise: Option<f64>,
    /// Also train and evaluate a dense-network baseline
    #[arg(long, default_value_t = false)]
    pub with_mlp: bool,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
}

struct MetricLine {
    model: &'static str,
    split: &'static str,
    noise: f64,
    rmse: f64,
    energy_error: f64,
}

pub fn stage_eval(args: &EvalArgs) -> Result<()> {
    let file = args.common.file_config()?;
    let seed = pick(args.common.seed, file.seed, 0);
    let paths = StagePaths::new(pick(
        args.common.out_dir.clone(),
        file.out_dir.clone(),
        PathBuf::from("."),
    ))?;
    let model_path = args.model.clone().unwrap_or_else(|| paths.model());
    let train_fraction = pick(args.train_fraction, file.train_fraction, 0.8);
    let noise = pick(args.noise, file.noise, 0.0);
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "noise level {noise} must be nonnegative"
        )));
    }

    let net = KanNetwork::load(&model_path)?;
    let (train_ds, test_ds) = load_split(
        &args.data,
        Some(net.feature_names()),
        net.target_name(),
        train_fraction,
        seed,
    )?;

    let mut lines: Vec<MetricLine> = Vec::new();
    let mut table: Vec<ComparisonRow> = Vec::new();

    let eval_kan = |ds: &Dataset, level: f64, sub: u64| -> Result<(f64, f64)> {
        let xs = noisy_inputs(&ds.xs, level, seed ^ sub)?;
        let pred = net.predict_batch(&xs)?;
        Ok((rmse(&pred, &ds.ys)?, energy_error(&pred, &ds.ys)?))
    };

    let (kan_train_rmse, kan_train_ee) = eval_kan(&train_ds, 0.0, 0)?;
    let (kan_test_rmse, kan_test_ee) = eval_kan(&test_ds, 0.0, 0)?;
    lines.push(MetricLine {
        model: "KAN",
        split: "train",
        noise: 0.0,
        rmse: kan_train_rmse,
        energy_error: kan_train_ee,
    });
    lines.push(MetricLine {
        model: "KAN",
        split: "test",
        noise: 0.0,
        rmse: kan_test_rmse,
        energy_error: kan_test_ee,
    });
    table.push(ComparisonRow::new("KAN", "clean", kan_test_rmse, kan_test_ee));

    if noise > 0.0 {
        let (r, e) = eval_kan(&train_ds, noise, 0xA5A5)?;
        lines.push(MetricLine {
            model: "KAN",
            split: "train",
            noise,
            rmse: r,
            energy_error: e,
        });
        let (r, e) = eval_kan(&test_ds, noise, 0x5A5A)?;
        lines.push(MetricLine {
            model: "KAN",
            split: "test",
            noise,
            rmse: r,
            energy_error: e,
        });
        table.push(ComparisonRow::new("KAN", "noisy", r, e));
    }

    if args.with_mlp {
        let (zs, yn) = to_normalized(&net, &train_ds);
        let mut mlp = Mlp::init(&[net.n_inputs(), 32, 32, 1], seed)?;
        let mlp_config = MlpTrainConfig {
            max_steps: pick(args.max_steps, file.max_steps, 2000),
            seed,
            ..MlpTrainConfig::default()
        };
        train_mlp(&mut mlp, &zs, &yn, &mlp_config)?;

        let eval_mlp = |ds: &Dataset, level: f64, sub: u64| -> Result<(f64, f64)> {
            let xs = noisy_inputs(&ds.xs, level, seed ^ sub)?;
            let zs = net.input_normalizer().apply_all(&xs);
            let pred: Vec<f64> = mlp
                .predict_batch(&zs)?
                .into_iter()
                .map(|y| net.output_denormalizer().denormalize(y))
                .collect();
            Ok((rmse(&pred, &ds.ys)?, energy_error(&pred, &ds.ys)?))
        };

        let (r, e) = eval_mlp(&train_ds, 0.0, 0)?;
        lines.push(MetricLine {
            model: "MLP",
            split: "train",
            noise: 0.0,
            rmse: r,
            energy_error: e,
        });
        let (r, e) = eval_mlp(&test_ds, 0.0, 0)?;
        lines.push(MetricLine {
            model: "MLP",
            split: "test",
            noise: 0.0,
            rmse: r,
            energy_error: e,
        });
        table.push(ComparisonRow::new("MLP", "clean", r, e));

        if noise > 0.0 {
            let (r, e) = eval_mlp(&train_ds, noise, 0xA5A5)?;
            lines.push(MetricLine {
                model: "MLP",
                split: "train",
                noise,
                rmse: r,
                energy_error: e,
            });
            let (r, e) = eval_mlp(&test_ds, noise, 0x5A5A)?;
            lines.push(MetricLine {
                model: "MLP",
                split: "test",
                noise,
                rmse: r,
                energy_error: e,
            });
            table.push(ComparisonRow::new("MLP", "noisy", r, e));
        }
    }

    let mut w = csv::Writer::from_path(paths.metrics())?;
    w.write_record(["model", "split", "noise", "rmse", "energy_error"])?;
    for line in &lines {
        w.write_record([
            line.model.to_string(),
            line.split.to_string(),
            format!("{:?}", line.noise),
            format!("{:?}", line.rmse),
            format!("{:?}", line.energy_error),
        ])?;
    }
    w.flush()?;

    // order the printed table KAN/clean, KAN/noisy, MLP/clean, MLP/noisy
    table.sort_by_key(|row| (row.model.clone(), row.data.clone()));
    print!("{}", format_comparison(&table));
    println!("wrote {}", paths.metrics().display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct UnsupArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub data: PathBuf,
    /// Feature columns, comma separated; default is every column
    #[arg(long)]
    pub features: Option<String>,
    /// Width of the layer feeding the gaussian head
    #[arg(long)]
    pub mid_width: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Importance cutoff separating kept and dropped variables
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, serde::Serialize)]
struct ImportanceDoc {
    feature_names: Vec<String>,
    scores: Vec<f64>,
    ranking: Vec<usize>,
    kept: Vec<String>,
    dropped: Vec<String>,
    threshold: f64,
    shape_before: Vec<usize>,
    shape_selected: Vec<usize>,
}

pub fn stage_unsup(args: &UnsupArgs) -> Result<()> {
    let file = args.common.file_config()?;
    let seed = pick(args.common.seed, file.seed, 0);
    let paths = StagePaths::new(pick(
        args.common.out_dir.clone(),
        file.out_dir.clone(),
        PathBuf::from("."),
    ))?;
    let features = pick_opt(args.features.as_deref().map(split_names), file.features.clone());
    let threshold = pick(args.threshold, file.prune_threshold, 1e-2);

    let (names, xs, stats) = load_csv_matrix(&args.data, features.as_deref())?;
    if stats.rows_dropped > 0 {
        eprintln!(
            "warning: dropped {} of {} rows with missing or non-numeric values",
            stats.rows_dropped, stats.rows_read
        );
    }
    if names.len() < 2 {
        return Err(Error::InvalidConfig(
            "dependency detection needs at least two variables".into(),
        ));
    }

    let config = UnsupervisedConfig {
        mid_width: pick(args.mid_width, file.mid_width, 1),
        grid: build_grid(file.grid)?,
        train: build_train_config(
            &file,
            args.lambda,
            args.learning_rate,
            args.max_steps,
            None,
            seed,
        ),
        seed,
    };
    let (net, _report, importance) = train_unsupervised(&xs, &names, &config)?;
    net.save(&paths.model())?;

    let kept: Vec<String> = importance
        .feature_names
        .iter()
        .zip(&importance.scores)
        .filter(|(_, &s)| s > threshold)
        .map(|(n, _)| n.clone())
        .collect();
    let dropped: Vec<String> = importance
        .feature_names
        .iter()
        .zip(&importance.scores)
        .filter(|(_, &s)| s <= threshold)
        .map(|(n, _)| n.clone())
        .collect();
    let doc = ImportanceDoc {
        feature_names: importance.feature_names.clone(),
        scores: importance.scores.clone(),
        ranking: importance.ranking.clone(),
        kept: kept.clone(),
        dropped: dropped.clone(),
        threshold,
        shape_before: vec![names.len(), config.mid_width, 1],
        shape_selected: vec![kept.len(), config.mid_width, 1],
    };
    write_json(&paths.importance(), &doc)?;

    for &idx in &importance.ranking {
        let name = &importance.feature_names[idx];
        let score = importance.scores[idx];
        let flag = if score > threshold { "keep" } else { "drop" };
        println!("{name}: {score:.6} ({flag})");
    }
    if kept.is_empty() {
        eprintln!("warning: every variable scored below {threshold}; nothing looks related");
    }
    println!(
        "selected structure {:?} -> {:?}",
        doc.shape_before, doc.shape_selected
    );
    println!("wrote {}", paths.importance().display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Output CSV; defaults to <out-dir>/sensitivity.csv
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    pub trajectories: usize,
}

pub fn stage_sensitivity(args: &SensitivityArgs) -> Result<()> {
    let file = args.common.file_config()?;
    let seed = pick(args.common.seed, file.seed, 0);
    let paths = StagePaths::new(pick(
        args.common.out_dir.clone(),
        file.out_dir.clone(),
        PathBuf::from("."),
    ))?;
    let model_path = args.model.clone().unwrap_or_else(|| paths.model());
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| paths.out_dir.join("sensitivity.csv"));

    let net = KanNetwork::load(&model_path)?;
    let (dataset, _) = load_csv(&args.data, Some(net.feature_names()), net.target_name())?;
    let bounds: Vec<(f64, f64)> = (0..dataset.n_features())
        .map(|i| {
            let col = dataset.xs.iter().map(|row| row[i]);
            let lo = col.clone().fold(f64::INFINITY, f64::min);
            let hi = col.fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        })
        .collect();

    let config = MorrisConfig {
        trajectories: args.trajectories,
        seed,
    };
    let result = morris(|x| net.predict(x), &bounds, &config)?;

    let mut w = csv::Writer::from_path(&out)?;
    w.write_record(["feature", "mu_star", "sigma"])?;
    for (i, name) in dataset.feature_names.iter().enumerate() {
        w.write_record([
            name.clone(),
            format!("{:?}", result.mu_star[i]),
            format!("{:?}", result.sigma[i]),
        ])?;
    }
    w.flush()?;

    let mut order: Vec<usize> = (0..dataset.n_features()).collect();
    order.sort_by(|&a, &b| result.mu_star[b].total_cmp(&result.mu_star[a]));
    for &i in &order {
        println!(
            "{}: mu* {:.6} sigma {:.6}",
            dataset.feature_names[i], result.mu_star[i], result.sigma[i]
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub data: PathBuf,
    /// Feature columns, comma separated; default is every non-target column
    #[arg(long)]
    pub features: Option<String>,
    /// Target column name
    #[arg(long)]
    pub target: Option<String>,
    /// Output CSV; defaults to <out-dir>/correlations.csv
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn stage_correlate(args: &CorrelateArgs) -> Result<()> {
    let file = args.common.file_config()?;
    let paths = StagePaths::new(pick(
        args.common.out_dir.clone(),
        file.out_dir.clone(),
        PathBuf::from("."),
    ))?;
    let features = pick_opt(args.features.as_deref().map(split_names), file.features.clone());
    let target = pick(args.target.clone(), file.target.clone(), "V_out".into());
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| paths.out_dir.join("correlations.csv"));

    let (dataset, _) = load_csv(&args.data, features.as_deref(), &target)?;
    let is_constant = |v: &[f64]| v.iter().all(|&x| x == v[0]);
    let target_constant = is_constant(&dataset.ys);

    let mut w = csv::Writer::from_path(&out)?;
    w.write_record(["feature", "pearson", "spearman", "kendall"])?;
    for (i, name) in dataset.feature_names.iter().enumerate() {
        let col: Vec<f64> = dataset.xs.iter().map(|row| row[i]).collect();
        if target_constant || is_constant(&col) {
            eprintln!("warning: correlation of '{name}' vs '{target}' is undefined (constant input)");
            w.write_record([name.clone(), "nan".into(), "nan".into(), "nan".into()])?;
            println!("{name}: undefined (constant column)");
            continue;
        }
        let p = pearson(&col, &dataset.ys)?;
        let s = spearman(&col, &dataset.ys)?;
        let k = kendall_tau(&col, &dataset.ys)?;
        w.write_record([
            name.clone(),
            format!("{p:?}"),
            format!("{s:?}"),
            format!("{k:?}"),
        ])?;
        println!("{name}: pearson {p:.4} spearman {s:.4} kendall {k:.4}");
    }
    w.flush()?;
    println!("wrote {}", out.display());
    Ok(())
}
