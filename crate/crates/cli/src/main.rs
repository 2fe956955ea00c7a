use std::path::PathBuf;
use std::process::ExitCode;

use axom_core::dataset::DatasetName;
use axom_core::experiment::run::{emit_heatmap, explain_row, explanation_rows, EXPLANATION_HEADER};
use axom_core::experiment::{self, ExperimentConfig, RunManifest};
use axom_core::explainers::Method;
use axom_core::forest::Vote;
use axom_core::heatmap::HeatmapKind;
use axom_core::robustness::{NeighborhoodMode, NormTarget};
use axom_core::shap::OutputMode;
use axom_core::tree::{MaxDepth, MaxFeatures};
use axom_core::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "axom",
    version,
    about = "Tree-ensemble explanation robustness experiments"
)]
struct Cli {
    /// Worker threads for the parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write every table, heatmap and the manifest.
    Run(RunArgs),
    /// Render report.md from a finished (or partial) run directory.
    Report {
        /// Run directory or its manifest.json.
        path: PathBuf,
    },
    /// Dump the DT, RF and AXOM explanations of one dataset row as CSV.
    ExplainOne {
        #[command(flatten)]
        common: Overrides,
        #[arg(long)]
        sample_id: u64,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit one heatmap family into the run directory.
    Heatmap {
        #[command(flatten)]
        common: Overrides,
        #[arg(long = "heatmap", value_enum, default_value = "diff")]
        kind: KindArg,
        /// Two feature indices, e.g. `--axes 0,3`.
        #[arg(long, value_delimiter = ',')]
        axes: Vec<usize>,
        /// Center row; the first test row when absent.
        #[arg(long)]
        sample_id: Option<u64>,
        #[arg(long, value_delimiter = ',')]
        method: Vec<MethodArg>,
        #[arg(long)]
        resolution: Option<usize>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Overrides,
    /// Also render report.md after the run.
    #[arg(long)]
    report: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Grid,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Diff,
    Ratio,
    Avg,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Dt,
    Rf,
    Axom,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Dt => Method::Dt,
            MethodArg::Rf => Method::Rf,
            MethodArg::Axom => Method::Axom,
        }
    }
}

#[derive(Args)]
struct Overrides {
    /// TOML experiment configuration; built-in defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    dataset: Vec<String>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    n_points: Option<usize>,
    #[arg(long, value_enum)]
    neighborhood: Option<ModeArg>,
    /// all-classes or predicted-class
    #[arg(long)]
    norm_target: Option<NormTarget>,
    #[arg(long, value_delimiter = ',')]
    n_estimators: Vec<usize>,
    /// Integer or `none`.
    #[arg(long, value_delimiter = ',')]
    max_depth: Vec<MaxDepth>,
    #[arg(long, value_delimiter = ',')]
    min_samples_leaf: Vec<usize>,
    /// `all`, `sqrt` or an integer.
    #[arg(long, value_delimiter = ',')]
    max_features: Vec<MaxFeatures>,
    #[arg(long)]
    cv_folds: Option<usize>,
    /// soft or hard
    #[arg(long)]
    vote: Option<Vote>,
    /// probability or hard-indicator
    #[arg(long, value_parser = parse_output_mode)]
    output_mode: Option<OutputMode>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn parse_output_mode(s: &str) -> Result<OutputMode, String> {
    match s {
        "probability" => Ok(OutputMode::Probability),
        "hard-indicator" | "hard" => Ok(OutputMode::HardIndicator),
        other => Err(format!("invalid output mode `{other}`")),
    }
}

impl Overrides {
    fn config(&self) -> Result<ExperimentConfig, Error> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if !self.dataset.is_empty() {
            c.datasets = self.dataset.clone();
        }
        if let Some(d) = &self.data_dir {
            c.data_dir = d.clone();
        }
        if !self.seed.is_empty() {
            c.seeds = self.seed.clone();
        }
        if self.test_fraction.is_some() {
            c.test_fraction = self.test_fraction;
        }
        let mode = self.neighborhood.map(|m| match m {
            ModeArg::Grid => NeighborhoodMode::Grid,
            ModeArg::Random => NeighborhoodMode::Random,
        });
        c = c.with_neighborhood(self.epsilon, self.n_points, mode);
        if let Some(t) = self.norm_target {
            c.norm_target = t;
        }
        // model flags pin the forest grid; the tree grid keeps its own
        // n_estimators
        if !self.n_estimators.is_empty() {
            c.forest_grid.n_estimators = self.n_estimators.clone();
        }
        if !self.max_depth.is_empty() {
            c.forest_grid.max_depth = self.max_depth.clone();
            c.tree_grid.max_depth = self.max_depth.clone();
        }
        if !self.min_samples_leaf.is_empty() {
            c.forest_grid.min_samples_leaf = self.min_samples_leaf.clone();
            c.tree_grid.min_samples_leaf = self.min_samples_leaf.clone();
        }
        if !self.max_features.is_empty() {
            c.forest_grid.max_features = self.max_features.clone();
        }
        if let Some(k) = self.cv_folds {
            c.cv_folds = k;
        }
        if let Some(v) = self.vote {
            c.vote = v;
        }
        if let Some(m) = self.output_mode {
            c.output_mode = m;
        }
        if let Some(o) = &self.output_dir {
            c.output_dir = o.clone();
        }
        Ok(c)
    }

    /// Single-dataset verbs use the first configured dataset and seed.
    fn single(&self) -> Result<(ExperimentConfig, DatasetName, u64), Error> {
        let c = self.config()?;
        let names = c.validate()?;
        let seed = c.seeds[0];
        Ok((c, names[0], seed))
    }
}

fn is_validation(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_)
            | Error::InvalidNeighborhood(_)
            | Error::InvalidHeatmap(_)
            | Error::InvalidSplit(_)
            | Error::DimensionMismatch { .. }
    )
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run(args) => {
            let c = args.common.config()?;
            let manifest = experiment::run(&c)?;
            println!("{}", manifest.run_dir.display());
            if args.report {
                let path = experiment::report(&manifest)?;
                println!("{}", path.display());
            }
        }
        Command::Report { path } => {
            let manifest = RunManifest::load(&path)?;
            let out = experiment::report(&manifest)?;
            println!("{}", out.display());
        }
        Command::ExplainOne {
            common,
            sample_id,
            out,
        } => {
            let (c, name, seed) = common.single()?;
            let p = experiment::prepare(&c, name, seed)?;
            let x = p.row(sample_id)?.to_vec();
            let mut text = format!("{EXPLANATION_HEADER}\n");
            explanation_rows(sample_id, &explain_row(&p, &x, &c)?, &mut text);
            match out {
                Some(path) => axom_core::model_io::write_text(&path, &text)?,
                None => print!("{text}"),
            }
        }
        Command::Heatmap {
            common,
            kind,
            axes,
            sample_id,
            method,
            resolution,
        } => {
            let (mut c, name, seed) = common.single()?;
            if let Some(r) = resolution {
                c.heatmap.resolution = r;
                c.heatmap.validate()?;
            }
            let kind = match kind {
                KindArg::Diff => HeatmapKind::Difference,
                KindArg::Ratio => HeatmapKind::Ratio,
                KindArg::Avg => HeatmapKind::AveragedRatio,
            };
            let methods: Vec<Method> = if method.is_empty() {
                Method::ALL.to_vec()
            } else {
                method.into_iter().map(Method::from).collect()
            };
            let axes = match axes.as_slice() {
                [] => None,
                &[a, b] => Some([a, b]),
                _ => {
                    return Err(Error::Config(
                        "--axes takes exactly two feature indices".into(),
                    ))
                }
            };
            if let Some([a, b]) = axes {
                let p = name.schema().feature_names.len();
                if a == b || a >= p || b >= p {
                    return Err(Error::Config(format!(
                        "axes ({a}, {b}) invalid for {p} features"
                    )));
                }
            }
            let p = experiment::prepare(&c, name, seed)?;
            for h in emit_heatmap(&c, &p, kind, &methods, sample_id, axes, &c.run_dir())? {
                println!("{}", c.run_dir().join(&h.svg).display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are validation failures; help and version are not
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon_pool(n) {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_validation(&e) { 1 } else { 2 })
        }
    }
}

fn rayon_pool(n: usize) -> Result<(), String> {
    if n == 0 {
        return Err("--threads must be positive".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}
