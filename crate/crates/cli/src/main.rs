//! `pomh`: generate synthetic cohorts, extract features, train, evaluate and
//! sweep two-layer dysgraphia classifiers. Works on local files only.

mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use config::{parse_kv, RunConfig};
use pomh_core::features::write_feature_csv;
use pomh_core::manifest::{load_manifest_file, write_cohort, CohortSummary};
use pomh_core::synthgen::{gen_cohort, GeneratorSpec};
use pomh_pipeline::bundle::{train_bundle, ModelBundle};
use pomh_pipeline::fold_features::{build_reference, extract_rows};
use pomh_pipeline::prepared::PreparedCohort;
use pomh_pipeline::report::{evaluate, EvaluationReport};
use pomh_pipeline::roc::roc_auc;

#[derive(Parser)]
#[command(name = "pomh", version, about = "Two-layer dysgraphia screening from online handwriting")]
struct Cli {
    /// Run configuration (`key = value` lines); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic cohort (trace CSVs, manifest, provenance log).
    Gen(GenArgs),
    /// Write the per-symbol feature table of a cohort.
    Features(FeaturesArgs),
    /// Train a two-layer model on a whole cohort and save it.
    Train(TrainArgs),
    /// Score a cohort with a saved model.
    Evaluate(EvaluateArgs),
    /// Cross-validated sweep over w_max, distance kind and alpha.
    Sweep(SweepArgs),
    /// Render best-parameter tables from a sweep report.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 500)]
    children: usize,
    /// Fraction of children labelled dysgraphic.
    #[arg(long, default_value_t = 0.12)]
    dys_fraction: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Multiplier on the planted perturbation magnitudes.
    #[arg(long, default_value_t = 1.0)]
    level: f64,
}

/// Settings shared with the configuration file.
#[derive(Args, Default)]
struct Common {
    /// Cohort manifest (`manifest.json` written by `gen`).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Method pairs, e.g. `rf-counting,glm-glm`.
    #[arg(long, alias = "pair")]
    pairs: Option<String>,
    /// Widths, e.g. `23..39` or `31,35`.
    #[arg(long)]
    w_max: Option<String>,
    /// Distance kinds: l1, l2, linf.
    #[arg(long)]
    dist: Option<String>,
    /// Counting quantile levels, e.g. `0.85,0.89`.
    #[arg(long)]
    alpha: Option<String>,
    /// Root seed for folds, forests and SVM grid search.
    #[arg(long)]
    seed: Option<u64>,
    /// Cross-validation folds.
    #[arg(long)]
    folds: Option<usize>,
    /// Keep children with missing symbols in GLM/RF second layers.
    #[arg(long)]
    keep_incomplete: bool,
    /// First-layer GLM selection: aic, bic or stepwise.
    #[arg(long)]
    selection: Option<String>,
    /// Trees per random forest.
    #[arg(long)]
    trees: Option<usize>,
}

impl Common {
    fn overrides(&self) -> BTreeMap<String, String> {
        let mut kv = BTreeMap::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                kv.insert(k.to_string(), v);
            }
        };
        put("manifest", self.manifest.as_ref().map(|p| p.display().to_string()));
        put("pairs", self.pairs.clone());
        put("w_max", self.w_max.clone());
        put("dist", self.dist.clone());
        put("alpha", self.alpha.clone());
        put("seed", self.seed.map(|v| v.to_string()));
        put("folds", self.folds.map(|v| v.to_string()));
        put("keep_incomplete", self.keep_incomplete.then(|| "true".to_string()));
        put("selection", self.selection.clone());
        put("trees", self.trees.map(|v| v.to_string()));
        kv
    }
}

#[derive(Args)]
struct FeaturesArgs {
    #[command(flatten)]
    common: Common,
    /// Feature CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Model bundle (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    /// Model bundle written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Score table (`child_id,dysgraphia,score`); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// `report.json` written by `sweep`, or its directory.
    #[arg(long)]
    report: PathBuf,
    /// Text file for the tables; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_config(cli_config: Option<&Path>, jobs: Option<usize>, common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = cli_config {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        cfg.apply(&parse_kv(&text).with_context(|| format!("in {}", path.display()))?)?;
    }
    cfg.apply(&common.overrides())?;
    if jobs.is_some() {
        cfg.jobs = jobs;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_cohort(cfg: &RunConfig) -> Result<PreparedCohort> {
    let path = cfg.manifest.as_ref().context("no manifest given (--manifest or `manifest =` in the config)")?;
    let children = load_manifest_file(path).with_context(|| format!("loading {}", path.display()))?;
    ensure!(!children.is_empty(), "manifest {} lists no children", path.display());
    let s = CohortSummary::of(&children);
    info!("{} children ({} dysgraphic)", s.n_td + s.n_dys, s.n_dys);
    Ok(PreparedCohort::new(children)?)
}

fn write(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))?;
    let back = fs::read_to_string(path).with_context(|| format!("re-reading {}", path.display()))?;
    ensure!(back == content, "{} did not persist intact", path.display());
    Ok(())
}

fn single<T: Clone + std::fmt::Debug>(what: &str, values: &[T]) -> Result<T> {
    match values {
        [v] => Ok(v.clone()),
        _ => bail!("train needs exactly one {what}, got {values:?}"),
    }
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let spec = GeneratorSpec::calibrated().with_level(a.level);
    let cohort = gen_cohort(&spec, a.children, a.dys_fraction, a.seed)?;
    let manifest = write_cohort(&a.out, &cohort.children)?;
    write(&a.out.join("provenance.json"), &(serde_json::to_string_pretty(&cohort.provenance)? + "\n"))?;
    let reloaded = load_manifest_file(&manifest)?;
    let digest = |c: &pomh_core::manifest::ChildRecord| {
        let traces: Vec<String> = c.traces.iter().flatten().map(|t| t.to_csv()).collect();
        (c.child_id.clone(), c.age_months, c.grade, c.dysgraphia, traces)
    };
    ensure!(
        reloaded.iter().map(digest).eq(cohort.children.iter().map(digest)),
        "written cohort does not read back identically"
    );
    println!("{}", manifest.display());
    Ok(())
}

fn cmd_features(cfg: &RunConfig, out: &Path) -> Result<()> {
    let prep = load_cohort(cfg)?;
    let w_max = single("w_max", &cfg.sweep.w_max_grid)?;
    let kind = single("distance kind", &cfg.sweep.kinds)?;
    let all = vec![true; prep.len()];
    let reference = build_reference(&prep, &all, w_max)?;
    let rows = extract_rows(&prep, &reference, &[kind])?.remove(&kind).expect("requested kind");
    let flat: Vec<_> = rows.into_iter().flatten().flatten().collect();
    let mut buf = Vec::new();
    write_feature_csv(&mut buf, &flat)?;
    write(out, &String::from_utf8(buf)?)?;
    info!("{} feature rows", flat.len());
    Ok(())
}

fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<()> {
    let prep = load_cohort(cfg)?;
    let s = &cfg.sweep;
    let pair = single("method pair", &s.pairs)?;
    let alpha = if pair.uses_alpha() { Some(single("alpha", &s.alphas)?) } else { None };
    let bundle = train_bundle(
        &prep,
        pair,
        single("distance kind", &s.kinds)?,
        single("w_max", &s.w_max_grid)?,
        alpha,
        &s.layers,
        s.seed,
    )?;
    let json = bundle.to_json()?;
    write(out, &json)?;
    ensure!(ModelBundle::from_json(&json)? == bundle, "model bundle does not round-trip");
    Ok(())
}

fn cmd_evaluate(cfg: &RunConfig, model: &Path, out: Option<&Path>) -> Result<()> {
    let bundle = ModelBundle::from_json(&fs::read_to_string(model).with_context(|| format!("reading {}", model.display()))?)?;
    let prep = load_cohort(cfg)?;
    let scores = bundle.score(&prep)?;
    let mut table = String::from("child_id,dysgraphia,score\n");
    for (c, s) in prep.children.iter().zip(&scores) {
        table += &format!(
            "{},{},{}\n",
            c.child_id,
            c.dysgraphia as u8,
            s.map(|v| format!("{v:.6}")).unwrap_or_default()
        );
    }
    match out {
        Some(p) => write(p, &table)?,
        None => print!("{table}"),
    }
    let (s, l): (Vec<f64>, Vec<bool>) = scores
        .iter()
        .zip(prep.labels())
        .filter_map(|(s, l)| s.map(|s| (s, l)))
        .unzip();
    if l.iter().any(|&v| v) && l.iter().any(|&v| !v) {
        let roc = roc_auc(&s, &l)?;
        let op = roc.operating;
        eprintln!(
            "AUC {:.3}; operating point FPR {:.3} TPR {:.3} cutoff {:.3} accuracy {:.3}",
            roc.auc, op.fpr, op.tpr, op.cutoff, op.accuracy
        );
    }
    Ok(())
}

fn report_tables(report: &EvaluationReport) -> String {
    let mut out = String::new();
    for &pair in &report.config.pairs {
        out += &format!("{pair}\n{}\n", report.table(pair));
    }
    out
}

fn cmd_sweep(cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    let out = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.clone())
        .context("no output directory (--out or `output =` in the config)")?;
    let prep = load_cohort(cfg)?;
    let report = evaluate(&prep, &cfg.sweep)?;
    ensure!(report.cells.len() == cfg.sweep.n_cells(), "report is missing grid cells");
    let json = report.to_json()?;
    write(&out.join("report.json"), &json)?;
    ensure!(EvaluationReport::from_json(&json)? == report, "report does not round-trip");
    write(&out.join("cells.csv"), &report.cells_csv())?;
    write(&out.join("operating_points.csv"), &report.operating_csv())?;
    for &pair in &cfg.sweep.pairs {
        write(&out.join(format!("best_{pair}.csv")), &report.best_csv(pair))?;
        for cell in report.best(pair) {
            write(
                &out.join("roc").join(format!("{pair}_{}.csv", cell.kind)),
                &EvaluationReport::roc_csv(cell),
            )?;
        }
    }
    print!("{}", report_tables(&report));
    Ok(())
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    let path = if a.report.is_dir() { a.report.join("report.json") } else { a.report.clone() };
    let report = EvaluationReport::from_json(&fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?)?;
    let text = report_tables(&report);
    match &a.out {
        Some(p) => write(p, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg_path = cli.config.as_deref();
    let common_of = |c: &Common| load_config(cfg_path, cli.jobs, c);
    let jobs = cli.jobs;
    let init_pool = |cfg: &RunConfig| -> Result<()> {
        if let Some(n) = cfg.jobs.or(jobs) {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
        }
        Ok(())
    };
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Features(a) => {
            let cfg = common_of(&a.common)?;
            init_pool(&cfg)?;
            cmd_features(&cfg, &a.out)
        }
        Command::Train(a) => {
            let cfg = common_of(&a.common)?;
            init_pool(&cfg)?;
            cmd_train(&cfg, &a.out)
        }
        Command::Evaluate(a) => {
            let cfg = common_of(&a.common)?;
            init_pool(&cfg)?;
            cmd_evaluate(&cfg, &a.model, a.out.as_deref())
        }
        Command::Sweep(a) => {
            let cfg = common_of(&a.common)?;
            init_pool(&cfg)?;
            cmd_sweep(&cfg, a.out.as_deref())
        }
        Command::Report(a) => cmd_report(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
