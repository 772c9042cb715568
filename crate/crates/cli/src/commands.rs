use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use retrogfn::corpus::{generate_corpus, read_corpus};
use retrogfn::econ::{format_table, income_grid_csv, scenario_table_with, ModelRates, ScenarioSpec, ACC_OPTIMAL, RT_OPTIMAL};
use retrogfn::eval::{filter_ablation, topk_accuracy, InferConfig, MetricsReport, RankedPredictions, K_GRID};
use retrogfn::feasibility::{
    acceptance_accuracy, challenging_set, generate_negatives, read_negatives, write_negatives, ForwardModel,
    Negative, NegativeMethod, Rfm, RfmConfig, RfmInput,
};
use retrogfn::molgraph::ReactionRecord;
use retrogfn::pipeline::{distinct_products, extract_library, ground_truth, infer_products, GfnConfig, GfnModel};
use retrogfn::selfcheck::{self, slot_precision, Check};
use retrogfn::templates::PatternLibrary;

use crate::error::{read_file, write_file, CliError, Result};
use crate::manifest::RunManifest;
use crate::{data_dir, Common};

/// Directory searched for named configs when `--config` is not a path.
pub const CONFIG_DIR_VAR: &str = "RETROGFN_CONFIG_DIR";

fn config_dir() -> PathBuf {
    std::env::var_os(CONFIG_DIR_VAR).map_or_else(|| PathBuf::from("configs"), PathBuf::from)
}

/// A path as given, else `<config dir>/<name>` or `<config dir>/<name>.json`.
fn resolve_config(name: &str) -> Result<PathBuf> {
    let direct = PathBuf::from(name);
    if direct.is_file() {
        return Ok(direct);
    }
    let dir = config_dir();
    for candidate in [dir.join(name), dir.join(format!("{name}.json"))] {
        if candidate.is_file() {
            return Ok(candidate);
        }
    }
    Err(CliError::Config(format!(
        "config {name:?} not found as a file or in {} (set {CONFIG_DIR_VAR} to change the directory)",
        dir.display()
    )))
}

fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_file(path).map_err(|e| CliError::Config(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn require_file(p: &Path) -> Result<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(CliError::Data(format!("input file {} does not exist", p.display())))
    }
}

fn load_corpora(paths: &[PathBuf], manifest: &mut RunManifest) -> Result<Vec<ReactionRecord>> {
    let mut out = Vec::new();
    for p in paths {
        require_file(p)?;
        out.extend(read_corpus(p)?);
        manifest.input(p);
    }
    if out.is_empty() {
        return Err(CliError::Data("corpus is empty".into()));
    }
    Ok(out)
}

fn load_library(path: &Path, manifest: &mut RunManifest) -> Result<Arc<PatternLibrary>> {
    require_file(path)?;
    manifest.input(path);
    Ok(Arc::new(PatternLibrary::load(path)?))
}

fn output(dir: &Path, name: &str, text: &str, manifest: &mut RunManifest) -> Result<()> {
    let p = dir.join(name);
    write_file(&p, text)?;
    manifest.output(&p);
    Ok(())
}

#[derive(Args, Debug)]
pub struct GenCorpusArgs {
    #[arg(long, default_value_os_t = data_dir())]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

pub fn gen_corpus(a: GenCorpusArgs) -> Result<()> {
    let corpus = generate_corpus(a.common.seed)?;
    let mut m = RunManifest::new("gen-corpus", a.common.seed, json!({}));
    output(&a.out_dir, "train.txt", &(corpus.train.join("\n") + "\n"), &mut m)?;
    output(&a.out_dir, "test.txt", &(corpus.test.join("\n") + "\n"), &mut m)?;
    log::info!("wrote {} train and {} test reactions", corpus.train.len(), corpus.test.len());
    m.write(&a.out_dir)
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    /// Corpus files; may repeat.
    #[arg(long, default_values_os_t = [data_dir().join("train.txt")])]
    pub corpus: Vec<PathBuf>,
    /// Bond radius of the reaction-center neighbourhood kept in templates.
    #[arg(long, default_value_t = 1)]
    pub radius: usize,
    #[arg(long, default_value = "runs/templates")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

pub fn extract_templates(a: ExtractArgs) -> Result<()> {
    let mut m = RunManifest::new("extract-templates", a.common.seed, json!({ "radius": a.radius }));
    let corpus = load_corpora(&a.corpus, &mut m)?;
    let (library, report) = extract_library(&corpus, a.radius);
    if library.templates.is_empty() {
        return Err(CliError::Data("no template could be extracted".into()));
    }
    let lib_path = a.out_dir.join("library.txt");
    write_file(&lib_path, &library.to_text())?;
    m.output(&lib_path);
    output(&a.out_dir, "extraction.json", &to_json(&report), &mut m)?;
    println!(
        "{} reactions, {} templates ({} product patterns, {} reactant patterns), round trip {:.1}%",
        report.reactions,
        report.templates,
        report.product_patterns,
        report.reactant_patterns,
        report.round_trip_rate() * 100.0
    );
    m.write(&a.out_dir)
}

#[derive(Args, Debug)]
pub struct TrainGfnArgs {
    #[arg(long, default_values_os_t = [data_dir().join("train.txt")])]
    pub corpus: Vec<PathBuf>,
    #[arg(long, default_value = "runs/templates/library.txt")]
    pub library: PathBuf,
    /// Config file, or a name looked up in the config directory.
    #[arg(long, conflicts_with = "smoke")]
    pub config: Option<String>,
    /// Reduced model and batch sized for a quick single-core run.
    #[arg(long)]
    pub smoke: bool,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long, default_value = "runs/gfn")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

pub fn train_gfn(a: TrainGfnArgs) -> Result<()> {
    let (mut cfg, config_path) = match &a.config {
        Some(name) => {
            let p = resolve_config(name)?;
            (load_config::<GfnConfig>(&p)?, Some(p))
        }
        None if a.smoke => (GfnConfig::smoke(), None),
        None => (GfnConfig::default(), None),
    };
    if let Some(n) = a.iterations {
        cfg.train.iterations = n;
    }
    cfg.train.seed = a.common.seed;
    cfg.train.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let mut m = RunManifest::new("train-gfn", a.common.seed, serde_json::to_value(&cfg).expect("config json"));
    m.config_path = config_path;
    let corpus = load_corpora(&a.corpus, &mut m)?;
    let library = load_library(&a.library, &mut m)?;
    let forward = ForwardModel::new(&library);

    std::fs::create_dir_all(&a.out_dir).map_err(|e| CliError::Runtime(e.to_string()))?;
    let log_path = a.out_dir.join("metrics.jsonl");
    let file = std::fs::File::create(&log_path).map_err(|e| CliError::Runtime(format!("{}: {e}", log_path.display())))?;
    let mut log = std::io::BufWriter::new(file);
    let mut write_err = None;
    let start = Instant::now();
    let (model, summary) = retrogfn::pipeline::train_gfn(&cfg, library, &corpus, &forward, |line| {
        if let Err(e) = writeln!(log, "{}", serde_json::to_string(line).expect("log json")) {
            write_err.get_or_insert(e);
        }
        let it = line.metrics.iteration;
        if it % 100 == 0 || it + 1 == cfg.train.iterations {
            log::info!(
                "iter {it}: loss {:.4} mean reward {:.3} buffer {}",
                line.metrics.loss,
                line.metrics.mean_reward,
                line.metrics.buffer_size
            );
        }
    })?;
    log.flush().map_err(|e| CliError::Runtime(e.to_string()))?;
    if let Some(e) = write_err {
        return Err(CliError::Runtime(format!("metrics log: {e}")));
    }
    m.output(&log_path);
    log::info!("trained {} iterations in {:.1}s", cfg.train.iterations, start.elapsed().as_secs_f64());
    output(&a.out_dir, "model.json", &model.to_json(), &mut m)?;
    output(&a.out_dir, "config.json", &to_json(&cfg), &mut m)?;
    output(&a.out_dir, "summary.json", &to_json(&summary), &mut m)?;
    m.write(&a.out_dir)
}

#[derive(Args, Debug)]
pub struct InferArgs {
    /// Directory holding `model.json` and `config.json` from train-gfn.
    #[arg(long, default_value = "runs/gfn")]
    pub model_dir: PathBuf,
    #[arg(long, default_value = "runs/templates/library.txt")]
    pub library: PathBuf,
    /// Corpus whose distinct products are queried.
    #[arg(long, default_value_os_t = data_dir().join("test.txt"))]
    pub products: PathBuf,
    /// Requested reactions per product.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Trajectories per requested reaction.
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    /// Forward policy temperature.
    #[arg(long, default_value_t = 0.7)]
    pub alpha: f64,
    /// Parallel workers; results do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, default_value = "runs/infer")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

pub fn infer(a: InferArgs) -> Result<()> {
    let cfg = InferConfig {
        n: a.n,
        k: a.k,
        alpha: a.alpha,
    };
    if !(1..=100).contains(&cfg.n) || cfg.k == 0 || !(cfg.alpha > 0.0) {
        return Err(CliError::Config("need 1 <= n <= 100, k >= 1 and alpha > 0".into()));
    }
    let jobs = a
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let mut m = RunManifest::new("infer", a.common.seed, serde_json::to_value(cfg).expect("config json"));
    let model_path = a.model_dir.join("model.json");
    let config_path = a.model_dir.join("config.json");
    require_file(&model_path)?;
    let gfn_cfg: GfnConfig = load_config(&config_path)?;
    m.config_path = Some(config_path);
    let library = load_library(&a.library, &mut m)?;
    m.input(&model_path);
    let env_config = retrogfn::env::EnvConfig {
        max_reactants: gfn_cfg.train.max_reactants,
        match_cap: gfn_cfg.match_cap,
    };
    let model = GfnModel::from_json(&read_file(&model_path)?, library, env_config)?;
    let corpus = load_corpora(std::slice::from_ref(&a.products), &mut m)?;
    let products = distinct_products(&corpus);
    let start = Instant::now();
    let preds = infer_products(&model, &products, &cfg, a.common.seed, jobs)?;
    log::info!("{} products in {:.1}s on {jobs} workers", preds.len(), start.elapsed().as_secs_f64());
    let mut text = String::new();
    for p in &preds {
        text.push_str(&serde_json::to_string(p).expect("prediction json"));
        text.push('\n');
    }
    output(&a.out_dir, "predictions.jsonl", &text, &mut m)?;
    m.write(&a.out_dir)
}

fn read_predictions(path: &Path) -> Result<Vec<RankedPredictions>> {
    read_file(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::Data(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long, default_value = "runs/infer/predictions.jsonl")]
    pub predictions: PathBuf,
    /// Held-out corpus with the recorded reactants.
    #[arg(long, default_value_os_t = data_dir().join("test.txt"))]
    pub truth: PathBuf,
    /// Training corpus. The forward model used for filtering is built from it
    /// alone; the one that scores round trips also sees the held-out split.
    #[arg(long, default_value_os_t = data_dir().join("train.txt"))]
    pub train: PathBuf,
    /// Classifier checkpoint; enables the FTC metric.
    #[arg(long)]
    pub rfm: Option<PathBuf>,
    #[arg(long, default_value_t = 0.9)]
    pub ftc_threshold: f64,
    #[arg(long, default_value = "runs/eval")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Serialize)]
struct FilterAblation {
    ks: Vec<usize>,
    top_k_before: Vec<f64>,
    top_k_after: Vec<f64>,
    backtranslation_rate_before: Vec<f64>,
    backtranslation_rate_after: Vec<f64>,
}

#[derive(Serialize)]
struct EvalReport {
    metrics: MetricsReport,
    filter_ablation: FilterAblation,
}

pub fn eval(a: EvalArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&a.ftc_threshold) {
        return Err(CliError::Config("ftc-threshold must lie in [0, 1]".into()));
    }
    let mut m = RunManifest::new("eval", a.common.seed, json!({ "ftc_threshold": a.ftc_threshold, "rfm": a.rfm }));
    require_file(&a.predictions)?;
    m.input(&a.predictions);
    let preds = read_predictions(&a.predictions)?;
    let test = load_corpora(std::slice::from_ref(&a.truth), &mut m)?;
    let train = load_corpora(std::slice::from_ref(&a.train), &mut m)?;
    let truth = ground_truth(&test);
    let all: Vec<ReactionRecord> = train.iter().chain(&test).cloned().collect();
    let forward_eval = ForwardModel::new(&extract_library(&all, 1).0);
    let forward_train = ForwardModel::new(&extract_library(&train, 1).0);
    let bt_eval = |p: &str, r: &str| forward_eval.backtranslates(r, p);

    let rfm = match &a.rfm {
        Some(p) => {
            require_file(p)?;
            m.input(p);
            Some(Rfm::from_json(&read_file(p)?)?)
        }
        None => None,
    };
    // Recorded reactions count as feasible outright.
    let known: std::collections::HashSet<(String, String)> =
        all.iter().map(|r| (r.product_key(), r.reactant_key())).collect();
    let score = |p: &str, r: &str| -> f64 {
        if known.contains(&(p.to_string(), r.to_string())) {
            return 1.0;
        }
        let rfm = rfm.as_ref().expect("checked");
        RfmInput::from_keys(r, p, rfm.config.rw_steps)
            .and_then(|x| rfm.score(&x))
            .unwrap_or(0.0)
    };
    let ftc_scores: Option<(&dyn Fn(&str, &str) -> f64, f64)> = rfm.as_ref().map(|_| (&score as _, a.ftc_threshold));
    let metrics = MetricsReport::build(&preds, &truth, bt_eval, ftc_scores);

    let filtered = filter_ablation(&preds, |p, r| forward_train.backtranslates(r, p));
    let report = EvalReport {
        filter_ablation: FilterAblation {
            ks: K_GRID.to_vec(),
            top_k_before: metrics.top_k.clone(),
            top_k_after: topk_accuracy(&filtered, &truth, &K_GRID),
            backtranslation_rate_before: slot_precision(&preds, bt_eval, &K_GRID),
            backtranslation_rate_after: slot_precision(&filtered, bt_eval, &K_GRID),
        },
        metrics,
    };
    let mut table = String::from("k      top-k  round-trip  diversity\n");
    for (i, k) in report.metrics.ks.iter().enumerate() {
        table.push_str(&format!(
            "{k:<4} {:>7.3} {:>11.3} {:>10.3}\n",
            report.metrics.top_k[i], report.metrics.round_trip[i], report.metrics.scaffold_diversity[i]
        ));
    }
    print!("{table}MRR {:.3}\n", report.metrics.mrr);
    output(&a.out_dir, "report.json", &to_json(&report), &mut m)?;
    m.write(&a.out_dir)
}

#[derive(Args, Debug)]
pub struct GenNegativesArgs {
    #[arg(long, default_values_os_t = [data_dir().join("train.txt")])]
    pub corpus: Vec<PathBuf>,
    /// Negatives per positive reaction.
    #[arg(long, default_value_t = 5)]
    pub ratio: usize,
    /// Also build a challenging set of this many reactions (a multiple of 10).
    #[arg(long)]
    pub challenging: Option<usize>,
    #[arg(long, default_value = "runs/negatives")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

pub fn gen_negatives(a: GenNegativesArgs) -> Result<()> {
    if a.ratio == 0 {
        return Err(CliError::Config("ratio must be positive".into()));
    }
    if let Some(c) = a.challenging {
        if c == 0 || c % 10 != 0 {
            return Err(CliError::Config("challenging size must be a positive multiple of 10".into()));
        }
    }
    let mut m = RunManifest::new(
        "gen-negatives",
        a.common.seed,
        json!({ "ratio": a.ratio, "challenging": a.challenging }),
    );
    let corpus = load_corpora(&a.corpus, &mut m)?;
    let forward = ForwardModel::new(&extract_library(&corpus, 1).0);
    let mut rng = ChaCha8Rng::seed_from_u64(a.common.seed);
    let set = generate_negatives(&corpus, &forward, a.ratio, &mut rng)?;
    if !set.reached_target() {
        log::warn!("only {} of {} negatives could be generated", set.negatives.len(), set.target);
    }
    output(&a.out_dir, "negatives.txt", &write_negatives(&set.negatives), &mut m)?;
    let count = |method: NegativeMethod| set.negatives.iter().filter(|n| n.method == method).count();
    let mut summary = json!({
        "positives": corpus.len(),
        "target": set.target,
        "negatives": set.negatives.len(),
        "forward_template": count(NegativeMethod::ForwardTemplate),
        "product_swap": count(NegativeMethod::ProductSwap),
    });
    println!(
        "{} negatives ({} forward-template, {} product-swap), target {}",
        set.negatives.len(),
        count(NegativeMethod::ForwardTemplate),
        count(NegativeMethod::ProductSwap),
        set.target
    );
    if let Some(size) = a.challenging {
        let groups = challenging_set(&corpus, &forward, size, &mut rng)?;
        let members: Vec<Negative> = groups.iter().flat_map(|g| g.reactions.iter().cloned()).collect();
        output(&a.out_dir, "challenging.txt", &write_negatives(&members), &mut m)?;
        let acc = acceptance_accuracy(&forward, &members)?;
        println!(
            "challenging set: {} reactions, forward model rejects {:.3} (95% CI {:.3}..{:.3})",
            acc.n, acc.rejection, acc.ci_low, acc.ci_high
        );
        summary["challenging_acceptance"] = serde_json::to_value(acc).expect("json");
    }
    output(&a.out_dir, "summary.json", &to_json(&summary), &mut m)?;
    m.write(&a.out_dir)
}

#[derive(Args, Debug)]
pub struct TrainRfmArgs {
    #[arg(long, default_values_os_t = [data_dir().join("train.txt")])]
    pub corpus: Vec<PathBuf>,
    #[arg(long, default_value = "runs/negatives/negatives.txt")]
    pub negatives: PathBuf,
    /// Config file, or a name looked up in the config directory.
    #[arg(long)]
    pub config: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, default_value = "runs/rfm")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

pub fn train_rfm(a: TrainRfmArgs) -> Result<()> {
    let (mut cfg, config_path) = match &a.config {
        Some(name) => {
            let p = resolve_config(name)?;
            (load_config::<RfmConfig>(&p)?, Some(p))
        }
        None => (RfmConfig::default(), None),
    };
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    cfg.seed = a.common.seed;
    cfg.validate()?;
    let mut m = RunManifest::new("train-rfm", a.common.seed, serde_json::to_value(&cfg).expect("config json"));
    m.config_path = config_path;
    let corpus = load_corpora(&a.corpus, &mut m)?;
    require_file(&a.negatives)?;
    m.input(&a.negatives);
    let negatives = read_negatives(&read_file(&a.negatives)?)?;
    let positives: Vec<RfmInput> = corpus
        .iter()
        .map(|r| RfmInput::new(&r.reactants, &r.product, cfg.rw_steps))
        .collect();
    let negatives = negatives
        .iter()
        .map(|n| RfmInput::from_keys(&n.reactants, &n.product, cfg.rw_steps))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let (rfm, report) = retrogfn::feasibility::train_rfm(positives, negatives, cfg)?;
    match report.holdout_auc {
        Some(auc) => println!("held-out AUC {auc:.3} over {} examples", report.holdout_examples),
        None => println!("no held-out examples"),
    }
    output(&a.out_dir, "rfm.json", &rfm.to_json(), &mut m)?;
    output(&a.out_dir, "rfm_report.json", &to_json(&report), &mut m)?;
    m.write(&a.out_dir)
}

#[derive(Args, Debug)]
pub struct EconArgs {
    /// Synthetic route length.
    #[arg(long, default_value_t = 5)]
    pub route_length: u32,
    /// Cost of one synthesis attempt.
    #[arg(long, default_value_t = 200.0)]
    pub cost: f64,
    /// Profit-to-cost ratios, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [10.0, 100.0, 1000.0])]
    pub ratios: Vec<f64>,
    #[arg(long, default_value_t = RT_OPTIMAL.alpha)]
    pub rt_alpha: f64,
    #[arg(long, default_value_t = RT_OPTIMAL.beta)]
    pub rt_beta: f64,
    #[arg(long, default_value_t = ACC_OPTIMAL.alpha)]
    pub acc_alpha: f64,
    #[arg(long, default_value_t = ACC_OPTIMAL.beta)]
    pub acc_beta: f64,
    /// Largest number of attempts considered.
    #[arg(long, default_value_t = 1000)]
    pub m_max: u32,
    /// Ratio used for the (alpha, beta) income grid CSV.
    #[arg(long, default_value_t = 100.0)]
    pub grid_ratio: f64,
    /// Steps per axis of the income grid over [0, 0.2].
    #[arg(long, default_value_t = 21)]
    pub grid_steps: usize,
    #[arg(long, default_value = "runs/econ")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

pub fn econ(a: EconArgs) -> Result<()> {
    if a.grid_steps < 2 {
        return Err(CliError::Config("grid-steps must be at least 2".into()));
    }
    let spec = ScenarioSpec {
        models: vec![
            ("RT-optimal".into(), ModelRates { alpha: a.rt_alpha, beta: a.rt_beta }),
            ("ACC-optimal".into(), ModelRates { alpha: a.acc_alpha, beta: a.acc_beta }),
        ],
        ratios: a.ratios.clone(),
        cost: a.cost,
        route_length: a.route_length,
        m_max: a.m_max,
    };
    let rows = scenario_table_with(&spec)?;
    print!("{}", format_table(&rows));
    let mut m = RunManifest::new("econ", a.common.seed, serde_json::to_value(&spec).expect("json"));
    output(&a.out_dir, "econ.json", &to_json(&rows), &mut m)?;
    let axis: Vec<f64> = (0..a.grid_steps).map(|i| 0.2 * i as f64 / (a.grid_steps - 1) as f64).collect();
    let csv = income_grid_csv(&axis, &axis, a.grid_ratio, a.cost, a.route_length, a.m_max)?;
    output(&a.out_dir, "income_grid.csv", &csv, &mut m)?;
    m.write(&a.out_dir)
}

#[derive(Args, Debug)]
pub struct SelfcheckArgs {
    /// Add the slower checks: toy training, estimator, round trip, challenging set.
    #[arg(long)]
    pub full: bool,
    #[arg(long, default_value = "runs/selfcheck")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

pub fn selfcheck(a: SelfcheckArgs) -> Result<()> {
    let seed = a.common.seed;
    let generated = generate_corpus(0)?;
    let parse = |lines: &[String]| retrogfn::corpus::parse_corpus(&lines.join("\n"));
    let train = parse(&generated.train)?;
    let all: Vec<ReactionRecord> = train.iter().cloned().chain(parse(&generated.test)?).collect();
    let mut checks = selfcheck::fast_suite(&train, seed);
    if a.full {
        let forward = ForwardModel::new(&extract_library(&all, 1).0);
        checks.push(selfcheck::check_round_trip(&all));
        checks.push(selfcheck::check_toy_gflownet(20_000, 50_000, seed));
        checks.push(selfcheck::check_estimator(&train, 20_000, seed));
        checks.push(selfcheck::check_challenging(&all, &forward, 50, seed));
    }
    for c in &checks {
        println!("{}", c.line());
    }
    let mut m = RunManifest::new("selfcheck", seed, json!({ "full": a.full }));
    let by_name: BTreeMap<&str, &Check> = checks.iter().map(|c| (c.name.as_str(), c)).collect();
    output(&a.out_dir, "selfcheck.json", &to_json(&by_name), &mut m)?;
    m.write(&a.out_dir)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError::Runtime(format!("{failed} of {} checks failed", checks.len())));
    }
    Ok(())
}
