//! `trajkit` command-line entry point.
//!
//! Exit codes: 0 on success (including `--help`/`--version`), 1 on usage
//! errors, 2 on data or configuration errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use trajkit::analysis::{profile_from_summaries, summaries_csv, summarize, ClassifyConfig};
use trajkit::baseline::{run_eval, Predictor, PredictorKind};
use trajkit::cluster::{kmedoids, NormKind};
use trajkit::interaction::{simulate_scene, SceneConfig};
use trajkit::kinematics::{generate_batch, BatchSpec};
use trajkit::metrics::EvalConfig;
use trajkit::neural::{fit_signal, Activation};
use trajkit::policy::{curve_csv, train, AgentProfile, RlEnv, TrainConfig};
use trajkit::synth::{gen_synsdd, mix, rt_augment, MixSpec, ProfileTarget, RtOptions};
use trajkit::traj::tsv::{parse_dataset, write_dataset};
use trajkit::{Dataset64, Error, Mlp64, Result, SeededRng};

#[derive(Parser)]
#[command(name = "trajkit", version, about = "Trajectory analysis, synthesis and evaluation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic trajectories from a kinematic, curve or HMM spec.
    Generate(GenerateArgs),
    /// Generate a profile-matched synthetic dataset.
    Synth(SynthArgs),
    /// Mix a synthetic share into a base dataset.
    Mix(MixArgs),
    /// AbScore statistics and unique-point / class histograms.
    Analyze(AnalyzeArgs),
    /// k-medoids clustering under a matrix norm.
    Cluster(ClusterArgs),
    /// Per-trajectory qualitative classes.
    Classify(ClassifyArgs),
    /// Best-of-K evaluation of a baseline predictor.
    Eval(EvalArgs),
    /// Train a policy-gradient agent in an HMM scene.
    RlTrain(RlTrainArgs),
    /// Fit a sine-activated network to a sampled signal.
    SirenFit(SirenFitArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum GenKind {
    Newton,
    Noisy,
    Curve,
    Hmm,
}

#[derive(Args, Serialize)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    /// JSON spec: a batch recipe for newton/noisy/curve, a scene config for hmm.
    #[arg(long)]
    spec: PathBuf,
    /// Trajectories (scenes for hmm) to generate.
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output TSV dataset.
    #[arg(long)]
    out: PathBuf,
    /// Sidecar JSON with the per-frame HMM states (hmm only).
    #[arg(long)]
    state_log: Option<PathBuf>,
    /// Optional JSON report with the resolved configuration.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SynthArgs {
    /// ProfileTarget JSON; defaults to the reference drone-recording profile.
    #[arg(long)]
    target: Option<PathBuf>,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also replicate every trajectory under this many random rigid motions.
    #[arg(long)]
    rt_replicas: Option<usize>,
    /// Optional JSON report with the profile of the output.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct MixArgs {
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    synth: PathBuf,
    /// Synthetic share of the output, in (0, 1].
    #[arg(long)]
    fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct AnalyzeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    report: PathBuf,
    /// Per-trajectory CSV (unique points, class, AbScore).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Accept trajectories of any length instead of exactly 20 samples.
    #[arg(long)]
    any_length: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum NormArg {
    Fro,
    L1,
    L2op,
    Linf,
}

impl From<NormArg> for NormKind {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::Fro => NormKind::Frobenius,
            NormArg::L1 => NormKind::L1,
            NormArg::L2op => NormKind::L2op,
            NormArg::Linf => NormKind::Linf,
        }
    }
}

#[derive(Args, Serialize)]
struct ClusterArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value_t = NormArg::Fro)]
    norm: NormArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV `index,cluster,is_medoid`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ClassifyArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    any_length: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum PredictorArg {
    Cv,
    Linfit,
    Stationary,
}

impl From<PredictorArg> for PredictorKind {
    fn from(p: PredictorArg) -> Self {
        match p {
            PredictorArg::Cv => PredictorKind::ConstantVelocity,
            PredictorArg::Linfit => PredictorKind::LinearFit,
            PredictorArg::Stationary => PredictorKind::Stationary,
        }
    }
}

#[derive(Args, Serialize)]
struct EvalArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum)]
    predictor: PredictorArg,
    #[arg(long, default_value_t = 20)]
    k: usize,
    /// Minimize ADE and FDE independently over the K samples.
    #[arg(long)]
    decoupled: bool,
    /// Standardization factor applied by --legacy-scale-bug.
    #[arg(long = "std", default_value_t = 1.0)]
    standardization: f64,
    /// Divide the reported ADE by --std.
    #[arg(long)]
    legacy_scale_bug: bool,
    /// Endpoint jitter of the samples after the first.
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    report: PathBuf,
    /// Per-trajectory CSV `index,class,ade,fde`.
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Comma-separated layer widths.
#[derive(Clone, Debug, Serialize)]
#[serde(transparent)]
struct Widths(Vec<usize>);

fn parse_widths(s: &str) -> std::result::Result<Widths, String> {
    if s.trim().is_empty() {
        return Ok(Widths(vec![]));
    }
    s.split(',')
        .map(|w| match w.trim().parse::<usize>() {
            Ok(0) | Err(_) => Err(format!("invalid layer width '{w}'")),
            Ok(n) => Ok(n),
        })
        .collect::<std::result::Result<_, _>>()
        .map(Widths)
}

#[derive(Args, Serialize)]
struct RlTrainArgs {
    /// RlEnv JSON (background scene, learner start, kinematic caps).
    #[arg(long)]
    env: PathBuf,
    /// AgentProfile JSON.
    #[arg(long)]
    profile: PathBuf,
    #[arg(long)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    episodes_per_iter: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    /// Comma-separated hidden widths; empty for a linear policy.
    #[arg(long, default_value = "", value_parser = parse_widths)]
    hidden: Widths,
    #[arg(long, default_value_t = 0.1)]
    output_gain: f64,
    #[arg(long, default_value_t = 0.0)]
    init_pre_var: f64,
    /// Learning curve CSV `iter,mean_return,mean_final_dist`.
    #[arg(long)]
    curve: PathBuf,
    /// Trained policy JSON.
    #[arg(long)]
    policy: PathBuf,
    /// Final-iteration episodes as a TSV dataset.
    #[arg(long)]
    export: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SirenFitArgs {
    /// CSV with a header and columns `t,y1[,y2...]`.
    #[arg(long)]
    signal: PathBuf,
    /// Comma-separated hidden widths, e.g. 64,64,64.
    #[arg(long, value_parser = parse_widths)]
    layers: Widths,
    #[arg(long)]
    epochs: usize,
    #[arg(long)]
    lr: f64,
    #[arg(long, default_value_t = 30.0)]
    omega0: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Loss curve CSV `epoch,loss`.
    #[arg(long)]
    curve: PathBuf,
    /// Trained network JSON.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

fn read_json(path: &Path) -> Result<Value> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn write_report(path: &Path, resolved: Value, mut body: Value) -> Result<()> {
    if let Value::Object(m) = &mut body {
        m.insert("resolved_config".into(), resolved);
    }
    write_json(path, &body)
}

fn resolved<A: Serialize>(command: &str, args: &A, extra: Value) -> Value {
    json!({ "command": command, "args": args, "inputs": extra })
}

fn classify_cfg(any_length: bool) -> ClassifyConfig {
    ClassifyConfig { expected_len: if any_length { None } else { Some(20) }, ..ClassifyConfig::default() }
}

fn generate(a: &GenerateArgs) -> Result<()> {
    let mut spec = read_json(&a.spec)?;
    let (dataset, logs) = match a.kind {
        GenKind::Hmm => {
            let cfg: SceneConfig = serde_json::from_value(spec.clone())?;
            let root = SeededRng::new(a.seed);
            let mut scenes = Vec::with_capacity(a.count);
            let mut logs = Vec::with_capacity(a.count);
            for i in 0..a.count {
                let (scene, log) = simulate_scene(&cfg, root.derive(i as u64))?;
                scenes.push(trajkit::traj::Scene::new(i as u64, scene.into_tracks(), Some(cfg.bounds))?);
                logs.push(json!({ "scene": i, "log": log }));
            }
            (Dataset64::new("hmm", scenes), Some(logs))
        }
        kind => {
            let tag = match kind {
                GenKind::Newton => "newton",
                GenKind::Noisy => "noisy",
                _ => "curve",
            };
            match spec.as_object_mut() {
                Some(m) => match m.get("kind").and_then(Value::as_str) {
                    Some(k) if k != tag => {
                        return Err(Error::InvalidConfig(format!("spec kind '{k}' does not match --kind {tag}")))
                    }
                    _ => {
                        m.insert("kind".into(), json!(tag));
                    }
                },
                None => return Err(Error::InvalidConfig("spec must be a JSON object".into())),
            }
            let batch: BatchSpec = serde_json::from_value(spec.clone())?;
            (generate_batch(&batch, a.count, a.seed)?, None)
        }
    };
    write_dataset(&dataset, &a.out)?;
    if let (Some(path), Some(logs)) = (&a.state_log, logs) {
        write_json(path, &Value::Array(logs))?;
    }
    if let Some(r) = &a.report {
        write_report(r, resolved("generate", a, json!({ "spec": spec })), json!({ "trajectories": dataset.num_trajectories() }))?;
    }
    Ok(())
}

fn synth(a: &SynthArgs) -> Result<()> {
    let target: ProfileTarget = match &a.target {
        Some(p) => serde_json::from_value(read_json(p)?)?,
        None => ProfileTarget::default(),
    };
    let root = SeededRng::new(a.seed);
    let mut d = gen_synsdd(&target, a.count, &root.derive(0))?;
    if let Some(n) = a.rt_replicas {
        d = rt_augment(&d, n, RtOptions::default(), &mut root.derive(1))?;
    }
    write_dataset(&d, &a.out)?;
    if let Some(r) = &a.report {
        let rows = summarize(&d, &classify_cfg(false))?;
        write_report(
            r,
            resolved("synth", a, json!({ "target": target })),
            json!({ "profile": profile_from_summaries(&rows), "target": target }),
        )?;
    }
    Ok(())
}

fn mix_cmd(a: &MixArgs) -> Result<()> {
    let base: Dataset64 = parse_dataset(&a.base)?;
    let pool: Dataset64 = parse_dataset(&a.synth)?;
    let out = mix(&MixSpec { base: &base, synth: &pool, fraction: a.fraction, seed: a.seed })?;
    write_dataset(&out, &a.out)?;
    if let Some(r) = &a.report {
        let total = out.num_trajectories();
        let added = total - base.num_trajectories();
        write_report(
            r,
            resolved("mix", a, json!({})),
            json!({
                "base": base.num_trajectories(),
                "synthetic_added": added,
                "total": total,
                "synthetic_share": added as f64 / total.max(1) as f64,
            }),
        )?;
    }
    Ok(())
}

fn analyze(a: &AnalyzeArgs) -> Result<()> {
    let d: Dataset64 = parse_dataset(&a.input)?;
    let cfg = classify_cfg(a.any_length);
    let rows = summarize(&d, &cfg)?;
    let p = profile_from_summaries(&rows);
    let histogram: Vec<Value> = p
        .unique_counts
        .iter()
        .map(|(u, n)| json!({ "unique_points": u, "trajectories": n, "percent": p.unique_percent[u] }))
        .collect();
    write_report(
        &a.report,
        resolved("analyze", a, json!({ "classify": cfg })),
        json!({ "label": d.label, "profile": p, "unique_histogram": histogram }),
    )?;
    if let Some(c) = &a.csv {
        fs::write(c, summaries_csv(&rows))?;
    }
    Ok(())
}

fn cluster(a: &ClusterArgs) -> Result<()> {
    let d: Dataset64 = parse_dataset(&a.input)?;
    let c = kmedoids(&d, a.k, a.norm.into(), &mut SeededRng::new(a.seed), a.max_iter)?;
    fs::write(&a.out, c.to_csv())?;
    if let Some(r) = &a.report {
        write_report(
            r,
            resolved("cluster", a, json!({})),
            json!({
                "medoids": c.medoids,
                "cluster_sizes": c.cluster_sizes(),
                "total_cost": c.total_cost,
                "cost_history": c.cost_history,
            }),
        )?;
    }
    Ok(())
}

fn classify_cmd(a: &ClassifyArgs) -> Result<()> {
    let d: Dataset64 = parse_dataset(&a.input)?;
    fs::write(&a.out, summaries_csv(&summarize(&d, &classify_cfg(a.any_length))?))?;
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<()> {
    let d: Dataset64 = parse_dataset(&a.input)?;
    let predictor = Predictor { kind: a.predictor.into(), k_samples: a.k, jitter_sigma: a.jitter };
    let cfg = EvalConfig {
        k: a.k,
        standardization: a.standardization,
        legacy_scale_bug: a.legacy_scale_bug,
        decoupled: a.decoupled,
    };
    let r = run_eval(&d, &predictor, &cfg, &SeededRng::new(a.seed))?;
    write_report(
        &a.report,
        resolved("eval", a, json!({ "predictor": predictor, "eval": cfg })),
        json!({
            "trajectories": r.classes.len(),
            "ade": r.overall.ade,
            "fde": r.overall.fde,
            "per_class": r.per_class,
        }),
    )?;
    if let Some(c) = &a.csv {
        fs::write(c, r.to_csv())?;
    }
    Ok(())
}

fn rl_train(a: &RlTrainArgs) -> Result<()> {
    let env: RlEnv = serde_json::from_value(read_json(&a.env)?)?;
    let profile: AgentProfile = serde_json::from_value(read_json(&a.profile)?)?;
    let cfg = TrainConfig {
        iters: a.iters,
        episodes_per_iter: a.episodes_per_iter,
        lr: a.lr,
        seed: a.seed,
        hidden: a.hidden.0.clone(),
        init_pre_var: a.init_pre_var,
        output_gain: a.output_gain,
    };
    let res = train(&env, &profile, &cfg)?;
    fs::write(&a.curve, curve_csv(&res.curve))?;
    fs::write(&a.policy, res.net.to_json()?)?;
    let scenes = res
        .last_episodes
        .iter()
        .enumerate()
        .map(|(i, e)| e.to_scene(i as u64, &env))
        .collect::<Result<Vec<_>>>()?;
    write_dataset(&Dataset64::new("rl", scenes), &a.export)?;
    if let Some(r) = &a.report {
        let first = res.curve.first().expect("iters > 0");
        let last = res.curve.last().expect("iters > 0");
        write_report(
            r,
            resolved("rl-train", a, json!({ "env": env, "profile": profile, "train": cfg })),
            json!({
                "first": first,
                "last": last,
                "terminals": res.last_episodes.iter().map(|e| e.terminal).collect::<Vec<_>>(),
            }),
        )?;
    }
    Ok(())
}

fn read_signal(path: &Path) -> Result<Vec<(f64, Vec<f64>)>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    let mut width = None;
    for (i, line) in text.lines().enumerate().skip(1) {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let vals = line
            .split(',')
            .map(|v| {
                v.trim().parse::<f64>().map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })
            })
            .collect::<Result<Vec<_>>>()?;
        if vals.len() < 2 {
            return Err(Error::Parse { line: i + 1, message: "need t and at least one value".into() });
        }
        if *width.get_or_insert(vals.len()) != vals.len() {
            return Err(Error::Parse { line: i + 1, message: "inconsistent column count".into() });
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { line: i + 1 });
        }
        rows.push((vals[0], vals[1..].to_vec()));
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(rows)
}

fn siren_fit(a: &SirenFitArgs) -> Result<()> {
    let samples = read_signal(&a.signal)?;
    let mut dims = vec![1];
    dims.extend(&a.layers.0);
    dims.push(samples[0].1.len());
    let mut net = Mlp64::new(&dims, Activation::Sine { omega0: a.omega0 }, Activation::Identity)?;
    net.siren_init(&mut SeededRng::new(a.seed))?;
    let fit = fit_signal(&mut net, &samples, a.epochs, a.lr)?;
    let mut curve = String::from("epoch,loss\n");
    for (i, l) in fit.losses.iter().enumerate() {
        curve.push_str(&format!("{i},{l}\n"));
    }
    curve.push_str(&format!("{},{}\n", fit.losses.len(), fit.final_loss));
    fs::write(&a.curve, curve)?;
    if let Some(m) = &a.model {
        fs::write(m, net.to_json()?)?;
    }
    if let Some(r) = &a.report {
        write_report(
            r,
            resolved("siren-fit", a, json!({ "dims": dims, "samples": samples.len() })),
            json!({ "final_loss": fit.final_loss, "initial_loss": fit.losses.first() }),
        )?;
    }
    Ok(())
}

fn run(c: Command) -> Result<()> {
    match c {
        Command::Generate(a) => generate(&a),
        Command::Synth(a) => synth(&a),
        Command::Mix(a) => mix_cmd(&a),
        Command::Analyze(a) => analyze(&a),
        Command::Cluster(a) => cluster(&a),
        Command::Classify(a) => classify_cmd(&a),
        Command::Eval(a) => eval(&a),
        Command::RlTrain(a) => rl_train(&a),
        Command::SirenFit(a) => siren_fit(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
