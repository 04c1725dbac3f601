use std::fs;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use trajeval_core::aggregation::{aggregate, ablation_grids, load_frame_dir, save_composites, GridSpec};
use trajeval_core::calibration::{Calibration, GaConfig, ParamBounds, ScoreStats};
use trajeval_core::dataset::{dataset_stats, generate_fixture, load_manifest, to_canonical_string};
use trajeval_core::grpo::{
    decile_means, grpo_train, grpo_train_with, trace_to_csv, RewardBreakdown, RewardConfig, ToyPolicy,
    TrainOptions,
};
use trajeval_core::io::{create_dir_all, write_atomic};
use trajeval_core::pipeline::{
    calibrate_episodes, evaluate_predictions, load_episodes, predict, relabel, Prediction, ScoreOptions,
    ScoreProtocol,
};
use trajeval_core::protocol::{Evaluator, HeuristicEvaluator, SubprocessEvaluator};
use trajeval_core::{Error, GroundTruth, Result, Source};

use crate::args::{
    AggregateArgs, CalibrateArgs, Command, FixtureArgs, GrpoSimArgs, KinematicsArgs, MetricsArgs, ProtocolArg,
    ScoreArgs,
};

/// Collects the files a command produced, relative to the run directory.
pub struct RunDir {
    root: PathBuf,
    artifacts: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ArtifactIndex {
    command: String,
    artifacts: Vec<String>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.path(name), bytes)?;
        self.record(name);
        Ok(())
    }

    pub fn record(&mut self, name: &str) {
        self.artifacts.push(name.to_string());
    }

    fn finish(mut self, command: &str) -> Result<()> {
        self.artifacts.sort();
        self.artifacts.dedup();
        let index = ArtifactIndex {
            command: command.to_string(),
            artifacts: self.artifacts,
        };
        write_atomic(&self.root.join("artifacts.json"), pretty(&index)?.as_bytes())
    }
}

fn pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Validation(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| Error::Validation(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Validation(e.to_string()))
}

fn manifest_root(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Runs one command, echoing its config and indexing its outputs.
pub fn execute(cmd: &Command) -> Result<()> {
    if let Command::Replay(args) = cmd {
        let text = fs::read_to_string(&args.config).map_err(|e| Error::Io {
            path: args.config.clone(),
            source: e,
        })?;
        let mut inner: Command = serde_json::from_str(&text)
            .map_err(|e| Error::Validation(format!("{}: {e}", args.config.display())))?;
        if let Some(out) = &args.out {
            inner.set_out_dir(out.clone());
        }
        return execute(&inner);
    }
    let out = cmd.out_dir().expect("non-replay commands have an output directory");
    let mut run = RunDir::create(out)?;
    run.write("config.json", pretty(cmd)?.as_bytes())?;
    match cmd {
        Command::Fixture(a) => fixture(a, &mut run)?,
        Command::Kinematics(a) => kinematics(a, &mut run)?,
        Command::Calibrate(a) => calibrate(a, &mut run)?,
        Command::Score(a) => score(a, &mut run)?,
        Command::Aggregate(a) => aggregate_frames(a, &mut run)?,
        Command::GrpoSim(a) => grpo_sim(a, &mut run)?,
        Command::Metrics(a) => metrics(a, &mut run)?,
        Command::Replay(_) => unreachable!(),
    }
    run.finish(cmd.name())
}

fn fixture(a: &FixtureArgs, run: &mut RunDir) -> Result<()> {
    let manifest = generate_fixture(a.seed, a.n, a.dof, &run.root)?;
    run.record("manifest.json");
    run.record("trajectories/");
    run.record("frames/");
    run.write("stats.json", pretty(&dataset_stats(&manifest)?)?.as_bytes())?;
    println!("wrote {} episodes to {}", manifest.episodes.len(), run.root.display());
    Ok(())
}

#[derive(Serialize)]
struct KinematicsRow<'a> {
    id: &'a str,
    steps: usize,
    joints: usize,
    u_v: f64,
    u_a: f64,
    mu_v: f64,
    physics: &'a str,
}

fn kinematics(a: &KinematicsArgs, run: &mut RunDir) -> Result<()> {
    let manifest = load_manifest(&a.manifest)?;
    let episodes = load_episodes(&manifest, &manifest_root(&a.manifest))?;
    let rows: Vec<KinematicsRow> = episodes
        .iter()
        .map(|e| KinematicsRow {
            id: &e.episode.id,
            steps: e.trajectory.steps(),
            joints: e.trajectory.joints(),
            u_v: e.summary.u_v,
            u_a: e.summary.u_a,
            mu_v: e.summary.mu_v,
            physics: &e.physics.text,
        })
        .collect();
    run.write("kinematics.csv", &csv_bytes(&rows)?)?;
    println!("{} episodes", rows.len());
    Ok(())
}

#[derive(Serialize)]
struct HistoryRow {
    generation: usize,
    best_loss: f64,
}

fn calibrate(a: &CalibrateArgs, run: &mut RunDir) -> Result<()> {
    let ga = GaConfig {
        population: a.population,
        generations: a.generations,
        tournament_k: a.tournament_k,
        crossover_rate: a.crossover_rate,
        blend_alpha: a.blend_alpha,
        mutation_rate: a.mutation_rate,
        mutation_sigma: a.mutation_sigma,
        elitism: a.elitism,
        seed: a.seed,
        bounds: ParamBounds::default(),
    };
    ga.validate()?;
    let human = match (a.human_mean, a.human_std) {
        (Some(m), Some(s)) => Some(ScoreStats::new(m, s)?),
        _ => None,
    };
    let manifest = load_manifest(&a.manifest)?;
    let episodes = load_episodes(&manifest, &manifest_root(&a.manifest))?;
    let (calibration, result) = calibrate_episodes(&episodes, &ga, human)?;
    run.write("theta.json", calibration.to_canonical_string()?.as_bytes())?;
    let history: Vec<HistoryRow> = result
        .history
        .iter()
        .enumerate()
        .map(|(generation, &best_loss)| HistoryRow { generation, best_loss })
        .collect();
    run.write("loss_history.csv", &csv_bytes(&history)?)?;
    println!("rank loss {} after {} evaluations", result.loss, result.evaluations);
    Ok(())
}

fn protocol(p: ProtocolArg) -> ScoreProtocol {
    match p {
        ProtocolArg::Eg => ScoreProtocol::Eg,
        ProtocolArg::Rg => ScoreProtocol::Rg,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PredictionRow {
    id: String,
    score: f64,
    success: bool,
    source: Source,
    think: Option<String>,
}

/// `target` expressed relative to `base`; both must exist.
fn relative_path(target: &Path, base: &Path) -> Result<PathBuf> {
    let canon = |p: &Path| {
        let p = if p.as_os_str().is_empty() { Path::new(".") } else { p };
        fs::canonicalize(p).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        })
    };
    let t = canon(target)?;
    let b = canon(base)?;
    let tc: Vec<Component> = t.components().collect();
    let bc: Vec<Component> = b.components().collect();
    let common = tc.iter().zip(&bc).take_while(|(x, y)| x == y).count();
    let mut rel = PathBuf::new();
    for _ in common..bc.len() {
        rel.push("..");
    }
    for c in &tc[common..] {
        rel.push(c.as_os_str());
    }
    Ok(rel)
}

fn join_rel(prefix: &Path, p: &str) -> String {
    let joined = prefix.join(p);
    joined.to_string_lossy().replace('\\', "/")
}

fn score(a: &ScoreArgs, run: &mut RunDir) -> Result<()> {
    let calibration = Calibration::load(&a.theta)?;
    let manifest = load_manifest(&a.manifest)?;
    let root = manifest_root(&a.manifest);
    let episodes = load_episodes(&manifest, &root)?;
    let opts = ScoreOptions {
        protocol: protocol(a.protocol),
        grid: GridSpec::new(a.grid.0, a.grid.1, a.out_size)?,
        keyframes: a.keyframes,
        require_cot: a.require_cot,
        view: a.view.clone(),
    };
    let evaluator: Box<dyn Evaluator> = match &a.evaluator_cmd {
        Some(program) => Box::new(SubprocessEvaluator::new(
            program.clone(),
            a.evaluator_args.clone(),
            run.path("scratch"),
        )),
        None => Box::new(HeuristicEvaluator { calibration }),
    };
    let predictions = predict(&episodes, &root, evaluator.as_ref(), &opts)?;
    if a.evaluator_cmd.is_some() {
        run.record("scratch/");
    }
    let rows: Vec<PredictionRow> = predictions
        .iter()
        .map(|p| PredictionRow {
            id: p.id.clone(),
            score: p.score,
            success: p.success,
            source: p.source,
            think: p.think.clone(),
        })
        .collect();
    run.write("predictions.csv", &csv_bytes(&rows)?)?;

    if a.write_labels {
        let mut labeled = relabel(&manifest, &predictions)?;
        let prefix = relative_path(&root, &run.root)?;
        for ep in &mut labeled.episodes {
            ep.trajectory_path = join_rel(&prefix, &ep.trajectory_path);
            ep.frame_dir = join_rel(&prefix, &ep.frame_dir);
        }
        run.write("labeled_manifest.json", to_canonical_string(&labeled)?.as_bytes())?;
        let has_labels = manifest.episodes.iter().all(|e| opts.protocol.label(e).is_some());
        if !has_labels {
            println!("labels written; metrics skipped because the input manifest lacks {} labels", opts.protocol);
            return Ok(());
        }
    }
    let report = evaluate_predictions(&manifest.episodes, &predictions, opts.protocol)?;
    run.write("metrics.json", pretty(&report)?.as_bytes())?;
    run.write("metrics.md", report.to_string().as_bytes())?;
    print!("{report}");
    Ok(())
}

fn aggregate_frames(a: &AggregateArgs, run: &mut RunDir) -> Result<()> {
    let frames = load_frame_dir(&a.frames)?;
    let grids: Vec<GridSpec> = if a.ablation {
        ablation_grids()
            .into_iter()
            .map(|g| GridSpec::new(g.rows, g.cols, a.out_size))
            .collect::<Result<_>>()?
    } else {
        a.grid
            .iter()
            .map(|&(r, c)| GridSpec::new(r, c, a.out_size))
            .collect::<Result<_>>()?
    };
    for grid in &grids {
        let composites = aggregate(&frames, a.keyframes, grid)?;
        let name = format!("{}x{}", grid.rows, grid.cols);
        let names = save_composites(&run.path(&name), &composites)?;
        for n in names {
            run.record(&format!("{name}/{n}"));
        }
        println!("{name}: {} composites", composites.composites.len());
    }
    Ok(())
}

#[derive(Serialize)]
struct GrpoSummary {
    iterations: usize,
    first_decile_mean: Option<f64>,
    last_decile_mean: Option<f64>,
    final_mean_reward: f64,
}

fn grpo_sim(a: &GrpoSimArgs, run: &mut RunDir) -> Result<()> {
    let cfg = RewardConfig {
        sigma: a.sigma,
        gamma: a.gamma,
        beta: a.beta,
        epsilon: a.epsilon,
        group_size: a.group_size,
        ..Default::default()
    }
    .with_weight_ratio(a.weights.0, a.weights.1, a.weights.2)?;
    let opts = TrainOptions {
        iterations: a.iterations,
        learning_rate: a.learning_rate,
        seed: a.seed,
        require_cot: !a.no_cot,
    };
    let gt = GroundTruth {
        score: a.gt_score,
        success: a.gt_success,
        source: a.gt_source,
    };
    if !(1.0..=10.0).contains(&gt.score) {
        return Err(Error::InvalidArgument(format!("gt-score must lie in [1,10], got {}", gt.score)));
    }
    let outcome = match a.constant_reward {
        Some(r) => {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidArgument(format!("constant reward must lie in [0,1], got {r}")));
            }
            let flat = RewardBreakdown {
                r_total: r,
                ..Default::default()
            };
            grpo_train_with(ToyPolicy::uniform(), &cfg, &opts, |_, _| Ok(flat))?
        }
        None => grpo_train(ToyPolicy::uniform(), &gt, &cfg, &opts)?,
    };
    run.write("trace.csv", &trace_to_csv(&outcome.trace)?)?;
    run.write("policy.json", pretty(&outcome.policy)?.as_bytes())?;
    let deciles = decile_means(&outcome.trace);
    let summary = GrpoSummary {
        iterations: outcome.trace.len(),
        first_decile_mean: deciles.map(|d| d.0),
        last_decile_mean: deciles.map(|d| d.1),
        final_mean_reward: outcome.trace.last().map_or(0.0, |r| r.mean_reward),
    };
    run.write("summary.json", pretty(&summary)?.as_bytes())?;
    if let Some((first, last)) = deciles {
        println!("mean reward: first decile {first:.4}, last decile {last:.4}");
    }
    Ok(())
}

fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io {
            path: path.to_path_buf(),
            source: io,
        },
        other => Error::Validation(format!("{}: {other:?}", path.display())),
    })?;
    r.deserialize::<PredictionRow>()
        .map(|row| {
            let row = row.map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
            Ok(Prediction::from_output(
                &row.id,
                &trajeval_core::EvalOutput {
                    score: row.score,
                    success: row.success,
                    source: row.source,
                    think: row.think,
                },
            ))
        })
        .collect()
}

fn metrics(a: &MetricsArgs, run: &mut RunDir) -> Result<()> {
    let manifest = load_manifest(&a.manifest)?;
    let predictions = read_predictions(&a.predictions)?;
    let report = evaluate_predictions(&manifest.episodes, &predictions, protocol(a.protocol))?;
    run.write("metrics.json", pretty(&report)?.as_bytes())?;
    run.write("metrics.md", report.to_string().as_bytes())?;
    print!("{report}");
    Ok(())
}
