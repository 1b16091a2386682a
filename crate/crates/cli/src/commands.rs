use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Duration;

use pals_core::config::RunConfig;
use pals_core::evaluation::{
    create_run_dir, evaluate, fmt_metric, generate_synthetic, load_session, run_experiment, static_threshold,
    FeatureTable, Metrics, Recipe, SyntheticStreamSpec, Table,
};
use pals_core::offline::{run_offline_observed, QueryLogEntry};
use pals_core::oracle::{InteractiveOracle, Oracle, ReplayOracle};
use pals_core::pipeline::{session_features, Manifest};
use pals_core::proximity::ProximityModel;
use pals_core::streaming::{run_stream, write_event_log, LambdaPolicy, StreamItem};
use pals_core::{Instance, InstanceId, Label, PalsError};

use crate::{ExperimentArgs, FeaturesArgs, OracleArg, StreamArgs, TrainArgs};

type Result<T> = std::result::Result<T, PalsError>;

fn usage(msg: impl Into<String>) -> PalsError {
    PalsError::Usage(msg.into())
}

fn write_table(dir: &Path, table: &Table) -> Result<()> {
    std::fs::write(dir.join(format!("{}.csv", table.name)), table.to_csv()?)?;
    Ok(())
}

fn metrics_row(kind: &str, m: &Metrics) -> Vec<String> {
    let c = m.counts;
    vec![
        kind.to_string(),
        fmt_metric(m.precision),
        fmt_metric(m.recall),
        fmt_metric(m.f_score),
        c.tp.to_string(),
        c.fp.to_string(),
        c.tn.to_string(),
        c.fn_.to_string(),
    ]
}

const METRICS_HEADER: [&str; 8] = ["set", "precision", "recall", "f_score", "tp", "fp", "tn", "fn"];

fn load_instances(path: &Path, first_id: u64) -> Result<(FeatureTable, Vec<Instance>)> {
    let table = FeatureTable::load(path)?;
    let instances = table.to_instances(first_id);
    Ok((table, instances))
}

fn check_widths(tables: &[(&str, &FeatureTable)]) -> Result<()> {
    let mut widths = tables.iter().map(|(name, t)| (name, t.names.len()));
    if let Some((first, w)) = widths.next() {
        if let Some((other, v)) = widths.find(|(_, v)| *v != w) {
            return Err(usage(format!("{first} has {w} features but {other} has {v}")));
        }
    }
    Ok(())
}

pub fn features(args: &FeaturesArgs, config: &mut RunConfig) -> Result<()> {
    if let Some(w) = args.window_seconds {
        config.pipeline.window_seconds = w;
    }
    if let Some(c) = args.cutoff_hz {
        config.pipeline.cutoff_hz = c;
    }
    config.validate()?;
    std::fs::create_dir_all(&args.out_dir)?;
    for session in &args.sessions {
        let manifest_path = match &args.manifest {
            Some(p) => p.clone(),
            None => session.parent().unwrap_or(Path::new(".")).join("manifest.toml"),
        };
        if !manifest_path.is_file() {
            return Err(usage(format!("missing manifest {}", manifest_path.display())));
        }
        let manifest = Manifest::load(&manifest_path)?;
        let records = load_session(session, &manifest)?;
        let segments = session_features(&records, &manifest, config.pipeline.window_seconds, config.pipeline.cutoff_hz)?;
        let table = FeatureTable::from_segments(&segments)?;
        let stem = session.file_stem().map_or_else(|| "session".into(), |s| s.to_string_lossy().into_owned());
        let out = args.out_dir.join(format!("{stem}.features.csv"));
        table.write(BufWriter::new(File::create(&out)?))?;
        println!("{}: {} windows, {} features", out.display(), table.rows.len(), table.names.len());
    }
    Ok(())
}

fn query_log_table(log: &[QueryLogEntry]) -> Table {
    let mut t = Table::new("query_log", &["iteration", "instance_id", "entropy", "label"]);
    for e in log {
        t.push([e.iteration.to_string(), e.instance_id.to_string(), e.entropy.to_string(), e.label.as_digit().to_string()]);
    }
    t
}

pub fn train_offline(args: &TrainArgs, config: &mut RunConfig, out: &Path) -> Result<()> {
    config.seed = Some(args.seed);
    if let Some(b) = args.budget {
        config.offline.budget = b;
    }
    if let Some(k) = args.iterations {
        config.offline.iterations = k;
    }
    if let Some(s) = args.selection {
        config.offline.selection = s.into();
    }
    if let Some(k) = args.kernel {
        config.graph.kernel = k.into();
    }
    config.validate()?;

    let (labeled_table, labeled) = match &args.labeled {
        Some(p) => {
            let (t, mut xs) = load_instances(p, 0)?;
            xs.retain(|x| x.label.is_some());
            (Some(t), xs)
        }
        None => (None, Vec::new()),
    };
    let first_pool_id = labeled_table.as_ref().map_or(0, |t| t.rows.len() as u64);
    let (pool_table, pool_truth) = load_instances(&args.pool, first_pool_id)?;
    let first_test_id = first_pool_id + pool_table.rows.len() as u64;
    let test = match &args.test {
        Some(p) => Some(load_instances(p, first_test_id)?),
        None => None,
    };
    let mut widths = vec![("pool", &pool_table)];
    if let Some(t) = &labeled_table {
        widths.push(("labeled", t));
    }
    if let Some((t, _)) = &test {
        widths.push(("test", t));
    }
    check_widths(&widths)?;

    let mut oracle = ReplayOracle::new(pool_truth.iter().filter_map(|x| x.label.map(|l| (x.id, l))));
    let pool: Vec<Instance> = pool_truth.iter().map(|x| x.clone().with_label(None)).collect();
    let offline = config.offline_config();
    let mut per_iteration = Table::new("metrics", &["iteration", "precision", "recall", "f_score"]);
    let mut eval_error = None;
    let result = run_offline_observed(&labeled, &pool, &mut oracle, &offline, |it, model| {
        if let Some((_, test)) = &test {
            match evaluate(model, test) {
                Ok(m) => per_iteration.push([it.to_string(), fmt_metric(m.precision), fmt_metric(m.recall), fmt_metric(m.f_score)]),
                Err(e) => eval_error = eval_error.take().or(Some(e)),
            }
        }
    });

    let dir = create_run_dir(out, "train-offline", args.seed)?;
    std::fs::write(dir.join("config.toml"), config.to_toml()?)?;
    let run = match result {
        Ok(run) => run,
        Err(abort) => {
            write_table(&dir, &query_log_table(&abort.log))?;
            eprintln!("partial query log written to {}", dir.display());
            return Err(abort.error);
        }
    };
    if let Some(e) = eval_error {
        return Err(e);
    }
    write_table(&dir, &query_log_table(&run.log))?;
    let mut iterations = Table::new(
        "iterations",
        &["iteration", "queried", "labeled", "synthetic", "bootstrap", "propagation_sweeps", "converged"],
    );
    for s in &run.iterations {
        iterations.push([
            s.iteration.to_string(),
            s.queried.to_string(),
            s.labeled.to_string(),
            s.synthetic.to_string(),
            s.bootstrap.to_string(),
            s.propagation_sweeps.to_string(),
            s.converged.to_string(),
        ]);
    }
    write_table(&dir, &iterations)?;
    if test.is_some() {
        write_table(&dir, &per_iteration)?;
    }
    std::fs::write(dir.join("model.json"), run.model.to_json())?;
    let mut summary = format!(
        "command = \"train-offline\"\nseed = {}\nqueries = {}\niterations = {}\n",
        args.seed,
        run.log.len(),
        run.iterations.len()
    );
    for w in &run.warnings {
        log::warn!("{w}");
        summary.push_str(&format!("# warning: {w}\n"));
    }
    std::fs::write(dir.join("summary.txt"), summary)?;
    println!("{}", dir.display());
    Ok(())
}

struct StreamInput {
    lab: Vec<Instance>,
    stream: Vec<StreamItem>,
    truth: Vec<Option<Label>>,
    test: Vec<Instance>,
}

fn stream_input(args: &StreamArgs, config: &RunConfig) -> Result<StreamInput> {
    if args.synthetic {
        let spec = SyntheticStreamSpec { seed: args.seed, ..config.synthetic.clone() };
        let data = generate_synthetic(&spec)?;
        return Ok(StreamInput {
            lab: data.pool,
            stream: data.stream,
            truth: data.stream_truth.into_iter().map(Some).collect(),
            test: data.test,
        });
    }
    let Some(stream_path) = &args.stream else {
        return Err(usage("give --synthetic or --stream"));
    };
    if args.lab.is_none() && args.model.is_none() {
        return Err(usage("--stream needs a seed model: give --lab or --model"));
    }
    let mut tables = Vec::new();
    let (lab_table, lab) = match &args.lab {
        Some(p) => {
            let (t, xs) = load_instances(p, 0)?;
            (Some(t), xs)
        }
        None => (None, Vec::new()),
    };
    let first = lab.len() as u64;
    let stream_table = FeatureTable::load(stream_path)?;
    let window_ms = config.pipeline.window_seconds * 1000.0;
    let mut stream = Vec::with_capacity(stream_table.rows.len());
    let mut truth = Vec::with_capacity(stream_table.rows.len());
    for (i, row) in stream_table.rows.iter().enumerate() {
        let instance = Instance { id: InstanceId(first + i as u64), features: row.values.clone(), label: None };
        stream.push(StreamItem { t_ms: row.start_ms, end_ms: row.start_ms + window_ms, instance });
        truth.push(row.label);
    }
    let first_test = first + stream.len() as u64;
    let (test_table, test) = match &args.test {
        Some(p) => {
            let (t, xs) = load_instances(p, first_test)?;
            (Some(t), xs)
        }
        None => (None, Vec::new()),
    };
    tables.push(("stream", &stream_table));
    if let Some(t) = &lab_table {
        tables.push(("lab", t));
    }
    if let Some(t) = &test_table {
        tables.push(("test", t));
    }
    check_widths(&tables)?;
    Ok(StreamInput { lab, stream, truth, test })
}

pub fn simulate_stream(args: &StreamArgs, config: &mut RunConfig, out: &Path) -> Result<()> {
    config.seed = Some(args.seed);
    let s = &mut config.streaming;
    if let Some(p) = args.policy {
        s.policy = p.into();
    }
    if let Some(b) = args.budget {
        s.budget = b;
    }
    if let Some(t) = args.interval_ms {
        s.interval_ms = t;
    }
    if args.static_lambda.is_some() {
        s.static_lambda = args.static_lambda;
    }
    s.two_pass |= args.two_pass;
    if args.speedup.is_some() {
        s.speedup = args.speedup;
    }
    if args.oracle_timeout.is_some() {
        s.oracle_timeout_secs = args.oracle_timeout;
    }
    config.validate()?;

    let input = stream_input(args, config)?;
    let mut model = match &args.model {
        Some(p) => ProximityModel::from_json(
            &std::fs::read_to_string(p).map_err(|e| usage(format!("cannot read model {}: {e}", p.display())))?,
        )?,
        None => ProximityModel::fit(&input.lab, config.kernel(), config.propagation())?,
    };
    let mut stream_config = config.stream_config();
    if stream_config.policy == LambdaPolicy::Static && stream_config.static_lambda.is_none() {
        let lambda = static_threshold(&model, &input.stream, stream_config.budget, stream_config.interval_ms)?;
        stream_config.static_lambda = Some(lambda);
        config.streaming.static_lambda = Some(lambda);
    }

    let mut oracle: Box<dyn Oracle> = match args.oracle {
        OracleArg::Replay => Box::new(ReplayOracle::new(
            input.stream.iter().zip(&input.truth).filter_map(|(it, l)| l.map(|l| (it.instance.id, l))),
        )),
        OracleArg::Interactive => Box::new(InteractiveOracle::new(
            BufReader::new(std::io::stdin()),
            std::io::stderr(),
            config.streaming.oracle_timeout_secs.map(Duration::from_secs_f64),
        )),
    };
    let run = run_stream(&mut model, &input.stream, oracle.as_mut(), &stream_config)?;

    let dir = create_run_dir(out, "simulate-stream", args.seed)?;
    std::fs::write(dir.join("config.toml"), config.to_toml()?)?;
    write_event_log(&run.events, BufWriter::new(File::create(dir.join("events.csv"))?))?;
    let mut intervals = Table::new("intervals", &["interval", "start_ms", "events", "queries", "lambda_at_start"]);
    for i in &run.intervals {
        intervals.push([
            i.interval.to_string(),
            i.start_ms.to_string(),
            i.events.to_string(),
            i.queries.to_string(),
            i.lambda_at_start.to_string(),
        ]);
    }
    write_table(&dir, &intervals)?;
    let mut metrics = Table::new("metrics", &METRICS_HEADER);
    if input.truth.iter().all(Option::is_some) && !input.truth.is_empty() {
        let truth: Vec<Label> = input.truth.iter().flatten().copied().collect();
        let predicted: Vec<Label> = run.events.iter().map(|e| e.predicted).collect();
        metrics.push(metrics_row("prequential", &Metrics::from_labels(&truth, &predicted)?));
    }
    if !input.test.is_empty() {
        metrics.push(metrics_row("holdout", &evaluate(&model, &input.test)?));
    }
    write_table(&dir, &metrics)?;
    std::fs::write(dir.join("model.json"), model.to_json())?;
    let summary = format!(
        "command = \"simulate-stream\"\nseed = {}\npolicy = {:?}\nevents = {}\nqueries = {}\nintervals = {}\n",
        args.seed,
        stream_config.policy.name(),
        run.events.len(),
        run.queries(),
        run.intervals.len()
    );
    std::fs::write(dir.join("summary.txt"), summary)?;
    println!("{}", dir.display());
    Ok(())
}

pub fn experiment(args: &ExperimentArgs, config: &mut RunConfig, out: &Path) -> Result<()> {
    let recipe: Recipe = args.recipe.parse()?;
    config.seed = Some(args.seed);
    let trials = args.trials.unwrap_or(config.experiment.seeds.len());
    config.experiment.seeds = (0..trials as u64).map(|i| args.seed + i).collect();
    config.validate()?;
    let report = run_experiment(recipe, &config.experiment_config(args.synthetic))?;
    let dir: PathBuf = create_run_dir(out, recipe.name(), args.seed)?;
    report.write(&dir)?;
    print!("{}", report.summary_text());
    println!("run directory: {}", dir.display());
    if args.require_data && !args.synthetic {
        let missing: Vec<&String> = report.summary.iter().filter(|l| l.contains("skipped")).collect();
        if report.is_skipped() || !missing.is_empty() {
            return Err(PalsError::Data(format!("required data missing for {recipe}")));
        }
    }
    Ok(())
}
