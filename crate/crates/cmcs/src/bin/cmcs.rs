//! Command-line front end: graph inspection, embedding, trust training and
//! evaluation, region partitioning, recruitment, benchmarking, and full
//! simulation sweeps.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;

use cmcs::baselines::Algorithm;
use cmcs::benefits::{build_ucrg, candidate_team, Task, Ucrg, Worker};
use cmcs::embed_init::{
    export_embeddings_csv, load_embeddings, node2vec_embeddings, save_embeddings, EmbedConfig,
};
use cmcs::graph_store::{
    load_checkins, load_trust_graph, split_edges, worker_history, ALL_LEVELS,
};
use cmcs::harness::{
    build_scenario, f1_score, mae, run_sweep, timing, write_sweep_csv, ScenarioParams,
    SolverConfig, SweepKind,
};
use cmcs::recruit_tsr::{
    resolve_conflicts, select_collaboration_team, tsr_recruit, RecruitmentOutcome, TabuConfig,
};
use cmcs::region_partition::{minibatch_kmeans, region_bounds, PartitionConfig, Region};
use cmcs::tref_engine::{
    pair_distribution, train, trust_benefit, SavedModel, TrainConfig,
};

#[derive(Parser)]
#[command(name = "cmcs", about = "Collaborative mobile-crowdsourcing toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect a trust graph edge list.
    Graph {
        #[command(subcommand)]
        action: GraphAction,
    },
    /// Train Node2Vec node embeddings over a trust graph.
    Embed {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 128)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also export the table as CSV to this path.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// JSON file overriding embedding hyperparameters.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train the trust evaluator and save the model.
    TrustTrain {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        emb: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        split: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Expert-knowledge synthesis: on or off.
        #[arg(long, default_value = "on")]
        expert: String,
        #[arg(long)]
        out: PathBuf,
        /// JSON file overriding training hyperparameters.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score node pairs with a trained model.
    TrustEval {
        #[arg(long)]
        model: PathBuf,
        /// CSV with header and columns src,dst.
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Partition check-in locations into sensing regions.
    Partition {
        #[arg(long)]
        checkins: PathBuf,
        #[arg(long, default_value_t = 100)]
        k: usize,
        #[arg(long, default_value_t = 3100)]
        batch: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recruit execution and collaboration teams for a task list.
    Recruit {
        /// Restrict to tasks nearest this region id (needs --regions).
        #[arg(long)]
        region: Option<usize>,
        /// regions.json produced by `partition`.
        #[arg(long)]
        regions: Option<PathBuf>,
        /// JSON array of tasks.
        #[arg(long)]
        tasks: PathBuf,
        /// JSON array of workers.
        #[arg(long)]
        workers: PathBuf,
        /// Trained trust model.
        #[arg(long)]
        trust: PathBuf,
        /// Optional edge list; observed edges override model estimates.
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        iters: usize,
        #[arg(long, default_value_t = 10.0)]
        kappa: f64,
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// JSON file overriding the tabu configuration.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Benchmark solvers on random synthetic instances.
    Bench {
        #[arg(long, default_value = "tsr,de,pso,vns,sa,gmpl,gmdb,gmab,random")]
        algos: String,
        #[arg(long, default_value_t = 50)]
        candidates: usize,
        #[arg(long, default_value_t = 10)]
        team: usize,
        #[arg(long, default_value_t = 10)]
        instances: usize,
        /// Comma-separated solver seeds.
        #[arg(long, default_value = "0")]
        seeds: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// JSON file overriding solver configurations.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run a full experiment sweep over a generated scenario.
    Simulate {
        #[arg(long)]
        graph: PathBuf,
        /// Optional check-in CSV; regions come from partitioning it.
        #[arg(long)]
        checkins: Option<PathBuf>,
        /// Optional trained model for non-edge trust pairs.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value = "tasks_6regions")]
        sweep: String,
        #[arg(long, default_value = "tsr,gmpl,gmdb,gmab,random")]
        algos: String,
        #[arg(long, default_value = "0,1,2")]
        seeds: String,
        #[arg(long, default_value_t = 200)]
        workers: usize,
        #[arg(long, default_value_t = 10)]
        team: usize,
        /// Regions when no check-ins are supplied.
        #[arg(long, default_value_t = 6)]
        regions: usize,
        /// Model accuracy assumed for evaluated (non-edge) pairs.
        #[arg(long, default_value_t = 0.8)]
        accuracy: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// JSON file overriding scenario/solver parameters.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GraphAction {
    /// Print node/edge counts, density, and average degree.
    Stats { path: PathBuf },
}

/// Overlay a JSON config file on top of a base config: keys present in the
/// file replace the base values, everything else keeps its default.
fn overlay_config<T: Serialize + DeserializeOwned>(base: T, path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let patch: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let mut merged = serde_json::to_value(&base)?;
    let (serde_json::Value::Object(dst), serde_json::Value::Object(src)) = (&mut merged, patch)
    else {
        bail!("config file must be a JSON object");
    };
    for (k, v) in src {
        if !dst.contains_key(&k) {
            bail!("unknown config key '{k}'");
        }
        dst.insert(k, v);
    }
    Ok(serde_json::from_value(merged)?)
}

fn parse_list<T, E: std::fmt::Display>(
    s: &str,
    parse: impl Fn(&str) -> std::result::Result<T, E>,
) -> Result<Vec<T>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| parse(t.trim()).map_err(|e| anyhow::anyhow!("bad list entry '{t}': {e}")))
        .collect()
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Graph { action } => match action {
            GraphAction::Stats { path } => graph_stats(&path),
        },
        Command::Embed { graph, dim, seed, out, csv, config } => {
            embed(&graph, dim, seed, &out, csv.as_deref(), config.as_deref())
        }
        Command::TrustTrain { graph, emb, split, seed, expert, out, config } => {
            trust_train(&graph, &emb, split, seed, &expert, &out, config.as_deref())
        }
        Command::TrustEval { model, pairs, out } => trust_eval(&model, &pairs, &out),
        Command::Partition { checkins, k, batch, seed, out } => {
            partition(&checkins, k, batch, seed, &out)
        }
        Command::Recruit {
            region, regions, tasks, workers, trust, graph, iters, kappa, epsilon, seed, out,
            config,
        } => recruit(
            region, regions.as_deref(), &tasks, &workers, &trust, graph.as_deref(), iters, kappa,
            epsilon, seed, &out, config.as_deref(),
        ),
        Command::Bench { algos, candidates, team, instances, seeds, seed, out, config } => bench(
            &algos, candidates, team, instances, &seeds, seed, &out, config.as_deref(),
        ),
        Command::Simulate {
            graph, checkins, model, sweep, algos, seeds, workers, team, regions, accuracy, seed,
            out, config,
        } => simulate(
            &graph, checkins.as_deref(), model.as_deref(), &sweep, &algos, &seeds, workers, team,
            regions, accuracy, seed, &out, config.as_deref(),
        ),
    }
}

fn graph_stats(path: &Path) -> Result<()> {
    let (g, stats) = load_trust_graph(path)?;
    println!("nodes\t{}", g.node_count());
    println!("edges\t{}", g.edge_count());
    println!("density\t{:.6}", g.density());
    println!("avg_degree\t{:.3}", g.average_degree());
    let mut by_level = [0usize; 4];
    for (_, _, l) in g.edges() {
        by_level[l.index()] += 1;
    }
    for l in ALL_LEVELS {
        println!("level_{}\t{}", l.name().to_lowercase(), by_level[l.index()]);
    }
    if stats.self_loops_dropped + stats.duplicates_overwritten > 0 {
        eprintln!(
            "note: dropped {} self-loops, overwrote {} duplicate edges",
            stats.self_loops_dropped, stats.duplicates_overwritten
        );
    }
    Ok(())
}

fn embed(
    graph: &Path,
    dim: usize,
    seed: u64,
    out: &Path,
    csv: Option<&Path>,
    config: Option<&Path>,
) -> Result<()> {
    let (g, _) = load_trust_graph(graph)?;
    let mut cfg = EmbedConfig { dim, seed, ..Default::default() };
    if let Some(p) = config {
        cfg = overlay_config(cfg, p)?;
    }
    let table = node2vec_embeddings(&g, &cfg)?;
    save_embeddings(&table, BufWriter::new(File::create(out)?))?;
    if let Some(csv_path) = csv {
        export_embeddings_csv(&table, BufWriter::new(File::create(csv_path)?))?;
    }
    println!("embedded {} nodes at dim {}", g.node_count(), cfg.dim);
    Ok(())
}

fn trust_train(
    graph: &Path,
    emb: &Path,
    split_frac: f64,
    seed: u64,
    expert: &str,
    out: &Path,
    config: Option<&Path>,
) -> Result<()> {
    let use_expert = match expert.to_ascii_lowercase().as_str() {
        "on" => true,
        "off" => false,
        other => bail!("--expert must be 'on' or 'off', got '{other}'"),
    };
    let (g, _) = load_trust_graph(graph)?;
    let table = load_embeddings(File::open(emb)?)?;
    let mut cfg = TrainConfig { seed, ..Default::default() };
    if let Some(p) = config {
        cfg = overlay_config(cfg, p)?;
    }
    let split = split_edges(&g, split_frac, seed)?;
    let trained = train(&g, &split, &table, &cfg, use_expert)?;

    // Test-split metrics.
    let mut preds = Vec::new();
    let mut dists = Vec::new();
    let mut truths = Vec::new();
    for &(u, v, level) in &split.test {
        let dist = pair_distribution(&trained.state, &trained.model, u, v);
        let best = (0..4).max_by(|&a, &b| dist[a].partial_cmp(&dist[b]).unwrap()).unwrap();
        preds.push(ALL_LEVELS[best]);
        dists.push(dist);
        truths.push(level);
    }
    let report = f1_score(&preds, &truths)?;
    let test_mae = mae(&dists, &truths)?;
    println!("test_accuracy\t{:.4}", report.accuracy);
    println!("test_weighted_f1\t{:.4}", report.weighted_f1);
    println!("test_macro_f1\t{:.4}", report.macro_f1);
    println!("test_mae\t{:.4}", test_mae);
    println!("expert_edges\t{}", trained.report.expert_edges);
    if let Some(e) = trained.report.stopped_early_at {
        println!("stopped_early_at\t{e}");
    }

    let ids: Vec<String> = (0..g.node_count()).map(|u| g.id(u).to_string()).collect();
    SavedModel::from_trained(&trained, ids, report.accuracy).save(out)?;
    println!("model saved to {}", out.display());
    Ok(())
}

fn trust_eval(model: &Path, pairs: &Path, out: &Path) -> Result<()> {
    let m = SavedModel::load(model)?;
    let mut rdr = csv::Reader::from_path(pairs)?;
    let mut w = BufWriter::new(File::create(out)?);
    writeln!(
        w,
        "src,dst,level,value,p_observer,p_apprentice,p_journeyer,p_master"
    )?;
    let mut count = 0usize;
    for record in rdr.records() {
        let record = record?;
        if record.len() < 2 {
            bail!("pairs CSV needs src,dst columns");
        }
        let (src, dst) = (&record[0], &record[1]);
        let (si, di) = (m.node_index(src)?, m.node_index(dst)?);
        let (level, value, dist) = m.predict(si, di);
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            src, dst, level.name(), value, dist[0], dist[1], dist[2], dist[3]
        )?;
        count += 1;
    }
    println!("scored {count} pairs");
    Ok(())
}

fn partition(checkins: &Path, k: usize, batch: usize, seed: u64, out: &Path) -> Result<()> {
    let (points, stats) = load_checkins(checkins)?;
    if stats.rows_dropped > 0 {
        eprintln!("note: dropped {} invalid check-in rows", stats.rows_dropped);
    }
    let locs: Vec<(f64, f64)> = points.iter().map(|c| (c.lat, c.lon)).collect();
    let cfg = PartitionConfig { k, batch_size: batch, seed, ..Default::default() };
    let (result, millis) = timing(|| minibatch_kmeans(&locs, &cfg));
    let result = result?;
    let regions = region_bounds(&locs, &result);
    serde_json::to_writer_pretty(BufWriter::new(File::create(out)?), &regions)?;
    println!(
        "partitioned {} points into {} regions (inertia {:.3}, {} iterations, {:.0} ms)",
        locs.len(), k, result.inertia, result.iterations, millis
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn recruit(
    region: Option<usize>,
    regions_path: Option<&Path>,
    tasks_path: &Path,
    workers_path: &Path,
    trust_path: &Path,
    graph_path: Option<&Path>,
    iters: usize,
    kappa: f64,
    epsilon: f64,
    seed: u64,
    out: &Path,
    config: Option<&Path>,
) -> Result<()> {
    let tasks: Vec<Task> = serde_json::from_reader(File::open(tasks_path)?)
        .with_context(|| format!("parsing {}", tasks_path.display()))?;
    let workers: Vec<Worker> = serde_json::from_reader(File::open(workers_path)?)
        .with_context(|| format!("parsing {}", workers_path.display()))?;
    let model = SavedModel::load(trust_path)?;
    let graph = match graph_path {
        Some(p) => Some(load_trust_graph(p)?.0),
        None => None,
    };

    let tasks: Vec<Task> = match region {
        None => tasks,
        Some(rid) => {
            let Some(rp) = regions_path else {
                bail!("--region needs --regions <regions.json>");
            };
            let regions: Vec<Region> = serde_json::from_reader(File::open(rp)?)?;
            let centroids: Vec<(f64, f64)> = regions.iter().map(|r| r.centroid).collect();
            tasks
                .into_iter()
                .filter(|t| {
                    cmcs::region_partition::assign_to_region(t.loc, &centroids) == rid
                })
                .collect()
        }
    };
    if tasks.is_empty() {
        bail!("no tasks to recruit for");
    }

    // Directed trust value between two workers: observed edge if a graph is
    // given and has one, else the model's prediction.
    let value = |a: &Worker, b: &Worker| -> Result<f64> {
        if let Some(g) = &graph {
            if let (Some(u), Some(v)) = (g.node(&a.trust_node), g.node(&b.trust_node)) {
                if let Some(level) = g.level(u, v) {
                    return Ok(level.trust_value());
                }
            }
        }
        let (u, v) = (model.node_index(&a.trust_node)?, model.node_index(&b.trust_node)?);
        Ok(model.predict(u, v).1)
    };
    let is_direct = |a: &Worker, b: &Worker| -> bool {
        graph.as_ref().is_some_and(|g| {
            matches!(
                (g.node(&a.trust_node), g.node(&b.trust_node)),
                (Some(u), Some(v)) if g.has_edge(u, v)
            )
        })
    };

    let by_id: HashMap<&str, &Worker> = workers.iter().map(|w| (w.id.as_str(), w)).collect();
    let mut s_cache: HashMap<(String, String), f64> = HashMap::new();
    for a in &workers {
        for b in &workers {
            if a.id < b.id {
                let s = trust_benefit(value(a, b)?, value(b, a)?);
                s_cache.insert((a.id.clone(), b.id.clone()), s);
            }
        }
    }
    let s_fn = |x: &str, y: &str| -> f64 {
        let key = if x < y {
            (x.to_string(), y.to_string())
        } else {
            (y.to_string(), x.to_string())
        };
        s_cache[&key]
    };

    let mut tabu = TabuConfig { iterations: iters, seed, ..Default::default() };
    if let Some(p) = config {
        tabu = overlay_config(tabu, p)?;
    }

    // Per-task solves, then cross-task conflict resolution.
    let mut outcomes: Vec<RecruitmentOutcome> = Vec::new();
    let mut ucrgs: Vec<Ucrg> = Vec::new();
    let mut millis_by_task: Vec<f64> = Vec::new();
    for task in &tasks {
        let candidates = candidate_team(task, &workers);
        let ucrg = build_ucrg(task, &candidates, kappa, epsilon, &s_fn)?;
        let ((team, qod, trace), ms) = {
            let (res, ms) = timing(|| tsr_recruit(&ucrg, &tabu));
            (res?, ms)
        };
        outcomes.push(RecruitmentOutcome {
            task_id: task.id.clone(),
            execution_team: team,
            collaboration_team: Vec::new(),
            qod,
            pl: 0.0,
            collab_feasible: false,
            filled: true,
            iterations_used: trace.len().saturating_sub(1),
            best_qod_trace: trace,
        });
        ucrgs.push(ucrg);
        millis_by_task.push(ms);
    }
    resolve_conflicts(&mut outcomes, &ucrgs, &tabu)?;

    let mut w = BufWriter::new(File::create(out)?);
    writeln!(w, "task_id,members,collab_members,qod,pl,feasible,millis")?;
    for ((outcome, ucrg), ms) in outcomes.iter().zip(&ucrgs).zip(&millis_by_task) {
        if !outcome.filled {
            writeln!(w, "{},,,0,0,false,{ms}", outcome.task_id)?;
            continue;
        }
        let task = tasks.iter().find(|t| t.id == outcome.task_id).unwrap();
        let member_workers: Vec<&Worker> = ucrg
            .members
            .iter()
            .map(|id| by_id[id.as_str()])
            .collect();
        let s_idx = |i: usize, j: usize| s_fn(&ucrg.members[i], &ucrg.members[j]);
        let auc_idx = |i: usize, j: usize| {
            if is_direct(member_workers[i], member_workers[j]) {
                1.0
            } else {
                model.accuracy
            }
        };
        let (collab, pl, feasible) = select_collaboration_team(
            &outcome.execution_team, task, &ucrg.members, &s_idx, &auc_idx,
        );
        let names = |team: &[usize]| {
            team.iter().map(|&m| ucrg.members[m].clone()).collect::<Vec<_>>().join(";")
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            outcome.task_id,
            names(&outcome.execution_team),
            names(&collab),
            outcome.qod,
            pl,
            feasible,
            ms
        )?;
    }
    println!("recruited for {} tasks -> {}", outcomes.len(), out.display());
    Ok(())
}

/// A synthetic benchmark instance: random worker field and random symmetric
/// trust benefits, mirroring the library's test generators.
fn synthetic_ucrg(candidates: usize, team: usize, seed: u64) -> Result<Ucrg> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let workers: Vec<Worker> = (0..candidates)
        .map(|i| Worker {
            id: format!("w{i:04}"),
            loc: (rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)),
            len: rng.gen_range(0.0..100.0),
            num: rng.gen_range(0..50),
            trust_node: format!("w{i:04}"),
        })
        .collect();
    let task = Task {
        id: format!("bench{seed}"),
        loc: (0.0, 0.0),
        alpha: 0.2,
        beta: 0.8,
        zeta: 0.7,
        team_size: team,
        z: 200.0,
    };
    let mut s = HashMap::new();
    for i in 0..candidates {
        for j in (i + 1)..candidates {
            let ta = ALL_LEVELS[rng.gen_range(0..4)].trust_value();
            let tb = ALL_LEVELS[rng.gen_range(0..4)].trust_value();
            s.insert((i, j), trust_benefit(ta, tb));
        }
    }
    let refs: Vec<&Worker> = workers.iter().collect();
    Ok(build_ucrg(&task, &refs, 10.0, 1.0, &move |a, b| {
        let ia: usize = a[1..].parse().unwrap();
        let ib: usize = b[1..].parse().unwrap();
        s[&(ia.min(ib), ia.max(ib))]
    })?)
}

#[allow(clippy::too_many_arguments)]
fn bench(
    algos: &str,
    candidates: usize,
    team: usize,
    instances: usize,
    seeds: &str,
    seed: u64,
    out: &Path,
    config: Option<&Path>,
) -> Result<()> {
    let algos = parse_list(algos, Algorithm::parse)?;
    let seeds: Vec<u64> = parse_list(seeds, |s| s.parse::<u64>())?;
    let mut cfg = SolverConfig::default();
    if let Some(p) = config {
        cfg.tabu = overlay_config(cfg.tabu, p).unwrap_or_default();
        cfg.baseline = overlay_config(cfg.baseline, p).unwrap_or_default();
    }

    let mut w = BufWriter::new(File::create(out)?);
    writeln!(w, "algo,instance,seed,qod,millis")?;
    for inst_id in 0..instances {
        let ucrg = synthetic_ucrg(candidates, team, seed.wrapping_add(inst_id as u64))?;
        for &algo in &algos {
            for &s in &seeds {
                let (res, ms) = timing(|| run_algo_on_ucrg(algo, &ucrg, &cfg, s));
                let qod = res?;
                writeln!(w, "{},{},{},{},{}", algo.name(), inst_id, s, qod, ms)?;
            }
        }
    }
    println!(
        "benchmarked {} algorithms x {} instances x {} seeds -> {}",
        algos.len(), instances, seeds.len(), out.display()
    );
    Ok(())
}

/// Bench-mode dispatch without a scenario: GMPL ranks by the symmetric trust
/// benefit stored in the UCRG.
fn run_algo_on_ucrg(algo: Algorithm, ucrg: &Ucrg, cfg: &SolverConfig, seed: u64) -> Result<f64> {
    use cmcs::baselines::*;
    let q = match algo {
        Algorithm::Tsr => {
            tsr_recruit(ucrg, &TabuConfig { seed, ..cfg.tabu.clone() })?.1
        }
        Algorithm::De => de_recruit(ucrg, &BaselineConfig { seed, ..cfg.baseline.clone() })?.1,
        Algorithm::Pso => pso_recruit(ucrg, &BaselineConfig { seed, ..cfg.baseline.clone() })?.1,
        Algorithm::Vns => vns_recruit(ucrg, &BaselineConfig { seed, ..cfg.baseline.clone() })?.1,
        Algorithm::Sa => sa_recruit(ucrg, &BaselineConfig { seed, ..cfg.baseline.clone() })?.1,
        Algorithm::Gmpl => gmpl_recruit(ucrg, &|i, j| ucrg.trust_benefit(i, j))?.1,
        Algorithm::Gmdb => gmdb_recruit(ucrg)?.1,
        Algorithm::Gmab => gmab_recruit(ucrg)?.1,
        Algorithm::Random => random_recruit(ucrg, seed)?.1,
    };
    Ok(q)
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    graph: &Path,
    checkins: Option<&Path>,
    model_path: Option<&Path>,
    sweep: &str,
    algos: &str,
    seeds: &str,
    workers: usize,
    team: usize,
    region_count: usize,
    accuracy: f64,
    seed: u64,
    out: &Path,
    config: Option<&Path>,
) -> Result<()> {
    let kind = SweepKind::parse(sweep)?;
    let algos = parse_list(algos, Algorithm::parse)?;
    let seeds: Vec<u64> = parse_list(seeds, |s| s.parse::<u64>())?;
    let (g, _) = load_trust_graph(graph)?;

    // Regions: partition the check-ins when given, otherwise a synthetic
    // string of compact regions.
    let (regions, history) = match checkins {
        Some(p) => {
            let (points, _) = load_checkins(p)?;
            let locs: Vec<(f64, f64)> = points.iter().map(|c| (c.lat, c.lon)).collect();
            let cfg = PartitionConfig {
                k: region_count,
                batch_size: 3100.min(locs.len()),
                seed,
                ..Default::default()
            };
            let result = minibatch_kmeans(&locs, &cfg)?;
            (region_bounds(&locs, &result), worker_history(&points))
        }
        None => {
            let regions = (0..region_count)
                .map(|i| {
                    let lat = 30.0 + 0.3 * i as f64;
                    Region {
                        id: i,
                        centroid: (lat, 10.0),
                        count: 0,
                        lat_min: lat - 0.1,
                        lat_max: lat + 0.1,
                        lon_min: 9.9,
                        lon_max: 10.1,
                    }
                })
                .collect();
            (regions, HashMap::new())
        }
    };

    let model = match model_path {
        Some(p) => Some(SavedModel::load(p)?),
        None => None,
    };
    let model_accuracy = model.as_ref().map(|m| m.accuracy).unwrap_or(accuracy);
    // Non-edge trust values: the trained model when available, otherwise a
    // seeded random level (documented synthetic fallback).
    let g_ids: Vec<String> = (0..g.node_count()).map(|u| g.id(u).to_string()).collect();
    let trust_fn = move |u: usize, v: usize| -> f64 {
        if let Some(m) = &model {
            if let (Ok(a), Ok(b)) = (m.node_index(&g_ids[u]), m.node_index(&g_ids[v])) {
                return m.predict(a, b).1;
            }
        }
        let mut r = ChaCha8Rng::seed_from_u64(
            seed ^ ((u as u64) << 24) ^ v as u64,
        );
        ALL_LEVELS[r.gen_range(0..4)].trust_value()
    };

    let mut params = ScenarioParams {
        worker_count: workers,
        team_size: team,
        ..Default::default()
    };
    let mut solver = SolverConfig::default();
    if let Some(p) = config {
        params = overlay_config(params.clone(), p).unwrap_or(params);
        solver.tabu = overlay_config(solver.tabu.clone(), p).unwrap_or(solver.tabu);
        solver.baseline = overlay_config(solver.baseline.clone(), p).unwrap_or(solver.baseline);
    }

    let scenario = build_scenario(&g, &trust_fn, model_accuracy, &history, &regions, &params, seed)?;
    let rows = run_sweep(kind, &scenario, &algos, &seeds, &solver)?;
    write_sweep_csv(&rows, BufWriter::new(File::create(out)?))?;
    println!("{} rows -> {}", rows.len(), out.display());
    Ok(())
}
