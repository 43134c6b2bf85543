//! Experiment harness: classification metrics, scenario generation binding a
//! trust graph to check-in geography, the experiment sweeps, and timing.

use std::collections::{HashMap, HashSet};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    de_recruit, gmab_recruit, gmdb_recruit, gmpl_recruit, pso_recruit, random_recruit, sa_recruit,
    vns_recruit, Algorithm, BaselineConfig,
};
use crate::benefits::{build_ucrg, candidate_team, privacy_loss, Task, Ucrg, Worker};
use crate::error::{CmcsError, Result};
use crate::graph_store::{TrustGraph, TrustLevel};
use crate::recruit_tsr::{
    resolve_conflicts, select_collaboration_team, tsr_recruit, RecruitmentOutcome, TabuConfig,
};
use crate::region_partition::Region;
use crate::tref_engine::{pair_auc, trust_benefit};

// ---------------------------------------------------------------------------
// Metrics

/// Per-class and aggregate classification quality for the 4 trust levels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub weighted_f1: f64,
    pub macro_f1: f64,
    pub mae: f64,
    pub accuracy: f64,
    pub support: [usize; 4],
    pub per_class_f1: [f64; 4],
    pub per_class_precision: [f64; 4],
    pub per_class_recall: [f64; 4],
}

/// Precision/recall/F1 per trust level plus weighted (headline) and macro
/// averages. The `mae` field is left at 0; see [`mae`].
pub fn f1_score(predicted: &[TrustLevel], truth: &[TrustLevel]) -> Result<MetricReport> {
    if predicted.is_empty() || predicted.len() != truth.len() {
        return Err(CmcsError::InvalidArgument(
            "f1_score needs non-empty aligned sequences".into(),
        ));
    }
    let mut tp = [0usize; 4];
    let mut fp = [0usize; 4];
    let mut fneg = [0usize; 4];
    let mut support = [0usize; 4];
    let mut correct = 0usize;
    for (&p, &t) in predicted.iter().zip(truth) {
        let (pi, ti) = (p.index(), t.index());
        support[ti] += 1;
        if pi == ti {
            tp[pi] += 1;
            correct += 1;
        } else {
            fp[pi] += 1;
            fneg[ti] += 1;
        }
    }
    let mut per_class_f1 = [0.0; 4];
    let mut per_class_precision = [0.0; 4];
    let mut per_class_recall = [0.0; 4];
    let mut weighted = 0.0;
    let mut macro_sum = 0.0;
    for c in 0..4 {
        let prec = if tp[c] + fp[c] > 0 {
            tp[c] as f64 / (tp[c] + fp[c]) as f64
        } else {
            0.0
        };
        let rec = if tp[c] + fneg[c] > 0 {
            tp[c] as f64 / (tp[c] + fneg[c]) as f64
        } else {
            0.0
        };
        let f1 = if prec + rec > 0.0 {
            2.0 * prec * rec / (prec + rec)
        } else {
            0.0
        };
        per_class_precision[c] = prec;
        per_class_recall[c] = rec;
        per_class_f1[c] = f1;
        weighted += f1 * support[c] as f64;
        macro_sum += f1;
    }
    Ok(MetricReport {
        weighted_f1: weighted / predicted.len() as f64,
        macro_f1: macro_sum / 4.0,
        mae: 0.0,
        accuracy: correct as f64 / predicted.len() as f64,
        support,
        per_class_f1,
        per_class_precision,
        per_class_recall,
    })
}

/// Mean absolute error between the expectation of each predicted distribution
/// (over trust values {0.5, 1, 2, 3}) and the true value, with both sides
/// rescaled to [0, 1] via (v - 0.5) / 2.5.
pub fn mae(predicted: &[[f64; 4]], truth: &[TrustLevel]) -> Result<f64> {
    if predicted.is_empty() || predicted.len() != truth.len() {
        return Err(CmcsError::InvalidArgument(
            "mae needs non-empty aligned sequences".into(),
        ));
    }
    let values = [0.5, 1.0, 2.0, 3.0];
    let rescale = |v: f64| (v - 0.5) / 2.5;
    let mut sum = 0.0;
    for (dist, &t) in predicted.iter().zip(truth) {
        let expect: f64 = dist.iter().zip(values).map(|(p, v)| p * v).sum();
        sum += (rescale(expect) - rescale(t.trust_value())).abs();
    }
    Ok(sum / predicted.len() as f64)
}

// ---------------------------------------------------------------------------
// Scenario

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub worker_count: usize,
    pub team_size: usize,
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub z: f64,
    pub zeta: f64,
    pub epsilon: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            worker_count: 200,
            team_size: 10,
            alpha: 0.2,
            beta: 0.8,
            kappa: 10.0,
            z: 200.0,
            zeta: 0.7,
            epsilon: 1.0,
        }
    }
}

/// A fully bound experiment world: regions, workers with trust-node
/// identities, and the dense pairwise trust quantities recruitment consumes.
pub struct Scenario {
    pub regions: Vec<Region>,
    pub workers: Vec<Worker>,
    pub params: ScenarioParams,
    pub seed: u64,
    n: usize,
    /// Directed trust values t_{i->j}, row-major n x n, diagonal unused.
    value: Vec<f64>,
    /// Symmetric trust benefits s_ij.
    s: Vec<f64>,
    /// Directed trustworthiness accuracies AUC_{i->j}.
    auc: Vec<f64>,
    index_by_id: HashMap<String, usize>,
}

impl Scenario {
    pub fn worker_count(&self) -> usize {
        self.n
    }

    pub fn trust_value(&self, i: usize, j: usize) -> f64 {
        self.value[i * self.n + j]
    }

    pub fn s(&self, i: usize, j: usize) -> f64 {
        self.s[i * self.n + j]
    }

    pub fn auc(&self, i: usize, j: usize) -> f64 {
        self.auc[i * self.n + j]
    }

    pub fn worker_index(&self, id: &str) -> Option<usize> {
        self.index_by_id.get(id).copied()
    }
}

/// Bind `params.worker_count` workers to distinct trust-graph nodes, place
/// them uniformly inside the regions, attach check-in histories, and
/// materialize the pairwise trust quantities. `trust_fn` supplies a directed
/// trust value for node pairs without an observed edge (typically a trained
/// evaluator); `model_accuracy` feeds the AUC of those evaluated pairs.
pub fn build_scenario(
    g: &TrustGraph,
    trust_fn: &dyn Fn(usize, usize) -> f64,
    model_accuracy: f64,
    history: &HashMap<String, (f64, u64)>,
    regions: &[Region],
    params: &ScenarioParams,
    seed: u64,
) -> Result<Scenario> {
    let n = params.worker_count;
    if n > g.node_count() {
        return Err(CmcsError::InvalidArgument(format!(
            "{n} workers exceed the {} trust nodes available",
            g.node_count()
        )));
    }
    if regions.is_empty() {
        return Err(CmcsError::InvalidArgument("no regions".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Seeded bijection into the trust graph.
    let mut nodes: Vec<usize> = (0..g.node_count()).collect();
    nodes.shuffle(&mut rng);
    let chosen = &nodes[..n];

    // Check-in histories, assigned in sorted-user order for determinism.
    let mut hist: Vec<(f64, u64)> = {
        let mut users: Vec<&String> = history.keys().collect();
        users.sort();
        users.iter().map(|u| history[*u]).collect()
    };
    hist.shuffle(&mut rng);

    let mut workers = Vec::with_capacity(n);
    let mut index_by_id = HashMap::new();
    for (i, &node) in chosen.iter().enumerate() {
        let r = &regions[rng.gen_range(0..regions.len())];
        let lat = if r.lat_max > r.lat_min {
            rng.gen_range(r.lat_min..r.lat_max)
        } else {
            r.lat_min
        };
        let lon = if r.lon_max > r.lon_min {
            rng.gen_range(r.lon_min..r.lon_max)
        } else {
            r.lon_min
        };
        let (len, num) = if hist.is_empty() {
            (rng.gen_range(0.0..200.0), rng.gen_range(0..100))
        } else {
            hist[i % hist.len()]
        };
        let id = format!("w{i:05}");
        index_by_id.insert(id.clone(), i);
        workers.push(Worker {
            id,
            loc: (lat, lon),
            len,
            num,
            trust_node: g.id(node).to_string(),
        });
    }

    // Dense directed trust values: true edges verbatim, model elsewhere.
    let mut value = vec![0.0; n * n];
    let mut auc = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (u, v) = (chosen[i], chosen[j]);
            let (t, acc) = match g.level(u, v) {
                Some(level) => (level.trust_value(), pair_auc(true, model_accuracy)),
                None => (trust_fn(u, v), pair_auc(false, model_accuracy)),
            };
            value[i * n + j] = t;
            auc[i * n + j] = acc;
        }
    }
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s[i * n + j] = trust_benefit(value[i * n + j], value[j * n + i]);
            }
        }
    }

    Ok(Scenario {
        regions: regions.to_vec(),
        workers,
        params: params.clone(),
        seed,
        n,
        value,
        s,
        auc,
        index_by_id,
    })
}

// ---------------------------------------------------------------------------
// Instances and solver dispatch

/// One task's recruitment instance: the UCRG plus the scenario worker index
/// behind every UCRG member.
pub struct TaskInstance {
    pub task: Task,
    pub ucrg: Ucrg,
    pub member_worker: Vec<usize>,
}

/// Build the UCRG for a task over a scenario worker subset.
pub fn build_instance(
    scenario: &Scenario,
    task: &Task,
    pool: &[usize],
    kappa: f64,
) -> Result<TaskInstance> {
    let subset: Vec<Worker> = pool.iter().map(|&i| scenario.workers[i].clone()).collect();
    let candidates = candidate_team(task, &subset);
    let refs: Vec<&Worker> = candidates.clone();
    let s = |a: &str, b: &str| {
        let (i, j) = (
            scenario.worker_index(a).unwrap(),
            scenario.worker_index(b).unwrap(),
        );
        scenario.s(i, j)
    };
    let ucrg = build_ucrg(task, &refs, kappa, scenario.params.epsilon, &s)?;
    let member_worker = ucrg
        .members
        .iter()
        .map(|m| scenario.worker_index(m).unwrap())
        .collect();
    Ok(TaskInstance {
        task: task.clone(),
        ucrg,
        member_worker,
    })
}

#[derive(Debug, Clone, Default)]
pub struct SolverConfig {
    pub tabu: TabuConfig,
    pub baseline: BaselineConfig,
}

/// Run one algorithm on one instance; returns (team, qod).
pub fn solve_once(
    algo: Algorithm,
    inst: &TaskInstance,
    scenario: &Scenario,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<(Vec<usize>, f64)> {
    match algo {
        Algorithm::Tsr => {
            let c = TabuConfig { seed, ..cfg.tabu.clone() };
            let (team, q, _) = tsr_recruit(&inst.ucrg, &c)?;
            Ok((team, q))
        }
        Algorithm::De => de_recruit(&inst.ucrg, &BaselineConfig { seed, ..cfg.baseline.clone() }),
        Algorithm::Pso => pso_recruit(&inst.ucrg, &BaselineConfig { seed, ..cfg.baseline.clone() }),
        Algorithm::Vns => vns_recruit(&inst.ucrg, &BaselineConfig { seed, ..cfg.baseline.clone() }),
        Algorithm::Sa => sa_recruit(&inst.ucrg, &BaselineConfig { seed, ..cfg.baseline.clone() }),
        Algorithm::Gmpl => {
            let mw = &inst.member_worker;
            gmpl_recruit(&inst.ucrg, &|i, j| scenario.trust_value(mw[i], mw[j]))
        }
        Algorithm::Gmdb => gmdb_recruit(&inst.ucrg),
        Algorithm::Gmab => gmab_recruit(&inst.ucrg),
        Algorithm::Random => random_recruit(&inst.ucrg, seed),
    }
}

/// Wall-clock a closure; returns its value and elapsed milliseconds.
pub fn timing<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64() * 1e3)
}

// ---------------------------------------------------------------------------
// Sweeps

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Tasks6Regions,
    Workers200To1200,
    TasksSequential,
    Kappa10To70,
    Convergence,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Tasks6Regions => "tasks_6regions",
            SweepKind::Workers200To1200 => "workers_200_1200",
            SweepKind::TasksSequential => "tasks_sequential",
            SweepKind::Kappa10To70 => "kappa_10_70",
            SweepKind::Convergence => "convergence",
        }
    }

    pub fn parse(s: &str) -> Result<SweepKind> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tasks_6regions" => Ok(SweepKind::Tasks6Regions),
            "workers_200_1200" => Ok(SweepKind::Workers200To1200),
            "tasks_sequential" => Ok(SweepKind::TasksSequential),
            "kappa_10_70" => Ok(SweepKind::Kappa10To70),
            "convergence" => Ok(SweepKind::Convergence),
            other => Err(CmcsError::InvalidArgument(format!(
                "unknown sweep '{other}'"
            ))),
        }
    }
}

/// One CSV row of a sweep: exactly one per (algorithm, setting, seed).
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub sweep: String,
    pub setting: String,
    pub algo: String,
    pub seed: u64,
    pub task_id: String,
    pub qod: f64,
    pub pl: f64,
    pub team_size: usize,
    pub collab_size: usize,
    pub feasible: bool,
    pub millis: f64,
    pub violations: usize,
}

fn task_at(scenario: &Scenario, id: &str, loc: (f64, f64), team_size: usize) -> Task {
    Task {
        id: id.to_string(),
        loc,
        alpha: scenario.params.alpha,
        beta: scenario.params.beta,
        zeta: scenario.params.zeta,
        team_size,
        z: scenario.params.z,
    }
}

/// Count feasibility violations for a solved task: members out of range,
/// or a feasible collaboration team breaking pl <= zeta or its size bounds.
fn row_violations(
    inst: &TaskInstance,
    team: &[usize],
    collab: &[usize],
    pl: f64,
    feasible: bool,
) -> usize {
    let mut v = 0;
    for &m in team {
        if inst.ucrg.distance_km[m] >= inst.task.z {
            v += 1;
        }
    }
    if feasible {
        if pl > inst.task.zeta + 1e-12 {
            v += 1;
        }
        if collab.len() < 2 || collab.len() > team.len() {
            v += 1;
        }
        let team_set: HashSet<usize> = team.iter().copied().collect();
        if !collab.iter().all(|m| team_set.contains(m)) {
            v += 1;
        }
    }
    v
}

fn collab_for(
    inst: &TaskInstance,
    scenario: &Scenario,
    team: &[usize],
) -> (Vec<usize>, f64, bool) {
    let mw = &inst.member_worker;
    select_collaboration_team(
        team,
        &inst.task,
        &inst.ucrg.members,
        &|i, j| scenario.s(mw[i], mw[j]),
        &|i, j| scenario.auc(mw[i], mw[j]),
    )
}

fn solve_row(
    sweep: SweepKind,
    setting: &str,
    algo: Algorithm,
    seed: u64,
    inst: &TaskInstance,
    scenario: &Scenario,
    cfg: &SolverConfig,
) -> SweepRow {
    let (result, millis) = timing(|| solve_once(algo, inst, scenario, cfg, seed));
    match result {
        Ok((team, q)) => {
            let (collab, pl, feasible) = collab_for(inst, scenario, &team);
            let violations = row_violations(inst, &team, &collab, pl, feasible);
            SweepRow {
                sweep: sweep.name().into(),
                setting: setting.into(),
                algo: algo.name().into(),
                seed,
                task_id: inst.task.id.clone(),
                qod: q,
                pl,
                team_size: team.len(),
                collab_size: collab.len(),
                feasible,
                millis,
                violations,
            }
        }
        Err(_) => SweepRow {
            sweep: sweep.name().into(),
            setting: setting.into(),
            algo: algo.name().into(),
            seed,
            task_id: inst.task.id.clone(),
            qod: 0.0,
            pl: 0.0,
            team_size: 0,
            collab_size: 0,
            feasible: false,
            millis,
            violations: 0,
        },
    }
}

/// Run one experiment sweep; emits exactly |algos| x |settings| x |seeds|
/// rows, reproducible bit-for-bit from (scenario seed, solver seeds).
pub fn run_sweep(
    kind: SweepKind,
    scenario: &Scenario,
    algos: &[Algorithm],
    seeds: &[u64],
    cfg: &SolverConfig,
) -> Result<Vec<SweepRow>> {
    if algos.is_empty() || seeds.is_empty() {
        return Err(CmcsError::InvalidArgument(
            "sweeps need at least one algorithm and one seed".into(),
        ));
    }
    let all_workers: Vec<usize> = (0..scenario.worker_count()).collect();
    let mut rows = Vec::new();
    match kind {
        SweepKind::Tasks6Regions => {
            if scenario.regions.len() < 6 {
                return Err(CmcsError::InvalidArgument(format!(
                    "tasks_6regions needs >= 6 regions, got {}",
                    scenario.regions.len()
                )));
            }
            let tasks: Vec<Task> = (0..6)
                .map(|r| {
                    task_at(
                        scenario,
                        &format!("task_r{r}"),
                        scenario.regions[r].centroid,
                        scenario.params.team_size,
                    )
                })
                .collect();
            let instances: Vec<Option<TaskInstance>> = tasks
                .iter()
                .map(|t| build_instance(scenario, t, &all_workers, scenario.params.kappa).ok())
                .collect();
            for &seed in seeds {
                for &algo in algos {
                    // Solve all six, then resolve cross-task conflicts and
                    // re-score before emitting the rows.
                    let mut solved: Vec<(usize, RecruitmentOutcome, f64)> = Vec::new();
                    let mut ucrgs: Vec<Ucrg> = Vec::new();
                    let mut row_slots: Vec<SweepRow> = Vec::new();
                    for (t, inst) in instances.iter().enumerate() {
                        let setting = format!("region={t}");
                        let Some(inst) = inst else {
                            row_slots.push(SweepRow {
                                sweep: kind.name().into(),
                                setting,
                                algo: algo.name().into(),
                                seed,
                                task_id: tasks[t].id.clone(),
                                qod: 0.0,
                                pl: 0.0,
                                team_size: 0,
                                collab_size: 0,
                                feasible: false,
                                millis: 0.0,
                                violations: 0,
                            });
                            continue;
                        };
                        let (result, millis) =
                            timing(|| solve_once(algo, inst, scenario, cfg, seed));
                        match result {
                            Ok((team, q)) => {
                                solved.push((
                                    t,
                                    RecruitmentOutcome {
                                        task_id: inst.task.id.clone(),
                                        execution_team: team,
                                        collaboration_team: Vec::new(),
                                        qod: q,
                                        pl: 0.0,
                                        collab_feasible: false,
                                        filled: true,
                                        iterations_used: 0,
                                        best_qod_trace: Vec::new(),
                                    },
                                    millis,
                                ));
                                ucrgs.push(inst.ucrg.clone());
                                row_slots.push(SweepRow {
                                    sweep: kind.name().into(),
                                    setting,
                                    algo: algo.name().into(),
                                    seed,
                                    task_id: inst.task.id.clone(),
                                    qod: q,
                                    pl: 0.0,
                                    team_size: 0,
                                    collab_size: 0,
                                    feasible: false,
                                    millis,
                                    violations: 0,
                                });
                            }
                            Err(_) => row_slots.push(SweepRow {
                                sweep: kind.name().into(),
                                setting,
                                algo: algo.name().into(),
                                seed,
                                task_id: inst.task.id.clone(),
                                qod: 0.0,
                                pl: 0.0,
                                team_size: 0,
                                collab_size: 0,
                                feasible: false,
                                millis,
                                violations: 0,
                            }),
                        }
                    }
                    let mut outcomes: Vec<RecruitmentOutcome> =
                        solved.iter().map(|(_, o, _)| o.clone()).collect();
                    let rc_cfg = TabuConfig { seed, ..cfg.tabu.clone() };
                    resolve_conflicts(&mut outcomes, &ucrgs, &rc_cfg)?;
                    // Cross-task disjointness audit.
                    let mut overlap_violations = vec![0usize; outcomes.len()];
                    for a in 0..outcomes.len() {
                        for b in (a + 1)..outcomes.len() {
                            if !(outcomes[a].filled && outcomes[b].filled) {
                                continue;
                            }
                            let ids_a: HashSet<&str> = outcomes[a]
                                .execution_team
                                .iter()
                                .map(|&m| ucrgs[a].members[m].as_str())
                                .collect();
                            let shared = outcomes[b]
                                .execution_team
                                .iter()
                                .filter(|&&m| ids_a.contains(ucrgs[b].members[m].as_str()))
                                .count();
                            overlap_violations[a] += shared;
                            overlap_violations[b] += shared;
                        }
                    }
                    for (pos, ((t, _, _), outcome)) in
                        solved.iter().zip(&outcomes).enumerate()
                    {
                        let t = *t;
                        let inst = instances[t].as_ref().unwrap();
                        let row = row_slots
                            .iter_mut()
                            .find(|r| r.task_id == outcome.task_id)
                            .unwrap();
                        if outcome.filled {
                            let (collab, pl, feasible) =
                                collab_for(inst, scenario, &outcome.execution_team);
                            row.qod = outcome.qod;
                            row.pl = pl;
                            row.team_size = outcome.execution_team.len();
                            row.collab_size = collab.len();
                            row.feasible = feasible;
                            row.violations = row_violations(
                                inst,
                                &outcome.execution_team,
                                &collab,
                                pl,
                                feasible,
                            ) + overlap_violations[pos];
                        } else {
                            row.qod = 0.0;
                            row.feasible = false;
                            row.team_size = 0;
                        }
                    }
                    rows.extend(row_slots);
                }
            }
        }
        SweepKind::Workers200To1200 => {
            let counts: Vec<usize> = (1..=6)
                .map(|i| (i * 200).min(scenario.worker_count()))
                .collect();
            let task = task_at(
                scenario,
                "task_growth",
                scenario.regions[0].centroid,
                scenario.params.team_size,
            );
            for &seed in seeds {
                for &algo in algos {
                    for &m in &counts {
                        let setting = format!("workers={m}");
                        // Prior workers keep their locations: the pool is
                        // always a prefix of the scenario worker list.
                        let pool: Vec<usize> = (0..m).collect();
                        match build_instance(scenario, &task, &pool, scenario.params.kappa) {
                            Ok(inst) => rows.push(solve_row(
                                kind, &setting, algo, seed, &inst, scenario, cfg,
                            )),
                            Err(_) => rows.push(infeasible_row(kind, &setting, algo, seed, &task)),
                        }
                    }
                }
            }
        }
        SweepKind::TasksSequential => {
            let task_count = 6.min(scenario.regions.len());
            for &seed in seeds {
                for &algo in algos {
                    let mut pool: Vec<usize> = all_workers.clone();
                    for t in 0..task_count {
                        let setting = format!("task={t}");
                        let task = task_at(
                            scenario,
                            &format!("seq_task{t}"),
                            scenario.regions[t % scenario.regions.len()].centroid,
                            scenario.params.team_size,
                        );
                        match build_instance(scenario, &task, &pool, scenario.params.kappa) {
                            Ok(inst) => {
                                let row =
                                    solve_row(kind, &setting, algo, seed, &inst, scenario, cfg);
                                if row.feasible || row.team_size > 0 {
                                    // A recruited worker is busy until done:
                                    // remove the execution team from the pool.
                                    let (result, _) = timing(|| {
                                        solve_once(algo, &inst, scenario, cfg, seed)
                                    });
                                    if let Ok((team, _)) = result {
                                        let recruited: HashSet<usize> = team
                                            .iter()
                                            .map(|&m| inst.member_worker[m])
                                            .collect();
                                        pool.retain(|w| !recruited.contains(w));
                                    }
                                }
                                rows.push(row);
                            }
                            Err(_) => rows.push(infeasible_row(kind, &setting, algo, seed, &task)),
                        }
                    }
                }
            }
        }
        SweepKind::Kappa10To70 => {
            let task = task_at(
                scenario,
                "task_kappa",
                scenario.regions[0].centroid,
                scenario.params.team_size,
            );
            for &seed in seeds {
                for &algo in algos {
                    for step in 0..7 {
                        let kappa = 10.0 + 10.0 * step as f64;
                        let setting = format!("kappa={kappa}");
                        match build_instance(scenario, &task, &all_workers, kappa) {
                            Ok(inst) => rows.push(solve_row(
                                kind, &setting, algo, seed, &inst, scenario, cfg,
                            )),
                            Err(_) => rows.push(infeasible_row(kind, &setting, algo, seed, &task)),
                        }
                    }
                }
            }
        }
        SweepKind::Convergence => {
            let task = task_at(
                scenario,
                "task_convergence",
                scenario.regions[0].centroid,
                scenario.params.team_size,
            );
            let inst = build_instance(scenario, &task, &all_workers, scenario.params.kappa)?;
            for &seed in seeds {
                for &algo in algos {
                    for step in 1..=10usize {
                        let budget = step * cfg.tabu.iterations.max(10) / 10;
                        let setting = format!("iterations={budget}");
                        let step_cfg = SolverConfig {
                            tabu: TabuConfig {
                                iterations: budget.max(1),
                                ..cfg.tabu.clone()
                            },
                            baseline: BaselineConfig {
                                iterations: budget.max(1),
                                ..cfg.baseline.clone()
                            },
                        };
                        rows.push(solve_row(
                            kind, &setting, algo, seed, &inst, scenario, &step_cfg,
                        ));
                    }
                }
            }
        }
    }
    Ok(rows)
}

fn infeasible_row(kind: SweepKind, setting: &str, algo: Algorithm, seed: u64, task: &Task) -> SweepRow {
    SweepRow {
        sweep: kind.name().into(),
        setting: setting.into(),
        algo: algo.name().into(),
        seed,
        task_id: task.id.clone(),
        qod: 0.0,
        pl: 0.0,
        team_size: 0,
        collab_size: 0,
        feasible: false,
        millis: 0.0,
        violations: 0,
    }
}

/// Write sweep rows as CSV with a header.
pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for row in rows {
        wtr.serialize(row).map_err(|e| {
            CmcsError::InvalidArgument(format!("CSV serialization failed: {e}"))
        })?;
    }
    wtr.flush()?;
    Ok(())
}

/// Mean execution-team privacy loss of a set of rows (feasible or not; pl is
/// computed on the collaboration path, so use the stored value).
pub fn mean_pl(rows: &[SweepRow], algo: Algorithm) -> f64 {
    let vals: Vec<f64> = rows
        .iter()
        .filter(|r| r.algo == algo.name() && r.team_size > 0)
        .map(|r| r.pl)
        .collect();
    if vals.is_empty() {
        return 0.0;
    }
    vals.iter().sum::<f64>() / vals.len() as f64
}

/// Execution-team privacy loss with no member removal applied.
pub fn execution_team_pl(inst: &TaskInstance, scenario: &Scenario, team: &[usize]) -> f64 {
    let mw = &inst.member_worker;
    privacy_loss(
        team,
        &|i, j| scenario.s(mw[i], mw[j]),
        &|i, j| scenario.auc(mw[i], mw[j]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_store::ALL_LEVELS;

    #[test]
    fn f1_perfect() {
        let levels: Vec<TrustLevel> = ALL_LEVELS.iter().cycle().take(40).copied().collect();
        let r = f1_score(&levels, &levels).unwrap();
        assert_eq!(r.weighted_f1, 1.0);
        assert_eq!(r.macro_f1, 1.0);
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn f1_all_one_class_vs_balanced() {
        // Balanced truth over 4 classes, constant prediction: predicted
        // class F1 = 0.4, others 0, weighted = 0.1.
        let truth: Vec<TrustLevel> = ALL_LEVELS.iter().cycle().take(40).copied().collect();
        let pred = vec![TrustLevel::Master; 40];
        let r = f1_score(&pred, &truth).unwrap();
        assert!((r.weighted_f1 - 0.1).abs() < 1e-12);
        assert!((r.macro_f1 - 0.1).abs() < 1e-12);
        assert!((r.per_class_f1[TrustLevel::Master.index()] - 0.4).abs() < 1e-12);
        assert_eq!(r.per_class_f1[0], 0.0);
    }

    #[test]
    fn f1_rejects_empty_and_misaligned() {
        assert!(f1_score(&[], &[]).is_err());
        assert!(f1_score(&[TrustLevel::Master], &[]).is_err());
    }

    #[test]
    fn mae_one_hot_correct_is_zero() {
        let truth = vec![TrustLevel::Journeyer, TrustLevel::Observer];
        let dists = vec![[0.0, 0.0, 1.0, 0.0], [1.0, 0.0, 0.0, 0.0]];
        assert_eq!(mae(&dists, &truth).unwrap(), 0.0);
    }

    #[test]
    fn mae_uniform_vs_master() {
        let truth = vec![TrustLevel::Master; 10];
        let dists = vec![[0.25; 4]; 10];
        let m = mae(&dists, &truth).unwrap();
        assert!((m - 0.55).abs() < 1e-12, "mae {m}");
    }

    fn toy_graph(n: usize, seed: u64) -> TrustGraph {
        let mut g = TrustGraph::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..n {
            g.intern(&format!("n{i:03}"));
        }
        for i in 0..n {
            for _ in 0..3 {
                let j = rng.gen_range(0..n);
                if j != i {
                    let level = ALL_LEVELS[rng.gen_range(0..4)];
                    g.add_edge(i, j, level);
                }
            }
        }
        g
    }

    fn toy_regions() -> Vec<Region> {
        (0..6)
            .map(|i| {
                let lat = 30.0 + 0.3 * i as f64;
                Region {
                    id: i,
                    centroid: (lat, 10.0),
                    count: 10,
                    lat_min: lat - 0.1,
                    lat_max: lat + 0.1,
                    lon_min: 9.9,
                    lon_max: 10.1,
                }
            })
            .collect()
    }

    fn toy_scenario(workers: usize, seed: u64) -> Scenario {
        let g = toy_graph(workers + 10, seed);
        let params = ScenarioParams {
            worker_count: workers,
            team_size: 4,
            ..Default::default()
        };
        let trust_fn = move |u: usize, v: usize| {
            let mut r = ChaCha8Rng::seed_from_u64(seed ^ (u as u64) << 20 ^ v as u64);
            ALL_LEVELS[r.gen_range(0..4)].trust_value()
        };
        build_scenario(
            &g,
            &trust_fn,
            0.8,
            &HashMap::new(),
            &toy_regions(),
            &params,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn scenario_bijection_and_determinism() {
        let s1 = toy_scenario(30, 5);
        let s2 = toy_scenario(30, 5);
        assert_eq!(s1.workers.len(), 30);
        let nodes: HashSet<&str> = s1.workers.iter().map(|w| w.trust_node.as_str()).collect();
        assert_eq!(nodes.len(), 30, "trust nodes must be distinct");
        for (a, b) in s1.workers.iter().zip(&s2.workers) {
            assert_eq!(a.trust_node, b.trust_node);
            assert_eq!(a.loc, b.loc);
        }
        // s symmetric.
        for i in 0..10 {
            for j in 0..10 {
                if i != j {
                    assert!((s1.s(i, j) - s1.s(j, i)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn scenario_rejects_oversized_worker_count() {
        let g = toy_graph(5, 0);
        let params = ScenarioParams {
            worker_count: 10,
            ..Default::default()
        };
        assert!(build_scenario(
            &g,
            &|_, _| 1.0,
            0.8,
            &HashMap::new(),
            &toy_regions(),
            &params,
            0
        )
        .is_err());
    }

    #[test]
    fn sweep_row_counts_exact() {
        let scenario = toy_scenario(60, 1);
        let cfg = SolverConfig {
            tabu: TabuConfig { iterations: 50, ..Default::default() },
            baseline: BaselineConfig { iterations: 20, ..Default::default() },
        };
        let algos = [Algorithm::Tsr, Algorithm::Gmdb, Algorithm::Random];
        let seeds = [1u64, 2];
        let cases = [
            (SweepKind::Tasks6Regions, 6),
            (SweepKind::Workers200To1200, 6),
            (SweepKind::TasksSequential, 6),
            (SweepKind::Kappa10To70, 7),
            (SweepKind::Convergence, 10),
        ];
        for (kind, settings) in cases {
            let rows = run_sweep(kind, &scenario, &algos, &seeds, &cfg).unwrap();
            assert_eq!(
                rows.len(),
                algos.len() * settings * seeds.len(),
                "row count wrong for {}",
                kind.name()
            );
        }
    }

    #[test]
    fn sweep_reproducible() {
        let scenario = toy_scenario(40, 2);
        let cfg = SolverConfig {
            tabu: TabuConfig { iterations: 30, ..Default::default() },
            baseline: BaselineConfig { iterations: 10, ..Default::default() },
        };
        let algos = [Algorithm::Tsr, Algorithm::Sa];
        let a = run_sweep(SweepKind::Kappa10To70, &scenario, &algos, &[3], &cfg).unwrap();
        let b = run_sweep(SweepKind::Kappa10To70, &scenario, &algos, &[3], &cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.qod, y.qod);
            assert_eq!(x.pl, y.pl);
            assert_eq!(x.setting, y.setting);
        }
    }

    #[test]
    fn sequential_sweep_disjoint_teams() {
        let scenario = toy_scenario(80, 3);
        let cfg = SolverConfig {
            tabu: TabuConfig { iterations: 30, ..Default::default() },
            baseline: BaselineConfig { iterations: 10, ..Default::default() },
        };
        // Re-run the sequential logic manually to check disjointness.
        let mut pool: Vec<usize> = (0..scenario.worker_count()).collect();
        let mut all_recruited: HashSet<usize> = HashSet::new();
        for t in 0..4 {
            let task = task_at(
                &scenario,
                &format!("seq{t}"),
                scenario.regions[t].centroid,
                scenario.params.team_size,
            );
            if let Ok(inst) = build_instance(&scenario, &task, &pool, 10.0) {
                let (team, _) =
                    solve_once(Algorithm::Tsr, &inst, &scenario, &cfg, 1).unwrap();
                for &m in &team {
                    let w = inst.member_worker[m];
                    assert!(all_recruited.insert(w), "worker {w} recruited twice");
                }
                let recruited: HashSet<usize> =
                    team.iter().map(|&m| inst.member_worker[m]).collect();
                pool.retain(|w| !recruited.contains(w));
            }
        }
    }

    #[test]
    fn timing_positive() {
        let (_, ms) = timing(|| {
            let mut x = 0u64;
            for i in 0..10_000u64 {
                x = x.wrapping_add(i * i);
            }
            x
        });
        assert!(ms > 0.0);
    }

    #[test]
    fn zero_violations_across_sweeps() {
        let scenario = toy_scenario(60, 4);
        let cfg = SolverConfig {
            tabu: TabuConfig { iterations: 40, ..Default::default() },
            baseline: BaselineConfig { iterations: 15, ..Default::default() },
        };
        let algos = [Algorithm::Tsr, Algorithm::Gmab, Algorithm::Random];
        for kind in [
            SweepKind::Tasks6Regions,
            SweepKind::TasksSequential,
            SweepKind::Kappa10To70,
        ] {
            let rows = run_sweep(kind, &scenario, &algos, &[1], &cfg).unwrap();
            let total: usize = rows.iter().map(|r| r.violations).sum();
            assert_eq!(total, 0, "violations in {}", kind.name());
        }
    }

    #[test]
    fn sweep_csv_has_header_and_rows() {
        let scenario = toy_scenario(40, 6);
        let cfg = SolverConfig {
            tabu: TabuConfig { iterations: 20, ..Default::default() },
            baseline: BaselineConfig { iterations: 10, ..Default::default() },
        };
        let rows = run_sweep(
            SweepKind::Convergence,
            &scenario,
            &[Algorithm::Tsr],
            &[1],
            &cfg,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("sweep,setting,algo,seed"));
        assert_eq!(text.lines().count(), rows.len() + 1);
    }
}
