//! Acceptance gate: one test per criterion, each printing a single
//! `criterion NN: PASS/SKIP — detail` line (visible with --nocapture).
//! Dataset-backed criteria run only when CMCS_DATA_DIR points at a directory
//! containing `advogato.tsv` / `pgp.tsv` / `gowalla.csv`; otherwise they
//! print SKIP and succeed vacuously.

use std::collections::HashMap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cmcs::baselines::{
    de_recruit, gmab_recruit, gmdb_recruit, gmpl_recruit, pso_recruit, random_recruit, sa_recruit,
    vns_recruit, Algorithm, BaselineConfig,
};
use cmcs::benefits::{
    ability_benefit, build_ucrg, distance_benefit, pair_effect, privacy_loss, qod, Task, Ucrg,
    Worker,
};
use cmcs::embed_init::{deterministic_init, node2vec_embeddings, EmbedConfig};
use cmcs::graph_store::{
    load_trust_graph, split_edges, TrustGraph, ALL_LEVELS,
};
use cmcs::harness::{
    build_scenario, f1_score, mae, run_sweep, timing, ScenarioParams, SolverConfig, SweepKind,
};
use cmcs::recruit_tsr::{brute_force_recruit, tsr_recruit, TabuConfig};
use cmcs::region_partition::{lloyd_kmeans, minibatch_kmeans, PartitionConfig, Region};
use cmcs::tref_engine::{
    embedding_matrix, forward_prop, loss_and_gradients, pair_distribution, train, trust_benefit,
    PropGraph, TrainConfig, TrefModel,
};

fn data_dir() -> Option<PathBuf> {
    let dir = PathBuf::from(std::env::var("CMCS_DATA_DIR").ok()?);
    dir.is_dir().then_some(dir)
}

fn report(criterion: u32, status: &str, detail: &str) {
    println!("criterion {criterion:02}: {status} — {detail}");
}

// ---------------------------------------------------------------------------
// Shared generators

/// A random recruitment instance with full directed trust and AUC matrices.
struct Instance {
    ucrg: Ucrg,
    n: usize,
    t: Vec<f64>,
    auc: Vec<f64>,
}

impl Instance {
    fn s(&self, i: usize, j: usize) -> f64 {
        self.ucrg.trust_benefit(i, j)
    }

    fn pl(&self, team: &[usize]) -> f64 {
        privacy_loss(
            team,
            &|i, j| self.s(i, j),
            &|i, j| self.auc[i * self.n + j],
        )
    }
}

fn gen_instance(n: usize, k: usize, kappa: f64, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let workers: Vec<Worker> = (0..n)
        .map(|i| Worker {
            id: format!("w{i:04}"),
            loc: (rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)),
            len: rng.gen_range(0.0..100.0),
            num: rng.gen_range(0..50),
            trust_node: format!("w{i:04}"),
        })
        .collect();
    let task = Task {
        id: format!("inst{seed}"),
        loc: (0.0, 0.0),
        alpha: 0.2,
        beta: 0.8,
        zeta: 0.7,
        team_size: k,
        z: 200.0,
    };
    // Trust received mostly reflects the target's latent trustworthiness,
    // as in real social-trust graphs, rather than being independent noise.
    let latent: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
    let mut t = vec![0.0; n * n];
    let mut auc = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let lvl = if rng.gen_bool(0.75) { latent[j] } else { rng.gen_range(0..4) };
                t[i * n + j] = ALL_LEVELS[lvl].trust_value();
                auc[i * n + j] = rng.gen_range(0.6..0.95);
            }
        }
    }
    let t_for_s = t.clone();
    let refs: Vec<&Worker> = workers.iter().collect();
    let ucrg = build_ucrg(&task, &refs, kappa, 1.0, &move |a: &str, b: &str| {
        let ia: usize = a[1..].parse().unwrap();
        let ib: usize = b[1..].parse().unwrap();
        trust_benefit(t_for_s[ia * n + ib], t_for_s[ib * n + ia])
    })
    .unwrap();
    Instance { ucrg, n, t, auc }
}

fn toy_trust_graph(n: usize, seed: u64) -> TrustGraph {
    let mut g = TrustGraph::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..n {
        g.intern(&format!("n{i:04}"));
    }
    for i in 0..n {
        for _ in 0..4 {
            let j = rng.gen_range(0..n);
            if j != i {
                g.add_edge(i, j, ALL_LEVELS[rng.gen_range(0..4)]);
            }
        }
    }
    g
}

fn blob(center: (f64, f64), n: usize, spread: f64, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            (
                center.0 + rng.gen_range(-spread..spread),
                center.1 + rng.gen_range(-spread..spread),
            )
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Dataset-backed trust evaluation (criteria 1-4)

struct DatasetRun {
    weighted_f1: f64,
    mae: f64,
}

fn run_trust_protocol(
    g: &TrustGraph,
    train_fraction: f64,
    seed: u64,
    use_expert: bool,
) -> DatasetRun {
    let emb = node2vec_embeddings(g, &EmbedConfig { seed, ..Default::default() }).unwrap();
    let split = split_edges(g, train_fraction, seed).unwrap();
    let cfg = TrainConfig { seed, ..Default::default() };
    let trained = train(g, &split, &emb, &cfg, use_expert).unwrap();
    let mut preds = Vec::new();
    let mut dists = Vec::new();
    let mut truths = Vec::new();
    for &(u, v, level) in &split.test {
        let dist = pair_distribution(&trained.state, &trained.model, u, v);
        let best = (0..4)
            .max_by(|&a, &b| dist[a].partial_cmp(&dist[b]).unwrap())
            .unwrap();
        preds.push(ALL_LEVELS[best]);
        dists.push(dist);
        truths.push(level);
    }
    DatasetRun {
        weighted_f1: f1_score(&preds, &truths).unwrap().weighted_f1,
        mae: mae(&dists, &truths).unwrap(),
    }
}

fn dataset_criterion(criterion: u32, file: &str, f1_min: f64, mae_max: f64) {
    let Some(dir) = data_dir() else {
        report(criterion, "SKIP", &format!("{file} not available (set CMCS_DATA_DIR)"));
        return;
    };
    let path = dir.join(file);
    if !path.is_file() {
        report(criterion, "SKIP", &format!("{} not found", path.display()));
        return;
    }
    let (g, _) = load_trust_graph(&path).unwrap();
    let mut f1s = Vec::new();
    let mut maes = Vec::new();
    for seed in 0..3u64 {
        let run = run_trust_protocol(&g, 0.8, seed, true);
        f1s.push(run.weighted_f1);
        maes.push(run.mae);
    }
    let mean_f1 = f1s.iter().sum::<f64>() / 3.0;
    let mean_mae = maes.iter().sum::<f64>() / 3.0;
    let ok = mean_f1 >= f1_min && mean_mae <= mae_max;
    report(
        criterion,
        if ok { "PASS" } else { "FAIL" },
        &format!("{file}: weighted F1 {mean_f1:.4} (>= {f1_min}), MAE {mean_mae:.4} (<= {mae_max})"),
    );
    assert!(ok);
}

#[test]
fn criterion_01_trust_evaluation_advogato() {
    dataset_criterion(1, "advogato.tsv", 0.72, 0.10);
}

#[test]
fn criterion_02_trust_evaluation_pgp() {
    dataset_criterion(2, "pgp.tsv", 0.84, 0.10);
}

#[test]
fn criterion_03_expert_knowledge_ablation() {
    let Some(dir) = data_dir() else {
        report(3, "SKIP", "datasets not available (set CMCS_DATA_DIR)");
        return;
    };
    let mut all_ok = true;
    let mut details = Vec::new();
    for file in ["advogato.tsv", "pgp.tsv"] {
        let path = dir.join(file);
        if !path.is_file() {
            report(3, "SKIP", &format!("{} not found", path.display()));
            return;
        }
        let (g, _) = load_trust_graph(&path).unwrap();
        let mut with = Vec::new();
        let mut without = Vec::new();
        for seed in 0..3u64 {
            with.push(run_trust_protocol(&g, 0.8, seed, true).weighted_f1);
            without.push(run_trust_protocol(&g, 0.8, seed, false).weighted_f1);
        }
        let mean_with = with.iter().sum::<f64>() / 3.0;
        let mean_without = without.iter().sum::<f64>() / 3.0;
        let per_seed_ok = with
            .iter()
            .zip(&without)
            .all(|(w, wo)| w - wo >= -0.005);
        let ok = mean_with >= mean_without && per_seed_ok;
        all_ok &= ok;
        details.push(format!(
            "{file}: with {mean_with:.4} vs without {mean_without:.4}"
        ));
    }
    report(3, if all_ok { "PASS" } else { "FAIL" }, &details.join("; "));
    assert!(all_ok);
}

#[test]
fn criterion_04_reduced_training_robustness() {
    let Some(dir) = data_dir() else {
        report(4, "SKIP", "advogato.tsv not available (set CMCS_DATA_DIR)");
        return;
    };
    let path = dir.join("advogato.tsv");
    if !path.is_file() {
        report(4, "SKIP", &format!("{} not found", path.display()));
        return;
    }
    let (g, _) = load_trust_graph(&path).unwrap();
    let mut means = Vec::new();
    for fraction in [0.8, 0.6, 0.4] {
        let mut f1s = Vec::new();
        for seed in 0..3u64 {
            f1s.push(run_trust_protocol(&g, fraction, seed, true).weighted_f1);
        }
        means.push(f1s.iter().sum::<f64>() / 3.0);
    }
    let monotone = means[0] >= means[1] && means[1] >= means[2];
    let floor_ok = means[2] >= 0.68;
    let ok = monotone && floor_ok;
    report(
        4,
        if ok { "PASS" } else { "FAIL" },
        &format!("F1 at 80/60/40%: {:.4}/{:.4}/{:.4}", means[0], means[1], means[2]),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_05_gradient_correctness() {
    let g = toy_trust_graph(10, 11);
    let emb = deterministic_init(&g, 5, 1).unwrap();
    let x = embedding_matrix(&g, &emb).unwrap();
    let base = g.edges_sorted();
    let prop = PropGraph::build(g.node_count(), &base, &[]);
    let model = TrefModel::init(5, 3, &[4, 3], 7);
    let lambda = 1e-3;
    let batch = base.clone();

    let loss_of = |m: &TrefModel| {
        let state = forward_prop(&prop, &x, m).unwrap();
        loss_and_gradients(&prop, &state, m, &batch, lambda).0
    };
    let state = forward_prop(&prop, &x, &model).unwrap();
    let (_, mut grads) = loss_and_gradients(&prop, &state, &model, &batch, lambda);
    let mut analytic = Vec::new();
    grads.for_each_slice_mut(|s| analytic.extend_from_slice(s));

    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut param = 0usize;
    let total = analytic.len();
    for p in 0..total {
        let perturb = |delta: f64| {
            let mut m = model.clone();
            let mut idx = 0usize;
            m.for_each_slice_mut(|s| {
                for v in s.iter_mut() {
                    if idx == p {
                        *v += delta;
                    }
                    idx += 1;
                }
            });
            loss_of(&m)
        };
        let fd = (perturb(h) - perturb(-h)) / (2.0 * h);
        let an = analytic[p];
        let rel = (fd - an).abs() / (fd.abs() + an.abs()).max(1e-8);
        if rel > worst && (fd - an).abs() > 1e-10 {
            worst = rel;
            param = p;
        }
    }
    let ok = worst < 1e-4;
    report(
        5,
        if ok { "PASS" } else { "FAIL" },
        &format!("{total} parameters, worst relative error {worst:.2e} (param {param})"),
    );
    assert!(ok);
}

#[test]
fn criterion_06_tsr_oracle_equivalence() {
    let mut hits = 0;
    for seed in 0..100u64 {
        let inst = gen_instance(12, 4, 10.0, 1000 + seed);
        let (_, bf_q) = brute_force_recruit(&inst.ucrg, 4).unwrap();
        let cfg = TabuConfig { seed, ..Default::default() };
        let (_, q, _) = tsr_recruit(&inst.ucrg, &cfg).unwrap();
        assert!(q <= bf_q + 1e-9, "TSR exceeded the exhaustive optimum");
        if (bf_q - q).abs() < 1e-9 {
            hits += 1;
        }
    }
    let ok = hits >= 95;
    report(6, if ok { "PASS" } else { "FAIL" }, &format!("{hits}/100 optima (needs >= 95)"));
    assert!(ok);
}

#[test]
fn criterion_07_tsr_dominance() {
    let instances = 50;
    let mut wins: HashMap<&str, usize> = HashMap::new();
    let mut tsr_ms_total = 0.0;
    let mut vns_ms_total = 0.0;
    let mut rel_gap_total = 0.0;
    for i in 0..instances as u64 {
        let inst = gen_instance(200, 10, 10.0, 2000 + i);
        let u = &inst.ucrg;
        let n = inst.n;
        let tabu = TabuConfig { seed: i, ..Default::default() };
        let (tsr_res, tsr_ms) = timing(|| tsr_recruit(u, &tabu).unwrap());
        let tsr_q = tsr_res.1;
        tsr_ms_total += tsr_ms;

        let base = BaselineConfig { seed: i, ..Default::default() };
        let de_q = de_recruit(u, &base).unwrap().1;
        let pso_q = pso_recruit(u, &base).unwrap().1;
        let sa_q = sa_recruit(u, &BaselineConfig { iterations: 6000, ..base.clone() })
            .unwrap()
            .1;
        let (vns_res, vns_ms) = timing(|| {
            vns_recruit(u, &BaselineConfig { iterations: 30, ..base.clone() }).unwrap()
        });
        let vns_q = vns_res.1;
        vns_ms_total += vns_ms;
        let t = inst.t.clone();
        let gmpl_q = gmpl_recruit(u, &|a, b| t[a * n + b]).unwrap().1;
        let gmdb_q = gmdb_recruit(u).unwrap().1;
        let gmab_q = gmab_recruit(u).unwrap().1;
        let rand_q = random_recruit(u, i).unwrap().1;

        for (name, q) in [
            ("gmpl", gmpl_q),
            ("gmdb", gmdb_q),
            ("gmab", gmab_q),
            ("random", rand_q),
            ("de", de_q),
            ("pso", pso_q),
            ("sa", sa_q),
        ] {
            if tsr_q >= q - 1e-12 {
                *wins.entry(name).or_default() += 1;
            }
        }
        rel_gap_total += (tsr_q - vns_q).abs() / tsr_q.max(vns_q);
    }
    let greedy_ok = ["gmpl", "gmdb", "gmab", "random"]
        .iter()
        .all(|a| wins.get(a).copied().unwrap_or(0) * 100 >= 90 * instances);
    let meta_ok = ["de", "pso", "sa"]
        .iter()
        .all(|a| wins.get(a).copied().unwrap_or(0) * 100 >= 70 * instances);
    let mean_gap = rel_gap_total / instances as f64;
    let vns_ok = mean_gap <= 0.02 && tsr_ms_total < vns_ms_total;
    let ok = greedy_ok && meta_ok && vns_ok;
    report(
        7,
        if ok { "PASS" } else { "FAIL" },
        &format!(
            "wins/{instances}: {:?}; TSR-VNS mean gap {:.3}% ; TSR {:.0} ms vs VNS {:.0} ms",
            wins, mean_gap * 100.0, tsr_ms_total, vns_ms_total
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_08_privacy_ordering() {
    let instances = 50;
    let mut pls: HashMap<&str, Vec<f64>> = HashMap::new();
    let mut tsr_below_gmpl = 0;
    for i in 0..instances as u64 {
        let inst = gen_instance(60, 8, 10.0, 3000 + i);
        let u = &inst.ucrg;
        let n = inst.n;
        let tabu = TabuConfig { seed: i, ..Default::default() };
        let tsr_team = tsr_recruit(u, &tabu).unwrap().0;
        let t = inst.t.clone();
        let gmpl_team = gmpl_recruit(u, &|a, b| t[a * n + b]).unwrap().0;
        let gmdb_team = gmdb_recruit(u).unwrap().0;
        let gmab_team = gmab_recruit(u).unwrap().0;
        let rand_team = random_recruit(u, i).unwrap().0;
        let tsr_pl = inst.pl(&tsr_team);
        let gmpl_pl = inst.pl(&gmpl_team);
        if tsr_pl < gmpl_pl {
            tsr_below_gmpl += 1;
        }
        pls.entry("tsr").or_default().push(tsr_pl);
        pls.entry("gmpl").or_default().push(gmpl_pl);
        pls.entry("gmdb").or_default().push(inst.pl(&gmdb_team));
        pls.entry("gmab").or_default().push(inst.pl(&gmab_team));
        pls.entry("random").or_default().push(inst.pl(&rand_team));
    }
    let mean = |k: &str| pls[k].iter().sum::<f64>() / instances as f64;
    let (m_gmpl, m_tsr) = (mean("gmpl"), mean("tsr"));
    let others_ok = ["gmdb", "gmab", "random"].iter().all(|k| m_tsr <= mean(k));
    let ok = m_gmpl <= m_tsr && others_ok;
    report(
        8,
        if ok { "PASS" } else { "FAIL" },
        &format!(
            "mean pl: gmpl {:.4} <= tsr {:.4} <= gmdb {:.4}/gmab {:.4}/random {:.4}; tsr<gmpl in {tsr_below_gmpl} instances (permitted)",
            m_gmpl, m_tsr, mean("gmdb"), mean("gmab"), mean("random")
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_09_kappa_sweep() {
    // Small fixed instance so every solver reliably reaches its optimum at
    // each kappa; worker field and trust matrices are identical across kappa.
    let n = 12;
    let k = 3;
    let kappas: Vec<f64> = (1..=7).map(|s| 10.0 * s as f64).collect();
    let mut qods: HashMap<&str, Vec<f64>> = HashMap::new();
    let mut gmab_beats_gmdb = false;
    for &kappa in &kappas {
        let inst = gen_instance(n, k, kappa, 4000);
        let u = &inst.ucrg;
        let tabu = TabuConfig { seed: 1, ..Default::default() };
        // Generous budget so the stochastic solvers reliably reach their
        // optimum on this 220-team instance at every kappa.
        let base = BaselineConfig { seed: 1, population: 60, iterations: 600, ..Default::default() };
        let t = inst.t.clone();
        let nn = inst.n;
        let runs: Vec<(&str, f64)> = vec![
            ("tsr", tsr_recruit(u, &tabu).unwrap().1),
            ("de", de_recruit(u, &base).unwrap().1),
            ("pso", pso_recruit(u, &base).unwrap().1),
            ("vns", vns_recruit(u, &base).unwrap().1),
            ("sa", sa_recruit(u, &BaselineConfig { iterations: 2000, ..base.clone() }).unwrap().1),
            ("gmpl", gmpl_recruit(u, &|a, b| t[a * nn + b]).unwrap().1),
            ("gmdb", gmdb_recruit(u).unwrap().1),
            ("gmab", gmab_recruit(u).unwrap().1),
        ];
        let gmdb_q = runs.iter().find(|(a, _)| *a == "gmdb").unwrap().1;
        let gmab_q = runs.iter().find(|(a, _)| *a == "gmab").unwrap().1;
        if gmab_q > gmdb_q {
            gmab_beats_gmdb = true;
        }
        for (a, q) in runs {
            qods.entry(a).or_default().push(q);
        }
    }
    let non_monotone: Vec<String> = qods
        .iter()
        .filter(|(_, qs)| !qs.windows(2).all(|w| w[1] >= w[0] - 1e-9))
        .map(|(a, qs)| format!("{a}: {qs:?}"))
        .collect();
    let ok = non_monotone.is_empty() && gmab_beats_gmdb;
    report(
        9,
        if ok { "PASS" } else { "FAIL" },
        &format!(
            "non-monotone solvers over kappa 10..70: {:?}; GMAB overtakes GMDB: {gmab_beats_gmdb}",
            non_monotone
        ),
    );
    assert!(ok);
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

#[test]
fn criterion_10_constraint_invariants() {
    let g = toy_trust_graph(90, 5);
    let params = ScenarioParams { worker_count: 80, team_size: 4, ..Default::default() };
    let trust_fn = |u: usize, v: usize| {
        let mut r = ChaCha8Rng::seed_from_u64(((u as u64) << 24) ^ v as u64);
        ALL_LEVELS[r.gen_range(0..4)].trust_value()
    };
    let scenario = build_scenario(
        &g, &trust_fn, 0.8, &HashMap::new(), &toy_regions(), &params, 5,
    )
    .unwrap();
    let cfg = SolverConfig {
        tabu: TabuConfig { iterations: 60, ..Default::default() },
        baseline: BaselineConfig { iterations: 20, ..Default::default() },
    };
    let algos = [
        Algorithm::Tsr,
        Algorithm::De,
        Algorithm::Gmpl,
        Algorithm::Gmdb,
        Algorithm::Gmab,
        Algorithm::Random,
    ];
    let mut total_rows = 0;
    let mut total_violations = 0;
    for kind in [
        SweepKind::Tasks6Regions,
        SweepKind::Workers200To1200,
        SweepKind::TasksSequential,
        SweepKind::Kappa10To70,
        SweepKind::Convergence,
    ] {
        let rows = run_sweep(kind, &scenario, &algos, &[1, 2], &cfg).unwrap();
        total_rows += rows.len();
        total_violations += rows.iter().map(|r| r.violations).sum::<usize>();
        // Feasible rows obey the privacy and team-size bounds explicitly.
        for r in &rows {
            if r.feasible {
                assert!(r.pl <= scenario.params.zeta + 1e-12);
                assert!(r.collab_size >= 2 && r.collab_size <= r.team_size);
            }
        }
    }
    let ok = total_violations == 0;
    report(
        10,
        if ok { "PASS" } else { "FAIL" },
        &format!("{total_rows} sweep rows across 5 sweeps, {total_violations} violations"),
    );
    assert!(ok);
}

#[test]
fn criterion_11_kmeans_quality_and_speed() {
    // 2-blob and 10-blob quality vs full-batch Lloyd, best of 5 seeds each.
    let mut quality_ok = true;
    let mut detail = String::new();
    for (label, k, centers) in [
        ("2-blob", 2usize, vec![(40.0, -74.0), (34.0, -118.0)]),
        (
            "10-blob",
            10,
            (0..10).map(|i| (25.0 + 2.0 * i as f64, -100.0 + 3.0 * i as f64)).collect(),
        ),
    ] {
        let mut pts = Vec::new();
        for (i, c) in centers.iter().enumerate() {
            pts.extend(blob(*c, 400, 0.15, i as u64));
        }
        let best_mb = (0..5u64)
            .map(|s| {
                minibatch_kmeans(
                    &pts,
                    &PartitionConfig { k, batch_size: 500, max_iters: 300, seed: s, tol_degrees: 1e-6 },
                )
                .unwrap()
                .inertia
            })
            .fold(f64::INFINITY, f64::min);
        let best_lloyd = (0..5u64)
            .map(|s| lloyd_kmeans(&pts, k, 200, s).unwrap().inertia)
            .fold(f64::INFINITY, f64::min);
        quality_ok &= best_mb <= 1.1 * best_lloyd;
        detail.push_str(&format!(
            "{label}: mini-batch {best_mb:.1} vs 1.1x Lloyd {:.1}; ",
            1.1 * best_lloyd
        ));
    }

    // Timing clause: a 500K-point Gowalla check-in sample when present,
    // otherwise a synthetic 500K-point field as the capability check.
    let gowalla = data_dir().map(|d| d.join("gowalla.csv")).filter(|p| p.is_file());
    let points: Vec<(f64, f64)> = match &gowalla {
        Some(p) => {
            let (checkins, _) = cmcs::graph_store::load_checkins(p).unwrap();
            let mut pts: Vec<(f64, f64)> = checkins.iter().map(|c| (c.lat, c.lon)).collect();
            pts.truncate(500_000);
            pts
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            (0..500_000)
                .map(|_| (rng.gen_range(25.0..48.0), rng.gen_range(-120.0..-70.0)))
                .collect()
        }
    };
    let cfg = PartitionConfig { k: 100, batch_size: 3100, seed: 0, ..Default::default() };
    let (res, ms) = timing(|| minibatch_kmeans(&points, &cfg).unwrap());
    let _ = res;
    let timing_ok = ms < 60_000.0;
    detail.push_str(&format!(
        "500K-point k=100 run ({}) in {:.1} s",
        if gowalla.is_some() { "gowalla" } else { "synthetic stand-in" },
        ms / 1000.0
    ));
    let ok = quality_ok && timing_ok;
    let status = if !ok {
        "FAIL"
    } else if gowalla.is_some() {
        "PASS"
    } else {
        "PASS (gowalla clause on synthetic stand-in)"
    };
    report(11, status, &detail);
    assert!(ok);
}

#[test]
fn criterion_12_formula_examples() {
    let tol = 1e-9;
    let mut checks: Vec<(&str, f64, f64)> = Vec::new();

    // Trust benefit.
    checks.push(("s(3,3)", trust_benefit(3.0, 3.0), 6.0));
    checks.push(("s(0.5,0.5)", trust_benefit(0.5, 0.5), 1.0));
    checks.push(("s(3,1)", trust_benefit(3.0, 1.0), 4.0 * (-2.0f64).exp()));
    checks.push(("s symmetric", trust_benefit(1.0, 3.0), trust_benefit(3.0, 1.0)));

    // Ability benefit.
    let task = Task {
        id: "t".into(),
        loc: (0.0, 0.0),
        alpha: 0.2,
        beta: 0.8,
        zeta: 0.7,
        team_size: 2,
        z: 200.0,
    };
    checks.push(("a(max)", ability_benefit(1.0, 1.0, &task, 1.0), 1.0));
    checks.push(("a(min)", ability_benefit(0.0, 0.0, &task, 1.0), 0.0));
    checks.push(("a(mid)", ability_benefit(0.5, 0.25, &task, 1.0), 0.3));

    // Distance benefit.
    checks.push(("p(0)", distance_benefit(0.0, 10.0, 200.0).unwrap(), 1.0));
    checks.push((
        "p(kappa)",
        distance_benefit(10.0, 10.0, 200.0).unwrap(),
        (-1.0f64).exp(),
    ));
    assert!(distance_benefit(200.0, 10.0, 200.0).is_err(), "d >= z must error");

    // Task-completion effect.
    checks.push(("U(max)", pair_effect(1.0, 1.0, 1.0, 1.0, 6.0), 12.0));
    checks.push(("U(mid)", pair_effect(0.5, 0.5, 0.25, 1.0, 1.0), 0.5));

    // Quality of data.
    let inst = gen_instance(4, 2, 10.0, 99);
    checks.push((
        "QoD pair",
        qod(&[0, 1], &inst.ucrg).unwrap(),
        inst.ucrg.weight(0, 1),
    ));
    let q123 = qod(&[0, 1, 2], &inst.ucrg).unwrap();
    let manual = 2.0
        * (inst.ucrg.weight(0, 1) + inst.ucrg.weight(0, 2) + inst.ucrg.weight(1, 2))
        / (3.0 * 2.0);
    checks.push(("QoD triple", q123, manual));

    // Privacy loss.
    checks.push((
        "pl(P=0)",
        privacy_loss(&[0, 1, 2], &|_, _| 3.0, &|_, _| 1.0),
        0.0,
    ));
    checks.push((
        "pl pair",
        privacy_loss(&[0, 1], &|_, _| 1.0, &|_, _| 0.5),
        (-2.0 / 0.625f64).exp(),
    ));

    let mut failures = Vec::new();
    for (name, got, want) in &checks {
        if (got - want).abs() > tol {
            failures.push(format!("{name}: {got} != {want}"));
        }
    }
    let ok = failures.is_empty();
    report(
        12,
        if ok { "PASS" } else { "FAIL" },
        &format!("{} formula examples within 1e-9", checks.len()),
    );
    assert!(ok, "{failures:?}");
}

