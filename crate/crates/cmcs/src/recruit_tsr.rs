//! Tabu-search worker recruitment over the UCRG, brute-force oracle,
//! cross-task conflict resolution, and privacy-constrained collaboration-team
//! selection.

use std::collections::{HashMap, HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::benefits::{privacy_loss, qod, Task, Ucrg};
use crate::error::{CmcsError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TabuConfig {
    pub iterations: usize,
    pub tenure: usize,
    pub neighborhood_sample: usize,
    pub seed: u64,
}

impl Default for TabuConfig {
    fn default() -> Self {
        TabuConfig {
            iterations: 500,
            tenure: 200,
            neighborhood_sample: 512,
            seed: 0,
        }
    }
}

impl TabuConfig {
    fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.tenure == 0 {
            return Err(CmcsError::InvalidArgument(
                "tabu iterations and tenure must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Final recruitment result for one task. Teams hold indices into the task's
/// UCRG member list.
#[derive(Debug, Clone)]
pub struct RecruitmentOutcome {
    pub task_id: String,
    pub execution_team: Vec<usize>,
    pub collaboration_team: Vec<usize>,
    pub qod: f64,
    pub pl: f64,
    pub collab_feasible: bool,
    pub filled: bool,
    pub iterations_used: usize,
    pub best_qod_trace: Vec<f64>,
}

fn canonical_key(team: &[usize]) -> Vec<usize> {
    let mut key = team.to_vec();
    key.sort_unstable();
    key
}

/// Sum of pair weights inside `team`.
fn pair_sum(team: &[usize], ucrg: &Ucrg) -> f64 {
    let mut sum = 0.0;
    for (k, &i) in team.iter().enumerate() {
        for &j in &team[k + 1..] {
            sum += ucrg.weight(i, j);
        }
    }
    sum
}

fn qod_from_sum(sum: f64, k: usize) -> f64 {
    2.0 * sum / (k as f64 * (k as f64 - 1.0))
}

/// Tabu search over swap-one neighbors of the current team, restricted to the
/// given candidate indices.
pub fn tsr_recruit_subset(
    ucrg: &Ucrg,
    allowed: &[usize],
    cfg: &TabuConfig,
) -> Result<(Vec<usize>, f64, Vec<f64>)> {
    cfg.validate()?;
    let k = ucrg.task.team_size;
    if allowed.len() < k {
        return Err(CmcsError::Infeasible(format!(
            "task {}: {} available candidates for a team of {}",
            ucrg.task.id,
            allowed.len(),
            k
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut pool = allowed.to_vec();
    pool.sort_unstable();
    pool.shuffle(&mut rng);
    let mut team: Vec<usize> = pool[..k].to_vec();
    let mut outside: Vec<usize> = pool[k..].to_vec();

    let mut sum = pair_sum(&team, ucrg);
    let mut current = qod_from_sum(sum, k);
    let mut best_team = canonical_key(&team);
    let mut best = current;
    let mut trace = vec![best];

    let mut tabu_set: HashSet<Vec<usize>> = HashSet::new();
    let mut tabu_fifo: VecDeque<Vec<usize>> = VecDeque::new();
    let start_key = canonical_key(&team);
    tabu_set.insert(start_key.clone());
    tabu_fifo.push_back(start_key);

    // Marginal weight of candidate c against the current team, minus member i.
    let delta = |team: &[usize], out_pos: usize, cand: usize, ucrg: &Ucrg| -> f64 {
        let out = team[out_pos];
        let mut d = 0.0;
        for (p, &m) in team.iter().enumerate() {
            if p == out_pos {
                continue;
            }
            d += ucrg.weight(cand, m) - ucrg.weight(out, m);
        }
        d
    };

    let full_neighborhood = k * outside.len();
    let mut iterations_used = 0;
    for _ in 0..cfg.iterations {
        iterations_used += 1;
        if outside.is_empty() {
            // team_size == candidate count: no neighbors exist.
            trace.push(best);
            break;
        }
        // Best neighbor: either the full swap enumeration or a uniform sample.
        let mut best_move: Option<(usize, usize, f64)> = None; // (out_pos, in_pos, delta)
        let mut consider = |out_pos: usize, in_pos: usize| {
            let d = delta(&team, out_pos, outside[in_pos], ucrg);
            match best_move {
                Some((_, _, bd)) if d <= bd => {}
                _ => best_move = Some((out_pos, in_pos, d)),
            }
        };
        if full_neighborhood <= cfg.neighborhood_sample {
            for out_pos in 0..k {
                for in_pos in 0..outside.len() {
                    consider(out_pos, in_pos);
                }
            }
        } else {
            for _ in 0..cfg.neighborhood_sample {
                let out_pos = rng.gen_range(0..k);
                let in_pos = rng.gen_range(0..outside.len());
                consider(out_pos, in_pos);
            }
        }
        let (out_pos, in_pos, d) = best_move.unwrap();
        let neighbor_qod = qod_from_sum(sum + d, k);

        let mut neighbor = team.clone();
        neighbor[out_pos] = outside[in_pos];
        let key = canonical_key(&neighbor);
        if neighbor_qod > current && !tabu_set.contains(&key) {
            let leaving = team[out_pos];
            team[out_pos] = outside[in_pos];
            outside[in_pos] = leaving;
            sum += d;
            current = neighbor_qod;
            if tabu_fifo.len() == cfg.tenure {
                if let Some(old) = tabu_fifo.pop_front() {
                    tabu_set.remove(&old);
                }
            }
            tabu_set.insert(key.clone());
            tabu_fifo.push_back(key.clone());
            if current > best {
                best = current;
                best_team = key;
            }
        }
        trace.push(best);
    }

    // Re-verify the incremental QoD against the direct computation.
    let exact = qod(&best_team, ucrg)?;
    if (exact - best).abs() > 1e-9 {
        return Err(CmcsError::Numerical(format!(
            "incremental QoD {best} drifted from exact {exact}"
        )));
    }
    let _ = iterations_used;
    Ok((best_team, exact, trace))
}

/// Tabu search over the full candidate set.
pub fn tsr_recruit(ucrg: &Ucrg, cfg: &TabuConfig) -> Result<(Vec<usize>, f64, Vec<f64>)> {
    let all: Vec<usize> = (0..ucrg.len()).collect();
    tsr_recruit_subset(ucrg, &all, cfg)
}

/// Exact maximizer by enumeration; ties break toward the lexicographically
/// smallest sorted member-id tuple.
pub fn brute_force_recruit(ucrg: &Ucrg, team_size: usize) -> Result<(Vec<usize>, f64)> {
    let n = ucrg.len();
    if team_size < 2 || team_size > n {
        return Err(CmcsError::InvalidArgument(format!(
            "team size {team_size} invalid for {n} candidates"
        )));
    }
    let mut combos: u128 = 1;
    for i in 0..team_size {
        combos = combos * (n - i) as u128 / (i + 1) as u128;
        if combos > 1_000_000 {
            return Err(CmcsError::TooLarge(format!(
                "C({n},{team_size}) exceeds the brute-force budget"
            )));
        }
    }
    // Candidate order sorted by member id (the UCRG is built id-sorted, but
    // re-derive it so the lexicographic tie-break is explicit).
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ucrg.members[a].cmp(&ucrg.members[b]));

    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut idx: Vec<usize> = (0..team_size).collect();
    loop {
        let team: Vec<usize> = idx.iter().map(|&i| order[i]).collect();
        let q = qod(&team, ucrg)?;
        let better = match &best {
            None => true,
            Some((_, bq)) => q > *bq + 1e-15,
        };
        if better {
            best = Some((canonical_key(&team), q));
        }
        // Next combination in lexicographic order over `order` positions.
        let mut i = team_size;
        loop {
            if i == 0 {
                return Ok(best.unwrap());
            }
            i -= 1;
            if idx[i] < n - (team_size - i) {
                idx[i] += 1;
                for j in (i + 1)..team_size {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Resolve cross-task worker conflicts. Workers are identified by UCRG member
/// id; when one sits in several execution teams, the team where their summed
/// pair effect is largest keeps them and every other team re-recruits from
/// its candidates minus all workers bound to other tasks.
pub fn resolve_conflicts(
    outcomes: &mut [RecruitmentOutcome],
    ucrgs: &[Ucrg],
    cfg: &TabuConfig,
) -> Result<()> {
    assert_eq!(outcomes.len(), ucrgs.len());
    // worker id -> task index, fixed once a conflict is decided in its favor.
    let mut bound: HashMap<String, usize> = HashMap::new();

    loop {
        // Find the lexicographically smallest conflicting worker id.
        let mut holders: HashMap<&str, Vec<usize>> = HashMap::new();
        for (t, o) in outcomes.iter().enumerate() {
            if !o.filled {
                continue;
            }
            for &m in &o.execution_team {
                holders.entry(ucrgs[t].members[m].as_str()).or_default().push(t);
            }
        }
        let conflict = holders
            .iter()
            .filter(|(_, ts)| ts.len() > 1)
            .map(|(w, ts)| (w.to_string(), ts.clone()))
            .min_by(|a, b| a.0.cmp(&b.0));
        let Some((worker, tasks)) = conflict else {
            return Ok(());
        };

        // The team with the largest summed pair effect keeps the worker;
        // ties break toward the lowest task index.
        let mut winner = tasks[0];
        let mut winner_sum = f64::NEG_INFINITY;
        for &t in &tasks {
            let u = &ucrgs[t];
            let w_idx = u.members.iter().position(|m| m == &worker).unwrap();
            let sum: f64 = outcomes[t]
                .execution_team
                .iter()
                .filter(|&&m| m != w_idx)
                .map(|&m| u.weight(w_idx, m))
                .sum();
            if sum > winner_sum {
                winner_sum = sum;
                winner = t;
            }
        }
        bound.insert(worker.clone(), winner);

        for &t in &tasks {
            if t == winner {
                continue;
            }
            let u = &ucrgs[t];
            let allowed: Vec<usize> = (0..u.len())
                .filter(|&m| match bound.get(&u.members[m]) {
                    Some(&owner) => owner == t,
                    None => true,
                })
                .collect();
            let sub_cfg = TabuConfig {
                seed: cfg.seed ^ (t as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
                ..cfg.clone()
            };
            match tsr_recruit_subset(u, &allowed, &sub_cfg) {
                Ok((team, q, trace)) => {
                    let o = &mut outcomes[t];
                    o.execution_team = team;
                    o.qod = q;
                    o.best_qod_trace = trace;
                }
                Err(CmcsError::Infeasible(_)) => {
                    let o = &mut outcomes[t];
                    o.filled = false;
                    o.execution_team.clear();
                    o.collaboration_team.clear();
                    o.qod = 0.0;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// Shrink the execution team to a collaboration team meeting the task's
/// privacy threshold. On each step the member with the lowest mean trust
/// benefit toward the rest leaves (ties: lowest member id). Returns the team,
/// its privacy loss, and whether the threshold was met.
pub fn select_collaboration_team(
    team: &[usize],
    task: &Task,
    members: &[String],
    s: &dyn Fn(usize, usize) -> f64,
    auc: &dyn Fn(usize, usize) -> f64,
) -> (Vec<usize>, f64, bool) {
    assert!(team.len() >= 2, "collaboration selection needs |team| >= 2");
    let mut collab = canonical_key(team);
    let mut pl = privacy_loss(&collab, s, auc);
    while pl > task.zeta && collab.len() > 2 {
        let mut victim = 0;
        let mut victim_mean = f64::INFINITY;
        for (pos, &i) in collab.iter().enumerate() {
            let mean: f64 = collab
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| s(i, j))
                .sum::<f64>()
                / (collab.len() - 1) as f64;
            let better = mean < victim_mean - 1e-15
                || ((mean - victim_mean).abs() <= 1e-15
                    && members[i] < members[collab[victim]]);
            if better {
                victim_mean = mean;
                victim = pos;
            }
        }
        collab.remove(victim);
        pl = privacy_loss(&collab, s, auc);
    }
    if pl <= task.zeta {
        (collab, pl, true)
    } else {
        (Vec::new(), pl, false)
    }
}
