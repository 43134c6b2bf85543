//! Ability, distance, and trust benefits; pairwise task-completion effects;
//! QoD; privacy loss; and the undirected complete recruitment graph built for
//! each task's candidate team.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{CmcsError, Result};
use crate::geo::haversine_km;

/// A worker: location, historical mileage and task count, and the trust-graph
/// node the worker is bound to.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Worker {
    pub id: String,
    pub loc: (f64, f64),
    pub len: f64,
    pub num: u64,
    pub trust_node: String,
}

/// A task: location, ability weights (alpha + beta = 1), privacy-loss
/// threshold, execution-team size, and maximum recruitment range in km.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub loc: (f64, f64),
    pub alpha: f64,
    pub beta: f64,
    pub zeta: f64,
    pub team_size: usize,
    pub z: f64,
}

impl Task {
    pub fn validate(&self) -> Result<()> {
        if (self.alpha + self.beta - 1.0).abs() > 1e-9 {
            return Err(CmcsError::InvalidArgument(format!(
                "task {}: alpha + beta must equal 1",
                self.id
            )));
        }
        if self.team_size < 2 {
            return Err(CmcsError::InvalidArgument(format!(
                "task {}: team_size must be >= 2",
                self.id
            )));
        }
        if self.z <= 0.0 {
            return Err(CmcsError::InvalidArgument(format!(
                "task {}: recruitment range must be positive",
                self.id
            )));
        }
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return Err(CmcsError::InvalidArgument(format!(
                "task {}: zeta must be in (0,1)",
                self.id
            )));
        }
        Ok(())
    }
}

/// Complete weighted graph over a candidate team. Members are indexed
/// 0..members.len() in ascending id order; `weight` holds U_ij for every
/// unordered pair, and per-member ability/distance benefits are kept for the
/// greedy baselines.
#[derive(Debug, Clone)]
pub struct Ucrg {
    pub task: Task,
    pub members: Vec<String>,
    weights: Vec<f64>,
    pub ability: Vec<f64>,
    pub distance_benefit: Vec<f64>,
    pub distance_km: Vec<f64>,
    /// Symmetric trust benefits s_ij for every unordered pair.
    trust: Vec<f64>,
}

impl Ucrg {
    fn pair_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i != j);
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        // Row-major upper triangle.
        a * self.members.len() - a * (a + 1) / 2 + (b - a - 1)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[self.pair_index(i, j)]
    }

    pub fn trust_benefit(&self, i: usize, j: usize) -> f64 {
        self.trust[self.pair_index(i, j)]
    }

    pub fn pair_count(&self) -> usize {
        self.weights.len()
    }

    /// Debug CSV dump: `i,j,U_ij,a_i,p_i,a_j,p_j,s_ij`.
    pub fn dump_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "i,j,U_ij,a_i,p_i,a_j,p_j,s_ij")?;
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{}",
                    self.members[i],
                    self.members[j],
                    self.weight(i, j),
                    self.ability[i],
                    self.distance_benefit[i],
                    self.ability[j],
                    self.distance_benefit[j],
                    self.trust_benefit(i, j)
                )?;
            }
        }
        Ok(())
    }
}

/// Workers strictly inside the task's recruitment range, sorted by id.
pub fn candidate_team<'a>(task: &Task, workers: &'a [Worker]) -> Vec<&'a Worker> {
    let mut team: Vec<&Worker> = workers
        .iter()
        .filter(|w| haversine_km(w.loc, task.loc) < task.z)
        .collect();
    team.sort_by(|a, b| a.id.cmp(&b.id));
    team
}

/// Min-max normalization of (len, num) over a candidate pool. A constant
/// field normalizes to 0 for everyone.
pub fn normalize_ability(workers: &[&Worker]) -> HashMap<String, (f64, f64)> {
    let mut out = HashMap::new();
    if workers.is_empty() {
        return out;
    }
    let len_min = workers.iter().map(|w| w.len).fold(f64::INFINITY, f64::min);
    let len_max = workers.iter().map(|w| w.len).fold(f64::NEG_INFINITY, f64::max);
    let num_min = workers.iter().map(|w| w.num).min().unwrap() as f64;
    let num_max = workers.iter().map(|w| w.num).max().unwrap() as f64;
    let norm = |x: f64, lo: f64, hi: f64| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 };
    for w in workers {
        out.insert(
            w.id.clone(),
            (
                norm(w.len, len_min, len_max),
                norm(w.num as f64, num_min, num_max),
            ),
        );
    }
    out
}

/// Ability benefit: epsilon * (alpha * len_norm + beta * num_norm).
pub fn ability_benefit(len_norm: f64, num_norm: f64, task: &Task, epsilon: f64) -> f64 {
    epsilon * (task.alpha * len_norm + task.beta * num_norm)
}

/// Distance benefit exp(-d / kappa); callers must pre-filter d < z.
pub fn distance_benefit(d: f64, kappa: f64, z: f64) -> Result<f64> {
    if d >= z {
        return Err(CmcsError::InvalidArgument(format!(
            "distance {d} km is outside the recruitment range {z} km"
        )));
    }
    Ok((-d / kappa).exp())
}

/// Pairwise task-completion effect (a_i p_i + a_j p_j) * s_ij.
pub fn pair_effect(a_i: f64, p_i: f64, a_j: f64, p_j: f64, s_ij: f64) -> f64 {
    (a_i * p_i + a_j * p_j) * s_ij
}

/// Build the undirected complete recruitment graph for a candidate team.
/// `s` must yield the symmetric trust benefit for every candidate pair by id.
pub fn build_ucrg(
    task: &Task,
    candidates: &[&Worker],
    kappa: f64,
    epsilon: f64,
    s: &dyn Fn(&str, &str) -> f64,
) -> Result<Ucrg> {
    task.validate()?;
    if candidates.len() < task.team_size {
        return Err(CmcsError::Infeasible(format!(
            "task {}: {} candidates for a team of {}",
            task.id,
            candidates.len(),
            task.team_size
        )));
    }
    let norms = normalize_ability(candidates);
    let n = candidates.len();
    let mut ability = Vec::with_capacity(n);
    let mut pbenefit = Vec::with_capacity(n);
    let mut dist_km = Vec::with_capacity(n);
    for w in candidates {
        let (ln, nn) = norms[&w.id];
        let d = haversine_km(w.loc, task.loc);
        ability.push(ability_benefit(ln, nn, task, epsilon));
        pbenefit.push(distance_benefit(d, kappa, task.z)?);
        dist_km.push(d);
    }
    let mut weights = Vec::with_capacity(n * (n - 1) / 2);
    let mut trust = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let s_ij = s(&candidates[i].id, &candidates[j].id);
            trust.push(s_ij);
            weights.push(pair_effect(
                ability[i], pbenefit[i], ability[j], pbenefit[j], s_ij,
            ));
        }
    }
    Ok(Ucrg {
        task: task.clone(),
        members: candidates.iter().map(|w| w.id.clone()).collect(),
        weights,
        ability,
        distance_benefit: pbenefit,
        distance_km: dist_km,
        trust,
    })
}

/// QoD of a team: mean pairwise effect over ordered pairs,
/// sum U_ij / (|team| * (|team| - 1)) over unordered pairs doubled.
pub fn qod(team: &[usize], ucrg: &Ucrg) -> Result<f64> {
    if team.len() < 2 {
        return Err(CmcsError::InvalidArgument(
            "QoD needs a team of at least 2".into(),
        ));
    }
    let mut sum = 0.0;
    for (k, &i) in team.iter().enumerate() {
        for &j in &team[k + 1..] {
            sum += ucrg.weight(i, j);
        }
    }
    let n = team.len() as f64;
    Ok(2.0 * sum / (n * (n - 1.0)))
}

/// Privacy loss exp(-|team| / (S * P)) with S the summed distrust over
/// unordered pairs and P = 1 - prod of ordered-pair accuracies. A zero
/// denominator (perfect mutual trust or perfect accuracy) yields 0.
pub fn privacy_loss(
    team: &[usize],
    s: &dyn Fn(usize, usize) -> f64,
    auc: &dyn Fn(usize, usize) -> f64,
) -> f64 {
    assert!(team.len() >= 2, "privacy loss needs a team of at least 2");
    let mut s_sum = 0.0;
    let mut auc_prod = 1.0;
    for (k, &i) in team.iter().enumerate() {
        for &j in &team[k + 1..] {
            s_sum += 1.0 - s(i, j) / 6.0;
            auc_prod *= auc(i, j) * auc(j, i);
        }
    }
    let p = 1.0 - auc_prod;
    let denom = s_sum * p;
    if denom <= 0.0 {
        return 0.0;
    }
    (-(team.len() as f64) / denom).exp()
}
