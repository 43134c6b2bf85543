//! Recruitment baselines scored on the shared QoD objective: differential
//! evolution, particle swarm, variable neighborhood search, simulated
//! annealing, three greedy rankings, and uniform random selection.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::benefits::{qod, Ucrg};
use crate::error::{CmcsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Tsr,
    De,
    Pso,
    Vns,
    Sa,
    Gmpl,
    Gmdb,
    Gmab,
    Random,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Tsr => "tsr",
            Algorithm::De => "de",
            Algorithm::Pso => "pso",
            Algorithm::Vns => "vns",
            Algorithm::Sa => "sa",
            Algorithm::Gmpl => "gmpl",
            Algorithm::Gmdb => "gmdb",
            Algorithm::Gmab => "gmab",
            Algorithm::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Result<Algorithm> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tsr" => Ok(Algorithm::Tsr),
            "de" => Ok(Algorithm::De),
            "pso" => Ok(Algorithm::Pso),
            "vns" => Ok(Algorithm::Vns),
            "sa" => Ok(Algorithm::Sa),
            "gmpl" => Ok(Algorithm::Gmpl),
            "gmdb" => Ok(Algorithm::Gmdb),
            "gmab" => Ok(Algorithm::Gmab),
            "random" => Ok(Algorithm::Random),
            other => Err(CmcsError::InvalidArgument(format!(
                "unknown algorithm '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub population: usize,
    pub iterations: usize,
    pub de_f: f64,
    pub de_cr: f64,
    pub pso_inertia: f64,
    pub pso_c1: f64,
    pub pso_c2: f64,
    pub sa_cooling: f64,
    pub vns_max_m: usize,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            population: 30,
            iterations: 200,
            de_f: 0.5,
            de_cr: 0.9,
            pso_inertia: 0.7,
            pso_c1: 1.5,
            pso_c2: 1.5,
            sa_cooling: 0.95,
            vns_max_m: 3,
            seed: 0,
        }
    }
}

impl BaselineConfig {
    fn validate(&self) -> Result<()> {
        if self.population == 0 || self.iterations == 0 || self.vns_max_m == 0 {
            return Err(CmcsError::InvalidArgument(
                "population, iterations, and vns_max_m must be >= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.de_cr) || !(0.0..1.0).contains(&self.sa_cooling) {
            return Err(CmcsError::InvalidArgument(
                "de_cr must be in [0,1] and sa_cooling in [0,1)".into(),
            ));
        }
        Ok(())
    }
}

fn check_feasible(ucrg: &Ucrg) -> Result<usize> {
    let k = ucrg.task.team_size;
    if ucrg.len() < k {
        return Err(CmcsError::Infeasible(format!(
            "task {}: {} candidates for a team of {}",
            ucrg.task.id,
            ucrg.len(),
            k
        )));
    }
    Ok(k)
}

fn canonical(team: &mut Vec<usize>) {
    team.sort_unstable();
}

/// Repair a partial team (after de-duplication) to exactly k members by
/// repeatedly adding the unused candidate with the highest marginal pair-
/// weight sum against the current members; the empty-team seed is the
/// lowest index.
fn repair(team: &mut Vec<usize>, k: usize, ucrg: &Ucrg) {
    let mut seen: HashSet<usize> = HashSet::new();
    team.retain(|&m| seen.insert(m));
    team.truncate(k);
    while team.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for c in 0..ucrg.len() {
            if seen.contains(&c) {
                continue;
            }
            let marginal: f64 = team.iter().map(|&m| ucrg.weight(c, m)).sum();
            match best {
                Some((_, b)) if marginal <= b => {}
                _ => best = Some((c, marginal)),
            }
        }
        let (c, _) = best.expect("repair ran out of candidates");
        seen.insert(c);
        team.push(c);
    }
}

fn random_team(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut team = idx[..k].to_vec();
    canonical(&mut team);
    team
}

/// Differential evolution on index vectors with duplicate repair.
pub fn de_recruit(ucrg: &Ucrg, cfg: &BaselineConfig) -> Result<(Vec<usize>, f64)> {
    cfg.validate()?;
    let k = check_feasible(ucrg)?;
    let n = ucrg.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pop: Vec<Vec<usize>> = (0..cfg.population)
        .map(|_| random_team(n, k, &mut rng))
        .collect();
    let mut fitness: Vec<f64> = pop.iter().map(|t| qod(t, ucrg)).collect::<Result<_>>()?;

    for _ in 0..cfg.iterations {
        for i in 0..pop.len() {
            let pick = |rng: &mut ChaCha8Rng| loop {
                let r = rng.gen_range(0..pop.len());
                if r != i {
                    return r;
                }
            };
            let (r1, r2, r3) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
            let forced = rng.gen_range(0..k);
            let mut trial = Vec::with_capacity(k);
            for d in 0..k {
                if d == forced || rng.gen::<f64>() < cfg.de_cr {
                    let v = pop[r1][d] as f64
                        + cfg.de_f * (pop[r2][d] as f64 - pop[r3][d] as f64);
                    trial.push(v.round().clamp(0.0, (n - 1) as f64) as usize);
                } else {
                    trial.push(pop[i][d]);
                }
            }
            repair(&mut trial, k, ucrg);
            canonical(&mut trial);
            let f = qod(&trial, ucrg)?;
            if f > fitness[i] {
                pop[i] = trial;
                fitness[i] = f;
            }
        }
    }
    let best = (0..pop.len())
        .max_by(|&a, &b| fitness[a].partial_cmp(&fitness[b]).unwrap())
        .unwrap();
    Ok((pop[best].clone(), fitness[best]))
}

/// Particle swarm over per-candidate membership scores with top-k decoding.
pub fn pso_recruit(ucrg: &Ucrg, cfg: &BaselineConfig) -> Result<(Vec<usize>, f64)> {
    cfg.validate()?;
    let k = check_feasible(ucrg)?;
    let n = ucrg.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let decode = |scores: &[f64]| -> Vec<usize> {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
        let mut team = order[..k].to_vec();
        canonical(&mut team);
        team
    };

    let mut pos: Vec<Vec<f64>> = (0..cfg.population)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let mut vel: Vec<Vec<f64>> = (0..cfg.population)
        .map(|_| (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect())
        .collect();
    let mut pbest = pos.clone();
    let mut pbest_q: Vec<f64> = pos
        .iter()
        .map(|p| qod(&decode(p), ucrg))
        .collect::<Result<_>>()?;
    let mut gbest = pbest_q
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let mut gbest_pos = pbest[gbest].clone();
    let mut gbest_q = pbest_q[gbest];

    for _ in 0..cfg.iterations {
        for i in 0..pos.len() {
            for d in 0..n {
                let r1: f64 = rng.gen();
                let r2: f64 = rng.gen();
                vel[i][d] = cfg.pso_inertia * vel[i][d]
                    + cfg.pso_c1 * r1 * (pbest[i][d] - pos[i][d])
                    + cfg.pso_c2 * r2 * (gbest_pos[d] - pos[i][d]);
                pos[i][d] += vel[i][d];
            }
            let q = qod(&decode(&pos[i]), ucrg)?;
            if q > pbest_q[i] {
                pbest[i] = pos[i].clone();
                pbest_q[i] = q;
                if q > gbest_q {
                    gbest = i;
                    gbest_pos = pos[i].clone();
                    gbest_q = q;
                }
            }
        }
    }
    let _ = gbest;
    Ok((decode(&gbest_pos), gbest_q))
}

/// Best-improvement swap-1 descent from `team` restricted to nothing (full
/// candidate pool).
fn local_descent(team: &mut Vec<usize>, ucrg: &Ucrg) -> Result<f64> {
    let n = ucrg.len();
    let mut current = qod(team, ucrg)?;
    loop {
        let inside: HashSet<usize> = team.iter().copied().collect();
        let mut best_move: Option<(usize, usize, f64)> = None;
        for pos in 0..team.len() {
            for cand in 0..n {
                if inside.contains(&cand) {
                    continue;
                }
                let old = team[pos];
                team[pos] = cand;
                let q = qod(team, ucrg)?;
                team[pos] = old;
                match best_move {
                    Some((_, _, bq)) if q <= bq => {}
                    _ => best_move = Some((pos, cand, q)),
                }
            }
        }
        match best_move {
            Some((pos, cand, q)) if q > current + 1e-15 => {
                team[pos] = cand;
                current = q;
            }
            _ => return Ok(current),
        }
    }
}

/// Variable neighborhood search: shake with a random swap-m (m = 1..max_m),
/// then swap-1 best-improvement descent; m resets on improvement.
pub fn vns_recruit(ucrg: &Ucrg, cfg: &BaselineConfig) -> Result<(Vec<usize>, f64)> {
    cfg.validate()?;
    let k = check_feasible(ucrg)?;
    let n = ucrg.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut best = random_team(n, k, &mut rng);
    let mut best_q = local_descent(&mut best, ucrg)?;
    canonical(&mut best);

    let max_m = cfg.vns_max_m.min(k).min(n - k).max(1);
    let mut m = 1;
    for _ in 0..cfg.iterations {
        // Shake: swap m random members for m random outsiders.
        let mut team = best.clone();
        let outside: Vec<usize> = (0..n).filter(|c| !team.contains(c)).collect();
        if outside.is_empty() {
            break;
        }
        let mut out_pool = outside.clone();
        out_pool.shuffle(&mut rng);
        let mut positions: Vec<usize> = (0..k).collect();
        positions.shuffle(&mut rng);
        for (swap, &pos) in positions.iter().take(m.min(out_pool.len())).enumerate() {
            team[pos] = out_pool[swap];
        }
        let q = local_descent(&mut team, ucrg)?;
        if q > best_q + 1e-15 {
            canonical(&mut team);
            best = team;
            best_q = q;
            m = 1;
        } else {
            m = if m >= max_m { 1 } else { m + 1 };
        }
    }
    Ok((best, best_q))
}

/// Simulated annealing with single-swap proposals and geometric cooling.
/// The initial temperature is the starting team's QoD (floored away from 0).
pub fn sa_recruit(ucrg: &Ucrg, cfg: &BaselineConfig) -> Result<(Vec<usize>, f64)> {
    cfg.validate()?;
    let k = check_feasible(ucrg)?;
    let n = ucrg.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut team = random_team(n, k, &mut rng);
    let mut current = qod(&team, ucrg)?;
    let mut best = team.clone();
    let mut best_q = current;
    let mut temp = current.abs().max(1e-6);

    if n == k {
        return Ok((team, current));
    }
    for _ in 0..cfg.iterations {
        let pos = rng.gen_range(0..k);
        let outside: Vec<usize> = (0..n).filter(|c| !team.contains(c)).collect();
        let cand = outside[rng.gen_range(0..outside.len())];
        let old = team[pos];
        team[pos] = cand;
        let q = qod(&team, ucrg)?;
        let accept = q > current || rng.gen::<f64>() < ((q - current) / temp).exp();
        if accept {
            current = q;
            if q > best_q {
                best_q = q;
                best = team.clone();
            }
        } else {
            team[pos] = old;
        }
        temp *= cfg.sa_cooling;
    }
    canonical(&mut best);
    Ok((best, best_q))
}

fn greedy_top_k(ucrg: &Ucrg, score: impl Fn(usize) -> f64) -> Result<(Vec<usize>, f64)> {
    let k = check_feasible(ucrg)?;
    let mut order: Vec<usize> = (0..ucrg.len()).collect();
    order.sort_by(|&a, &b| {
        score(b)
            .partial_cmp(&score(a))
            .unwrap()
            .then(ucrg.members[a].cmp(&ucrg.members[b]))
    });
    let mut team = order[..k].to_vec();
    canonical(&mut team);
    let q = qod(&team, ucrg)?;
    Ok((team, q))
}

/// Greedy maximum privacy level: rank by mean symmetric trust value toward
/// every other candidate, take the top team_size.
pub fn gmpl_recruit(
    ucrg: &Ucrg,
    trust_value: &dyn Fn(usize, usize) -> f64,
) -> Result<(Vec<usize>, f64)> {
    let n = ucrg.len();
    if n < 2 {
        return Err(CmcsError::Infeasible("need at least 2 candidates".into()));
    }
    greedy_top_k(ucrg, |i| {
        (0..n)
            .filter(|&j| j != i)
            .map(|j| (trust_value(i, j) + trust_value(j, i)) / 2.0)
            .sum::<f64>()
            / (n - 1) as f64
    })
}

/// Greedy maximum distance benefit: top team_size by p_i.
pub fn gmdb_recruit(ucrg: &Ucrg) -> Result<(Vec<usize>, f64)> {
    let p = ucrg.distance_benefit.clone();
    greedy_top_k(ucrg, move |i| p[i])
}

/// Greedy maximum ability benefit: top team_size by a_i.
pub fn gmab_recruit(ucrg: &Ucrg) -> Result<(Vec<usize>, f64)> {
    let a = ucrg.ability.clone();
    greedy_top_k(ucrg, move |i| a[i])
}

/// Uniform random team, reproducible by seed.
pub fn random_recruit(ucrg: &Ucrg, seed: u64) -> Result<(Vec<usize>, f64)> {
    let k = check_feasible(ucrg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let team = random_team(ucrg.len(), k, &mut rng);
    let q = qod(&team, ucrg)?;
    Ok((team, q))
}
