//! Directed social-trust graph storage plus check-in dataset loading.
//!
//! Node ids are opaque strings interned to dense `usize` indices so the
//! convolution layers can address node state as matrix rows.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CmcsError, Result};
use crate::geo::haversine_km;

/// Four-level ordinal trustworthiness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TrustLevel {
    Observer,
    Apprentice,
    Journeyer,
    Master,
}

pub const ALL_LEVELS: [TrustLevel; 4] = [
    TrustLevel::Observer,
    TrustLevel::Apprentice,
    TrustLevel::Journeyer,
    TrustLevel::Master,
];

impl TrustLevel {
    /// Dense index in level order, Observer = 0 .. Master = 3.
    pub fn index(self) -> usize {
        match self {
            TrustLevel::Observer => 0,
            TrustLevel::Apprentice => 1,
            TrustLevel::Journeyer => 2,
            TrustLevel::Master => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<TrustLevel> {
        ALL_LEVELS.get(i).copied()
    }

    /// Real-value trust mapping {0.5, 1, 2, 3}.
    pub fn trust_value(self) -> f64 {
        match self {
            TrustLevel::Observer => 0.5,
            TrustLevel::Apprentice => 1.0,
            TrustLevel::Journeyer => 2.0,
            TrustLevel::Master => 3.0,
        }
    }

    /// One-hot encoding: a single 1 at the level's index.
    pub fn one_hot(self) -> [f64; 4] {
        let mut v = [0.0; 4];
        v[self.index()] = 1.0;
        v
    }

    pub fn parse(tok: &str) -> Option<TrustLevel> {
        match tok.to_ascii_lowercase().as_str() {
            "observer" => Some(TrustLevel::Observer),
            "apprentice" => Some(TrustLevel::Apprentice),
            "journeyer" => Some(TrustLevel::Journeyer),
            "master" => Some(TrustLevel::Master),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TrustLevel::Observer => "observer",
            TrustLevel::Apprentice => "apprentice",
            TrustLevel::Journeyer => "journeyer",
            TrustLevel::Master => "master",
        }
    }
}

impl fmt::Display for TrustLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Labeled directed edge over interned node indices.
pub type Edge = (usize, usize, TrustLevel);

/// Immutable directed trust graph with in/out adjacency indexes.
#[derive(Debug, Clone)]
pub struct TrustGraph {
    ids: Vec<String>,
    index_of: HashMap<String, usize>,
    edges: HashMap<(usize, usize), TrustLevel>,
    in_index: Vec<Vec<(usize, TrustLevel)>>,
    out_index: Vec<Vec<(usize, TrustLevel)>>,
}

/// Counters reported by the edge-list loader.
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadStats {
    pub self_loops_dropped: usize,
    pub duplicates_overwritten: usize,
}

impl TrustGraph {
    pub fn new() -> TrustGraph {
        TrustGraph {
            ids: Vec::new(),
            index_of: HashMap::new(),
            edges: HashMap::new(),
            in_index: Vec::new(),
            out_index: Vec::new(),
        }
    }

    pub fn intern(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index_of.get(id) {
            return i;
        }
        let i = self.ids.len();
        self.ids.push(id.to_string());
        self.index_of.insert(id.to_string(), i);
        self.in_index.push(Vec::new());
        self.out_index.push(Vec::new());
        i
    }

    /// Insert or overwrite the edge `src -> dst`. Self-loops are rejected.
    pub fn add_edge(&mut self, src: usize, dst: usize, level: TrustLevel) -> bool {
        if src == dst {
            return false;
        }
        if let Some(old) = self.edges.insert((src, dst), level) {
            // Rebuild the two index entries for the overwritten edge.
            self.out_index[src].retain(|&(v, l)| !(v == dst && l == old));
            self.in_index[dst].retain(|&(v, l)| !(v == src && l == old));
        }
        self.out_index[src].push((dst, level));
        self.in_index[dst].push((src, level));
        true
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn id(&self, node: usize) -> &str {
        &self.ids[node]
    }

    pub fn node(&self, id: &str) -> Option<usize> {
        self.index_of.get(id).copied()
    }

    pub fn level(&self, src: usize, dst: usize) -> Option<TrustLevel> {
        self.edges.get(&(src, dst)).copied()
    }

    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        self.edges.contains_key(&(src, dst))
    }

    /// Trustors of `u` with their edge levels (edges v -> u).
    pub fn in_neighbors(&self, u: usize) -> &[(usize, TrustLevel)] {
        &self.in_index[u]
    }

    /// Trustees of `u` with their edge levels (edges u -> v).
    pub fn out_neighbors(&self, u: usize) -> &[(usize, TrustLevel)] {
        &self.out_index[u]
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().map(|(&(s, d), &l)| (s, d, l))
    }

    /// Edges in a deterministic order (sorted by interned indices).
    pub fn edges_sorted(&self) -> Vec<Edge> {
        let mut v: Vec<Edge> = self.edges().collect();
        v.sort_by_key(|&(s, d, _)| (s, d));
        v
    }

    pub fn density(&self) -> f64 {
        let n = self.node_count() as f64;
        if n < 2.0 {
            return 0.0;
        }
        self.edge_count() as f64 / (n * (n - 1.0))
    }

    pub fn average_degree(&self) -> f64 {
        if self.node_count() == 0 {
            return 0.0;
        }
        2.0 * self.edge_count() as f64 / self.node_count() as f64
    }

    /// Subgraph over the same node set containing only the given edges.
    pub fn edge_subgraph(&self, edges: &[Edge]) -> TrustGraph {
        let mut g = TrustGraph::new();
        g.ids = self.ids.clone();
        g.index_of = self.index_of.clone();
        g.in_index = vec![Vec::new(); self.ids.len()];
        g.out_index = vec![Vec::new(); self.ids.len()];
        for &(s, d, l) in edges {
            g.add_edge(s, d, l);
        }
        g
    }

    /// Serialize back to the edge-list wire format.
    pub fn save_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        for (s, d, l) in self.edges_sorted() {
            writeln!(w, "{}\t{}\t{}", self.ids[s], self.ids[d], l)?;
        }
        Ok(())
    }
}

impl Default for TrustGraph {
    fn default() -> Self {
        TrustGraph::new()
    }
}

/// Load a trust graph from `src<TAB>dst<TAB>level` lines.
pub fn load_trust_graph(path: &Path) -> Result<(TrustGraph, LoadStats)> {
    let file = std::fs::File::open(path)?;
    parse_trust_graph(BufReader::new(file))
}

pub fn parse_trust_graph<R: BufRead>(reader: R) -> Result<(TrustGraph, LoadStats)> {
    let mut g = TrustGraph::new();
    let mut stats = LoadStats::default();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut parts = trimmed.split('\t');
        let (src, dst, level) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => {
                return Err(CmcsError::Parse {
                    line: lineno + 1,
                    msg: format!("expected `src\\tdst\\tlevel`, got {trimmed:?}"),
                })
            }
        };
        let level = TrustLevel::parse(level).ok_or_else(|| CmcsError::Parse {
            line: lineno + 1,
            msg: format!("unknown trust level {level:?}"),
        })?;
        let s = g.intern(src);
        let d = g.intern(dst);
        if s == d {
            stats.self_loops_dropped += 1;
            continue;
        }
        if g.has_edge(s, d) {
            stats.duplicates_overwritten += 1;
        }
        g.add_edge(s, d, level);
    }
    Ok((g, stats))
}

/// Labeled train/test partition of a graph's edges.
#[derive(Debug, Clone)]
pub struct EdgeSplit {
    pub train: Vec<Edge>,
    pub test: Vec<Edge>,
    pub seed: u64,
}

/// Randomly split the graph's edges, `train_fraction` into the train set.
pub fn split_edges(g: &TrustGraph, train_fraction: f64, seed: u64) -> Result<EdgeSplit> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CmcsError::InvalidArgument(format!(
            "train_fraction must be in (0,1), got {train_fraction}"
        )));
    }
    let mut edges = g.edges_sorted();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    edges.shuffle(&mut rng);
    let n_train = (edges.len() as f64 * train_fraction).round() as usize;
    let test = edges.split_off(n_train.min(edges.len()));
    Ok(EdgeSplit {
        train: edges,
        test,
        seed,
    })
}

/// One row of a check-in dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckIn {
    pub user: String,
    pub time: DateTime<Utc>,
    pub lat: f64,
    pub lon: f64,
}

/// Counters reported by the check-in loader.
#[derive(Debug, Clone, Copy, Default)]
pub struct CheckInStats {
    pub rows_dropped: usize,
}

/// Load `user_id,timestamp,lat,lon` check-in rows. Rows with out-of-range
/// coordinates are dropped and counted.
pub fn load_checkins(path: &Path) -> Result<(Vec<CheckIn>, CheckInStats)> {
    let file = std::fs::File::open(path)?;
    parse_checkins(BufReader::new(file))
}

pub fn parse_checkins<R: std::io::Read>(reader: R) -> Result<(Vec<CheckIn>, CheckInStats)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut out = Vec::new();
    let mut stats = CheckInStats::default();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| CmcsError::Parse {
            line: i + 2,
            msg: e.to_string(),
        })?;
        if record.len() < 4 {
            return Err(CmcsError::Parse {
                line: i + 2,
                msg: format!("expected 4 columns, got {}", record.len()),
            });
        }
        let time = record[1]
            .parse::<DateTime<Utc>>()
            .map_err(|e| CmcsError::Parse {
                line: i + 2,
                msg: format!("bad timestamp {:?}: {e}", &record[1]),
            })?;
        let lat: f64 = record[2].parse().map_err(|_| CmcsError::Parse {
            line: i + 2,
            msg: format!("bad latitude {:?}", &record[2]),
        })?;
        let lon: f64 = record[3].parse().map_err(|_| CmcsError::Parse {
            line: i + 2,
            msg: format!("bad longitude {:?}", &record[3]),
        })?;
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            stats.rows_dropped += 1;
            continue;
        }
        out.push(CheckIn {
            user: record[0].to_string(),
            time,
            lat,
            lon,
        });
    }
    Ok((out, stats))
}

/// Per-user history derived from check-ins: total mileage between consecutive
/// check-ins and total check-in count.
pub fn worker_history(checkins: &[CheckIn]) -> HashMap<String, (f64, u64)> {
    let mut sorted: Vec<&CheckIn> = checkins.iter().collect();
    sorted.sort_by(|a, b| a.user.cmp(&b.user).then(a.time.cmp(&b.time)));
    let mut out: HashMap<String, (f64, u64)> = HashMap::new();
    let mut prev: Option<&CheckIn> = None;
    for c in sorted {
        let entry = out.entry(c.user.clone()).or_insert((0.0, 0));
        entry.1 += 1;
        if let Some(p) = prev {
            if p.user == c.user {
                entry.0 += haversine_km((p.lat, p.lon), (c.lat, c.lon));
            }
        }
        prev = Some(c);
    }
    out
}
