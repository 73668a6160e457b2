//! Stochastic block model instances: random unweighted graphs and the
//! deterministic weighted (mean-field) variant.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::Partition;

/// Parameters of the planted-partition model: `k` near-equal blocks on `n`
/// nodes, intra-block edge probability `p = omega*a/n` and inter-block
/// probability `q = omega*b/n`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct BlockModelParams {
    pub n: usize,
    pub k: usize,
    pub a: f64,
    pub b: f64,
    pub omega: f64,
}

impl BlockModelParams {
    pub fn new(n: usize, k: usize, a: f64, b: f64, omega: f64) -> Result<Self> {
        let params = Self { n, k, a, b, omega };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidParams(format!("k must be >= 2, got {}", self.k)));
        }
        if self.n < self.k {
            return Err(Error::InvalidParams(format!(
                "n must be >= k, got n={} k={}",
                self.n, self.k
            )));
        }
        if !(self.a > self.b && self.b > 0.0) {
            return Err(Error::InvalidParams(format!(
                "need a > b > 0, got a={} b={}",
                self.a, self.b
            )));
        }
        // NaN fails this check too.
        if self.omega.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::InvalidParams(format!("omega must be > 0, got {}", self.omega)));
        }
        let (p, q) = (self.p(), self.q());
        if !(p <= 1.0 && q >= 0.0 && q < p) {
            return Err(Error::InvalidParams(format!(
                "derived probabilities out of range: p={p} q={q}"
            )));
        }
        Ok(())
    }

    /// Intra-block edge probability.
    pub fn p(&self) -> f64 {
        self.omega * self.a / self.n as f64
    }

    /// Inter-block edge probability.
    pub fn q(&self) -> f64 {
        self.omega * self.b / self.n as f64
    }

    /// The factor `(a-b)/(a+(k-1)b)` scaling every mean-field modularity value.
    pub fn prefactor(&self) -> f64 {
        (self.a - self.b) / (self.a + (self.k as f64 - 1.0) * self.b)
    }

    /// Sizes of the planted blocks: the first `n mod k` blocks take the
    /// ceiling, the rest the floor.
    pub fn block_sizes(&self) -> Vec<usize> {
        let base = self.n / self.k;
        let extra = self.n % self.k;
        (0..self.k).map(|i| base + usize::from(i < extra)).collect()
    }

    /// The canonical planted partition: block labels in contiguous runs.
    pub fn planted_partition(&self) -> Partition {
        let mut labels = Vec::with_capacity(self.n);
        for (block, size) in self.block_sizes().into_iter().enumerate() {
            labels.extend(std::iter::repeat_n(block, size));
        }
        Partition::new(labels, self.k).expect("canonical planted partition is valid")
    }
}

/// Simple undirected graph stored as adjacency lists with cached degrees.
#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<usize>>,
    degrees: Vec<usize>,
}

impl Graph {
    /// Build from an edge list. Edges are normalised to `u < v`; self-loops
    /// and duplicates are rejected.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut normalised: Vec<(usize, usize)> = Vec::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::InvalidParams(format!("self-loop at node {u}")));
            }
            if u >= n || v >= n {
                return Err(Error::InvalidParams(format!("edge ({u},{v}) out of range for n={n}")));
            }
            normalised.push((u.min(v), u.max(v)));
        }
        normalised.sort_unstable();
        if normalised.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParams("duplicate edge".into()));
        }
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in &normalised {
            adj[u].push(v);
            adj[v].push(u);
        }
        let degrees = adj.iter().map(Vec::len).collect();
        Ok(Self { n, edges: normalised, adj, degrees })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edge count.
    pub fn m(&self) -> usize {
        self.edges.len()
    }

    /// Degree volume of the whole graph, `2m`.
    pub fn volume(&self) -> usize {
        2 * self.edges.len()
    }

    pub fn degree(&self, u: usize) -> usize {
        self.degrees[u]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adj[u]
    }

    /// Edges normalised to `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }
}

/// Draw an SBM instance. Pairs are visited per block pair with geometric
/// skipping, so the cost is O(m + k^2) rather than O(n^2).
pub fn generate_sbm(params: &BlockModelParams, seed: u64) -> Result<(Graph, Partition)> {
    params.validate()?;
    let planted = params.planted_partition();
    let sizes = params.block_sizes();
    let mut starts = vec![0usize; params.k + 1];
    for i in 0..params.k {
        starts[i + 1] = starts[i] + sizes[i];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for bi in 0..params.k {
        for bj in bi..params.k {
            let prob = if bi == bj { params.p() } else { params.q() };
            let total = if bi == bj {
                sizes[bi] * (sizes[bi] - 1) / 2
            } else {
                sizes[bi] * sizes[bj]
            };
            for idx in sample_pair_indices(&mut rng, total, prob) {
                let (u, v) = if bi == bj {
                    let (r, c) = triangular_unrank(idx);
                    (starts[bi] + r, starts[bi] + c)
                } else {
                    (starts[bi] + idx / sizes[bj], starts[bj] + idx % sizes[bj])
                };
                edges.push((u, v));
            }
        }
    }
    let graph = Graph::from_edges(params.n, edges)?;
    if graph.m() == 0 {
        return Err(Error::DegenerateInstance);
    }
    Ok((graph, planted))
}

/// Indices in `0..total` selected independently with probability `prob`,
/// visited through geometric jumps.
fn sample_pair_indices(rng: &mut ChaCha8Rng, total: usize, prob: f64) -> Vec<usize> {
    if prob <= 0.0 || total == 0 {
        return Vec::new();
    }
    if prob >= 1.0 {
        return (0..total).collect();
    }
    let log1mp = (1.0 - prob).ln();
    let mut out = Vec::new();
    let mut cursor = 0usize;
    loop {
        let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let skip = (u.ln() / log1mp).floor() as usize;
        cursor = match cursor.checked_add(skip) {
            Some(c) => c,
            None => break,
        };
        if cursor >= total {
            break;
        }
        out.push(cursor);
        cursor += 1;
        if cursor >= total {
            break;
        }
    }
    out
}

/// Map a linear index onto the strict upper triangle: idx -> (row, col) with
/// row < col, enumerating (0,1),(0,2),(1,2),(0,3),...
fn triangular_unrank(idx: usize) -> (usize, usize) {
    // col is the largest c with c(c-1)/2 <= idx
    let mut col = ((2.0 * idx as f64 + 0.25).sqrt() + 0.5) as usize;
    while col * (col - 1) / 2 > idx {
        col -= 1;
    }
    while (col + 1) * col / 2 <= idx {
        col += 1;
    }
    let row = idx - col * (col - 1) / 2;
    (row, col)
}

/// Reference O(n^2) sampler, used to check the skipping sampler
/// distributionally.
pub fn generate_sbm_naive(params: &BlockModelParams, seed: u64) -> Result<(Graph, Partition)> {
    params.validate()?;
    let planted = params.planted_partition();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (p, q) = (params.p(), params.q());
    let mut edges = Vec::new();
    for u in 0..params.n {
        for v in (u + 1)..params.n {
            let prob = if planted.label(u) == planted.label(v) { p } else { q };
            if rng.gen::<f64>() < prob {
                edges.push((u, v));
            }
        }
    }
    let graph = Graph::from_edges(params.n, edges)?;
    if graph.m() == 0 {
        return Err(Error::DegenerateInstance);
    }
    Ok((graph, planted))
}

/// Deterministic weighted graph with w_uv = p inside a planted block and q
/// across blocks. Weights are implicit; accessors answer in O(1).
/// Requires n divisible by k so every node has the same weighted degree.
#[derive(Debug, Clone)]
pub struct WeightedBlockGraph {
    params: BlockModelParams,
    planted: Partition,
}

impl WeightedBlockGraph {
    pub fn new(params: BlockModelParams) -> Result<Self> {
        // Unlike graph generation, homogeneous weights (a = b) are allowed
        // here; every score is then exactly zero.
        if params.a == params.b && params.b > 0.0 {
            BlockModelParams { a: params.a + 1.0, ..params }.validate()?;
        } else {
            params.validate()?;
        }
        if !params.n.is_multiple_of(params.k) {
            return Err(Error::Precondition(format!(
                "mean-field graph requires k | n, got n={} k={}",
                params.n, params.k
            )));
        }
        let planted = params.planted_partition();
        Ok(Self { params, planted })
    }

    pub fn params(&self) -> &BlockModelParams {
        &self.params
    }

    pub fn planted(&self) -> &Partition {
        &self.planted
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn k(&self) -> usize {
        self.params.k
    }

    pub fn weight(&self, u: usize, v: usize) -> f64 {
        if u == v {
            0.0
        } else if self.planted.label(u) == self.planted.label(v) {
            self.params.p()
        } else {
            self.params.q()
        }
    }

    /// Weighted degree, identical for every node.
    pub fn weighted_degree(&self) -> f64 {
        let n = self.params.n as f64;
        let k = self.params.k as f64;
        (n - 1.0) * self.params.q() + (n / k - 1.0) * (self.params.p() - self.params.q())
    }

    pub fn total_volume(&self) -> f64 {
        self.params.n as f64 * self.weighted_degree()
    }

    pub fn total_edge_weight(&self) -> f64 {
        self.total_volume() / 2.0
    }

    /// Total edge weight inside a node set given how it intersects the
    /// planted blocks: `counts[j] = |A ∩ P_j|`.
    pub fn intra_weight_from_counts(&self, counts: &[usize]) -> f64 {
        let size: usize = counts.iter().sum();
        let (p, q) = (self.params.p(), self.params.q());
        let pairs = |s: usize| (s * s.saturating_sub(1)) as f64 / 2.0;
        q * pairs(size) + (p - q) * counts.iter().map(|&c| pairs(c)).sum::<f64>()
    }

    /// e_w(A) for an explicit node set.
    pub fn intra_weight(&self, nodes: &[usize]) -> f64 {
        let mut counts = vec![0usize; self.params.k];
        for &u in nodes {
            counts[self.planted.label(u)] += 1;
        }
        self.intra_weight_from_counts(&counts)
    }

    /// vol_w(A) for an explicit node set.
    pub fn set_volume(&self, nodes: &[usize]) -> f64 {
        nodes.len() as f64 * self.weighted_degree()
    }
}

/// Write the edge-list format: header `n m`, then one `u v` line per edge
/// with `u < v`, 0-indexed.
pub fn save_graph(graph: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "{} {}", graph.n(), graph.m()).unwrap();
    for &(u, v) in graph.edges() {
        writeln!(out, "{u} {v}").unwrap();
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<Graph> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, msg: "missing header".into() })?;
    let header = header?;
    let mut it = header.split_whitespace();
    let n: usize = parse_field(it.next(), 1, "node count")?;
    let m: usize = parse_field(it.next(), 1, "edge count")?;
    let mut edges = Vec::with_capacity(m);
    let mut seen = std::collections::HashSet::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let u: usize = parse_field(it.next(), lineno, "source node")?;
        let v: usize = parse_field(it.next(), lineno, "target node")?;
        if u >= n || v >= n {
            return Err(Error::Parse { line: lineno, msg: format!("node id out of range: {u} {v}") });
        }
        if u == v {
            return Err(Error::Parse { line: lineno, msg: format!("self-loop at node {u}") });
        }
        let key = (u.min(v), u.max(v));
        if !seen.insert(key) {
            return Err(Error::Parse { line: lineno, msg: format!("duplicate edge {u} {v}") });
        }
        edges.push(key);
    }
    if edges.len() != m {
        return Err(Error::Parse {
            line: edges.len() + 1,
            msg: format!("expected {m} edges, found {}", edges.len()),
        });
    }
    Graph::from_edges(n, edges)
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, line: usize, what: &str) -> Result<T> {
    field
        .ok_or_else(|| Error::Parse { line, msg: format!("missing {what}") })?
        .parse()
        .map_err(|_| Error::Parse { line, msg: format!("invalid {what}") })
}
