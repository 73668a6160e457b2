//! Partitions of the node set, signature matrices against the planted
//! partition, and the distance (classification error) between them.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::max_assignment;
use crate::error::{Error, Result};

/// Node-to-part assignment into at most `k` parts; parts may be empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidParams(format!("label {bad} out of range for k={k}")));
        }
        Ok(Self { labels, k })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn label(&self, node: usize) -> usize {
        self.labels[node]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn set_label(&mut self, node: usize, label: usize) {
        debug_assert!(label < self.k);
        self.labels[node] = label;
    }

    pub fn part_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Overlap counts against another partition over the same nodes:
    /// `counts[i][j] = |A_i ∩ B_j|` where A = self, B = other.
    pub fn overlap_counts(&self, other: &Partition) -> Result<Vec<Vec<usize>>> {
        if self.n() != other.n() {
            return Err(Error::SizeMismatch(format!(
                "partitions over {} and {} nodes",
                self.n(),
                other.n()
            )));
        }
        let k = self.k.max(other.k);
        let mut counts = vec![vec![0usize; k]; k];
        for (u, &l) in self.labels.iter().enumerate() {
            counts[l][other.label(u)] += 1;
        }
        Ok(counts)
    }
}

/// k x k matrix of overlap fractions `x_ij = |A_i ∩ P_j| / |P_j|`.
/// Columns sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signature {
    k: usize,
    x: Vec<f64>,
}

impl Signature {
    pub fn from_matrix(k: usize, x: Vec<f64>) -> Result<Self> {
        if x.len() != k * k {
            return Err(Error::InvalidParams(format!("signature needs {} entries", k * k)));
        }
        if x.iter().any(|&v| v < -1e-12) {
            return Err(Error::InvalidParams("negative signature entry".into()));
        }
        Ok(Self { k, x })
    }

    /// Signature of the planted partition itself: the identity matrix.
    pub fn identity(k: usize) -> Self {
        let mut x = vec![0.0; k * k];
        for i in 0..k {
            x[i * k + i] = 1.0;
        }
        Self { k, x }
    }

    /// All entries 1/k: the farthest-possible signature.
    pub fn uniform(k: usize) -> Self {
        Self { k, x: vec![1.0 / k as f64; k * k] }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.x[i * self.k + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.x[i * self.k + j] = v;
    }

    pub fn entries(&self) -> &[f64] {
        &self.x
    }

    pub fn column_sum(&self, j: usize) -> f64 {
        (0..self.k).map(|i| self.get(i, j)).sum()
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        (0..self.k).map(|j| self.get(i, j)).sum()
    }

    /// Total off-diagonal mass, the `t` coordinate of the polytope slice.
    pub fn off_diagonal_mass(&self) -> f64 {
        let mut t = 0.0;
        for i in 0..self.k {
            for j in 0..self.k {
                if i != j {
                    t += self.get(i, j);
                }
            }
        }
        t
    }

    /// True when every row also sums to one (doubly stochastic).
    pub fn is_balanced(&self, tol: f64) -> bool {
        (0..self.k).all(|i| (self.row_sum(i) - 1.0).abs() <= tol)
    }
}

/// Signature of `part` with respect to `planted`. Column j is divided by the
/// true block size |P_j|, which generalises the n/k denominator to
/// non-divisible n.
pub fn signature(part: &Partition, planted: &Partition) -> Result<Signature> {
    let counts = part.overlap_counts(planted)?;
    let k = counts.len();
    let block_sizes: Vec<usize> = (0..k).map(|j| (0..k).map(|i| counts[i][j]).sum()).collect();
    let mut x = vec![0.0; k * k];
    for (i, row) in counts.iter().enumerate() {
        for j in 0..k {
            if block_sizes[j] > 0 {
                x[i * k + j] = row[j] as f64 / block_sizes[j] as f64;
            }
        }
    }
    Signature::from_matrix(k, x)
}

/// Distance of a partition from the planted one, together with the best
/// label alignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    /// Fraction of nodes to relabel, in [0, 1 - 1/k].
    pub distance: f64,
    /// `best_permutation[j]` is the part of the candidate aligned with
    /// planted block j; lexicographically smallest among the maximisers.
    pub best_permutation: Vec<usize>,
    /// Number of nodes kept in place under the best alignment.
    pub aligned_overlap: usize,
}

/// Classification-error distance: `1 - (1/n) max_sigma sum_i |A_sigma(i) ∩ P_i|`,
/// solved exactly as a k x k linear assignment.
pub fn distance(part: &Partition, planted: &Partition) -> Result<DistanceReport> {
    let counts = part.overlap_counts(planted)?;
    let weight: Vec<Vec<i64>> =
        counts.iter().map(|row| row.iter().map(|&c| c as i64).collect()).collect();
    let (overlap, sigma) = max_assignment(&weight);
    let n = part.n();
    Ok(DistanceReport {
        distance: 1.0 - overlap as f64 / n as f64,
        best_permutation: sigma,
        aligned_overlap: overlap as usize,
    })
}

/// Merge planted blocks i and j into one part, leaving part j empty.
pub fn decoy(planted: &Partition, i: usize, j: usize) -> Result<Partition> {
    let k = planted.k();
    if i == j {
        return Err(Error::InvalidParams("decoy needs two distinct blocks".into()));
    }
    if i >= k || j >= k {
        return Err(Error::InvalidParams(format!("block index out of range for k={k}")));
    }
    let labels = planted.labels().iter().map(|&l| if l == j { i } else { l }).collect();
    Partition::new(labels, k)
}

/// Realise the optimiser X^(ij)_k(t): move a t-fraction of planted block j
/// into part i. Nodes are taken lowest-index-first unless a seed asks for a
/// random selection.
pub fn interpolated_partition(
    planted: &Partition,
    i: usize,
    j: usize,
    t: f64,
    seed: Option<u64>,
) -> Result<Partition> {
    let k = planted.k();
    if i == j || i >= k || j >= k {
        return Err(Error::InvalidParams("interpolation needs two distinct block indices".into()));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParams(format!("t must be in [0,1], got {t}")));
    }
    let mut members: Vec<usize> =
        (0..planted.n()).filter(|&u| planted.label(u) == j).collect();
    let moved = (t * members.len() as f64).round() as usize;
    if let Some(seed) = seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        members.shuffle(&mut rng);
    }
    let mut labels = planted.labels().to_vec();
    for &u in members.iter().take(moved) {
        labels[u] = i;
    }
    Partition::new(labels, k)
}

/// Uniformly random partition with part sizes as equal as possible.
pub fn balanced_random_partition(n: usize, k: usize, seed: u64) -> Result<Partition> {
    if n < k {
        return Err(Error::InvalidParams(format!("n must be >= k, got n={n} k={k}")));
    }
    let mut labels: Vec<usize> = Vec::with_capacity(n);
    for part in 0..k {
        let size = n / k + usize::from(part < n % k);
        labels.extend(std::iter::repeat_n(part, size));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    labels.shuffle(&mut rng);
    Partition::new(labels, k)
}

/// Uniformly random labels (no size constraint); each node picks a part.
pub fn random_partition(n: usize, k: usize, seed: u64) -> Result<Partition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = (0..n).map(|_| rng.gen_range(0..k)).collect();
    Partition::new(labels, k)
}

/// Partition whose signature is the all-1/k matrix; requires k^2 | n.
/// Attains the sharp distance bound 1 - 1/k.
pub fn uniform_signature_partition(n: usize, k: usize) -> Result<Partition> {
    if !n.is_multiple_of(k * k) {
        return Err(Error::Precondition(format!("requires k^2 | n, got n={n} k={k}")));
    }
    let block = n / k;
    let chunk = n / (k * k);
    let mut labels = vec![0usize; n];
    for j in 0..k {
        for (offset, label) in labels[j * block..(j + 1) * block].iter_mut().enumerate() {
            *label = offset / chunk;
        }
    }
    Partition::new(labels, k)
}

/// One integer label per line, n lines.
pub fn save_partition(part: &Partition, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for &l in part.labels() {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

pub fn load_partition(path: impl AsRef<Path>, k: usize) -> Result<Partition> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut labels = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let label: usize = line.trim().parse().map_err(|_| Error::Parse {
            line: idx + 1,
            msg: format!("invalid label '{line}'"),
        })?;
        if label >= k {
            return Err(Error::Parse {
                line: idx + 1,
                msg: format!("label {label} out of range for k={k}"),
            });
        }
        labels.push(label);
    }
    Partition::new(labels, k)
}

/// Incrementally maintained overlap counts and exact distance of an evolving
/// partition against the planted one. For k <= 6 every permutation total is
/// kept up to date in O(k!) per move; larger k re-solves the assignment.
#[derive(Debug, Clone)]
pub struct OverlapTracker {
    n: usize,
    planted_labels: Vec<usize>,
    counts: Vec<Vec<i64>>,
    /// sigma for each permutation, plus its running overlap total.
    perms: Option<Vec<(Vec<usize>, i64)>>,
}

const PERM_TRACK_LIMIT: usize = 6;

impl OverlapTracker {
    pub fn new(part: &Partition, planted: &Partition) -> Result<Self> {
        let counts_usize = part.overlap_counts(planted)?;
        let k = counts_usize.len();
        let counts: Vec<Vec<i64>> =
            counts_usize.iter().map(|r| r.iter().map(|&c| c as i64).collect()).collect();
        let perms = (k <= PERM_TRACK_LIMIT).then(|| {
            all_permutations(k)
                .into_iter()
                .map(|sigma| {
                    let total = (0..k).map(|col| counts[sigma[col]][col]).sum();
                    (sigma, total)
                })
                .collect()
        });
        Ok(Self { n: part.n(), planted_labels: planted.labels().to_vec(), counts, perms })
    }

    /// Record that `node` moved from part `old_label` to part `new_label`.
    pub fn apply_move(&mut self, node: usize, old_label: usize, new_label: usize) {
        if old_label == new_label {
            return;
        }
        let block = self.planted_labels[node];
        self.counts[old_label][block] -= 1;
        self.counts[new_label][block] += 1;
        if let Some(perms) = &mut self.perms {
            for (sigma, total) in perms.iter_mut() {
                let row = sigma[block];
                if row == old_label {
                    *total -= 1;
                } else if row == new_label {
                    *total += 1;
                }
            }
        }
    }

    /// Distance the tracker would report after moving `node` from
    /// `old_label` to `new_label`, without mutating.
    pub fn distance_after_move(&self, node: usize, old_label: usize, new_label: usize) -> f64 {
        if old_label == new_label {
            return self.distance();
        }
        let block = self.planted_labels[node];
        let overlap = match &self.perms {
            Some(perms) => perms
                .iter()
                .map(|(sigma, total)| {
                    let row = sigma[block];
                    total + i64::from(row == new_label) - i64::from(row == old_label)
                })
                .max()
                .unwrap(),
            None => {
                let mut counts = self.counts.clone();
                counts[old_label][block] -= 1;
                counts[new_label][block] += 1;
                max_assignment(&counts).0
            }
        };
        1.0 - overlap as f64 / self.n as f64
    }

    pub fn aligned_overlap(&self) -> i64 {
        match &self.perms {
            Some(perms) => perms.iter().map(|&(_, total)| total).max().unwrap(),
            None => max_assignment(&self.counts).0,
        }
    }

    pub fn distance(&self) -> f64 {
        1.0 - self.aligned_overlap() as f64 / self.n as f64
    }

    /// Distance recomputed through a fresh assignment solve; equals
    /// `distance()` and serves as the safety-net cross-check.
    pub fn resolve_distance(&self) -> f64 {
        1.0 - max_assignment(&self.counts).0 as f64 / self.n as f64
    }
}

fn all_permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut perm: Vec<usize> = (0..k).collect();
    heap_permute(&mut perm, k, &mut out);
    out
}

fn heap_permute(perm: &mut Vec<usize>, size: usize, out: &mut Vec<Vec<usize>>) {
    if size == 1 {
        out.push(perm.clone());
        return;
    }
    for i in 0..size {
        heap_permute(perm, size - 1, out);
        if size.is_multiple_of(2) {
            perm.swap(i, size - 1);
        } else {
            perm.swap(0, size - 1);
        }
    }
}
