//! The landscape objective g over signature polytopes, the theoretical
//! curve h(d), closed-form and brute-force maximisation, and empirical
//! best-modularity sweeps over distance bands.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::max_assignment;
use crate::error::{Error, Result};
use crate::modularity::MoveState;
use crate::partition::{interpolated_partition, OverlapTracker, Partition, Signature};
use crate::sbm::Graph;

/// g(X) = sum over rows of all squared differences between pairs of entries.
pub fn g_of_signature(sig: &Signature) -> f64 {
    let k = sig.k();
    let mut g = 0.0;
    for i in 0..k {
        for j in 0..k {
            for jp in (j + 1)..k {
                let d = sig.get(i, j) - sig.get(i, jp);
                g += d * d;
            }
        }
    }
    #[cfg(debug_assertions)]
    {
        if sig.is_balanced(1e-9) {
            let frob = g_frobenius_form(sig);
            debug_assert!((g - frob).abs() <= 1e-10, "g forms disagree: {g} vs {frob}");
        }
    }
    g
}

/// Equivalent form k·||X||² − k, valid when every row sums to one.
pub fn g_frobenius_form(sig: &Signature) -> f64 {
    let k = sig.k() as f64;
    let sq: f64 = sig.entries().iter().map(|&x| x * x).sum();
    k * sq - k
}

/// Theoretical maximal-modularity curve h(d) = 1 − 1/k − 2d(1 − d(k−1)) on
/// [0, 1/k].
pub fn h_curve(d: f64, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::InvalidParams(format!("k must be >= 2, got {k}")));
    }
    let kf = k as f64;
    if !(0.0..=1.0 / kf + 1e-12).contains(&d) {
        return Err(Error::InvalidParams(format!("d must lie in [0, 1/k], got {d}")));
    }
    Ok(1.0 - 1.0 / kf - 2.0 * d * (1.0 - d * (kf - 1.0)))
}

/// The optimiser X^(ij)_k(t): identity except that a t-fraction of column j
/// is moved onto row i.
pub fn optimizer_signature(k: usize, i: usize, j: usize, t: f64) -> Signature {
    let mut sig = Signature::identity(k);
    sig.set(j, j, 1.0 - t);
    sig.set(i, j, t);
    sig
}

/// Maximum of g over the signature polytope at off-diagonal mass t ∈ [0, 1],
/// together with the full optimiser set {X^(ij)_k(t) : i ≠ j}.
pub fn max_g_closed_form(k: usize, t: f64) -> Result<(f64, Vec<Signature>)> {
    if k < 2 {
        return Err(Error::InvalidParams(format!("k must be >= 2, got {k}")));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParams(format!(
            "closed form only valid for t in [0,1], got {t}"
        )));
    }
    let kf = k as f64;
    let value = kf * (kf - 1.0) - 2.0 * t * (kf - t * (kf - 1.0));
    let mut optimizers = Vec::with_capacity(k * (k - 1));
    for i in 0..k {
        for j in 0..k {
            if i != j {
                optimizers.push(optimizer_signature(k, i, j, t));
            }
        }
    }
    Ok((value, optimizers))
}

/// Strict upper bound k(k−1) − 2 on g over the polytope for every t > 1.
pub fn far_bound(k: usize) -> f64 {
    let kf = k as f64;
    kf * (kf - 1.0) - 2.0
}

/// Constraint set for signatures at fixed off-diagonal mass t: entries ≥ 0,
/// column sums 1, Σ_{i≠j} x_ij = t, diagonal optimally aligned; `balanced`
/// additionally requires unit row sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignaturePolytopeSpec {
    pub k: usize,
    pub t: f64,
    pub balanced: bool,
}

impl SignaturePolytopeSpec {
    pub fn new(k: usize, t: f64, balanced: bool) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParams(format!("k must be >= 2, got {k}")));
        }
        if !(0.0..=(k as f64 - 1.0) + 1e-12).contains(&t) {
            return Err(Error::InvalidParams(format!("t must lie in [0, k-1], got {t}")));
        }
        Ok(Self { k, t, balanced })
    }
}

/// Exhaustive maximisation of g over grid signatures with entries in
/// {0, 1/N, ..., 1}. The off-diagonal mass is rounded to the nearest grid
/// slice s/N with s = round(t·N), so a spec whose t·N is integral is
/// enumerated exactly. Intended as a small-k oracle (k ≤ 4, N ≤ 12).
pub fn grid_max_g(spec: &SignaturePolytopeSpec, resolution: usize) -> Result<(f64, Signature)> {
    if spec.k > 4 || resolution > 12 {
        return Err(Error::StateSpace(format!(
            "grid oracle limited to k <= 4, N <= 12; got k={} N={}",
            spec.k, resolution
        )));
    }
    let s = (spec.t * resolution as f64).round() as usize;
    grid_max_g_slices(spec.k, s, resolution, spec.balanced)
}

/// Grid maximisation at exact integer off-diagonal mass s (in units of 1/N).
pub fn grid_max_g_slices(
    k: usize,
    s: usize,
    n_grid: usize,
    balanced: bool,
) -> Result<(f64, Signature)> {
    if k < 2 || n_grid == 0 {
        return Err(Error::InvalidParams("need k >= 2 and positive resolution".into()));
    }
    if s > (k - 1) * n_grid {
        return Err(Error::EmptyFeasibleGrid);
    }
    let mut search = GridSearch {
        k,
        n_grid,
        s,
        balanced,
        matrix: vec![vec![0usize; k]; k],
        row_sums: vec![0usize; k],
        best: None,
    };
    search.descend(0, 0, 0);
    match search.best {
        Some((value, matrix)) => {
            let x = matrix
                .iter()
                .flat_map(|row| row.iter().map(|&c| c as f64 / n_grid as f64))
                .collect();
            Ok((value, Signature::from_matrix(k, x)?))
        }
        None => Err(Error::EmptyFeasibleGrid),
    }
}

struct GridSearch {
    k: usize,
    n_grid: usize,
    s: usize,
    balanced: bool,
    matrix: Vec<Vec<usize>>, // matrix[i][j], column j filled as a unit
    row_sums: Vec<usize>,
    best: Option<(f64, Vec<Vec<usize>>)>,
}

impl GridSearch {
    /// Fill column `col` onwards; `used` is the off-diagonal mass so far.
    /// Both constraints and g are invariant under simultaneous row/column
    /// permutations, so only diagonals in non-increasing order are explored
    /// (`min_off` carries the previous column's off-diagonal mass).
    fn descend(&mut self, col: usize, used: usize, min_off: usize) {
        if col == self.k {
            if used == self.s {
                self.finish_candidate();
            }
            return;
        }
        let cols_left = self.k - col;
        // Each remaining column can push between 0 and N units off-diagonal.
        if used > self.s || used + cols_left * self.n_grid < self.s {
            return;
        }
        // Choose the column's off-diagonal mass, then distribute it.
        let max_off = self.n_grid.min(self.s - used);
        for off in min_off..=max_off {
            self.matrix[col][col] = self.n_grid - off;
            self.row_sums[col] += self.n_grid - off;
            if !self.balanced || self.row_sums[col] <= self.n_grid {
                self.fill_column(col, 0, off, used + off, off);
            }
            self.row_sums[col] -= self.n_grid - off;
            self.matrix[col][col] = 0;
        }
    }

    /// Distribute `left` units among the off-diagonal rows of `col`,
    /// starting from row index `row` (skipping the diagonal).
    fn fill_column(&mut self, col: usize, row: usize, left: usize, used: usize, own_off: usize) {
        if row == self.k {
            if left == 0 {
                self.descend(col + 1, used, own_off);
            }
            return;
        }
        if row == col {
            self.fill_column(col, row + 1, left, used, own_off);
            return;
        }
        let off_rows_left = (row..self.k).filter(|&r| r != col).count();
        if off_rows_left == 1 {
            // Last off-diagonal row takes the remainder.
            if !self.balanced || self.row_sums[row] + left <= self.n_grid {
                self.matrix[row][col] = left;
                self.row_sums[row] += left;
                self.fill_column(col, self.k, 0, used, own_off);
                self.row_sums[row] -= left;
                self.matrix[row][col] = 0;
            }
            return;
        }
        let cap = if self.balanced { left.min(self.n_grid - self.row_sums[row]) } else { left };
        for v in 0..=cap {
            self.matrix[row][col] = v;
            self.row_sums[row] += v;
            self.fill_column(col, row + 1, left - v, used, own_off);
            self.row_sums[row] -= v;
            self.matrix[row][col] = 0;
        }
    }

    fn finish_candidate(&mut self) {
        if self.balanced && self.row_sums.iter().any(|&r| r != self.n_grid) {
            return;
        }
        // Alignment: the diagonal must already be the best row permutation.
        let weight: Vec<Vec<i64>> =
            self.matrix.iter().map(|r| r.iter().map(|&c| c as i64).collect()).collect();
        let diag: i64 = (0..self.k).map(|i| weight[i][i]).sum();
        if diag < max_assignment(&weight).0 {
            return;
        }
        let inv = 1.0 / self.n_grid as f64;
        let mut g = 0.0;
        for i in 0..self.k {
            for j in 0..self.k {
                for jp in (j + 1)..self.k {
                    let d = (self.matrix[i][j] as f64 - self.matrix[i][jp] as f64) * inv;
                    g += d * d;
                }
            }
        }
        if self.best.as_ref().is_none_or(|&(b, _)| g > b) {
            self.best = Some((g, self.matrix.clone()));
        }
    }
}

/// One distance sample of the landscape: the theoretical optimum and,
/// optionally, the best modularity found empirically near that distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapePoint {
    pub d: f64,
    pub t: f64,
    pub g_max_theory: f64,
    pub h_value: f64,
    pub modularity_theory: f64,
    pub h_empirical: Option<f64>,
}

/// Build the theory-only landscape point at distance d for the given model
/// prefactor.
pub fn theory_point(d: f64, k: usize, prefactor: f64) -> Result<LandscapePoint> {
    let t = d * k as f64;
    let h = h_curve(d, k)?;
    let (g_max, _) = max_g_closed_form(k, t.min(1.0))?;
    Ok(LandscapePoint {
        d,
        t,
        g_max_theory: g_max,
        h_value: h,
        modularity_theory: prefactor * h,
        h_empirical: None,
    })
}

/// Best modularity found near each distance in `d_values`: the maximum over
/// the k(k−1) constructed optimiser partitions at t = d·k plus a
/// band-constrained best-improvement search started from each. A move is
/// admissible only if the post-move distance stays within `band` of d. The
/// result is a lower bound on the true curve.
pub fn empirical_h_sweep(
    graph: &Graph,
    planted: &Partition,
    prefactor: f64,
    d_values: &[f64],
    band: f64,
    search_budget: usize,
) -> Result<Vec<LandscapePoint>> {
    let k = planted.k();
    for &d in d_values {
        if !(0.0..=1.0 / k as f64 + 1e-12).contains(&d) {
            return Err(Error::InvalidParams(format!("d={d} outside [0, 1/k]")));
        }
    }
    d_values
        .par_iter()
        .map(|&d| {
            let mut point = theory_point(d, k, prefactor)?;
            let t = (d * k as f64).min(1.0);
            let mut best = f64::NEG_INFINITY;
            for i in 0..k {
                for j in 0..k {
                    if i == j {
                        continue;
                    }
                    let start = interpolated_partition(planted, i, j, t, None)?;
                    let found =
                        banded_search(graph, planted, start, d, band, search_budget)?;
                    best = best.max(found);
                }
            }
            point.h_empirical = Some(best);
            Ok(point)
        })
        .collect()
}

/// Best-improvement single-node search keeping the distance to the planted
/// partition inside [d − band, d + band]. Returns the best modularity seen.
fn banded_search(
    graph: &Graph,
    planted: &Partition,
    start: Partition,
    d: f64,
    band: f64,
    budget: usize,
) -> Result<f64> {
    let k = planted.k();
    let lo = d - band;
    let hi = d + band;
    let mut tracker = OverlapTracker::new(&start, planted)?;
    let mut state = MoveState::new(graph, start)?;
    let mut best =
        if (lo..=hi).contains(&tracker.distance()) { state.score() } else { f64::NEG_INFINITY };
    for step in 0..budget {
        let mut best_move: Option<(usize, usize, f64)> = None;
        for node in 0..graph.n() {
            let old = state.partition().label(node);
            for label in 0..k {
                if label == old {
                    continue;
                }
                let delta = state.move_delta(node, label);
                if best_move.map_or(delta <= 1e-12, |(_, _, bd)| delta <= bd) {
                    continue;
                }
                let dist = tracker.distance_after_move(node, old, label);
                if (lo..=hi).contains(&dist) {
                    best_move = Some((node, label, delta));
                }
            }
        }
        let Some((node, label, _)) = best_move else { break };
        let old = state.partition().label(node);
        state.apply_move(node, label);
        tracker.apply_move(node, old, label);
        if step % 1024 == 1023 {
            let resolved = tracker.resolve_distance();
            if (tracker.distance() - resolved).abs() > 1e-12 {
                return Err(Error::Invariant("incremental distance drifted".into()));
            }
        }
        best = best.max(state.score());
    }
    Ok(best)
}
