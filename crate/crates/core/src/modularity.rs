//! Exact modularity scores, coverage/degree-tax decomposition, O(1)-per-move
//! incremental deltas, small-part amalgamation and the edge-removal
//! robustness bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::g_of_signature;
use crate::partition::Partition;
use crate::sbm::{BlockModelParams, Graph, WeightedBlockGraph};
use crate::Signature;

/// Modularity split into its edge contribution (coverage) and degree tax.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModularityBreakdown {
    pub score: f64,
    pub coverage: f64,
    pub degree_tax: f64,
}

impl ModularityBreakdown {
    fn from_parts(coverage: f64, degree_tax: f64) -> Self {
        Self { score: coverage - degree_tax, coverage, degree_tax }
    }
}

/// Modularity of a partition: fraction of edges inside parts minus the sum
/// of squared volume fractions.
pub fn modularity(graph: &Graph, part: &Partition) -> Result<ModularityBreakdown> {
    if graph.m() == 0 {
        return Err(Error::Precondition("modularity is undefined for an empty edge set".into()));
    }
    if part.n() != graph.n() {
        return Err(Error::SizeMismatch(format!(
            "partition over {} nodes, graph has {}",
            part.n(),
            graph.n()
        )));
    }
    let k = part.k();
    let mut intra = 0u64;
    for &(u, v) in graph.edges() {
        if part.label(u) == part.label(v) {
            intra += 1;
        }
    }
    let mut volumes = vec![0u64; k];
    for u in 0..graph.n() {
        volumes[part.label(u)] += graph.degree(u) as u64;
    }
    let total = graph.volume() as f64;
    let coverage = intra as f64 / graph.m() as f64;
    let tax = volumes.iter().map(|&v| (v as f64 / total).powi(2)).sum();
    Ok(ModularityBreakdown::from_parts(coverage, tax))
}

/// Modularity on the mean-field weighted graph, computed in O(k^2) from the
/// overlap counts with the planted blocks rather than by summing n^2 weights.
pub fn weighted_modularity(
    wgraph: &WeightedBlockGraph,
    part: &Partition,
) -> Result<ModularityBreakdown> {
    if part.n() != wgraph.n() {
        return Err(Error::SizeMismatch(format!(
            "partition over {} nodes, weighted graph has {}",
            part.n(),
            wgraph.n()
        )));
    }
    let total_weight = wgraph.total_edge_weight();
    if total_weight <= 0.0 {
        return Err(Error::Precondition("weight function is identically zero".into()));
    }
    let counts = part.overlap_counts(wgraph.planted())?;
    // Every node has the same weighted degree, so part volumes are
    // proportional to part sizes.
    let mut coverage = 0.0;
    let mut tax = 0.0;
    let n = wgraph.n() as f64;
    for row in &counts {
        coverage += wgraph.intra_weight_from_counts(row) / total_weight;
        let size: usize = row.iter().sum();
        tax += (size as f64 / n).powi(2);
    }
    Ok(ModularityBreakdown::from_parts(coverage, tax))
}

/// Large-n limit of the weighted modularity as a function of the signature
/// alone: prefactor times g(X)/k^2.
pub fn mean_field_prediction(params: &BlockModelParams, sig: &Signature) -> f64 {
    let k = sig.k() as f64;
    params.prefactor() * g_of_signature(sig) / (k * k)
}

/// Cached per-node neighbor counts and part volumes supporting O(k) move
/// evaluation and O(deg + k) move application. All caches are integer-valued,
/// so incremental scores match recomputation exactly.
#[derive(Debug, Clone)]
pub struct MoveState<'g> {
    graph: &'g Graph,
    part: Partition,
    k: usize,
    /// neighbor_counts[u * k + c] = number of neighbors of u in part c.
    neighbor_counts: Vec<i64>,
    volumes: Vec<i64>,
    intra_edges: i64,
}

impl<'g> MoveState<'g> {
    pub fn new(graph: &'g Graph, part: Partition) -> Result<Self> {
        if graph.m() == 0 {
            return Err(Error::Precondition(
                "modularity is undefined for an empty edge set".into(),
            ));
        }
        if part.n() != graph.n() {
            return Err(Error::SizeMismatch(format!(
                "partition over {} nodes, graph has {}",
                part.n(),
                graph.n()
            )));
        }
        let k = part.k();
        let n = graph.n();
        let mut neighbor_counts = vec![0i64; n * k];
        let mut intra_edges = 0i64;
        for &(u, v) in graph.edges() {
            neighbor_counts[u * k + part.label(v)] += 1;
            neighbor_counts[v * k + part.label(u)] += 1;
            if part.label(u) == part.label(v) {
                intra_edges += 1;
            }
        }
        let mut volumes = vec![0i64; k];
        for u in 0..n {
            volumes[part.label(u)] += graph.degree(u) as i64;
        }
        Ok(Self { graph, part, k, neighbor_counts, volumes, intra_edges })
    }

    pub fn partition(&self) -> &Partition {
        &self.part
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn graph(&self) -> &Graph {
        self.graph
    }

    pub fn breakdown(&self) -> ModularityBreakdown {
        let total = self.graph.volume() as f64;
        let coverage = self.intra_edges as f64 / self.graph.m() as f64;
        let tax = self.volumes.iter().map(|&v| (v as f64 / total).powi(2)).sum();
        ModularityBreakdown::from_parts(coverage, tax)
    }

    pub fn score(&self) -> f64 {
        self.breakdown().score
    }

    /// Change in modularity if `node` were relabeled to `new_label`, without
    /// mutating. O(1) beyond the two cache lookups.
    pub fn move_delta(&self, node: usize, new_label: usize) -> f64 {
        debug_assert!(node < self.graph.n() && new_label < self.k);
        let old_label = self.part.label(node);
        if old_label == new_label {
            return 0.0;
        }
        let d_cov = (self.neighbor_counts[node * self.k + new_label]
            - self.neighbor_counts[node * self.k + old_label]) as f64
            / self.graph.m() as f64;
        let deg = self.graph.degree(node) as i64;
        let total = self.graph.volume() as f64;
        let vo = self.volumes[old_label];
        let vn = self.volumes[new_label];
        let d_tax = (((vo - deg) * (vo - deg) - vo * vo + (vn + deg) * (vn + deg) - vn * vn)
            as f64)
            / (total * total);
        d_cov - d_tax
    }

    /// Relabel `node` to `new_label` and refresh every cache.
    pub fn apply_move(&mut self, node: usize, new_label: usize) {
        let old_label = self.part.label(node);
        if old_label == new_label {
            return;
        }
        self.intra_edges += self.neighbor_counts[node * self.k + new_label]
            - self.neighbor_counts[node * self.k + old_label];
        let deg = self.graph.degree(node) as i64;
        self.volumes[old_label] -= deg;
        self.volumes[new_label] += deg;
        for &v in self.graph.neighbors(node) {
            self.neighbor_counts[v * self.k + old_label] -= 1;
            self.neighbor_counts[v * self.k + new_label] += 1;
        }
        self.part.set_label(node, new_label);
    }

    /// Number of neighbors of `node` currently in part `label`.
    pub fn neighbor_count(&self, node: usize, label: usize) -> i64 {
        self.neighbor_counts[node * self.k + label]
    }
}

/// Threshold η and the realized small-part volume fraction ζ of an
/// amalgamation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FatteningParams {
    pub eta: f64,
    pub zeta: f64,
}

/// Merge small parts until every nonempty part has volume at least
/// η·vol(V). The smallest η-small part is repeatedly merged into the
/// next-smallest nonempty part. The modularity change is bounded: the score
/// drops by less than 2η and rises by at most 2ζ, where ζ is the input's
/// total η-small volume fraction; both bounds are checked.
pub fn amalgamate_eta_fat(
    graph: &Graph,
    part: &Partition,
    eta: f64,
) -> Result<(Partition, FatteningParams)> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParams(format!("eta must be in (0,1], got {eta}")));
    }
    let k = part.k();
    let total = graph.volume() as f64;
    let mut volumes = vec![0i64; k];
    let mut sizes = vec![0usize; k];
    for u in 0..graph.n() {
        volumes[part.label(u)] += graph.degree(u) as i64;
        sizes[part.label(u)] += 1;
    }
    let zeta = volumes
        .iter()
        .zip(&sizes)
        .filter(|&(&v, &s)| s > 0 && (v as f64) < eta * total)
        .map(|(&v, _)| v as f64 / total)
        .sum::<f64>();

    // merged_into[c] = current representative part of original part c.
    let mut target = vec![usize::MAX; k];
    loop {
        let mut nonempty: Vec<usize> = (0..k).filter(|&c| sizes[c] > 0).collect();
        nonempty.sort_by_key(|&c| volumes[c]);
        if nonempty.len() <= 1 {
            break;
        }
        let small = nonempty[0];
        if volumes[small] as f64 >= eta * total {
            break;
        }
        let into = nonempty[1];
        volumes[into] += volumes[small];
        sizes[into] += sizes[small];
        volumes[small] = 0;
        sizes[small] = 0;
        target[small] = into;
    }
    let resolve = |mut c: usize| {
        while target[c] != usize::MAX {
            c = target[c];
        }
        c
    };
    let labels = part.labels().iter().map(|&l| resolve(l)).collect();
    let merged = Partition::new(labels, k)?;

    let before = modularity(graph, part)?.score;
    let after = modularity(graph, &merged)?.score;
    let tol = 1e-12;
    if before - after >= 2.0 * eta {
        return Err(Error::Invariant(format!(
            "amalgamation dropped modularity by {} >= 2*eta = {}",
            before - after,
            2.0 * eta
        )));
    }
    if after - before > 2.0 * zeta + tol {
        return Err(Error::Invariant(format!(
            "amalgamation raised modularity by {} > 2*zeta = {}",
            after - before,
            2.0 * zeta
        )));
    }
    Ok((merged, FatteningParams { eta, zeta }))
}

/// Modularity change from deleting a set of edges, against the bound
/// 2|E0|/|E|. `removed` must be a nonempty proper subset of the edge set.
pub fn robustness_gap(
    graph: &Graph,
    part: &Partition,
    removed: &[(usize, usize)],
) -> Result<(f64, f64)> {
    if removed.is_empty() {
        return Err(Error::Precondition("removal set is empty".into()));
    }
    let normalize = |&(u, v): &(usize, usize)| if u < v { (u, v) } else { (v, u) };
    let removed_set: std::collections::HashSet<(usize, usize)> =
        removed.iter().map(normalize).collect();
    let edge_set: std::collections::HashSet<(usize, usize)> =
        graph.edges().iter().copied().collect();
    if !removed_set.is_subset(&edge_set) {
        return Err(Error::Precondition("removal set contains a non-edge".into()));
    }
    if removed_set.len() == graph.m() {
        return Err(Error::Precondition("removal set must be a proper subset of edges".into()));
    }
    let kept: Vec<(usize, usize)> =
        graph.edges().iter().copied().filter(|e| !removed_set.contains(e)).collect();
    let pruned = Graph::from_edges(graph.n(), kept)?;
    let before = modularity(graph, part)?.score;
    let after = modularity(&pruned, part)?.score;
    let delta = (before - after).abs();
    let bound = 2.0 * removed_set.len() as f64 / graph.m() as f64;
    if delta >= bound {
        return Err(Error::Invariant(format!(
            "edge-removal gap {delta} exceeds bound {bound}"
        )));
    }
    Ok((delta, bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{
        balanced_random_partition, decoy, interpolated_partition, random_partition, signature,
    };
    use crate::sbm::generate_sbm;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_triangles() -> Graph {
        Graph::from_edges(6, [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)]).unwrap()
    }

    #[test]
    fn whole_graph_part_scores_zero() {
        let g = two_triangles();
        let part = Partition::new(vec![0; 6], 1).unwrap();
        let b = modularity(&g, &part).unwrap();
        assert_eq!(b.coverage, 1.0);
        assert_eq!(b.degree_tax, 1.0);
        assert_eq!(b.score, 0.0);
    }

    #[test]
    fn two_triangles_split_scores_half() {
        let g = two_triangles();
        let part = Partition::new(vec![0, 0, 0, 1, 1, 1], 2).unwrap();
        let b = modularity(&g, &part).unwrap();
        assert_eq!(b.coverage, 1.0);
        assert!((b.degree_tax - 0.5).abs() < 1e-15);
        assert!((b.score - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_parts_do_not_contribute() {
        let g = two_triangles();
        let part = Partition::new(vec![0; 6], 2).unwrap();
        assert_eq!(modularity(&g, &part).unwrap().score, 0.0);
    }

    #[test]
    fn rejects_empty_graph() {
        let g = Graph::from_edges(3, []).unwrap();
        let part = Partition::new(vec![0, 0, 0], 1).unwrap();
        assert!(modularity(&g, &part).is_err());
    }

    #[test]
    fn weighted_matches_mean_field_at_n300() {
        let params = BlockModelParams::new(300, 3, 3.0, 1.0, 1.0).unwrap();
        let wg = WeightedBlockGraph::new(params).unwrap();
        let planted = params.planted_partition();
        let cases = [
            planted.clone(),
            decoy(&planted, 0, 1).unwrap(),
            interpolated_partition(&planted, 0, 1, 0.5, None).unwrap(),
            balanced_random_partition(300, 3, 7).unwrap(),
        ];
        for part in &cases {
            let w = weighted_modularity(&wg, part).unwrap().score;
            let mf = mean_field_prediction(&params, &signature(part, &planted).unwrap());
            assert!((w - mf).abs() <= 0.02, "weighted {w} vs mean field {mf}");
        }
        let w = weighted_modularity(&wg, &planted).unwrap().score;
        assert!((w - 4.0 / 15.0).abs() < 0.02);
        let d = weighted_modularity(&wg, &decoy(&planted, 0, 1).unwrap()).unwrap().score;
        assert!((d - 0.4 * 4.0 / 9.0).abs() < 0.02);
    }

    #[test]
    fn weighted_zero_when_p_equals_q() {
        // Homogeneous weights: the prefactor (p - q) vanishes, so the score
        // is zero up to the O(1/n) finite-size correction (pair counts
        // |A|(|A|-1)/2 versus squared volume fractions).
        for &n in &[60usize, 600] {
            let params = BlockModelParams { n, k: 3, a: 2.0, b: 2.0, omega: 1.0 };
            let wg = WeightedBlockGraph::new(params).unwrap();
            assert_eq!(params.prefactor(), 0.0);
            for seed in 0..5 {
                let part = random_partition(n, 3, seed).unwrap();
                let s = weighted_modularity(&wg, &part).unwrap().score;
                assert!(s.abs() < 2.0 / n as f64, "score {s} for seed {seed}, n {n}");
            }
        }
    }

    #[test]
    fn weighted_agrees_with_direct_n2_sum() {
        let params = BlockModelParams::new(30, 3, 3.0, 1.0, 5.0).unwrap();
        let wg = WeightedBlockGraph::new(params).unwrap();
        let part = random_partition(30, 3, 3).unwrap();
        // Direct O(n^2) evaluation.
        let mut within = [0.0; 3];
        let mut total = 0.0;
        for u in 0..30 {
            for v in (u + 1)..30 {
                let w = wg.weight(u, v);
                total += w;
                if part.label(u) == part.label(v) {
                    within[part.label(u)] += w;
                }
            }
        }
        let sizes = part.part_sizes();
        let coverage: f64 = within.iter().map(|w| w / total).sum();
        let tax: f64 = sizes.iter().map(|&s| (s as f64 / 30.0).powi(2)).sum();
        let b = weighted_modularity(&wg, &part).unwrap();
        assert!((b.coverage - coverage).abs() < 1e-12);
        assert!((b.degree_tax - tax).abs() < 1e-12);
    }

    #[test]
    fn mean_field_examples() {
        let params = BlockModelParams::new(300, 3, 3.0, 1.0, 1.0).unwrap();
        let v = mean_field_prediction(&params, &Signature::identity(3));
        assert!((v - 4.0 / 15.0).abs() < 1e-15);
        assert_eq!(mean_field_prediction(&params, &Signature::uniform(3)), 0.0);
        for k in 2..=6 {
            let params = BlockModelParams::new(10 * k, k, 4.0, 1.5, 1.0).unwrap();
            let v = mean_field_prediction(&params, &Signature::identity(k));
            let expect = params.prefactor() * (1.0 - 1.0 / k as f64);
            assert!((v - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn move_state_noop_and_reversibility() {
        let params = BlockModelParams::new(120, 3, 4.0, 1.0, 3.0).unwrap();
        let (g, planted) = generate_sbm(&params, 2).unwrap();
        let mut state = MoveState::new(&g, planted.clone()).unwrap();
        assert_eq!(state.move_delta(5, planted.label(5)), 0.0);
        let before = state.score();
        let old = planted.label(7);
        state.apply_move(7, (old + 1) % 3);
        state.apply_move(7, old);
        assert!((state.score() - before).abs() <= 1e-12);
    }

    #[test]
    fn incremental_matches_recompute_over_many_moves() {
        let params = BlockModelParams::new(200, 4, 5.0, 1.0, 4.0).unwrap();
        let (g, planted) = generate_sbm(&params, 11).unwrap();
        let mut state = MoveState::new(&g, planted).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for step in 0..10_000 {
            let node = rng.gen_range(0..200);
            let label = rng.gen_range(0..4);
            let predicted = state.score() + state.move_delta(node, label);
            state.apply_move(node, label);
            assert!((state.score() - predicted).abs() <= 1e-9);
            if step % 500 == 0 {
                let full = modularity(&g, state.partition()).unwrap();
                assert!((state.score() - full.score).abs() <= 1e-9);
                let b = state.breakdown();
                assert!((b.coverage - full.coverage).abs() <= 1e-12);
                assert!((b.degree_tax - full.degree_tax).abs() <= 1e-12);
            }
        }
        let full = modularity(&g, state.partition()).unwrap().score;
        assert!((state.score() - full).abs() <= 1e-9);
    }

    #[test]
    fn amalgamation_fixed_point_and_singleton() {
        let params = BlockModelParams::new(90, 3, 5.0, 1.0, 5.0).unwrap();
        let (g, planted) = generate_sbm(&params, 4).unwrap();
        let (out, fp) = amalgamate_eta_fat(&g, &planted, 0.1).unwrap();
        assert_eq!(&out, &planted);
        assert_eq!(fp.zeta, 0.0);

        // Carve a single node into its own part.
        let mut labels = planted.labels().to_vec();
        labels[0] = 3;
        let part = Partition::new(labels, 4).unwrap();
        let (out, _) = amalgamate_eta_fat(&g, &part, 0.1).unwrap();
        let total = g.volume() as f64;
        let mut volumes = [0.0; 4];
        for u in 0..90 {
            volumes[out.label(u)] += g.degree(u) as f64;
        }
        for (c, &v) in volumes.iter().enumerate() {
            let size = out.part_sizes()[c];
            assert!(size == 0 || v >= 0.1 * total, "part {c} volume {v}");
        }
    }

    #[test]
    fn amalgamation_bounds_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..100 {
            let k = 3 + trial % 3;
            let params = BlockModelParams::new(40 * k, k, 5.0, 1.0, 2.0).unwrap();
            let (g, _) = generate_sbm(&params, trial as u64).unwrap();
            let part = random_partition(g.n(), k + 2, trial as u64).unwrap();
            let eta = rng.gen_range(0.02..0.3);
            // Err here would mean a bound violation; unwrap is the assertion.
            amalgamate_eta_fat(&g, &part, eta).unwrap();
        }
    }

    #[test]
    fn robustness_examples() {
        let params = BlockModelParams::new(100, 2, 6.0, 1.0, 8.0).unwrap();
        let (g, planted) = generate_sbm(&params, 8).unwrap();
        let (delta, bound) = robustness_gap(&g, &planted, &g.edges()[..1]).unwrap();
        assert!((bound - 2.0 / g.m() as f64).abs() < 1e-15);
        assert!(delta < bound);
        // All but one edge: allowed, bound near 2.
        let (_, bound) = robustness_gap(&g, &planted, &g.edges()[1..]).unwrap();
        assert!(bound > 1.9);
        assert!(robustness_gap(&g, &planted, &[]).is_err());
        assert!(robustness_gap(&g, &planted, g.edges()).is_err());
    }
}
