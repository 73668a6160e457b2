//! Circulations on the label set, their decomposition into weighted simple
//! directed cycles, and cycle-guided transfer moves that push off-diagonal
//! signature mass onto the diagonal while increasing g.

use serde::{Deserialize, Serialize};

use crate::assignment::max_assignment;
use crate::error::{Error, Result};
use crate::landscape::g_of_signature;
use crate::partition::Signature;

/// Non-negative k x k matrix with zero diagonal and equal in/out flow at
/// every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circulation {
    k: usize,
    b: Vec<f64>,
}

const CONSERVATION_TOL: f64 = 1e-12;

impl Circulation {
    pub fn new(k: usize, b: Vec<f64>) -> Result<Self> {
        if b.len() != k * k {
            return Err(Error::InvalidParams(format!("circulation needs {} entries", k * k)));
        }
        for i in 0..k {
            if b[i * k + i] != 0.0 {
                return Err(Error::InvalidParams(format!("nonzero diagonal at {i}")));
            }
        }
        if b.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidParams("negative circulation entry".into()));
        }
        let c = Self { k, b };
        for i in 0..k {
            let out: f64 = (0..k).map(|j| c.get(i, j)).sum();
            let inn: f64 = (0..k).map(|j| c.get(j, i)).sum();
            if (out - inn).abs() > CONSERVATION_TOL * out.max(inn).max(1.0) {
                return Err(Error::InvalidParams(format!(
                    "flow not conserved at node {i}: out {out} vs in {inn}"
                )));
            }
        }
        Ok(c)
    }

    /// Off-diagonal part of a doubly stochastic signature, which conserves
    /// flow automatically (row and column off-diagonal sums both equal
    /// 1 − x_ii).
    pub fn from_signature(sig: &Signature) -> Result<Self> {
        if !sig.is_balanced(1e-9) {
            return Err(Error::Precondition("signature is not doubly stochastic".into()));
        }
        let k = sig.k();
        let mut b = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    b[i * k + j] = sig.get(i, j);
                }
            }
        }
        Self::new(k, b)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.b[i * self.k + j]
    }

    pub fn support_size(&self) -> usize {
        self.b.iter().filter(|&&v| v > 0.0).count()
    }

    pub fn total_mass(&self) -> f64 {
        self.b.iter().sum()
    }
}

/// Weighted simple directed cycles reconstructing a circulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleDecomposition {
    /// Each cycle is the node sequence v_0, ..., v_{L-1} with edges
    /// (v_l, v_{l+1 mod L}); nodes are distinct.
    pub cycles: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
}

impl CycleDecomposition {
    /// Sum of w_l over cycles through edge (i, j).
    pub fn edge_mass(&self, i: usize, j: usize) -> f64 {
        self.cycles
            .iter()
            .zip(&self.weights)
            .filter(|(cycle, _)| {
                cycle.iter().enumerate().any(|(idx, &u)| {
                    u == i && cycle[(idx + 1) % cycle.len()] == j
                })
            })
            .map(|(_, &w)| w)
            .sum()
    }
}

/// Decompose a circulation into at most support-size weighted simple cycles
/// by repeatedly walking along positive entries until a node repeats and
/// subtracting the minimum edge weight on the extracted cycle.
pub fn cycle_decompose(circ: &Circulation) -> Result<CycleDecomposition> {
    let k = circ.k();
    let mut b = circ.b.clone();
    let scale = b.iter().cloned().fold(1.0f64, f64::max);
    let tol = 1e-13 * scale;
    let mut cycles = Vec::new();
    let mut weights = Vec::new();
    while let Some(start) = (0..k).find(|&i| (0..k).any(|j| b[i * k + j] > tol)) {
        // Walk forward along positive out-edges until a node repeats.
        let mut path = vec![start];
        let mut on_path = vec![false; k];
        on_path[start] = true;
        let cycle = loop {
            let u = *path.last().unwrap();
            let v = (0..k)
                .filter(|&j| b[u * k + j] > tol)
                .max_by(|&x, &y| b[u * k + x].total_cmp(&b[u * k + y]))
                .ok_or_else(|| {
                    Error::Invariant(format!("walk stuck at node {u}: conservation broken"))
                })?;
            if on_path[v] {
                let pos = path.iter().position(|&x| x == v).unwrap();
                break path[pos..].to_vec();
            }
            on_path[v] = true;
            path.push(v);
        };
        let w = cycle
            .iter()
            .enumerate()
            .map(|(idx, &u)| b[u * k + cycle[(idx + 1) % cycle.len()]])
            .fold(f64::INFINITY, f64::min);
        for (idx, &u) in cycle.iter().enumerate() {
            let v = cycle[(idx + 1) % cycle.len()];
            b[u * k + v] = (b[u * k + v] - w).max(0.0);
        }
        cycles.push(cycle);
        weights.push(w);
        if cycles.len() > circ.support_size() {
            return Err(Error::Invariant(
                "cycle extraction exceeded the support-size bound".into(),
            ));
        }
    }
    let decomp = CycleDecomposition { cycles, weights };
    // Reconstruction check.
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let rebuilt = decomp.edge_mass(i, j);
            if (rebuilt - circ.get(i, j)).abs() > 1e-10 {
                return Err(Error::Invariant(format!(
                    "decomposition misses entry ({i},{j}): {rebuilt} vs {}",
                    circ.get(i, j)
                )));
            }
        }
    }
    Ok(decomp)
}

fn alignment_holds(sig: &Signature) -> bool {
    let k = sig.k();
    let scale = 1e9;
    let weight: Vec<Vec<i64>> = (0..k)
        .map(|i| (0..k).map(|j| (sig.get(i, j) * scale).round() as i64).collect())
        .collect();
    let diag: i64 = (0..k).map(|i| weight[i][i]).sum();
    max_assignment(&weight).0 - diag <= 1
}

/// Shift eps of mass along a directed cycle onto the diagonal:
/// x_ii += eps on cycle nodes, x_ij -= eps on cycle edges. Requires a
/// doubly stochastic, optimally aligned signature; the result stays doubly
/// stochastic with off-diagonal mass reduced by |C|·eps, and g strictly
/// increases.
pub fn transfer_move(sig: &Signature, cycle: &[usize], eps: f64) -> Result<Signature> {
    let k = sig.k();
    if !sig.is_balanced(1e-9) {
        return Err(Error::Precondition("signature is not doubly stochastic".into()));
    }
    if !alignment_holds(sig) {
        return Err(Error::Precondition("signature diagonal is not optimally aligned".into()));
    }
    if cycle.len() < 2 || cycle.iter().any(|&u| u >= k) {
        return Err(Error::InvalidParams("cycle must visit at least two valid nodes".into()));
    }
    let mut seen = vec![false; k];
    for &u in cycle {
        if seen[u] {
            return Err(Error::InvalidParams("cycle is not simple".into()));
        }
        seen[u] = true;
    }
    if eps <= 0.0 {
        return Err(Error::InvalidParams(format!("eps must be positive, got {eps}")));
    }
    let min_edge = cycle
        .iter()
        .enumerate()
        .map(|(idx, &u)| sig.get(u, cycle[(idx + 1) % cycle.len()]))
        .fold(f64::INFINITY, f64::min);
    if eps > min_edge + 1e-12 {
        return Err(Error::Precondition(format!(
            "eps {eps} exceeds smallest cycle edge {min_edge}"
        )));
    }
    let eps = eps.min(min_edge);
    let mut out = sig.clone();
    for (idx, &u) in cycle.iter().enumerate() {
        let v = cycle[(idx + 1) % cycle.len()];
        out.set(u, u, out.get(u, u) + eps);
        out.set(u, v, (out.get(u, v) - eps).max(0.0));
    }
    if !out.is_balanced(1e-9) {
        return Err(Error::Invariant("transfer move broke double stochasticity".into()));
    }
    let expected = sig.off_diagonal_mass() - cycle.len() as f64 * eps;
    if (out.off_diagonal_mass() - expected).abs() > 1e-9 {
        return Err(Error::Invariant("off-diagonal mass did not drop by |C|*eps".into()));
    }
    if g_of_signature(&out) <= g_of_signature(sig) {
        return Err(Error::Invariant("transfer move failed to increase g".into()));
    }
    Ok(out)
}

/// Descend a doubly stochastic signature from off-diagonal mass t2 to t1 < t2
/// through a prefix of its cycle decomposition, scaling the last move so the
/// mass lands exactly on t1. Strictly increases g.
pub fn balanced_max_descent(sig: &Signature, t1: f64) -> Result<Signature> {
    if t1 < 0.0 {
        return Err(Error::InvalidParams(format!("target mass must be >= 0, got {t1}")));
    }
    let t2 = sig.off_diagonal_mass();
    if t1 > t2 + 1e-12 {
        return Err(Error::InvalidParams(format!(
            "target mass {t1} exceeds current mass {t2}"
        )));
    }
    let mut remaining = t2 - t1;
    if remaining <= 1e-12 {
        return Ok(sig.clone());
    }
    let decomp = cycle_decompose(&Circulation::from_signature(sig)?)?;
    let mut current = sig.clone();
    for (cycle, &w) in decomp.cycles.iter().zip(&decomp.weights) {
        if remaining <= 1e-12 {
            break;
        }
        let len = cycle.len() as f64;
        let eps = w.min(remaining / len);
        current = transfer_move(&current, cycle, eps)?;
        remaining -= len * eps;
    }
    if (current.off_diagonal_mass() - t1).abs() > 1e-9 {
        return Err(Error::Invariant(format!(
            "descent landed at mass {} instead of {t1}",
            current.off_diagonal_mass()
        )));
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{grid_max_g, SignaturePolytopeSpec};
    use rand::seq::SliceRandom;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn circ(k: usize, entries: &[(usize, usize, f64)]) -> Circulation {
        let mut b = vec![0.0; k * k];
        for &(i, j, v) in entries {
            b[i * k + j] = v;
        }
        Circulation::new(k, b).unwrap()
    }

    #[test]
    fn single_rotation_is_one_cycle() {
        let c = circ(3, &[(0, 1, 0.3), (1, 2, 0.3), (2, 0, 0.3)]);
        let d = cycle_decompose(&c).unwrap();
        assert_eq!(d.cycles.len(), 1);
        assert_eq!(d.cycles[0].len(), 3);
        assert!((d.weights[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn swap_is_one_two_cycle() {
        let c = circ(3, &[(0, 1, 0.4), (1, 0, 0.4)]);
        let d = cycle_decompose(&c).unwrap();
        assert_eq!(d.cycles.len(), 1);
        assert_eq!(d.cycles[0].len(), 2);
        assert!((d.weights[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn superposition_reconstructs() {
        let c = circ(3, &[(0, 1, 0.7), (1, 2, 0.3), (2, 0, 0.3), (1, 0, 0.4)]);
        let d = cycle_decompose(&c).unwrap();
        assert!(d.cycles.len() <= 4);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!((d.edge_mass(i, j) - c.get(i, j)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rejects_unconserved_flow() {
        let mut b = vec![0.0; 9];
        b[1] = 0.5; // 0 -> 1 with no return flow
        assert!(Circulation::new(3, b).is_err());
    }

    fn random_circulation(k: usize, rng: &mut ChaCha8Rng) -> Circulation {
        let mut b = vec![0.0; k * k];
        let cycles = rng.gen_range(1..=5);
        for _ in 0..cycles {
            let len = rng.gen_range(2..=k);
            let mut nodes: Vec<usize> = (0..k).collect();
            nodes.shuffle(rng);
            nodes.truncate(len);
            let w = rng.gen_range(0.01..1.0);
            for idx in 0..len {
                let (u, v) = (nodes[idx], nodes[(idx + 1) % len]);
                b[u * k + v] += w;
            }
        }
        Circulation::new(k, b).unwrap()
    }

    #[test]
    fn thousand_random_circulations_reconstruct() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..1000 {
            let k = 2 + trial % 5;
            let c = random_circulation(k, &mut rng);
            let d = cycle_decompose(&c).unwrap();
            assert!(d.cycles.len() <= c.support_size());
            for i in 0..k {
                for j in 0..k {
                    if i != j {
                        assert!(
                            (d.edge_mass(i, j) - c.get(i, j)).abs() <= 1e-10,
                            "trial {trial} entry ({i},{j})"
                        );
                    }
                }
            }
        }
    }

    fn doubly_stochastic(k: usize, rng: &mut ChaCha8Rng) -> Signature {
        // Convex combination of the identity (dominant, for alignment) and
        // random permutation matrices.
        let mut x = vec![0.0; k * k];
        let mut total = 0.55;
        for i in 0..k {
            x[i * k + i] = 0.55;
        }
        // Keep the random mass below the diagonal weight so the identity
        // stays the optimal alignment even if the permutations coincide.
        for _ in 0..4 {
            let w = rng.gen_range(0.01..0.1);
            let mut perm: Vec<usize> = (0..k).collect();
            perm.shuffle(rng);
            for i in 0..k {
                x[i * k + perm[i]] += w;
            }
            total += w;
        }
        for v in &mut x {
            *v /= total;
        }
        Signature::from_matrix(k, x).unwrap()
    }

    #[test]
    fn transfer_move_boundary_and_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut tested = 0;
        while tested < 100 {
            let k = 3 + tested % 3;
            let sig = doubly_stochastic(k, &mut rng);
            let circ = Circulation::from_signature(&sig).unwrap();
            let d = cycle_decompose(&circ).unwrap();
            if d.cycles.is_empty() {
                continue;
            }
            let cycle = &d.cycles[0];
            let min_edge = cycle
                .iter()
                .enumerate()
                .map(|(idx, &u)| sig.get(u, cycle[(idx + 1) % cycle.len()]))
                .fold(f64::INFINITY, f64::min);
            let eps = if tested % 4 == 0 { min_edge } else { rng.gen_range(0.0..1.0) * min_edge };
            if eps <= 0.0 {
                continue;
            }
            let out = transfer_move(&sig, cycle, eps).unwrap();
            assert!(g_of_signature(&out) > g_of_signature(&sig));
            assert!(
                (out.off_diagonal_mass() - (sig.off_diagonal_mass() - cycle.len() as f64 * eps))
                    .abs()
                    < 1e-9
            );
            if tested % 4 == 0 {
                // Emptying move: some cycle edge becomes exactly 0.
                let emptied = cycle.iter().enumerate().any(|(idx, &u)| {
                    out.get(u, cycle[(idx + 1) % cycle.len()]) == 0.0
                });
                assert!(emptied);
            }
            assert!(transfer_move(&sig, cycle, min_edge * 1.5 + 0.1).is_err());
            tested += 1;
        }
    }

    #[test]
    fn descent_identity_and_strict_gain() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sig = doubly_stochastic(3, &mut rng);
        let t2 = sig.off_diagonal_mass();
        assert_eq!(balanced_max_descent(&sig, t2).unwrap(), sig);
        let down = balanced_max_descent(&sig, t2 / 2.0).unwrap();
        assert!((down.off_diagonal_mass() - t2 / 2.0).abs() < 1e-9);
        assert!(g_of_signature(&down) > g_of_signature(&sig));
        assert!(balanced_max_descent(&sig, -0.1).is_err());
    }

    #[test]
    fn grid_maximizer_descends_with_gain() {
        let spec = SignaturePolytopeSpec::new(3, 1.0, true).unwrap();
        let (g1, sig) = grid_max_g(&spec, 6).unwrap();
        let down = balanced_max_descent(&sig, 0.5).unwrap();
        assert!((down.off_diagonal_mass() - 0.5).abs() < 1e-9);
        assert!(g_of_signature(&down) > g1);
    }

    #[test]
    fn balanced_grid_maxima_decrease_in_t() {
        let mut previous = f64::INFINITY;
        for &t in &[0.2, 0.6, 1.0, 1.4] {
            let spec = SignaturePolytopeSpec::new(3, t, true).unwrap();
            let (g, _) = grid_max_g(&spec, 12).unwrap();
            assert!(g < previous, "t={t}: {g} !< {previous}");
            previous = g;
        }
    }
}
