//! Two-phase Louvain community detection (local moving, then aggregation)
//! at resolution 1.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{modularity, normalize_partition, NetworkError, WeightedNetwork};

/// Minimum modularity gain for a move or a level to count as progress.
pub const LOUVAIN_EPSILON: f64 = 1e-9;

/// Graph used during aggregation. `adj[i]` lists `(j, A_ij)` for `j != i`;
/// `self_loops[i]` is `A_ii`, so the strength of `i` is the row sum.
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    self_loops: Vec<f64>,
}

impl Level {
    fn from_network(net: &WeightedNetwork) -> Self {
        Level {
            adj: net.adjacency(),
            self_loops: vec![0.0; net.n_nodes()],
        }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    fn strengths(&self) -> Vec<f64> {
        self.adj
            .iter()
            .zip(&self.self_loops)
            .map(|(row, &l)| l + row.iter().map(|&(_, w)| w).sum::<f64>())
            .collect()
    }

    /// Local moving phase. Returns the community of each node and whether
    /// any node changed community.
    fn local_moves(&self, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
        let n = self.len();
        let k = self.strengths();
        let two_m: f64 = k.iter().sum();
        let mut community: Vec<usize> = (0..n).collect();
        let mut tot = k.clone();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);

        let mut links = vec![0.0; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut moved_any = false;

        loop {
            let mut moved = false;
            for &i in &order {
                let ci = community[i];
                for &c in &touched {
                    links[c] = 0.0;
                }
                touched.clear();
                for &(j, w) in &self.adj[i] {
                    let cj = community[j];
                    if links[cj] == 0.0 {
                        touched.push(cj);
                    }
                    links[cj] += w;
                }

                tot[ci] -= k[i];
                let gain = |c: usize, link: f64| link - tot[c] * k[i] / two_m;
                let stay = gain(ci, links[ci]);
                let mut best = ci;
                let mut best_gain = stay;
                for &c in &touched {
                    let g = gain(c, links[c]);
                    if g > best_gain {
                        best = c;
                        best_gain = g;
                    }
                }
                // `gain` is in units of m·ΔQ.
                if best != ci && (best_gain - stay) * 2.0 / two_m <= LOUVAIN_EPSILON {
                    best = ci;
                }
                tot[best] += k[i];
                if best != ci {
                    community[i] = best;
                    moved = true;
                    moved_any = true;
                }
            }
            if !moved {
                break;
            }
        }
        (normalize_partition(&community), moved_any)
    }

    fn aggregate(&self, community: &[usize]) -> Level {
        let n_comm = community.iter().max().map_or(0, |&c| c + 1);
        let mut self_loops = vec![0.0; n_comm];
        let mut maps: Vec<std::collections::BTreeMap<usize, f64>> =
            vec![Default::default(); n_comm];
        for i in 0..self.len() {
            let ci = community[i];
            self_loops[ci] += self.self_loops[i];
            for &(j, w) in &self.adj[i] {
                let cj = community[j];
                if ci == cj {
                    self_loops[ci] += w;
                } else {
                    *maps[ci].entry(cj).or_insert(0.0) += w;
                }
            }
        }
        Level {
            adj: maps.into_iter().map(|m| m.into_iter().collect()).collect(),
            self_loops,
        }
    }
}

/// Louvain partition of `net` and its modularity.
///
/// Node visiting order within each level is a shuffle driven by `seed`, so
/// the result is deterministic for a fixed seed and input ordering.
pub fn louvain(net: &WeightedNetwork, seed: u64) -> Result<(Vec<usize>, f64), NetworkError> {
    if net.edges().is_empty() {
        return Err(NetworkError::NoEdges);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut membership: Vec<usize> = (0..net.n_nodes()).collect();
    let mut best_q = modularity(net, &membership)?;
    let mut level = Level::from_network(net);

    loop {
        let (community, moved) = level.local_moves(&mut rng);
        if !moved {
            break;
        }
        let candidate: Vec<usize> = membership.iter().map(|&c| community[c]).collect();
        let q = modularity(net, &candidate)?;
        if q <= best_q + LOUVAIN_EPSILON {
            break;
        }
        best_q = q;
        membership = candidate;
        level = level.aggregate(&community);
        if level.len() == 1 {
            break;
        }
    }

    let membership = normalize_partition(&membership);
    let q = modularity(net, &membership)?;
    Ok((membership, q))
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;

    #[test]
    fn recovers_triangles() {
        let (p, q) = louvain(&two_triangles(), 0).unwrap();
        assert_eq!(p, vec![0, 0, 0, 1, 1, 1]);
        assert_eq!(q, 0.5);

        let (p, q) = louvain(&bridged_triangles(), 0).unwrap();
        assert_eq!(p, vec![0, 0, 0, 1, 1, 1]);
        assert!((q - 5.0 / 14.0).abs() < 1e-12);
    }

    #[test]
    fn complete_graph_is_one_community() {
        let (p, q) = louvain(&k4(), 3).unwrap();
        assert_eq!(p, vec![0; 4]);
        assert!(q.abs() < 1e-15);
    }

    #[test]
    fn no_edges_is_an_error() {
        let net = WeightedNetwork::new(labels(3), vec![]).unwrap();
        assert_eq!(louvain(&net, 0), Err(NetworkError::NoEdges));
    }

    #[test]
    fn same_seed_same_result() {
        let mut edges = Vec::new();
        for i in 0..30usize {
            for j in (i + 1)..30 {
                if (i * 7 + j * 13) % 5 == 0 || (i / 10 == j / 10 && (i + j) % 2 == 0) {
                    edges.push((i, j, 1.0 + ((i + j) % 3) as f64));
                }
            }
        }
        let net = WeightedNetwork::new(labels(30), edges).unwrap();
        assert_eq!(louvain(&net, 11).unwrap(), louvain(&net, 11).unwrap());
    }

    // Pairing the path first leaves a local optimum (Q = 0.26) that no
    // single aggregated move escapes; the split into halves has Q = 0.3.
    #[test]
    fn path_reaches_a_local_optimum() {
        let edges = (0..5).map(|i| (i, i + 1, 1.0)).collect();
        let net = WeightedNetwork::new(labels(6), edges).unwrap();
        for seed in 0..8 {
            let (p, q) = louvain(&net, seed).unwrap();
            assert!((modularity(&net, &p).unwrap() - q).abs() < 1e-15);
            assert!(
                (0.26 - 1e-12..=0.3 + 1e-12).contains(&q),
                "seed {seed}: {q}"
            );
        }
    }
}
