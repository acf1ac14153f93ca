//! Co-occurrence and cosine networks over the terms of a
//! [`TermDocumentMatrix`], with community detection and Pajek export.

mod louvain;
mod pajek;

pub use louvain::{louvain, LOUVAIN_EPSILON};
pub use pajek::{export_clu, export_pajek, import_pajek, PajekError};

use std::collections::BTreeSet;

use thiserror::Error;

use crate::lexical::TermDocumentMatrix;
use crate::linalg::Matrix;

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("edge ({0}, {1}) is a self-loop")]
    SelfLoop(usize, usize),
    #[error("edge ({0}, {1}) appears more than once")]
    DuplicateEdge(usize, usize),
    #[error("edge ({0}, {1}) has non-positive or non-finite weight {2}")]
    BadWeight(usize, usize, f64),
    #[error("edge ({0}, {1}) refers to a missing node")]
    NodeOutOfRange(usize, usize),
    #[error("partition has {got} entries for {expected} nodes")]
    PartitionSize { expected: usize, got: usize },
    #[error("modularity is undefined on a network without edges")]
    NoEdges,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

/// Undirected labeled graph with positive edge weights.
///
/// Edges are stored with `source < target`, sorted, without duplicates.
/// A partition, when attached, assigns every node a community id.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedNetwork {
    nodes: Vec<String>,
    edges: Vec<Edge>,
    partition: Option<Vec<usize>>,
    modularity_q: Option<f64>,
}

impl WeightedNetwork {
    pub fn new(nodes: Vec<String>, edges: Vec<(usize, usize, f64)>) -> Result<Self, NetworkError> {
        let mut norm = Vec::with_capacity(edges.len());
        for (a, b, w) in edges {
            if a == b {
                return Err(NetworkError::SelfLoop(a, b));
            }
            if a >= nodes.len() || b >= nodes.len() {
                return Err(NetworkError::NodeOutOfRange(a, b));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(NetworkError::BadWeight(a, b, w));
            }
            let (source, target) = if a < b { (a, b) } else { (b, a) };
            norm.push(Edge {
                source,
                target,
                weight: w,
            });
        }
        norm.sort_by_key(|e| (e.source, e.target));
        if let Some(w) = norm
            .windows(2)
            .find(|w| (w[0].source, w[0].target) == (w[1].source, w[1].target))
        {
            return Err(NetworkError::DuplicateEdge(w[0].source, w[0].target));
        }
        Ok(WeightedNetwork {
            nodes,
            edges: norm,
            partition: None,
            modularity_q: None,
        })
    }

    pub fn empty() -> Self {
        WeightedNetwork {
            nodes: Vec::new(),
            edges: Vec::new(),
            partition: None,
            modularity_q: None,
        }
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn partition(&self) -> Option<&[usize]> {
        self.partition.as_deref()
    }

    pub fn modularity_q(&self) -> Option<f64> {
        self.modularity_q
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Weighted degree of every node.
    pub fn strengths(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.nodes.len()];
        for e in &self.edges {
            s[e.source] += e.weight;
            s[e.target] += e.weight;
        }
        s
    }

    /// Attaches a partition and recomputes its modularity when defined.
    pub fn with_partition(mut self, partition: Vec<usize>) -> Result<Self, NetworkError> {
        if partition.len() != self.nodes.len() {
            return Err(NetworkError::PartitionSize {
                expected: self.nodes.len(),
                got: partition.len(),
            });
        }
        let partition = normalize_partition(&partition);
        self.modularity_q = modularity(&self, &partition).ok();
        self.partition = Some(partition);
        Ok(self)
    }

    pub(crate) fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.source].push((e.target, e.weight));
            adj[e.target].push((e.source, e.weight));
        }
        adj
    }
}

/// Relabels communities to `0..c` in order of first appearance.
pub fn normalize_partition(partition: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    partition
        .iter()
        .map(|&c| {
            let next = map.len();
            *map.entry(c).or_insert(next)
        })
        .collect()
}

/// Number of documents in which each pair of terms occurs together.
///
/// The diagonal holds each term's document frequency. Cell values are
/// treated as presence/absence regardless of the matrix mode.
pub fn cooccurrence(m: &TermDocumentMatrix) -> Matrix {
    let n = m.n_terms();
    let mut c = Matrix::zeros(n, n);
    for d in 0..m.n_docs() {
        let row = m.row(d);
        for (a, &(i, _)) in row.iter().enumerate() {
            c[(i, i)] += 1.0;
            for &(j, _) in &row[a + 1..] {
                c[(i, j)] += 1.0;
                c[(j, i)] += 1.0;
            }
        }
    }
    c
}

/// Cosine similarity between term columns in document space.
pub fn cosine_matrix(m: &TermDocumentMatrix) -> Matrix {
    let n = m.n_terms();
    let mut dot = Matrix::zeros(n, n);
    for d in 0..m.n_docs() {
        let row = m.row(d);
        for (a, &(i, vi)) in row.iter().enumerate() {
            let vi = f64::from(vi);
            dot[(i, i)] += vi * vi;
            for &(j, vj) in &row[a + 1..] {
                let p = vi * f64::from(vj);
                dot[(i, j)] += p;
                dot[(j, i)] += p;
            }
        }
    }
    let mut cos = Matrix::zeros(n, n);
    for i in 0..n {
        if dot[(i, i)] == 0.0 {
            continue;
        }
        cos[(i, i)] = 1.0;
        for j in (i + 1)..n {
            if dot[(j, j)] == 0.0 {
                continue;
            }
            let v = (dot[(i, j)] / (dot[(i, i)] * dot[(j, j)]).sqrt()).min(1.0);
            cos[(i, j)] = v;
            cos[(j, i)] = v;
        }
    }
    cos
}

/// Keeps the off-diagonal pairs whose value is strictly above `threshold`.
/// Every label becomes a node, isolates included.
pub fn threshold_network(sim: &Matrix, labels: &[String], threshold: f64) -> WeightedNetwork {
    assert_eq!(sim.rows(), labels.len(), "one label per row");
    assert_eq!(sim.rows(), sim.cols(), "square similarity matrix");
    let n = labels.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let w = sim[(i, j)];
            if w > threshold && w > 0.0 {
                edges.push((i, j, w));
            }
        }
    }
    WeightedNetwork::new(labels.to_vec(), edges).expect("edges built from a matrix are valid")
}

/// Connected components as sorted node lists, ordered by their smallest node.
pub fn connected_components(net: &WeightedNetwork) -> Vec<Vec<usize>> {
    let adj = net.adjacency();
    let mut seen = vec![false; net.n_nodes()];
    let mut comps = Vec::new();
    for start in 0..net.n_nodes() {
        if seen[start] {
            continue;
        }
        let mut comp = vec![start];
        seen[start] = true;
        let mut k = 0;
        while k < comp.len() {
            for &(nb, _) in &adj[comp[k]] {
                if !seen[nb] {
                    seen[nb] = true;
                    comp.push(nb);
                }
            }
            k += 1;
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}

/// Induced subgraph on `keep` (node order preserved).
pub fn induced_subgraph(net: &WeightedNetwork, keep: &[usize]) -> WeightedNetwork {
    let mut index = vec![usize::MAX; net.n_nodes()];
    let mut sorted: Vec<usize> = keep.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for (new, &old) in sorted.iter().enumerate() {
        index[old] = new;
    }
    let nodes = sorted.iter().map(|&i| net.nodes[i].clone()).collect();
    let edges = net
        .edges
        .iter()
        .filter(|e| index[e.source] != usize::MAX && index[e.target] != usize::MAX)
        .map(|e| (index[e.source], index[e.target], e.weight))
        .collect();
    let sub = WeightedNetwork::new(nodes, edges).expect("subgraph of a valid network");
    match &net.partition {
        Some(p) => sub
            .with_partition(sorted.iter().map(|&i| p[i]).collect())
            .expect("partition restricted to kept nodes"),
        None => sub,
    }
}

/// Largest connected component; ties go to the component holding the
/// smallest node index.
pub fn giant_component(net: &WeightedNetwork) -> WeightedNetwork {
    let comps = connected_components(net);
    let mut best: Option<&Vec<usize>> = None;
    for c in &comps {
        if best.is_none_or(|b| c.len() > b.len()) {
            best = Some(c);
        }
    }
    match best {
        Some(c) => induced_subgraph(net, c),
        None => WeightedNetwork::empty(),
    }
}

/// Weighted Newman modularity: `Q = Σ_c [W_c/W − (S_c/2W)²]`.
pub fn modularity(net: &WeightedNetwork, partition: &[usize]) -> Result<f64, NetworkError> {
    if partition.len() != net.n_nodes() {
        return Err(NetworkError::PartitionSize {
            expected: net.n_nodes(),
            got: partition.len(),
        });
    }
    let total = net.total_weight();
    if net.edges.is_empty() || total <= 0.0 {
        return Err(NetworkError::NoEdges);
    }
    let n_comm = partition.iter().max().map_or(0, |&c| c + 1);
    let mut internal = vec![0.0; n_comm];
    let mut strength = vec![0.0; n_comm];
    for e in &net.edges {
        let (cs, ct) = (partition[e.source], partition[e.target]);
        strength[cs] += e.weight;
        strength[ct] += e.weight;
        if cs == ct {
            internal[cs] += e.weight;
        }
    }
    Ok(internal
        .iter()
        .zip(&strength)
        .map(|(&w_c, &s_c)| {
            let share = s_c / (2.0 * total);
            w_c / total - share * share
        })
        .sum())
}

/// Keeps nodes that carry at least one edge.
pub fn drop_isolates(net: &WeightedNetwork) -> WeightedNetwork {
    let mut used = BTreeSet::new();
    for e in &net.edges {
        used.insert(e.source);
        used.insert(e.target);
    }
    let keep: Vec<usize> = used.into_iter().collect();
    induced_subgraph(net, &keep)
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::lexical::CellMode;

    fn tdm(rows: &[&[u32]]) -> TermDocumentMatrix {
        let n_terms = rows[0].len();
        let sparse = rows
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, &v)| v > 0)
                    .map(|(t, &v)| (t, v))
                    .collect()
            })
            .collect();
        TermDocumentMatrix::new(labels(rows.len()), labels(n_terms), sparse, CellMode::Count)
            .unwrap()
    }

    #[test]
    fn cooccurrence_counts() {
        let m = tdm(&[&[1, 1, 0], &[1, 0, 1]]);
        let c = cooccurrence(&m);
        assert_eq!(c[(0, 1)], 1.0);
        assert_eq!(c[(1, 2)], 0.0);
        assert_eq!(c[(0, 0)], 2.0);

        let all = cooccurrence(&tdm(&[&[3, 1, 2]]));
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(all[(i, j)], 1.0);
            }
        }
    }

    #[test]
    fn cooccurrence_matches_brute_force_intersections() {
        let m = tdm(&[&[1, 0, 2, 1], &[0, 1, 1, 1], &[1, 1, 0, 3]]);
        let c = cooccurrence(&m);
        let docs_of =
            |t: usize| -> BTreeSet<usize> { (0..3).filter(|&d| m.get(d, t) > 0).collect() };
        for i in 0..4 {
            for j in 0..4 {
                let expect = docs_of(i).intersection(&docs_of(j)).count() as f64;
                assert_eq!(c[(i, j)], expect, "({i},{j})");
            }
        }
    }

    #[test]
    fn cosine_fixtures() {
        let c = cosine_matrix(&tdm(&[&[1, 0, 1, 2], &[1, 1, 1, 0], &[0, 1, 1, 0]]));
        assert_eq!(c[(0, 1)], 0.5);
        assert!((c[(0, 3)] - 0.5_f64.sqrt()).abs() < 1e-15);
        assert!((c[(1, 3)]).abs() < 1e-15);
        assert_eq!(c[(2, 2)], 1.0);
        let same = cosine_matrix(&tdm(&[&[2, 2], &[1, 1]]));
        assert!((same[(0, 1)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn strict_threshold_and_isolates() {
        let sim = Matrix::from_rows(&[[1.0, 0.2, 0.2], [0.2, 1.0, 0.2], [0.2, 0.2, 1.0]]);
        let net = threshold_network(&sim, &labels(3), 0.2);
        assert!(net.edges().is_empty());
        assert_eq!(net.n_nodes(), 3);

        let sim = Matrix::from_rows(&[
            [1.0, 0.5, 0.0, 0.21],
            [0.5, 1.0, 0.1, 0.0],
            [0.0, 0.1, 1.0, 0.3],
            [0.21, 0.0, 0.3, 1.0],
        ]);
        let net = threshold_network(&sim, &labels(4), 0.2);
        let got: Vec<_> = net
            .edges()
            .iter()
            .map(|e| (e.source, e.target, e.weight))
            .collect();
        assert_eq!(got, vec![(0, 1, 0.5), (0, 3, 0.21), (2, 3, 0.3)]);

        let all = threshold_network(&sim, &labels(4), -1.0);
        assert_eq!(all.edges().len(), 4, "zero pairs never become edges");
    }

    #[test]
    fn giant_component_selection() {
        let net =
            WeightedNetwork::new(labels(5), vec![(3, 4, 1.0), (0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert_eq!(giant_component(&net).nodes(), ["n0", "n1", "n2"]);

        let tie = WeightedNetwork::new(labels(4), vec![(2, 3, 1.0), (0, 1, 2.0)]).unwrap();
        let g = giant_component(&tie);
        assert_eq!(g.nodes(), ["n0", "n1"]);
        assert_eq!(g.edges()[0].weight, 2.0);

        let tri = two_triangles();
        let late =
            WeightedNetwork::new(labels(5), vec![(1, 4, 1.0), (4, 3, 1.0), (0, 2, 1.0)]).unwrap();
        assert_eq!(giant_component(&late).nodes(), ["n1", "n3", "n4"]);
        assert_eq!(giant_component(&fixtures::k4()), fixtures::k4());
        assert_eq!(giant_component(&tri).n_nodes(), 3);
        assert_eq!(
            giant_component(&WeightedNetwork::empty()),
            WeightedNetwork::empty()
        );
    }

    #[test]
    fn modularity_fixtures() {
        assert_eq!(
            modularity(&two_triangles(), &[0, 0, 0, 1, 1, 1]).unwrap(),
            0.5
        );
        let q = modularity(&bridged_triangles(), &[0, 0, 0, 1, 1, 1]).unwrap();
        assert!((q - 5.0 / 14.0).abs() < 1e-12);
        for net in [two_triangles(), bridged_triangles(), k4()] {
            let one = vec![0; net.n_nodes()];
            assert!(modularity(&net, &one).unwrap().abs() < 1e-15);
        }
        let empty = WeightedNetwork::new(labels(3), vec![]).unwrap();
        assert_eq!(modularity(&empty, &[0, 1, 2]), Err(NetworkError::NoEdges));
    }

    #[test]
    fn construction_errors() {
        assert_eq!(
            WeightedNetwork::new(labels(2), vec![(1, 1, 1.0)]),
            Err(NetworkError::SelfLoop(1, 1))
        );
        assert_eq!(
            WeightedNetwork::new(labels(2), vec![(0, 1, 1.0), (1, 0, 2.0)]),
            Err(NetworkError::DuplicateEdge(0, 1))
        );
        assert!(matches!(
            WeightedNetwork::new(labels(2), vec![(0, 1, 0.0)]),
            Err(NetworkError::BadWeight(..))
        ));
        assert!(two_triangles().with_partition(vec![0; 5]).is_err());
    }

    #[test]
    fn partition_attaches_q() {
        let net = two_triangles()
            .with_partition(vec![7, 7, 7, 2, 2, 2])
            .unwrap();
        assert_eq!(net.partition(), Some(&[0, 0, 0, 1, 1, 1][..]));
        assert_eq!(net.modularity_q(), Some(0.5));
    }
}
