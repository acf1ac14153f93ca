//! Principal components of the term correlation matrix, Varimax rotation,
//! and the term/factor map built from the rotated loadings.

use thiserror::Error;

use crate::lexical::TermDocumentMatrix;
use crate::linalg::{symmetric_eigen, LinalgError, Matrix};
use crate::network::WeightedNetwork;

#[derive(Debug, Error, PartialEq)]
pub enum FactorError {
    #[error("correlation needs at least 2 documents, got {0}")]
    TooFewDocuments(usize),
    #[error("cannot extract {k} components from a {dim}x{dim} matrix")]
    TooManyComponents { k: usize, dim: usize },
    #[error("at least one component is required")]
    NoComponents,
    #[error("{0} labels for {1} variables")]
    LabelCount(usize, usize),
    #[error("malformed factor CSV: {0}")]
    Csv(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Pearson correlation between the term columns of `m`, with warnings for
/// constant columns (which get r = 0 off the diagonal and 1 on it).
pub fn correlation_matrix(m: &TermDocumentMatrix) -> Result<(Matrix, Vec<String>), FactorError> {
    let n = m.n_docs();
    if n < 2 {
        return Err(FactorError::TooFewDocuments(n));
    }
    let dense = m.to_dense();
    let p = m.n_terms();
    let means: Vec<f64> = (0..p)
        .map(|j| (0..n).map(|i| dense[(i, j)]).sum::<f64>() / n as f64)
        .collect();
    let mut centered = dense;
    for i in 0..n {
        for (j, mean) in means.iter().enumerate() {
            centered[(i, j)] -= mean;
        }
    }
    let cross = centered.transpose().matmul(&centered);

    let mut warnings = Vec::new();
    let mut r = Matrix::identity(p);
    for i in 0..p {
        if cross[(i, i)] == 0.0 {
            warnings.push(format!(
                "term {:?} is constant over documents; correlations set to 0",
                m.terms()[i]
            ));
            continue;
        }
        for j in (i + 1)..p {
            if cross[(j, j)] == 0.0 {
                continue;
            }
            let v = (cross[(i, j)] / (cross[(i, i)] * cross[(j, j)]).sqrt()).clamp(-1.0, 1.0);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    Ok((r, warnings))
}

/// Loadings and bookkeeping for an extracted (and possibly rotated) solution.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSolution {
    pub terms: Vec<String>,
    /// terms × k
    pub loadings: Matrix,
    /// Eigenvalues of the extracted components, descending.
    pub eigenvalues: Vec<f64>,
    /// k × k orthogonal matrix with `loadings = unrotated · rotation`.
    pub rotation: Matrix,
    /// Share of total variance carried by each column of `loadings`.
    pub explained_variance: Vec<f64>,
}

impl FactorSolution {
    pub fn k(&self) -> usize {
        self.loadings.cols()
    }

    pub fn communalities(&self) -> Vec<f64> {
        communalities(&self.loadings)
    }

    /// Factor matrix as CSV: `term,factor1..factork,communality`, 4 decimals.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let mut header = vec!["term".to_string()];
        header.extend((1..=self.k()).map(|f| format!("factor{f}")));
        header.push("communality".into());
        w.write_record(&header).expect("in-memory csv write");
        let comm = self.communalities();
        for (i, term) in self.terms.iter().enumerate() {
            let mut rec = vec![term.clone()];
            rec.extend(self.loadings.row(i).iter().map(|v| format_4dp(*v)));
            rec.push(format_4dp(comm[i]));
            w.write_record(&rec).expect("in-memory csv write");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("utf-8 csv")
    }
}

fn format_4dp(v: f64) -> String {
    let s = format!("{v:.4}");
    // Avoid "-0.0000" so that the sign column reads the same as the value.
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

/// Term labels and loadings read back from a factor CSV.
pub fn read_factor_csv(text: &str) -> Result<(Vec<String>, Matrix), FactorError> {
    let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = r
        .headers()
        .map_err(|e| FactorError::Csv(e.to_string()))?
        .clone();
    let k = header.iter().filter(|h| h.starts_with("factor")).count();
    if header.get(0) != Some("term") || k == 0 || header.len() != k + 2 {
        return Err(FactorError::Csv(
            "expected header term,factor1..factork,communality".into(),
        ));
    }
    let mut terms = Vec::new();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| FactorError::Csv(e.to_string()))?;
        terms.push(rec[0].to_string());
        let row = (1..=k)
            .map(|f| {
                rec[f]
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| FactorError::Csv(format!("bad loading {:?}", &rec[f])))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    let loadings = if rows.is_empty() {
        Matrix::zeros(0, k)
    } else {
        Matrix::from_rows(&rows)
    };
    Ok((terms, loadings))
}

pub fn communalities(loadings: &Matrix) -> Vec<f64> {
    (0..loadings.rows())
        .map(|i| loadings.row(i).iter().map(|v| v * v).sum())
        .collect()
}

/// Flips each column so that its largest-magnitude entry is positive
/// (earliest row wins ties). The same flips are applied to the columns of
/// `companion` when given.
fn fix_signs(loadings: &mut Matrix, mut companion: Option<&mut Matrix>) {
    for f in 0..loadings.cols() {
        let mut pivot: f64 = 0.0;
        for i in 0..loadings.rows() {
            let v = loadings[(i, f)];
            if v.abs() > pivot.abs() {
                pivot = v;
            }
        }
        if pivot < 0.0 {
            for i in 0..loadings.rows() {
                loadings[(i, f)] = -loadings[(i, f)];
            }
            if let Some(c) = companion.as_deref_mut() {
                for i in 0..c.rows() {
                    c[(i, f)] = -c[(i, f)];
                }
            }
        }
    }
}

fn column_variance_shares(loadings: &Matrix, total: f64) -> Vec<f64> {
    (0..loadings.cols())
        .map(|f| {
            (0..loadings.rows())
                .map(|i| loadings[(i, f)].powi(2))
                .sum::<f64>()
                / total
        })
        .collect()
}

/// First `k` principal components of a correlation matrix.
///
/// Column `f` of the loadings is `eigenvector_f · sqrt(eigenvalue_f)`.
pub fn principal_components(
    r: &Matrix,
    terms: &[String],
    k: usize,
) -> Result<FactorSolution, FactorError> {
    let dim = r.rows();
    if terms.len() != dim {
        return Err(FactorError::LabelCount(terms.len(), dim));
    }
    if k == 0 {
        return Err(FactorError::NoComponents);
    }
    if k > dim {
        return Err(FactorError::TooManyComponents { k, dim });
    }
    let eig = symmetric_eigen(r)?;
    let mut loadings = Matrix::zeros(dim, k);
    for f in 0..k {
        let scale = eig.values[f].max(0.0).sqrt();
        for i in 0..dim {
            loadings[(i, f)] = eig.vectors[(i, f)] * scale;
        }
    }
    fix_signs(&mut loadings, None);
    let total = r.trace();
    let eigenvalues: Vec<f64> = eig.values[..k].to_vec();
    let explained_variance = eigenvalues.iter().map(|l| l / total).collect();
    Ok(FactorSolution {
        terms: terms.to_vec(),
        loadings,
        eigenvalues,
        rotation: Matrix::identity(k),
        explained_variance,
    })
}

pub const VARIMAX_TOLERANCE: f64 = 1e-6;
pub const VARIMAX_MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct Varimax {
    pub loadings: Matrix,
    pub rotation: Matrix,
    /// Criterion before the first sweep and after every sweep, evaluated on
    /// the (row-normalized, if enabled) loadings being rotated.
    pub criterion_history: Vec<f64>,
}

/// Varimax criterion: `Σ_f [p Σ_i l_if⁴ − (Σ_i l_if²)²] / p²`.
pub fn varimax_criterion(loadings: &Matrix) -> f64 {
    let p = loadings.rows() as f64;
    if loadings.rows() == 0 {
        return 0.0;
    }
    (0..loadings.cols())
        .map(|f| {
            let (mut s2, mut s4) = (0.0, 0.0);
            for i in 0..loadings.rows() {
                let sq = loadings[(i, f)].powi(2);
                s2 += sq;
                s4 += sq * sq;
            }
            (p * s4 - s2 * s2) / (p * p)
        })
        .sum()
}

/// Orthogonal Varimax rotation by sweeps of pairwise planar rotations.
///
/// With `kaiser`, rows are scaled to unit length before rotating and scaled
/// back afterwards (rows with zero communality are left alone). Iteration
/// stops when a sweep improves the criterion by less than
/// `VARIMAX_TOLERANCE` relative, or after `VARIMAX_MAX_SWEEPS` sweeps.
/// Column signs are then normalized so the largest-magnitude loading in
/// each column is positive.
pub fn varimax(loadings: &Matrix, kaiser: bool) -> Varimax {
    let (p, k) = (loadings.rows(), loadings.cols());
    let mut rotation = Matrix::identity(k);
    if k < 2 {
        return Varimax {
            loadings: loadings.clone(),
            rotation,
            criterion_history: vec![varimax_criterion(loadings)],
        };
    }

    let norms: Vec<f64> = communalities(loadings).iter().map(|h| h.sqrt()).collect();
    let mut x = loadings.clone();
    if kaiser {
        for (i, &h) in norms.iter().enumerate() {
            if h > 0.0 {
                for f in 0..k {
                    x[(i, f)] /= h;
                }
            }
        }
    }

    let mut history = vec![varimax_criterion(&x)];
    let pf = p as f64;
    for _ in 0..VARIMAX_MAX_SWEEPS {
        for a in 0..k {
            for b in (a + 1)..k {
                let (mut su, mut sv, mut suu_vv, mut suv) = (0.0, 0.0, 0.0, 0.0);
                for i in 0..p {
                    let (xa, xb) = (x[(i, a)], x[(i, b)]);
                    let u = xa * xa - xb * xb;
                    let v = 2.0 * xa * xb;
                    su += u;
                    sv += v;
                    suu_vv += u * u - v * v;
                    suv += 2.0 * u * v;
                }
                let num = suv - 2.0 * su * sv / pf;
                let den = suu_vv - (su * su - sv * sv) / pf;
                let phi = num.atan2(den) / 4.0;
                if phi.abs() < 1e-15 {
                    continue;
                }
                let (s, c) = phi.sin_cos();
                for i in 0..p {
                    let (xa, xb) = (x[(i, a)], x[(i, b)]);
                    x[(i, a)] = c * xa + s * xb;
                    x[(i, b)] = -s * xa + c * xb;
                }
                for i in 0..k {
                    let (ra, rb) = (rotation[(i, a)], rotation[(i, b)]);
                    rotation[(i, a)] = c * ra + s * rb;
                    rotation[(i, b)] = -s * ra + c * rb;
                }
            }
        }
        let before = *history.last().expect("history starts non-empty");
        let after = varimax_criterion(&x);
        history.push(after);
        if (after - before) <= VARIMAX_TOLERANCE * before.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }

    if kaiser {
        for (i, &h) in norms.iter().enumerate() {
            if h > 0.0 {
                for f in 0..k {
                    x[(i, f)] *= h;
                }
            }
        }
    }
    fix_signs(&mut x, Some(&mut rotation));
    Varimax {
        loadings: x,
        rotation,
        criterion_history: history,
    }
}

/// Applies [`varimax`] to a solution, updating rotation and variance shares.
pub fn rotate(sol: &FactorSolution, kaiser: bool) -> (FactorSolution, Varimax) {
    let vm = varimax(&sol.loadings, kaiser);
    let total = sol.terms.len() as f64;
    let rotated = FactorSolution {
        terms: sol.terms.clone(),
        loadings: vm.loadings.clone(),
        eigenvalues: sol.eigenvalues.clone(),
        rotation: sol.rotation.matmul(&vm.rotation),
        explained_variance: column_variance_shares(&vm.loadings, total),
    };
    (rotated, vm)
}

/// Bipartite term–factor graph with loadings as edge weights.
///
/// Nodes are the terms followed by `factor1..factork`. With `drop_negative`,
/// non-positive loadings produce no edge and terms left without edges are
/// omitted from the network. Without it, zero loadings still produce no
/// edge and negative loadings keep their absolute value as weight.
pub fn bipartite_factor_network(sol: &FactorSolution, drop_negative: bool) -> WeightedNetwork {
    let k = sol.k();
    let mut kept_terms = Vec::new();
    let mut term_edges = Vec::new();
    for (i, term) in sol.terms.iter().enumerate() {
        let edges: Vec<(usize, f64)> = (0..k)
            .map(|f| (f, sol.loadings[(i, f)]))
            .filter(|&(_, l)| if drop_negative { l > 0.0 } else { l != 0.0 })
            .map(|(f, l)| (f, l.abs()))
            .collect();
        if drop_negative && edges.is_empty() {
            continue;
        }
        kept_terms.push(term.clone());
        term_edges.push(edges);
    }
    let n_terms = kept_terms.len();
    let mut nodes = kept_terms;
    nodes.extend((1..=k).map(|f| format!("factor{f}")));
    let edges = term_edges
        .into_iter()
        .enumerate()
        .flat_map(|(t, es)| es.into_iter().map(move |(f, w)| (t, n_terms + f, w)))
        .collect();
    WeightedNetwork::new(nodes, edges).expect("bipartite edges are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexical::CellMode;
    use approx::assert_abs_diff_eq;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("t{i}")).collect()
    }

    fn tdm(rows: &[&[u32]]) -> TermDocumentMatrix {
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
        TermDocumentMatrix::new(
            labels(rows.len()),
            labels(rows[0].len()),
            sparse,
            CellMode::Count,
        )
        .unwrap()
    }

    /// Single-pass textbook formula, independent of the centered product.
    fn pearson_one_pass(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let (sxx, syy) = (
            x.iter().map(|a| a * a).sum::<f64>(),
            y.iter().map(|b| b * b).sum::<f64>(),
        );
        (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
    }

    #[test]
    fn correlation_fixtures() {
        let m = tdm(&[&[1, 0, 1, 2], &[0, 1, 0, 1], &[1, 0, 1, 0], &[0, 1, 0, 3]]);
        let (r, warnings) = correlation_matrix(&m).unwrap();
        assert!(warnings.is_empty());
        assert_abs_diff_eq!(r[(0, 1)], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r[(0, 2)], 1.0, epsilon = 1e-15);
        let dense = m.to_dense();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j {
                    1.0
                } else {
                    pearson_one_pass(&dense.column(i), &dense.column(j))
                };
                assert_abs_diff_eq!(r[(i, j)], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn constant_column_and_too_few_docs() {
        let m = tdm(&[&[1, 1, 0], &[1, 0, 1]]);
        let (r, warnings) = correlation_matrix(&m).unwrap();
        assert_eq!(warnings.len(), 1);
        assert_eq!((r[(0, 0)], r[(0, 1)], r[(1, 0)]), (1.0, 0.0, 0.0));
        assert_eq!(
            correlation_matrix(&tdm(&[&[1, 2]])),
            Err(FactorError::TooFewDocuments(1))
        );
    }

    #[test]
    fn two_by_two_components() {
        let r = Matrix::from_rows(&[[1.0, 0.6], [0.6, 1.0]]);
        let sol = principal_components(&r, &labels(2), 2).unwrap();
        assert_abs_diff_eq!(sol.eigenvalues[0], 1.6, epsilon = 1e-14);
        assert_abs_diff_eq!(sol.eigenvalues[1], 0.4, epsilon = 1e-14);

        let one = principal_components(&r, &labels(2), 1).unwrap();
        assert_abs_diff_eq!(one.loadings[(0, 0)], 0.8_f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(one.loadings[(1, 0)], 0.8944, epsilon = 1e-4);
        assert_abs_diff_eq!(one.explained_variance[0], 0.8, epsilon = 1e-14);

        let id = principal_components(&Matrix::identity(3), &labels(3), 3).unwrap();
        assert_eq!(id.eigenvalues, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn component_errors() {
        let r = Matrix::identity(2);
        assert_eq!(
            principal_components(&r, &labels(2), 3),
            Err(FactorError::TooManyComponents { k: 3, dim: 2 })
        );
        let asym = Matrix::from_rows(&[[1.0, 0.5], [0.4, 1.0]]);
        assert!(matches!(
            principal_components(&asym, &labels(2), 1),
            Err(FactorError::Linalg(_))
        ));
    }

    #[test]
    fn varimax_leaves_simple_structure_alone() {
        let l = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]);
        let vm = varimax(&l, true);
        assert!(vm.loadings.max_abs_diff(&l).unwrap() < 1e-15);
        assert!(vm.rotation.max_abs_diff(&Matrix::identity(2)).unwrap() < 1e-15);
    }

    #[test]
    fn varimax_single_column_is_identity() {
        let l = Matrix::from_rows(&[[0.3], [0.9]]);
        let vm = varimax(&l, true);
        assert_eq!(vm.rotation, Matrix::identity(1));
        assert_eq!(vm.loadings, l);
    }

    #[test]
    fn varimax_preserves_communalities() {
        let l = Matrix::from_rows(&[
            [0.7, 0.3, 0.1],
            [0.6, -0.4, 0.2],
            [0.2, 0.8, -0.3],
            [0.5, 0.5, 0.5],
            [0.1, 0.2, 0.9],
        ]);
        for kaiser in [true, false] {
            let vm = varimax(&l, kaiser);
            let before = communalities(&l);
            let after = communalities(&vm.loadings);
            for (a, b) in before.iter().zip(&after) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
            let rtr = vm.rotation.transpose().matmul(&vm.rotation);
            assert!(rtr.max_abs_diff(&Matrix::identity(3)).unwrap() < 1e-12);
            assert!(l.matmul(&vm.rotation).max_abs_diff(&vm.loadings).unwrap() < 1e-12);
            assert!(vm
                .criterion_history
                .windows(2)
                .all(|w| w[1] >= w[0] - 1e-15));
        }
    }

    #[test]
    fn bipartite_map() {
        let sol = FactorSolution {
            terms: vec!["a".into(), "b".into()],
            loadings: Matrix::from_rows(&[[0.9, -0.2], [-0.1, -0.3]]),
            eigenvalues: vec![1.0, 1.0],
            rotation: Matrix::identity(2),
            explained_variance: vec![0.5, 0.5],
        };
        let net = bipartite_factor_network(&sol, true);
        assert_eq!(net.nodes(), ["a", "factor1", "factor2"]);
        assert_eq!(net.edges().len(), 1);
        assert_eq!(net.edges()[0].weight, 0.9);

        let all = bipartite_factor_network(&sol, false);
        assert_eq!(all.edges().len(), 4);

        let pos = FactorSolution {
            loadings: Matrix::from_rows(&[[0.9, 0.2], [0.1, 0.3]]),
            ..sol
        };
        let net = bipartite_factor_network(&pos, true);
        let got: Vec<_> = net
            .edges()
            .iter()
            .map(|e| (e.source, e.target, e.weight))
            .collect();
        assert_eq!(
            got,
            vec![(0, 2, 0.9), (0, 3, 0.2), (1, 2, 0.1), (1, 3, 0.3)]
        );
    }

    #[test]
    fn factor_csv_round_trip() {
        let sol = FactorSolution {
            terms: vec!["x,y".into(), "z".into()],
            loadings: Matrix::from_rows(&[[0.123456, -0.00001], [1.0, 0.5]]),
            eigenvalues: vec![1.0, 1.0],
            rotation: Matrix::identity(2),
            explained_variance: vec![0.5, 0.5],
        };
        let csv = sol.to_csv();
        assert_eq!(csv, "term,factor1,factor2,communality\n\"x,y\",0.1235,0.0000,0.0152\nz,1.0000,0.5000,1.2500\n");
        let (terms, l) = read_factor_csv(&csv).unwrap();
        assert_eq!(terms, sol.terms);
        assert_eq!(l.row(0), &[0.1235, 0.0]);
    }
}
