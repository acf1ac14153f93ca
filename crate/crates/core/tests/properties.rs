use std::collections::BTreeSet;

use coword::factor::{communalities, principal_components, rotate};
use coword::info::{joint_entropy, mutual_information, DiscreteCases};
use coword::lexical::{build_word_matrix, tokenize_title, CellMode, TermDocumentMatrix};
use coword::linalg::{symmetric_eigen, Matrix};
use coword::network::{
    cooccurrence, cosine_matrix, louvain, modularity, threshold_network, WeightedNetwork,
};
use coword::wos::{
    match_sources, parse_cited_reference, parse_export, write_export, DocumentRecord,
};
use proptest::prelude::*;

const WORDS: [&str; 8] = [
    "alpha", "beta", "gamma", "delta", "omega", "sigma", "kappa", "theta",
];

fn titles() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(
        prop::collection::vec(prop::sample::select(WORDS.to_vec()), 1..7).prop_map(|w| w.join(" ")),
        2..12,
    )
}

fn records(titles: &[String]) -> Vec<DocumentRecord> {
    titles
        .iter()
        .enumerate()
        .map(|(i, t)| DocumentRecord {
            id: format!("D{i}"),
            title: t.clone(),
            doc_type: "Article".into(),
            pub_year: Some(2000),
            times_cited: i as u64,
            n_refs: 0,
            cited_refs: vec![],
        })
        .collect()
}

fn count_matrix() -> impl Strategy<Value = TermDocumentMatrix> {
    (2usize..10, 2usize..7)
        .prop_flat_map(|(docs, terms)| {
            prop::collection::vec(prop::collection::vec(0u32..4, terms), docs)
        })
        .prop_filter_map("every term occurs", |dense| {
            let terms = dense[0].len();
            let rows: Vec<Vec<(usize, u32)>> = dense
                .iter()
                .map(|r| {
                    r.iter()
                        .enumerate()
                        .filter(|(_, &v)| v > 0)
                        .map(|(j, &v)| (j, v))
                        .collect()
                })
                .collect();
            TermDocumentMatrix::new(
                (0..dense.len()).map(|d| format!("d{d}")).collect(),
                (0..terms).map(|t| format!("t{t}")).collect(),
                rows,
                CellMode::Count,
            )
            .ok()
        })
}

fn cases(dims: usize) -> impl Strategy<Value = Vec<Vec<u32>>> {
    prop::collection::vec(prop::collection::vec(0u32..4, dims), 1..40)
}

fn small_network() -> impl Strategy<Value = WeightedNetwork> {
    (3usize..9)
        .prop_flat_map(|n| {
            let pairs: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .collect();
            (
                Just(n),
                prop::collection::vec(prop::option::weighted(0.5, 0.1f64..5.0), pairs.len()),
                Just(pairs),
            )
        })
        .prop_filter_map("at least one edge", |(n, weights, pairs)| {
            let edges: Vec<_> = pairs
                .iter()
                .zip(weights)
                .filter_map(|(&(i, j), w)| w.map(|w| (i, j, w)))
                .collect();
            if edges.is_empty() {
                return None;
            }
            WeightedNetwork::new((0..n).map(|i| format!("n{i}")).collect(), edges).ok()
        })
}

fn correlation(seed_rows: Vec<Vec<f64>>) -> Matrix {
    let p = seed_rows[0].len();
    let n = seed_rows.len() as f64;
    let means: Vec<f64> = (0..p)
        .map(|j| seed_rows.iter().map(|r| r[j]).sum::<f64>() / n)
        .collect();
    let mut r = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
            for row in &seed_rows {
                let (x, y) = (row[i] - means[i], row[j] - means[j]);
                sxy += x * y;
                sxx += x * x;
                syy += y * y;
            }
            r[(i, j)] = if i == j {
                1.0
            } else {
                sxy / (sxx * syy).sqrt()
            };
        }
    }
    for i in 0..p {
        for j in 0..i {
            r[(i, j)] = r[(j, i)];
        }
    }
    r
}

fn data_rows() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (3usize..7).prop_flat_map(|p| {
        prop::collection::vec(prop::collection::vec(-1.0f64..1.0, p), p + 3..p + 12)
    })
}

proptest! {
    #[test]
    fn raising_word_threshold_never_adds_columns(t in titles(), n in 0u64..4) {
        let stop = BTreeSet::new();
        let recs = records(&t);
        let low = build_word_matrix(&recs, &stop, n, CellMode::Count);
        let high = build_word_matrix(&recs, &stop, n + 1, CellMode::Count);
        if let Ok(high) = high {
            let low = low.expect("lower threshold keeps at least the same terms");
            prop_assert!(high.terms().iter().all(|w| low.terms().contains(w)));
        }
    }

    #[test]
    fn column_sums_are_term_frequencies(t in titles()) {
        let recs = records(&t);
        let m = build_word_matrix(&recs, &BTreeSet::new(), 0, CellMode::Count).unwrap();
        let sums = m.column_sums();
        for (j, term) in m.terms().iter().enumerate() {
            let freq = recs.iter().flat_map(|r| tokenize_title(&r.title)).filter(|w| w == term).count() as u64;
            prop_assert_eq!(sums[j], freq);
        }
    }

    #[test]
    fn binary_mode_clamps_counts(t in titles()) {
        let recs = records(&t);
        let count = build_word_matrix(&recs, &BTreeSet::new(), 0, CellMode::Count).unwrap();
        let binary = build_word_matrix(&recs, &BTreeSet::new(), 0, CellMode::Binary).unwrap();
        prop_assert_eq!(count.terms(), binary.terms());
        for d in 0..count.n_docs() {
            for j in 0..count.n_terms() {
                prop_assert_eq!(binary.get(d, j), count.get(d, j).min(1));
            }
        }
    }

    #[test]
    fn matrix_serializations_round_trip(m in count_matrix()) {
        prop_assert_eq!(&TermDocumentMatrix::from_csv(&m.to_csv(), CellMode::Count).unwrap(), &m);
        prop_assert_eq!(&TermDocumentMatrix::from_triplet_json(&m.to_triplet_json()).unwrap(), &m);
    }

    #[test]
    fn export_round_trip(t in titles(), refs in prop::collection::vec("[A-Z]{2,6} [A-Z], 19[5-9][0-9], [A-Z]{1,4} [A-Z]{2,4}, V[1-9], P[1-9]", 0..4)) {
        let mut recs = records(&t);
        for r in &mut recs {
            r.cited_refs = refs.clone();
            r.n_refs = refs.len() as u64;
        }
        let parsed = parse_export(&write_export(&recs));
        prop_assert!(parsed.errors.is_empty());
        prop_assert_eq!(parsed.records, recs);
    }

    #[test]
    fn cited_reference_parsing_is_total(raw in "[ -~]{0,60}") {
        let c = parse_cited_reference(&raw);
        prop_assert_eq!(&c.raw, &raw);
        if let Some(s) = &c.source {
            prop_assert_eq!(s, &s.to_uppercase());
        }
    }

    #[test]
    fn source_matching_conserves_references(sources in prop::collection::vec(prop::option::of("[A-D]{1,2}"), 0..30)) {
        let refs: Vec<_> = sources
            .iter()
            .map(|s| parse_cited_reference(&format!("AUTHOR X, 2000{}", s.as_ref().map(|s| format!(", {s}")).unwrap_or_default())))
            .collect();
        let list: BTreeSet<String> = ["A", "B", "AB"].iter().map(|s| s.to_string()).collect();
        let m = match_sources(&refs, &list);
        let with_source = refs.iter().filter(|r| r.source.is_some()).count();
        prop_assert_eq!(m.matched_total() + m.unmatched_total(), with_source);
        prop_assert!(m.matched.keys().all(|k| list.contains(k)));
        prop_assert!(m.unmatched.keys().all(|k| !list.contains(k)));
    }

    #[test]
    fn cooccurrence_bounded_by_document_frequency(m in count_matrix()) {
        let c = cooccurrence(&m);
        for i in 0..m.n_terms() {
            for j in 0..m.n_terms() {
                prop_assert_eq!(c[(i, j)], c[(j, i)]);
                prop_assert!(c[(i, j)] <= c[(i, i)].min(c[(j, j)]));
            }
        }
    }

    #[test]
    fn cosine_symmetric_bounded_unit_diagonal(m in count_matrix()) {
        let c = cosine_matrix(&m);
        for i in 0..m.n_terms() {
            prop_assert_eq!(c[(i, i)], 1.0);
            for j in 0..m.n_terms() {
                prop_assert_eq!(c[(i, j)], c[(j, i)]);
                prop_assert!((0.0..=1.0).contains(&c[(i, j)]));
            }
        }
    }

    #[test]
    fn threshold_is_monotone_and_strict(m in count_matrix(), t in 0.0f64..1.0, dt in 0.0f64..0.5) {
        let c = cosine_matrix(&m);
        let loose = threshold_network(&c, m.terms(), t);
        let tight = threshold_network(&c, m.terms(), t + dt);
        prop_assert!(tight.edges().len() <= loose.edges().len());
        prop_assert!(loose.edges().iter().all(|e| e.weight > t));
        prop_assert_eq!(loose.n_nodes(), m.n_terms());
    }

    #[test]
    fn louvain_q_is_modularity_of_its_partition(net in small_network(), seed in 0u64..4) {
        let (part, q) = louvain(&net, seed).unwrap();
        prop_assert_eq!(q, modularity(&net, &part).unwrap());
        let singletons: Vec<usize> = (0..net.n_nodes()).collect();
        prop_assert!(q >= modularity(&net, &singletons).unwrap() - 1e-12);
        prop_assert!(q >= -1e-12, "never worse than one community");
    }

    #[test]
    fn information_ignores_dimension_order(c in cases(3)) {
        let cases = DiscreteCases::unnamed(c.clone()).unwrap();
        let swapped = DiscreteCases::unnamed(c.iter().map(|r| vec![r[2], r[0], r[1]]).collect()).unwrap();
        let t = mutual_information(&cases, &[0, 1, 2]).unwrap();
        prop_assert!((t - mutual_information(&swapped, &[0, 1, 2]).unwrap()).abs() < 1e-12);
        prop_assert!((t - mutual_information(&cases, &[2, 1, 0]).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn information_ignores_case_duplication(c in cases(3)) {
        let once = DiscreteCases::unnamed(c.clone()).unwrap();
        let twice = DiscreteCases::unnamed(c.iter().chain(&c).cloned().collect()).unwrap();
        for dims in [&[0usize, 1][..], &[0, 1, 2]] {
            let a = mutual_information(&once, dims).unwrap();
            let b = mutual_information(&twice, dims).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_entropy_is_monotone(c in cases(3)) {
        let cases = DiscreteCases::unnamed(c).unwrap();
        let h1 = joint_entropy(&cases, &[0]).unwrap();
        let h12 = joint_entropy(&cases, &[0, 1]).unwrap();
        let h123 = joint_entropy(&cases, &[0, 1, 2]).unwrap();
        prop_assert!(h1 >= 0.0);
        prop_assert!(h12 >= h1 - 1e-12);
        prop_assert!(h123 >= h12 - 1e-12);
        prop_assert!(h123 <= (cases.len() as f64).log2() + 1e-12);
    }

    #[test]
    fn eigen_decomposition_reconstructs(rows in data_rows()) {
        let r = correlation(rows);
        let p = r.rows();
        let eig = symmetric_eigen(&r).unwrap();
        prop_assert!((eig.values.iter().sum::<f64>() - r.trace()).abs() < 1e-9);
        prop_assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
        let terms: Vec<String> = (0..p).map(|i| format!("v{i}")).collect();
        let full = principal_components(&r, &terms, p).unwrap();
        let rebuilt = full.loadings.matmul(&full.loadings.transpose());
        prop_assert!(rebuilt.max_abs_diff(&r).unwrap() < 1e-9);
    }

    #[test]
    fn rotation_preserves_communalities_and_ignores_column_order(rows in data_rows()) {
        let r = correlation(rows);
        let terms: Vec<String> = (0..r.rows()).map(|i| format!("v{i}")).collect();
        let sol = principal_components(&r, &terms, 2).unwrap();
        let (rotated, _) = rotate(&sol, true);
        let before = communalities(&sol.loadings);
        for (a, b) in before.iter().zip(rotated.communalities()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        let swapped = Matrix::from_rows(
            &(0..sol.loadings.rows()).map(|i| [sol.loadings[(i, 1)], sol.loadings[(i, 0)]]).collect::<Vec<_>>(),
        );
        let again = coword::factor::varimax(&swapped, true).loadings;
        let same = |x: usize, y: usize| {
            (0..again.rows()).all(|i| (again[(i, x)] - rotated.loadings[(i, y)]).abs() < 1e-6)
        };
        prop_assert!((same(0, 0) && same(1, 1)) || (same(0, 1) && same(1, 0)));
    }
}
