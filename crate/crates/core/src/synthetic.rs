//! Seeded synthetic corpora: documents whose titles are drawn from planted
//! topic vocabularies, and token-shuffled null versions of any corpus.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::wos::DocumentRecord;

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "nu", "re", "sa", "to", "vi", "bra", "cel", "dor", "fen", "gil", "hum",
    "jor", "pex",
];

const FILLERS: [&str; 6] = ["the", "of", "and", "in", "on", "for"];

const DOC_TYPES: [&str; 6] = [
    "Article",
    "Article",
    "Article",
    "Editorial Material",
    "Book Review",
    "Review",
];

const TOPIC_SOURCES: [[&str; 4]; 3] = [
    [
        "J DOC",
        "J AM SOC INF SCI TEC",
        "SCIENTOMETRICS",
        "J INFORMETR",
    ],
    ["NATURE", "SCIENCE", "LANCET", "PLOS ONE"],
    ["SOC STUD SCI", "RES POLICY", "MINERVA", "AM SOCIOL REV"],
];

const STRAY_SOURCES: [&str; 2] = ["J AM SOC INFORM SCI", "ANN REV INFORM SCI"];

/// Shape of a planted-topic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedCorpus {
    pub n_docs: usize,
    pub n_topics: usize,
    pub words_per_topic: usize,
    pub shared_words: usize,
    /// Content words per title, inclusive range.
    pub title_len: (usize, usize),
    /// Probability that a content word comes from the document's topic
    /// rather than the shared vocabulary.
    pub topic_share: f64,
    /// Probability that a document also draws from each of the other
    /// topics. Without mixing, topic indicators sum to one and only
    /// `n_topics - 1` directions separate them.
    pub mix_share: f64,
    /// Cited references per document, inclusive range.
    pub refs_per_doc: (usize, usize),
}

impl Default for PlantedCorpus {
    fn default() -> Self {
        PlantedCorpus {
            n_docs: 150,
            n_topics: 3,
            words_per_topic: 15,
            shared_words: 15,
            title_len: (5, 9),
            topic_share: 0.8,
            mix_share: 0.25,
            refs_per_doc: (2, 6),
        }
    }
}

/// Deterministic pseudo-word for vocabulary slot `id`.
fn word(id: usize) -> String {
    let n = SYLLABLES.len();
    format!(
        "{}{}{}",
        SYLLABLES[id % n],
        SYLLABLES[(id / n) % n],
        SYLLABLES[(id / (n * n)) % n]
    )
}

fn source_for(topic: usize, rng: &mut ChaCha8Rng) -> String {
    if rng.random_bool(0.1) {
        return STRAY_SOURCES.choose(rng).expect("non-empty").to_string();
    }
    match TOPIC_SOURCES.get(topic) {
        Some(list) => list.choose(rng).expect("non-empty").to_string(),
        None => format!("J TOPIC {} {}", topic + 1, rng.random_range(1..=4)),
    }
}

impl PlantedCorpus {
    /// Topic vocabularies followed by the shared vocabulary.
    pub fn vocabulary(&self) -> (Vec<Vec<String>>, Vec<String>) {
        let topics = (0..self.n_topics)
            .map(|t| {
                (0..self.words_per_topic)
                    .map(|i| word(1 + t * self.words_per_topic + i))
                    .collect()
            })
            .collect();
        let base = 1 + self.n_topics * self.words_per_topic;
        let shared = (0..self.shared_words).map(|i| word(base + i)).collect();
        (topics, shared)
    }

    /// Generates the corpus; document `i` has primary topic `i % n_topics`.
    pub fn generate(&self, seed: u64) -> Vec<DocumentRecord> {
        assert!(
            self.n_topics > 0 && self.words_per_topic > 0,
            "empty vocabulary"
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (topics, shared) = self.vocabulary();
        (0..self.n_docs)
            .map(|d| {
                let topic = d % self.n_topics;
                let mut doc_topics = vec![topic];
                for t in 0..self.n_topics {
                    if t != topic && rng.random_bool(self.mix_share) {
                        doc_topics.push(t);
                    }
                }
                let len = rng.random_range(self.title_len.0..=self.title_len.1);
                let mut words: Vec<String> = Vec::with_capacity(len + 2);
                for _ in 0..len {
                    let from_topic = shared.is_empty() || rng.random_bool(self.topic_share);
                    let pool = if from_topic {
                        &topics[*doc_topics.choose(&mut rng).expect("non-empty")]
                    } else {
                        &shared
                    };
                    words.push(pool.choose(&mut rng).expect("non-empty pool").clone());
                }
                for _ in 0..rng.random_range(0..=2) {
                    let at = rng.random_range(0..=words.len());
                    words.insert(at, FILLERS.choose(&mut rng).expect("non-empty").to_string());
                }
                let mut title = words.join(" ");
                if let Some(first) = title.get_mut(..1) {
                    first.make_ascii_uppercase();
                }

                let n_refs = rng.random_range(self.refs_per_doc.0..=self.refs_per_doc.1);
                let cited_refs: Vec<String> = (0..n_refs)
                    .map(|_| {
                        format!(
                            "{} {}, {}, {}, V{}, P{}",
                            word(rng.random_range(200..260)).to_uppercase(),
                            ["A", "B", "J", "L"].choose(&mut rng).expect("non-empty"),
                            rng.random_range(1950..2014),
                            source_for(topic, &mut rng),
                            rng.random_range(1..60),
                            rng.random_range(1..900),
                        )
                    })
                    .collect();
                DocumentRecord {
                    id: format!("SYN:{:06}", d + 1),
                    title,
                    doc_type: DOC_TYPES.choose(&mut rng).expect("non-empty").to_string(),
                    pub_year: Some(rng.random_range(1991..=2014)),
                    times_cited: rng.random_range(0..40),
                    n_refs: n_refs as u64,
                    cited_refs,
                }
            })
            .collect()
    }
}

/// Null corpus: all title tokens (whitespace-separated) are pooled,
/// shuffled and dealt back, so every title keeps its length and every word
/// keeps its corpus frequency while co-occurrence structure is destroyed.
pub fn shuffle_title_tokens(records: &[DocumentRecord], seed: u64) -> Vec<DocumentRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lengths: Vec<usize> = records
        .iter()
        .map(|r| r.title.split_whitespace().count())
        .collect();
    let mut pool: Vec<&str> = records
        .iter()
        .flat_map(|r| r.title.split_whitespace())
        .collect();
    pool.shuffle(&mut rng);
    let mut tokens = pool.into_iter();
    records
        .iter()
        .zip(lengths)
        .map(|(r, len)| DocumentRecord {
            title: tokens.by_ref().take(len).collect::<Vec<_>>().join(" "),
            ..r.clone()
        })
        .collect()
}
