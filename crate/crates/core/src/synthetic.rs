//! Rule-generated corpora with known, learnable annotations.
//!
//! Person names are capitalized bigrams, locations and organizations single
//! capitalized tokens. Relations are fixed by the verb of the clause that
//! contains both arguments.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::brat::Document;
use crate::schema::{builtin_schema, to_instances, DecoderKind, MetricKind, Pruning, SchemaError, TaskName, TaskSchema};
use crate::trainer::TaskData;

const FIRST: &[&str] = &[
    "Anna", "Boris", "Carla", "David", "Elena", "Felix", "Greta", "Hugo", "Irene", "Jonas", "Klara", "Louis",
];
const LAST: &[&str] = &["Smith", "Novak", "Rossi", "Meyer", "Silva", "Kowal", "Berg", "Dubois", "Okafor", "Tanaka"];
const CITY: &[&str] = &["Paris", "Lagos", "Oslo", "Lima", "Quito", "Cairo", "Delhi", "Perth", "Riga", "Seoul"];
const ORG: &[&str] = &["ACME", "GLOBEX", "INITECH", "UMBRA", "VANDELAY", "HOOLI"];
const NOUN: &[&str] = &["report", "book", "train", "letter", "garden", "song", "movie", "river", "bridge", "market"];
const ADJ: &[&str] = &["old", "new", "quiet", "long", "small", "famous"];
const VERB: &[&str] = &["liked", "read", "saw", "found", "wrote", "missed"];
const ADVERB: &[&str] = &["yesterday", "later", "reportedly", "once", "finally"];

/// Which synthetic task to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticTask {
    /// PER/LOC spans with `born-in` and `visited` relations.
    Relations,
    /// PER/LOC/ORG spans, no relations.
    Entities,
}

impl SyntheticTask {
    pub fn task_name(self) -> TaskName {
        match self {
            SyntheticTask::Relations => TaskName::Re,
            SyntheticTask::Entities => TaskName::Ner,
        }
    }
}

pub fn synthetic_schema(task: SyntheticTask) -> TaskSchema {
    let strings = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    match task {
        SyntheticTask::Relations => TaskSchema {
            span_labels: strings(&["PER", "LOC"]),
            relation_labels: strings(&["born-in", "visited"]),
            max_span_length: Some(3),
            pruning: Pruning::Ratio(0.5),
            decoder: DecoderKind::Generic,
            metric: MetricKind::RelationF1,
            gold_span_mode: false,
            other_label: None,
            ..builtin_schema(TaskName::Re)
        },
        SyntheticTask::Entities => TaskSchema {
            span_labels: strings(&["PER", "LOC", "ORG"]),
            max_span_length: Some(3),
            ..builtin_schema(TaskName::Ner)
        },
    }
}

enum Piece {
    Word(String),
    Span(Vec<String>, &'static str),
}

struct Clause {
    pieces: Vec<Piece>,
    /// (head piece, tail piece, label)
    relation: Option<(usize, usize, &'static str)>,
}

fn word(w: &str) -> Piece {
    Piece::Word(w.to_string())
}

fn person(rng: &mut ChaCha8Rng) -> Piece {
    Piece::Span(
        vec![FIRST.choose(rng).unwrap().to_string(), LAST.choose(rng).unwrap().to_string()],
        "PER",
    )
}

fn one(list: &[&str], label: &'static str, rng: &mut ChaCha8Rng) -> Piece {
    Piece::Span(vec![list.choose(rng).unwrap().to_string()], label)
}

fn clause(task: SyntheticTask, rng: &mut ChaCha8Rng) -> Clause {
    let kinds = match task {
        SyntheticTask::Relations => 5,
        SyntheticTask::Entities => 6,
    };
    let plain = |pieces| Clause { pieces, relation: None };
    match rng.random_range(0..kinds) {
        0 => Clause {
            pieces: vec![person(rng), word("was"), word("born"), word("in"), one(CITY, "LOC", rng)],
            relation: (task == SyntheticTask::Relations).then_some((0, 4, "born-in")),
        },
        1 => Clause {
            pieces: vec![person(rng), word("visited"), one(CITY, "LOC", rng)],
            relation: (task == SyntheticTask::Relations).then_some((0, 2, "visited")),
        },
        2 => plain(vec![
            person(rng),
            word(VERB.choose(rng).unwrap()),
            word("the"),
            word(NOUN.choose(rng).unwrap()),
        ]),
        3 => plain(vec![
            word("people"),
            word("in"),
            one(CITY, "LOC", rng),
            word(VERB.choose(rng).unwrap()),
            word("the"),
            word(ADJ.choose(rng).unwrap()),
            word(NOUN.choose(rng).unwrap()),
        ]),
        4 => plain(vec![
            word("the"),
            word(ADJ.choose(rng).unwrap()),
            word(NOUN.choose(rng).unwrap()),
            word(VERB.choose(rng).unwrap()),
            word("a"),
            word(NOUN.choose(rng).unwrap()),
        ]),
        _ => plain(vec![one(ORG, "ORG", rng), word("hired"), person(rng)]),
    }
}

fn sentence(task: SyntheticTask, rng: &mut ChaCha8Rng, tokens: &mut Vec<String>, pending: &mut Vec<Pending>) {
    if rng.random_bool(0.3) {
        tokens.push(ADVERB.choose(rng).unwrap().to_string());
    }
    let clauses = if rng.random_bool(0.5) { 2 } else { 1 };
    for c in 0..clauses {
        if c > 0 {
            tokens.push(if rng.random_bool(0.5) { "and" } else { "while" }.to_string());
        }
        let cl = clause(task, rng);
        let mut positions = Vec::new();
        for piece in cl.pieces {
            match piece {
                Piece::Word(w) => {
                    positions.push(None);
                    tokens.push(w);
                }
                Piece::Span(ws, label) => {
                    let b = tokens.len();
                    tokens.extend(ws);
                    positions.push(Some(pending.len()));
                    pending.push(Pending::Span(b, tokens.len() - 1, label));
                }
            }
        }
        if let Some((h, t, label)) = cl.relation {
            pending.push(Pending::Relation(positions[h].unwrap(), positions[t].unwrap(), label));
        }
    }
    tokens.push(".".to_string());
}

enum Pending {
    Span(usize, usize, &'static str),
    /// Indices into the pending list.
    Relation(usize, usize, &'static str),
}

/// `sentences` generated sentences grouped into documents of up to ten.
pub fn synthetic_documents(task: SyntheticTask, sentences: usize, seed: u64, prefix: &str) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::new();
    let mut remaining = sentences;
    while remaining > 0 {
        let count = remaining.min(10);
        remaining -= count;
        let mut sents: Vec<Vec<String>> = Vec::with_capacity(count);
        let mut pendings: Vec<(usize, Vec<Pending>)> = Vec::with_capacity(count);
        let mut offset = 0;
        for _ in 0..count {
            let mut toks = Vec::new();
            let mut pending = Vec::new();
            sentence(task, &mut rng, &mut toks, &mut pending);
            pendings.push((offset, pending));
            offset += toks.len();
            sents.push(toks);
        }
        let mut doc = Document::from_tokens(format!("{prefix}{:04}", docs.len()), &sents);
        for (offset, pending) in pendings {
            let mut ids: Vec<Option<String>> = Vec::with_capacity(pending.len());
            for p in &pending {
                match *p {
                    Pending::Span(b, e, label) => ids.push(Some(doc.add_span(label, b + offset, e + offset))),
                    Pending::Relation(h, t, label) => {
                        let (h, t) = (ids[h].clone().unwrap(), ids[t].clone().unwrap());
                        doc.add_relation(label, &h, &t);
                        ids.push(None);
                    }
                }
            }
        }
        docs.push(doc);
    }
    docs
}

/// Train/dev splits drawn from independent seeds.
pub fn synthetic_task_data(task: SyntheticTask, train: usize, dev: usize, seed: u64) -> Result<TaskData, SchemaError> {
    let schema = synthetic_schema(task);
    let split = |docs: Vec<Document>| -> Result<Vec<_>, SchemaError> {
        let mut out = Vec::new();
        for d in &docs {
            out.extend(to_instances(d, &schema)?.0);
        }
        Ok(out)
    };
    Ok(TaskData {
        train: split(synthetic_documents(task, train, seed, "train"))?,
        dev: split(synthetic_documents(task, dev, seed ^ 0x5eed_0000_0000_0001, "dev"))?,
        schema,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brat::validate_document;

    #[test]
    fn generated_documents_validate() {
        for task in [SyntheticTask::Relations, SyntheticTask::Entities] {
            let schema = synthetic_schema(task);
            let docs = synthetic_documents(task, 35, 4, "d");
            assert_eq!(docs.len(), 4);
            for d in &docs {
                assert!(validate_document(d, &schema).is_empty(), "{:?}", validate_document(d, &schema));
            }
        }
    }

    #[test]
    fn deterministic_and_split() {
        let a = synthetic_task_data(SyntheticTask::Relations, 20, 5, 9).unwrap();
        let b = synthetic_task_data(SyntheticTask::Relations, 20, 5, 9).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!((a.train.len(), a.dev.len()), (20, 5));
        assert!(a.train.iter().any(|i| !i.gold_relations.is_empty()));
        assert_ne!(a.train[0].tokens, a.dev[0].tokens);
    }
}
