//! Task schemas: label sets, structural constraints, loss/decoder/metric
//! selection and the per-task span length and pruning defaults. Also turns
//! BRAT documents into model instances.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::brat::Document;

pub const NEG_SPAN: &str = "NEG_SPAN";
pub const NEG_REL: &str = "NEG_REL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskName {
    #[serde(rename = "NER")]
    Ner,
    #[serde(rename = "RE")]
    Re,
    Coref,
    OpenIE,
    #[serde(rename = "SRL")]
    Srl,
    Dep,
    Consti,
    #[serde(rename = "POS")]
    Pos,
    #[serde(rename = "ABSA")]
    Absa,
    #[serde(rename = "ORL")]
    Orl,
}

impl TaskName {
    pub const ALL: [TaskName; 10] = [
        TaskName::Ner,
        TaskName::Re,
        TaskName::Coref,
        TaskName::OpenIE,
        TaskName::Srl,
        TaskName::Dep,
        TaskName::Consti,
        TaskName::Pos,
        TaskName::Absa,
        TaskName::Orl,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskName::Ner => "NER",
            TaskName::Re => "RE",
            TaskName::Coref => "Coref",
            TaskName::OpenIE => "OpenIE",
            TaskName::Srl => "SRL",
            TaskName::Dep => "Dep",
            TaskName::Consti => "Consti",
            TaskName::Pos => "POS",
            TaskName::Absa => "ABSA",
            TaskName::Orl => "ORL",
        }
    }

    /// Tasks whose output is labelled spans only.
    pub fn is_span_oriented(self) -> bool {
        matches!(self, TaskName::Ner | TaskName::Consti | TaskName::Pos | TaskName::Absa)
    }
}

impl fmt::Display for TaskName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemaError {
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("invalid schema for {task}: {reason}")]
    Invalid { task: TaskName, reason: String },
    #[error("span {span_id} crosses a sentence boundary")]
    SpanCrossesSentence { span_id: String },
    #[error("unknown {kind} label `{label}` for {task}")]
    UnknownLabel {
        task: TaskName,
        kind: &'static str,
        label: String,
    },
}

impl FromStr for TaskName {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskName::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| SchemaError::UnknownTask(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pruning {
    /// Span-oriented tasks: no relation stage.
    None,
    /// Keep `max(1, ceil(ratio * n))` spans.
    Ratio(f64),
    /// Keep a fixed number of spans regardless of length.
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossMode {
    Pairwise,
    Head,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecoderKind {
    Generic,
    Coref,
    Constituency,
    Dependency,
    SpanOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    SpanF1,
    RelationF1,
    CorefAvgF1,
    Las,
    BracketF1,
    Accuracy,
    MacroF1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InstanceScope {
    Sentence,
    Document,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TreeConstraint {
    /// Spans must nest (no crossing brackets).
    Brackets,
    /// Every span is the tail of at most one relation.
    SingleParent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraints {
    pub allow_overlap: bool,
    pub tree: Option<TreeConstraint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSchema {
    pub name: TaskName,
    pub span_labels: Vec<String>,
    pub relation_labels: Vec<String>,
    /// `None` means unbounded (constituency).
    pub max_span_length: Option<usize>,
    pub pruning: Pruning,
    pub loss_mode: LossMode,
    pub decoder: DecoderKind,
    pub metric: MetricKind,
    pub instance_scope: InstanceScope,
    pub gold_span_mode: bool,
    pub constraints: Constraints,
    /// Relation label left out of macro-averaged F1 (SemEval "Other").
    pub other_label: Option<String>,
    /// Token cap for document-scoped instances; longer documents are cut and
    /// the cut is reported.
    pub max_doc_tokens: Option<usize>,
}

/// Run-config overrides applied on top of a builtin schema.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaOverrides {
    pub span_labels: Option<Vec<String>>,
    pub relation_labels: Option<Vec<String>>,
    pub max_span_length: Option<usize>,
    pub pruning: Option<Pruning>,
    pub metric: Option<MetricKind>,
    pub gold_span_mode: Option<bool>,
    pub max_doc_tokens: Option<usize>,
}

fn labels(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

const CONLL_NER: &[&str] = &["PER", "LOC", "ORG", "MISC"];

const PTB_POS: &[&str] = &[
    "CC", "CD", "DT", "EX", "FW", "IN", "JJ", "JJR", "JJS", "LS", "MD", "NN", "NNS", "NNP", "NNPS", "PDT",
    "POS", "PRP", "PRP$", "RB", "RBR", "RBS", "RP", "SYM", "TO", "UH", "VB", "VBD", "VBG", "VBN", "VBP",
    "VBZ", "WDT", "WP", "WP$", "WRB", "#", "$", "''", "``", ",", "-LRB-", "-RRB-", ".", ":",
];

const PTB_PHRASAL: &[&str] = &[
    "ADJP", "ADVP", "CONJP", "FRAG", "INTJ", "LST", "NAC", "NP", "NX", "PP", "PRN", "PRT", "QP", "RRC", "S",
    "SBAR", "SBARQ", "SINV", "SQ", "UCP", "VP", "WHADJP", "WHADVP", "WHNP", "WHPP", "X",
];

const UD_RELATIONS: &[&str] = &[
    "acl", "advcl", "advmod", "amod", "appos", "aux", "case", "cc", "ccomp", "clf", "compound", "conj",
    "cop", "csubj", "dep", "det", "discourse", "dislocated", "expl", "fixed", "flat", "goeswith", "iobj",
    "list", "mark", "nmod", "nsubj", "nummod", "obj", "obl", "orphan", "parataxis", "punct", "reparandum",
    "vocative", "xcomp",
];

const SEMEVAL10: &[&str] = &[
    "Cause-Effect",
    "Component-Whole",
    "Content-Container",
    "Entity-Destination",
    "Entity-Origin",
    "Instrument-Agency",
    "Member-Collection",
    "Message-Topic",
    "Product-Producer",
    "Other",
];

const SRL_MODIFIERS: &[&str] = &[
    "ADJ", "ADV", "CAU", "COM", "DIR", "DIS", "DSP", "EXT", "GOL", "LOC", "LVB", "MNR", "MOD", "NEG", "PNC",
    "PRD", "PRP", "PRR", "PRX", "REC", "TMP",
];

fn srl_roles() -> Vec<String> {
    let mut core: Vec<String> = (0..=5).map(|i| format!("ARG{i}")).collect();
    core.push("ARGA".into());
    core.extend(SRL_MODIFIERS.iter().map(|m| format!("ARGM-{m}")));
    let mut out = core.clone();
    for prefix in ["R-", "C-"] {
        out.extend(core.iter().map(|r| format!("{prefix}{r}")));
    }
    out
}

/// The builtin schema of a task with its default label set and
/// hyperparameters.
pub fn builtin_schema(name: TaskName) -> TaskSchema {
    let flat = Constraints {
        allow_overlap: false,
        tree: None,
    };
    let free = Constraints {
        allow_overlap: true,
        tree: None,
    };
    let base = TaskSchema {
        name,
        span_labels: Vec::new(),
        relation_labels: Vec::new(),
        max_span_length: Some(10),
        pruning: Pruning::None,
        loss_mode: LossMode::Pairwise,
        decoder: DecoderKind::SpanOnly,
        metric: MetricKind::SpanF1,
        instance_scope: InstanceScope::Sentence,
        gold_span_mode: false,
        constraints: flat,
        other_label: None,
        max_doc_tokens: None,
    };
    match name {
        TaskName::Ner => TaskSchema {
            span_labels: labels(CONLL_NER),
            ..base
        },
        TaskName::Re => TaskSchema {
            span_labels: labels(&["entity"]),
            relation_labels: labels(SEMEVAL10),
            max_span_length: Some(5),
            pruning: Pruning::Fixed(5),
            decoder: DecoderKind::Generic,
            metric: MetricKind::MacroF1,
            gold_span_mode: true,
            other_label: Some("Other".into()),
            ..base
        },
        TaskName::Coref => TaskSchema {
            span_labels: labels(&["mention"]),
            relation_labels: labels(&["coref"]),
            pruning: Pruning::Ratio(0.4),
            loss_mode: LossMode::Head,
            decoder: DecoderKind::Coref,
            metric: MetricKind::CorefAvgF1,
            instance_scope: InstanceScope::Document,
            constraints: free,
            ..base
        },
        TaskName::OpenIE => TaskSchema {
            span_labels: labels(&["predicate", "argument"]),
            relation_labels: labels(&["ARG0", "ARG1", "ARG2", "ARG3"]),
            max_span_length: Some(30),
            pruning: Pruning::Ratio(0.8),
            decoder: DecoderKind::Generic,
            metric: MetricKind::RelationF1,
            constraints: free,
            ..base
        },
        TaskName::Srl => TaskSchema {
            span_labels: labels(&["predicate", "argument"]),
            relation_labels: srl_roles(),
            max_span_length: Some(30),
            pruning: Pruning::Ratio(1.0),
            decoder: DecoderKind::Generic,
            metric: MetricKind::RelationF1,
            constraints: free,
            ..base
        },
        TaskName::Dep => TaskSchema {
            span_labels: labels(&["word"]),
            relation_labels: labels(UD_RELATIONS),
            max_span_length: Some(1),
            pruning: Pruning::Ratio(1.0),
            decoder: DecoderKind::Dependency,
            metric: MetricKind::Las,
            constraints: Constraints {
                allow_overlap: false,
                tree: Some(TreeConstraint::SingleParent),
            },
            ..base
        },
        TaskName::Consti => TaskSchema {
            span_labels: labels(PTB_PHRASAL),
            max_span_length: None,
            decoder: DecoderKind::Constituency,
            metric: MetricKind::BracketF1,
            constraints: Constraints {
                allow_overlap: true,
                tree: Some(TreeConstraint::Brackets),
            },
            ..base
        },
        TaskName::Pos => TaskSchema {
            span_labels: labels(PTB_POS),
            max_span_length: Some(1),
            metric: MetricKind::Accuracy,
            ..base
        },
        TaskName::Absa => TaskSchema {
            span_labels: labels(&["positive", "negative", "neutral", "conflict"]),
            metric: MetricKind::Accuracy,
            gold_span_mode: true,
            ..base
        },
        TaskName::Orl => TaskSchema {
            span_labels: labels(&["opinion", "argument"]),
            relation_labels: labels(&["holder", "target"]),
            max_span_length: Some(30),
            pruning: Pruning::Ratio(0.3),
            decoder: DecoderKind::Generic,
            metric: MetricKind::RelationF1,
            gold_span_mode: true,
            constraints: free,
            ..base
        },
    }
}

pub fn builtin_schema_by_name(name: &str) -> Result<TaskSchema, SchemaError> {
    Ok(builtin_schema(name.parse()?))
}

impl TaskSchema {
    /// 1-based index of a span label; 0 is reserved for `NEG_SPAN`.
    pub fn span_label_index(&self, label: &str) -> Option<usize> {
        self.span_labels.iter().position(|l| l == label).map(|i| i + 1)
    }

    /// 1-based index of a relation label; 0 is reserved for `NEG_REL`.
    pub fn relation_label_index(&self, label: &str) -> Option<usize> {
        self.relation_labels.iter().position(|l| l == label).map(|i| i + 1)
    }

    /// Label for a class index including the negative class at 0.
    pub fn span_class_name(&self, class: usize) -> &str {
        if class == 0 {
            NEG_SPAN
        } else {
            &self.span_labels[class - 1]
        }
    }

    pub fn relation_class_name(&self, class: usize) -> &str {
        if class == 0 {
            NEG_REL
        } else {
            &self.relation_labels[class - 1]
        }
    }

    pub fn num_span_classes(&self) -> usize {
        self.span_labels.len() + 1
    }

    pub fn num_relation_classes(&self) -> usize {
        self.relation_labels.len() + 1
    }

    pub fn has_relations(&self) -> bool {
        !self.relation_labels.is_empty()
    }

    /// Effective span length bound for a sentence of `n` tokens.
    pub fn span_length_bound(&self, n: usize) -> usize {
        self.max_span_length.map_or(n, |l| l.min(n))
    }

    pub fn apply(mut self, o: &SchemaOverrides) -> Result<Self, SchemaError> {
        if let Some(v) = &o.span_labels {
            self.span_labels = v.clone();
        }
        if let Some(v) = &o.relation_labels {
            self.relation_labels = v.clone();
        }
        if let Some(v) = o.max_span_length {
            self.max_span_length = Some(v);
        }
        if let Some(v) = o.pruning {
            self.pruning = v;
        }
        if let Some(v) = o.metric {
            self.metric = v;
        }
        if let Some(v) = o.gold_span_mode {
            self.gold_span_mode = v;
        }
        if let Some(v) = o.max_doc_tokens {
            self.max_doc_tokens = Some(v);
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        let invalid = |reason: &str| SchemaError::Invalid {
            task: self.name,
            reason: reason.to_string(),
        };
        if (self.loss_mode == LossMode::Head) != (self.name == TaskName::Coref) {
            return Err(invalid("head loss is used by coreference and only by coreference"));
        }
        if matches!(self.name, TaskName::Pos | TaskName::Dep) && self.max_span_length != Some(1) {
            return Err(invalid("POS and Dep spans are single tokens"));
        }
        if self.name == TaskName::Consti && self.max_span_length.is_some() {
            return Err(invalid("constituency spans are unbounded"));
        }
        if self.name.is_span_oriented() && !self.relation_labels.is_empty() {
            return Err(invalid("span-oriented tasks have no relation labels"));
        }
        if self.span_labels.is_empty() {
            return Err(invalid("empty span label set"));
        }
        if self.max_span_length == Some(0) {
            return Err(invalid("max span length must be positive"));
        }
        if let Pruning::Ratio(r) = self.pruning {
            if !(r > 0.0 && r <= 1.0) {
                return Err(invalid("pruning ratio must be in (0, 1]"));
            }
        }
        if self.has_relations() && self.pruning == Pruning::None {
            return Err(invalid("relation tasks need a pruning rule"));
        }
        let mut seen = std::collections::HashSet::new();
        for l in self.span_labels.iter().chain(&self.relation_labels) {
            if l == NEG_SPAN || l == NEG_REL {
                return Err(invalid("negative labels are implicit"));
            }
            if l.is_empty() || l.contains(char::is_whitespace) {
                return Err(invalid("labels must be non-empty and contain no whitespace"));
            }
            if !seen.insert(l) {
                return Err(invalid("duplicate label"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldSpan {
    pub begin: usize,
    pub end: usize,
    /// Class index into `NEG_SPAN ∪ L` (0 is `NEG_SPAN`).
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRelation {
    /// Index into the instance's `gold_spans`.
    pub head: usize,
    pub tail: usize,
    /// Class index into `NEG_REL ∪ R`.
    pub label: usize,
}

/// One model input: a sentence, or a whole document for document-scoped
/// tasks, with instance-local token indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceInstance {
    pub task: TaskName,
    pub doc_id: String,
    /// Document-level index of this instance's first token.
    pub token_offset: usize,
    pub tokens: Vec<String>,
    /// Instance-local start of each sentence (just `[0]` for sentences).
    pub sentence_starts: Vec<usize>,
    pub gold_spans: Vec<GoldSpan>,
    pub gold_relations: Vec<GoldRelation>,
}

impl SentenceInstance {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Instance-local sentence ranges `[start, end)`.
    pub fn sentence_ranges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.sentence_starts.len());
        for (i, &s) in self.sentence_starts.iter().enumerate() {
            let e = self.sentence_starts.get(i + 1).copied().unwrap_or(self.tokens.len());
            if e > s {
                out.push((s, e));
            }
        }
        out
    }
}

/// Book-keeping from [`to_instances`]: nothing is dropped silently.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ConversionStats {
    pub instances: usize,
    pub spans: usize,
    pub relations: usize,
    /// Same-boundary constituency brackets whose inner labels were folded
    /// into the outermost label.
    pub collapsed_unary: usize,
    /// Spans beyond the schema's length bound (kept, counted).
    pub over_length: usize,
    /// Spans and relations cut by `max_doc_tokens`.
    pub truncated_spans: usize,
    pub truncated_relations: usize,
}

/// Splits a document into model instances under `schema`.
pub fn to_instances(doc: &Document, schema: &TaskSchema) -> Result<(Vec<SentenceInstance>, ConversionStats), SchemaError> {
    let tokens = doc.tokens();
    let starts = doc.sentence_starts();
    let mut stats = ConversionStats::default();

    for s in &doc.spans {
        if schema.span_label_index(&s.label).is_none() {
            return Err(SchemaError::UnknownLabel {
                task: schema.name,
                kind: "span",
                label: s.label.clone(),
            });
        }
    }
    for r in &doc.relations {
        if schema.relation_label_index(&r.label).is_none() {
            return Err(SchemaError::UnknownLabel {
                task: schema.name,
                kind: "relation",
                label: r.label.clone(),
            });
        }
    }

    // (instance index, instance-local range) for every instance.
    let ranges: Vec<(usize, usize)> = match schema.instance_scope {
        InstanceScope::Sentence => doc
            .sentences
            .iter()
            .zip(&starts)
            .map(|(s, &st)| (st, st + s.len()))
            .collect(),
        InstanceScope::Document => {
            if tokens.is_empty() {
                Vec::new()
            } else {
                let end = schema.max_doc_tokens.map_or(tokens.len(), |cap| cap.min(tokens.len()));
                vec![(0, end)]
            }
        }
    };

    let mut instances: Vec<SentenceInstance> = ranges
        .iter()
        .map(|&(b, e)| SentenceInstance {
            task: schema.name,
            doc_id: doc.doc_id.clone(),
            token_offset: b,
            tokens: tokens[b..e].to_vec(),
            sentence_starts: match schema.instance_scope {
                InstanceScope::Sentence => vec![0],
                InstanceScope::Document => starts.iter().filter(|&&s| s < e).map(|&s| s - b).collect(),
            },
            gold_spans: Vec::new(),
            gold_relations: Vec::new(),
        })
        .collect();

    let find_instance = |t: usize| ranges.iter().position(|&(b, e)| t >= b && t < e);

    // span id -> (instance, index into gold_spans)
    let mut placed: HashMap<&str, (usize, usize)> = HashMap::new();
    // (instance, begin, end) -> index, to fold same-boundary duplicates
    let mut by_boundary: BTreeMap<(usize, usize, usize), usize> = BTreeMap::new();

    // Outermost-first for constituency: longer spans are parents, and among
    // equal boundaries the earlier annotation is the outer bracket.
    let mut order: Vec<usize> = (0..doc.spans.len()).collect();
    order.sort_by_key(|&i| (doc.spans[i].token_begin, std::cmp::Reverse(doc.spans[i].token_end), i));

    for i in order {
        let s = &doc.spans[i];
        let (Some(ib), Some(ie)) = (find_instance(s.token_begin), find_instance(s.token_end)) else {
            stats.truncated_spans += 1;
            continue;
        };
        if ib != ie {
            return Err(SchemaError::SpanCrossesSentence {
                span_id: s.span_id.clone(),
            });
        }
        let offset = ranges[ib].0;
        let (b, e) = (s.token_begin - offset, s.token_end - offset);
        if let Some(max) = schema.max_span_length {
            if e - b + 1 > max {
                stats.over_length += 1;
            }
        }
        let label = schema.span_label_index(&s.label).expect("checked above");
        if schema.name == TaskName::Consti {
            if let Some(&existing) = by_boundary.get(&(ib, b, e)) {
                stats.collapsed_unary += 1;
                placed.insert(&s.span_id, (ib, existing));
                continue;
            }
        }
        let inst = &mut instances[ib];
        by_boundary.insert((ib, b, e), inst.gold_spans.len());
        placed.insert(&s.span_id, (ib, inst.gold_spans.len()));
        inst.gold_spans.push(GoldSpan { begin: b, end: e, label });
        stats.spans += 1;
    }

    for r in &doc.relations {
        let (Some(&(ih, h)), Some(&(it, t))) = (placed.get(r.head_span_id.as_str()), placed.get(r.tail_span_id.as_str())) else {
            stats.truncated_relations += 1;
            continue;
        };
        if ih != it {
            return Err(SchemaError::SpanCrossesSentence {
                span_id: r.tail_span_id.clone(),
            });
        }
        let label = schema.relation_label_index(&r.label).expect("checked above");
        instances[ih].gold_relations.push(GoldRelation { head: h, tail: t, label });
        stats.relations += 1;
    }

    stats.instances = instances.len();
    Ok((instances, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brat::parse_document;

    #[test]
    fn table7_defaults() {
        let srl = builtin_schema(TaskName::Srl);
        assert_eq!(srl.max_span_length, Some(30));
        assert_eq!(srl.pruning, Pruning::Ratio(1.0));

        assert_eq!(builtin_schema(TaskName::Re).pruning, Pruning::Fixed(5));

        let pos = builtin_schema(TaskName::Pos);
        assert!(pos.relation_labels.is_empty());
        assert_eq!(pos.max_span_length, Some(1));

        let expected = [
            (TaskName::Ner, Some(10), Pruning::None),
            (TaskName::Re, Some(5), Pruning::Fixed(5)),
            (TaskName::Coref, Some(10), Pruning::Ratio(0.4)),
            (TaskName::OpenIE, Some(30), Pruning::Ratio(0.8)),
            (TaskName::Pos, Some(1), Pruning::None),
            (TaskName::Dep, Some(1), Pruning::Ratio(1.0)),
            (TaskName::Consti, None, Pruning::None),
            (TaskName::Srl, Some(30), Pruning::Ratio(1.0)),
            (TaskName::Absa, Some(10), Pruning::None),
            (TaskName::Orl, Some(30), Pruning::Ratio(0.3)),
        ];
        for (task, l, tau) in expected {
            let s = builtin_schema(task);
            assert_eq!((s.max_span_length, s.pruning), (l, tau), "{task}");
            s.validate().unwrap();
        }
    }

    #[test]
    fn schema_invariants() {
        for task in TaskName::ALL {
            let s = builtin_schema(task);
            assert_eq!(s.loss_mode == LossMode::Head, task == TaskName::Coref);
            if task.is_span_oriented() {
                assert!(s.relation_labels.is_empty());
            }
        }
        assert_eq!(builtin_schema(TaskName::Ner).num_span_classes(), 5);
    }

    #[test]
    fn unknown_task_name() {
        assert_eq!(
            builtin_schema_by_name("chunking"),
            Err(SchemaError::UnknownTask("chunking".into()))
        );
        assert_eq!(builtin_schema_by_name("consti").unwrap().name, TaskName::Consti);
    }

    #[test]
    fn overrides_are_validated() {
        let o = SchemaOverrides {
            max_span_length: Some(3),
            ..Default::default()
        };
        assert!(builtin_schema(TaskName::Pos).apply(&o).is_err());
        let o = SchemaOverrides {
            relation_labels: Some(vec!["x".into()]),
            ..Default::default()
        };
        assert!(builtin_schema(TaskName::Ner).apply(&o).is_err());
        let o = SchemaOverrides {
            span_labels: Some(vec!["PER".into(), "LOC".into()]),
            relation_labels: Some(vec!["born-in".into()]),
            gold_span_mode: Some(false),
            metric: Some(MetricKind::RelationF1),
            ..Default::default()
        };
        let s = builtin_schema(TaskName::Re).apply(&o).unwrap();
        assert_eq!(s.span_label_index("LOC"), Some(2));
        assert_eq!(s.relation_class_name(0), NEG_REL);
    }

    fn two_sentence_ner() -> Document {
        parse_document(
            "d",
            "Barack Obama spoke\nHawaii is warm\n",
            "T1\tPER 0 12\tBarack Obama\nT2\tLOC 19 25\tHawaii\n",
        )
        .unwrap()
    }

    #[test]
    fn sentence_scope_splits_per_line() {
        let (inst, stats) = to_instances(&two_sentence_ner(), &builtin_schema(TaskName::Ner)).unwrap();
        assert_eq!(inst.len(), 2);
        assert_eq!(inst[0].gold_spans, vec![GoldSpan { begin: 0, end: 1, label: 1 }]);
        assert_eq!(inst[1].gold_spans, vec![GoldSpan { begin: 0, end: 0, label: 2 }]);
        assert_eq!(inst[1].token_offset, 3);
        assert_eq!(stats.spans, 2);
    }

    #[test]
    fn coref_is_document_scoped() {
        let doc = parse_document(
            "d",
            "I voted for Tom\nbecause he is clever\n",
            "T1\tmention 12 15\tTom\nT2\tmention 24 26\the\nR1\tcoref Arg1:T2 Arg2:T1\n",
        )
        .unwrap();
        let (inst, _) = to_instances(&doc, &builtin_schema(TaskName::Coref)).unwrap();
        assert_eq!(inst.len(), 1);
        assert_eq!(inst[0].tokens.len(), 8);
        assert_eq!(inst[0].sentence_starts, vec![0, 4]);
        assert_eq!(inst[0].gold_relations, vec![GoldRelation { head: 1, tail: 0, label: 1 }]);
    }

    #[test]
    fn coref_token_cap_is_reported() {
        let doc = parse_document(
            "d",
            "I voted for Tom\nbecause he is clever\n",
            "T1\tmention 12 15\tTom\nT2\tmention 24 26\the\nR1\tcoref Arg1:T2 Arg2:T1\n",
        )
        .unwrap();
        let schema = builtin_schema(TaskName::Coref)
            .apply(&SchemaOverrides {
                max_doc_tokens: Some(5),
                ..Default::default()
            })
            .unwrap();
        let (inst, stats) = to_instances(&doc, &schema).unwrap();
        assert_eq!(inst[0].tokens.len(), 5);
        assert_eq!((stats.truncated_spans, stats.truncated_relations), (1, 1));
    }

    #[test]
    fn srl_table_example() {
        let text = "We brought you the tale of two cities\n";
        let ann = "T1\targument 0 2\tWe\nT2\tpredicate 3 10\tbrought\nT3\targument 11 14\tyou\n\
                   T4\targument 15 37\tthe tale of two cities\n\
                   R1\tARG0 Arg1:T2 Arg2:T1\nR2\tARG2 Arg1:T2 Arg2:T3\nR3\tARG1 Arg1:T2 Arg2:T4\n";
        let doc = parse_document("d", text, ann).unwrap();
        let schema = builtin_schema(TaskName::Srl);
        let (inst, _) = to_instances(&doc, &schema).unwrap();
        let inst = &inst[0];
        let pred = inst
            .gold_spans
            .iter()
            .position(|s| s.label == schema.span_label_index("predicate").unwrap())
            .unwrap();
        assert_eq!((inst.gold_spans[pred].begin, inst.gold_spans[pred].end), (1, 1));
        let mut roles: Vec<(usize, usize, &str)> = inst
            .gold_relations
            .iter()
            .map(|r| {
                assert_eq!(r.head, pred);
                let t = inst.gold_spans[r.tail];
                (t.begin, t.end, schema.relation_class_name(r.label))
            })
            .collect();
        roles.sort();
        assert_eq!(roles, vec![(0, 0, "ARG0"), (2, 2, "ARG2"), (3, 7, "ARG1")]);
    }

    #[test]
    fn unknown_label_fails_hard() {
        let doc = parse_document("d", "Obama spoke\n", "T1\tperson 0 5\tObama\n").unwrap();
        assert!(matches!(
            to_instances(&doc, &builtin_schema(TaskName::Ner)),
            Err(SchemaError::UnknownLabel { .. })
        ));
    }

    #[test]
    fn sentence_crossing_span_is_an_error() {
        let doc = parse_document("d", "a b\nc d\n", "T1\tPER 2 5\tb c\n").unwrap();
        assert!(matches!(
            to_instances(&doc, &builtin_schema(TaskName::Ner)),
            Err(SchemaError::SpanCrossesSentence { .. })
        ));
    }

    #[test]
    fn unary_chains_are_counted() {
        let doc = parse_document(
            "d",
            "sat down\n",
            "T1\tS 0 8\tsat down\nT2\tVP 0 8\tsat down\n",
        )
        .unwrap();
        let (inst, stats) = to_instances(&doc, &builtin_schema(TaskName::Consti)).unwrap();
        assert_eq!(inst[0].gold_spans.len(), 1);
        assert_eq!(stats.collapsed_unary, 1);
    }
}
