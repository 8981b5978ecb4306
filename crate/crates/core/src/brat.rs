//! BRAT standoff documents: one `<name>.txt` holding one whitespace-tokenised
//! sentence per line, and one `<name>.ann` holding `T` (span) and `R`
//! (relation) lines. Offsets are character offsets, not bytes.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::schema::{TaskSchema, TreeConstraint};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BratError {
    #[error("malformed annotation line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("relation {0} references a missing span")]
    DanglingReference(String),
    #[error("span {0} has offsets outside the text")]
    OffsetOutOfBounds(String),
    #[error("span {0} surface does not match the text")]
    SurfaceMismatch(String),
    #[error("span {0} does not align with token boundaries")]
    TokenMisaligned(String),
    #[error("duplicate annotation id {0}")]
    DuplicateId(String),
    #[error("input is not valid UTF-8")]
    InvalidUtf8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpanAnnotation {
    pub span_id: String,
    pub label: String,
    pub char_begin: usize,
    pub char_end: usize,
    /// Document-level index of the first token (inclusive).
    pub token_begin: usize,
    /// Document-level index of the last token (inclusive).
    pub token_end: usize,
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RelationAnnotation {
    pub rel_id: String,
    pub label: String,
    pub head_span_id: String,
    pub tail_span_id: String,
}

/// Character range `[begin, end)` of one token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TokenRange {
    pub begin: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub sentences: Vec<Vec<TokenRange>>,
    pub spans: Vec<SpanAnnotation>,
    pub relations: Vec<RelationAnnotation>,
}

/// Content-only view of a span: `(char_begin, char_end, label)`.
pub type SpanKey = (usize, usize, String);

/// Id-free form of a document's annotations, used for equality up to
/// renumbering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalAnnotations {
    pub spans: Vec<SpanKey>,
    pub relations: Vec<(SpanKey, SpanKey, String)>,
}

fn tokenize(text: &str) -> Vec<Vec<TokenRange>> {
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in text.chars().enumerate() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                current.push(TokenRange { begin: s, end: i });
            }
            if ch == '\n' && !current.is_empty() {
                sentences.push(std::mem::take(&mut current));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        current.push(TokenRange {
            begin: s,
            end: text.chars().count(),
        });
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    sentences
}

fn normalize_surface(s: &str) -> String {
    s.replace(['\n', '\t', '\r'], " ")
}

impl Document {
    /// Builds a document from pre-tokenised sentences; tokens are joined by
    /// single spaces and sentences by newlines.
    pub fn from_tokens(doc_id: impl Into<String>, sentences: &[Vec<String>]) -> Document {
        let text = sentences
            .iter()
            .map(|s| s.join(" "))
            .collect::<Vec<_>>()
            .join("\n");
        let mut text = text;
        if !text.is_empty() {
            text.push('\n');
        }
        Document {
            doc_id: doc_id.into(),
            sentences: tokenize(&text),
            text,
            spans: Vec::new(),
            relations: Vec::new(),
        }
    }

    pub fn num_tokens(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    pub fn token_ranges(&self) -> impl Iterator<Item = &TokenRange> {
        self.sentences.iter().flatten()
    }

    /// Token strings of the whole document, in order.
    pub fn tokens(&self) -> Vec<String> {
        let chars: Vec<char> = self.text.chars().collect();
        self.token_ranges()
            .map(|r| chars[r.begin..r.end].iter().collect())
            .collect()
    }

    /// Document-level index of the first token of every sentence.
    pub fn sentence_starts(&self) -> Vec<usize> {
        let mut starts = Vec::with_capacity(self.sentences.len());
        let mut acc = 0;
        for s in &self.sentences {
            starts.push(acc);
            acc += s.len();
        }
        starts
    }

    /// Sentence index containing document-level token `t`.
    pub fn sentence_of_token(&self, t: usize) -> Option<usize> {
        let mut acc = 0;
        for (i, s) in self.sentences.iter().enumerate() {
            if t < acc + s.len() {
                return Some(i);
            }
            acc += s.len();
        }
        None
    }

    /// Adds a span over document-level tokens `token_begin..=token_end`,
    /// assigning the next free `T` id. Returns the id.
    pub fn add_span(&mut self, label: &str, token_begin: usize, token_end: usize) -> String {
        let ranges: Vec<TokenRange> = self.token_ranges().copied().collect();
        let (cb, ce) = (ranges[token_begin].begin, ranges[token_end].end);
        let surface: String = self.text.chars().skip(cb).take(ce - cb).collect();
        let span_id = format!("T{}", self.spans.len() + 1);
        self.spans.push(SpanAnnotation {
            span_id: span_id.clone(),
            label: label.to_string(),
            char_begin: cb,
            char_end: ce,
            token_begin,
            token_end,
            surface: normalize_surface(&surface),
        });
        span_id
    }

    pub fn add_relation(&mut self, label: &str, head: &str, tail: &str) -> String {
        let rel_id = format!("R{}", self.relations.len() + 1);
        self.relations.push(RelationAnnotation {
            rel_id: rel_id.clone(),
            label: label.to_string(),
            head_span_id: head.to_string(),
            tail_span_id: tail.to_string(),
        });
        rel_id
    }

    pub fn span(&self, span_id: &str) -> Option<&SpanAnnotation> {
        self.spans.iter().find(|s| s.span_id == span_id)
    }

    pub fn canonical(&self) -> CanonicalAnnotations {
        let key = |s: &SpanAnnotation| (s.char_begin, s.char_end, s.label.clone());
        let by_id: HashMap<&str, &SpanAnnotation> =
            self.spans.iter().map(|s| (s.span_id.as_str(), s)).collect();
        let mut spans: Vec<SpanKey> = self.spans.iter().map(key).collect();
        spans.sort();
        let mut relations: Vec<_> = self
            .relations
            .iter()
            .filter_map(|r| {
                let h = by_id.get(r.head_span_id.as_str())?;
                let t = by_id.get(r.tail_span_id.as_str())?;
                Some((key(h), key(t), r.label.clone()))
            })
            .collect();
        relations.sort();
        CanonicalAnnotations { spans, relations }
    }

    /// Same text and same annotations up to id renaming.
    pub fn equivalent(&self, other: &Document) -> bool {
        self.text == other.text && self.canonical() == other.canonical()
    }
}

fn malformed(line: usize, reason: impl Into<String>) -> BratError {
    BratError::MalformedLine {
        line,
        reason: reason.into(),
    }
}

fn is_id(s: &str, prefix: char) -> bool {
    s.len() > 1 && s.starts_with(prefix) && s[1..].bytes().all(|b| b.is_ascii_digit())
}

/// Parses a `.txt`/`.ann` pair.
pub fn parse_document(doc_id: &str, txt_content: &str, ann_content: &str) -> Result<Document, BratError> {
    let sentences = tokenize(txt_content);
    let chars: Vec<char> = txt_content.chars().collect();
    let mut token_by_begin = HashMap::new();
    let mut token_by_end = HashMap::new();
    for (i, r) in sentences.iter().flatten().enumerate() {
        token_by_begin.insert(r.begin, i);
        token_by_end.insert(r.end, i);
    }

    let mut spans = Vec::new();
    let mut relations = Vec::new();
    let mut seen = HashSet::new();

    for (idx, raw) in ann_content.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.splitn(3, '\t');
        let id = fields.next().unwrap_or_default();
        let body = fields
            .next()
            .ok_or_else(|| malformed(line_no, "missing tab after id"))?;
        if !seen.insert(id.to_string()) {
            return Err(BratError::DuplicateId(id.to_string()));
        }
        if is_id(id, 'T') {
            let surface = fields
                .next()
                .ok_or_else(|| malformed(line_no, "missing surface field"))?;
            let parts: Vec<&str> = body.split(' ').collect();
            if parts.len() != 3 {
                return Err(malformed(line_no, "expected `<LABEL> <BEGIN> <END>`"));
            }
            let label = parts[0];
            if label.is_empty() {
                return Err(malformed(line_no, "empty label"));
            }
            let begin: usize = parts[1]
                .parse()
                .map_err(|_| malformed(line_no, "begin offset is not an integer"))?;
            let end: usize = parts[2]
                .parse()
                .map_err(|_| malformed(line_no, "end offset is not an integer"))?;
            if begin >= end || end > chars.len() {
                return Err(BratError::OffsetOutOfBounds(id.to_string()));
            }
            let slice: String = chars[begin..end].iter().collect();
            if normalize_surface(&slice) != normalize_surface(surface) {
                return Err(BratError::SurfaceMismatch(id.to_string()));
            }
            let (Some(&tb), Some(&te)) = (token_by_begin.get(&begin), token_by_end.get(&end)) else {
                return Err(BratError::TokenMisaligned(id.to_string()));
            };
            if tb > te {
                return Err(BratError::TokenMisaligned(id.to_string()));
            }
            spans.push(SpanAnnotation {
                span_id: id.to_string(),
                label: label.to_string(),
                char_begin: begin,
                char_end: end,
                token_begin: tb,
                token_end: te,
                surface: normalize_surface(surface),
            });
        } else if is_id(id, 'R') {
            let parts: Vec<&str> = body.trim_end().split(' ').collect();
            if parts.len() != 3 || parts[0].is_empty() {
                return Err(malformed(line_no, "expected `<LABEL> Arg1:<T> Arg2:<T>`"));
            }
            let head = parts[1]
                .strip_prefix("Arg1:")
                .filter(|t| is_id(t, 'T'))
                .ok_or_else(|| malformed(line_no, "bad Arg1"))?;
            let tail = parts[2]
                .strip_prefix("Arg2:")
                .filter(|t| is_id(t, 'T'))
                .ok_or_else(|| malformed(line_no, "bad Arg2"))?;
            relations.push(RelationAnnotation {
                rel_id: id.to_string(),
                label: parts[0].to_string(),
                head_span_id: head.to_string(),
                tail_span_id: tail.to_string(),
            });
        } else {
            return Err(malformed(line_no, format!("unsupported annotation id `{id}`")));
        }
    }

    let span_ids: HashSet<&str> = spans.iter().map(|s| s.span_id.as_str()).collect();
    for r in &relations {
        if !span_ids.contains(r.head_span_id.as_str()) || !span_ids.contains(r.tail_span_id.as_str()) {
            return Err(BratError::DanglingReference(r.rel_id.clone()));
        }
    }

    Ok(Document {
        doc_id: doc_id.to_string(),
        text: txt_content.to_string(),
        sentences,
        spans,
        relations,
    })
}

/// Byte-level entry point; never panics.
pub fn parse_document_bytes(doc_id: &str, txt: &[u8], ann: &[u8]) -> Result<Document, BratError> {
    let txt = std::str::from_utf8(txt).map_err(|_| BratError::InvalidUtf8)?;
    let ann = std::str::from_utf8(ann).map_err(|_| BratError::InvalidUtf8)?;
    parse_document(doc_id, txt, ann)
}

/// Emits `(txt, ann)`. Spans are ordered by `(char_begin, char_end, label)`
/// and renumbered `T1..`; relations are ordered by their renumbered
/// endpoints and label and renumbered `R1..`.
pub fn serialize_document(doc: &Document) -> (String, String) {
    let mut order: Vec<usize> = (0..doc.spans.len()).collect();
    // ties between identical spans keep document order, so re-serializing
    // parsed output is a fixed point
    order.sort_by(|&a, &b| {
        let (x, y) = (&doc.spans[a], &doc.spans[b]);
        (x.char_begin, x.char_end, &x.label, a).cmp(&(y.char_begin, y.char_end, &y.label, b))
    });
    let mut new_id: HashMap<&str, usize> = HashMap::new();
    let mut ann = String::new();
    for (k, &i) in order.iter().enumerate() {
        let s = &doc.spans[i];
        new_id.insert(&s.span_id, k + 1);
        let _ = writeln!(
            ann,
            "T{}\t{} {} {}\t{}",
            k + 1,
            s.label,
            s.char_begin,
            s.char_end,
            normalize_surface(&s.surface)
        );
    }
    let mut rels: Vec<(usize, usize, &str)> = doc
        .relations
        .iter()
        .filter_map(|r| {
            Some((
                *new_id.get(r.head_span_id.as_str())?,
                *new_id.get(r.tail_span_id.as_str())?,
                r.label.as_str(),
            ))
        })
        .collect();
    rels.sort();
    for (k, (h, t, label)) in rels.iter().enumerate() {
        let _ = writeln!(ann, "R{}\t{} Arg1:T{} Arg2:T{}", k + 1, label, h, t);
    }
    (doc.text.clone(), ann)
}

pub fn read_document(txt_path: &Path) -> Result<Document, DatasetError> {
    let ann_path = txt_path.with_extension("ann");
    let doc_id = txt_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let txt = fs::read(txt_path).map_err(|e| DatasetError::io(txt_path, e))?;
    let ann = fs::read(&ann_path).map_err(|e| DatasetError::io(&ann_path, e))?;
    parse_document_bytes(&doc_id, &txt, &ann).map_err(|source| DatasetError::Parse {
        file: ann_path,
        source,
    })
}

pub fn write_document(dir: &Path, doc: &Document) -> Result<(), DatasetError> {
    fs::create_dir_all(dir).map_err(|e| DatasetError::io(dir, e))?;
    let (txt, ann) = serialize_document(doc);
    let txt_path = dir.join(format!("{}.txt", doc.doc_id));
    let ann_path = dir.join(format!("{}.ann", doc.doc_id));
    fs::write(&txt_path, txt).map_err(|e| DatasetError::io(&txt_path, e))?;
    fs::write(&ann_path, ann).map_err(|e| DatasetError::io(&ann_path, e))?;
    Ok(())
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{file}: {source}")]
    Parse { file: PathBuf, source: BratError },
}

impl DatasetError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// `.txt` files of a directory, sorted by name.
pub fn list_documents(dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| DatasetError::io(dir, e))? {
        let path = entry.map_err(|e| DatasetError::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "txt") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Reads every document of a directory, failing on the first error.
pub fn read_dataset(dir: &Path) -> Result<Vec<Document>, DatasetError> {
    list_documents(dir)?.iter().map(|p| read_document(p)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind")]
pub enum Violation {
    Unreadable { file: String, message: String },
    MissingAnnotations { file: String },
    UnknownSpanLabel { file: String, span_id: String, label: String },
    UnknownRelationLabel { file: String, rel_id: String, label: String },
    Overlap { file: String, first: String, second: String },
    CrossingBrackets { file: String, first: String, second: String },
    MultipleParents { file: String, span_id: String },
    SpanTooLong { file: String, span_id: String, length: usize, max: usize },
    SpanCrossesSentence { file: String, span_id: String },
    SelfRelation { file: String, rel_id: String },
}

fn crosses(a: (usize, usize), b: (usize, usize)) -> bool {
    (a.0 < b.0 && b.0 <= a.1 && a.1 < b.1) || (b.0 < a.0 && a.0 <= b.1 && b.1 < a.1)
}

fn overlaps(a: (usize, usize), b: (usize, usize)) -> bool {
    a.0 <= b.1 && b.0 <= a.1
}

/// Schema-level checks on one parsed document.
pub fn validate_document(doc: &Document, schema: &TaskSchema) -> Vec<Violation> {
    let file = doc.doc_id.clone();
    let mut out = Vec::new();
    for s in &doc.spans {
        if schema.span_label_index(&s.label).is_none() {
            out.push(Violation::UnknownSpanLabel {
                file: file.clone(),
                span_id: s.span_id.clone(),
                label: s.label.clone(),
            });
        }
        let length = s.token_end - s.token_begin + 1;
        if let Some(max) = schema.max_span_length {
            if length > max {
                out.push(Violation::SpanTooLong {
                    file: file.clone(),
                    span_id: s.span_id.clone(),
                    length,
                    max,
                });
            }
        }
        if doc.sentence_of_token(s.token_begin) != doc.sentence_of_token(s.token_end) {
            out.push(Violation::SpanCrossesSentence {
                file: file.clone(),
                span_id: s.span_id.clone(),
            });
        }
    }
    for r in &doc.relations {
        if schema.relation_label_index(&r.label).is_none() {
            out.push(Violation::UnknownRelationLabel {
                file: file.clone(),
                rel_id: r.rel_id.clone(),
                label: r.label.clone(),
            });
        }
        if r.head_span_id == r.tail_span_id {
            out.push(Violation::SelfRelation {
                file: file.clone(),
                rel_id: r.rel_id.clone(),
            });
        }
    }
    let tok = |s: &SpanAnnotation| (s.token_begin, s.token_end);
    if !schema.constraints.allow_overlap {
        for (i, a) in doc.spans.iter().enumerate() {
            for b in &doc.spans[i + 1..] {
                if overlaps(tok(a), tok(b)) {
                    out.push(Violation::Overlap {
                        file: file.clone(),
                        first: a.span_id.clone(),
                        second: b.span_id.clone(),
                    });
                }
            }
        }
    }
    match schema.constraints.tree {
        Some(TreeConstraint::Brackets) => {
            let mut sorted: Vec<&SpanAnnotation> = doc.spans.iter().collect();
            sorted.sort_by_key(|s| (s.token_begin, std::cmp::Reverse(s.token_end)));
            // Sweep over brackets still open at each start: a bracket crosses
            // an open one iff it starts inside it and ends after it.
            let mut open_brackets: Vec<&SpanAnnotation> = Vec::new();
            for s in sorted {
                open_brackets.retain(|o| o.token_end >= s.token_begin);
                for open in &open_brackets {
                    if crosses(tok(open), tok(s)) {
                        out.push(Violation::CrossingBrackets {
                            file: file.clone(),
                            first: open.span_id.clone(),
                            second: s.span_id.clone(),
                        });
                    }
                }
                open_brackets.push(s);
            }
        }
        Some(TreeConstraint::SingleParent) => {
            let mut parents: BTreeMap<&str, usize> = BTreeMap::new();
            for r in &doc.relations {
                *parents.entry(r.tail_span_id.as_str()).or_default() += 1;
            }
            for (span_id, n) in parents {
                if n > 1 {
                    out.push(Violation::MultipleParents {
                        file: file.clone(),
                        span_id: span_id.to_string(),
                    });
                }
            }
        }
        None => {}
    }
    out
}

/// Checks every `.txt`/`.ann` pair in `dir` against `schema`. An empty list
/// means the directory is valid.
pub fn validate_dataset(dir: &Path, schema: &TaskSchema) -> Result<Vec<Violation>, DatasetError> {
    let mut out = Vec::new();
    for txt in list_documents(dir)? {
        let name = txt
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        if !txt.with_extension("ann").exists() {
            out.push(Violation::MissingAnnotations { file: name });
            continue;
        }
        match read_document(&txt) {
            Ok(doc) => out.extend(validate_document(&doc, schema)),
            Err(DatasetError::Parse { source, .. }) => out.push(Violation::Unreadable {
                file: name,
                message: source.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{builtin_schema, TaskName};

    const TEXT: &str = "Barack Obama was born in Hawaii .";

    fn fig1_ann() -> String {
        "T1\tperson 0 12\tBarack Obama\nT2\tlocation 25 31\tHawaii\nR1\tborn-in Arg1:T1 Arg2:T2\n".to_string()
    }

    #[test]
    fn parses_the_born_in_example() {
        let doc = parse_document("d", TEXT, &fig1_ann()).unwrap();
        assert_eq!(doc.spans.len(), 2);
        assert_eq!(doc.relations.len(), 1);
        assert_eq!(doc.spans[0].label, "person");
        assert_eq!((doc.spans[0].token_begin, doc.spans[0].token_end), (0, 1));
        assert_eq!(doc.spans[1].label, "location");
        assert_eq!((doc.spans[1].token_begin, doc.spans[1].token_end), (5, 5));
        assert_eq!(doc.relations[0].label, "born-in");
    }

    #[test]
    fn empty_annotations_give_an_empty_document() {
        let doc = parse_document("d", TEXT, "").unwrap();
        assert!(doc.spans.is_empty() && doc.relations.is_empty());
        assert_eq!(doc.num_tokens(), 7);
    }

    #[test]
    fn dangling_reference_is_reported() {
        let ann = "T1\tperson 0 12\tBarack Obama\nR1\tborn-in Arg1:T1 Arg2:T9\n";
        assert_eq!(
            parse_document("d", TEXT, ann),
            Err(BratError::DanglingReference("R1".into()))
        );
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(
            parse_document("d", TEXT, "T1\tperson 0 99\tx\n"),
            Err(BratError::OffsetOutOfBounds(_))
        ));
        assert!(matches!(
            parse_document("d", TEXT, "T1\tperson 0 12\tBarack Obamb\n"),
            Err(BratError::SurfaceMismatch(_))
        ));
        assert!(matches!(
            parse_document("d", TEXT, "T1\tperson 0 3\tBar\n"),
            Err(BratError::TokenMisaligned(_))
        ));
        assert!(matches!(
            parse_document("d", TEXT, "\n# comment\nT1 person 0 12 Barack Obama\n"),
            Err(BratError::MalformedLine { line: 3, .. })
        ));
        assert!(matches!(
            parse_document("d", TEXT, "E1\tevent:T1\n"),
            Err(BratError::MalformedLine { line: 1, .. })
        ));
    }

    #[test]
    fn character_offsets_are_not_bytes() {
        let text = "Zoë lives in Köln\n";
        let ann = "T1\tPER 0 3\tZoë\nT2\tLOC 13 17\tKöln\n";
        let doc = parse_document("d", text, ann).unwrap();
        assert_eq!(doc.spans[1].token_begin, 3);
    }

    #[test]
    fn serialize_single_span() {
        let mut doc = parse_document("d", TEXT, "").unwrap();
        doc.add_span("location", 5, 5);
        let (_, ann) = serialize_document(&doc);
        assert_eq!(ann, "T1\tlocation 25 31\tHawaii\n");
    }

    #[test]
    fn serialize_empty_document() {
        let doc = parse_document("d", TEXT, "").unwrap();
        assert_eq!(serialize_document(&doc).1, "");
    }

    #[test]
    fn round_trip_renumbers_by_content() {
        let ann = "T7\tlocation 25 31\tHawaii\nT3\tperson 0 12\tBarack Obama\nR5\tborn-in Arg1:T3 Arg2:T7\n";
        let doc = parse_document("d", TEXT, ann).unwrap();
        let (txt, out) = serialize_document(&doc);
        assert_eq!(out, fig1_ann());
        let again = parse_document("d", &txt, &out).unwrap();
        assert!(doc.equivalent(&again));
    }

    #[test]
    fn multi_sentence_tokens() {
        let doc = Document::from_tokens("d", &[vec!["a".into(), "b".into()], vec!["c".into()]]);
        assert_eq!(doc.sentence_starts(), vec![0, 2]);
        assert_eq!(doc.sentence_of_token(2), Some(1));
        assert_eq!(doc.tokens(), vec!["a", "b", "c"]);
    }

    #[test]
    fn validation_catches_schema_violations() {
        let ner = builtin_schema(TaskName::Ner);
        let mut doc = Document::from_tokens("d", &[TEXT.split(' ').map(String::from).collect()]);
        doc.add_span("PER", 0, 1);
        assert!(validate_document(&doc, &ner).is_empty());

        doc.add_span("person", 5, 5);
        assert!(matches!(
            validate_document(&doc, &ner)[..],
            [Violation::UnknownSpanLabel { .. }]
        ));

        let dep = builtin_schema(TaskName::Dep);
        let mut doc = Document::from_tokens("d", &[vec!["a".into(), "b".into(), "c".into()]]);
        let ids: Vec<String> = (0..3).map(|i| doc.add_span("word", i, i)).collect();
        doc.add_relation("nsubj", &ids[1], &ids[0]);
        doc.add_relation("obj", &ids[2], &ids[0]);
        assert_eq!(
            validate_document(&doc, &dep),
            vec![Violation::MultipleParents {
                file: "d".into(),
                span_id: "T1".into()
            }]
        );

        let consti = builtin_schema(TaskName::Consti);
        let mut doc = Document::from_tokens("d", &[vec!["a".into(), "b".into(), "c".into()]]);
        doc.add_span("NP", 0, 1);
        doc.add_span("VP", 1, 2);
        assert!(matches!(
            validate_document(&doc, &consti)[..],
            [Violation::CrossingBrackets { .. }]
        ));
    }

    #[test]
    fn identical_spans_serialize_stably() {
        let tokens = vec![(0..10).map(|i| format!("w{i}")).collect::<Vec<_>>()];
        let mut doc = Document::from_tokens("d", &tokens);
        for i in 0..8 {
            doc.add_span("A", i, i);
        }
        let t9 = doc.add_span("B", 9, 9);
        let t10 = doc.add_span("B", 9, 9);
        doc.add_relation("r", &doc.spans[0].span_id.clone(), &t10);
        let (txt, ann) = serialize_document(&doc);
        let parsed = parse_document("d", &txt, &ann).unwrap();
        assert!(parsed.equivalent(&doc));
        assert_eq!(serialize_document(&parsed), (txt, ann.clone()));
        assert!(ann.contains("Arg2:T10"), "{ann} ({t9})");
    }
}
