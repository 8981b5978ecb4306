//! Converters from external corpus formats into BRAT documents.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::brat::{self, validate_document, DatasetError, Document, Violation};
use crate::schema::{builtin_schema, TaskName, TaskSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusFormat {
    Conll2003Ner,
    ConlluDep,
    PtbBracketed,
    PropsSrl,
    Brat,
}

impl CorpusFormat {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "conll2003_ner" => CorpusFormat::Conll2003Ner,
            "conllu_dep" => CorpusFormat::ConlluDep,
            "ptb_bracketed" => CorpusFormat::PtbBracketed,
            "props_srl" => CorpusFormat::PropsSrl,
            "brat" => CorpusFormat::Brat,
            _ => return None,
        })
    }

    /// Task a format encodes when none is given explicitly.
    pub fn default_task(self) -> Option<TaskName> {
        match self {
            CorpusFormat::Conll2003Ner => Some(TaskName::Ner),
            CorpusFormat::ConlluDep => Some(TaskName::Dep),
            CorpusFormat::PtbBracketed => Some(TaskName::Consti),
            CorpusFormat::PropsSrl => Some(TaskName::Srl),
            CorpusFormat::Brat => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ImportError {
    #[error("FormatError line {line} in {file}: {reason}")]
    Format {
        file: String,
        line: usize,
        reason: String,
    },
    #[error("InconsistentTree line {line} in {file}: {reason}")]
    InconsistentTree {
        file: String,
        line: usize,
        reason: String,
    },
    #[error("converted document {doc_id} violates the {task} schema: {violations:?}")]
    Invalid {
        doc_id: String,
        task: TaskName,
        violations: Vec<Violation>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ImportSummary {
    pub documents: usize,
    pub spans: usize,
    pub relations: usize,
    /// Gold spans longer than the schema's span length bound.
    pub over_length: usize,
}

fn format_err(file: &str, line: usize, reason: impl Into<String>) -> ImportError {
    ImportError::Format {
        file: file.to_string(),
        line,
        reason: reason.into(),
    }
}

/// Lines grouped into blank-line separated blocks, keeping 1-based line
/// numbers.
fn blocks(content: &str) -> Vec<Vec<(usize, &str)>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        } else {
            cur.push((i + 1, line));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// BIO/IOB1 tags to `(begin, end, type)` spans.
pub fn bio_to_spans(tags: &[&str]) -> Result<Vec<(usize, usize, String)>, usize> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, String)> = None;
    for (i, tag) in tags.iter().enumerate() {
        let (prefix, ty) = if *tag == "O" {
            ("O", "")
        } else if let Some(ty) = tag.strip_prefix("B-") {
            ("B", ty)
        } else if let Some(ty) = tag.strip_prefix("I-") {
            ("I", ty)
        } else {
            return Err(i);
        };
        if prefix != "O" && ty.is_empty() {
            return Err(i);
        }
        let continues = prefix == "I" && open.as_ref().is_some_and(|(_, t)| t == ty);
        if !continues {
            if let Some((b, t)) = open.take() {
                spans.push((b, i - 1, t));
            }
            if prefix != "O" {
                open = Some((i, ty.to_string()));
            }
        }
    }
    if let Some((b, t)) = open {
        spans.push((b, tags.len() - 1, t));
    }
    Ok(spans)
}

/// CoNLL-2003: token first column, NER tag last column, blank lines between
/// sentences, `-DOCSTART-` lines between documents.
pub fn convert_conll2003(content: &str, stem: &str) -> Result<Vec<Document>, ImportError> {
    let mut docs: Vec<Vec<(Vec<String>, Vec<(usize, usize, String)>)>> = vec![Vec::new()];
    for block in blocks(content) {
        let mut tokens = Vec::new();
        let mut tags = Vec::new();
        let mut lines = Vec::new();
        for (line_no, line) in block {
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols[0] == "-DOCSTART-" {
                if docs.last().is_some_and(|d| !d.is_empty()) {
                    docs.push(Vec::new());
                }
                continue;
            }
            if cols.len() < 2 {
                return Err(format_err(stem, line_no, "expected at least token and tag columns"));
            }
            tokens.push(cols[0].to_string());
            tags.push(*cols.last().expect("non-empty"));
            lines.push(line_no);
        }
        if tokens.is_empty() {
            continue;
        }
        let spans = bio_to_spans(&tags).map_err(|i| format_err(stem, lines[i], format!("bad tag `{}`", tags[i])))?;
        docs.last_mut().expect("non-empty").push((tokens, spans));
    }
    let many = docs.iter().filter(|d| !d.is_empty()).count() > 1;
    let mut out = Vec::new();
    for (k, sentences) in docs.into_iter().filter(|d| !d.is_empty()).enumerate() {
        let doc_id = if many { format!("{stem}-{:04}", k + 1) } else { stem.to_string() };
        let toks: Vec<Vec<String>> = sentences.iter().map(|(t, _)| t.clone()).collect();
        let mut doc = Document::from_tokens(doc_id, &toks);
        let starts = doc.sentence_starts();
        for (si, (_, spans)) in sentences.iter().enumerate() {
            for (b, e, label) in spans {
                doc.add_span(label, starts[si] + b, starts[si] + e);
            }
        }
        out.push(doc);
    }
    Ok(out)
}

/// CoNLL-U: ten tab-separated columns; multiword ranges and empty nodes are
/// skipped. Every word becomes a `word` span and every non-root attachment a
/// relation from the head word to the dependent.
pub fn convert_conllu(content: &str, stem: &str) -> Result<Vec<Document>, ImportError> {
    let mut sentences: Vec<(Vec<String>, Vec<(usize, usize, String)>)> = Vec::new();
    for block in blocks(content) {
        let mut tokens = Vec::new();
        let mut arcs = Vec::new();
        for (line_no, line) in block {
            if line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 10 {
                return Err(format_err(stem, line_no, format!("expected 10 columns, found {}", cols.len())));
            }
            if cols[0].contains('-') || cols[0].contains('.') {
                continue;
            }
            let id: usize = cols[0]
                .parse()
                .map_err(|_| format_err(stem, line_no, "ID is not an integer"))?;
            if id != tokens.len() + 1 {
                return Err(ImportError::InconsistentTree {
                    file: stem.to_string(),
                    line: line_no,
                    reason: format!("word ids are not consecutive at {id}"),
                });
            }
            let head: usize = cols[6]
                .parse()
                .map_err(|_| format_err(stem, line_no, "HEAD is not an integer"))?;
            tokens.push(cols[1].to_string());
            arcs.push((line_no, id, head, cols[7].to_string()));
        }
        if tokens.is_empty() {
            continue;
        }
        let n = tokens.len();
        let mut rels = Vec::new();
        let mut roots = 0;
        for (line_no, id, head, label) in arcs {
            if head > n || head == id {
                return Err(ImportError::InconsistentTree {
                    file: stem.to_string(),
                    line: line_no,
                    reason: format!("word {id} has invalid head {head}"),
                });
            }
            if head == 0 {
                roots += 1;
            } else {
                rels.push((head - 1, id - 1, label));
            }
        }
        if roots == 0 {
            return Err(ImportError::InconsistentTree {
                file: stem.to_string(),
                line: 0,
                reason: "sentence without a root".into(),
            });
        }
        sentences.push((tokens, rels));
    }
    if sentences.is_empty() {
        return Ok(Vec::new());
    }
    let toks: Vec<Vec<String>> = sentences.iter().map(|(t, _)| t.clone()).collect();
    let mut doc = Document::from_tokens(stem, &toks);
    let starts = doc.sentence_starts();
    for (si, (tokens, rels)) in sentences.iter().enumerate() {
        let ids: Vec<String> = (0..tokens.len())
            .map(|i| doc.add_span("word", starts[si] + i, starts[si] + i))
            .collect();
        for (h, d, label) in rels {
            doc.add_relation(label, &ids[*h], &ids[*d]);
        }
    }
    Ok(vec![doc])
}

#[derive(Debug, Clone, PartialEq)]
enum Tree {
    Node(String, Vec<Tree>),
    Leaf(String),
}

fn tokenize_sexpr(content: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let mut cur = String::new();
        for ch in line.chars() {
            match ch {
                '(' | ')' => {
                    if !cur.is_empty() {
                        out.push((i + 1, std::mem::take(&mut cur)));
                    }
                    out.push((i + 1, ch.to_string()));
                }
                c if c.is_whitespace() => {
                    if !cur.is_empty() {
                        out.push((i + 1, std::mem::take(&mut cur)));
                    }
                }
                c => cur.push(c),
            }
        }
        if !cur.is_empty() {
            out.push((i + 1, cur));
        }
    }
    out
}

fn parse_tree(toks: &[(usize, String)], pos: &mut usize, stem: &str) -> Result<Tree, ImportError> {
    let line = toks[*pos].0;
    if toks[*pos].1 != "(" {
        return Err(format_err(stem, line, "expected `(`"));
    }
    *pos += 1;
    let label = match toks.get(*pos) {
        Some((_, t)) if t != "(" && t != ")" => {
            *pos += 1;
            t.clone()
        }
        Some(_) => String::new(),
        None => return Err(format_err(stem, line, "unbalanced brackets")),
    };
    let mut children = Vec::new();
    loop {
        match toks.get(*pos) {
            None => return Err(format_err(stem, line, "unbalanced brackets")),
            Some((_, t)) if t == ")" => {
                *pos += 1;
                break;
            }
            Some((_, t)) if t == "(" => children.push(parse_tree(toks, pos, stem)?),
            Some((_, t)) => {
                children.push(Tree::Leaf(t.clone()));
                *pos += 1;
            }
        }
    }
    Ok(Tree::Node(label, children))
}

fn strip_function_tags(label: &str) -> &str {
    if label.starts_with('-') {
        return label;
    }
    label.split(['-', '=']).next().unwrap_or(label)
}

/// Walks a tree collecting terminals and phrasal brackets. Preterminals
/// (nodes over a single leaf) are excluded; `-NONE-` elements and brackets
/// left empty by their removal are dropped. Returns false for empty nodes.
fn collect(tree: &Tree, tokens: &mut Vec<String>, spans: &mut Vec<(usize, usize, String)>) -> bool {
    match tree {
        Tree::Leaf(w) => {
            tokens.push(w.clone());
            true
        }
        Tree::Node(label, children) => {
            if label == "-NONE-" {
                return false;
            }
            if let [Tree::Leaf(w)] = children.as_slice() {
                tokens.push(w.clone());
                return true;
            }
            let begin = tokens.len();
            let mut any = false;
            let at = spans.len();
            for c in children {
                any |= collect(c, tokens, spans);
            }
            if !any {
                return false;
            }
            let label = strip_function_tags(label);
            if !label.is_empty() && label != "ROOT" && label != "TOP" {
                spans.insert(at, (begin, tokens.len() - 1, label.to_string()));
            }
            true
        }
    }
}

/// Penn Treebank S-expressions, any number of trees per file. Each tree is
/// one sentence; phrasal nodes become spans labelled without function tags.
pub fn convert_ptb(content: &str, stem: &str) -> Result<Vec<Document>, ImportError> {
    let toks = tokenize_sexpr(content);
    let mut pos = 0;
    let mut sentences = Vec::new();
    while pos < toks.len() {
        let line = toks[pos].0;
        let tree = parse_tree(&toks, &mut pos, stem)?;
        let mut tokens = Vec::new();
        let mut spans = Vec::new();
        collect(&tree, &mut tokens, &mut spans);
        if tokens.is_empty() {
            return Err(ImportError::InconsistentTree {
                file: stem.to_string(),
                line,
                reason: "tree has no terminals".into(),
            });
        }
        sentences.push((tokens, spans));
    }
    if sentences.is_empty() {
        return Ok(Vec::new());
    }
    let toks: Vec<Vec<String>> = sentences.iter().map(|(t, _)| t.clone()).collect();
    let mut doc = Document::from_tokens(stem, &toks);
    let starts = doc.sentence_starts();
    for (si, (_, spans)) in sentences.iter().enumerate() {
        for (b, e, label) in spans {
            doc.add_span(label, starts[si] + b, starts[si] + e);
        }
    }
    Ok(vec![doc])
}

fn normalize_role(role: &str) -> String {
    let (prefix, core) = match role.split_once('-') {
        Some((p @ ("R" | "C"), rest)) => (format!("{p}-"), rest),
        _ => (String::new(), role),
    };
    let core = if let Some(m) = core.strip_prefix("AM-") {
        format!("ARGM-{m}")
    } else if core == "AA" {
        "ARGA".to_string()
    } else if let Some(d) = core.strip_prefix('A').filter(|d| d.chars().all(|c| c.is_ascii_digit()) && !d.is_empty()) {
        format!("ARG{d}")
    } else {
        core.to_string()
    };
    format!("{prefix}{core}")
}

/// Bracketed argument column (`(A0*`, `*`, `*)`, `(V*)`) to spans.
fn props_column(cells: &[(usize, &str)], stem: &str) -> Result<Vec<(usize, usize, String)>, ImportError> {
    let mut out = Vec::new();
    let mut open: Option<(usize, String)> = None;
    for (i, &(line_no, cell)) in cells.iter().enumerate() {
        let star = cell
            .find('*')
            .ok_or_else(|| format_err(stem, line_no, format!("bad argument cell `{cell}`")))?;
        let (before, after) = (&cell[..star], &cell[star + 1..]);
        if let Some(label) = before.strip_prefix('(') {
            if open.is_some() || label.is_empty() {
                return Err(format_err(stem, line_no, "nested or unlabeled argument bracket"));
            }
            open = Some((i, label.to_string()));
        } else if !before.is_empty() {
            return Err(format_err(stem, line_no, format!("bad argument cell `{cell}`")));
        }
        match after {
            "" => {}
            ")" => {
                let (b, label) = open
                    .take()
                    .ok_or_else(|| format_err(stem, line_no, "closing bracket without opening"))?;
                out.push((b, i, label));
            }
            _ => return Err(format_err(stem, line_no, format!("bad argument cell `{cell}`"))),
        }
    }
    if open.is_some() {
        let line = cells.last().map_or(0, |c| c.0);
        return Err(format_err(stem, line, "unclosed argument bracket"));
    }
    Ok(out)
}

/// CoNLL-2005-style propositions with the word prepended: each line holds
/// `word predicate-lemma-or-dash arg-col-1 ... arg-col-k`, one argument column
/// per predicate; blank lines separate sentences. Predicates become
/// `predicate` spans, arguments `argument` spans, and each argument a
/// relation from its predicate labelled with its role.
pub fn convert_props(content: &str, stem: &str) -> Result<Vec<Document>, ImportError> {
    type Props = (Vec<String>, Vec<(usize, usize, String)>, Vec<(usize, usize, String)>);
    let mut sentences: Vec<Props> = Vec::new();
    for block in blocks(content) {
        let rows: Vec<(usize, Vec<&str>)> = block
            .iter()
            .map(|(l, line)| (*l, line.split_whitespace().collect()))
            .collect();
        let width = rows[0].1.len();
        if width < 2 {
            return Err(format_err(stem, rows[0].0, "expected word and predicate columns"));
        }
        for (l, r) in &rows {
            if r.len() != width {
                return Err(format_err(stem, *l, format!("expected {width} columns, found {}", r.len())));
            }
        }
        let tokens: Vec<String> = rows.iter().map(|(_, r)| r[0].to_string()).collect();
        let predicates = rows.iter().filter(|(_, r)| r[1] != "-").count();
        if predicates != width - 2 {
            return Err(format_err(
                stem,
                rows[0].0,
                format!("{predicates} predicates but {} argument columns", width - 2),
            ));
        }
        let mut spans: Vec<(usize, usize, String)> = Vec::new();
        let mut rels: Vec<(usize, usize, String)> = Vec::new();
        let span_index = |spans: &mut Vec<(usize, usize, String)>, b: usize, e: usize, label: &str| {
            if let Some(i) = spans.iter().position(|s| s.0 == b && s.1 == e && s.2 == label) {
                i
            } else {
                spans.push((b, e, label.to_string()));
                spans.len() - 1
            }
        };
        for col in 2..width {
            let cells: Vec<(usize, &str)> = rows.iter().map(|(l, r)| (*l, r[col])).collect();
            let args = props_column(&cells, stem)?;
            let Some(&(pb, pe, _)) = args.iter().find(|a| a.2 == "V") else {
                return Err(format_err(stem, rows[0].0, format!("argument column {} has no V", col - 1)));
            };
            let p = span_index(&mut spans, pb, pe, "predicate");
            for (b, e, role) in args.iter().filter(|a| a.2 != "V") {
                let a = span_index(&mut spans, *b, *e, "argument");
                rels.push((p, a, normalize_role(role)));
            }
        }
        sentences.push((tokens, spans, rels));
    }
    if sentences.is_empty() {
        return Ok(Vec::new());
    }
    let toks: Vec<Vec<String>> = sentences.iter().map(|(t, _, _)| t.clone()).collect();
    let mut doc = Document::from_tokens(stem, &toks);
    let starts = doc.sentence_starts();
    for (si, (_, spans, rels)) in sentences.iter().enumerate() {
        let ids: Vec<String> = spans
            .iter()
            .map(|(b, e, label)| doc.add_span(label, starts[si] + b, starts[si] + e))
            .collect();
        for (p, a, role) in rels {
            doc.add_relation(role, &ids[*p], &ids[*a]);
        }
    }
    Ok(vec![doc])
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "doc".to_string())
}

/// Converts `files` to BRAT under `out_dir`. Every converted document is
/// validated against `schema` before anything is written for it.
pub fn import_corpus(
    format: CorpusFormat,
    files: &[PathBuf],
    out_dir: &Path,
    schema: &TaskSchema,
) -> Result<ImportSummary, ImportError> {
    let mut docs = Vec::new();
    for path in files {
        let stem = file_stem(path);
        if format == CorpusFormat::Brat {
            docs.push(brat::read_document(&path.with_extension("txt"))?);
            continue;
        }
        let content = fs::read_to_string(path).map_err(|source| ImportError::Io {
            path: path.clone(),
            source,
        })?;
        docs.extend(match format {
            CorpusFormat::Conll2003Ner => convert_conll2003(&content, &stem)?,
            CorpusFormat::ConlluDep => convert_conllu(&content, &stem)?,
            CorpusFormat::PtbBracketed => convert_ptb(&content, &stem)?,
            CorpusFormat::PropsSrl => convert_props(&content, &stem)?,
            CorpusFormat::Brat => unreachable!(),
        });
    }

    let mut summary = ImportSummary::default();
    let mut names: HashMap<String, usize> = HashMap::new();
    for mut doc in docs {
        let n = names.entry(doc.doc_id.clone()).or_default();
        *n += 1;
        if *n > 1 {
            doc.doc_id = format!("{}-{}", doc.doc_id, n);
        }
        let violations: Vec<Violation> = validate_document(&doc, schema)
            .into_iter()
            .filter(|v| !matches!(v, Violation::SpanTooLong { .. }))
            .collect();
        if !violations.is_empty() {
            return Err(ImportError::Invalid {
                doc_id: doc.doc_id.clone(),
                task: schema.name,
                violations,
            });
        }
        if let Some(max) = schema.max_span_length {
            summary.over_length += doc
                .spans
                .iter()
                .filter(|s| s.token_end - s.token_begin + 1 > max)
                .count();
        }
        summary.documents += 1;
        summary.spans += doc.spans.len();
        summary.relations += doc.relations.len();
        brat::write_document(out_dir, &doc)?;
    }
    Ok(summary)
}

/// Schema used for a format when the caller does not name a task.
pub fn default_schema(format: CorpusFormat) -> Option<TaskSchema> {
    format.default_task().map(builtin_schema)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spans_of(doc: &Document) -> Vec<(usize, usize, String)> {
        let mut v: Vec<_> = doc
            .spans
            .iter()
            .map(|s| (s.token_begin, s.token_end, s.label.clone()))
            .collect();
        v.sort();
        v
    }

    #[test]
    fn bio_sequence_to_span() {
        let content = "Barack NNP B-NP B-PER\nObama NNP I-NP I-PER\nspoke VBD B-VP O\n";
        let docs = convert_conll2003(content, "x").unwrap();
        assert_eq!(spans_of(&docs[0]), vec![(0, 1, "PER".into())]);
    }

    #[test]
    fn iob1_and_adjacent_entities() {
        assert_eq!(
            bio_to_spans(&["I-PER", "I-PER", "B-PER", "O", "I-LOC", "I-ORG"]).unwrap(),
            vec![
                (0, 1, "PER".into()),
                (2, 2, "PER".into()),
                (4, 4, "LOC".into()),
                (5, 5, "ORG".into())
            ]
        );
        assert_eq!(bio_to_spans(&["O", "X-PER"]), Err(1));
    }

    #[test]
    fn docstart_splits_documents() {
        let content = "-DOCSTART- -X- -X- O\n\nA NN O O\n\n-DOCSTART- -X- -X- O\n\nB NN O O\n";
        let docs = convert_conll2003(content, "x").unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[1].doc_id, "x-0002");
    }

    #[test]
    fn malformed_conll_line_number() {
        let content = "A NN O O\nB\n";
        match convert_conll2003(content, "x") {
            Err(ImportError::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn conllu_head_to_relation() {
        let content = "# text = The dog barks\n\
            1\tThe\tthe\tDET\tDT\t_\t2\tdet\t_\t_\n\
            2\tdog\tdog\tNOUN\tNN\t_\t3\tnsubj\t_\t_\n\
            3\tbarks\tbark\tVERB\tVBZ\t_\t0\troot\t_\t_\n";
        let doc = &convert_conllu(content, "x").unwrap()[0];
        assert_eq!(doc.spans.len(), 3);
        let rel = |label: &str| {
            let r = doc.relations.iter().find(|r| r.label == label).unwrap();
            (doc.span(&r.head_span_id).unwrap().token_begin, doc.span(&r.tail_span_id).unwrap().token_begin)
        };
        assert_eq!(rel("det"), (1, 0));
        assert_eq!(rel("nsubj"), (2, 1));
        assert_eq!(doc.relations.len(), 2);
    }

    #[test]
    fn conllu_nsubj_of_first_token() {
        // token 1 attached to word 3 (0-based span 2) as nsubj
        let content = "1\tHe\t_\t_\t_\t_\t3\tnsubj\t_\t_\n2\tnever\t_\t_\t_\t_\t3\tadvmod\t_\t_\n3\tsleeps\t_\t_\t_\t_\t0\troot\t_\t_\n";
        let doc = &convert_conllu(content, "x").unwrap()[0];
        let r = doc.relations.iter().find(|r| r.label == "nsubj").unwrap();
        assert_eq!(doc.span(&r.head_span_id).unwrap().token_begin, 2);
        assert_eq!(doc.span(&r.tail_span_id).unwrap().token_begin, 0);
    }

    #[test]
    fn conllu_bad_head_is_inconsistent() {
        let content = "1\tHe\t_\t_\t_\t_\t7\tnsubj\t_\t_\n";
        assert!(matches!(convert_conllu(content, "x"), Err(ImportError::InconsistentTree { .. })));
    }

    #[test]
    fn ptb_phrasal_brackets_only() {
        let doc = &convert_ptb("(S (NP (DT The) (NN cat)) (VP (VBD sat)))", "x").unwrap()[0];
        assert_eq!(doc.tokens(), vec!["The", "cat", "sat"]);
        assert_eq!(
            spans_of(doc),
            vec![(0, 1, "NP".into()), (0, 2, "S".into()), (2, 2, "VP".into())]
        );
    }

    #[test]
    fn ptb_root_wrapper_traces_and_function_tags() {
        let src = "( (S (NP-SBJ-1 (-NONE- *)) (NP-SBJ (PRP It)) (VP (VBZ works)) (. .)) )\n(TOP (INTJ (UH Hi)))";
        let docs = convert_ptb(src, "x").unwrap();
        let doc = &docs[0];
        assert_eq!(doc.sentences.len(), 2);
        assert_eq!(
            spans_of(doc),
            vec![(0, 0, "NP".into()), (0, 2, "S".into()), (1, 1, "VP".into()), (3, 3, "INTJ".into())]
        );
    }

    #[test]
    fn ptb_unbalanced_is_format_error() {
        assert!(matches!(convert_ptb("(S (NP (DT The)", "x"), Err(ImportError::Format { .. })));
    }

    #[test]
    fn props_to_predicate_argument_relations() {
        let src = "We - (A0*) *\nbrought bring (V*) *\nyou - (A2*) *\nthe - (A1* *\ntale tale * (V*)\nof - * (A1*\ntwo - * *\ncities - *) *)\n";
        let doc = &convert_props(src, "x").unwrap()[0];
        let mut rels: Vec<(usize, usize, usize, String)> = doc
            .relations
            .iter()
            .map(|r| {
                let h = doc.span(&r.head_span_id).unwrap();
                let t = doc.span(&r.tail_span_id).unwrap();
                (h.token_begin, t.token_begin, t.token_end, r.label.clone())
            })
            .collect();
        rels.sort();
        assert_eq!(
            rels,
            vec![
                (1, 0, 0, "ARG0".into()),
                (1, 2, 2, "ARG2".into()),
                (1, 3, 7, "ARG1".into()),
                (4, 5, 7, "ARG1".into()),
            ]
        );
        assert_eq!(normalize_role("AM-TMP"), "ARGM-TMP");
        assert_eq!(normalize_role("R-A0"), "R-ARG0");
        assert_eq!(normalize_role("C-ARG1"), "C-ARG1");
    }

    #[test]
    fn import_writes_valid_brat() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("train.conll");
        fs::write(&input, "Barack B-PER\nObama I-PER\nvisited O\nParis B-LOC\n\nHe O\n").unwrap();
        let out = dir.path().join("out");
        let schema = builtin_schema(TaskName::Ner);
        let summary = import_corpus(CorpusFormat::Conll2003Ner, &[input], &out, &schema).unwrap();
        assert_eq!(
            summary,
            ImportSummary {
                documents: 1,
                spans: 2,
                relations: 0,
                over_length: 0
            }
        );
        assert!(brat::validate_dataset(&out, &schema).unwrap().is_empty());
    }

    #[test]
    fn unknown_label_fails_import() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("train.conll");
        fs::write(&input, "Barack B-PERSON\n").unwrap();
        let err = import_corpus(
            CorpusFormat::Conll2003Ner,
            &[input],
            &dir.path().join("out"),
            &builtin_schema(TaskName::Ner),
        )
        .unwrap_err();
        assert!(matches!(err, ImportError::Invalid { .. }));
    }
}
