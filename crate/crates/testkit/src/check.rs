//! Structural validity of decoder outputs.

use std::collections::BTreeSet;

use spanrel::decoders::Prediction;

/// Labeled brackets nest without crossing and the root bracket covers the
/// whole sentence.
pub fn constituency(pred: &Prediction, n: usize) -> Result<(), String> {
    let spans: Vec<(usize, usize)> = pred.spans.iter().map(|s| (s.begin, s.end)).collect();
    if !spans.contains(&(0, n - 1)) {
        return Err(format!("no root bracket over (0, {})", n - 1));
    }
    for &(b, e) in &spans {
        if b > e || e >= n {
            return Err(format!("bracket ({b}, {e}) out of range"));
        }
    }
    for (i, a) in spans.iter().enumerate() {
        for b in &spans[i + 1..] {
            if a == b {
                return Err(format!("duplicate bracket {a:?}"));
            }
            let crossing = (a.0 < b.0 && b.0 <= a.1 && a.1 < b.1) || (b.0 < a.0 && a.0 <= b.1 && b.1 < a.1);
            if crossing {
                return Err(format!("brackets {a:?} and {b:?} cross"));
            }
        }
    }
    Ok(())
}

/// Every word has exactly one parent (a word or the root) and exactly one
/// word is attached to the root.
pub fn dependency(pred: &Prediction, n: usize) -> Result<(), String> {
    let mut parents = vec![0usize; n];
    for r in &pred.relations {
        let t = pred.spans[r.tail].begin;
        let h = pred.spans[r.head].begin;
        if h == t {
            return Err(format!("word {t} is its own head"));
        }
        parents[t] += 1;
    }
    for &r in &pred.roots {
        parents[pred.spans[r].begin] += 1;
    }
    if let Some(t) = parents.iter().position(|&c| c != 1) {
        return Err(format!("word {t} has {} parents", parents[t]));
    }
    if pred.roots.len() != 1 {
        return Err(format!("{} root attachments", pred.roots.len()));
    }
    Ok(())
}

/// Clusters are disjoint, have at least two members, and are exactly the
/// connected components of the predicted links; links point backwards.
pub fn coref(pred: &Prediction) -> Result<(), String> {
    let mut seen = BTreeSet::new();
    for c in &pred.clusters {
        if c.len() < 2 {
            return Err("singleton cluster".into());
        }
        for &m in c {
            if !seen.insert(m) {
                return Err(format!("mention {m} in two clusters"));
            }
        }
    }
    let linked: BTreeSet<usize> = pred.relations.iter().flat_map(|r| [r.head, r.tail]).collect();
    if linked != seen {
        return Err("clustered mentions differ from linked mentions".into());
    }
    let cluster_of = |m: usize| pred.clusters.iter().position(|c| c.contains(&m));
    for r in &pred.relations {
        if cluster_of(r.head) != cluster_of(r.tail) {
            return Err("link crosses clusters".into());
        }
        let (anaphor, antecedent) = (&pred.spans[r.head], &pred.spans[r.tail]);
        if (antecedent.begin, antecedent.end) >= (anaphor.begin, anaphor.end) {
            return Err("antecedent does not precede its anaphor".into());
        }
    }
    Ok(())
}
