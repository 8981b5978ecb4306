//! Naive reference implementations written from the metric definitions.

use spanrel::metrics::Annotations;

/// (correct, predicted, gold) by scanning: each prediction takes the first
/// unused equal gold item.
pub fn match_scan<T: PartialEq>(gold: &[T], pred: &[T]) -> (usize, usize, usize) {
    let mut used = vec![false; gold.len()];
    let mut correct = 0;
    for p in pred {
        for (i, g) in gold.iter().enumerate() {
            if !used[i] && g == p {
                used[i] = true;
                correct += 1;
                break;
            }
        }
    }
    (correct, pred.len(), gold.len())
}

pub fn prf(correct: f64, predicted: f64, gold: f64) -> (f64, f64, f64) {
    let p = if predicted > 0.0 { correct / predicted } else { 0.0 };
    let r = if gold > 0.0 { correct / gold } else { 0.0 };
    let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    (p, r, f)
}

fn summed<F>(items: &[(Annotations, Annotations)], f: F) -> (f64, f64, f64)
where
    F: Fn(&Annotations, &Annotations) -> (usize, usize, usize),
{
    let (mut c, mut p, mut g) = (0, 0, 0);
    for (gold, pred) in items {
        let (a, b, d) = f(gold, pred);
        c += a;
        p += b;
        g += d;
    }
    prf(c as f64, p as f64, g as f64)
}

pub fn span_prf(items: &[(Annotations, Annotations)]) -> (f64, f64, f64) {
    summed(items, |g, p| match_scan(&g.spans, &p.spans))
}

pub fn relation_prf(items: &[(Annotations, Annotations)]) -> (f64, f64, f64) {
    summed(items, |g, p| match_scan(&g.relations, &p.relations))
}

/// Head of token `t`: `Some(Some(h))` attached to `h`, `Some(None)` root,
/// `None` not a word.
fn head_of(a: &Annotations, t: usize) -> Option<(Option<usize>, String)> {
    for r in &a.relations {
        if (r.1).0 == t && (r.1).1 == t {
            return Some((Some((r.0).0), r.2.clone()));
        }
    }
    if a.spans.iter().any(|s| s.0 == t && s.1 == t) {
        return Some((None, "root".into()));
    }
    None
}

/// LAS, or `None` when a gold word lacks a predicted head.
pub fn las(items: &[(Annotations, Annotations)]) -> Option<f64> {
    let (mut ok, mut total) = (0, 0);
    for (g, p) in items {
        for t in 0..g.tokens {
            if let Some(gh) = head_of(g, t) {
                let ph = head_of(p, t)?;
                total += 1;
                if gh == ph {
                    ok += 1;
                }
            }
        }
    }
    Some(if total == 0 { 0.0 } else { ok as f64 / total as f64 })
}

pub type Cluster = Vec<(usize, usize)>;

/// Clusters by repeated merging until nothing changes; singletons dropped.
pub fn clusters(a: &Annotations) -> Vec<Cluster> {
    let mut groups: Vec<Cluster> = Vec::new();
    for r in &a.relations {
        groups.push(vec![r.0, r.1]);
    }
    loop {
        let mut merged = false;
        'outer: for i in 0..groups.len() {
            for j in i + 1..groups.len() {
                if groups[i].iter().any(|m| groups[j].contains(m)) {
                    let other = groups.remove(j);
                    groups[i].extend(other);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            break;
        }
    }
    for g in groups.iter_mut() {
        g.sort();
        g.dedup();
    }
    groups.retain(|g| g.len() > 1);
    groups
}

fn inter(a: &Cluster, b: &Cluster) -> usize {
    a.iter().filter(|m| b.contains(m)).count()
}

/// Vilain et al.: for each key cluster, |K| minus the number of pieces the
/// response cuts it into (mentions absent from the response are pieces of
/// their own).
fn muc_side(keys: &[Cluster], resp: &[Cluster]) -> (f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    for k in keys {
        let mut pieces = 0;
        let mut covered = 0;
        for r in resp {
            let i = inter(k, r);
            if i > 0 {
                pieces += 1;
                covered += i;
            }
        }
        pieces += k.len() - covered;
        num += (k.len() - pieces) as f64;
        den += (k.len() - 1) as f64;
    }
    (num, den)
}

/// Per-mention B-cubed: each key mention contributes |K ∩ R(m)| / |K|.
fn b3_side(keys: &[Cluster], resp: &[Cluster]) -> (f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    for k in keys {
        for m in k {
            den += 1.0;
            if let Some(r) = resp.iter().find(|r| r.contains(m)) {
                num += inter(k, r) as f64 / k.len() as f64;
            }
        }
    }
    (num, den)
}

/// Best total phi4 similarity over all injective cluster alignments.
fn ceaf_best(keys: &[Cluster], resp: &[Cluster]) -> f64 {
    fn rec(keys: &[Cluster], resp: &[Cluster], i: usize, used: &mut Vec<bool>) -> f64 {
        if i == keys.len() {
            return 0.0;
        }
        // leave key i unaligned
        let mut best = rec(keys, resp, i + 1, used);
        for j in 0..resp.len() {
            if !used[j] {
                used[j] = true;
                let phi = 2.0 * inter(&keys[i], &resp[j]) as f64 / (keys[i].len() + resp[j].len()) as f64;
                best = best.max(phi + rec(keys, resp, i + 1, used));
                used[j] = false;
            }
        }
        best
    }
    rec(keys, resp, 0, &mut vec![false; resp.len()])
}

/// (MUC, B3, CEAF-phi4) as (P, R, F1) triples, accumulated over items.
pub fn coref(items: &[(Annotations, Annotations)]) -> [(f64, f64, f64); 3] {
    let mut acc = [[0.0f64; 4]; 3];
    for (g, p) in items {
        let (gc, pc) = (clusters(g), clusters(p));
        let (rn, rd) = muc_side(&gc, &pc);
        let (pn, pd) = muc_side(&pc, &gc);
        acc[0] = [acc[0][0] + pn, acc[0][1] + pd, acc[0][2] + rn, acc[0][3] + rd];
        let (rn, rd) = b3_side(&gc, &pc);
        let (pn, pd) = b3_side(&pc, &gc);
        acc[1] = [acc[1][0] + pn, acc[1][1] + pd, acc[1][2] + rn, acc[1][3] + rd];
        let sim = ceaf_best(&gc, &pc);
        acc[2] = [
            acc[2][0] + sim,
            acc[2][1] + pc.len() as f64,
            acc[2][2] + sim,
            acc[2][3] + gc.len() as f64,
        ];
    }
    acc.map(|[pn, pd, rn, rd]| {
        let p = if pd > 0.0 { pn / pd } else { 0.0 };
        let r = if rd > 0.0 { rn / rd } else { 0.0 };
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        (p, r, f)
    })
}

/// All binary trees over leaves `b..=e`, each as its list of node spans.
pub fn binary_trees(b: usize, e: usize) -> Vec<Vec<(usize, usize)>> {
    if b == e {
        return vec![vec![(b, b)]];
    }
    let mut out = Vec::new();
    for m in b..e {
        for l in binary_trees(b, m) {
            for r in binary_trees(m + 1, e) {
                let mut t = vec![(b, e)];
                t.extend(l.iter().copied());
                t.extend(r.iter().copied());
                out.push(t);
            }
        }
    }
    out
}

/// Greedy top-down recursion recomputed from scratch: every node of the
/// binary tree with its argmax class (class 0 forbidden at the root).
pub fn greedy_nodes(n: usize, score: &dyn Fn(usize, usize) -> Vec<f64>) -> Vec<(usize, usize, usize)> {
    let best = |b: usize, e: usize| score(b, e).into_iter().fold(f64::NEG_INFINITY, f64::max);
    let mut out = Vec::new();
    let mut stack = vec![(0usize, n - 1, true)];
    while let Some((b, e, root)) = stack.pop() {
        let row = score(b, e);
        let start = if root { 1 } else { 0 };
        let mut c = start;
        for i in start..row.len() {
            if row[i] > row[c] {
                c = i;
            }
        }
        out.push((b, e, c));
        if b < e {
            let mut m_best = b;
            for m in b + 1..e {
                if best(b, m) + best(m + 1, e) > best(b, m_best) + best(m_best + 1, e) {
                    m_best = m;
                }
            }
            stack.push((m_best + 1, e, false));
            stack.push((b, m_best, false));
        }
    }
    out
}
