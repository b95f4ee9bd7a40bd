//! Reference implementations used as test oracles. Written directly from the
//! formulas, sharing no code with the library.

#![allow(dead_code)]

/// Okapi BM25 with idf = ln(1 + (N - df + 0.5) / (df + 0.5)), one term per query token occurrence.
pub fn ref_bm25(docs: &[Vec<String>], query: &[String], k1: f64, b: f64) -> Vec<f64> {
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(|d| d.len()).sum::<usize>() as f64 / n;
    docs.iter()
        .map(|d| {
            let mut score = 0.0;
            for q in query {
                let df = docs.iter().filter(|x| x.contains(q)).count() as f64;
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                let f = d.iter().filter(|t| *t == q).count() as f64;
                if f == 0.0 {
                    continue;
                }
                let norm = k1 * (1.0 - b + b * d.len() as f64 / avgdl);
                score += idf * f * (k1 + 1.0) / (f + norm);
            }
            score
        })
        .collect()
}

/// A delta entry as plain strings: (domain-slot, op, value).
pub type Entry = (String, String, String);

fn dedup<T: PartialEq + Clone>(v: &[T]) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for x in v {
        if !out.contains(x) {
            out.push(x.clone());
        }
    }
    out
}

/// F1 with `pred` as prediction and `gold` as reference.
pub fn directional_f1<T: PartialEq + Clone>(pred: &[T], gold: &[T]) -> f64 {
    let (p, g) = (dedup(pred), dedup(gold));
    let hits = p.iter().filter(|x| g.contains(x)).count() as f64;
    if hits == 0.0 {
        return 0.0;
    }
    let precision = hits / p.len() as f64;
    let recall = hits / g.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// SCS as the average of the two directional F1 scores for each view.
pub fn ref_scs(a: &[Entry], b: &[Entry]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let keys = |d: &[Entry]| -> Vec<String> { d.iter().map(|(k, o, _)| format!("{k}|{o}")).collect() };
    let pairs = |d: &[Entry]| -> Vec<String> { d.iter().map(|(k, o, v)| format!("{k}|{o}|{v}")).collect() };
    let slot = 0.5 * (directional_f1(&keys(a), &keys(b)) + directional_f1(&keys(b), &keys(a)));
    let value = 0.5 * (directional_f1(&pairs(a), &pairs(b)) + directional_f1(&pairs(b), &pairs(a)));
    0.5 * (slot + value)
}

pub fn ref_avg_jga(a: &[Vec<f64>]) -> f64 {
    let t = a.len();
    let mut s = 0.0;
    for v in &a[t - 1] {
        s += v;
    }
    s / t as f64
}

pub fn ref_fwt(a: &[Vec<f64>]) -> f64 {
    let t = a.len();
    let mut s = 0.0;
    for i in 2..=t {
        s += a[i - 2][i - 1];
    }
    s / (t - 1) as f64
}

pub fn ref_bwt(a: &[Vec<f64>]) -> f64 {
    let t = a.len();
    let mut s = 0.0;
    for i in 1..t {
        s += a[t - 1][i - 1] - a[i - 1][i - 1];
    }
    s / (t - 1) as f64
}

/// Every file under `dir` as (relative path, bytes), sorted by path.
pub fn tree_bytes(dir: &std::path::Path) -> Vec<(std::path::PathBuf, Vec<u8>)> {
    fn walk(root: &std::path::Path, dir: &std::path::Path, out: &mut Vec<(std::path::PathBuf, Vec<u8>)>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}
