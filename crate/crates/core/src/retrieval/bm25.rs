//! Okapi BM25 over an in-memory inverted index.
//!
//! score(q, d) = Σ_{t ∈ q} idf(t) · tf(t,d)·(k1+1) / (tf(t,d) + k1·(1 − b + b·|d|/avgdl))
//!
//! with the non-negative idf(t) = ln(1 + (N − df(t) + 0.5) / (df(t) + 0.5)).
//! Query terms are summed per occurrence.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.5, b: 0.75 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bm25Index {
    pub params: Bm25Params,
    doc_lens: Vec<usize>,
    avgdl: f64,
    /// term -> (document, term frequency), documents ascending
    postings: BTreeMap<String, Vec<(usize, usize)>>,
}

impl Bm25Index {
    pub fn build<D: AsRef<[String]>>(docs: &[D], params: Bm25Params) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyDatabase);
        }
        let mut postings: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
        let mut doc_lens = Vec::with_capacity(docs.len());
        for (i, doc) in docs.iter().enumerate() {
            let doc = doc.as_ref();
            doc_lens.push(doc.len());
            let mut tf: BTreeMap<&str, usize> = BTreeMap::new();
            for t in doc {
                *tf.entry(t.as_str()).or_default() += 1;
            }
            for (t, n) in tf {
                postings.entry(t.to_string()).or_default().push((i, n));
            }
        }
        let total: usize = doc_lens.iter().sum();
        let avgdl = total as f64 / doc_lens.len() as f64;
        Ok(Bm25Index {
            params,
            doc_lens,
            avgdl,
            postings,
        })
    }

    pub fn num_docs(&self) -> usize {
        self.doc_lens.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn vocabulary_size(&self) -> usize {
        self.postings.len()
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.num_docs() as f64;
        let df = self.doc_freq(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// Scores every document against the query; index order.
    pub fn score_all(&self, query: &[String]) -> Vec<f64> {
        let mut scores = vec![0.0; self.num_docs()];
        let Bm25Params { k1, b } = self.params;
        for term in query {
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            let idf = self.idf(term);
            for &(doc, tf) in list {
                let tf = tf as f64;
                let norm = if self.avgdl > 0.0 {
                    self.doc_lens[doc] as f64 / self.avgdl
                } else {
                    0.0
                };
                scores[doc] += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm));
            }
        }
        scores
    }
}
