//! Hard positive / hard negative mining with the Oracle ranking.
//!
//! For each anchor turn the remaining turns are Oracle-ranked, the top
//! `top_n` are kept, and the first `hard` and last `hard` of that list become
//! positives and negatives. Pair texts are query texts only.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{TurnId, TurnRecord};
use crate::error::{Error, Result};
use crate::retrieval::{Bm25Params, ExclusionPolicy, QueryText};
use crate::similarity::{rank_prepared, PreparedTurn};
use crate::text::Tokenizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairingMode {
    /// Every positive with every negative (`hard²` pairs per anchor).
    CrossProduct,
    /// i-th positive with i-th negative (`hard` pairs per anchor).
    RankAligned,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairExportOptions {
    pub top_n: usize,
    pub hard: usize,
    pub mode: PairingMode,
    pub bm25: Bm25Params,
    /// Candidates are all other turns unless this also drops same-dialogue turns.
    pub exclusion: ExclusionPolicy,
}

impl Default for PairExportOptions {
    fn default() -> Self {
        PairExportOptions {
            top_n: 200,
            hard: 10,
            mode: PairingMode::CrossProduct,
            bm25: Bm25Params::default(),
            exclusion: ExclusionPolicy { same_dialogue: false },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContrastivePair {
    pub anchor_id: TurnId,
    pub positive_id: TurnId,
    pub negative_id: TurnId,
    pub anchor: QueryText,
    pub positive: QueryText,
    pub negative: QueryText,
}

pub fn mine_contrastive_pairs<T: Tokenizer + ?Sized>(
    turns: &[&TurnRecord],
    tokenizer: &T,
    opts: &PairExportOptions,
) -> Result<Vec<ContrastivePair>> {
    let prepared: Vec<PreparedTurn> = turns.iter().map(|t| PreparedTurn::new(t, tokenizer)).collect();
    let texts: Vec<QueryText> = turns.iter().map(|t| QueryText::from_turn(t)).collect();
    let position: std::collections::HashMap<&TurnId, usize> =
        prepared.iter().enumerate().map(|(i, p)| (&p.id, i)).collect();

    let mut out = Vec::new();
    for (a, anchor) in prepared.iter().enumerate() {
        let cands: Vec<&PreparedTurn> = prepared
            .iter()
            .filter(|c| !opts.exclusion.excludes(&anchor.id, &c.id))
            .collect();
        let required = 2 * opts.hard;
        if cands.len() < required {
            return Err(Error::TooFewCandidates {
                anchor: anchor.id.clone(),
                available: cands.len(),
                required,
            });
        }
        let mut ranked = rank_prepared(anchor, &cands, opts.bm25);
        ranked.truncate(opts.top_n.max(required));
        let positives = &ranked[..opts.hard];
        let negatives = &ranked[ranked.len() - opts.hard..];

        let mut push = |p: &TurnId, n: &TurnId| {
            out.push(ContrastivePair {
                anchor_id: anchor.id.clone(),
                positive_id: p.clone(),
                negative_id: n.clone(),
                anchor: texts[a].clone(),
                positive: texts[position[p]].clone(),
                negative: texts[position[n]].clone(),
            })
        };
        match opts.mode {
            PairingMode::CrossProduct => {
                for p in positives {
                    for n in negatives {
                        push(&p.candidate_id, &n.candidate_id);
                    }
                }
            }
            PairingMode::RankAligned => {
                for (p, n) in positives.iter().zip(negatives) {
                    push(&p.candidate_id, &n.candidate_id);
                }
            }
        }
    }
    Ok(out)
}

/// Writes one JSON pair per line and returns the pair count.
pub fn write_pairs(pairs: &[ContrastivePair], out: &mut impl Write) -> std::io::Result<()> {
    for p in pairs {
        serde_json::to_writer(&mut *out, p)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Mines pairs over `turns` (the full train split of the first service) and writes the pair file.
pub fn export_contrastive_pairs<T: Tokenizer + ?Sized>(
    turns: &[&TurnRecord],
    tokenizer: &T,
    opts: &PairExportOptions,
    out_path: impl AsRef<Path>,
) -> Result<usize> {
    let pairs = mine_contrastive_pairs(turns, tokenizer, opts)?;
    let path = out_path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_pairs(&pairs, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))?;
    Ok(pairs.len())
}
