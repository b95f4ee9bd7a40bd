//! Precomputed embedding vectors ingested from line-delimited files.
//!
//! Each line: `{"dialogue_id": "...", "turn_index": 3, "vector": [0.1, ...]}`.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::TurnId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub dialogue_id: String,
    pub turn_index: usize,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<TurnId, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, id: TurnId, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::EmbeddingDimension {
                id,
                expected: self.dim,
                actual: vector.len(),
            });
        }
        self.vectors.insert(id, vector);
        Ok(())
    }

    pub fn get(&self, id: &TurnId) -> Result<&[f64]> {
        self.vectors
            .get(id)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingEmbedding(id.clone()))
    }

    pub fn parse(text: &str, source: &Path) -> Result<Self> {
        let mut table: Option<EmbeddingTable> = None;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: EmbeddingRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
                path: source.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            if rec.vector.is_empty() {
                return Err(Error::Parse {
                    path: source.to_path_buf(),
                    line: i + 1,
                    message: "empty vector".into(),
                });
            }
            let t = table.get_or_insert_with(|| EmbeddingTable::new(rec.vector.len()));
            let id = TurnId::new(rec.dialogue_id, rec.turn_index);
            if t.vectors.contains_key(&id) {
                return Err(Error::Parse {
                    path: source.to_path_buf(),
                    line: i + 1,
                    message: format!("duplicate vector for {id}"),
                });
            }
            t.insert(id, rec.vector)?;
        }
        Ok(table.unwrap_or_default())
    }
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    EmbeddingTable::parse(&text, path)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_lookup() {
        let text = "{\"dialogue_id\":\"a\",\"turn_index\":1,\"vector\":[1.0,0.0]}\n\n{\"dialogue_id\":\"b\",\"turn_index\":2,\"vector\":[0.0,1.0]}\n";
        let t = EmbeddingTable::parse(text, Path::new("e.jsonl")).unwrap();
        assert_eq!(t.dim(), 2);
        assert_eq!(t.len(), 2);
        assert_eq!(t.get(&TurnId::new("b", 2)).unwrap(), &[0.0, 1.0]);
        assert!(matches!(t.get(&TurnId::new("c", 1)), Err(Error::MissingEmbedding(_))));
    }

    #[test]
    fn mixed_dimensions_rejected() {
        let text = "{\"dialogue_id\":\"a\",\"turn_index\":1,\"vector\":[1.0,0.0]}\n{\"dialogue_id\":\"b\",\"turn_index\":1,\"vector\":[1.0]}";
        assert!(matches!(
            EmbeddingTable::parse(text, Path::new("e")),
            Err(Error::EmbeddingDimension { expected: 2, actual: 1, .. })
        ));
    }

    #[test]
    fn duplicates_rejected() {
        let line = "{\"dialogue_id\":\"a\",\"turn_index\":1,\"vector\":[1.0]}";
        assert!(matches!(
            EmbeddingTable::parse(&format!("{line}\n{line}"), Path::new("e")),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
