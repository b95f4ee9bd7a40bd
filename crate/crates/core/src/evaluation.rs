//! Joint goal accuracy and continual-learning summaries of an accuracy matrix.
//!
//! `a[t][i]` is the JGA on service `i` after training stage `t` (0-based here).
//!
//! * Avg JGA = mean of the last row.
//! * FWT = mean of `a[i-1][i]` for `i = 1..T-1`.
//! * BWT = mean of `a[T-1][i] - a[i][i]` for `i = 0..T-2`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{DialogueState, TurnId};
use crate::error::{Error, Result};

pub fn jga(predictions: &[DialogueState], golds: &[DialogueState]) -> Result<f64> {
    if predictions.len() != golds.len() {
        return Err(Error::Metric(format!(
            "{} predictions for {} gold states",
            predictions.len(),
            golds.len()
        )));
    }
    if golds.is_empty() {
        return Err(Error::Metric("no turns to score".into()));
    }
    let correct = predictions.iter().zip(golds).filter(|(p, g)| p.matches(g)).count();
    Ok(correct as f64 / golds.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyMatrix {
    pub order: Vec<String>,
    /// Row = training stage, column = evaluated service. `null` when not evaluated.
    pub matrix: Vec<Vec<Option<f64>>>,
}

impl AccuracyMatrix {
    pub fn new(order: Vec<String>) -> Self {
        let t = order.len();
        AccuracyMatrix {
            order,
            matrix: vec![vec![None; t]; t],
        }
    }

    pub fn from_rows(order: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = AccuracyMatrix {
            order,
            matrix: rows.into_iter().map(|r| r.into_iter().map(Some).collect()).collect(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn size(&self) -> usize {
        self.order.len()
    }

    pub fn set(&mut self, stage: usize, service: usize, value: f64) {
        self.matrix[stage][service] = Some(value);
    }

    pub fn get(&self, stage: usize, service: usize) -> Result<f64> {
        self.matrix
            .get(stage)
            .and_then(|r| r.get(service))
            .copied()
            .flatten()
            .ok_or_else(|| Error::Metric(format!("cell a[{}][{}] is not populated", stage + 1, service + 1)))
    }

    /// Square, entries in [0, 1], lower triangle and diagonal populated.
    pub fn validate(&self) -> Result<()> {
        let t = self.size();
        if t == 0 {
            return Err(Error::Metric("empty service order".into()));
        }
        if self.matrix.len() != t || self.matrix.iter().any(|r| r.len() != t) {
            return Err(Error::Metric(format!("matrix is not {t}x{t}")));
        }
        for (s, row) in self.matrix.iter().enumerate() {
            for (i, cell) in row.iter().enumerate() {
                match cell {
                    Some(v) if !(0.0..=1.0).contains(v) => {
                        return Err(Error::Metric(format!("a[{}][{}] = {v} outside [0, 1]", s + 1, i + 1)))
                    }
                    None if i <= s => {
                        return Err(Error::Metric(format!("a[{}][{}] is missing", s + 1, i + 1)))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: AccuracyMatrix = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        m.validate()?;
        Ok(m)
    }
}

pub fn avg_jga(m: &AccuracyMatrix) -> Result<f64> {
    let t = m.size();
    let mut sum = 0.0;
    for i in 0..t {
        sum += m.get(t - 1, i)?;
    }
    Ok(sum / t as f64)
}

pub fn fwt(m: &AccuracyMatrix) -> Result<f64> {
    let t = m.size();
    if t < 2 {
        return Err(Error::Metric("FWT needs at least two services".into()));
    }
    let mut sum = 0.0;
    for i in 1..t {
        sum += m.get(i - 1, i)?;
    }
    Ok(sum / (t - 1) as f64)
}

pub fn bwt(m: &AccuracyMatrix) -> Result<f64> {
    let t = m.size();
    if t < 2 {
        return Err(Error::Metric("BWT needs at least two services".into()));
    }
    let mut sum = 0.0;
    for i in 0..t - 1 {
        sum += m.get(t - 1, i)? - m.get(i, i)?;
    }
    Ok(sum / (t - 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricTriple {
    pub avg_jga: f64,
    /// `None` for a single service.
    pub fwt: Option<f64>,
    pub bwt: Option<f64>,
}

impl MetricTriple {
    pub fn compute(m: &AccuracyMatrix) -> Result<Self> {
        let multi = m.size() >= 2;
        Ok(MetricTriple {
            avg_jga: avg_jga(m)?,
            fwt: if multi { Some(fwt(m)?) } else { None },
            bwt: if multi { Some(bwt(m)?) } else { None },
        })
    }

    /// Percentages with one decimal, e.g. `Avg JGA 54.1  FWT 10.9  BWT -3.2`.
    pub fn display_percent(&self) -> String {
        let pct = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{:.1}", 100.0 * v));
        format!(
            "Avg JGA {}  FWT {}  BWT {}",
            pct(Some(self.avg_jga)),
            pct(self.fwt),
            pct(self.bwt)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> Option<MeanStd> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some(MeanStd { mean, std })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderReport {
    pub order: Vec<String>,
    pub seed: u64,
    pub metrics: MetricTriple,
    pub matrix: AccuracyMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub avg_jga: MeanStd,
    pub fwt: Option<MeanStd>,
    pub bwt: Option<MeanStd>,
    pub per_order: Vec<OrderReport>,
}

impl Report {
    pub fn aggregate(per_order: Vec<OrderReport>) -> Result<Self> {
        let avg: Vec<f64> = per_order.iter().map(|r| r.metrics.avg_jga).collect();
        let fwt: Option<Vec<f64>> = per_order.iter().map(|r| r.metrics.fwt).collect();
        let bwt: Option<Vec<f64>> = per_order.iter().map(|r| r.metrics.bwt).collect();
        Ok(Report {
            avg_jga: mean_std(&avg).ok_or_else(|| Error::Metric("no runs to aggregate".into()))?,
            fwt: fwt.as_deref().and_then(mean_std),
            bwt: bwt.as_deref().and_then(mean_std),
            per_order,
        })
    }

    /// One line per metric, `mean ± std` in percent.
    pub fn display_percent(&self) -> String {
        let line = |name: &str, v: Option<MeanStd>| match v {
            Some(v) => format!("{name:<8} {:.1} ± {:.1}\n", 100.0 * v.mean, 100.0 * v.std),
            None => format!("{name:<8} -\n"),
        };
        let mut s = line("Avg JGA", Some(self.avg_jga));
        s.push_str(&line("FWT", self.fwt));
        s.push_str(&line("BWT", self.bwt));
        s
    }
}

/// One line of a prediction or gold state file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateRecord {
    pub dialogue_id: String,
    pub turn_index: usize,
    pub state: DialogueState,
}

impl StateRecord {
    pub fn id(&self) -> TurnId {
        TurnId::new(self.dialogue_id.clone(), self.turn_index)
    }
}

/// JGA over two state files aligned by turn id. Every gold turn needs a prediction.
pub fn jga_from_records(preds: &[StateRecord], golds: &[StateRecord]) -> Result<f64> {
    let by_id: std::collections::HashMap<TurnId, &DialogueState> =
        preds.iter().map(|r| (r.id(), &r.state)).collect();
    if by_id.len() != preds.len() {
        return Err(Error::Metric("duplicate turn ids in predictions".into()));
    }
    if preds.len() != golds.len() {
        return Err(Error::Metric(format!(
            "{} predictions for {} gold states",
            preds.len(),
            golds.len()
        )));
    }
    let mut p = Vec::with_capacity(golds.len());
    for g in golds {
        let id = g.id();
        p.push(
            (*by_id
                .get(&id)
                .ok_or_else(|| Error::Metric(format!("no prediction for turn {id}")))?)
            .clone(),
        );
    }
    let g: Vec<DialogueState> = golds.iter().map(|r| r.state.clone()).collect();
    jga(&p, &g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SlotKey;

    fn st(pairs: &[(&str, &str)]) -> DialogueState {
        pairs.iter().map(|(k, v)| (SlotKey::new("h", *k), v.to_string())).collect()
    }

    fn order(t: usize) -> Vec<String> {
        (0..t).map(|i| format!("s{i}")).collect()
    }

    #[test]
    fn jga_examples() {
        let g = vec![st(&[("a", "1")]), st(&[]), st(&[("b", "x")]), st(&[("a", "2"), ("b", "y")])];
        assert_eq!(jga(&g, &g).unwrap(), 1.0);
        let mut p = g.clone();
        p[3] = st(&[("a", "2"), ("b", "z")]);
        assert_eq!(jga(&p, &g).unwrap(), 0.75);
        let mut extra = g.clone();
        extra[1] = st(&[("a", "1")]);
        assert_eq!(jga(&extra, &g).unwrap(), 0.75);
        assert!(jga(&p[..2], &g).is_err());
        let mut cased = g.clone();
        cased[2] = st(&[("b", " X ")]);
        assert_eq!(jga(&cased, &g).unwrap(), 1.0);
    }

    #[test]
    fn avg_examples() {
        let c = AccuracyMatrix::from_rows(order(3), vec![vec![0.4; 3]; 3]).unwrap();
        assert!((avg_jga(&c).unwrap() - 0.4).abs() < 1e-12);
        let m = AccuracyMatrix::from_rows(
            order(3),
            vec![vec![0.5, 0.0, 0.0], vec![0.5, 0.5, 0.0], vec![0.6, 0.9, 0.9]],
        )
        .unwrap();
        assert!((avg_jga(&m).unwrap() - 0.8).abs() < 1e-12);
        let one = AccuracyMatrix::from_rows(order(1), vec![vec![0.7]]).unwrap();
        assert_eq!(avg_jga(&one).unwrap(), 0.7);
        assert!(fwt(&one).is_err());
        assert!(bwt(&one).is_err());
    }

    #[test]
    fn fwt_examples() {
        let m = AccuracyMatrix::from_rows(
            order(3),
            vec![vec![1.0, 0.2, 0.0], vec![1.0, 1.0, 0.4], vec![1.0, 1.0, 1.0]],
        )
        .unwrap();
        assert!((fwt(&m).unwrap() - 0.3).abs() < 1e-12);
        let z = AccuracyMatrix::from_rows(order(3), vec![vec![1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0], vec![1.0; 3]]).unwrap();
        assert_eq!(fwt(&z).unwrap(), 0.0);
        let c = AccuracyMatrix::from_rows(order(4), vec![vec![0.25; 4]; 4]).unwrap();
        assert_eq!(fwt(&c).unwrap(), 0.25);
    }

    #[test]
    fn bwt_examples() {
        let m = AccuracyMatrix::from_rows(
            order(3),
            vec![vec![0.8, 0.0, 0.0], vec![0.7, 0.5, 0.0], vec![0.6, 0.5, 0.9]],
        )
        .unwrap();
        assert!((bwt(&m).unwrap() - (-0.1)).abs() < 1e-12);
        let c = AccuracyMatrix::from_rows(order(3), vec![vec![0.3; 3]; 3]).unwrap();
        assert_eq!(bwt(&c).unwrap(), 0.0);
    }

    #[test]
    fn missing_cells_and_ranges() {
        let mut m = AccuracyMatrix::new(order(2));
        assert!(m.validate().is_err());
        m.set(0, 0, 1.0);
        m.set(1, 0, 1.0);
        m.set(1, 1, 1.0);
        m.validate().unwrap();
        assert!(fwt(&m).is_err());
        assert_eq!(bwt(&m).unwrap(), 0.0);
        m.set(1, 1, 1.5);
        assert!(m.validate().is_err());
    }

    #[test]
    fn mean_and_sample_std() {
        let ms = mean_std(&[0.5, 0.6, 0.7]).unwrap();
        assert!((ms.mean - 0.6).abs() < 1e-12);
        assert!((ms.std - 0.1).abs() < 1e-12);
        assert_eq!(mean_std(&[0.3]).unwrap().std, 0.0);
        assert!(mean_std(&[]).is_none());
    }

    #[test]
    fn percent_display() {
        let t = MetricTriple {
            avg_jga: 0.5412,
            fwt: Some(0.109),
            bwt: Some(-0.032),
        };
        assert_eq!(t.display_percent(), "Avg JGA 54.1  FWT 10.9  BWT -3.2");
    }

    #[test]
    fn record_alignment() {
        let g = vec![
            StateRecord { dialogue_id: "a".into(), turn_index: 1, state: st(&[("x", "1")]) },
            StateRecord { dialogue_id: "a".into(), turn_index: 2, state: st(&[]) },
        ];
        let mut p = g.clone();
        p.reverse();
        assert_eq!(jga_from_records(&p, &g).unwrap(), 1.0);
        p[0].dialogue_id = "b".into();
        assert!(jga_from_records(&p, &g).is_err());
    }
}
