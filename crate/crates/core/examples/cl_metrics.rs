//! Continual-learning metrics on a hand-written accuracy matrix, and their
//! aggregation over several orderings.
//!
//! cargo run --example cl_metrics

use slotqa::evaluation::{avg_jga, bwt, fwt, AccuracyMatrix, MetricTriple, OrderReport, Report};

fn main() -> slotqa::Result<()> {
    let order: Vec<String> = ["hotel", "restaurant", "flight"].iter().map(|s| s.to_string()).collect();
    // Row t: accuracy on each service after training through service t.
    let m = AccuracyMatrix::from_rows(
        order.clone(),
        vec![
            vec![0.80, 0.30, 0.10],
            vec![0.70, 0.85, 0.25],
            vec![0.60, 0.75, 0.90],
        ],
    )?;
    println!("Avg JGA = mean of last row           = {:.4}", avg_jga(&m)?);
    println!("FWT     = mean of a[i-1][i]          = {:.4}", fwt(&m)?);
    println!("BWT     = mean of a[T][i] - a[i][i]  = {:.4}", bwt(&m)?);
    let triple = MetricTriple::compute(&m)?;
    println!("{}\n", triple.display_percent());

    let other = AccuracyMatrix::from_rows(
        vec!["flight".into(), "hotel".into(), "restaurant".into()],
        vec![
            vec![0.88, 0.20, 0.15],
            vec![0.80, 0.82, 0.30],
            vec![0.78, 0.70, 0.86],
        ],
    )?;
    let reports = [m, other]
        .into_iter()
        .enumerate()
        .map(|(i, matrix)| {
            Ok(OrderReport {
                order: matrix.order.clone(),
                seed: i as u64,
                metrics: MetricTriple::compute(&matrix)?,
                matrix,
            })
        })
        .collect::<slotqa::Result<Vec<_>>>()?;
    print!("{}", Report::aggregate(reports)?.display_percent());
    Ok(())
}
