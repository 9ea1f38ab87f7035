//! Cost-model exploration: per-length, per-order modeled times plus the
//! selected order, as CSV or JSON.

use anyhow::Result;

use fftconv_core::plan::{cost, factorize, select_order, CostModelParams};

pub fn run(lengths: &[usize], params: &CostModelParams, batch: usize, hidden: usize, json: bool) -> Result<()> {
    let mut rows = Vec::new();
    for &n in lengths {
        let selected = select_order(n, batch, hidden, params)?;
        for p in 2..=4usize {
            if n < (1 << p) {
                continue;
            }
            let est = cost(n, p, batch, hidden, params)?;
            let factors = factorize(n, p)?
                .iter()
                .map(|f| f.to_string())
                .collect::<Vec<_>>()
                .join("x");
            rows.push((n, p, factors, est, selected == p));
        }
    }

    if json {
        println!("[");
        for (i, (n, p, factors, est, selected)) in rows.iter().enumerate() {
            let comma = if i + 1 == rows.len() { "" } else { "," };
            println!(
                "  {{\"n\": {n}, \"p\": {p}, \"factors\": \"{factors}\", \"flop_s\": {:.6e}, \"io_s\": {:.6e}, \"total_s\": {:.6e}, \"selected\": {selected}}}{comma}",
                est.flop_seconds, est.io_seconds, est.seconds
            );
        }
        println!("]");
    } else {
        println!("n,p,factors,flop_s,io_s,total_s,selected");
        for (n, p, factors, est, selected) in rows {
            println!(
                "{n},{p},{factors},{:.6e},{:.6e},{:.6e},{selected}",
                est.flop_seconds, est.io_seconds, est.seconds
            );
        }
    }
    Ok(())
}
