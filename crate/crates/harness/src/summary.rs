use std::collections::BTreeMap;
use std::io::Read;

use serde::Serialize;

use crate::{Benchmark, Mode, RunError, RunRecord, CSV_COLUMNS};

/// Aggregates of one (benchmark, mode, threads) group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub benchmark: Benchmark,
    pub mode: Mode,
    pub threads: usize,
    pub runs: usize,
    pub wall_ms_median: f64,
    pub wall_ms_mean: f64,
    pub time_to_optimum_ms_median: Option<f64>,
    pub time_to_optimum_ms_mean: Option<f64>,
    pub nodes_expanded_median: Option<f64>,
    pub nodes_expanded_mean: Option<f64>,
    pub strip_count_median: Option<f64>,
    pub strip_count_mean: Option<f64>,
    pub second_pass_blocks_median: Option<f64>,
    pub pushes_median: f64,
    pub steals_median: f64,
    pub call_conversions_median: f64,
    pub dead_removed_median: f64,
}

/// Median of a non-empty sample; the mean of the two middle values for even
/// sizes.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn column(rows: &[&RunRecord], f: impl Fn(&RunRecord) -> Option<f64>) -> Vec<f64> {
    rows.iter().filter_map(|r| f(r)).collect()
}

/// Read run records from CSV and aggregate them, ordered by benchmark, mode
/// and thread count.
pub fn summarize(input: impl Read) -> Result<Vec<SummaryRow>, RunError> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?;
    if !header.iter().eq(CSV_COLUMNS) {
        return Err(RunError::Usage(format!(
            "unexpected CSV header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let records: Vec<RunRecord> = reader.deserialize().collect::<Result<_, _>>()?;
    let mut groups: BTreeMap<(Benchmark, Mode, usize), Vec<&RunRecord>> = BTreeMap::new();
    for r in &records {
        groups.entry((r.benchmark, r.mode, r.threads)).or_default().push(r);
    }
    Ok(groups
        .into_iter()
        .map(|((benchmark, mode, threads), rows)| {
            let wall = column(&rows, |r| Some(r.wall_ms));
            let tto = column(&rows, |r| r.time_to_optimum_ms);
            let nodes = column(&rows, |r| r.nodes_expanded.map(|x| x as f64));
            let strips = column(&rows, |r| r.strip_count.map(|x| x as f64));
            let second = column(&rows, |r| r.second_pass_blocks.map(|x| x as f64));
            let med = |f: fn(&RunRecord) -> u64| median(&column(&rows, |r| Some(f(r) as f64))).unwrap_or(0.0);
            SummaryRow {
                benchmark,
                mode,
                threads,
                runs: rows.len(),
                wall_ms_median: median(&wall).unwrap_or(0.0),
                wall_ms_mean: mean(&wall).unwrap_or(0.0),
                time_to_optimum_ms_median: median(&tto),
                time_to_optimum_ms_mean: mean(&tto),
                nodes_expanded_median: median(&nodes),
                nodes_expanded_mean: mean(&nodes),
                strip_count_median: median(&strips),
                strip_count_mean: mean(&strips),
                second_pass_blocks_median: median(&second),
                pushes_median: med(|r| r.pushes),
                steals_median: med(|r| r.steals),
                call_conversions_median: med(|r| r.call_conversions),
                dead_removed_median: med(|r| r.dead_removed),
            }
        })
        .collect())
}
