//! CSV row types. Every row carries b, k, C, the seed and a replica count.

use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct CouplingRow {
    pub experiment: String,
    pub b: usize,
    pub k: usize,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    /// Epoch index; for `mixing/*` rows the step count t.
    pub epoch: u64,
    pub replicas: usize,
    pub coalesced: usize,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct FreezeRow {
    pub experiment: String,
    pub b: usize,
    #[serde(rename = "H")]
    pub height_tree: usize,
    pub k: usize,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub height: Option<usize>,
    pub frozen_prob: Option<f64>,
    pub not_frozen_bound: Option<f64>,
    pub critical_leaves_mean: Option<f64>,
    pub phi_estimate: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub seed: u64,
    pub replicas: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionRow {
    pub experiment: String,
    pub b: usize,
    pub k: usize,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub eps: f64,
    pub threshold: f64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub reference: f64,
    pub replicas: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub experiment: String,
    pub b: usize,
    #[serde(rename = "H")]
    pub height: usize,
    pub n: usize,
    pub k: usize,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub method: String,
    pub estimate: f64,
    pub phi_sum: Option<f64>,
    pub reached: bool,
    pub slope: f64,
    pub target: Option<f64>,
    pub slack: Option<f64>,
    pub replicas: usize,
    pub seed: u64,
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("rows serialize to CSV");
    }
    w.into_inner().expect("in-memory writer")
}
