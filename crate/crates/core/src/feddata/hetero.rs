use std::io::Write;

use rand::Rng;

use super::FederatedDataset;
use crate::error::{Error, Result};
use crate::rng;
use crate::ClientId;

/// Upper bound on the number of client pairs compared in a report.
pub const PAIR_CAP: usize = 10_000;

const NORM_TOL: f64 = 1e-9;

/// Jensen–Shannon distance with base-2 logarithms, in `[0, 1]`.
pub fn js_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    for (name, v) in [("p", p), ("q", q)] {
        if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::Invalid(format!(
                "{name} has negative or non-finite entries"
            )));
        }
        let sum: f64 = v.iter().sum();
        if (sum - 1.0).abs() > NORM_TOL {
            return Err(Error::Invalid(format!("{name} sums to {sum}, not 1")));
        }
    }
    // KL(a ‖ m) with 0·log 0 = 0; m > 0 wherever a > 0
    let kl_to_mid = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .filter(|(x, _)| **x > 0.0)
            .map(|(x, y)| x * (2.0 * x / (x + y)).log2())
            .sum()
    };
    let jsd = 0.5 * kl_to_mid(p, q) + 0.5 * kl_to_mid(q, p);
    Ok(jsd.clamp(0.0, 1.0).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeterogeneityReport {
    pub sample_counts: Vec<(ClientId, usize)>,
    /// `(lo, hi, clients)` over power-of-two buckets `[lo, hi)`.
    pub count_histogram: Vec<(usize, usize, usize)>,
    pub pairwise_js: Vec<f64>,
}

impl HeterogeneityReport {
    pub fn mean_js(&self) -> f64 {
        if self.pairwise_js.is_empty() {
            return 0.0;
        }
        self.pairwise_js.iter().sum::<f64>() / self.pairwise_js.len() as f64
    }

    /// `metric,value` rows; distribution rows repeat the metric name.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let counts: Vec<usize> = self.sample_counts.iter().map(|(_, c)| *c).collect();
        let total: usize = counts.iter().sum();
        let mut sorted = counts.clone();
        sorted.sort_unstable();
        let mut js = self.pairwise_js.clone();
        js.sort_by(f64::total_cmp);
        writeln!(w, "metric,value")?;
        writeln!(w, "num_clients,{}", counts.len())?;
        writeln!(w, "total_samples,{total}")?;
        writeln!(
            w,
            "mean_samples,{}",
            total as f64 / counts.len().max(1) as f64
        )?;
        writeln!(
            w,
            "median_samples,{}",
            sorted.get(sorted.len() / 2).copied().unwrap_or(0)
        )?;
        writeln!(w, "pairs_sampled,{}", js.len())?;
        writeln!(w, "mean_js_distance,{}", self.mean_js())?;
        writeln!(
            w,
            "median_js_distance,{}",
            js.get(js.len() / 2).copied().unwrap_or(0.0)
        )?;
        for (lo, hi, n) in &self.count_histogram {
            writeln!(w, "samples_hist.{lo}-{hi},{n}")?;
        }
        for (id, c) in &self.sample_counts {
            writeln!(w, "client_samples.{id},{c}")?;
        }
        for d in &self.pairwise_js {
            writeln!(w, "js_distance,{d}")?;
        }
        Ok(())
    }
}

/// Sample sizes and pairwise label-distribution distances.
///
/// All pairs are compared when there are at most [`PAIR_CAP`] of them;
/// otherwise `PAIR_CAP` distinct-client pairs are drawn at random.
pub fn heterogeneity_report(ds: &FederatedDataset, seed: u64) -> Result<HeterogeneityReport> {
    let ids: Vec<&ClientId> = ds.clients().keys().collect();
    let n = ids.len();
    if n < 2 {
        return Err(Error::Invalid(
            "heterogeneity report needs >= 2 clients".into(),
        ));
    }
    let dists: Vec<Vec<f64>> = ids
        .iter()
        .map(|id| ds.label_distribution(id).expect("id from dataset"))
        .collect();
    let sample_counts: Vec<(ClientId, usize)> = ds
        .clients()
        .iter()
        .map(|(id, d)| (id.clone(), d.samples.len()))
        .collect();

    let mut count_histogram = Vec::new();
    let max = sample_counts.iter().map(|(_, c)| *c).max().unwrap_or(1);
    let mut lo = 1;
    while lo <= max {
        let hi = lo * 2;
        let k = sample_counts
            .iter()
            .filter(|(_, c)| (lo..hi).contains(c))
            .count();
        count_histogram.push((lo, hi, k));
        lo = hi;
    }

    let total_pairs = n * (n - 1) / 2;
    let mut pairwise_js = Vec::with_capacity(total_pairs.min(PAIR_CAP));
    if total_pairs <= PAIR_CAP {
        for i in 0..n {
            for j in i + 1..n {
                pairwise_js.push(js_distance(&dists[i], &dists[j])?);
            }
        }
    } else {
        let mut rng = rng::stream(seed, "report.pairs", 0, "");
        for _ in 0..PAIR_CAP {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            pairwise_js.push(js_distance(&dists[i], &dists[j])?);
        }
    }
    Ok(HeterogeneityReport {
        sample_counts,
        count_histogram,
        pairwise_js,
    })
}
