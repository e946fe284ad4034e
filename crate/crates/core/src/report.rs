//! Post-run summaries computed from the CSV files a run leaves behind.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use crate::engine::{CLIENT_ACC_HEADER, TIMELINE_HEADER};
use crate::error::{Error, Result};

pub const STRAGGLER_HEADER: &str = "round,completed,nth_completion_s,median_completion_s,ratio";
pub const ACC_HIST_HEADER: &str = "bin_lo,bin_hi,clients";

#[derive(Debug, Clone, PartialEq)]
pub struct TimelineRow {
    pub round: usize,
    pub client_id: String,
    pub down_s: f64,
    pub compute_s: f64,
    pub up_s: f64,
    pub completed: bool,
}

impl TimelineRow {
    pub fn total_s(&self) -> f64 {
        self.down_s + self.compute_s + self.up_s
    }
}

fn rows<R: Read>(
    reader: R,
    source: &str,
    header: &str,
) -> Result<impl Iterator<Item = Result<(usize, Vec<String>)>>> {
    let mut lines = BufReader::new(reader).lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h.trim_end() == header => {}
        Some((_, Err(e))) => return Err(e.into()),
        _ => return Err(Error::csv(source, 1, format!("expected header `{header}`"))),
    }
    let width = header.split(',').count();
    let source = source.to_string();
    Ok(lines.filter_map(move |(i, line)| {
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(e.into())),
        };
        if line.trim().is_empty() {
            return None;
        }
        let fields: Vec<String> = line.trim_end().split(',').map(str::to_string).collect();
        if fields.len() != width {
            return Some(Err(Error::csv(
                &source,
                i + 1,
                format!("expected {width} fields, got {}", fields.len()),
            )));
        }
        Some(Ok((i + 1, fields)))
    }))
}

fn field<T: std::str::FromStr>(f: &str, source: &str, line: usize, name: &str) -> Result<T> {
    f.parse()
        .map_err(|_| Error::csv(source, line, format!("bad {name} `{f}`")))
}

pub fn parse_timelines<R: Read>(reader: R, source: &str) -> Result<Vec<TimelineRow>> {
    rows(reader, source, TIMELINE_HEADER)?
        .map(|r| {
            let (line, f) = r?;
            Ok(TimelineRow {
                round: field(&f[0], source, line, "round")?,
                client_id: f[1].clone(),
                down_s: field(&f[2], source, line, "down_s")?,
                compute_s: field(&f[3], source, line, "compute_s")?,
                up_s: field(&f[4], source, line, "up_s")?,
                completed: match f[5].as_str() {
                    "1" => true,
                    "0" => false,
                    other => {
                        return Err(Error::csv(source, line, format!("bad completed `{other}`")))
                    }
                },
            })
        })
        .collect()
}

/// Per-client accuracies from a client-accuracy CSV.
pub fn parse_client_accuracy<R: Read>(reader: R, source: &str) -> Result<BTreeMap<String, f64>> {
    rows(reader, source, CLIENT_ACC_HEADER)?
        .map(|r| {
            let (line, f) = r?;
            Ok((f[0].clone(), field(&f[3], source, line, "accuracy")?))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StragglerRow {
    pub round: usize,
    pub completed: usize,
    pub nth_s: f64,
    pub median_s: f64,
    pub ratio: f64,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Ratio of the `participants`-th completion time to the median completion
/// time, per round, over clients that completed. Without `participants`
/// (or with fewer completions) the last completion is used.
pub fn straggler_report(rows: &[TimelineRow], participants: Option<usize>) -> Vec<StragglerRow> {
    let mut by_round: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.completed) {
        by_round.entry(r.round).or_default().push(r.total_s());
    }
    by_round
        .into_iter()
        .map(|(round, mut t)| {
            t.sort_by(f64::total_cmp);
            let idx = participants.map_or(t.len(), |n| n.clamp(1, t.len())) - 1;
            let nth_s = t[idx];
            let median_s = median(&t);
            StragglerRow {
                round,
                completed: t.len(),
                nth_s,
                median_s,
                ratio: nth_s / median_s,
            }
        })
        .collect()
}

pub fn write_straggler_report<W: Write>(mut w: W, rows: &[StragglerRow]) -> std::io::Result<()> {
    writeln!(w, "{STRAGGLER_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.round, r.completed, r.nth_s, r.median_s, r.ratio
        )?;
    }
    Ok(())
}

/// Counts of client accuracies in `bins` equal-width bins over [0, 1]; an
/// accuracy of exactly 1 falls in the last bin.
pub fn accuracy_histogram(accuracies: impl IntoIterator<Item = f64>, bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    if bins == 0 {
        return counts;
    }
    for a in accuracies {
        let i = ((a.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        counts[i] += 1;
    }
    counts
}

pub fn write_accuracy_histogram<W: Write>(mut w: W, counts: &[usize]) -> std::io::Result<()> {
    writeln!(w, "{ACC_HIST_HEADER}")?;
    let bins = counts.len() as f64;
    for (i, c) in counts.iter().enumerate() {
        writeln!(w, "{},{},{c}", i as f64 / bins, (i + 1) as f64 / bins)?;
    }
    Ok(())
}
