use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::eval::Evaluation;
use super::timing::ClientTaskOutcome;

pub const METRICS_HEADER: &str =
    "round,virtual_time_s,selected,admitted,dropped,round_duration_s,bytes_down,bytes_up,test_accuracy";
pub const TIMELINE_HEADER: &str = "round,client_id,down_s,compute_s,up_s,completed";
pub const CLIENT_ACC_HEADER: &str = "client_id,correct,total,accuracy";

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    /// Clock value when the round closed.
    pub virtual_time_s: f64,
    pub selected: usize,
    pub admitted: usize,
    /// Clients whose availability slot ended before they finished.
    pub dropped: usize,
    /// Completed after the round closed, or tied with the last admitted
    /// completion but ordered after it; their updates are discarded.
    pub stragglers: usize,
    /// Requested minus selected.
    pub shortfall: usize,
    pub round_duration_s: f64,
    pub bytes_down: u64,
    pub bytes_up: u64,
    pub test_accuracy: Option<f64>,
    pub per_client: Vec<ClientTaskOutcome>,
}

impl RoundRecord {
    pub fn csv_row(&self) -> String {
        let acc = self
            .test_accuracy
            .map(|a| a.to_string())
            .unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.round,
            self.virtual_time_s,
            self.selected,
            self.admitted,
            self.dropped,
            self.round_duration_s,
            self.bytes_down,
            self.bytes_up,
            acc
        )
    }

    pub fn timeline_rows(&self) -> impl Iterator<Item = String> + '_ {
        self.per_client.iter().map(move |o| {
            format!(
                "{},{},{},{},{},{}",
                self.round,
                o.client_id,
                o.down_s,
                o.compute_s,
                o.up_s,
                u8::from(o.completed)
            )
        })
    }
}

/// Per-round rows of an experiment. Per-client outcomes are not retained
/// here; they go to the timeline sink as rounds finish.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    pub rows: Vec<RoundRecord>,
    pub final_eval: Option<Evaluation>,
}

impl MetricsLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(METRICS_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }

    pub fn total_bytes(&self) -> u64 {
        self.rows.iter().map(|r| r.bytes_down + r.bytes_up).sum()
    }

    pub fn total_virtual_s(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.virtual_time_s)
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        self.rows.iter().rev().find_map(|r| r.test_accuracy)
    }

    pub fn total_dropped(&self) -> usize {
        self.rows.iter().map(|r| r.dropped).sum()
    }
}

/// Second, independent tally of transferred bytes, fed by transfer events
/// rather than by the round summary.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrafficCounter {
    pub down: u64,
    pub up: u64,
    pub transfers: u64,
}

impl TrafficCounter {
    pub fn download(&mut self, bytes: u64) {
        self.down += bytes;
        self.transfers += 1;
    }

    pub fn upload(&mut self, bytes: u64) {
        self.up += bytes;
        self.transfers += 1;
    }

    pub fn total(&self) -> u64 {
        self.down + self.up
    }
}

/// Line-oriented CSV file flushed after every row, so a crash loses at
/// most the row being written.
pub struct CsvSink {
    out: BufWriter<File>,
}

impl CsvSink {
    pub fn create(path: &Path, header: &str) -> std::io::Result<Self> {
        let mut sink = CsvSink {
            out: BufWriter::new(File::create(path)?),
        };
        sink.row(header)?;
        Ok(sink)
    }

    pub fn row(&mut self, line: &str) -> std::io::Result<()> {
        self.out.write_all(line.as_bytes())?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }
}

pub fn write_client_accuracy(path: &Path, eval: &Evaluation) -> std::io::Result<()> {
    let mut sink = CsvSink::create(path, CLIENT_ACC_HEADER)?;
    for (id, c) in &eval.per_client {
        sink.row(&format!("{id},{},{},{}", c.correct, c.total, c.accuracy()))?;
    }
    Ok(())
}
