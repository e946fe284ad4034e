//! Client system behaviour: compute speed, link capacity and availability.
//!
//! Profiles CSV: `client_id,compute_latency_ms_per_sample,down_kbps,up_kbps`.
//! Availability CSV: `client_id,start_s,end_s`, one half-open slot per row.
//! Both are plain comma-separated UTF-8 without quoting.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::rng;
use crate::ClientId;

pub const PROFILES_HEADER: &str = "client_id,compute_latency_ms_per_sample,down_kbps,up_kbps";
pub const AVAILABILITY_HEADER: &str = "client_id,start_s,end_s";

#[derive(Debug, Clone, PartialEq)]
pub struct ClientProfile {
    pub client_id: ClientId,
    pub compute_latency_ms_per_sample: f64,
    pub down_kbps: f64,
    pub up_kbps: f64,
}

impl ClientProfile {
    pub fn new(
        client_id: ClientId,
        compute_latency_ms_per_sample: f64,
        down_kbps: f64,
        up_kbps: f64,
    ) -> Result<Self> {
        for (name, v) in [
            (
                "compute_latency_ms_per_sample",
                compute_latency_ms_per_sample,
            ),
            ("down_kbps", down_kbps),
            ("up_kbps", up_kbps),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Invalid(format!(
                    "client `{client_id}`: {name} must be positive, got {v}"
                )));
            }
        }
        Ok(Self {
            client_id,
            compute_latency_ms_per_sample,
            down_kbps,
            up_kbps,
        })
    }
}

/// Half-open interval `[start_s, end_s)` of simulated seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slot {
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AvailabilityTrace {
    client_id: ClientId,
    slots: Vec<Slot>,
}

impl AvailabilityTrace {
    /// Slots must be sorted, non-overlapping and non-empty intervals.
    pub fn new(client_id: ClientId, slots: Vec<Slot>) -> Result<Self> {
        for s in &slots {
            if !(s.start_s.is_finite() && s.end_s.is_finite() && s.start_s < s.end_s) {
                return Err(Error::Invalid(format!(
                    "client `{client_id}`: slot [{}, {}) is empty or not finite",
                    s.start_s, s.end_s
                )));
            }
        }
        if let Some(w) = slots.windows(2).find(|w| w[1].start_s < w[0].end_s) {
            return Err(Error::Invalid(format!(
                "client `{client_id}`: slots [{}, {}) and [{}, {}) overlap or are unsorted",
                w[0].start_s, w[0].end_s, w[1].start_s, w[1].end_s
            )));
        }
        Ok(Self { client_id, slots })
    }

    pub fn client_id(&self) -> &ClientId {
        &self.client_id
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    /// The slot containing `t`, if any.
    pub fn containing(&self, t: f64) -> Option<&Slot> {
        let idx = self.slots.partition_point(|s| s.end_s <= t);
        self.slots.get(idx).filter(|s| s.start_s <= t)
    }

    pub fn is_available(&self, t: f64) -> bool {
        self.containing(t).is_some()
    }

    /// Seconds left in the slot containing `t`, if any.
    pub fn remaining_slot(&self, t: f64) -> Option<f64> {
        self.containing(t).map(|s| s.end_s - t)
    }
}

/// A complete set of traces for a population.
#[derive(Debug, Clone, Default)]
pub struct TraceSet {
    pub profiles: BTreeMap<ClientId, ClientProfile>,
    pub availability: BTreeMap<ClientId, AvailabilityTrace>,
}

impl TraceSet {
    pub fn profile(&self, id: &ClientId) -> Option<&ClientProfile> {
        self.profiles.get(id)
    }

    /// A client without an availability trace is never available.
    pub fn is_available(&self, id: &ClientId, t: f64) -> bool {
        self.availability.get(id).is_some_and(|a| a.is_available(t))
    }

    /// End of the slot containing `t`.
    pub fn slot_end(&self, id: &ClientId, t: f64) -> Option<f64> {
        self.availability
            .get(id)
            .and_then(|a| a.containing(t))
            .map(|s| s.end_s)
    }
}

fn csv_rows<R: Read>(reader: R, source: &str, header: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let mut rows = Vec::new();
    let expected_cols = header.split(',').count();
    let mut saw_header = false;
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if !saw_header {
            if line != header {
                return Err(Error::csv(
                    source,
                    idx + 1,
                    format!("expected header `{header}`"),
                ));
            }
            saw_header = true;
            continue;
        }
        let cols: Vec<String> = line.split(',').map(|c| c.trim().to_owned()).collect();
        if cols.len() != expected_cols {
            return Err(Error::csv(
                source,
                idx + 1,
                format!("expected {expected_cols} columns, got {}", cols.len()),
            ));
        }
        rows.push((idx + 1, cols));
    }
    if !saw_header {
        return Err(Error::csv(source, 1, "missing header"));
    }
    Ok(rows)
}

fn parse_f64(source: &str, line: usize, name: &str, s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::csv(source, line, format!("{name}: `{s}` is not a number")))
}

pub fn parse_profiles<R: Read>(
    reader: R,
    source: &str,
) -> Result<BTreeMap<ClientId, ClientProfile>> {
    let mut out = BTreeMap::new();
    for (line, cols) in csv_rows(reader, source, PROFILES_HEADER)? {
        let id = ClientId::new(cols[0].clone());
        if id.as_str().is_empty() {
            return Err(Error::csv(source, line, "empty client_id"));
        }
        let latency = parse_f64(source, line, "compute_latency_ms_per_sample", &cols[1])?;
        let down = parse_f64(source, line, "down_kbps", &cols[2])?;
        let up = parse_f64(source, line, "up_kbps", &cols[3])?;
        let profile = ClientProfile::new(id.clone(), latency, down, up)
            .map_err(|e| Error::csv(source, line, e.to_string()))?;
        if out.insert(id.clone(), profile).is_some() {
            return Err(Error::DuplicateClient(id.to_string()));
        }
    }
    Ok(out)
}

pub fn load_profiles(path: impl AsRef<Path>) -> Result<BTreeMap<ClientId, ClientProfile>> {
    let path = path.as_ref();
    parse_profiles(std::fs::File::open(path)?, &path.display().to_string())
}

/// Rows for one client may appear in any order; they are sorted by start
/// time and then validated.
pub fn parse_availability<R: Read>(
    reader: R,
    source: &str,
) -> Result<BTreeMap<ClientId, AvailabilityTrace>> {
    let mut slots: BTreeMap<ClientId, Vec<Slot>> = BTreeMap::new();
    for (line, cols) in csv_rows(reader, source, AVAILABILITY_HEADER)? {
        let start_s = parse_f64(source, line, "start_s", &cols[1])?;
        let end_s = parse_f64(source, line, "end_s", &cols[2])?;
        if !(start_s >= 0.0 && start_s < end_s && end_s.is_finite()) {
            return Err(Error::csv(
                source,
                line,
                format!("bad slot [{start_s}, {end_s})"),
            ));
        }
        slots
            .entry(ClientId::new(cols[0].clone()))
            .or_default()
            .push(Slot { start_s, end_s });
    }
    slots
        .into_iter()
        .map(|(id, mut s)| {
            s.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
            Ok((id.clone(), AvailabilityTrace::new(id, s)?))
        })
        .collect()
}

pub fn load_availability(path: impl AsRef<Path>) -> Result<BTreeMap<ClientId, AvailabilityTrace>> {
    let path = path.as_ref();
    parse_availability(std::fs::File::open(path)?, &path.display().to_string())
}

pub fn write_profiles<'a, W: Write>(
    mut w: W,
    profiles: impl IntoIterator<Item = &'a ClientProfile>,
) -> std::io::Result<()> {
    writeln!(w, "{PROFILES_HEADER}")?;
    for p in profiles {
        writeln!(
            w,
            "{},{},{},{}",
            p.client_id, p.compute_latency_ms_per_sample, p.down_kbps, p.up_kbps
        )?;
    }
    Ok(())
}

pub fn write_availability<'a, W: Write>(
    mut w: W,
    traces: impl IntoIterator<Item = &'a AvailabilityTrace>,
) -> std::io::Result<()> {
    writeln!(w, "{AVAILABILITY_HEADER}")?;
    for t in traces {
        for s in t.slots() {
            writeln!(w, "{},{},{}", t.client_id, s.start_s, s.end_s)?;
        }
    }
    Ok(())
}

/// Parameters for synthetic traces.
///
/// Capacities are log-uniform between the min and max of each dimension.
/// Availability alternates on/off slots with exponential lengths; the
/// off-slot mean is modulated so that the instantaneous on-probability
/// follows `p̄·(1 + A·cos(2π(h − peak_hour)/24))`, where
/// `p̄ = on_mean / (on_mean + off_mean)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeterogeneitySpec {
    pub latency_min_ms: f64,
    pub latency_max_ms: f64,
    pub bandwidth_min_kbps: f64,
    pub bandwidth_max_kbps: f64,
    pub on_mean_s: f64,
    pub off_mean_s: f64,
    pub diurnal_amplitude: f64,
    pub peak_hour: f64,
    pub horizon_s: f64,
}

impl Default for HeterogeneitySpec {
    fn default() -> Self {
        Self {
            latency_min_ms: 5.0,
            latency_max_ms: 50.0,
            bandwidth_min_kbps: 2_000.0,
            bandwidth_max_kbps: 20_000.0,
            on_mean_s: 600.0,
            off_mean_s: 1800.0,
            diurnal_amplitude: 0.6,
            peak_hour: 2.0,
            horizon_s: 7.0 * 86_400.0,
        }
    }
}

impl HeterogeneitySpec {
    /// Profile used for every client when traces are disabled: the
    /// geometric midpoint of each capacity range.
    pub fn uniform_profile(&self, client_id: ClientId) -> ClientProfile {
        let bw = (self.bandwidth_min_kbps * self.bandwidth_max_kbps).sqrt();
        ClientProfile {
            client_id,
            compute_latency_ms_per_sample: (self.latency_min_ms * self.latency_max_ms).sqrt(),
            down_kbps: bw,
            up_kbps: bw,
        }
    }

    fn on_probability(&self, t: f64) -> f64 {
        let mean = self.on_mean_s / (self.on_mean_s + self.off_mean_s);
        let hour = (t / 3600.0) % 24.0;
        let phase = std::f64::consts::TAU * (hour - self.peak_hour) / 24.0;
        (mean * (1.0 + self.diurnal_amplitude * phase.cos())).clamp(0.01, 0.99)
    }
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        return lo;
    }
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

fn synth_slots<R: Rng>(rng: &mut R, spec: &HeterogeneitySpec) -> Vec<Slot> {
    let mut slots = Vec::new();
    let mut t = 0.0;
    let mut on = rng.random::<f64>() < spec.on_probability(0.0);
    while t < spec.horizon_s {
        let unit: f64 = Exp1.sample(rng);
        if on {
            let end = (t + unit * spec.on_mean_s).min(spec.horizon_s);
            if end > t {
                slots.push(Slot {
                    start_s: t,
                    end_s: end,
                });
            }
            t = end;
        } else {
            let p = spec.on_probability(t);
            t += unit * spec.on_mean_s * (1.0 - p) / p;
        }
        on = !on;
    }
    if slots.is_empty() {
        slots.push(Slot {
            start_s: 0.0,
            end_s: spec.on_mean_s.min(spec.horizon_s),
        });
    }
    slots
}

/// Synthetic profiles and availability for clients `c000000..`.
///
/// Each client draws from its own stream, so client `i` gets the same
/// traces regardless of `n_clients`.
pub fn synth_traces(n_clients: usize, seed: u64, spec: &HeterogeneitySpec) -> TraceSet {
    let mut set = TraceSet::default();
    for i in 0..n_clients {
        let id = ClientId::indexed(i);
        let mut prof_rng = rng::stream(seed, "trace.profile", 0, id.as_str());
        let profile = ClientProfile {
            client_id: id.clone(),
            compute_latency_ms_per_sample: log_uniform(
                &mut prof_rng,
                spec.latency_min_ms,
                spec.latency_max_ms,
            ),
            down_kbps: log_uniform(
                &mut prof_rng,
                spec.bandwidth_min_kbps,
                spec.bandwidth_max_kbps,
            ),
            up_kbps: log_uniform(
                &mut prof_rng,
                spec.bandwidth_min_kbps,
                spec.bandwidth_max_kbps,
            ),
        };
        let mut avail_rng = rng::stream(seed, "trace.availability", 0, id.as_str());
        let slots = synth_slots(&mut avail_rng, spec);
        set.profiles.insert(id.clone(), profile);
        set.availability.insert(
            id.clone(),
            AvailabilityTrace::new(id, slots).expect("generator emits sorted disjoint slots"),
        );
    }
    set
}
