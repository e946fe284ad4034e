//! Explicit client → samples file.
//!
//! CSV with header `client_id,label,feature_csv_base64`; one row per sample.
//! The last column is the base64 (standard alphabet, padded) encoding of the
//! feature vector written as comma-separated `f32` values in shortest
//! round-trip decimal form.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;

use super::{FederatedDataset, Sample};
use crate::error::{Error, Result};
use crate::ClientId;

pub const MAPPING_HEADER: &str = "client_id,label,feature_csv_base64";

pub fn write_mapping<W: Write>(mut w: W, ds: &FederatedDataset) -> std::io::Result<()> {
    writeln!(w, "{MAPPING_HEADER}")?;
    let mut text = String::new();
    for (id, data) in ds.clients() {
        for s in &data.samples {
            text.clear();
            for (i, x) in s.features.iter().enumerate() {
                if i > 0 {
                    text.push(',');
                }
                text.push_str(&x.to_string());
            }
            writeln!(w, "{id},{},{}", s.label, STANDARD.encode(text.as_bytes()))?;
        }
    }
    Ok(())
}

pub fn parse_mapping<R: Read>(
    reader: R,
    source: &str,
    num_classes: usize,
    feature_dim: usize,
) -> Result<BTreeMap<ClientId, Vec<Sample>>> {
    let mut out: BTreeMap<ClientId, Vec<Sample>> = BTreeMap::new();
    let mut saw_header = false;
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if !saw_header {
            if line != MAPPING_HEADER {
                return Err(Error::csv(
                    source,
                    line_no,
                    format!("expected header `{MAPPING_HEADER}`"),
                ));
            }
            saw_header = true;
            continue;
        }
        let mut cols = line.split(',');
        let (Some(id), Some(label), Some(enc), None) =
            (cols.next(), cols.next(), cols.next(), cols.next())
        else {
            return Err(Error::csv(source, line_no, "expected 3 columns"));
        };
        let label: u32 = label
            .trim()
            .parse()
            .map_err(|_| Error::csv(source, line_no, format!("bad label `{label}`")))?;
        if label as usize >= num_classes {
            return Err(Error::csv(
                source,
                line_no,
                format!("label {label} out of range"),
            ));
        }
        let bytes = STANDARD
            .decode(enc.trim())
            .map_err(|e| Error::csv(source, line_no, format!("base64: {e}")))?;
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::csv(source, line_no, "features are not UTF-8"))?;
        let features = text
            .split(',')
            .map(|x| x.trim().parse::<f32>())
            .collect::<Result<Vec<f32>, _>>()
            .map_err(|_| Error::csv(source, line_no, "bad feature value"))?;
        if features.len() != feature_dim {
            return Err(Error::csv(
                source,
                line_no,
                format!("expected {feature_dim} features, got {}", features.len()),
            ));
        }
        out.entry(ClientId::new(id.trim()))
            .or_default()
            .push(Sample { features, label });
    }
    if !saw_header {
        return Err(Error::csv(source, 1, "missing header"));
    }
    if out.is_empty() {
        return Err(Error::csv(source, 1, "no samples"));
    }
    Ok(out)
}

pub fn read_mapping(
    path: impl AsRef<Path>,
    num_classes: usize,
    feature_dim: usize,
) -> Result<BTreeMap<ClientId, Vec<Sample>>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Invalid(format!("mapping file {}: {e}", path.display())))?;
    parse_mapping(file, &path.display().to_string(), num_classes, feature_dim)
}
