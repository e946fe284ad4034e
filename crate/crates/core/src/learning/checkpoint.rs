//! Binary model checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! | offset | size | field                                  |
//! |--------|------|----------------------------------------|
//! | 0      | 4    | magic `FSCK`                           |
//! | 4      | 1    | version (1)                            |
//! | 5      | 1    | kind: 0 = logistic, 1 = mlp            |
//! | 6      | 4    | num_classes (u32)                      |
//! | 10     | 4    | feature_dim (u32)                      |
//! | 14     | 4    | hidden (u32, 0 for logistic)           |
//! | 18     | 4    | parameter count (u32)                  |
//! | 22     | 4·n  | parameters as f32                      |

use std::io::{Read, Write};

use super::{ModelKind, ModelState};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"FSCK";
const VERSION: u8 = 1;

pub fn write_checkpoint<W: Write>(mut w: W, model: &ModelState) -> std::io::Result<()> {
    let kind = model.kind();
    let (tag, hidden) = match kind {
        ModelKind::Logistic { .. } => (0u8, 0u32),
        ModelKind::Mlp { hidden, .. } => (1u8, hidden as u32),
    };
    w.write_all(&CHECKPOINT_MAGIC)?;
    w.write_all(&[VERSION, tag])?;
    w.write_all(&(kind.num_classes() as u32).to_le_bytes())?;
    w.write_all(&(kind.feature_dim() as u32).to_le_bytes())?;
    w.write_all(&hidden.to_le_bytes())?;
    w.write_all(&(model.params().len() as u32).to_le_bytes())?;
    for p in model.params() {
        w.write_all(&(*p as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<ModelState> {
    let mut header = [0u8; 22];
    r.read_exact(&mut header)?;
    if header[..4] != CHECKPOINT_MAGIC {
        return Err(Error::Invalid("not a checkpoint (bad magic)".into()));
    }
    if header[4] != VERSION {
        return Err(Error::Invalid(format!(
            "unsupported checkpoint version {}",
            header[4]
        )));
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap()) as usize;
    let (num_classes, feature_dim, hidden, count) = (u32_at(6), u32_at(10), u32_at(14), u32_at(18));
    let kind = match header[5] {
        0 => ModelKind::Logistic {
            num_classes,
            feature_dim,
        },
        1 => ModelKind::Mlp {
            num_classes,
            feature_dim,
            hidden,
        },
        t => return Err(Error::Invalid(format!("unknown model kind {t}"))),
    };
    if count != kind.param_count() {
        return Err(Error::DimensionMismatch {
            expected: kind.param_count(),
            got: count,
        });
    }
    let mut raw = vec![0u8; 4 * count];
    r.read_exact(&mut raw)?;
    let params = raw
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    ModelState::from_params(kind, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::init_model;

    #[test]
    fn layout_and_round_trip() {
        let kind = ModelKind::Mlp {
            num_classes: 3,
            feature_dim: 4,
            hidden: 5,
        };
        let m = init_model(kind, 1);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &m).unwrap();
        assert_eq!(buf.len(), 22 + 4 * kind.param_count());
        assert_eq!(&buf[..6], b"FSCK\x01\x01");
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back.kind(), kind);
        for (a, b) in back.params().iter().zip(m.params()) {
            assert_eq!(*a, f64::from(*b as f32));
        }
        assert!(read_checkpoint(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(bad.as_slice()).is_err());
    }
}
