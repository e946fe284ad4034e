//! Label-flipping clients.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::feddata::Sample;
use crate::rng;
use crate::ClientId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FlipRule {
    /// `y → (y + 1) mod C`
    #[default]
    Rotate,
    /// Every label becomes the target class.
    FixedTarget(u32),
}

impl FlipRule {
    pub fn apply(self, label: u32, num_classes: usize) -> u32 {
        match self {
            FlipRule::Rotate => (label + 1) % num_classes as u32,
            FlipRule::FixedTarget(t) => t,
        }
    }
}

impl FromStr for FlipRule {
    type Err = String;

    /// `rotate` or `target:<class>`.
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("rotate") {
            return Ok(FlipRule::Rotate);
        }
        s.strip_prefix("target:")
            .and_then(|t| t.trim().parse().ok())
            .map(FlipRule::FixedTarget)
            .ok_or_else(|| format!("expected rotate|target:<class>, got `{s}`"))
    }
}

impl fmt::Display for FlipRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlipRule::Rotate => f.write_str("rotate"),
            FlipRule::FixedTarget(t) => write!(f, "target:{t}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdversarySpec {
    pub corrupted_fraction: f64,
    pub flip_rule: FlipRule,
    pub seed: u64,
}

/// `round(fraction × n)` clients chosen by a seeded shuffle of the sorted
/// population.
pub fn mark_corrupted<'a>(
    client_ids: impl IntoIterator<Item = &'a ClientId>,
    spec: &AdversarySpec,
) -> BTreeSet<ClientId> {
    let mut ids: Vec<ClientId> = client_ids.into_iter().cloned().collect();
    ids.sort();
    ids.dedup();
    let k = (spec.corrupted_fraction * ids.len() as f64).round() as usize;
    if k == 0 {
        return BTreeSet::new();
    }
    ids.shuffle(&mut rng::stream(spec.seed, "adversary.mark", 0, ""));
    ids.truncate(k);
    ids.into_iter().collect()
}

/// Training-time view of a client's data with labels flipped. The
/// underlying samples are not modified.
#[derive(Debug, Clone, Copy)]
pub struct PoisonedView<'a> {
    data: &'a [Sample],
    rule: FlipRule,
    num_classes: usize,
}

pub fn poison_view(data: &[Sample], rule: FlipRule, num_classes: usize) -> PoisonedView<'_> {
    PoisonedView {
        data,
        rule,
        num_classes,
    }
}

impl<'a> PoisonedView<'a> {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `(features, flipped_label)` pairs.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&'a [f32], u32)> + '_ {
        self.data.iter().map(|s| {
            (
                s.features.as_slice(),
                self.rule.apply(s.label, self.num_classes),
            )
        })
    }

    pub fn to_samples(&self) -> Vec<Sample> {
        self.iter()
            .map(|(features, label)| Sample {
                features: features.to_vec(),
                label,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<ClientId> {
        (0..n).map(ClientId::indexed).collect()
    }

    fn spec(fraction: f64, seed: u64) -> AdversarySpec {
        AdversarySpec {
            corrupted_fraction: fraction,
            flip_rule: FlipRule::Rotate,
            seed,
        }
    }

    #[test]
    fn marking_sizes_and_determinism() {
        let pop = ids(100);
        assert!(mark_corrupted(&pop, &spec(0.0, 1)).is_empty());
        let a = mark_corrupted(&pop, &spec(0.1, 1));
        assert_eq!(a.len(), 10);
        assert_eq!(a, mark_corrupted(&pop, &spec(0.1, 1)));
        assert_ne!(a, mark_corrupted(&pop, &spec(0.1, 2)));
        let mut reversed = pop.clone();
        reversed.reverse();
        assert_eq!(a, mark_corrupted(&reversed, &spec(0.1, 1)));
        assert_eq!(mark_corrupted(&ids(7), &spec(0.25, 0)).len(), 2);
    }

    #[test]
    fn flip_rules() {
        assert_eq!(FlipRule::Rotate.apply(3, 10), 4);
        assert_eq!(FlipRule::Rotate.apply(9, 10), 0);
        assert_eq!(FlipRule::FixedTarget(0).apply(7, 10), 0);
        assert_eq!(
            "target:3".parse::<FlipRule>().unwrap(),
            FlipRule::FixedTarget(3)
        );
        assert_eq!("rotate".parse::<FlipRule>().unwrap(), FlipRule::Rotate);
        assert!("flip".parse::<FlipRule>().is_err());
    }

    #[test]
    fn view_leaves_data_untouched() {
        let data = vec![
            Sample {
                features: vec![1.0, 2.0],
                label: 9,
            },
            Sample {
                features: vec![3.0, 4.0],
                label: 2,
            },
        ];
        let before = data.clone();
        let view = poison_view(&data, FlipRule::Rotate, 10);
        let flipped = view.to_samples();
        assert_eq!(flipped[0].label, 0);
        assert_eq!(flipped[1].label, 3);
        assert_eq!(flipped[1].features, vec![3.0, 4.0]);
        assert_eq!(data, before);
    }
}
