//! Repetition-wise train/validation/test partition.
//!
//! Every (object, tool, action) group contributes its repetitions to all
//! three parts, so each combination is seen in training and in testing.
//! The permutation of a group depends only on the seed and the group key.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::manifest::{GroupKey, Manifest, Sample};
use crate::error::{Error, Result};
use crate::seed::mix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitRatios {
    pub const fn new(train: usize, val: usize, test: usize) -> Self {
        SplitRatios { train, val, test }
    }

    /// Group size the ratios partition exactly.
    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios::new(6, 2, 2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Train,
    Val,
    Test,
}

/// Indices into the manifest's sample list, sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSet {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    pub ratios: SplitRatios,
}

impl SplitSet {
    pub fn part(&self, part: Part) -> &[usize] {
        match part {
            Part::Train => &self.train,
            Part::Val => &self.val,
            Part::Test => &self.test,
        }
    }

    pub fn samples<'a>(&'a self, m: &'a Manifest, part: Part) -> impl Iterator<Item = &'a Sample> {
        self.part(part).iter().map(move |&i| &m.samples[i])
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn group_seed(seed: u64, key: &GroupKey) -> u64 {
    mix(&[
        seed,
        u64::from(key.object_id),
        key.tool.code() as u64,
        key.action.code() as u64,
    ])
}

pub fn split_by_repetition(m: &Manifest, ratios: SplitRatios, seed: u64) -> Result<SplitSet> {
    let group_size = ratios.total();
    if group_size == 0 {
        return Err(Error::Split("ratios sum to zero".into()));
    }
    let mut groups: BTreeMap<GroupKey, Vec<(u32, usize)>> = BTreeMap::new();
    for (i, s) in m.samples.iter().enumerate() {
        groups
            .entry(s.key().group())
            .or_default()
            .push((s.repetition, i));
    }

    let mut split = SplitSet {
        train: Vec::with_capacity(m.len() * ratios.train / group_size),
        val: Vec::with_capacity(m.len() * ratios.val / group_size),
        test: Vec::with_capacity(m.len() * ratios.test / group_size),
        seed,
        ratios,
    };
    for (key, mut members) in groups {
        if members.len() != group_size {
            return Err(Error::Split(format!(
                "group {key} has {} repetitions, expected {group_size}",
                members.len()
            )));
        }
        members.sort_unstable();
        let mut rng = ChaCha8Rng::seed_from_u64(group_seed(seed, &key));
        members.shuffle(&mut rng);
        let (train, rest) = members.split_at(ratios.train);
        let (val, test) = rest.split_at(ratios.val);
        split.train.extend(train.iter().map(|&(_, i)| i));
        split.val.extend(val.iter().map(|&(_, i)| i));
        split.test.extend(test.iter().map(|&(_, i)| i));
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}
