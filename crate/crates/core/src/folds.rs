//! Seeded partitions of observations into folds.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::numerics::RngStream;

/// How held-out evaluation splits the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FoldScheme {
    /// Four quarters; train on three, test on the fourth (4 splits).
    ThreeOne,
    /// Four quarters; train on two, test on the other two (6 splits).
    TwoTwo,
    /// Ordinary K-fold cross-validation.
    KFold(usize),
}

impl FoldScheme {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "3-1" => Ok(FoldScheme::ThreeOne),
            "2-2" => Ok(FoldScheme::TwoTwo),
            other => match other.parse::<usize>() {
                Ok(k) if k >= 2 => Ok(FoldScheme::KFold(k)),
                _ => Err(Error::InvalidFolds(format!("`{other}` is not 3-1, 2-2 or an integer >= 2"))),
            },
        }
    }

    fn blocks(self) -> usize {
        match self {
            FoldScheme::ThreeOne | FoldScheme::TwoTwo => 4,
            FoldScheme::KFold(k) => k,
        }
    }
}

impl fmt::Display for FoldScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FoldScheme::ThreeOne => f.write_str("3-1"),
            FoldScheme::TwoTwo => f.write_str("2-2"),
            FoldScheme::KFold(k) => write!(f, "{k}"),
        }
    }
}

/// Training and test row indices of one split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles `0..n` and cuts it into `k` contiguous blocks of near-equal size.
pub fn shuffled_blocks(n: usize, k: usize, rng: &mut RngStream) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidFolds(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::InvalidFolds(format!("{n} observations cannot fill {k} folds")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut idx);
    Ok((0..k).map(|b| idx[b * n / k..(b + 1) * n / k].to_vec()).collect())
}

fn gather(blocks: &[Vec<usize>], which: impl Fn(usize) -> bool) -> Vec<usize> {
    let mut out: Vec<usize> = blocks.iter().enumerate().filter(|(i, _)| which(*i)).flat_map(|(_, b)| b.iter().copied()).collect();
    out.sort_unstable();
    out
}

/// Every train/test split of `scheme` over `n` observations.
pub fn splits(scheme: FoldScheme, n: usize, rng: &mut RngStream) -> Result<Vec<FoldSplit>> {
    let blocks = shuffled_blocks(n, scheme.blocks(), rng)?;
    let k = blocks.len();
    let mut out = Vec::new();
    match scheme {
        FoldScheme::ThreeOne | FoldScheme::KFold(_) => {
            for t in 0..k {
                out.push(FoldSplit { train: gather(&blocks, |i| i != t), test: gather(&blocks, |i| i == t) });
            }
        }
        FoldScheme::TwoTwo => {
            for a in 0..k {
                for b in a + 1..k {
                    let in_train = |i: usize| i == a || i == b;
                    out.push(FoldSplit { train: gather(&blocks, in_train), test: gather(&blocks, |i| !in_train(i)) });
                }
            }
        }
    }
    if out.iter().any(|s| s.train.is_empty() || s.test.is_empty()) {
        return Err(Error::InvalidFolds(scheme.to_string()));
    }
    Ok(out)
}
