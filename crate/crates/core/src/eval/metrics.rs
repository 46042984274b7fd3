//! Confusion counts and the classification metrics reported per detector.
//! `second` is the positive class.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Label;

/// 2×2 counts; serialized as `[[tn, fp], [fn, tp]]` (rows = truth).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tp: usize,
}

impl Confusion {
    pub fn from_matrix(m: [[usize; 2]; 2]) -> Confusion {
        Confusion {
            tn: m[0][0],
            fp: m[0][1],
            fn_: m[1][0],
            tp: m[1][1],
        }
    }

    pub fn as_matrix(&self) -> [[usize; 2]; 2] {
        [[self.tn, self.fp], [self.fn_, self.tp]]
    }

    pub fn add(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::First, Label::First) => self.tn += 1,
            (Label::First, Label::Second) => self.fp += 1,
            (Label::Second, Label::First) => self.fn_ += 1,
            (Label::Second, Label::Second) => self.tp += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tn + self.fp + self.fn_ + self.tp
    }
}

impl Serialize for Confusion {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.as_matrix().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Confusion {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(Confusion::from_matrix(<[[usize; 2]; 2]>::deserialize(d)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub weighted_f1: f64,
    pub f1_first: f64,
    pub f1_second: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// F1 of one class from its true positives, false positives and false negatives.
fn class_f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    ratio(2 * tp, 2 * tp + fp + fn_)
}

pub fn metrics(c: &Confusion) -> Result<Metrics> {
    let n = c.total();
    if n == 0 {
        return Err(Error::InvalidArgument("confusion matrix is all zeros".into()));
    }
    let f1_second = class_f1(c.tp, c.fp, c.fn_);
    let f1_first = class_f1(c.tn, c.fn_, c.fp);
    let n_second = c.tp + c.fn_;
    let n_first = c.tn + c.fp;
    Ok(Metrics {
        accuracy: ratio(c.tp + c.tn, n),
        precision: ratio(c.tp, c.tp + c.fp),
        recall: ratio(c.tp, n_second),
        weighted_f1: (n_first as f64 * f1_first + n_second as f64 * f1_second) / n as f64,
        f1_first,
        f1_second,
    })
}
