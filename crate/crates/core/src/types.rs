//! Sparse value types shared by every module.
//!
//! Coordinates are unbounded `u64` indices; the weight universe grows as
//! features appear. A coordinate that is absent from a [`WeightVector`] is
//! exactly zero, and stored entries are never zero.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feature or weight coordinate.
pub type Coord = u64;

/// Binary class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    /// `+1.0` or `-1.0`.
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn from_sign(value: f64) -> Label {
        if value > 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Positive => f.write_str("+1"),
            Label::Negative => f.write_str("-1"),
        }
    }
}

/// Sparse real vector with the "absent means zero" convention.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    entries: BTreeMap<Coord, f64>,
}

impl WeightVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vector from dense values, dropping zeros. Coordinate `i`
    /// holds `values[i]`.
    pub fn from_dense(values: &[f64]) -> Self {
        let mut v = Self::new();
        for (i, &x) in values.iter().enumerate() {
            v.set(i as Coord, x);
        }
        v
    }

    pub fn get(&self, coord: Coord) -> f64 {
        self.entries.get(&coord).copied().unwrap_or(0.0)
    }

    /// Stores `value`, or removes the coordinate when `value == 0`.
    ///
    /// Panics on a non-finite value.
    pub fn set(&mut self, coord: Coord, value: f64) {
        assert!(value.is_finite(), "non-finite weight at coordinate {coord}");
        if value == 0.0 {
            self.entries.remove(&coord);
        } else {
            self.entries.insert(coord, value);
        }
    }

    /// Number of stored (non-zero) entries.
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in increasing coordinate order.
    pub fn iter(&self) -> impl Iterator<Item = (Coord, f64)> + '_ {
        self.entries.iter().map(|(&c, &v)| (c, v))
    }

    pub fn coords(&self) -> impl Iterator<Item = Coord> + '_ {
        self.entries.keys().copied()
    }

    pub fn dot(&self, other: &WeightVector) -> f64 {
        let (small, large) = if self.nnz() <= other.nnz() {
            (self, other)
        } else {
            (other, self)
        };
        small.iter().map(|(c, v)| v * large.get(c)).sum()
    }

    pub fn l1_norm(&self) -> f64 {
        self.entries.values().map(|v| v.abs()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute coordinate-wise difference.
    pub fn max_abs_diff(&self, other: &WeightVector) -> f64 {
        let mut worst = 0.0f64;
        for (c, v) in self.iter() {
            worst = worst.max((v - other.get(c)).abs());
        }
        for (c, v) in other.iter() {
            if !self.entries.contains_key(&c) {
                worst = worst.max(v.abs());
            }
        }
        worst
    }

    /// Dense copy of coordinates `0..dim`.
    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (c, v) in self.iter() {
            if (c as usize) < dim {
                out[c as usize] = v;
            }
        }
        out
    }
}

impl FromIterator<(Coord, f64)> for WeightVector {
    fn from_iter<I: IntoIterator<Item = (Coord, f64)>>(iter: I) -> Self {
        let mut v = WeightVector::new();
        for (c, x) in iter {
            v.set(c, x);
        }
        v
    }
}

/// One observation: sparse features, a label and an importance weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseExample {
    features: Vec<(Coord, f64)>,
    label: Label,
    weight: f64,
}

impl SparseExample {
    /// Builds an example with unit importance weight.
    ///
    /// Features may arrive in any order; they are sorted, zero values are
    /// dropped, and duplicate coordinates or non-finite values are rejected.
    pub fn new(features: Vec<(Coord, f64)>, label: Label) -> Result<Self> {
        Self::weighted(features, label, 1.0)
    }

    pub fn weighted(mut features: Vec<(Coord, f64)>, label: Label, weight: f64) -> Result<Self> {
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(Error::Domain(format!("importance weight must be finite and >= 0, got {weight}")));
        }
        if let Some(&(c, v)) = features.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite feature value {v} at coordinate {c}")));
        }
        features.retain(|&(_, v)| v != 0.0);
        features.sort_by_key(|&(c, _)| c);
        if let Some(w) = features.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Domain(format!("duplicate coordinate {}", w[0].0)));
        }
        Ok(Self { features, label, weight })
    }

    /// Dense feature vector over coordinates `0..values.len()`.
    pub fn from_dense(values: &[f64], label: Label) -> Result<Self> {
        Self::new(values.iter().enumerate().map(|(i, &v)| (i as Coord, v)).collect(), label)
    }

    /// Features sorted by coordinate, no explicit zeros.
    pub fn features(&self) -> &[(Coord, f64)] {
        &self.features
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn with_weight(mut self, weight: f64) -> Result<Self> {
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(Error::Domain(format!("importance weight must be finite and >= 0, got {weight}")));
        }
        self.weight = weight;
        Ok(self)
    }

    pub fn dot(&self, w: &WeightVector) -> f64 {
        self.features.iter().map(|&(c, v)| v * w.get(c)).sum()
    }

    pub fn dot_dense(&self, x: &[f64]) -> f64 {
        self.features
            .iter()
            .map(|&(c, v)| x.get(c as usize).map_or(0.0, |xi| v * xi))
            .sum()
    }

    pub fn squared_norm(&self) -> f64 {
        self.features.iter().map(|(_, v)| v * v).sum()
    }

    /// Replaces the feature values, keeping coordinates, label and weight.
    pub(crate) fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::weighted(
            self.features.iter().map(|&(c, v)| (c, f(v))).collect(),
            self.label,
            self.weight,
        )
    }
}
