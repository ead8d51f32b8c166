//! Flat storage for every parameter of a network, addressed by [`ParamId`].

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamEntry {
    pub name: String,
    /// Index of the pooling block owning this entry, if any.
    pub block: Option<usize>,
    pub values: Vec<f64>,
    pub trainable: bool,
    /// Re-projected onto the probability simplex after every update.
    pub simplex: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, entry: ParamEntry) -> ParamId {
        self.entries.push(entry);
        ParamId(self.entries.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.entries[id.0].values
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.entries[id.0].values
    }

    pub fn entry(&self, id: ParamId) -> &ParamEntry {
        &self.entries[id.0]
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [ParamEntry] {
        &mut self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalars across all entries.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|e| e.values.len()).sum()
    }

    /// Maps a global scalar coordinate to `(entry, offset)`.
    pub fn locate(&self, mut k: usize) -> Result<(ParamId, usize)> {
        for (i, e) in self.entries.iter().enumerate() {
            if k < e.values.len() {
                return Ok((ParamId(i), k));
            }
            k -= e.values.len();
        }
        Err(Error::Shape("parameter coordinate out of range".into()))
    }

    pub fn zero_grads(&self) -> Grads {
        Grads(self.entries.iter().map(|e| vec![0.0; e.values.len()]).collect())
    }
}

/// Gradients shaped like a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads(pub(crate) Vec<Vec<f64>>);

impl Grads {
    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.0[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.0[id.0]
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.0
    }

    pub fn add_assign(&mut self, other: &Grads) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.0.iter_mut().flatten().for_each(|v| *v *= factor);
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }
}
