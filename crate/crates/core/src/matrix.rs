//! Sparse user x item rating matrix.
//!
//! Entries are stored row-compressed and sorted by `(row, col)`; the set of
//! stored cells is the observation mask. Every stored cell carries a
//! [`Provenance`] so that imputed values can be told apart from ratings a
//! user actually gave.

use std::collections::HashMap;

use crate::error::{Error, Result};

pub const RATING_MIN: f64 = 1.0;
pub const RATING_MAX: f64 = 10.0;

/// Clamp a prediction onto the explicit rating scale.
pub fn clip_rating(value: f64) -> f64 {
    value.clamp(RATING_MIN, RATING_MAX)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Provenance {
    Observed,
    Imputed,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Observed => "observed",
            Provenance::Imputed => "imputed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "observed" => Some(Provenance::Observed),
            "imputed" => Some(Provenance::Imputed),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Entry {
    pub row: usize,
    pub col: usize,
    pub value: f64,
    pub provenance: Provenance,
}

impl Entry {
    pub fn observed(row: usize, col: usize, value: f64) -> Self {
        Entry {
            row,
            col,
            value,
            provenance: Provenance::Observed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatingMatrix {
    users: Vec<String>,
    items: Vec<String>,
    user_lookup: HashMap<String, usize>,
    item_lookup: HashMap<String, usize>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
    provenance: Vec<Provenance>,
}

fn lookup(ids: &[String], what: &str) -> Result<HashMap<String, usize>> {
    let mut map = HashMap::with_capacity(ids.len());
    for (idx, id) in ids.iter().enumerate() {
        if id.is_empty() {
            return Err(Error::Config(format!("empty {what} id at index {idx}")));
        }
        if map.insert(id.clone(), idx).is_some() {
            return Err(Error::Config(format!("duplicate {what} id {id:?}")));
        }
    }
    Ok(map)
}

impl RatingMatrix {
    /// Build a matrix over an explicit index space. `users[r]` names row `r`
    /// and `items[c]` names column `c`; entries may come in any order.
    pub fn from_entries(users: Vec<String>, items: Vec<String>, mut entries: Vec<Entry>) -> Result<Self> {
        let user_lookup = lookup(&users, "user")?;
        let item_lookup = lookup(&items, "item")?;
        let (rows, ncols) = (users.len(), items.len());

        for e in &entries {
            if e.row >= rows || e.col >= ncols {
                return Err(Error::IndexOutOfRange {
                    row: e.row,
                    col: e.col,
                    rows,
                    cols: ncols,
                });
            }
            if !(RATING_MIN..=RATING_MAX).contains(&e.value) {
                return Err(Error::Config(format!(
                    "rating {} at ({}, {}) outside [{RATING_MIN}, {RATING_MAX}]",
                    e.value, e.row, e.col
                )));
            }
        }
        entries.sort_by_key(|e| (e.row, e.col));
        if let Some(w) = entries.windows(2).find(|w| (w[0].row, w[0].col) == (w[1].row, w[1].col)) {
            return Err(Error::Config(format!("duplicate cell ({}, {})", w[0].row, w[0].col)));
        }

        let mut row_ptr = vec![0usize; rows + 1];
        for e in &entries {
            row_ptr[e.row + 1] += 1;
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }

        Ok(RatingMatrix {
            users,
            items,
            user_lookup,
            item_lookup,
            row_ptr,
            cols: entries.iter().map(|e| e.col).collect(),
            values: entries.iter().map(|e| e.value).collect(),
            provenance: entries.iter().map(|e| e.provenance).collect(),
        })
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    /// Number of stored cells (observed and imputed).
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn n_observed(&self) -> usize {
        self.provenance.iter().filter(|p| **p == Provenance::Observed).count()
    }

    pub fn n_imputed(&self) -> usize {
        self.nnz() - self.n_observed()
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn user_id(&self, row: usize) -> Option<&str> {
        self.users.get(row).map(String::as_str)
    }

    pub fn item_id(&self, col: usize) -> Option<&str> {
        self.items.get(col).map(String::as_str)
    }

    pub fn user_index(&self, user_id: &str) -> Option<usize> {
        self.user_lookup.get(user_id).copied()
    }

    pub fn item_index(&self, isbn: &str) -> Option<usize> {
        self.item_lookup.get(isbn).copied()
    }

    /// Range of entry indices belonging to `row`.
    pub fn row_range(&self, row: usize) -> std::ops::Range<usize> {
        self.row_ptr[row]..self.row_ptr[row + 1]
    }

    pub fn row_cols(&self, row: usize) -> &[usize] {
        &self.cols[self.row_range(row)]
    }

    pub fn row_values(&self, row: usize) -> &[f64] {
        &self.values[self.row_range(row)]
    }

    pub fn row_provenance(&self, row: usize) -> &[Provenance] {
        &self.provenance[self.row_range(row)]
    }

    pub fn row_len(&self, row: usize) -> usize {
        self.row_ptr[row + 1] - self.row_ptr[row]
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.find(row, col).map(|idx| self.values[idx])
    }

    pub fn provenance_at(&self, row: usize, col: usize) -> Option<Provenance> {
        self.find(row, col).map(|idx| self.provenance[idx])
    }

    fn find(&self, row: usize, col: usize) -> Option<usize> {
        if row >= self.n_users() {
            return None;
        }
        let range = self.row_range(row);
        self.cols[range.clone()]
            .binary_search(&col)
            .ok()
            .map(|off| range.start + off)
    }

    /// Entry by its position in `(row, col)` order.
    pub fn entry(&self, idx: usize) -> Entry {
        let row = self.row_ptr.partition_point(|&p| p <= idx) - 1;
        Entry {
            row,
            col: self.cols[idx],
            value: self.values[idx],
            provenance: self.provenance[idx],
        }
    }

    /// All entries in `(row, col)` order.
    pub fn entries(&self) -> impl Iterator<Item = Entry> + '_ {
        (0..self.n_users()).flat_map(move |row| {
            self.row_range(row).map(move |idx| Entry {
                row,
                col: self.cols[idx],
                value: self.values[idx],
                provenance: self.provenance[idx],
            })
        })
    }

    /// Keep the entries for which `keep(entry_index, entry)` holds, over the
    /// same index space.
    pub fn filter_entries<F>(&self, mut keep: F) -> RatingMatrix
    where
        F: FnMut(usize, &Entry) -> bool,
    {
        let entries: Vec<Entry> = self
            .entries()
            .enumerate()
            .filter(|(idx, e)| keep(*idx, e))
            .map(|(_, e)| e)
            .collect();
        self.with_entries(entries)
            .expect("a subset of valid entries is valid")
    }

    /// A matrix over the same index space holding `entries` instead.
    pub fn with_entries(&self, entries: Vec<Entry>) -> Result<RatingMatrix> {
        RatingMatrix::from_entries(self.users.clone(), self.items.clone(), entries)
    }

    /// Mean of the stored values in `row`, `None` for an empty row.
    pub fn row_mean(&self, row: usize) -> Option<f64> {
        let values = self.row_values(row);
        if values.is_empty() {
            None
        } else {
            Some(values.iter().sum::<f64>() / values.len() as f64)
        }
    }

    /// Mean over every stored value, `None` for an empty matrix.
    pub fn global_mean(&self) -> Option<f64> {
        if self.values.is_empty() {
            None
        } else {
            Some(self.values.iter().sum::<f64>() / self.values.len() as f64)
        }
    }

    /// Stored-entry count per column.
    pub fn column_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_items()];
        for &c in &self.cols {
            counts[c] += 1;
        }
        counts
    }
}
