//! Semantic densification of the rating matrix.
//!
//! A missing cell `(u, i)` is estimated from the user's own ratings of items
//! that are semantically close to `i`: the items `j` with
//! `sim(i, j) >= tau`, cut to the `max_neighbors` most similar (ties to the
//! lower item index), contribute the weighted mean
//! `Σ sim(i, j)·r(u, j) / Σ sim(i, j)`. A cell is only filled when at least
//! `min_support` items qualify. Stored cells are never touched.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{clip_rating, Entry, Provenance, RatingMatrix};
use crate::taxonomy::Taxonomy;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensifyConfig {
    /// Similarity threshold in `[0, 1]`.
    pub tau: f64,
    pub min_support: usize,
    pub max_neighbors: usize,
}

impl Default for DensifyConfig {
    fn default() -> Self {
        DensifyConfig {
            tau: 0.5,
            min_support: 1,
            max_neighbors: 20,
        }
    }
}

impl DensifyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Config(format!("densify.tau = {} is outside [0, 1]", self.tau)));
        }
        if self.min_support < 1 {
            return Err(Error::Config("densify.min_support must be at least 1".into()));
        }
        if self.max_neighbors < self.min_support {
            return Err(Error::Config(format!(
                "densify.max_neighbors = {} is below densify.min_support = {}",
                self.max_neighbors, self.min_support
            )));
        }
        Ok(())
    }

    /// A configuration whose threshold no pair of distinct leaves can reach
    /// (their similarity is strictly below 1).
    pub fn disabled() -> Self {
        DensifyConfig {
            tau: 1.0,
            ..Default::default()
        }
    }
}

/// Fraction of the user x item grid that holds a value.
pub fn density(matrix: &RatingMatrix) -> f64 {
    let cells = matrix.n_users() as f64 * matrix.n_items() as f64;
    matrix.nnz() as f64 / cells
}

fn check_space(matrix: &RatingMatrix, taxonomy: &Taxonomy) -> Result<()> {
    if matrix.n_items() != taxonomy.n_items() {
        return Err(Error::IndexSpaceMismatch {
            matrix: matrix.n_items(),
            taxonomy: taxonomy.n_items(),
        });
    }
    Ok(())
}

fn estimate_in_row(
    taxonomy: &Taxonomy,
    cols: &[usize],
    values: &[f64],
    item: usize,
    cfg: &DensifyConfig,
    scratch: &mut Vec<(f64, usize, f64)>,
) -> Result<Option<f64>> {
    scratch.clear();
    for (&j, &r) in cols.iter().zip(values) {
        if j == item {
            continue;
        }
        let sim = taxonomy.item_similarity(item, j)?.value();
        if sim >= cfg.tau {
            scratch.push((sim, j, r));
        }
    }
    if scratch.len() < cfg.min_support {
        return Ok(None);
    }
    scratch.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scratch.truncate(cfg.max_neighbors);
    let (num, den) = scratch
        .iter()
        .fold((0.0, 0.0), |(num, den), &(sim, _, r)| (num + sim * r, den + sim));
    Ok(Some(clip_rating(num / den)))
}

/// Semantic estimate of `user`'s rating for `item` from the user's stored
/// ratings, or `None` when fewer than `min_support` similar items qualify.
pub fn estimate(
    matrix: &RatingMatrix,
    taxonomy: &Taxonomy,
    cfg: &DensifyConfig,
    user: usize,
    item: usize,
) -> Result<Option<f64>> {
    check_space(matrix, taxonomy)?;
    if user >= matrix.n_users() || item >= matrix.n_items() {
        return Err(Error::IndexOutOfRange {
            row: user,
            col: item,
            rows: matrix.n_users(),
            cols: matrix.n_items(),
        });
    }
    estimate_in_row(
        taxonomy,
        matrix.row_cols(user),
        matrix.row_values(user),
        item,
        cfg,
        &mut Vec::new(),
    )
}

/// Fill every empty cell that passes the support gate, flagging the new
/// entries as imputed.
pub fn impute(matrix: &RatingMatrix, taxonomy: &Taxonomy, cfg: &DensifyConfig) -> Result<RatingMatrix> {
    cfg.validate()?;
    check_space(matrix, taxonomy)?;

    let per_user = (0..matrix.n_users())
        .into_par_iter()
        .map(|u| -> Result<Vec<Entry>> {
            let (cols, values) = (matrix.row_cols(u), matrix.row_values(u));
            let mut filled = Vec::new();
            if cols.is_empty() {
                return Ok(filled);
            }
            let mut scratch = Vec::with_capacity(cols.len());
            let mut next_rated = cols.iter().peekable();
            for item in 0..matrix.n_items() {
                if next_rated.peek() == Some(&&item) {
                    next_rated.next();
                    continue;
                }
                if let Some(value) = estimate_in_row(taxonomy, cols, values, item, cfg, &mut scratch)? {
                    filled.push(Entry {
                        row: u,
                        col: item,
                        value,
                        provenance: Provenance::Imputed,
                    });
                }
            }
            Ok(filled)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut entries: Vec<Entry> = matrix.entries().collect();
    entries.extend(per_user.into_iter().flatten());
    matrix.with_entries(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    // root(0) -> a(1), b(2); a -> leaves 3, 4, 5; b -> leaf 6.
    // Leaves under a share a depth-2 parent: sim = 4/6. Leaf 6 vs a leaf
    // under a meets at the root: sim = 2/6.
    fn tree() -> Taxonomy {
        Taxonomy::from_parents(&[None, Some(0), Some(0), Some(1), Some(1), Some(1), Some(2)])
            .unwrap()
            .with_items(vec![3, 4, 5, 6])
            .unwrap()
    }

    fn matrix(entries: Vec<Entry>, users: usize) -> RatingMatrix {
        RatingMatrix::from_entries(
            (0..users).map(|u| format!("u{u}")).collect(),
            (0..4).map(|i| format!("b{i}")).collect(),
            entries,
        )
        .unwrap()
    }

    #[test]
    fn weighted_average_with_threshold() {
        // Item 0's neighbors: item 1 (sim 4/6, rating 8) and item 3 (sim 2/6, rating 2).
        let m = matrix(vec![Entry::observed(0, 1, 8.0), Entry::observed(0, 3, 2.0)], 1);
        let t = tree();
        let strict = DensifyConfig { tau: 0.5, ..Default::default() };
        assert_eq!(estimate(&m, &t, &strict, 0, 0).unwrap(), Some(8.0));
        let loose = DensifyConfig { tau: 0.2, ..Default::default() };
        let expected = (4.0 / 6.0 * 8.0 + 2.0 / 6.0 * 2.0) / (4.0 / 6.0 + 2.0 / 6.0);
        assert!((estimate(&m, &t, &loose, 0, 0).unwrap().unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn support_gate_and_neighbor_cap() {
        let m = matrix(
            vec![
                Entry::observed(0, 1, 8.0),
                Entry::observed(0, 2, 4.0),
                Entry::observed(0, 3, 2.0),
            ],
            1,
        );
        let t = tree();
        let gated = DensifyConfig { tau: 0.5, min_support: 3, max_neighbors: 3 };
        assert_eq!(estimate(&m, &t, &gated, 0, 0).unwrap(), None);
        // Items 1 and 2 tie at 4/6; the cap keeps the lower index.
        let capped = DensifyConfig { tau: 0.5, min_support: 1, max_neighbors: 1 };
        assert_eq!(estimate(&m, &t, &capped, 0, 0).unwrap(), Some(8.0));
    }

    #[test]
    fn impute_fills_only_missing_cells() {
        let m = matrix(
            vec![Entry::observed(0, 1, 8.0), Entry::observed(1, 3, 5.0)],
            2,
        );
        let out = impute(&m, &tree(), &DensifyConfig { tau: 0.5, ..Default::default() }).unwrap();
        // User 0 gets items 0 and 2 from item 1; user 1's only rating has no
        // neighbor above 0.5.
        assert_eq!(out.n_imputed(), 2);
        assert_eq!(out.get(0, 0), Some(8.0));
        assert_eq!(out.provenance_at(0, 2), Some(Provenance::Imputed));
        assert_eq!(out.provenance_at(0, 1), Some(Provenance::Observed));
        assert_eq!(out.row_len(1), 1);
    }

    #[test]
    fn disabled_threshold_is_identity() {
        let m = matrix(vec![Entry::observed(0, 1, 8.0), Entry::observed(0, 2, 3.0)], 1);
        assert_eq!(impute(&m, &tree(), &DensifyConfig::disabled()).unwrap(), m);
    }

    #[test]
    fn mismatched_index_space_is_fatal() {
        let m = matrix(vec![Entry::observed(0, 1, 8.0)], 1);
        let t = Taxonomy::from_parents(&[None, Some(0)]).unwrap().with_items(vec![1]).unwrap();
        assert!(matches!(
            impute(&m, &t, &DensifyConfig::default()),
            Err(Error::IndexSpaceMismatch { .. })
        ));
    }

    #[test]
    fn density_arithmetic() {
        let full = matrix(
            (0..2).flat_map(|u| (0..4).map(move |i| Entry::observed(u, i, 5.0))).collect(),
            2,
        );
        assert_eq!(density(&full), 1.0);
        assert_eq!(density(&matrix(vec![Entry::observed(0, 0, 1.0)], 2)), 1.0 / 8.0);
    }

    #[test]
    fn config_validation() {
        assert!(DensifyConfig { tau: 1.5, ..Default::default() }.validate().is_err());
        assert!(DensifyConfig { min_support: 0, ..Default::default() }.validate().is_err());
        assert!(DensifyConfig { min_support: 5, max_neighbors: 2, ..Default::default() }.validate().is_err());
        assert!(DensifyConfig::default().validate().is_ok());
    }
}
