//! User-based neighborhood collaborative filtering.
//!
//! Users are compared by Pearson correlation over co-rated items, each
//! rating centered on its user's overall mean. A rating is predicted as the
//! user's mean plus the similarity-weighted mean offset of the positively
//! correlated neighbors who rated the item:
//!
//! ```text
//! P(u, b) = mean(u) + Σ_v sim(u, v)·(r(v, b) − mean(v)) / Σ_v sim(u, v)
//! ```

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{clip_rating, RatingMatrix};

/// Denominators below this fall back to the user's mean.
pub const MIN_WEIGHT: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CfConfig {
    pub k_neighbors: usize,
}

impl Default for CfConfig {
    fn default() -> Self {
        CfConfig { k_neighbors: 30 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UserMeans {
    means: Vec<Option<f64>>,
}

impl UserMeans {
    pub fn from_matrix(matrix: &RatingMatrix) -> Self {
        UserMeans {
            means: (0..matrix.n_users()).map(|u| matrix.row_mean(u)).collect(),
        }
    }

    /// `None` for a user with no stored ratings.
    pub fn get(&self, user: usize) -> Option<f64> {
        self.means.get(user).copied().flatten()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UserNeighborhood {
    pub user: usize,
    /// `(row, similarity)`, similarity descending, all similarities positive.
    pub neighbors: Vec<(usize, f64)>,
}

fn check_row(matrix: &RatingMatrix, row: usize) -> Result<()> {
    if row >= matrix.n_users() {
        return Err(Error::IndexOutOfRange {
            row,
            col: 0,
            rows: matrix.n_users(),
            cols: matrix.n_items(),
        });
    }
    Ok(())
}

fn pearson(matrix: &RatingMatrix, means: &UserMeans, u: usize, v: usize) -> f64 {
    let (Some(mu), Some(mv)) = (means.get(u), means.get(v)) else {
        return 0.0;
    };
    let (cu, ru) = (matrix.row_cols(u), matrix.row_values(u));
    let (cv, rv) = (matrix.row_cols(v), matrix.row_values(v));
    let (mut i, mut j) = (0, 0);
    let (mut n, mut dot, mut su, mut sv) = (0usize, 0.0, 0.0, 0.0);
    while i < cu.len() && j < cv.len() {
        match cu[i].cmp(&cv[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                let (a, b) = (ru[i] - mu, rv[j] - mv);
                dot += a * b;
                su += a * a;
                sv += b * b;
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    if n < 2 || su == 0.0 || sv == 0.0 {
        return 0.0;
    }
    (dot / (su * sv).sqrt()).clamp(-1.0, 1.0)
}

/// Mean-centered Pearson correlation of two distinct users over their
/// co-rated items; 0 with fewer than two co-rated items or a zero-variance
/// side.
pub fn user_similarity(matrix: &RatingMatrix, u: usize, v: usize) -> Result<f64> {
    check_row(matrix, u)?;
    check_row(matrix, v)?;
    if u == v {
        return Err(Error::Config(format!("user_similarity needs two distinct users, got {u} twice")));
    }
    Ok(pearson(matrix, &UserMeans::from_matrix(matrix), u, v))
}

fn neighborhood_with(matrix: &RatingMatrix, means: &UserMeans, user: usize, k: usize) -> UserNeighborhood {
    let mut neighbors: Vec<(usize, f64)> = (0..matrix.n_users())
        .filter(|&v| v != user)
        .map(|v| (v, pearson(matrix, means, user, v)))
        .filter(|&(_, s)| s > 0.0)
        .collect();
    neighbors.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    neighbors.truncate(k);
    UserNeighborhood { user, neighbors }
}

/// The `k` most similar users with positive similarity, ties to the lower row.
pub fn build_neighborhood(matrix: &RatingMatrix, user: usize, k: usize) -> Result<UserNeighborhood> {
    check_row(matrix, user)?;
    if k == 0 {
        return Err(Error::Config("cf.k_neighbors must be at least 1".into()));
    }
    Ok(neighborhood_with(matrix, &UserMeans::from_matrix(matrix), user, k))
}

/// Neighborhoods for every user, computed in parallel.
pub fn build_all_neighborhoods(matrix: &RatingMatrix, means: &UserMeans, k: usize) -> Result<Vec<UserNeighborhood>> {
    if k == 0 {
        return Err(Error::Config("cf.k_neighbors must be at least 1".into()));
    }
    Ok((0..matrix.n_users())
        .into_par_iter()
        .map(|u| neighborhood_with(matrix, means, u, k))
        .collect())
}

/// Unclipped mean-offset prediction. Falls back to the user's mean when no
/// neighbor rated `item`.
pub fn predict_cf_unclipped(
    matrix: &RatingMatrix,
    means: &UserMeans,
    nbhd: &UserNeighborhood,
    item: usize,
) -> Result<f64> {
    let base = means.get(nbhd.user).ok_or(Error::NoObservedRatings(nbhd.user))?;
    let (mut num, mut den) = (0.0, 0.0);
    for &(v, sim) in &nbhd.neighbors {
        if sim <= 0.0 {
            continue;
        }
        if let (Some(r), Some(mv)) = (matrix.get(v, item), means.get(v)) {
            num += sim * (r - mv);
            den += sim;
        }
    }
    if den < MIN_WEIGHT {
        Ok(base)
    } else {
        Ok(base + num / den)
    }
}

/// Prediction clipped to the rating scale.
pub fn predict_cf(matrix: &RatingMatrix, means: &UserMeans, nbhd: &UserNeighborhood, item: usize) -> Result<f64> {
    predict_cf_unclipped(matrix, means, nbhd, item).map(clip_rating)
}
