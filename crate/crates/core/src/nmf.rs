//! Masked nonnegative matrix factorization.
//!
//! Finds nonnegative `W` (m x k) and `H` (k x n) minimizing
//!
//! ```text
//! F(W, H) = ½ Σ_{(i,j) stored} (A_ij − (WH)_ij)²
//! ```
//!
//! with the observed-cell-weighted multiplicative updates
//!
//! ```text
//! W ← W ⊙ [(M⊙A) Hᵀ] / [(M⊙WH) Hᵀ + ε]
//! H ← H ⊙ [Wᵀ (M⊙A)] / [Wᵀ (M⊙WH) + ε]
//! ```
//!
//! where `M` is the 0/1 mask of stored cells. Only stored cells are ever
//! touched, so each sweep costs O(nnz·k). Rows of the `W` update and columns
//! of the `H` update are independent and run in parallel; every per-row and
//! per-column sum is accumulated in a fixed order, so results are
//! bit-reproducible.

use std::io::{BufRead, Write};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::RatingMatrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NmfConfig {
    pub k: usize,
    pub max_iters: usize,
    /// Stop once an iteration lowers the objective by less than this fraction.
    pub rel_tol: f64,
    pub seed: u64,
    /// Added to every update denominator.
    pub epsilon: f64,
}

impl Default for NmfConfig {
    fn default() -> Self {
        NmfConfig {
            k: 20,
            max_iters: 200,
            rel_tol: 1e-4,
            seed: 42,
            epsilon: 1e-12,
        }
    }
}

impl NmfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("nmf.k must be at least 1".into()));
        }
        if self.max_iters < 1 {
            return Err(Error::Config("nmf.max_iters must be at least 1".into()));
        }
        if self.rel_tol.is_nan() || self.rel_tol <= 0.0 {
            return Err(Error::Config(format!("nmf.rel_tol = {} must be positive", self.rel_tol)));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Config(format!("nmf.epsilon = {} must be positive", self.epsilon)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Factorization {
    /// m x k
    pub w: Array2<f64>,
    /// k x n
    pub h: Array2<f64>,
    /// Objective at initialization, then after every iteration.
    pub history: Vec<f64>,
    pub seed: u64,
}

impl Factorization {
    pub fn k(&self) -> usize {
        self.w.ncols()
    }

    pub fn n_rows(&self) -> usize {
        self.w.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.h.ncols()
    }

    /// `(WH)[row, col]`, unclipped.
    pub fn reconstruct(&self, row: usize, col: usize) -> Result<f64> {
        if row >= self.n_rows() || col >= self.n_cols() {
            return Err(Error::IndexOutOfRange {
                row,
                col,
                rows: self.n_rows(),
                cols: self.n_cols(),
            });
        }
        Ok(self.w.row(row).dot(&self.h.column(col)))
    }
}

/// Column-compressed copy of a matrix's stored cells.
struct Columns {
    ptr: Vec<usize>,
    rows: Vec<usize>,
    values: Vec<f64>,
}

impl Columns {
    fn of(matrix: &RatingMatrix) -> Self {
        let n = matrix.n_items();
        let mut ptr = vec![0usize; n + 1];
        for e in matrix.entries() {
            ptr[e.col + 1] += 1;
        }
        for c in 0..n {
            ptr[c + 1] += ptr[c];
        }
        let mut fill = ptr.clone();
        let mut rows = vec![0; matrix.nnz()];
        let mut values = vec![0.0; matrix.nnz()];
        // Row-major iteration leaves each column's rows ascending.
        for e in matrix.entries() {
            let slot = fill[e.col];
            rows[slot] = e.row;
            values[slot] = e.value;
            fill[e.col] += 1;
        }
        Columns { ptr, rows, values }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// One factor block: for each output row `r` (a matrix row for W, a column for
// H), `cells(r)` lists `(other index, value)` and `other` holds the fixed
// factor, k values per index.
fn update_block<'a, F>(target: &mut [f64], other: &[f64], k: usize, eps: f64, cells: F)
where
    F: Fn(usize) -> (&'a [usize], &'a [f64]) + Sync,
{
    target.par_chunks_mut(k).enumerate().for_each_init(
        || (vec![0.0; k], vec![0.0; k]),
        |(num, den), (r, row)| {
            num.iter_mut().for_each(|x| *x = 0.0);
            den.iter_mut().for_each(|x| *x = 0.0);
            let (idx, vals) = cells(r);
            for (&o, &a) in idx.iter().zip(vals) {
                let f = &other[o * k..(o + 1) * k];
                let pred = dot(row, f);
                for l in 0..k {
                    num[l] += a * f[l];
                    den[l] += pred * f[l];
                }
            }
            for l in 0..k {
                row[l] *= num[l] / (den[l] + eps);
            }
        },
    );
}

fn masked_objective(matrix: &RatingMatrix, w: &[f64], ht: &[f64], k: usize) -> f64 {
    let per_row: Vec<f64> = (0..matrix.n_users())
        .into_par_iter()
        .map(|u| {
            let wu = &w[u * k..(u + 1) * k];
            matrix
                .row_cols(u)
                .iter()
                .zip(matrix.row_values(u))
                .map(|(&c, &a)| {
                    let r = a - dot(wu, &ht[c * k..(c + 1) * k]);
                    r * r
                })
                .sum()
        })
        .collect();
    0.5 * per_row.iter().sum::<f64>()
}

/// Factorize the stored cells of `matrix`.
pub fn train(matrix: &RatingMatrix, cfg: &NmfConfig) -> Result<Factorization> {
    cfg.validate()?;
    let (m, n, k) = (matrix.n_users(), matrix.n_items(), cfg.k);
    if k > m.min(n) {
        return Err(Error::Config(format!("nmf.k = {k} exceeds min(m, n) = {}", m.min(n))));
    }
    let mean = matrix
        .global_mean()
        .ok_or_else(|| Error::EmptyDataset("cannot factorize a matrix with no entries".into()))?;

    let scale = (mean / k as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // gen() is in [0, 1); flip it onto (0, 1].
    let mut draw = || (1.0 - rng.gen::<f64>()) * scale;
    let mut w: Vec<f64> = (0..m * k).map(|_| draw()).collect();
    let mut ht = vec![0.0; n * k];
    for l in 0..k {
        for j in 0..n {
            ht[j * k + l] = draw();
        }
    }

    let columns = Columns::of(matrix);
    // An objective this small relative to the data means residuals near
    // 1e-12 of the ratings: an exact fit up to rounding, where further
    // sweeps only shuffle roundoff.
    let exact_fit = 1e-24 * 0.5 * (0..m).flat_map(|u| matrix.row_values(u)).map(|a| a * a).sum::<f64>();
    let mut history = vec![masked_objective(matrix, &w, &ht, k)];
    for _ in 0..cfg.max_iters {
        update_block(&mut w, &ht, k, cfg.epsilon, |u| (matrix.row_cols(u), matrix.row_values(u)));
        update_block(&mut ht, &w, k, cfg.epsilon, |j| {
            let range = columns.ptr[j]..columns.ptr[j + 1];
            (&columns.rows[range.clone()], &columns.values[range])
        });

        let obj = masked_objective(matrix, &w, &ht, k);
        if !obj.is_finite() {
            return Err(Error::Numerical(format!("objective became {obj} after {} iterations", history.len())));
        }
        let prev = *history.last().expect("seeded with the initial objective");
        history.push(obj);
        if obj <= exact_fit || (prev - obj) / prev < cfg.rel_tol {
            break;
        }
    }

    let w = Array2::from_shape_vec((m, k), w).expect("m*k values");
    let h = Array2::from_shape_vec((n, k), ht).expect("n*k values").reversed_axes();
    Ok(Factorization {
        w,
        h: h.as_standard_layout().to_owned(),
        history,
        seed: cfg.seed,
    })
}

/// `½ Σ (A_ij − (WH)_ij)²` over the stored cells of `matrix`.
pub fn objective(matrix: &RatingMatrix, f: &Factorization) -> Result<f64> {
    if f.n_rows() != matrix.n_users() || f.n_cols() != matrix.n_items() {
        return Err(Error::Config(format!(
            "factorization is {}x{} but the matrix is {}x{}",
            f.n_rows(),
            f.n_cols(),
            matrix.n_users(),
            matrix.n_items()
        )));
    }
    let k = f.k();
    let w: Vec<f64> = f.w.iter().copied().collect();
    let ht: Vec<f64> = f.h.t().iter().copied().collect();
    Ok(masked_objective(matrix, &w, &ht, k))
}

/// Write a dense matrix as text: a `rows cols` header line, then one
/// space-separated line per row.
pub fn write_matrix<W: Write>(out: &mut W, a: &Array2<f64>) -> std::io::Result<()> {
    writeln!(out, "{} {}", a.nrows(), a.ncols())?;
    for row in a.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_matrix<R: BufRead>(input: R) -> Result<Array2<f64>> {
    let bad = |msg: String| Error::Config(format!("factor file: {msg}"));
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| bad("missing header".into()))??;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad(format!("bad header {header:?}"))))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(bad(format!("bad header {header:?}")));
    };
    let mut values = Vec::with_capacity(rows * cols);
    for line in lines.take(rows) {
        let line = line?;
        let before = values.len();
        for t in line.split_whitespace() {
            values.push(t.parse::<f64>().map_err(|_| bad(format!("bad value {t:?}")))?);
        }
        if values.len() - before != cols {
            return Err(bad(format!("expected {cols} values per row")));
        }
    }
    Array2::from_shape_vec((rows, cols), values).map_err(|_| bad(format!("expected {rows} rows")))
}
