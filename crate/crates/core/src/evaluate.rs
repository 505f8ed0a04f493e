//! K-fold cross-validation of the four rating predictors.
//!
//! | method   | predictor                                                       |
//! |----------|-----------------------------------------------------------------|
//! | `CF`     | user-based neighborhood CF on the training ratings              |
//! | `CB`     | semantic item estimate over the user's own training ratings     |
//! | `CF_NMF` | masked NMF of the training ratings                              |
//! | `HYBRID` | semantic densification of the training ratings, then masked NMF |
//!
//! Every test cell gets exactly one prediction. A cell a method cannot score
//! falls back to the user's training mean, or the global training mean for a
//! user whose ratings all landed in the test fold.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::densify::{self, DensifyConfig};
use crate::error::{Error, Result};
use crate::matrix::{clip_rating, Entry, Provenance, RatingMatrix};
use crate::neighborhood::{self, CfConfig, UserMeans};
use crate::nmf::{self, NmfConfig};
use crate::taxonomy::Taxonomy;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodId {
    Cf,
    Cb,
    CfNmf,
    Hybrid,
}

impl MethodId {
    pub const ALL: [MethodId; 4] = [MethodId::Cf, MethodId::Cb, MethodId::CfNmf, MethodId::Hybrid];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodId::Cf => "CF",
            MethodId::Cb => "CB",
            MethodId::CfNmf => "CF_NMF",
            MethodId::Hybrid => "HYBRID",
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MethodConfigs {
    pub densify: DensifyConfig,
    pub nmf: NmfConfig,
    pub cf: CfConfig,
}

/// Fold label per stored entry, in the matrix's `(row, col)` entry order.
/// Imputed entries carry no label and always stay in training.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldPlan {
    pub n_folds: usize,
    pub assignments: Vec<Option<usize>>,
    pub seed: u64,
}

pub fn make_folds(matrix: &RatingMatrix, n_folds: usize, seed: u64) -> Result<FoldPlan> {
    if n_folds < 2 {
        return Err(Error::Config(format!("eval.n_folds = {n_folds} must be at least 2")));
    }
    let observed: Vec<usize> = matrix
        .entries()
        .enumerate()
        .filter(|(_, e)| e.provenance == Provenance::Observed)
        .map(|(idx, _)| idx)
        .collect();
    if observed.len() < n_folds {
        return Err(Error::TooFewEntries {
            entries: observed.len(),
            folds: n_folds,
        });
    }
    let mut order = observed;
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignments = vec![None; matrix.nnz()];
    for (pos, idx) in order.into_iter().enumerate() {
        assignments[idx] = Some(pos % n_folds);
    }
    Ok(FoldPlan {
        n_folds,
        assignments,
        seed,
    })
}

impl FoldPlan {
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_folds];
        for f in self.assignments.iter().flatten() {
            sizes[*f] += 1;
        }
        sizes
    }

    /// Training matrix (same index space, fold entries removed) and the
    /// fold's test entries.
    pub fn split(&self, matrix: &RatingMatrix, fold: usize) -> Result<(RatingMatrix, Vec<Entry>)> {
        if self.assignments.len() != matrix.nnz() {
            return Err(Error::Config(format!(
                "fold plan covers {} entries but the matrix stores {}",
                self.assignments.len(),
                matrix.nnz()
            )));
        }
        if fold >= self.n_folds {
            return Err(Error::Config(format!("fold {fold} out of range 0..{}", self.n_folds)));
        }
        let test = matrix
            .entries()
            .zip(&self.assignments)
            .filter(|(_, a)| **a == Some(fold))
            .map(|(e, _)| e)
            .collect();
        let train = matrix.filter_entries(|idx, _| self.assignments[idx] != Some(fold));
        Ok((train, test))
    }
}

fn check_lengths(pred: &[f64], actual: &[f64]) -> Result<()> {
    if pred.len() != actual.len() || pred.is_empty() {
        return Err(Error::LengthMismatch {
            pred: pred.len(),
            actual: actual.len(),
        });
    }
    Ok(())
}

pub fn mae(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check_lengths(pred, actual)?;
    Ok(pred.iter().zip(actual).map(|(p, a)| (p - a).abs()).sum::<f64>() / pred.len() as f64)
}

pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check_lengths(pred, actual)?;
    let mse = pred.iter().zip(actual).map(|(p, a)| (p - a) * (p - a)).sum::<f64>() / pred.len() as f64;
    Ok(mse.sqrt())
}

struct Fallback {
    means: UserMeans,
    global: f64,
}

impl Fallback {
    fn new(train: &RatingMatrix) -> Result<Self> {
        let global = train
            .global_mean()
            .ok_or_else(|| Error::EmptyDataset("training matrix has no entries".into()))?;
        Ok(Fallback {
            means: UserMeans::from_matrix(train),
            global,
        })
    }

    fn get(&self, user: usize) -> f64 {
        self.means.get(user).unwrap_or(self.global)
    }
}

fn predict_factorized(
    factorized: &RatingMatrix,
    cfg: &NmfConfig,
    cells: &[(usize, usize)],
    fallback: &Fallback,
) -> Result<Vec<f64>> {
    let model = nmf::train(factorized, cfg)?;
    let col_counts = factorized.column_counts();
    cells
        .iter()
        .map(|&(u, i)| {
            // A row or column with no stored cells carries no information.
            if factorized.row_len(u) == 0 || col_counts[i] == 0 {
                return Ok(fallback.get(u));
            }
            let value = model.reconstruct(u, i)?;
            Ok(if value.is_finite() {
                clip_rating(value)
            } else {
                fallback.get(u)
            })
        })
        .collect()
}

/// Predict each `(row, col)` cell with `method`, trained on `train` only.
pub fn predict_cells(
    method: MethodId,
    train: &RatingMatrix,
    cells: &[(usize, usize)],
    taxonomy: &Taxonomy,
    cfg: &MethodConfigs,
) -> Result<Vec<f64>> {
    for &(row, col) in cells {
        if row >= train.n_users() || col >= train.n_items() {
            return Err(Error::IndexOutOfRange {
                row,
                col,
                rows: train.n_users(),
                cols: train.n_items(),
            });
        }
    }
    let fallback = Fallback::new(train)?;
    match method {
        MethodId::Cf => {
            if cfg.cf.k_neighbors == 0 {
                return Err(Error::Config("cf.k_neighbors must be at least 1".into()));
            }
            let users: BTreeSet<usize> = cells.iter().map(|c| c.0).collect();
            let mut nbhds = vec![None; train.n_users()];
            for u in users {
                if fallback.means.get(u).is_some() {
                    nbhds[u] = Some(neighborhood::build_neighborhood(train, u, cfg.cf.k_neighbors)?);
                }
            }
            cells
                .iter()
                .map(|&(u, i)| match &nbhds[u] {
                    Some(nb) => neighborhood::predict_cf(train, &fallback.means, nb, i),
                    None => Ok(fallback.get(u)),
                })
                .collect()
        }
        MethodId::Cb => {
            cfg.densify.validate()?;
            cells
                .iter()
                .map(|&(u, i)| Ok(densify::estimate(train, taxonomy, &cfg.densify, u, i)?.unwrap_or(fallback.get(u))))
                .collect()
        }
        MethodId::CfNmf => predict_factorized(train, &cfg.nmf, cells, &fallback),
        MethodId::Hybrid => {
            let densified = densify::impute(train, taxonomy, &cfg.densify)?;
            predict_factorized(&densified, &cfg.nmf, cells, &fallback)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MethodScore {
    pub mae: f64,
    pub rmse: f64,
    pub wall_time_s: f64,
}

/// Train `method` on `train` and score it on `test`.
pub fn run_method(
    method: MethodId,
    train: &RatingMatrix,
    test: &[Entry],
    taxonomy: &Taxonomy,
    cfg: &MethodConfigs,
) -> Result<MethodScore> {
    let start = Instant::now();
    let cells: Vec<(usize, usize)> = test.iter().map(|e| (e.row, e.col)).collect();
    let pred = predict_cells(method, train, &cells, taxonomy, cfg)?;
    let actual: Vec<f64> = test.iter().map(|e| e.value).collect();
    Ok(MethodScore {
        mae: mae(&pred, &actual)?,
        rmse: rmse(&pred, &actual)?,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FoldScore {
    pub method: MethodId,
    pub fold: usize,
    pub score: MethodScore,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MethodSummary {
    pub method: MethodId,
    pub mae_mean: f64,
    pub mae_std: f64,
    pub rmse_mean: f64,
    pub rmse_std: f64,
    pub wall_time_mean_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub n_folds: usize,
    /// Fold-major, methods in [`MethodId::ALL`] order within a fold.
    pub cells: Vec<FoldScore>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl EvalReport {
    pub fn scores(&self, method: MethodId) -> impl Iterator<Item = &MethodScore> {
        self.cells.iter().filter(move |c| c.method == method).map(|c| &c.score)
    }

    /// Per-method mean and sample standard deviation across folds.
    pub fn summary(&self) -> Vec<MethodSummary> {
        MethodId::ALL
            .iter()
            .map(|&method| {
                let scores: Vec<&MethodScore> = self.scores(method).collect();
                let pick = |f: fn(&MethodScore) -> f64| scores.iter().map(|s| f(s)).collect::<Vec<_>>();
                let (mae_mean, mae_std) = mean_std(&pick(|s| s.mae));
                let (rmse_mean, rmse_std) = mean_std(&pick(|s| s.rmse));
                let (wall_time_mean_s, _) = mean_std(&pick(|s| s.wall_time_s));
                MethodSummary {
                    method,
                    mae_mean,
                    mae_std,
                    rmse_mean,
                    rmse_std,
                    wall_time_mean_s,
                }
            })
            .collect()
    }

    pub fn method_summary(&self, method: MethodId) -> MethodSummary {
        self.summary().into_iter().find(|s| s.method == method).expect("every method is summarized")
    }

    /// CSV with header `method,fold,mae,rmse,wall_time_s`, one row per
    /// (method, fold), then one `method,mean,<mae>,<rmse>,` row per method.
    /// Wall times are left blank unless `with_wall_time` is set, which keeps
    /// the file byte-reproducible.
    pub fn write_csv<W: Write>(&self, out: &mut W, with_wall_time: bool) -> std::io::Result<()> {
        writeln!(out, "method,fold,mae,rmse,wall_time_s")?;
        for method in MethodId::ALL {
            for cell in self.cells.iter().filter(|c| c.method == method) {
                let time = if with_wall_time {
                    cell.score.wall_time_s.to_string()
                } else {
                    String::new()
                };
                writeln!(out, "{},{},{},{},{}", method, cell.fold, cell.score.mae, cell.score.rmse, time)?;
            }
        }
        for s in self.summary() {
            writeln!(out, "{},mean,{},{},", s.method, s.mae_mean, s.rmse_mean)?;
        }
        Ok(())
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<8} {:>9} {:>9} {:>9} {:>9} {:>10}",
            "method", "MAE", "±", "RMSE", "±", "time/fold"
        )?;
        for s in self.summary() {
            writeln!(
                f,
                "{:<8} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.2}s",
                s.method.as_str(),
                s.mae_mean,
                s.mae_std,
                s.rmse_mean,
                s.rmse_std,
                s.wall_time_mean_s
            )?;
        }
        Ok(())
    }
}

/// Run every method on every fold of `plan`.
pub fn run_cv(matrix: &RatingMatrix, taxonomy: &Taxonomy, plan: &FoldPlan, cfg: &MethodConfigs) -> Result<EvalReport> {
    let mut cells = Vec::with_capacity(plan.n_folds * MethodId::ALL.len());
    for fold in 0..plan.n_folds {
        let (train, test) = plan.split(matrix, fold)?;
        for method in MethodId::ALL {
            let score = run_method(method, &train, &test, taxonomy, cfg)?;
            cells.push(FoldScore { method, fold, score });
        }
    }
    Ok(EvalReport {
        n_folds: plan.n_folds,
        cells,
    })
}
