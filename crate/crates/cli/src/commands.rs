//! The command implementations, callable without going through `main`.
//!
//! Layout of the output directory:
//!
//! ```text
//! dataset.key         settings the ingested dataset was built from
//! ratings.tsv         user_idx  item_idx  value  provenance
//! users.tsv           idx  user_id
//! items.tsv           idx  isbn  title  author  year  publisher
//! ingest_report.txt   parse and preprocessing counts
//! taxonomy.json
//! report.csv          cross-validation scores
//! model/              W.txt  H.txt  densified.tsv  model.key
//! ```
//!
//! Commands that need the dataset or the model reuse what is on disk when
//! its `.key` file matches the current config and rebuild it otherwise.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use ndarray::Array2;
use ontonmf::densify;
use ontonmf::evaluate::{make_folds, run_cv, EvalReport};
use ontonmf::ingest::{parse_bookcrossing, preprocess, subsample, BookRecord};
use ontonmf::matrix::clip_rating;
use ontonmf::nmf::{self, read_matrix, write_matrix};
use ontonmf::taxonomy::{build_taxonomy, Taxonomy, TaxonomyJson};
use ontonmf::{Entry, Provenance, RatingMatrix};

use crate::config::RunConfig;

/// Write `bytes` to `path` through a temporary file in the same directory,
/// so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn clean(s: &str) -> String {
    s.replace(['\t', '\r', '\n'], " ")
}

/// The preprocessed rating matrix with metadata for each of its columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub matrix: RatingMatrix,
    pub books: Vec<BookRecord>,
}

fn write_entries(out: &mut String, matrix: &RatingMatrix) {
    out.push_str("user_idx\titem_idx\tvalue\tprovenance\n");
    for e in matrix.entries() {
        writeln!(out, "{}\t{}\t{}\t{}", e.row, e.col, e.value, e.provenance.as_str()).unwrap();
    }
}

fn read_entries(path: &Path) -> Result<Vec<Entry>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    text.lines()
        .skip(1)
        .enumerate()
        .map(|(n, line)| {
            let bad = || anyhow!("{}:{}: malformed line {line:?}", path.display(), n + 2);
            let f: Vec<&str> = line.split('\t').collect();
            let [row, col, value, prov] = f[..] else {
                return Err(bad());
            };
            Ok(Entry {
                row: row.parse().map_err(|_| bad())?,
                col: col.parse().map_err(|_| bad())?,
                value: value.parse().map_err(|_| bad())?,
                provenance: Provenance::parse(prov).ok_or_else(bad)?,
            })
        })
        .collect()
}

/// Parse, preprocess and subsample the configured inputs, and write the
/// dataset artifacts.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<Dataset> {
    cfg.check_inputs()?;
    let (raw, parse_report) = parse_bookcrossing(&cfg.data.users, &cfg.data.books, &cfg.data.ratings)?;
    let pre = preprocess(&raw)?;
    let full = &pre.matrix;
    let matrix = match (cfg.top_users, cfg.top_items) {
        (None, None) => full.clone(),
        (u, i) => subsample(
            full,
            u.unwrap_or(full.n_users()).min(full.n_users()),
            i.unwrap_or(full.n_items()).min(full.n_items()),
        )?,
    };
    let books: Vec<BookRecord> = pre
        .catalog
        .aligned(&matrix)?
        .into_iter()
        .map(|b| BookRecord {
            title: clean(&b.title),
            author: clean(&b.author),
            publisher: clean(&b.publisher),
            ..b
        })
        .collect();

    let out = &cfg.output_dir;
    let mut ratings = String::new();
    write_entries(&mut ratings, &matrix);
    write_atomic(&out.join("ratings.tsv"), ratings.as_bytes())?;
    let mut users = String::from("idx\tuser_id\n");
    for (i, u) in matrix.users().iter().enumerate() {
        writeln!(users, "{i}\t{u}").unwrap();
    }
    write_atomic(&out.join("users.tsv"), users.as_bytes())?;
    let mut items = String::from("idx\tisbn\ttitle\tauthor\tyear\tpublisher\n");
    for (i, b) in books.iter().enumerate() {
        writeln!(items, "{i}\t{}\t{}\t{}\t{}\t{}", b.isbn, b.title, b.author, b.year, b.publisher).unwrap();
    }
    write_atomic(&out.join("items.tsv"), items.as_bytes())?;
    let report = format!(
        "{parse_report}{}subsample.users = {}\nsubsample.items = {}\nsubsample.entries = {}\n",
        pre.report,
        matrix.n_users(),
        matrix.n_items(),
        matrix.nnz()
    );
    write_atomic(&out.join("ingest_report.txt"), report.as_bytes())?;
    // Written last: its presence marks a complete artifact set.
    write_atomic(&out.join("dataset.key"), cfg.dataset_key().as_bytes())?;
    Ok(Dataset { matrix, books })
}

fn key_matches(path: &Path, key: &str) -> bool {
    fs::read_to_string(path).is_ok_and(|k| k == key)
}

/// The ingested dataset for `cfg`, from disk when up to date.
pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let out = &cfg.output_dir;
    if !key_matches(&out.join("dataset.key"), &cfg.dataset_key()) {
        return cmd_ingest(cfg);
    }
    let read_table = |name: &str, fields: usize| -> Result<Vec<Vec<String>>> {
        let path = out.join(name);
        let text = fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
        text.lines()
            .skip(1)
            .map(|line| {
                let f: Vec<String> = line.splitn(fields, '\t').map(str::to_string).collect();
                if f.len() == fields {
                    Ok(f)
                } else {
                    Err(anyhow!("{}: malformed line {line:?}", path.display()))
                }
            })
            .collect()
    };
    let users: Vec<String> = read_table("users.tsv", 2)?.into_iter().map(|mut f| f.remove(1)).collect();
    let books: Vec<BookRecord> = read_table("items.tsv", 6)?
        .into_iter()
        .map(|f| {
            Ok(BookRecord {
                isbn: f[1].clone(),
                title: f[2].clone(),
                author: f[3].clone(),
                year: f[4].parse().context("bad year in items.tsv")?,
                publisher: f[5].clone(),
            })
        })
        .collect::<Result<_>>()?;
    let items = books.iter().map(|b| b.isbn.clone()).collect();
    let matrix = RatingMatrix::from_entries(users, items, read_entries(&out.join("ratings.tsv"))?)?;
    Ok(Dataset { matrix, books })
}

/// The taxonomy over `dataset`'s items: loaded from the configured JSON
/// document, or built from the item metadata.
pub fn taxonomy_for(cfg: &RunConfig, dataset: &Dataset) -> Result<Taxonomy> {
    match &cfg.taxonomy_json {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            let doc: TaxonomyJson =
                serde_json::from_str(&text).with_context(|| format!("invalid taxonomy {}", path.display()))?;
            Ok(Taxonomy::from_json(&doc, dataset.matrix.items())?)
        }
        None => Ok(build_taxonomy(&dataset.books, &cfg.hierarchy_fields)?),
    }
}

/// Build the taxonomy and write it to `taxonomy.json`.
pub fn cmd_taxonomy(cfg: &RunConfig) -> Result<PathBuf> {
    let dataset = load_dataset(cfg)?;
    let taxonomy = taxonomy_for(cfg, &dataset)?;
    let mut text = serde_json::to_string_pretty(&taxonomy.to_json())?;
    text.push('\n');
    let path = cfg.output_dir.join("taxonomy.json");
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

/// Cross-validate the four methods and write `report.csv`.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<(PathBuf, EvalReport)> {
    let dataset = load_dataset(cfg)?;
    let taxonomy = taxonomy_for(cfg, &dataset)?;
    let plan = make_folds(&dataset.matrix, cfg.n_folds, cfg.eval_seed)?;
    let report = run_cv(&dataset.matrix, &taxonomy, &plan, &cfg.methods)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv, cfg.record_wall_time)?;
    let path = cfg.output_dir.join("report.csv");
    write_atomic(&path, &csv)?;
    Ok((path, report))
}

/// Densified training matrix and its factors.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridModel {
    pub densified: RatingMatrix,
    /// m x k
    pub w: Array2<f64>,
    /// k x n
    pub h: Array2<f64>,
}

impl HybridModel {
    pub fn train(cfg: &RunConfig, dataset: &Dataset) -> Result<HybridModel> {
        let taxonomy = taxonomy_for(cfg, dataset)?;
        let densified = densify::impute(&dataset.matrix, &taxonomy, &cfg.methods.densify)?;
        let f = nmf::train(&densified, &cfg.methods.nmf)?;
        Ok(HybridModel {
            densified,
            w: f.w,
            h: f.h,
        })
    }

    pub fn save(&self, dir: &Path, key: &str) -> Result<()> {
        for (name, a) in [("W.txt", &self.w), ("H.txt", &self.h)] {
            let mut buf = Vec::new();
            write_matrix(&mut buf, a)?;
            write_atomic(&dir.join(name), &buf)?;
        }
        let mut densified = String::new();
        write_entries(&mut densified, &self.densified);
        write_atomic(&dir.join("densified.tsv"), densified.as_bytes())?;
        write_atomic(&dir.join("model.key"), key.as_bytes())
    }

    /// Load a saved model over `dataset`'s index space, if `key` matches.
    pub fn load(dir: &Path, key: &str, dataset: &Dataset) -> Result<Option<HybridModel>> {
        if !key_matches(&dir.join("model.key"), key) {
            return Ok(None);
        }
        let read = |name: &str| -> Result<Array2<f64>> {
            let path = dir.join(name);
            let file = fs::File::open(&path).with_context(|| format!("cannot read {}", path.display()))?;
            Ok(read_matrix(std::io::BufReader::new(file))?)
        };
        let (w, h) = (read("W.txt")?, read("H.txt")?);
        let m = &dataset.matrix;
        if w.nrows() != m.n_users() || h.ncols() != m.n_items() || w.ncols() != h.nrows() {
            bail!("model in {} does not fit the dataset", dir.display());
        }
        let densified =
            RatingMatrix::from_entries(m.users().to_vec(), m.items().to_vec(), read_entries(&dir.join("densified.tsv"))?)?;
        Ok(Some(HybridModel { densified, w, h }))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Recommendation {
    pub isbn: String,
    pub title: String,
    pub predicted: f64,
}

/// The `n` unrated items with the highest hybrid prediction for `user_id`,
/// ties broken by ISBN. Trains and saves the model when none is current.
pub fn cmd_recommend(cfg: &RunConfig, user_id: &str, n: usize) -> Result<Vec<Recommendation>> {
    let dataset = load_dataset(cfg)?;
    let m = &dataset.matrix;
    let user = m.user_index(user_id).ok_or_else(|| anyhow!("unknown user {user_id:?}"))?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let dir = cfg.output_dir.join("model");
    let key = cfg.model_key();
    let model = match HybridModel::load(&dir, &key, &dataset)? {
        Some(model) => model,
        None => {
            let model = HybridModel::train(cfg, &dataset)?;
            model.save(&dir, &key)?;
            model
        }
    };

    let fallback = m.row_mean(user).expect("preprocessed users have ratings");
    let col_counts = model.densified.column_counts();
    let row_known = model.densified.row_len(user) > 0;
    let rated = m.row_cols(user);
    let mut recs: Vec<Recommendation> = (0..m.n_items())
        .filter(|i| rated.binary_search(i).is_err())
        .map(|i| {
            let value = model.w.row(user).dot(&model.h.column(i));
            let predicted = if row_known && col_counts[i] > 0 && value.is_finite() {
                clip_rating(value)
            } else {
                fallback
            };
            Recommendation {
                isbn: dataset.books[i].isbn.clone(),
                title: dataset.books[i].title.clone(),
                predicted,
            }
        })
        .collect();
    recs.sort_by(|a, b| b.predicted.total_cmp(&a.predicted).then_with(|| a.isbn.cmp(&b.isbn)));
    recs.truncate(n);
    Ok(recs)
}
