//! Run configuration.
//!
//! The config file is a flat list of `section.key = value` lines with `#`
//! comments, which is a subset of TOML:
//!
//! ```text
//! data.users   = "BX-Users.csv"        # relative to the config file
//! data.books   = "BX-Books.csv"
//! data.ratings = "BX-Book-Ratings.csv"
//! subsample.top_users = 500            # 0 keeps every user
//! subsample.top_items = 1000
//! taxonomy.hierarchy_fields = "publisher,author"
//! densify.tau = 0.5
//! nmf.k = 20
//! eval.seed = 42
//! output.dir = "out"
//! ```
//!
//! Every key except the three data paths has a default; unknown keys are
//! rejected.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ontonmf::densify::DensifyConfig;
use ontonmf::evaluate::MethodConfigs;
use ontonmf::neighborhood::CfConfig;
use ontonmf::nmf::NmfConfig;
use ontonmf::synthetic::DumpPaths;
use ontonmf::taxonomy::HierarchyField;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    data: RawData,
    #[serde(default)]
    subsample: RawSubsample,
    #[serde(default)]
    taxonomy: RawTaxonomy,
    #[serde(default)]
    densify: RawDensify,
    #[serde(default)]
    nmf: RawNmf,
    #[serde(default)]
    cf: RawCf,
    #[serde(default)]
    eval: RawEval,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    users: PathBuf,
    books: PathBuf,
    ratings: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSubsample {
    top_users: Option<usize>,
    top_items: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTaxonomy {
    hierarchy_fields: Option<String>,
    json: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDensify {
    tau: Option<f64>,
    min_support: Option<usize>,
    max_neighbors: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNmf {
    k: Option<usize>,
    max_iters: Option<usize>,
    rel_tol: Option<f64>,
    seed: Option<u64>,
    epsilon: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCf {
    k_neighbors: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEval {
    n_folds: Option<usize>,
    seed: Option<u64>,
    record_wall_time: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub data: DumpPaths,
    /// `None` keeps every user (or item).
    pub top_users: Option<usize>,
    pub top_items: Option<usize>,
    pub hierarchy_fields: Vec<HierarchyField>,
    /// Load the taxonomy from this JSON document instead of building it.
    pub taxonomy_json: Option<PathBuf>,
    pub methods: MethodConfigs,
    pub n_folds: usize,
    pub eval_seed: u64,
    pub record_wall_time: bool,
    pub output_dir: PathBuf,
}

fn resolve(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

impl RunConfig {
    /// Parse config text; relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<RunConfig> {
        let raw: RawConfig = toml::from_str(text).context("invalid config")?;
        let nonzero = |v: Option<usize>| v.filter(|&n| n > 0);
        let hierarchy_fields = match raw.taxonomy.hierarchy_fields {
            Some(s) => HierarchyField::parse_list(&s)?,
            None => HierarchyField::DEFAULT.to_vec(),
        };
        let d = DensifyConfig::default();
        let n = NmfConfig::default();
        let methods = MethodConfigs {
            densify: DensifyConfig {
                tau: raw.densify.tau.unwrap_or(d.tau),
                min_support: raw.densify.min_support.unwrap_or(d.min_support),
                max_neighbors: raw.densify.max_neighbors.unwrap_or(d.max_neighbors),
            },
            nmf: NmfConfig {
                k: raw.nmf.k.unwrap_or(n.k),
                max_iters: raw.nmf.max_iters.unwrap_or(n.max_iters),
                rel_tol: raw.nmf.rel_tol.unwrap_or(n.rel_tol),
                seed: raw.nmf.seed.unwrap_or(n.seed),
                epsilon: raw.nmf.epsilon.unwrap_or(n.epsilon),
            },
            cf: CfConfig {
                k_neighbors: raw.cf.k_neighbors.unwrap_or(CfConfig::default().k_neighbors),
            },
        };
        let cfg = RunConfig {
            data: DumpPaths {
                users: resolve(base, raw.data.users),
                books: resolve(base, raw.data.books),
                ratings: resolve(base, raw.data.ratings),
            },
            top_users: nonzero(raw.subsample.top_users),
            top_items: nonzero(raw.subsample.top_items),
            hierarchy_fields,
            taxonomy_json: raw.taxonomy.json.map(|p| resolve(base, p)),
            methods,
            n_folds: raw.eval.n_folds.unwrap_or(5),
            eval_seed: raw.eval.seed.unwrap_or(42),
            record_wall_time: raw.eval.record_wall_time.unwrap_or(false),
            output_dir: resolve(base, raw.output.dir.unwrap_or_else(|| PathBuf::from("out"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::parse(&text, base).with_context(|| format!("in config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        self.methods.densify.validate()?;
        self.methods.nmf.validate()?;
        if self.methods.cf.k_neighbors == 0 {
            bail!("cf.k_neighbors must be at least 1");
        }
        if self.n_folds < 2 {
            bail!("eval.n_folds must be at least 2");
        }
        Ok(())
    }

    /// Fail early, naming the first missing input file.
    pub fn check_inputs(&self) -> Result<()> {
        let mut inputs = vec![&self.data.users, &self.data.books, &self.data.ratings];
        inputs.extend(&self.taxonomy_json);
        for p in inputs {
            if !p.is_file() {
                bail!("input file not found: {}", p.display());
            }
        }
        Ok(())
    }

    /// Canonical text of every setting that shapes the ingested dataset.
    pub fn dataset_key(&self) -> String {
        format!(
            "data.users = {}\ndata.books = {}\ndata.ratings = {}\nsubsample.top_users = {}\nsubsample.top_items = {}\n",
            self.data.users.display(),
            self.data.books.display(),
            self.data.ratings.display(),
            self.top_users.unwrap_or(0),
            self.top_items.unwrap_or(0),
        )
    }

    /// Canonical text of every setting that shapes the hybrid model.
    pub fn model_key(&self) -> String {
        let d = &self.methods.densify;
        let n = &self.methods.nmf;
        let fields: Vec<String> = self.hierarchy_fields.iter().map(|f| f.to_string()).collect();
        format!(
            "{}taxonomy.hierarchy_fields = {}\ntaxonomy.json = {}\ndensify.tau = {}\ndensify.min_support = {}\n\
             densify.max_neighbors = {}\nnmf.k = {}\nnmf.max_iters = {}\nnmf.rel_tol = {}\nnmf.seed = {}\nnmf.epsilon = {}\n",
            self.dataset_key(),
            fields.join(","),
            self.taxonomy_json.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            d.tau,
            d.min_support,
            d.max_neighbors,
            n.k,
            n.max_iters,
            n.rel_tol,
            n.seed,
            n.epsilon,
        )
    }
}

/// A config for the BookCrossing file names under `data_dir`, with every
/// other key at its default, suitable as a starting point.
pub fn template(data_dir: &Path, top_users: usize, top_items: usize) -> String {
    let p = DumpPaths::in_dir(data_dir);
    format!(
        "# ontonmf run configuration\n\
         data.users = {:?}\n\
         data.books = {:?}\n\
         data.ratings = {:?}\n\
         \n\
         subsample.top_users = {top_users}\n\
         subsample.top_items = {top_items}\n\
         \n\
         taxonomy.hierarchy_fields = \"publisher,author\"\n\
         \n\
         densify.tau = 0.5\n\
         densify.min_support = 1\n\
         densify.max_neighbors = 20\n\
         \n\
         nmf.k = 20\n\
         nmf.max_iters = 200\n\
         nmf.rel_tol = 1e-4\n\
         nmf.seed = 42\n\
         \n\
         cf.k_neighbors = 30\n\
         \n\
         eval.n_folds = 5\n\
         eval.seed = 42\n\
         eval.record_wall_time = false\n\
         \n\
         output.dir = \"out\"\n",
        p.users.display().to_string(),
        p.books.display().to_string(),
        p.ratings.display().to_string(),
    )
}
