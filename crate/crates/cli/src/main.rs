use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use ontonmf::synthetic::{self, SyntheticConfig};
use ontonmf::taxonomy::HierarchyField;
use ontonmf_cli::{commands, config, RunConfig};

#[derive(Parser)]
#[command(name = "ontonmf", version, about = "Taxonomy-densified NMF recommender")]
struct Cli {
    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated hierarchy levels, overriding `taxonomy.hierarchy_fields`.
    #[arg(long, global = true, value_name = "LIST")]
    hierarchy_fields: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and preprocess the rating dump into the output directory.
    Ingest,
    /// Build the item taxonomy and write taxonomy.json.
    Taxonomy,
    /// Cross-validate CF, CB, CF_NMF and HYBRID and write report.csv.
    Evaluate,
    /// Top-N unrated items for one user under the hybrid model.
    Recommend {
        #[arg(long)]
        user: String,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Write a synthetic dataset in the BookCrossing layout plus a config
    /// for it into --out.
    Synthesize {
        #[arg(long, default_value_t = 1500)]
        users: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn run_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli.config.as_ref().context("--config is required for this command")?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(fields) = &cli.hierarchy_fields {
        cfg.hierarchy_fields = HierarchyField::parse_list(fields)?;
    }
    Ok(cfg)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Ingest => {
            let cfg = run_config(&cli)?;
            let d = commands::cmd_ingest(&cfg)?;
            println!(
                "{} users x {} items, {} ratings -> {}",
                d.matrix.n_users(),
                d.matrix.n_items(),
                d.matrix.nnz(),
                cfg.output_dir.display()
            );
        }
        Command::Taxonomy => {
            let path = commands::cmd_taxonomy(&run_config(&cli)?)?;
            println!("wrote {}", path.display());
        }
        Command::Evaluate => {
            let (path, report) = commands::cmd_evaluate(&run_config(&cli)?)?;
            print!("{report}");
            println!("wrote {}", path.display());
        }
        Command::Recommend { user, top } => {
            let recs = commands::cmd_recommend(&run_config(&cli)?, user, *top)?;
            for (rank, r) in recs.iter().enumerate() {
                println!("{}\t{}\t{:.3}\t{}", rank + 1, r.isbn, r.predicted, r.title);
            }
        }
        Command::Synthesize { users, seed } => {
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("data"));
            let raw = synthetic::generate(&SyntheticConfig {
                n_users: *users,
                seed: *seed,
                ..Default::default()
            });
            synthetic::write_bookcrossing(&raw, &dir)?;
            let cfg_path = dir.join("ontonmf.toml");
            commands::write_atomic(&cfg_path, config::template(std::path::Path::new(""), 500, 1000).as_bytes())?;
            println!("wrote {} ratings to {}; config at {}", raw.ratings.len(), dir.display(), cfg_path.display());
        }
    }
    Ok(())
}
