use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kaufs::datapipe::{format_real, load_csv, write_planted};
use kaufs::evalmetrics::evaluate;
use kaufs::harness::{self, report, ExperimentConfig};
use kaufs::{DatasetSpec, Error, LabelColumn, PlantedSpec};

#[derive(Parser)]
#[command(name = "kaufs", version, about = "Kernel-alignment unsupervised feature selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a grid-search experiment described by a TOML file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads; overrides the config file and KAUFS_WORKERS.
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory; overrides the config file and KAUFS_OUTPUT_DIR.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic dataset with planted informative features.
    Generate {
        /// Comma-separated `key=value` pairs, e.g. `n=200,d_informative=10,seed=3`.
        #[arg(long, default_value = "")]
        planted: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster a dataset on a fixed feature subset and print ACC, NMI and RED.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        /// Zero-based feature indices, comma-separated.
        #[arg(long, value_delimiter = ',', required = true)]
        features: Vec<usize>,
        /// Label column, by header name or zero-based index.
        #[arg(long, default_value = "label")]
        label: String,
        #[arg(long)]
        no_header: bool,
        #[arg(long)]
        no_standardize: bool,
        /// Number of clusters; defaults to the number of classes.
        #[arg(long)]
        clusters: Option<usize>,
        #[arg(long, default_value_t = 30)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Re-run the configuration stored in a run.json.
    Replay {
        #[arg(long)]
        record: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::AllGridPointsFailed(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn execute(command: Command) -> kaufs::Result<()> {
    match command {
        Command::Run {
            config,
            workers,
            out,
        } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            cfg.apply_env()?;
            if workers.is_some() {
                cfg.workers = workers;
            }
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            let record = harness::run(&cfg)?;
            report(&record, &cfg.output_dir)?;
            println!(
                "{} grid points, {} failed, reports in {}",
                record.points.len(),
                record.failures,
                cfg.output_dir.display()
            );
            for b in &record.best {
                println!(
                    "k={} acc={} nmi={} (point {})",
                    b.k,
                    format_real(b.acc_mean),
                    format_real(b.nmi_mean),
                    b.id
                );
            }
            Ok(())
        }
        Command::Generate { planted, out } => {
            let spec = PlantedSpec::parse_pairs(&planted)?;
            let data = write_planted(&spec, &out)?;
            println!(
                "wrote {} samples x {} features to {}",
                data.n_samples(),
                data.n_features(),
                out.display()
            );
            Ok(())
        }
        Command::Evaluate {
            data,
            features,
            label,
            no_header,
            no_standardize,
            clusters,
            repeats,
            seed,
        } => {
            let label_column = match label.parse::<usize>() {
                Ok(i) => LabelColumn::Index(i),
                Err(_) => LabelColumn::Name(label),
            };
            let spec = DatasetSpec {
                label_column: Some(label_column),
                has_header: !no_header,
                standardize: !no_standardize,
                ..DatasetSpec::new(data)
            };
            let data = load_csv(&spec)?;
            let c = match clusters.or(data.n_classes()) {
                Some(c) => c,
                None => return Err(Error::Config("dataset has no labels".into())),
            };
            let r = evaluate(&data, &features, c, repeats, seed)?;
            println!("acc_mean,acc_std,nmi_mean,nmi_std,red");
            println!(
                "{},{},{},{},{}",
                format_real(r.acc_mean),
                format_real(r.acc_std),
                format_real(r.nmi_mean),
                format_real(r.nmi_std),
                r.red.map(format_real).unwrap_or_default()
            );
            Ok(())
        }
        Command::Replay { record, out } => {
            let rec = harness::replay(&record, &out)?;
            println!("{} grid points replayed into {}", rec.points.len(), out.display());
            Ok(())
        }
    }
}
