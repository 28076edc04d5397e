use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info};

use twistchan::cache::BandCache;
use twistchan::config::RunConfig;
use twistchan::figures::{apply_preset, run_figure};
use twistchan::model::ChannelingModel;
use twistchan::{Error, Result};

#[derive(Parser)]
#[command(name = "twistchan", version, about = "Twisted-photon emission from axially channeled electrons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Configuration file of `section.key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set photon.m=3,6,9`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Reproduce one figure.
    Run {
        /// fig1, fig2, fig3, fig4, fig5-spectra or fig5-map.
        figure: String,
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory (overrides output.directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for grid evaluation.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Manage the band-solution cache.
    Bands {
        action: BandsAction,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BandsAction {
    Build,
    Inspect,
    Purge,
}

fn load_config(args: &ConfigArgs, figure: Option<&str>) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        cfg.apply_text(&std::fs::read_to_string(path)?)?;
    }
    if let Some(fig) = figure {
        apply_preset(&mut cfg, fig)?;
    }
    for s in &args.set {
        cfg.apply_override(s)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            figure,
            config,
            out,
            threads,
        } => {
            let mut cfg = load_config(&config, Some(&figure))?;
            if let Some(dir) = out {
                cfg.output.directory = dir;
            }
            let cache = BandCache::from_env_or(&cfg.output.cache_dir);
            let mut pool = rayon::ThreadPoolBuilder::new();
            if let Some(n) = threads {
                pool = pool.num_threads(n);
            }
            let pool = pool.build().map_err(|e| Error::Scan(e.to_string()))?;
            let output = pool.install(|| run_figure(&figure, &cfg, Some(&cache)))?;
            print!("{}", output.report);
            for f in &output.files {
                info!("[cli] output {}", f.display());
            }
        }
        Command::Bands { action, config } => {
            let cfg = load_config(&config, None)?;
            let cache = BandCache::from_env_or(&cfg.output.cache_dir);
            match action {
                BandsAction::Build => {
                    let (model, report) = ChannelingModel::build(&cfg, Some(&cache))?;
                    println!(
                        "cache {}: {} hits, {} solves, {} bands per set",
                        cache.dir().display(),
                        report.hits,
                        report.solves,
                        model.band_sets[0].states.len()
                    );
                }
                BandsAction::Inspect => {
                    let entries = cache.entries()?;
                    println!("cache {}: {} entries", cache.dir().display(), entries.len());
                    for e in entries {
                        println!(
                            "{} k_perp = ({:.6e}, {:.6e}) 1/A, {} bands",
                            e.key,
                            e.k_perp[0],
                            e.k_perp[1],
                            e.energies.len()
                        );
                        let energies: Vec<String> = e.energies.iter().map(|x| format!("{x:.6}")).collect();
                        println!("  energies (eV): {}", energies.join(", "));
                    }
                }
                BandsAction::Purge => {
                    let n = cache.purge()?;
                    println!("cache {}: removed {n} entries", cache.dir().display());
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}
