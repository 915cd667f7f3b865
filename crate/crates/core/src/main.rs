use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use riss_reg::cohort::synthetic::{empirical_stage_rates, generate_synthetic, SyntheticSpec};
use riss_reg::cohort::{load_csv, save_csv, Cohort, SplitSpec};
use riss_reg::manifest::{sha256_file, Manifest};
use riss_reg::pipeline::{
    fmt_hidden_grid, parse_grid, parse_hidden_grid, rerun_from_manifest, run_pipeline, PipelineConfig, RegChoice,
    StageError, TOOL_VERSION,
};
use riss_reg::staging::{stage_cohort, write_stage_report};

#[derive(Parser)]
#[command(
    name = "riss-reg",
    version,
    about = "Interpretability-regularized survival classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic cohort
    Generate {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// `key = value` spec file; flags override it
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the default synthetic spec
    DefaultSpec {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the R-ISS stage of every record
    Stage {
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full protocol on a cohort
    Pipeline {
        #[arg(long, value_parser = parse_reg)]
        reg: RegChoice,
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long, default_value = "0:8:1")]
        alphas: String,
        #[arg(long, default_value = "runs")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Defaults to --seed
        #[arg(long)]
        split_seed: Option<u64>,
        /// `n_aux,n_kf,n_test`
        #[arg(long)]
        fixed_counts: Option<String>,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Candidate architectures, e.g. `32-16,16,8`
        #[arg(long)]
        hidden_grid: Option<String>,
        #[arg(long)]
        shap_permutations: Option<usize>,
    },
    /// Reproduce a pipeline run from its manifest and compare output digests
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        /// Cohort file if it moved since the original run
        #[arg(long)]
        cohort: Option<PathBuf>,
        #[arg(long, default_value = "runs")]
        out_dir: PathBuf,
    },
}

fn parse_reg(s: &str) -> Result<RegChoice, String> {
    s.parse().map_err(|e: riss_reg::Error| e.to_string())
}

fn generate(n: Option<usize>, seed: Option<u64>, spec_path: Option<&Path>, out: &Path) -> anyhow::Result<()> {
    let mut spec = match spec_path {
        Some(p) => SyntheticSpec::load(p).with_context(|| format!("reading spec {}", p.display()))?,
        None => SyntheticSpec::default(),
    };
    if let Some(n) = n {
        spec.n_patients = n;
    }
    if let Some(s) = seed {
        spec.seed = s;
    }
    let cohort = generate_synthetic(&spec)?;
    save_csv(&cohort, out)?;
    let rates = empirical_stage_rates(&cohort, &spec.thresholds)?;
    let mut m = Manifest::new();
    m.set("tool", "riss-reg");
    m.set("tool_version", TOOL_VERSION);
    m.set("command", "generate");
    m.set("seed", spec.seed);
    m.set("n_patients", spec.n_patients);
    m.set("output", out.display());
    m.set("output.sha256", sha256_file(out)?);
    m.set("stage_death_rates", format!("{},{},{}", rates[0], rates[1], rates[2]));
    let spec_path = sidecar(out, "spec.txt");
    fs::write(&spec_path, spec.to_text())?;
    m.set("spec", spec_path.display());
    m.set("spec.sha256", sha256_file(&spec_path)?);
    m.write(sidecar(out, "manifest.txt"))?;
    println!("wrote {} records to {}", cohort.len(), out.display());
    Ok(())
}

fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(format!(".{suffix}"));
    out.with_file_name(name)
}

fn stage(cohort_path: &Path, out: &Path) -> anyhow::Result<()> {
    // A zero-byte file is an empty cohort.
    let cohort = if fs::metadata(cohort_path)?.len() == 0 {
        Cohort::default()
    } else {
        load_csv(cohort_path)?
    };
    let stages = stage_cohort(&cohort, &Default::default())?;
    write_stage_report(&cohort, &stages, BufWriter::new(File::create(out)?))?;
    let c = stages.counts();
    println!(
        "staged {} records (stage 1/2/3: {}/{}/{})",
        cohort.len(),
        c[0],
        c[1],
        c[2]
    );
    Ok(())
}

fn parse_counts(s: &str) -> anyhow::Result<(usize, usize, usize)> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| riss_reg::Error::Validation(format!("bad --fixed-counts `{s}`")))?;
    match v.as_slice() {
        [a, b, c] => Ok((*a, *b, *c)),
        _ => Err(riss_reg::Error::Validation(format!("--fixed-counts needs three values, got `{s}`")).into()),
    }
}

fn report_run(summary: &riss_reg::pipeline::RunSummary) {
    println!("run directory: {}", summary.run_dir.display());
    println!("auxiliary pair: {}", summary.pair_search.best);
    let b = &summary.selection.best;
    println!(
        "selected: layers {:?}, lr {}, epochs {}",
        b.layer_sizes, b.learning_rate, b.epochs
    );
    for r in summary.sweep.test_rows() {
        println!(
            "alpha {:>4}: acc {:.3} auc {} loss1 {:.4} reg {:.4}",
            r.alpha,
            r.accuracy,
            r.auc.map(|a| format!("{a:.3}")).unwrap_or_else(|| "-".into()),
            r.loss1,
            r.reg_loss
        );
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate { n, seed, spec, out } => generate(n, seed, spec.as_deref(), &out),
        Command::DefaultSpec { out } => {
            let text = SyntheticSpec::default().to_text();
            match out {
                Some(p) => fs::write(p, text)?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::Stage { cohort, out } => stage(&cohort, &out),
        Command::Pipeline {
            reg,
            cohort,
            alphas,
            out_dir,
            seed,
            split_seed,
            fixed_counts,
            k,
            hidden_grid,
            shap_permutations,
        } => {
            let mut config = PipelineConfig {
                reg,
                alphas: parse_grid(&alphas)?,
                seed,
                k,
                split: SplitSpec {
                    seed: split_seed.unwrap_or(seed),
                    ..SplitSpec::default()
                },
                ..PipelineConfig::default()
            };
            if let Some(s) = fixed_counts {
                config.split.fixed_counts = Some(parse_counts(&s)?);
            }
            if let Some(h) = hidden_grid {
                config.hidden_grid = parse_hidden_grid(&h)?;
            }
            if let Some(p) = shap_permutations {
                config.shap_permutations = p;
            }
            log::info!("architectures {}", fmt_hidden_grid(&config.hidden_grid));
            let summary = run_pipeline(&cohort, &config, &out_dir)?;
            report_run(&summary);
            Ok(())
        }
        Command::Rerun {
            manifest,
            cohort,
            out_dir,
        } => {
            let (summary, mismatched) = rerun_from_manifest(&manifest, cohort.as_deref(), &out_dir)?;
            report_run(&summary);
            if !mismatched.is_empty() {
                bail!(riss_reg::Error::Validation(format!(
                    "outputs differ from the manifest: {}",
                    mismatched.join(", ")
                )));
            }
            println!("all {} output digests match", summary.outputs.len());
            Ok(())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<StageError>() {
            return e.error.exit_code() as u8;
        }
        if let Some(e) = cause.downcast_ref::<riss_reg::Error>() {
            return e.exit_code() as u8;
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
