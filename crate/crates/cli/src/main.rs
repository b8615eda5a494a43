use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fsemotion::dataset::{generate_dataset, load_maps, save_maps, simulate_sample, SimConfig};
use fsemotion::io::{export_image, load_image};
use fsemotion::mdme::{protocol_dictionary, PROTOCOL_TD_MS, PROTOCOL_TE_MS};
use fsemotion::phantom::{generate_phantom, phantom_from_mdme, synthesize_mdme};
use fsemotion::{nrmse, ssim};

/// Fast spin echo motion artifact simulator.
#[derive(Debug, Parser)]
#[command(name = "fsesim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write procedural PD / T2 / T1 maps as pd.fseimg, t2.fseimg, t1.fseimg.
    Phantom(SimArgs),
    /// Print the echo-train schedule as `tr,echo,line,te_ms`.
    Schedule(SimArgs),
    /// Simulate one sample and print its metrics.
    Simulate(SimArgs),
    /// Generate a paired clean/corrupt dataset with manifest.
    Dataset(SimArgs),
    /// Compare two image files: prints `ssim=<v> nrmse=<v>`.
    Metrics {
        reference: PathBuf,
        estimate: PathBuf,
    },
    /// Fit T1 / T2 / PD maps from synthetic MDME signals by dictionary matching.
    Match {
        #[command(flatten)]
        sim: SimArgs,
        /// Maps directory to forward-simulate from (default: procedural phantom).
        #[arg(long)]
        maps: Option<PathBuf>,
        /// Standard deviation of additive noise on the MDME signals.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
}

#[derive(Debug, Args)]
struct SimArgs {
    /// Flat `key = value` config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    etl: Option<usize>,
    #[arg(long = "esp-ms")]
    esp_ms: Option<f64>,
    #[arg(long)]
    events: Option<usize>,
    #[arg(long = "sigma-deg")]
    sigma_deg: Option<f64>,
    #[arg(long = "sigma-noise")]
    sigma_noise: Option<f64>,
    /// fse_aware, fse_agnostic or both.
    #[arg(long)]
    pipeline: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SimArgs {
    fn config(&self) -> Result<SimConfig> {
        let mut cfg = match &self.config {
            Some(p) => SimConfig::load(p)?,
            None => SimConfig::default(),
        };
        let overrides: [(&str, Option<String>); 10] = [
            ("base_seed", self.seed.map(|v| v.to_string())),
            ("etl", self.etl.map(|v| v.to_string())),
            ("esp_ms", self.esp_ms.map(|v| v.to_string())),
            ("n_events", self.events.map(|v| v.to_string())),
            ("sigma_deg", self.sigma_deg.map(|v| v.to_string())),
            ("sigma_noise", self.sigma_noise.map(|v| v.to_string())),
            ("pipeline", self.pipeline.clone()),
            ("n_samples", self.samples.map(|v| v.to_string())),
            ("ny", self.ny.map(|v| v.to_string())),
            ("nx", self.nx.map(|v| v.to_string())),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out(&self) -> Result<&Path> {
        match &self.out {
            Some(p) => Ok(p),
            None => bail!("--out is required"),
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Phantom(args) => {
            let cfg = args.config()?;
            let out = args.out()?;
            let maps = generate_phantom(cfg.ny, cfg.nx, cfg.base_seed)?;
            save_maps(&maps, out)?;
            println!("wrote {}x{} maps to {}", cfg.ny, cfg.nx, out.display());
        }
        Command::Schedule(args) => {
            let table = args.config()?.schedule()?.to_table();
            match &args.out {
                Some(p) => std::fs::write(p, table).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{table}"),
            }
        }
        Command::Simulate(args) => {
            let cfg = args.config()?;
            let maps = match &cfg.phantom {
                fsemotion::dataset::PhantomSource::File(p) => Some(load_maps(p)?),
                _ => None,
            };
            let pair = simulate_sample(&cfg, maps.as_ref(), 0)?;
            if let Some(out) = &args.out {
                std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
                export_image(&pair.clean, out.join("clean.fseimg"))?;
                for (p, img) in &pair.corrupt {
                    export_image(img, out.join(format!("{p}.fseimg")))?;
                }
            }
            let clean = pair.clean.to_real();
            let angles: Vec<String> = pair.trajectory.event_angles().iter().map(|a| format!("{a:.3}")).collect();
            println!("seed={} angles_deg={}", pair.seed, angles.join(";"));
            for (p, img) in &pair.corrupt {
                let est = img.to_real();
                println!("pipeline={p} ssim={} nrmse={}", ssim(&clean, &est, None)?, nrmse(&clean, &est)?);
            }
        }
        Command::Dataset(args) => {
            let cfg = args.config()?;
            let out = args.out()?;
            let manifest = generate_dataset(&cfg, out)?;
            println!(
                "wrote {} samples, {} records to {}",
                manifest.completed_samples,
                manifest.records.len(),
                out.display()
            );
        }
        Command::Metrics { reference, estimate } => {
            let r = load_image(&reference)?.to_real();
            let e = load_image(&estimate)?.to_real();
            println!("ssim={} nrmse={}", ssim(&r, &e, None)?, nrmse(&r, &e)?);
        }
        Command::Match { sim, maps, noise } => {
            let cfg = sim.config()?;
            let truth = match maps {
                Some(dir) => load_maps(dir)?,
                None => generate_phantom(cfg.ny, cfg.nx, cfg.base_seed)?,
            };
            let volume = synthesize_mdme(&truth, &PROTOCOL_TD_MS, &PROTOCOL_TE_MS, noise, cfg.base_seed)?;
            let fitted = phantom_from_mdme(&volume, &protocol_dictionary())?;
            let t1_true = truth.t1().context("maps lack a T1 channel")?;
            let t1_fit = fitted.t1().expect("fitted maps carry T1");
            let (mut fg, mut exact) = (0usize, 0usize);
            for i in 0..truth.pd().data().len() {
                if truth.pd().data()[i] > 0.0 {
                    fg += 1;
                    if t1_fit.data()[i] == t1_true.data()[i] && fitted.t2().data()[i] == truth.t2().data()[i] {
                        exact += 1;
                    }
                }
            }
            if let Some(out) = &sim.out {
                save_maps(&fitted, out)?;
            }
            println!("foreground={fg} exact_t1_t2={exact}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
