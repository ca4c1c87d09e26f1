use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use zeitlin::diagnostics::{
    default_kink_range, detect_kink, energy_spectrum, energy_transfer, invariants, read_spectrum_csv,
    spectrum_distance, write_invariants_csv, write_spectrum_csv, write_transfer_csv, SpectrumSeries,
};
use zeitlin::dynamics::ClosureKind;
use zeitlin::experiment::{
    fit_noise_from_dns, gen_ic, run_pipeline_with, run_single, single::normality_fractions, write_grid_csv, IcProfile, IcSpec,
    LBar, RunConfig, Snapshot,
};
use zeitlin::stochastic::NoiseModel;
use zeitlin::{Basis, Error, Result};

/// Euler–Zeitlin vorticity dynamics on the sphere with large-scale closures.
#[derive(Parser)]
#[command(name = "zeitlin", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Suppresses progress messages.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Writes a random initial condition as a snapshot.
    GenIc {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        amplitude: Option<f64>,
        #[arg(long)]
        l0: Option<f64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Full-resolution run from the configured initial condition.
    Dns {
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Finds the spectral kink in an `l,E` or `t,l,E` CSV.
    DetectKink {
        #[arg(long)]
        spectrum: PathBuf,
        #[arg(long)]
        lo: Option<usize>,
        #[arg(long)]
        hi: Option<usize>,
    },
    /// Runs a DNS from the configured initial condition and fits the noise
    /// model of the modes above l_bar.
    FitNoise {
        #[arg(long)]
        l_bar: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Runs one closure from the configured initial condition.
    RunClosure {
        #[arg(long)]
        closure: Option<ClosureKind>,
        #[arg(long)]
        l_bar: Option<usize>,
        #[arg(long)]
        noise: Option<PathBuf>,
    },
    /// Spectrum, invariants and energy transfer of a snapshot.
    Diagnose {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        l_bar: Option<usize>,
    },
    /// Log-spectral distance of each spectrum CSV to a reference.
    Compare {
        #[arg(long)]
        reference: PathBuf,
        #[arg(required = true)]
        others: Vec<PathBuf>,
        #[arg(long)]
        l_max: Option<usize>,
    },
    /// DNS to stationarity, kink, noise fit, all closures, comparison.
    Pipeline,
    /// Samples a snapshot on a latitude-longitude grid.
    ExportGrid {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        n_theta: Option<usize>,
        #[arg(long)]
        n_phi: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) | Error::ConfigFile { .. } => 2,
        Error::BlowUp { .. } => 3,
        Error::Io { .. } | Error::Format { .. } => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.out_dir = dir.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn run(cli: &Cli) -> Result<()> {
    let quiet = cli.quiet;
    let mut log = |msg: &str| {
        if !quiet {
            eprintln!("{msg}");
        }
    };
    match &cli.command {
        Command::GenIc {
            n,
            amplitude,
            l0,
            output,
        } => {
            let mut cfg = load_config(cli)?;
            if let Some(n) = n {
                cfg.n = *n;
            }
            let mut profile = match &cfg.ic {
                IcSpec::Profile(p) => p.clone(),
                IcSpec::Snapshot { .. } => IcProfile::default(),
            };
            if let IcProfile::Blob { l0: p_l0, amplitude: p_amp } = &mut profile {
                if let Some(a) = amplitude {
                    *p_amp = *a;
                }
                if l0.is_some() {
                    *p_l0 = *l0;
                }
            } else if amplitude.is_some() || l0.is_some() {
                return Err(Error::Config("--amplitude and --l0 apply to the blob profile only".into()));
            }
            cfg.ic = IcSpec::Profile(profile.clone());
            cfg.validate()?;
            let basis = Basis::build(cfg.n)?;
            let state = gen_ic(&basis, cfg.seed, &profile)?;
            let path = output.clone().unwrap_or_else(|| cfg.out_dir.join("ic.ezsn"));
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                create_dir(dir)?;
            }
            Snapshot {
                closure: ClosureKind::FullDns,
                step: 0,
                time: 0.0,
                seed: cfg.seed,
                state,
            }
            .write(&path)?;
            log(&format!("wrote {}", path.display()));
        }
        Command::Dns { t_end } => {
            let mut cfg = load_config(cli)?;
            if let Some(t) = t_end {
                cfg.t_end = *t;
            }
            let out = run_single(&cfg, ClosureKind::FullDns, cfg.n - 1, None).map_err(|e| blow_up_note(e, &cfg, ClosureKind::FullDns, &mut log))?;
            log(&format!("wrote {} and {}", out.spectrum.display(), out.snapshot.display()));
        }
        Command::DetectKink { spectrum, lo, hi } => {
            let e = read_spectrum_csv(spectrum)?;
            let (dlo, dhi) = default_kink_range(e.len() + 1);
            let k = detect_kink(&e, (lo.unwrap_or(dlo), hi.unwrap_or(dhi)))?;
            println!("l_bar = {}", k.l_bar);
            println!("breakpoint = {}", k.breakpoint);
            println!("slope_large = {}", k.slope_large);
            println!("slope_small = {}", k.slope_small);
            println!("found = {}", k.found);
        }
        Command::FitNoise { l_bar, output } => {
            let cfg = load_config(cli)?;
            let l_bar = match l_bar {
                Some(l) => *l,
                None => cfg.resolve_l_bar()?,
            };
            let (model, series) = fit_noise_from_dns(&cfg, l_bar)?;
            let path = output.clone().unwrap_or_else(|| cfg.out_dir.join("noise_model.txt"));
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                create_dir(dir)?;
            }
            model.save(&path)?;
            let (ks, ad) = normality_fractions(&series, l_bar);
            println!("modes = {}", model.mode_count());
            println!("dt_fit = {}", model.dt_fit);
            if let (Some(ks), Some(ad)) = (ks, ad) {
                println!("ks_pass_fraction = {ks}");
                println!("ad_pass_fraction = {ad}");
            }
            log(&format!("wrote {}", path.display()));
        }
        Command::RunClosure { closure, l_bar, noise } => {
            let mut cfg = load_config(cli)?;
            if let Some(k) = closure {
                cfg.closure = *k;
            }
            if let Some(l) = l_bar {
                cfg.l_bar = LBar::Fixed(*l);
            }
            if let Some(p) = noise {
                cfg.noise = Some(p.clone());
            }
            cfg.validate()?;
            cfg.validate_single_run()?;
            let l_bar = if cfg.closure == ClosureKind::FullDns {
                cfg.n - 1
            } else {
                cfg.resolve_l_bar()?
            };
            let model = match (&cfg.noise, cfg.closure.is_stochastic()) {
                (Some(p), true) => Some(NoiseModel::load(p)?),
                _ => None,
            };
            let kind = cfg.closure;
            let out = run_single(&cfg, kind, l_bar, model.as_ref()).map_err(|e| blow_up_note(e, &cfg, kind, &mut log))?;
            log(&format!("wrote {} and {}", out.spectrum.display(), out.snapshot.display()));
        }
        Command::Diagnose { snapshot, l_bar } => {
            let cfg = load_config(cli)?;
            let s = Snapshot::read(snapshot)?;
            let n = s.state.n();
            let basis = Basis::build(n)?;
            create_dir(&cfg.out_dir)?;
            let e = energy_spectrum(&basis, &s.state)?;
            let mut series = SpectrumSeries::new("snapshot");
            series.push(s.time, e.clone());
            write_spectrum_csv(&cfg.out_dir.join("diagnose_spectrum.csv"), &series)?;
            let inv = invariants(&basis, &s.state, n.min(4))?;
            println!("time = {}", s.time);
            println!("energy = {}", inv.energy);
            println!("enstrophy = {}", inv.enstrophy);
            write_invariants_csv(&cfg.out_dir.join("diagnose_invariants.csv"), &[(s.time, inv)])?;
            let l_bar = match l_bar {
                Some(l) => Some(*l),
                None if n >= 10 => detect_kink(&e, default_kink_range(n)).ok().map(|k| k.l_bar),
                None => None,
            };
            if let Some(l) = l_bar {
                println!("l_bar = {l}");
                let t = energy_transfer(&basis, &s.state, l)?;
                write_transfer_csv(&cfg.out_dir.join("diagnose_transfer.csv"), &t)?;
            }
            log(&format!("wrote diagnostics to {}", cfg.out_dir.display()));
        }
        Command::Compare { reference, others, l_max } => {
            let r = read_spectrum_csv(reference)?;
            for path in others {
                let e = read_spectrum_csv(path)?;
                let l_max = l_max.unwrap_or(r.len().min(e.len()));
                println!("{} {}", path.display(), spectrum_distance(&r, &e, l_max)?);
            }
        }
        Command::Pipeline => {
            let cfg = load_config(cli)?;
            let report = run_pipeline_with(&cfg, &mut log)?;
            let s = &report.summary;
            println!("l_bar = {}", s.kink.l_bar);
            for r in &s.runs {
                println!(
                    "{} distance = {} pileup = {}",
                    r.closure,
                    r.distance.map_or("-".into(), |d| d.to_string()),
                    r.pileup_ratio.map_or("-".into(), |d| d.to_string())
                );
            }
            log(&format!("summary in {}", report.out_dir.join("summary.toml").display()));
        }
        Command::ExportGrid {
            snapshot,
            n_theta,
            n_phi,
            output,
        } => {
            let cfg = load_config(cli)?;
            let s = Snapshot::read(snapshot)?;
            let n = s.state.n();
            let basis = Basis::build(n)?;
            let path = output.clone().unwrap_or_else(|| cfg.out_dir.join("grid.csv"));
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                create_dir(dir)?;
            }
            write_grid_csv(&path, &basis, &s.state, n_theta.unwrap_or(n), n_phi.unwrap_or(2 * n))?;
            log(&format!("wrote {}", path.display()));
        }
    }
    Ok(())
}

fn blow_up_note(e: Error, cfg: &RunConfig, kind: ClosureKind, log: &mut dyn FnMut(&str)) -> Error {
    if matches!(e, Error::BlowUp { .. }) {
        let path = cfg.out_dir.join(format!("run_{}_last_good.ezsn", kind.name()));
        if path.exists() {
            log(&format!("last good state saved to {}", path.display()));
        }
    }
    e
}
