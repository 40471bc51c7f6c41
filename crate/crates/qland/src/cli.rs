//! Command-line parsing. Flags override the config file, which overrides
//! the defaults.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qland_core::landscape::{AngleChoice, ConnectivityKind, LandscapeConfig, RolePlacement, UnitaryClass};
use qland_core::machines::ReferenceReadout;
use qland_core::sectors::RandomFamily;

use crate::commands::{self, Baseline, LandscapeRun, MachineSearchRun, RegionRun, Resolved, SweepRun};
use crate::config::{load_or_default, resolve_output_dir};
use crate::error::{CliError, Result};
use crate::manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "qland", version, about = "Thermal qubit machines and landscapes")]
pub struct Cli {
    /// Worker threads; 0 uses one per core. Output does not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Randomized search for machines that raise extractable work.
    MachineSearch(MachineSearchArgs),
    /// Closed eight-qubit landscape trials.
    Landscape(LandscapeArgs),
    /// Total positive work against the number of hot qubits, with fits.
    Sweep(SweepArgs),
    /// Reachable (linear entropy, concurrence) pairs.
    Region(RegionArgs),
    /// Re-run a manifest and compare output digests.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Cyclic,
    AllPairs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReadoutArg {
    ActorSlots,
    ReferenceSlot,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ConnectivityArg {
    Full7,
    Sym6,
    Sym5,
    Sym4,
    Messenger,
}

impl From<ConnectivityArg> for ConnectivityKind {
    fn from(c: ConnectivityArg) -> Self {
        match c {
            ConnectivityArg::Full7 => ConnectivityKind::Full7,
            ConnectivityArg::Sym6 => ConnectivityKind::Sym6,
            ConnectivityArg::Sym5 => ConnectivityKind::Sym5,
            ConnectivityArg::Sym4 => ConnectivityKind::Sym4,
            ConnectivityArg::Messenger => ConnectivityKind::Messenger,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum UnitaryArg {
    SimPair,
    CondSwap,
    UncondSwap,
    Random,
}

impl From<UnitaryArg> for UnitaryClass {
    fn from(u: UnitaryArg) -> Self {
        match u {
            UnitaryArg::SimPair => UnitaryClass::SimPair,
            UnitaryArg::CondSwap => UnitaryClass::CondSwap,
            UnitaryArg::UncondSwap => UnitaryClass::UncondSwap,
            UnitaryArg::Random => UnitaryClass::Random,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PlacementArg {
    Random,
    Ordered,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BaselineArg {
    Collisional,
}

#[derive(Debug, Args)]
pub struct MachineSearchArgs {
    /// TOML file with machine-search fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of actor qubits, placed first.
    #[arg(long)]
    pub actor: Option<usize>,
    #[arg(long)]
    pub ref_slot: Option<usize>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    /// Draw rotation phases as well as angles.
    #[arg(long)]
    pub phases: bool,
    #[arg(long, value_enum)]
    pub readout: Option<ReadoutArg>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Landscape fields shared by `landscape` and `sweep`.
#[derive(Debug, Args)]
pub struct LandscapeFlags {
    /// TOML file with landscape fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub hot_population: Option<f64>,
    #[arg(long)]
    pub cold_population: Option<f64>,
    #[arg(long, value_enum)]
    pub unitary: Option<UnitaryArg>,
    #[arg(long, value_enum)]
    pub placement: Option<PlacementArg>,
    /// Fixed rotation angle in radians.
    #[arg(long, conflicts_with = "random_angle")]
    pub theta: Option<f64>,
    /// Draw the angle uniformly from [0, 2π) per trial.
    #[arg(long)]
    pub random_angle: bool,
    /// One unitary for all trials.
    #[arg(long)]
    pub shared_unitary: bool,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl LandscapeFlags {
    fn apply(&self, cfg: &mut LandscapeConfig) {
        if let Some(p) = self.hot_population {
            cfg.hot_population = p;
        }
        if let Some(p) = self.cold_population {
            cfg.cold_population = p;
        }
        if let Some(u) = self.unitary {
            cfg.unitary_class = u.into();
        }
        if let Some(p) = self.placement {
            cfg.placement = match p {
                PlacementArg::Random => RolePlacement::Random,
                PlacementArg::Ordered => RolePlacement::Ordered,
            };
        }
        if let Some(t) = self.theta {
            cfg.angle = AngleChoice::Fixed(t);
        }
        if self.random_angle {
            cfg.angle = AngleChoice::RandomPerTrial;
        }
        if self.shared_unitary {
            cfg.shared_unitary = true;
        }
        if let Some(s) = self.steps {
            cfg.steps = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
    }
}

#[derive(Debug, Args)]
pub struct LandscapeArgs {
    #[command(flatten)]
    pub common: LandscapeFlags,
    #[arg(long, value_enum)]
    pub connectivity: Option<ConnectivityArg>,
    /// Number of hot qubits.
    #[arg(long)]
    pub hot: Option<usize>,
    /// Explicit hot qubit indices, e.g. 0,5.
    #[arg(long, value_delimiter = ',')]
    pub hot_qubits: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    pub baseline: Option<BaselineArg>,
    /// Skip the per-trial CSV files.
    #[arg(long)]
    pub summary_only: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: LandscapeFlags,
    /// Connectivities to sweep; defaults to the four symmetric ones.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub connectivity: Vec<ConnectivityArg>,
    #[arg(long)]
    pub hot_min: Option<usize>,
    #[arg(long)]
    pub hot_max: Option<usize>,
    /// Check the fit on synthetic e^{-2x} data and exit.
    #[arg(long)]
    pub self_test: bool,
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(long)]
    pub theta: Option<f64>,
    /// Add the three-qubit embedded scan.
    #[arg(long)]
    pub embed3: bool,
    #[arg(long)]
    pub p3: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Manifest file or the directory holding it.
    pub manifest: PathBuf,
    /// Defaults to the run directory with a `-replay` suffix.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn resolve_machine_search(a: &MachineSearchArgs) -> Result<MachineSearchRun> {
    let mut run: MachineSearchRun = load_or_default(a.config.as_deref())?;
    if let Some(n) = a.n {
        run.n = n;
    }
    if let Some(x) = a.actor {
        run.actor = x;
    }
    if a.ref_slot.is_some() {
        run.ref_slot = a.ref_slot;
    }
    if let Some(t) = a.trials {
        run.trials = t;
    }
    if let Some(s) = a.seed {
        run.seed = s;
    }
    if let Some(f) = a.family {
        run.family = match f {
            FamilyArg::Cyclic => RandomFamily::Cyclic,
            FamilyArg::AllPairs => RandomFamily::AllPairs,
        };
    }
    if a.phases {
        run.phases = true;
    }
    if let Some(r) = a.readout {
        run.readout = match r {
            ReadoutArg::ActorSlots => ReferenceReadout::ActorSlots,
            ReadoutArg::ReferenceSlot => ReferenceReadout::ReferenceSlot,
        };
    }
    Ok(run)
}

fn resolve_landscape(a: &LandscapeArgs) -> Result<LandscapeRun> {
    let mut run = LandscapeRun {
        landscape: load_or_default(a.common.config.as_deref())?,
        ..LandscapeRun::default()
    };
    let cfg = &mut run.landscape;
    a.common.apply(cfg);
    if let Some(c) = a.connectivity {
        cfg.connectivity = c.into();
    }
    if let Some(h) = a.hot {
        cfg.n_hot = h;
        cfg.hot_qubits = None;
    }
    if let Some(list) = &a.hot_qubits {
        cfg.n_hot = list.len();
        cfg.hot_qubits = Some(list.clone());
    }
    run.baseline = a.baseline.map(|BaselineArg::Collisional| Baseline::Collisional);
    run.trial_files = !a.summary_only;
    Ok(run)
}

fn resolve_sweep(a: &SweepArgs) -> Result<SweepRun> {
    let mut run = SweepRun::default();
    if let Some(path) = a.common.config.as_deref() {
        run.base = load_or_default(Some(path))?;
    }
    a.common.apply(&mut run.base);
    if !a.connectivity.is_empty() {
        run.connectivities = a.connectivity.iter().map(|&c| c.into()).collect();
    }
    if let Some(h) = a.hot_min {
        run.hot_min = h;
    }
    if let Some(h) = a.hot_max {
        run.hot_max = h;
    }
    Ok(run)
}

fn resolve_region(a: &RegionArgs) -> Result<RegionRun> {
    let mut run: RegionRun = load_or_default(a.config.as_deref())?;
    if let Some(r) = a.resolution {
        run.resolution = r;
    }
    if a.theta.is_some() {
        run.theta = a.theta;
    }
    if a.embed3 {
        run.embed3 = true;
    }
    if let Some(p) = a.p3 {
        run.p3 = p;
    }
    Ok(run)
}

/// Resolves a run command; `None` for commands that do not produce a run.
pub fn resolve(command: &Command) -> Result<Option<(Resolved, Option<PathBuf>)>> {
    Ok(Some(match command {
        Command::MachineSearch(a) => (Resolved::MachineSearch(resolve_machine_search(a)?), a.out.clone()),
        Command::Landscape(a) => (Resolved::Landscape(resolve_landscape(a)?), a.common.out.clone()),
        Command::Sweep(a) if a.self_test => return Ok(None),
        Command::Sweep(a) => (Resolved::Sweep(resolve_sweep(a)?), a.common.out.clone()),
        Command::Region(a) => (Resolved::Region(resolve_region(a)?), a.out.clone()),
        Command::Replay(_) => return Ok(None),
    }))
}

/// Runs the parsed command, printing progress lines to stdout.
pub fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Sweep(a) if a.self_test => {
            let fit = commands::sweep_self_test()?;
            println!("self-test passed: rate {:.12} amplitude {:.12}", fit.rate, fit.amplitude);
            Ok(())
        }
        Command::Replay(a) => {
            let manifest = RunManifest::read(&a.manifest)?;
            let dir = match &a.out {
                Some(d) => d.clone(),
                None => {
                    let run_dir = if a.manifest.is_dir() {
                        a.manifest.clone()
                    } else {
                        a.manifest.parent().map(PathBuf::from).unwrap_or_default()
                    };
                    let mut name = run_dir.file_name().map(|n| n.to_os_string()).unwrap_or_else(|| "run".into());
                    name.push("-replay");
                    run_dir.with_file_name(name)
                }
            };
            let (fresh, diffs) = commands::replay(&manifest, &dir, cli.workers)?;
            if diffs.is_empty() {
                println!("replay matches: {} files identical ({})", fresh.files.len(), dir.display());
                Ok(())
            } else {
                Err(CliError::Mismatch(diffs.join(", ")))
            }
        }
        command => {
            let (resolved, out) = resolve(command)?.expect("run command");
            let dir = resolve_output_dir(out, &resolved.dir_name());
            let (_, line) = resolved.execute(&dir, cli.workers)?;
            println!("{line}");
            println!("wrote {}", dir.display());
            Ok(())
        }
    }
}
