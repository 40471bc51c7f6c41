//! The experiments behind each subcommand. Every command resolves to a
//! serializable run description so a manifest can replay it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use qland_core::landscape::{
    aggregate, build_connectivity, collisional_baseline, fit_exponential, positive_interval_stats,
    run_trial, ConnectivityKind, ExpFit, LandscapeConfig, Selection, SweepPoint, TrialRecord, N,
};
use qland_core::machines::{
    accessible_region_scan, search_trial, ReferenceReadout, RegionConfig, RegionEmbedding, RegionPoint,
    SearchConfig, SearchReport,
};
use qland_core::sectors::{RandomFamily, RandomUnitaryOptions};

use crate::error::{CliError, Result};
use crate::manifest::{unix_now, RunManifest};
use crate::output::{fmt_f64, fmt_opt, OutputDir};
use crate::runner::ordered_map;

pub const MACHINE_SEARCH: &str = "machine-search";
pub const LANDSCAPE: &str = "landscape";
pub const SWEEP: &str = "sweep";
pub const REGION: &str = "region";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MachineSearchRun {
    pub n: usize,
    pub actor: usize,
    pub ref_slot: Option<usize>,
    pub trials: u64,
    pub seed: u64,
    pub family: RandomFamily,
    pub phases: bool,
    pub readout: ReferenceReadout,
    pub population_min: f64,
    pub population_max: f64,
}

impl Default for MachineSearchRun {
    fn default() -> Self {
        Self {
            n: 4,
            actor: 1,
            ref_slot: None,
            trials: 10_000,
            seed: 7,
            family: RandomFamily::Cyclic,
            phases: false,
            readout: ReferenceReadout::default(),
            population_min: 0.01,
            population_max: 0.49,
        }
    }
}

impl MachineSearchRun {
    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            ref_slot: self.ref_slot,
            unitary: RandomUnitaryOptions {
                family: self.family,
                sample_phases: self.phases,
            },
            readout: self.readout,
            population_range: (self.population_min, self.population_max),
            ..SearchConfig::new(self.n, self.actor, self.trials, self.seed)
        }
    }

    pub fn dir_name(&self) -> String {
        format!("machine-search-n{}-a{}-s{}", self.n, self.actor, self.seed)
    }
}

pub fn machine_search(run: &MachineSearchRun, out: &mut OutputDir, workers: usize) -> Result<SearchReport> {
    let config = run.search_config();
    config.validate()?;
    let trials = ordered_map(workers, config.trials, |i| Ok(search_trial(&config, i)?))?;

    let mut header = vec!["trial".to_owned()];
    header.extend((0..config.n).map(|q| format!("p{q}")));
    header.extend(["t0", "t1", "delta_w_ex", "positive"].map(String::from));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = trials.iter().map(|t| {
        let mut row = vec![t.instance.trial_index.to_string()];
        row.extend(t.instance.populations.iter().map(|&p| fmt_f64(p)));
        match t.evaluation {
            Some(e) => {
                row.extend([fmt_f64(e.t0), fmt_f64(e.t1), fmt_f64(e.delta_w_ex)]);
                row.push(u8::from(e.delta_w_ex > qland_core::machines::POSITIVE_EPS).to_string());
            }
            None => row.extend(["", "", "", "boundary"].map(String::from)),
        }
        row
    });
    out.csv("trials.csv", &header, rows)?;

    let mut report = SearchReport::empty(config);
    for t in trials {
        report.record(t);
    }
    out.json("search_report.json", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    Collisional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeRun {
    pub landscape: LandscapeConfig,
    pub baseline: Option<Baseline>,
    /// Write one CSV per trial.
    pub trial_files: bool,
}

impl Default for LandscapeRun {
    fn default() -> Self {
        Self {
            landscape: LandscapeConfig::default(),
            baseline: None,
            trial_files: true,
        }
    }
}

impl LandscapeRun {
    pub fn dir_name(&self) -> String {
        let c = &self.landscape;
        let mut name = format!(
            "landscape-{}-{}-hot{}-s{}",
            c.connectivity.name(),
            c.unitary_class.name(),
            c.n_hot,
            c.master_seed
        );
        if self.baseline.is_some() {
            name.push_str("-collisional");
        }
        name
    }
}

/// Contents of `summary.json` for a landscape run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeSummaryFile {
    pub kind: String,
    pub connectivity: ConnectivityKind,
    pub edges: Vec<(usize, usize)>,
    pub trials: usize,
    pub steps: usize,
    pub hot_qubits: Vec<usize>,
    pub mean_initial_temperature: f64,
    pub hot_percent_positive: f64,
    pub cold_percent_positive: f64,
    pub mean_total_positive_work: f64,
    pub positive_runs: usize,
    pub runs_at_least_25: usize,
    pub runs_at_most_6: usize,
    pub theta: Vec<Option<f64>>,
    pub unitary: Option<qland_core::sectors::Provenance>,
}

fn roles_field(roles: &[usize; 4]) -> String {
    roles.map(|r| r.to_string()).join(" ")
}

fn selection_fields(sel: Option<Selection>) -> [String; 2] {
    match sel {
        Some(s) => [roles_field(&s.roles[0]), roles_field(&s.roles[1])],
        None => [String::new(), String::new()],
    }
}

fn per_qubit_header(first: &str, prefix: &str) -> Vec<String> {
    let mut h = vec![first.to_owned()];
    h.extend((0..N).map(|q| format!("{prefix}{q}")));
    h
}

fn write_trial(out: &mut OutputDir, rec: &TrialRecord) -> Result<()> {
    let rows = rec.steps.iter().flat_map(|s| {
        (0..N).map(move |q| {
            vec![
                s.step.to_string(),
                q.to_string(),
                fmt_f64(s.populations[q]),
                fmt_f64(s.temperatures[q]),
                fmt_f64(s.t_ref[q]),
                fmt_f64(s.w_ex[q]),
                fmt_opt(s.dw_ex.as_ref().map(|d| d[q])),
            ]
        })
    });
    out.csv(
        &format!("trials/trial_{:06}.csv", rec.trial_index),
        &["step", "qubit", "q", "T", "T_ref", "W_ex", "dW_ex"],
        rows,
    )?;
    if rec.steps.iter().any(|s| s.selection.is_some()) {
        let rows = rec.steps.iter().filter(|s| s.selection.is_some()).map(|s| {
            let [a, b] = selection_fields(s.selection);
            vec![s.step.to_string(), a, b]
        });
        out.csv(
            &format!("trials/trial_{:06}_groups.csv", rec.trial_index),
            &["step", "group_a", "group_b"],
            rows,
        )?;
    }
    Ok(())
}

pub fn landscape(run: &LandscapeRun, out: &mut OutputDir, workers: usize) -> Result<LandscapeSummaryFile> {
    let cfg = &run.landscape;
    cfg.validate()?;
    if cfg.trials == 0 {
        return Err(CliError::Invalid("trials must be at least 1".into()));
    }
    let records = ordered_map(workers, cfg.trials, |i| {
        Ok(match run.baseline {
            Some(Baseline::Collisional) => collisional_baseline(cfg, i)?,
            None => run_trial(cfg, i)?,
        })
    })?;
    if run.trial_files {
        for rec in &records {
            write_trial(out, rec)?;
        }
    }

    let first = &records[0];
    let h = per_qubit_header("step", "T_q");
    out.csv(
        "fig4_temperatures.csv",
        &h.iter().map(String::as_str).collect::<Vec<_>>(),
        first.steps.iter().map(|s| {
            let mut row = vec![s.step.to_string()];
            row.extend(s.temperatures.iter().map(|&t| fmt_f64(t)));
            row
        }),
    )?;
    let h = per_qubit_header("step", "dW_q");
    out.csv(
        "fig5_delta_work.csv",
        &h.iter().map(String::as_str).collect::<Vec<_>>(),
        first.steps.iter().filter_map(|s| {
            s.dw_ex.as_ref().map(|d| {
                let mut row = vec![s.step.to_string()];
                row.extend(d.iter().map(|&x| fmt_f64(x)));
                row
            })
        }),
    )?;
    let h = per_qubit_header("step", "W_over_T_q");
    out.csv(
        "fig6_work.csv",
        &h.iter().map(String::as_str).collect::<Vec<_>>(),
        first.steps.iter().map(|s| {
            let mut row = vec![s.step.to_string()];
            row.extend(s.w_ex.iter().map(|&w| fmt_f64(w / first.mean_initial_temperature)));
            row
        }),
    )?;
    out.csv(
        "fig7a_percent_positive.csv",
        &["trial", "qubit", "class", "percent_positive"],
        records.iter().flat_map(|r| {
            (0..N).map(move |q| {
                vec![
                    r.trial_index.to_string(),
                    q.to_string(),
                    if r.is_hot(q) { "hot" } else { "cold" }.to_owned(),
                    fmt_f64(r.percent_positive(q)),
                ]
            })
        }),
    )?;

    let mut run_rows = Vec::new();
    let mut by_length: std::collections::BTreeMap<usize, usize> = Default::default();
    for r in &records {
        for run in positive_interval_stats(r).runs {
            *by_length.entry(run.length).or_default() += 1;
            run_rows.push(vec![
                r.trial_index.to_string(),
                run.qubit.to_string(),
                if run.hot { "hot" } else { "cold" }.to_owned(),
                run.start_step.to_string(),
                run.length.to_string(),
            ]);
        }
    }
    out.csv("fig9b_intervals.csv", &["trial", "qubit", "class", "start_step", "length"], run_rows)?;
    let total_steps = (records.len() * N * cfg.steps).max(1) as f64;
    out.csv(
        "fig9a_interval_histogram.csv",
        &["length", "runs", "steps_in_runs", "percent_of_steps"],
        by_length.iter().map(|(&len, &count)| {
            vec![
                len.to_string(),
                count.to_string(),
                (len * count).to_string(),
                fmt_f64(100.0 * (len * count) as f64 / total_steps),
            ]
        }),
    )?;

    let agg = aggregate(&records)?;
    let summary = LandscapeSummaryFile {
        kind: match run.baseline {
            Some(Baseline::Collisional) => "collisional",
            None => "landscape",
        }
        .to_owned(),
        connectivity: cfg.connectivity,
        edges: build_connectivity(cfg.connectivity).edges(),
        trials: records.len(),
        steps: cfg.steps,
        hot_qubits: first.hot_qubits.clone(),
        mean_initial_temperature: first.mean_initial_temperature,
        hot_percent_positive: agg.hot.mean_percent,
        cold_percent_positive: agg.cold.mean_percent,
        mean_total_positive_work: agg.mean_total_positive_work,
        positive_runs: agg.intervals.runs.len(),
        runs_at_least_25: agg.intervals.count_at_least(25),
        runs_at_most_6: agg.intervals.count_at_most(6),
        theta: records.iter().map(|r| r.theta).collect(),
        unitary: cfg.shared_unitary.then(|| first.unitary.clone()).flatten(),
    };
    out.json("summary.json", &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepRun {
    pub base: LandscapeConfig,
    pub connectivities: Vec<ConnectivityKind>,
    pub hot_min: usize,
    pub hot_max: usize,
}

impl Default for SweepRun {
    fn default() -> Self {
        Self {
            base: LandscapeConfig {
                trials: 20,
                ..LandscapeConfig::default()
            },
            connectivities: ConnectivityKind::SYMMETRIC.to_vec(),
            hot_min: 1,
            hot_max: 7,
        }
    }
}

impl SweepRun {
    pub fn dir_name(&self) -> String {
        format!("sweep-s{}", self.base.master_seed)
    }

    pub fn hot_counts(&self) -> Vec<usize> {
        (self.hot_min..=self.hot_max).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.hot_min < 1 || self.hot_max > 7 || self.hot_min > self.hot_max {
            return Err(CliError::Invalid("hot counts must satisfy 1 <= hot-min <= hot-max <= 7".into()));
        }
        if self.hot_counts().len() < 3 {
            return Err(CliError::Invalid(
                "an exponential fit needs at least 3 hot counts; widen --hot-min/--hot-max".into(),
            ));
        }
        if self.connectivities.is_empty() {
            return Err(CliError::Invalid("no connectivity selected".into()));
        }
        if self.base.trials == 0 {
            return Err(CliError::Invalid("trials must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSeries {
    pub connectivity: ConnectivityKind,
    pub points: Vec<SweepPoint>,
    pub fit: ExpFit,
}

pub fn sweep(run: &SweepRun, out: &mut OutputDir, workers: usize) -> Result<Vec<SweepSeries>> {
    run.validate()?;
    let hots = run.hot_counts();
    let trials = run.base.trials;
    let per_kind = hots.len() as u64 * trials;
    let tasks = run.connectivities.len() as u64 * per_kind;
    let config_for = |kind: ConnectivityKind, n_hot: usize| LandscapeConfig {
        connectivity: kind,
        n_hot,
        hot_qubits: None,
        ..run.base.clone()
    };
    let totals = ordered_map(workers, tasks, |i| {
        let kind = run.connectivities[(i / per_kind) as usize];
        let n_hot = hots[((i % per_kind) / trials) as usize];
        let trial = i % trials;
        Ok(run_trial(&config_for(kind, n_hot), trial)?.total_positive_work())
    })?;

    let mut series = Vec::new();
    let mut total_rows = Vec::new();
    for (c, &kind) in run.connectivities.iter().enumerate() {
        let mut points = Vec::new();
        for (h, &n_hot) in hots.iter().enumerate() {
            let start = c * per_kind as usize + h * trials as usize;
            let slice = &totals[start..start + trials as usize];
            for (t, &v) in slice.iter().enumerate() {
                total_rows.push(vec![kind.name().to_owned(), n_hot.to_string(), t.to_string(), fmt_f64(v)]);
            }
            points.push(SweepPoint::from_totals(n_hot, slice));
        }
        let fit = fit_exponential(&points.iter().map(|p| (p.fraction, p.mean_total)).collect::<Vec<_>>())?;
        series.push(SweepSeries {
            connectivity: kind,
            points,
            fit,
        });
    }
    out.csv("sweep_totals.csv", &["connectivity", "n_hot", "trial", "total_positive_work"], total_rows)?;
    out.csv(
        "fig7b_sweep.csv",
        &["connectivity", "n_hot", "fraction", "mean_total_positive_work", "trials"],
        series.iter().flat_map(|s| {
            s.points.iter().map(move |p| {
                vec![
                    s.connectivity.name().to_owned(),
                    p.n_hot.to_string(),
                    fmt_f64(p.fraction),
                    fmt_f64(p.mean_total),
                    p.trials.to_string(),
                ]
            })
        }),
    )?;
    out.csv(
        "fig7b_fit.csv",
        &["connectivity", "amplitude", "rate", "residual"],
        series.iter().map(|s| {
            vec![
                s.connectivity.name().to_owned(),
                fmt_f64(s.fit.amplitude),
                fmt_f64(s.fit.rate),
                fmt_f64(s.fit.residual),
            ]
        }),
    )?;
    Ok(series)
}

/// Fits synthetic `1.3·e^{−2x}` data over the sweep's hot fractions.
pub fn sweep_self_test() -> Result<ExpFit> {
    let pts: Vec<(f64, f64)> = (1..=7)
        .map(|k| {
            let x = k as f64 / N as f64;
            (x, 1.3 * (-2.0 * x).exp())
        })
        .collect();
    let fit = fit_exponential(&pts)?;
    if (fit.rate - 2.0).abs() > 1e-10 {
        return Err(CliError::Invalid(format!("self-test recovered rate {} instead of 2", fit.rate)));
    }
    Ok(fit)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionRun {
    pub resolution: usize,
    pub theta: Option<f64>,
    pub embed3: bool,
    pub p3: f64,
}

impl Default for RegionRun {
    fn default() -> Self {
        Self {
            resolution: 21,
            theta: None,
            embed3: false,
            p3: 0.25,
        }
    }
}

pub fn region(run: &RegionRun, out: &mut OutputDir) -> Result<Vec<(String, Vec<RegionPoint>)>> {
    let mut sets = vec![(
        "2q".to_owned(),
        accessible_region_scan(&RegionConfig {
            resolution: run.resolution,
            theta: run.theta,
            embedding: RegionEmbedding::TwoQubit,
        })?,
    )];
    if run.embed3 {
        sets.push((
            "3q".to_owned(),
            accessible_region_scan(&RegionConfig {
                resolution: run.resolution,
                theta: run.theta,
                embedding: RegionEmbedding::ThreeQubit { p3: run.p3 },
            })?,
        ));
    }
    for (name, points) in &sets {
        out.csv(
            &format!("fig3_region_{name}.csv"),
            &["linear_entropy", "concurrence"],
            points.iter().map(|p| vec![fmt_f64(p.linear_entropy), fmt_f64(p.concurrence)]),
        )?;
    }
    out.csv(
        "fig3_points.csv",
        &["embedding", "p1", "p2", "theta", "linear_entropy", "concurrence"],
        sets.iter().flat_map(|(name, points)| {
            points.iter().map(move |p| {
                vec![
                    name.clone(),
                    fmt_f64(p.p1),
                    fmt_f64(p.p2),
                    fmt_f64(p.theta),
                    fmt_f64(p.linear_entropy),
                    fmt_f64(p.concurrence),
                ]
            })
        }),
    )?;
    Ok(sets)
}

/// A resolved command ready to run.
#[derive(Debug, Clone, PartialEq)]
pub enum Resolved {
    MachineSearch(MachineSearchRun),
    Landscape(LandscapeRun),
    Sweep(SweepRun),
    Region(RegionRun),
}

impl Resolved {
    pub fn command(&self) -> &'static str {
        match self {
            Resolved::MachineSearch(_) => MACHINE_SEARCH,
            Resolved::Landscape(_) => LANDSCAPE,
            Resolved::Sweep(_) => SWEEP,
            Resolved::Region(_) => REGION,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Resolved::MachineSearch(r) => Some(r.seed),
            Resolved::Landscape(r) => Some(r.landscape.master_seed),
            Resolved::Sweep(r) => Some(r.base.master_seed),
            Resolved::Region(_) => None,
        }
    }

    pub fn dir_name(&self) -> String {
        match self {
            Resolved::MachineSearch(r) => r.dir_name(),
            Resolved::Landscape(r) => r.dir_name(),
            Resolved::Sweep(r) => r.dir_name(),
            Resolved::Region(_) => "region".to_owned(),
        }
    }

    pub fn config_json(&self) -> Result<serde_json::Value> {
        Ok(match self {
            Resolved::MachineSearch(r) => serde_json::to_value(r)?,
            Resolved::Landscape(r) => serde_json::to_value(r)?,
            Resolved::Sweep(r) => serde_json::to_value(r)?,
            Resolved::Region(r) => serde_json::to_value(r)?,
        })
    }

    pub fn from_manifest(m: &RunManifest) -> Result<Self> {
        Ok(match m.command.as_str() {
            MACHINE_SEARCH => Resolved::MachineSearch(m.config_as()?),
            LANDSCAPE => Resolved::Landscape(m.config_as()?),
            SWEEP => Resolved::Sweep(m.config_as()?),
            REGION => Resolved::Region(m.config_as()?),
            other => return Err(CliError::Invalid(format!("unknown command in manifest: {other}"))),
        })
    }

    /// Checks the configuration without running anything.
    pub fn validate(&self) -> Result<()> {
        let admissible = |kind: ConnectivityKind, class| -> Result<()> {
            qland_core::landscape::SelectionTable::new(&build_connectivity(kind), class)?;
            Ok(())
        };
        match self {
            Resolved::MachineSearch(r) => r.search_config().validate()?,
            Resolved::Landscape(r) => {
                r.landscape.validate()?;
                if r.landscape.trials == 0 {
                    return Err(CliError::Invalid("trials must be at least 1".into()));
                }
                if r.baseline.is_none() {
                    admissible(r.landscape.connectivity, r.landscape.unitary_class)?;
                }
            }
            Resolved::Sweep(r) => {
                r.validate()?;
                for &kind in &r.connectivities {
                    LandscapeConfig {
                        connectivity: kind,
                        n_hot: r.hot_max,
                        hot_qubits: None,
                        ..r.base.clone()
                    }
                    .validate()?;
                    admissible(kind, r.base.unitary_class)?;
                }
            }
            Resolved::Region(r) => {
                if r.resolution < 10 {
                    return Err(CliError::Invalid("--resolution must be at least 10".into()));
                }
                if r.embed3 && !(r.p3 > 0.0 && r.p3 < 0.5) {
                    return Err(CliError::Invalid("--p3 must lie in (0, 0.5)".into()));
                }
            }
        }
        Ok(())
    }

    /// Runs into `dir`, writes the manifest and returns it with a one-line
    /// summary for the terminal.
    pub fn execute(&self, dir: &Path, workers: usize) -> Result<(RunManifest, String)> {
        self.validate()?;
        let started = unix_now();
        let mut out = OutputDir::create(dir)?;
        let line = match self {
            Resolved::MachineSearch(r) => {
                let rep = machine_search(r, &mut out, workers)?;
                format!(
                    "trials {} positive {} boundary {} best ΔW_ex {:.6e}",
                    rep.trials, rep.positive_count, rep.boundary_count, rep.best_delta
                )
            }
            Resolved::Landscape(r) => {
                let s = landscape(r, &mut out, workers)?;
                format!(
                    "{} trials: hot {:.3}% cold {:.3}% positive steps, total positive ΔW_ex/<T>_in {:.6}",
                    s.trials, s.hot_percent_positive, s.cold_percent_positive, s.mean_total_positive_work
                )
            }
            Resolved::Sweep(r) => sweep(r, &mut out, workers)?
                .iter()
                .map(|s| format!("{}: rate {:.4} (residual {:.4})", s.connectivity.name(), s.fit.rate, s.fit.residual))
                .collect::<Vec<_>>()
                .join("; "),
            Resolved::Region(r) => region(r, &mut out)?
                .iter()
                .map(|(name, pts)| format!("{name}: {} points", pts.len()))
                .collect::<Vec<_>>()
                .join("; "),
        };
        let manifest = RunManifest::new(self.command(), self.seed(), &self.config_json()?, started, &out)?;
        manifest.write(dir)?;
        Ok((manifest, line))
    }
}

/// Re-runs a manifest into `dir` and lists files whose digests differ.
pub fn replay(manifest: &RunManifest, dir: &Path, workers: usize) -> Result<(RunManifest, Vec<String>)> {
    let resolved = Resolved::from_manifest(manifest)?;
    let (fresh, _) = resolved.execute(dir, workers)?;
    let diffs = manifest.differences(&fresh);
    Ok((fresh, diffs))
}
