//! Eight co-evolving qubits.
//!
//! Each step splits the landscape into two sets of four, places the
//! abstract roles of a fixed four-qubit unitary onto each set, and evolves
//! both halves. Every qubit is compared against the mean temperature of
//! the other seven.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::qstate::{
    population_from_temperature, product_state, temperature_from_population, DensityMatrix,
    QubitSpec,
};
use crate::rng::trial_rng;
use crate::sectors::{
    apply, apply_on_in_place, compose, conditional_swap, random_sector_unitary,
    simultaneous_pair_swap, two_qubit_partial_swap, EnergyConservingUnitary, Provenance,
    RandomFamily, RandomUnitaryOptions,
};
use crate::thermo::qubit_extractable_work;

/// Landscape size.
pub const N: usize = 8;
/// ΔW_ex must exceed this to count as positive.
pub const POSITIVE_EPS: f64 = crate::machines::POSITIVE_EPS;

/// Stream index reserved for a unitary shared by every trial.
const SHARED_UNITARY_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConnectivityKind {
    Full7,
    Sym6,
    Sym5,
    Sym4,
    Messenger,
}

impl ConnectivityKind {
    pub const ALL: [ConnectivityKind; 5] = [
        ConnectivityKind::Full7,
        ConnectivityKind::Sym6,
        ConnectivityKind::Sym5,
        ConnectivityKind::Sym4,
        ConnectivityKind::Messenger,
    ];
    pub const SYMMETRIC: [ConnectivityKind; 4] = [
        ConnectivityKind::Full7,
        ConnectivityKind::Sym6,
        ConnectivityKind::Sym5,
        ConnectivityKind::Sym4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConnectivityKind::Full7 => "full7",
            ConnectivityKind::Sym6 => "sym6",
            ConnectivityKind::Sym5 => "sym5",
            ConnectivityKind::Sym4 => "sym4",
            ConnectivityKind::Messenger => "messenger",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Circulant offsets for the symmetric kinds.
    fn offsets(self) -> &'static [usize] {
        match self {
            ConnectivityKind::Full7 => &[1, 2, 3, 4, 5, 6, 7],
            ConnectivityKind::Sym6 => &[1, 2, 3, 5, 6, 7],
            ConnectivityKind::Sym5 => &[1, 2, 4, 6, 7],
            ConnectivityKind::Sym4 => &[1, 2, 6, 7],
            ConnectivityKind::Messenger => &[],
        }
    }
}

/// Two four-qubit groups, each listed as a set of qubits.
pub type Partition = [[usize; 4]; 2];

/// Groups of the messenger landscape on even and odd steps. Qubits 3 and 4
/// change sides.
pub const MESSENGER_SCHEDULE: [Partition; 2] = [
    [[0, 1, 2, 3], [4, 5, 6, 7]],
    [[0, 1, 2, 4], [3, 5, 6, 7]],
];

/// Undirected graph on the eight landscape qubits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectivityGraph {
    pub kind: ConnectivityKind,
    /// Bit `j` of `adjacency[i]` is set when `i` and `j` are linked.
    adjacency: [u8; N],
    pub messenger_schedule: Option<[Partition; 2]>,
}

impl ConnectivityGraph {
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.adjacency[i] >> j & 1 == 1
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].count_ones() as usize
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..N {
            for j in i + 1..N {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

pub fn build_connectivity(kind: ConnectivityKind) -> ConnectivityGraph {
    let mut adjacency = [0u8; N];
    let mut link = |i: usize, j: usize| {
        adjacency[i] |= 1 << j;
        adjacency[j] |= 1 << i;
    };
    let schedule = if kind == ConnectivityKind::Messenger {
        for partition in MESSENGER_SCHEDULE {
            for group in partition {
                for (a, &i) in group.iter().enumerate() {
                    for &j in &group[a + 1..] {
                        link(i, j);
                    }
                }
            }
        }
        Some(MESSENGER_SCHEDULE)
    } else {
        for i in 0..N {
            for &d in kind.offsets() {
                link(i, (i + d) % N);
            }
        }
        None
    };
    ConnectivityGraph {
        kind,
        adjacency,
        messenger_schedule: schedule,
    }
}

/// The four-qubit unitary applied to each group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnitaryClass {
    /// `|1001⟩ ↔ |0110⟩` in role space: role 0 hands its excitation to
    /// role 1 while role 3 hands its to role 2.
    SimPair,
    /// Swap of roles 0 and 1 when roles 2 and 3 are both in the ground
    /// state.
    CondSwap,
    /// Independent swaps of roles (0, 1) and (2, 3).
    UncondSwap,
    /// A random sector unitary on all four roles.
    Random,
}

impl UnitaryClass {
    pub const ALL: [UnitaryClass; 4] = [
        UnitaryClass::SimPair,
        UnitaryClass::CondSwap,
        UnitaryClass::UncondSwap,
        UnitaryClass::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UnitaryClass::SimPair => "sim-pair",
            UnitaryClass::CondSwap => "cond-swap",
            UnitaryClass::UncondSwap => "uncond-swap",
            UnitaryClass::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Role pairs that exchange excitations and so must be linked.
    pub fn interacting_pairs(self) -> &'static [(usize, usize)] {
        match self {
            UnitaryClass::SimPair => &[(0, 1), (2, 3)],
            UnitaryClass::CondSwap => &[(0, 1)],
            UnitaryClass::UncondSwap => &[(0, 1), (2, 3)],
            UnitaryClass::Random => &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
        }
    }

    /// Builds the unitary. `theta` is ignored by the random class.
    pub fn build<R: Rng + ?Sized>(self, theta: f64, rng: &mut R) -> Result<EnergyConservingUnitary> {
        match self {
            UnitaryClass::SimPair => simultaneous_pair_swap(4, ((0, 3), (1, 2)), theta),
            UnitaryClass::CondSwap => conditional_swap(4, (0, 1), &[(2, false), (3, false)], theta),
            UnitaryClass::UncondSwap => compose(
                &two_qubit_partial_swap(4, (0, 1), theta, 0.0)?,
                &two_qubit_partial_swap(4, (2, 3), theta, 0.0)?,
            ),
            UnitaryClass::Random => random_sector_unitary(
                4,
                RandomUnitaryOptions {
                    family: RandomFamily::Cyclic,
                    sample_phases: false,
                },
                rng,
            ),
        }
    }
}

/// How the abstract roles of the unitary are placed on a selected group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RolePlacement {
    /// A uniformly random admissible ordering, drawn per step and group.
    #[default]
    Random,
    /// The first admissible ordering of the group: ascending qubit order
    /// whenever the graph allows it.
    Ordered,
}

impl RolePlacement {
    pub fn name(self) -> &'static str {
        match self {
            RolePlacement::Ordered => "ordered",
            RolePlacement::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [RolePlacement::Ordered, RolePlacement::Random]
            .into_iter()
            .find(|k| k.name() == s)
    }
}

/// How the rotation angle of a trial is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "theta", rename_all = "snake_case")]
pub enum AngleChoice {
    Fixed(f64),
    /// Uniform on `[0, 2π)`, drawn once per trial.
    RandomPerTrial,
}

impl Default for AngleChoice {
    fn default() -> Self {
        AngleChoice::Fixed(0.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeConfig {
    pub hot_population: f64,
    pub cold_population: f64,
    pub n_hot: usize,
    /// Which qubits start hot. Defaults to qubits `0..n_hot`, or for the
    /// messenger landscape the messenger qubit 3 followed by 0, 1, 2, ….
    pub hot_qubits: Option<Vec<usize>>,
    pub connectivity: ConnectivityKind,
    pub unitary_class: UnitaryClass,
    pub placement: RolePlacement,
    pub angle: AngleChoice,
    /// Use one unitary (angle included) for every trial.
    pub shared_unitary: bool,
    pub steps: usize,
    pub trials: u64,
    pub master_seed: u64,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        Self {
            hot_population: 0.4,
            cold_population: 0.2,
            n_hot: 1,
            hot_qubits: None,
            connectivity: ConnectivityKind::Full7,
            unitary_class: UnitaryClass::SimPair,
            placement: RolePlacement::default(),
            angle: AngleChoice::default(),
            shared_unitary: false,
            steps: 500,
            trials: 1,
            master_seed: 0,
        }
    }
}

impl LandscapeConfig {
    pub fn validate(&self) -> Result<()> {
        for p in [self.hot_population, self.cold_population] {
            if !(p > 0.0 && p < 0.5) {
                return Err(Error::InvalidPopulation(p));
            }
        }
        let hot = self.resolved_hot_qubits()?;
        if hot.iter().any(|&q| q >= N) {
            return Err(Error::InvalidConfig("hot qubit index out of range".into()));
        }
        if let AngleChoice::Fixed(t) = self.angle {
            if !t.is_finite() {
                return Err(Error::InvalidConfig("angle must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn resolved_hot_qubits(&self) -> Result<Vec<usize>> {
        if let Some(list) = &self.hot_qubits {
            let mut seen = 0u8;
            for &q in list {
                if q >= N || seen >> q & 1 == 1 {
                    return Err(Error::InvalidConfig("hot qubits must be distinct indices below 8".into()));
                }
                seen |= 1 << q;
            }
            return Ok(list.clone());
        }
        if self.n_hot > N {
            return Err(Error::InvalidConfig("n_hot must be at most 8".into()));
        }
        let order: [usize; N] = match self.connectivity {
            ConnectivityKind::Messenger => [3, 0, 1, 2, 4, 5, 6, 7],
            _ => [0, 1, 2, 3, 4, 5, 6, 7],
        };
        Ok(order[..self.n_hot].to_vec())
    }

    pub fn initial_populations(&self) -> Result<[f64; N]> {
        let mut p = [self.cold_population; N];
        for q in self.resolved_hot_qubits()? {
            p[q] = self.hot_population;
        }
        Ok(p)
    }
}

/// `T_ref|Q_i`: mean temperature of every other qubit (`e1 = 1`).
pub fn reference_temperature(populations: &[f64], i: usize) -> Result<f64> {
    if i >= populations.len() || populations.len() < 2 {
        return Err(Error::InvalidQubit {
            index: i,
            n: populations.len(),
        });
    }
    let mut acc = 0.0;
    for (j, &p) in populations.iter().enumerate() {
        if j != i {
            acc += temperature_from_population(p, 1.0)?;
        }
    }
    Ok(acc / (populations.len() - 1) as f64)
}

/// A partition with its role placements: `roles[h][k]` is the qubit
/// playing role `k` in group `h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub roles: Partition,
}

impl Selection {
    /// The two groups as sorted qubit sets.
    pub fn partition(&self) -> Partition {
        let mut p = self.roles;
        for g in &mut p {
            g.sort_unstable();
        }
        if p[0][0] > p[1][0] {
            p.swap(0, 1);
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct PartitionOption {
    groups: Partition,
    placements: [Vec<[usize; 4]>; 2],
}

/// Admissible partitions and role placements for one graph and class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionTable {
    graph: ConnectivityGraph,
    class: UnitaryClass,
    options: Vec<PartitionOption>,
    /// Placements for the two messenger groups on even and odd steps.
    schedule: Option<[PartitionOption; 2]>,
}

const PERMUTATIONS: [[usize; 4]; 24] = {
    let mut out = [[0usize; 4]; 24];
    let mut idx = 0;
    let mut a = 0;
    while a < 4 {
        let mut b = 0;
        while b < 4 {
            let mut c = 0;
            while c < 4 {
                let sum = a + b + c;
                if a != b && a != c && b != c && sum >= 3 && sum <= 6 {
                    let d = 6 - sum;
                    if d != a && d != b && d != c {
                        out[idx] = [a, b, c, d];
                        idx += 1;
                    }
                }
                c += 1;
            }
            b += 1;
        }
        a += 1;
    }
    out
};

fn placements(graph: &ConnectivityGraph, class: UnitaryClass, group: [usize; 4]) -> Vec<[usize; 4]> {
    PERMUTATIONS
        .iter()
        .map(|perm| perm.map(|k| group[k]))
        .filter(|roles| {
            class
                .interacting_pairs()
                .iter()
                .all(|&(r, s)| graph.has_edge(roles[r], roles[s]))
        })
        .collect()
}

fn partition_option(graph: &ConnectivityGraph, class: UnitaryClass, groups: Partition) -> PartitionOption {
    PartitionOption {
        groups,
        placements: [placements(graph, class, groups[0]), placements(graph, class, groups[1])],
    }
}

impl SelectionTable {
    pub fn new(graph: &ConnectivityGraph, class: UnitaryClass) -> Result<Self> {
        let schedule = match graph.messenger_schedule {
            Some(s) => {
                let opts = s.map(|groups| partition_option(graph, class, groups));
                if opts.iter().any(|o| o.placements.iter().any(Vec::is_empty)) {
                    return Err(Error::NoAdmissiblePartition);
                }
                Some(opts)
            }
            None => None,
        };
        let mut options = Vec::new();
        // groups containing qubit 0, in lexicographic order
        for a in 1..N {
            for b in a + 1..N {
                for c in b + 1..N {
                    let first = [0, a, b, c];
                    let mut second = [0; 4];
                    let mut k = 0;
                    for q in 1..N {
                        if q != a && q != b && q != c {
                            second[k] = q;
                            k += 1;
                        }
                    }
                    let opt = partition_option(graph, class, [first, second]);
                    if opt.placements.iter().all(|p| !p.is_empty()) {
                        options.push(opt);
                    }
                }
            }
        }
        if schedule.is_none() && options.is_empty() {
            return Err(Error::NoAdmissiblePartition);
        }
        Ok(Self {
            graph: graph.clone(),
            class,
            options,
            schedule,
        })
    }

    pub fn graph(&self) -> &ConnectivityGraph {
        &self.graph
    }

    /// Admissible partitions when groups are drawn at random.
    pub fn admissible_partitions(&self) -> Vec<Partition> {
        self.options.iter().map(|o| o.groups).collect()
    }

    /// Number of admissible role placements for each group of `partition`.
    pub fn placement_counts(&self, partition: &Partition) -> Option<[usize; 2]> {
        self.options
            .iter()
            .find(|o| &o.groups == partition)
            .map(|o| [o.placements[0].len(), o.placements[1].len()])
    }

    /// Draws the groups and role placements for `step`. The messenger
    /// landscape follows its schedule and draws nothing for the groups.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, step: usize, placement: RolePlacement) -> Selection {
        let option = match &self.schedule {
            Some(s) => &s[step % 2],
            None => &self.options[rng.random_range(0..self.options.len())],
        };
        let pick = |rng: &mut R, list: &Vec<[usize; 4]>| match placement {
            RolePlacement::Ordered => list[0],
            RolePlacement::Random => list[rng.random_range(0..list.len())],
        };
        let a = pick(rng, &option.placements[0]);
        let b = pick(rng, &option.placements[1]);
        Selection { roles: [a, b] }
    }
}

pub fn select_subsystems<R: Rng + ?Sized>(
    table: &SelectionTable,
    rng: &mut R,
    step_index: usize,
    placement: RolePlacement,
) -> Selection {
    table.sample(rng, step_index, placement)
}

/// Applies `u` to both groups of `selection`.
pub fn step(state: &mut DensityMatrix, selection: &Selection, u: &EnergyConservingUnitary) -> Result<()> {
    if state.n_qubits() != N {
        return Err(Error::DimensionMismatch {
            expected: N,
            found: state.n_qubits(),
        });
    }
    for roles in &selection.roles {
        apply_on_in_place(u, state, roles)?;
    }
    Ok(())
}

/// Observables of one landscape snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub selection: Option<Selection>,
    pub populations: Vec<f64>,
    pub temperatures: Vec<f64>,
    pub t_ref: Vec<f64>,
    pub w_ex: Vec<f64>,
    /// Against the previous snapshot; absent for the initial one.
    pub dw_ex: Option<Vec<f64>>,
    /// Largest off-diagonal modulus among the single-qubit reduced states.
    pub max_coherence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Landscape,
    Collisional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub kind: RecordKind,
    pub trial_index: u64,
    pub connectivity: ConnectivityKind,
    pub hot_qubits: Vec<usize>,
    pub initial_populations: Vec<f64>,
    /// Mean of the initial qubit temperatures, `⟨T⟩_in`.
    pub mean_initial_temperature: f64,
    pub theta: Option<f64>,
    pub unitary: Option<Provenance>,
    pub steps: Vec<StepRecord>,
}

impl TrialRecord {
    pub fn is_hot(&self, qubit: usize) -> bool {
        self.hot_qubits.contains(&qubit)
    }

    /// ΔW_ex of one qubit over steps `1..`.
    pub fn dw_series(&self, qubit: usize) -> Vec<f64> {
        self.steps
            .iter()
            .filter_map(|s| s.dw_ex.as_ref().map(|d| d[qubit]))
            .collect()
    }

    /// `W_ex / ⟨T⟩_in` of one qubit over every snapshot.
    pub fn normalized_work_series(&self, qubit: usize) -> Vec<f64> {
        self.steps
            .iter()
            .map(|s| s.w_ex[qubit] / self.mean_initial_temperature)
            .collect()
    }

    /// Sum of positive ΔW_ex over all qubits and steps, over `⟨T⟩_in`.
    pub fn total_positive_work(&self) -> f64 {
        let total: f64 = self
            .steps
            .iter()
            .filter_map(|s| s.dw_ex.as_ref())
            .flat_map(|d| d.iter().copied())
            .filter(|&d| d > POSITIVE_EPS)
            .fold(0.0, |a, b| a + b);
        total / self.mean_initial_temperature
    }

    /// Percentage of steps with ΔW_ex > ε for one qubit.
    pub fn percent_positive(&self, qubit: usize) -> f64 {
        let dw = self.dw_series(qubit);
        if dw.is_empty() {
            return 0.0;
        }
        100.0 * dw.iter().filter(|&&d| d > POSITIVE_EPS).count() as f64 / dw.len() as f64
    }
}

fn mean_temperature(populations: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for &p in populations {
        acc += temperature_from_population(p, 1.0)?;
    }
    Ok(acc / populations.len() as f64)
}

fn snapshot(
    step: usize,
    selection: Option<Selection>,
    populations: Vec<f64>,
    max_coherence: f64,
    t_ref: Vec<f64>,
    previous: Option<&StepRecord>,
) -> Result<StepRecord> {
    let temperatures = populations
        .iter()
        .map(|&p| temperature_from_population(p, 1.0))
        .collect::<Result<Vec<_>>>()?;
    let w_ex = populations
        .iter()
        .zip(&t_ref)
        .map(|(&q, &t)| qubit_extractable_work(q, t, 1.0))
        .collect::<Result<Vec<_>>>()?;
    let dw_ex = previous.map(|prev| w_ex.iter().zip(&prev.w_ex).map(|(a, b)| a - b).collect());
    Ok(StepRecord {
        step,
        selection,
        populations,
        temperatures,
        t_ref,
        w_ex,
        dw_ex,
        max_coherence,
    })
}

fn landscape_snapshot(
    step: usize,
    selection: Option<Selection>,
    state: &DensityMatrix,
    previous: Option<&StepRecord>,
) -> Result<StepRecord> {
    let populations = state.qubit_populations();
    let max_coherence = state.qubit_coherences().into_iter().fold(0.0, f64::max);
    let t_ref = (0..N)
        .map(|i| reference_temperature(&populations, i))
        .collect::<Result<Vec<_>>>()?;
    snapshot(step, selection, populations, max_coherence, t_ref, previous)
}

/// The angle and unitary of a trial, drawn before any selection.
pub fn trial_unitary<R: Rng + ?Sized>(config: &LandscapeConfig, rng: &mut R) -> Result<(Option<f64>, EnergyConservingUnitary)> {
    let theta = match config.angle {
        AngleChoice::Fixed(t) => t,
        AngleChoice::RandomPerTrial => rng.random_range(0.0..math::TAU),
    };
    let u = config.unitary_class.build(theta, rng)?;
    let theta = (config.unitary_class != UnitaryClass::Random).then_some(theta);
    Ok((theta, u))
}

/// Runs one closed-landscape trial from its own seeded stream.
pub fn run_trial(config: &LandscapeConfig, trial_index: u64) -> Result<TrialRecord> {
    config.validate()?;
    let graph = build_connectivity(config.connectivity);
    let table = SelectionTable::new(&graph, config.unitary_class)?;
    let mut rng = trial_rng(config.master_seed, trial_index);
    let (theta, u) = if config.shared_unitary {
        trial_unitary(config, &mut trial_rng(config.master_seed, SHARED_UNITARY_STREAM))?
    } else {
        trial_unitary(config, &mut rng)?
    };

    let initial = config.initial_populations()?;
    let specs = initial
        .iter()
        .map(|&p| QubitSpec::unit(p))
        .collect::<Result<Vec<_>>>()?;
    let mut state = product_state(&specs)?;
    let mut steps = Vec::with_capacity(config.steps + 1);
    steps.push(landscape_snapshot(0, None, &state, None)?);
    for t in 1..=config.steps {
        let selection = table.sample(&mut rng, t - 1, config.placement);
        step(&mut state, &selection, &u)?;
        let rec = landscape_snapshot(t, Some(selection), &state, steps.last())?;
        steps.push(rec);
    }
    Ok(TrialRecord {
        kind: RecordKind::Landscape,
        trial_index,
        connectivity: config.connectivity,
        hot_qubits: config.resolved_hot_qubits()?,
        initial_populations: initial.to_vec(),
        mean_initial_temperature: mean_temperature(&initial)?,
        theta,
        unitary: Some(u.provenance().clone()),
        steps,
    })
}

/// Every qubit repeatedly meets a fresh ancilla at `⟨T⟩_in` through the
/// two-qubit partial swap with the configured angle; the ancilla is
/// discarded after each collision. The reference temperature stays at
/// `⟨T⟩_in`.
pub fn collisional_baseline(config: &LandscapeConfig, trial_index: u64) -> Result<TrialRecord> {
    config.validate()?;
    let mut rng = trial_rng(config.master_seed, trial_index);
    let theta = match config.angle {
        AngleChoice::Fixed(t) => t,
        AngleChoice::RandomPerTrial => rng.random_range(0.0..math::TAU),
    };
    let initial = config.initial_populations()?;
    let t_mean = mean_temperature(&initial)?;
    let ancilla = QubitSpec::unit(population_from_temperature(t_mean, 1.0)?)?;
    let u = two_qubit_partial_swap(2, (0, 1), theta, 0.0)?;
    let t_ref = vec![t_mean; N];

    let mut populations = initial.to_vec();
    let mut steps = Vec::with_capacity(config.steps + 1);
    steps.push(snapshot(0, None, populations.clone(), 0.0, t_ref.clone(), None)?);
    for t in 1..=config.steps {
        let mut coherence: f64 = 0.0;
        for q in populations.iter_mut() {
            let joint = product_state(&[QubitSpec::unit(*q)?, ancilla])?;
            let out = apply(&u, &joint)?;
            let reduced = crate::qstate::partial_trace(&out, &[0])?;
            coherence = coherence.max(reduced.entry(0, 1).norm());
            *q = reduced.entry(1, 1).re;
        }
        let rec = snapshot(t, None, populations.clone(), coherence, t_ref.clone(), steps.last())?;
        steps.push(rec);
    }
    Ok(TrialRecord {
        kind: RecordKind::Collisional,
        trial_index,
        connectivity: config.connectivity,
        hot_qubits: config.resolved_hot_qubits()?,
        initial_populations: initial.to_vec(),
        mean_initial_temperature: t_mean,
        theta: Some(theta),
        unitary: Some(u.provenance().clone()),
        steps,
    })
}

/// A maximal run of consecutive positive steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositiveRun {
    pub qubit: usize,
    pub hot: bool,
    /// Step index at which the run begins (steps count from 1).
    pub start_step: usize,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IntervalStats {
    pub runs: Vec<PositiveRun>,
}

impl IntervalStats {
    pub fn lengths(&self) -> Vec<usize> {
        self.runs.iter().map(|r| r.length).collect()
    }

    pub fn count_at_least(&self, len: usize) -> usize {
        self.runs.iter().filter(|r| r.length >= len).count()
    }

    pub fn count_at_most(&self, len: usize) -> usize {
        self.runs.iter().filter(|r| r.length <= len).count()
    }

    pub fn extend(&mut self, other: IntervalStats) {
        self.runs.extend(other.runs);
    }
}

/// `(start index, length)` of the maximal runs of `true`.
pub fn true_runs(flags: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &f) in flags.iter().enumerate() {
        match (f, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i - s));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, flags.len() - s));
    }
    out
}

pub fn positive_interval_stats(trial: &TrialRecord) -> IntervalStats {
    let mut runs = Vec::new();
    for q in 0..trial.initial_populations.len() {
        let flags: Vec<bool> = trial.dw_series(q).iter().map(|&d| d > POSITIVE_EPS).collect();
        for (start, length) in true_runs(&flags) {
            runs.push(PositiveRun {
                qubit: q,
                hot: trial.is_hot(q),
                start_step: start + 1,
                length,
            });
        }
    }
    IntervalStats { runs }
}

/// Fit of `y = A e^{−r x}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub amplitude: f64,
    pub rate: f64,
    /// Root-mean-square residual of `ln y`.
    pub residual: f64,
}

/// Least squares on `ln y`.
pub fn fit_exponential(points: &[(f64, f64)]) -> Result<ExpFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            found: points.len(),
        });
    }
    if let Some(&(_, y)) = points.iter().find(|(_, y)| !(*y > 0.0)) {
        return Err(Error::NonPositiveValue(y));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| math::ln(p.1)).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (math::ln(p.1) - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidConfig("fit needs at least two distinct x values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points
        .iter()
        .map(|p| {
            let r = math::ln(p.1) - (intercept + slope * p.0);
            r * r
        })
        .sum();
    Ok(ExpFit {
        amplitude: math::exp(intercept),
        rate: -slope,
        residual: math::sqrt(sse / n),
    })
}

/// One point of a hot-fraction sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n_hot: usize,
    /// `n_hot / 8`.
    pub fraction: f64,
    /// Mean over trials of the total positive ΔW_ex / ⟨T⟩_in.
    pub mean_total: f64,
    pub trials: u64,
}

impl SweepPoint {
    pub fn from_totals(n_hot: usize, totals: &[f64]) -> Self {
        let mean = if totals.is_empty() {
            0.0
        } else {
            totals.iter().fold(0.0, |a, b| a + b) / totals.len() as f64
        };
        Self {
            n_hot,
            fraction: n_hot as f64 / N as f64,
            mean_total: mean,
            trials: totals.len() as u64,
        }
    }
}

/// Sequential sweep of `n_hot` over `hots`, `base.trials` trials each.
pub fn hot_fraction_sweep(base: &LandscapeConfig, hots: &[usize]) -> Result<Vec<SweepPoint>> {
    let mut out = Vec::with_capacity(hots.len());
    for &n_hot in hots {
        let config = LandscapeConfig {
            n_hot,
            hot_qubits: None,
            ..base.clone()
        };
        let totals = (0..base.trials)
            .map(|t| run_trial(&config, t).map(|r| r.total_positive_work()))
            .collect::<Result<Vec<_>>>()?;
        out.push(SweepPoint::from_totals(n_hot, &totals));
    }
    Ok(out)
}

/// Percent-positive statistics of one initial class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    /// Mean over trials and qubits of the class.
    pub mean_percent: f64,
    /// Per-trial mean over the class's qubits.
    pub per_trial: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeSummary {
    pub connectivity: ConnectivityKind,
    pub trials: usize,
    pub hot: ClassStats,
    pub cold: ClassStats,
    pub mean_total_positive_work: f64,
    pub intervals: IntervalStats,
}

fn class_stats(records: &[TrialRecord], hot: bool) -> ClassStats {
    let per_trial: Vec<f64> = records
        .iter()
        .filter_map(|r| {
            let qs: Vec<usize> = (0..r.initial_populations.len()).filter(|&q| r.is_hot(q) == hot).collect();
            if qs.is_empty() {
                None
            } else {
                Some(qs.iter().map(|&q| r.percent_positive(q)).sum::<f64>() / qs.len() as f64)
            }
        })
        .collect();
    let mean_percent = if per_trial.is_empty() {
        0.0
    } else {
        per_trial.iter().sum::<f64>() / per_trial.len() as f64
    };
    ClassStats {
        mean_percent,
        per_trial,
    }
}

/// Summary of trials sharing one connectivity.
pub fn aggregate(records: &[TrialRecord]) -> Result<LandscapeSummary> {
    let first = records.first().ok_or(Error::InsufficientData { needed: 1, found: 0 })?;
    let mut intervals = IntervalStats::default();
    for r in records {
        intervals.extend(positive_interval_stats(r));
    }
    Ok(LandscapeSummary {
        connectivity: first.connectivity,
        trials: records.len(),
        hot: class_stats(records, true),
        cold: class_stats(records, false),
        mean_total_positive_work: records
            .iter()
            .map(TrialRecord::total_positive_work)
            .fold(0.0, |a, b| a + b)
            / records.len() as f64,
        intervals,
    })
}

/// Whether a series has a strict local increase anywhere.
pub fn has_revival(series: &[f64]) -> bool {
    series.windows(2).any(|w| w[1] > w[0] + POSITIVE_EPS)
}

/// Label used in file names and logs.
pub fn describe(config: &LandscapeConfig) -> String {
    alloc::format!(
        "{}-{}-hot{}",
        config.connectivity.name(),
        config.unitary_class.name(),
        config.n_hot
    )
}
