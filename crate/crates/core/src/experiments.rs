//! Seeded batch experiments: overlap descent towards the T state, energy
//! descent on the separation model, and imaginary time evolution of the
//! Heisenberg ring.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::graph::{build_graph, GraphKind, NetworkShape};
use crate::models::{heisenberg_ring, separation_hamiltonian, t_state};
use crate::network::{random_init, random_init_ti, BtnsRep};
use crate::variational::{
    gradient_descent_observed, imaginary_time_observed, EnergyMethod, ItePlan, IteRow, Objective, OptimizerConfig,
    TraceRow,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Minimize `1 − |⟨T|ψ⟩|²/⟨ψ|ψ⟩` on the three-site ring.
    TstateDescent,
    /// Minimize the separation-model energy on a ring.
    SeparationDescent,
    /// Imaginary time evolution of the Heisenberg ring.
    HeisenbergIte,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 3] =
        [ExperimentKind::TstateDescent, ExperimentKind::SeparationDescent, ExperimentKind::HeisenbergIte];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::TstateDescent => "tstate-descent",
            ExperimentKind::SeparationDescent => "separation-descent",
            ExperimentKind::HeisenbergIte => "heisenberg-ite",
        }
    }

    /// Model driven by the experiment.
    pub fn model(self) -> &'static str {
        match self {
            ExperimentKind::TstateDescent => "tstate",
            ExperimentKind::SeparationDescent => "separation",
            ExperimentKind::HeisenbergIte => "heisenberg",
        }
    }

    pub fn default_len(self) -> usize {
        match self {
            ExperimentKind::TstateDescent => 3,
            ExperimentKind::SeparationDescent => 11,
            ExperimentKind::HeisenbergIte => 12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnsatzKind {
    Tns,
    Btns,
}

/// Variational class: plain TNS of bond `bond`, or bTNS with weight
/// degree `a` and local degree `dloc`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzSpec {
    pub kind: AnsatzKind,
    pub bond: usize,
    #[serde(default)]
    pub a: usize,
    #[serde(default)]
    pub dloc: Option<usize>,
}

impl AnsatzSpec {
    pub fn tns(bond: usize) -> Self {
        AnsatzSpec { kind: AnsatzKind::Tns, bond, a: 0, dloc: None }
    }

    pub fn btns(bond: usize, a: usize, dloc: usize) -> Self {
        AnsatzSpec { kind: AnsatzKind::Btns, bond, a, dloc: Some(dloc) }
    }

    /// `(a, dloc)`; a bTNS without explicit `dloc` uses `dloc = a`.
    pub fn degrees(&self) -> (usize, usize) {
        match self.kind {
            AnsatzKind::Tns => (0, 0),
            AnsatzKind::Btns => (self.a, self.dloc.unwrap_or(self.a)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bond == 0 {
            bail!(Argument, "bond dimension must be positive");
        }
        match self.kind {
            AnsatzKind::Tns if self.a != 0 || self.dloc.is_some_and(|d| d != 0) => {
                bail!(Argument, "a plain TNS has no weight degrees")
            }
            AnsatzKind::Btns => {
                let (a, dloc) = self.degrees();
                if a == 0 {
                    bail!(Argument, "a bTNS needs a ≥ 1");
                }
                if dloc > a || dloc == 0 {
                    bail!(Argument, "local degree {dloc} must lie in 1..={a}");
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Free complex parameters per vertex of a ring with physical dimension `d`.
    pub fn ring_parameters(&self, d: usize) -> usize {
        let (_, dloc) = self.degrees();
        d * self.bond * self.bond * (dloc + 1)
    }
}

/// Imaginary time settings; the target bond comes from the ansatz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IteSettings {
    pub dt: f64,
    pub sweeps: usize,
    pub p: f64,
    pub energy_method: EnergyMethod,
    pub bond_weights: bool,
}

impl Default for IteSettings {
    fn default() -> Self {
        IteSettings { dt: 0.05, sweeps: 100, p: 0.9, energy_method: EnergyMethod::Exact, bond_weights: true }
    }
}

/// One experiment over a list of seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Ring length; defaults per experiment.
    #[serde(default)]
    pub len: Option<usize>,
    pub ansatz: AnsatzSpec,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub ite: IteSettings,
    pub seeds: Vec<u64>,
    /// Output directory used when the command line gives none.
    #[serde(default)]
    pub output: Option<String>,
}

impl ExperimentConfig {
    pub fn len(&self) -> usize {
        self.len.unwrap_or(self.experiment.default_len())
    }

    pub fn validate(&self) -> Result<()> {
        self.ansatz.validate()?;
        self.optimizer.validate()?;
        if self.seeds.is_empty() {
            bail!(Argument, "seed list is empty");
        }
        let len = self.len();
        match self.experiment {
            ExperimentKind::TstateDescent if len != 3 => bail!(Argument, "the T state lives on three sites"),
            ExperimentKind::SeparationDescent if len < 5 || len % 2 == 0 => {
                bail!(Argument, "separation model needs an odd ring of length ≥ 5")
            }
            ExperimentKind::HeisenbergIte => {
                if len < 3 {
                    bail!(Argument, "Heisenberg ring needs at least three sites");
                }
                ItePlan { target_bond: self.ansatz.bond, ..self.ite_plan() }.validate()?;
            }
            _ => {}
        }
        let (a, dloc) = self.ansatz.degrees();
        if a > len * dloc.max(1) {
            bail!(Argument, "weight degree {a} exceeds what {len} sites can carry");
        }
        Ok(())
    }

    fn ite_plan(&self) -> ItePlan {
        ItePlan {
            dt: self.ite.dt,
            sweeps: self.ite.sweeps,
            target_bond: self.ansatz.bond,
            p: self.ite.p,
            renormalize: true,
            energy_method: self.ite.energy_method,
            bond_weights: self.ite.bond_weights,
        }
    }
}

/// Trace row shared by descent and time evolution; `aux` is the gradient
/// norm for descent and the largest bond for time evolution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeedRow {
    pub index: usize,
    pub objective: f64,
    pub aux: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub rows: Vec<SeedRow>,
    pub final_rep: BtnsRep,
}

impl SeedRun {
    pub fn final_objective(&self) -> f64 {
        self.rows.last().map(|r| r.objective).unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    /// In the order of the configured seeds.
    pub runs: Vec<SeedRun>,
}

impl ExperimentResult {
    /// Seed with the lowest final objective (first on ties).
    pub fn best(&self) -> Option<&SeedRun> {
        self.runs.iter().fold(None, |best: Option<&SeedRun>, r| match best {
            Some(b) if b.final_objective() <= r.final_objective() => Some(b),
            _ => Some(r),
        })
    }

    /// Lowest objective over seeds at each trace index, carrying the last
    /// value of runs that stopped early.
    pub fn best_curve(&self) -> Vec<f64> {
        let len = self.runs.iter().map(|r| r.rows.len()).max().unwrap_or(0);
        (0..len)
            .map(|i| {
                self.runs
                    .iter()
                    .filter_map(|r| r.rows.get(i).or(r.rows.last()).map(|row| row.objective))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }
}

fn ring(len: usize, bond: usize, phys: usize) -> Result<NetworkShape> {
    build_graph(GraphKind::Ring { len }, bond, phys)
}

fn initial(shape: &NetworkShape, spec: &AnsatzSpec, ti: bool, seed: u64) -> Result<BtnsRep> {
    let (a, dloc) = spec.degrees();
    if ti {
        random_init_ti(shape, a, dloc, seed)
    } else {
        random_init(shape, a, dloc, seed)
    }
}

/// Runs one seed of a validated configuration.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedRun> {
    run_seed_observed(cfg, seed, &mut |_| {})
}

/// [`run_seed`] that hands each trace row to `observe` as it is recorded,
/// so callers can persist partial traces of runs that later fail.
pub fn run_seed_observed(cfg: &ExperimentConfig, seed: u64, observe: &mut dyn FnMut(&SeedRow)) -> Result<SeedRun> {
    let len = cfg.len();
    let opt = OptimizerConfig { seed, ..cfg.optimizer.clone() };
    let mut descend = |shape: NetworkShape, objective: Objective| -> Result<SeedRun> {
        let rep0 = initial(&shape, &cfg.ansatz, opt.translation_invariant, seed)?;
        let row = |r: &TraceRow| SeedRow { index: r.iter, objective: r.objective, aux: r.grad_norm, wall_ms: r.wall_ms };
        let (rep, trace) = gradient_descent_observed(&rep0, &objective, &opt, &mut |r| observe(&row(r)))?;
        Ok(SeedRun { seed, rows: trace.iter().map(row).collect(), final_rep: rep })
    };
    match cfg.experiment {
        ExperimentKind::TstateDescent => {
            let t = t_state()?;
            descend(ring(len, cfg.ansatz.bond, 9)?, Objective::neg_overlap(&t.state)?)
        }
        ExperimentKind::SeparationDescent => {
            descend(ring(len, cfg.ansatz.bond, 3)?, Objective::Energy(separation_hamiltonian(len)?))
        }
        ExperimentKind::HeisenbergIte => {
            let h = heisenberg_ring(len)?;
            // Gates on single edges break translation invariance, so the
            // flag only selects a translation-invariant starting state.
            let rep0 = initial(&ring(len, cfg.ansatz.bond, 2)?, &cfg.ansatz, opt.translation_invariant, seed)?;
            let row = |r: &IteRow| SeedRow {
                index: r.sweep,
                objective: r.energy,
                aux: r.bond_max as f64,
                wall_ms: r.wall_ms,
            };
            let (rep, trace) = imaginary_time_observed(&rep0, &h, &cfg.ite_plan(), &mut |r| observe(&row(r)))?;
            Ok(SeedRun { seed, rows: trace.iter().map(row).collect(), final_rep: rep })
        }
    }
}

/// Validates and runs every seed; seeds run in parallel on the current
/// rayon pool and results come back in configuration order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let runs = cfg.seeds.par_iter().map(|&s| run_seed(cfg, s)).collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult { runs })
}
