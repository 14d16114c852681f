use std::fmt;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::{identity_init, lmi_init, true_init, InitResult};
use crate::numkernel::io::format_f64;
use crate::numkernel::{DhTriple, Mat};
use crate::region::RegionSpec;
use crate::solver::{bcd, SolverOptions};

use super::rng::derive_seed;
use super::synthetic::gen_synthetic;

/// Environment variable overriding the base seed of a study.
pub const SEED_ENV: &str = "OMEGA_STAB_SEED";

/// Two initializations are tied when their final relative errors differ by
/// at most this many percentage points.
const WIN_TIE_PCT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Identity,
    Lmi,
    True,
}

impl fmt::Display for InitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitKind::Identity => "identity",
            InitKind::Lmi => "lmi",
            InitKind::True => "true",
        })
    }
}

impl std::str::FromStr for InitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(InitKind::Identity),
            "lmi" => Ok(InitKind::Lmi),
            "true" => Ok(InitKind::True),
            _ => Err(Error::Parse(format!("unknown initialization {s:?}"))),
        }
    }
}

/// Runs one initialization. `truth` is required for [`InitKind::True`].
pub fn run_init(
    kind: InitKind,
    a: &Mat,
    region: &RegionSpec,
    opts: &SolverOptions,
    truth: Option<&DhTriple>,
) -> Result<InitResult> {
    match kind {
        InitKind::Identity => identity_init(a, region, opts),
        InitKind::Lmi => lmi_init(a, region, opts),
        InitKind::True => {
            let t = truth.ok_or_else(|| {
                Error::InvalidParameter("the true initialization needs a generator triple".into())
            })?;
            true_init(t, a, region, opts)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub n: usize,
    pub epsilons: Vec<f64>,
    pub trials: usize,
    /// One base seed per trial; empty means `0, 1, ..., trials - 1`.
    pub seeds: Vec<u64>,
    pub region: RegionSpec,
    pub inits: Vec<InitKind>,
    pub solver: SolverOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 10,
            epsilons: vec![0.01, 0.05, 0.1, 0.2],
            trials: 10,
            seeds: Vec::new(),
            region: RegionSpec::new()
                .with_sector(0.0, 3.0 * std::f64::consts::FRAC_PI_8)
                .with_strip(0.5, 1.75)
                .with_disk(1.0, 3.0),
            inits: vec![InitKind::Identity, InitKind::Lmi, InitKind::True],
            solver: SolverOptions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return bad(format!("epsilons must be positive, got {:?}", self.epsilons));
        }
        if !self.seeds.is_empty() && self.seeds.len() != self.trials {
            return bad(format!("{} seeds given for {} trials", self.seeds.len(), self.trials));
        }
        if self.inits.is_empty() {
            return bad("no initialization requested".into());
        }
        self.region.validate()?;
        self.solver.validate()
    }

    /// Replaces the per-trial seeds by ones derived from `base`.
    pub fn reseed(&mut self, base: u64) {
        self.seeds = (0..self.trials as u64).map(|i| derive_seed(base, i)).collect();
    }

    /// Applies [`SEED_ENV`] when set; returns the base seed used, if any.
    pub fn apply_seed_env(&mut self) -> Result<Option<u64>> {
        match std::env::var(SEED_ENV) {
            Ok(v) => {
                let base = v
                    .trim()
                    .parse::<u64>()
                    .map_err(|_| Error::Parse(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?;
                self.reseed(base);
                Ok(Some(base))
            }
            Err(_) => Ok(None),
        }
    }

    fn trial_seed(&self, eps_index: usize, trial: usize) -> u64 {
        let base = self.seeds.get(trial).copied().unwrap_or(trial as u64);
        derive_seed(base, eps_index as u64)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("study config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One `(ε, trial, init)` run. Errors are relative to `‖A‖_F`, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub epsilon: f64,
    pub trial: usize,
    pub seed: u64,
    pub init: InitKind,
    pub initial_rel_error: Option<f64>,
    pub final_rel_error: Option<f64>,
    pub final_margin: Option<f64>,
    /// Running-best objective never increased.
    pub descent_ok: bool,
    pub winner: bool,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub epsilon: f64,
    pub init: InitKind,
    /// Mean final relative error (percent) over successful trials.
    pub mean: f64,
    /// Sample standard deviation (percent).
    pub std: f64,
    pub wins: usize,
    pub trials: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutcome {
    pub rows: Vec<StatRow>,
    pub records: Vec<TrialRecord>,
}

pub fn run_study(cfg: &ExperimentConfig) -> Result<Vec<StatRow>> {
    Ok(run_study_detailed(cfg)?.rows)
}

fn run_one(
    cfg: &ExperimentConfig,
    eps_index: usize,
    trial: usize,
) -> Vec<TrialRecord> {
    let epsilon = cfg.epsilons[eps_index];
    let seed = cfg.trial_seed(eps_index, trial);
    let blank = |init: InitKind, failure: Option<String>| TrialRecord {
        epsilon,
        trial,
        seed,
        init,
        initial_rel_error: None,
        final_rel_error: None,
        final_margin: None,
        descent_ok: false,
        winner: false,
        failure,
    };
    let inst = match gen_synthetic(cfg.n, epsilon, &cfg.region, seed) {
        Ok(i) => i,
        Err(e) => {
            warn!("trial {trial} at epsilon {epsilon}: generation failed: {e}");
            return cfg.inits.iter().map(|&k| blank(k, Some(e.to_string()))).collect();
        }
    };
    let scale = 100.0 / inst.a.norm();
    let mut records: Vec<TrialRecord> = cfg
        .inits
        .iter()
        .map(|&kind| {
            let out = run_init(kind, &inst.a, &cfg.region, &cfg.solver, Some(&inst.truth))
                .and_then(|init| bcd(&inst.a, &cfg.region, &init.triple, &cfg.solver));
            match out {
                Ok(rep) => {
                    let best = rep.running_best();
                    TrialRecord {
                        initial_rel_error: Some(rep.initial_error() * scale),
                        final_rel_error: Some(rep.final_error() * scale),
                        final_margin: Some(rep.final_margin),
                        descent_ok: best.windows(2).all(|w| w[1] <= w[0]),
                        ..blank(kind, None)
                    }
                }
                Err(e) => {
                    warn!("trial {trial} at epsilon {epsilon}, {kind} init: {e}");
                    blank(kind, Some(e.to_string()))
                }
            }
        })
        .collect();
    let best = records
        .iter()
        .filter_map(|r| r.final_rel_error)
        .fold(f64::INFINITY, f64::min);
    for r in &mut records {
        r.winner = r.final_rel_error.is_some_and(|e| e <= best + WIN_TIE_PCT);
    }
    records
}

/// Runs every `(ε, trial)` pair (in parallel), then aggregates per
/// `(ε, init)` in trial order so results do not depend on scheduling.
pub fn run_study_detailed(cfg: &ExperimentConfig) -> Result<StudyOutcome> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.epsilons.len())
        .flat_map(|e| (0..cfg.trials).map(move |t| (e, t)))
        .collect();
    let records: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|&(e, t)| run_one(cfg, e, t))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    let mut rows = Vec::new();
    for &epsilon in &cfg.epsilons {
        for &init in &cfg.inits {
            let sel: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.epsilon == epsilon && r.init == init)
                .collect();
            let errs: Vec<f64> = sel.iter().filter_map(|r| r.final_rel_error).collect();
            let k = errs.len();
            let mean = if k == 0 { f64::NAN } else { errs.iter().sum::<f64>() / k as f64 };
            let std = if k < 2 {
                0.0
            } else {
                (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1) as f64).sqrt()
            };
            rows.push(StatRow {
                epsilon,
                init,
                mean,
                std,
                wins: sel.iter().filter(|r| r.winner).count(),
                trials: k,
                failures: sel.len() - k,
            });
        }
    }
    Ok(StudyOutcome { rows, records })
}

pub fn stat_rows_to_csv(rows: &[StatRow]) -> String {
    let mut s = String::from("epsilon,init,mean_pct,std_pct,wins,trials,failures\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            format_f64(r.epsilon),
            r.init,
            format_f64(r.mean),
            format_f64(r.std),
            r.wins,
            r.trials,
            r.failures
        ));
    }
    s
}
