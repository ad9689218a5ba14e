//! Stochastic two-species exclusion model on a periodic lattice.
//!
//! A right-mover in cell `k` hops to `k+1` when that cell holds no other
//! right-mover; its hop probability per step is `dt_eff * c_i`, where `c_i`
//! is picked by the left-movers present in cells `k` and `k+1`. Left-movers
//! are the mirror image. All hop decisions of one step are drawn from the
//! pre-step state and applied together.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::DensityField;
use crate::model::VelocityParams;

/// Tolerance used when mapping physical times to step counts.
const TIME_SLACK: f64 = 1e-9;

/// Occupancy of both species. Each entry is 0 or 1; a cell may hold one
/// walker of each direction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeState {
    sigma_plus: Vec<u8>,
    sigma_minus: Vec<u8>,
}

impl LatticeState {
    pub fn empty(n: usize) -> Self {
        LatticeState {
            sigma_plus: vec![0; n],
            sigma_minus: vec![0; n],
        }
    }

    pub fn from_occupancy(sigma_plus: Vec<u8>, sigma_minus: Vec<u8>) -> Result<Self> {
        if sigma_plus.len() != sigma_minus.len() {
            return Err(Error::LengthMismatch {
                expected: sigma_plus.len(),
                actual: sigma_minus.len(),
            });
        }
        if sigma_plus.len() < 2 {
            return Err(Error::invalid("lattice needs at least 2 cells"));
        }
        if sigma_plus.iter().chain(&sigma_minus).any(|&s| s > 1) {
            return Err(Error::invalid("occupancies must be 0 or 1"));
        }
        Ok(LatticeState { sigma_plus, sigma_minus })
    }

    pub fn len(&self) -> usize {
        self.sigma_plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma_plus.is_empty()
    }

    pub fn sigma_plus(&self) -> &[u8] {
        &self.sigma_plus
    }

    pub fn sigma_minus(&self) -> &[u8] {
        &self.sigma_minus
    }

    pub fn count_plus(&self) -> usize {
        self.sigma_plus.iter().map(|&s| s as usize).sum()
    }

    pub fn count_minus(&self) -> usize {
        self.sigma_minus.iter().map(|&s| s as usize).sum()
    }

    pub fn is_binary(&self) -> bool {
        self.sigma_plus.iter().chain(&self.sigma_minus).all(|&s| s <= 1)
    }

    /// Reflect `k -> n-1-k` and exchange the species.
    pub fn mirrored(&self) -> Self {
        let rev = |v: &[u8]| v.iter().rev().copied().collect::<Vec<_>>();
        LatticeState {
            sigma_plus: rev(&self.sigma_minus),
            sigma_minus: rev(&self.sigma_plus),
        }
    }

    pub fn to_field(&self) -> DensityField {
        let conv = |v: &[u8]| v.iter().map(|&s| f64::from(s)).collect();
        DensityField {
            rho_plus: conv(&self.sigma_plus),
            rho_minus: conv(&self.sigma_minus),
        }
    }
}

/// Initial-condition families for the lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// Two packed groups. Cell labels are 1-based (label `l` is array index
    /// `l-1`): right-movers fill labels `n1..=n2`, left-movers fill labels
    /// `N-n2..=N-n1` (label 0 wraps to `N`).
    RedLight { n1: usize, n2: usize },
    /// Per-sector walker counts placed uniformly without replacement.
    MixedSectors {
        plus_counts: Vec<usize>,
        minus_counts: Vec<usize>,
        cells_per_sector: usize,
    },
    /// Independent Bernoulli occupation with per-cell probabilities.
    FromDensity { rho_plus: Vec<f64>, rho_minus: Vec<f64> },
    ExplicitState(LatticeState),
}

impl InitialCondition {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            InitialCondition::RedLight { n1, n2 } => {
                if !(1 <= *n1 && n1 <= n2 && *n2 <= n) {
                    return Err(Error::invalid(format!(
                        "red light requires 1 <= n1 <= n2 <= N, got n1={n1}, n2={n2}, N={n}"
                    )));
                }
            }
            InitialCondition::MixedSectors {
                plus_counts,
                minus_counts,
                cells_per_sector,
            } => {
                let cps = *cells_per_sector;
                if cps == 0 || n % cps != 0 {
                    return Err(Error::invalid(format!(
                        "cells_per_sector={cps} must divide N={n}"
                    )));
                }
                let sectors = n / cps;
                for counts in [plus_counts, minus_counts] {
                    if counts.len() != sectors {
                        return Err(Error::LengthMismatch {
                            expected: sectors,
                            actual: counts.len(),
                        });
                    }
                    if let Some(c) = counts.iter().find(|&&c| c > cps) {
                        return Err(Error::invalid(format!(
                            "sector count {c} exceeds sector capacity {cps}"
                        )));
                    }
                }
            }
            InitialCondition::FromDensity { rho_plus, rho_minus } => {
                for rho in [rho_plus, rho_minus] {
                    if rho.len() != n {
                        return Err(Error::LengthMismatch {
                            expected: n,
                            actual: rho.len(),
                        });
                    }
                    if rho.iter().any(|r| !(0.0..=1.0).contains(r)) {
                        return Err(Error::invalid("occupation probabilities must lie in [0,1]"));
                    }
                }
            }
            InitialCondition::ExplicitState(s) => {
                if s.len() != n {
                    return Err(Error::LengthMismatch {
                        expected: n,
                        actual: s.len(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Expected occupation of every cell at `t = 0`.
    pub fn expected_occupation(&self, n: usize) -> Result<DensityField> {
        self.validate(n)?;
        Ok(match self {
            InitialCondition::RedLight { .. } | InitialCondition::ExplicitState(_) => {
                self.sample_with(n, &mut ChaCha8Rng::seed_from_u64(0))?.to_field()
            }
            InitialCondition::MixedSectors {
                plus_counts,
                minus_counts,
                cells_per_sector,
            } => {
                let spread = |counts: &[usize]| {
                    counts
                        .iter()
                        .flat_map(|&c| std::iter::repeat_n(c as f64 / *cells_per_sector as f64, *cells_per_sector))
                        .collect::<Vec<_>>()
                };
                DensityField::new(spread(plus_counts), spread(minus_counts))?
            }
            InitialCondition::FromDensity { rho_plus, rho_minus } => {
                DensityField::new(rho_plus.clone(), rho_minus.clone())?
            }
        })
    }

    fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<LatticeState> {
        self.validate(n)?;
        let mut s = LatticeState::empty(n);
        match self {
            InitialCondition::RedLight { n1, n2 } => {
                let index = |label: usize| (label + n - 1) % n;
                for label in *n1..=*n2 {
                    s.sigma_plus[index(label)] = 1;
                }
                for label in (n - n2)..=(n - n1) {
                    s.sigma_minus[index(label)] = 1;
                }
            }
            InitialCondition::MixedSectors {
                plus_counts,
                minus_counts,
                cells_per_sector,
            } => {
                let cps = *cells_per_sector;
                for (counts, sigma) in [(plus_counts, &mut s.sigma_plus), (minus_counts, &mut s.sigma_minus)] {
                    for (sector, &count) in counts.iter().enumerate() {
                        for offset in rand::seq::index::sample(rng, cps, count) {
                            sigma[sector * cps + offset] = 1;
                        }
                    }
                }
            }
            InitialCondition::FromDensity { rho_plus, rho_minus } => {
                for (rho, sigma) in [(rho_plus, &mut s.sigma_plus), (rho_minus, &mut s.sigma_minus)] {
                    for (cell, &p) in sigma.iter_mut().zip(rho) {
                        *cell = u8::from(rng.random::<f64>() < p);
                    }
                }
            }
            InitialCondition::ExplicitState(state) => s = state.clone(),
        }
        Ok(s)
    }
}

/// Draw an initial lattice. Deterministic families consume no randomness.
pub fn sample_initial<R: Rng + ?Sized>(spec: &InitialCondition, n: usize, rng: &mut R) -> Result<LatticeState> {
    spec.sample_with(n, rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaConfig {
    #[serde(alias = "N")]
    pub n: usize,
    /// Cell length (m).
    pub h: f64,
    /// Time step (s).
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    pub mc_runs: usize,
    pub seed: u64,
    pub velocities: VelocityParams,
    pub init: InitialCondition,
    /// Use `dt * c` as the hop probability instead of `dt * c / h`.
    #[serde(default)]
    pub literal_rates: bool,
}

impl CaConfig {
    /// Dimensionless step factor multiplying the velocities.
    pub fn dt_eff(&self) -> f64 {
        if self.literal_rates {
            self.dt
        } else {
            self.dt / self.h
        }
    }

    /// Snapshot times actually recorded; defaults to `[t_end]`.
    pub fn effective_snapshot_times(&self) -> Vec<f64> {
        if self.snapshot_times.is_empty() {
            vec![self.t_end]
        } else {
            self.snapshot_times.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid(format!("N must be >= 2, got {}", self.n)));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::invalid(format!("h must be positive, got {}", self.h)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::invalid(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if self.mc_runs == 0 {
            return Err(Error::invalid("mc_runs must be >= 1"));
        }
        check_hop_scale(&self.velocities, self.dt_eff())?;
        check_snapshot_times(&self.snapshot_times, self.t_end)?;
        self.init.validate(self.n)
    }
}

pub(crate) fn check_snapshot_times(times: &[f64], t_end: f64) -> Result<()> {
    if times.iter().any(|t| !(*t >= 0.0 && *t <= t_end + TIME_SLACK)) {
        return Err(Error::invalid(format!("snapshot times must lie in [0, {t_end}]")));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("snapshot times must be non-decreasing"));
    }
    Ok(())
}

fn check_hop_scale(v: &VelocityParams, dt_eff: f64) -> Result<()> {
    if !(dt_eff >= 0.0) || dt_eff * v.c0() > 1.0 {
        return Err(Error::invalid(format!(
            "hop probability dt_eff * c0 = {} is not a probability",
            dt_eff * v.c0()
        )));
    }
    Ok(())
}

/// Probability that the right-mover in cell `k` hops to `k+1` this step.
pub fn hop_probability_right(s: &LatticeState, k: usize, v: &VelocityParams, dt_eff: f64) -> f64 {
    let n = s.len();
    let next = (k + 1) % n;
    let sp = f64::from(s.sigma_plus[k]);
    let sp1 = f64::from(s.sigma_plus[next]);
    let sm = f64::from(s.sigma_minus[k]);
    let sm1 = f64::from(s.sigma_minus[next]);
    let free = sp * (1.0 - sp1);
    dt_eff
        * (v.c0() * free * (1.0 - sm) * (1.0 - sm1)
            + v.c1() * free * sm * (1.0 - sm1)
            + v.c2() * free * (1.0 - sm) * sm1
            + v.c3() * free * sm * sm1)
}

/// Probability that the left-mover in cell `k` hops to `k-1` this step.
pub fn hop_probability_left(s: &LatticeState, k: usize, v: &VelocityParams, dt_eff: f64) -> f64 {
    let n = s.len();
    let prev = (k + n - 1) % n;
    let sm = f64::from(s.sigma_minus[k]);
    let sm1 = f64::from(s.sigma_minus[prev]);
    let sp = f64::from(s.sigma_plus[k]);
    let sp1 = f64::from(s.sigma_plus[prev]);
    let free = sm * (1.0 - sm1);
    dt_eff
        * (v.c0() * free * (1.0 - sp1) * (1.0 - sp)
            + v.c1() * free * (1.0 - sp1) * sp
            + v.c2() * free * sp1 * (1.0 - sp)
            + v.c3() * free * sp1 * sp)
}

/// Pre-multiplied hop probabilities with reusable move buffers.
#[derive(Debug, Clone)]
pub struct Stepper {
    /// Indexed by `opposite_here + 2 * opposite_ahead`.
    prob: [f64; 4],
    moves_plus: Vec<usize>,
    moves_minus: Vec<usize>,
}

impl Stepper {
    pub fn new(v: &VelocityParams, dt_eff: f64) -> Result<Self> {
        check_hop_scale(v, dt_eff)?;
        Ok(Stepper {
            prob: v.as_array().map(|c| dt_eff * c),
            moves_plus: Vec::new(),
            moves_minus: Vec::new(),
        })
    }

    /// One synchronous update in place. Draws are consumed in ascending
    /// cell order, right-movers first, one per walker whose target is free.
    pub fn advance<R: Rng + ?Sized>(&mut self, s: &mut LatticeState, rng: &mut R) {
        let n = s.len();
        let (plus, minus) = (&mut s.sigma_plus, &mut s.sigma_minus);
        self.moves_plus.clear();
        self.moves_minus.clear();

        for k in 0..n {
            let next = if k + 1 == n { 0 } else { k + 1 };
            if plus[k] == 1 && plus[next] == 0 {
                let p = self.prob[(minus[k] + 2 * minus[next]) as usize];
                if rng.random::<f64>() < p {
                    self.moves_plus.push(k);
                }
            }
        }
        for k in 0..n {
            let prev = if k == 0 { n - 1 } else { k - 1 };
            if minus[k] == 1 && minus[prev] == 0 {
                let p = self.prob[(plus[k] + 2 * plus[prev]) as usize];
                if rng.random::<f64>() < p {
                    self.moves_minus.push(k);
                }
            }
        }

        // Each target was empty in the pre-step state and has exactly one
        // candidate source, so the moves commute.
        for &k in &self.moves_plus {
            plus[k] = 0;
            plus[if k + 1 == n { 0 } else { k + 1 }] = 1;
        }
        for &k in &self.moves_minus {
            minus[k] = 0;
            minus[if k == 0 { n - 1 } else { k - 1 }] = 1;
        }
    }
}

/// One synchronous stochastic step.
pub fn step<R: Rng + ?Sized>(s: &LatticeState, v: &VelocityParams, dt_eff: f64, rng: &mut R) -> Result<LatticeState> {
    let mut stepper = Stepper::new(v, dt_eff)?;
    let mut out = s.clone();
    stepper.advance(&mut out, rng);
    Ok(out)
}

/// Generator for realization `index` of an ensemble seeded with `seed`:
/// one ChaCha8 key per seed, one stream per realization.
pub fn realization_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn steps_until(t: f64, dt: f64) -> usize {
    (t / dt + TIME_SLACK).floor() as usize
}

fn total_steps(t_end: f64, dt: f64) -> usize {
    (t_end / dt - TIME_SLACK).ceil().max(0.0) as usize
}

/// Runs realization `index` and calls `visit(snapshot_index, state)` at the
/// last step whose time does not exceed each snapshot time.
fn drive_realization<F>(cfg: &CaConfig, index: u64, mut visit: F) -> Result<()>
where
    F: FnMut(usize, &LatticeState),
{
    let mut rng = realization_rng(cfg.seed, index);
    let mut state = sample_initial(&cfg.init, cfg.n, &mut rng)?;
    let mut stepper = Stepper::new(&cfg.velocities, cfg.dt_eff())?;
    let targets: Vec<usize> = cfg
        .effective_snapshot_times()
        .iter()
        .map(|&t| steps_until(t, cfg.dt))
        .collect();
    let n_steps = total_steps(cfg.t_end, cfg.dt);

    let mut next = 0;
    let mut step_no = 0;
    loop {
        while next < targets.len() && targets[next] == step_no {
            visit(next, &state);
            next += 1;
        }
        if step_no >= n_steps || next == targets.len() {
            break;
        }
        stepper.advance(&mut state, &mut rng);
        step_no += 1;
    }
    Ok(())
}

/// Lattice snapshots of one seeded realization.
pub fn run_realization(cfg: &CaConfig, index: u64) -> Result<Vec<LatticeState>> {
    cfg.validate()?;
    let mut out = Vec::new();
    drive_realization(cfg, index, |_, s| out.push(s.clone()))?;
    Ok(out)
}

/// Monte-Carlo means of the occupancies at each snapshot time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub means: Vec<DensityField>,
    pub realizations: usize,
}

/// Occupancy counts summed over realizations; integer addition keeps the
/// reduction exact in any order.
struct Counts(Vec<(Vec<u32>, Vec<u32>)>);

impl Counts {
    fn zeros(snapshots: usize, n: usize) -> Self {
        Counts((0..snapshots).map(|_| (vec![0; n], vec![0; n])).collect())
    }

    fn add_state(&mut self, snap: usize, s: &LatticeState) {
        let (p, m) = &mut self.0[snap];
        for (acc, &x) in p.iter_mut().zip(s.sigma_plus()) {
            *acc += u32::from(x);
        }
        for (acc, &x) in m.iter_mut().zip(s.sigma_minus()) {
            *acc += u32::from(x);
        }
    }

    fn merge(mut self, other: Counts) -> Counts {
        for ((p, m), (op, om)) in self.0.iter_mut().zip(other.0) {
            p.iter_mut().zip(op).for_each(|(a, b)| *a += b);
            m.iter_mut().zip(om).for_each(|(a, b)| *a += b);
        }
        self
    }
}

/// Averages `mc_runs` independent realizations. Realization `i` uses
/// [`realization_rng`]`(seed, i)`; the result does not depend on how the
/// realizations are scheduled across threads.
pub fn run_ensemble(cfg: &CaConfig) -> Result<EnsembleStats> {
    cfg.validate()?;
    let times = cfg.effective_snapshot_times();
    let (snaps, n) = (times.len(), cfg.n);
    let counts = (0..cfg.mc_runs as u64)
        .into_par_iter()
        .try_fold(
            || Counts::zeros(snaps, n),
            |mut acc, i| {
                drive_realization(cfg, i, |snap, s| acc.add_state(snap, s))?;
                Ok::<_, Error>(acc)
            },
        )
        .try_reduce(|| Counts::zeros(snaps, n), |a, b| Ok(a.merge(b)))?;

    let runs = cfg.mc_runs as f64;
    let means = counts
        .0
        .into_iter()
        .map(|(p, m)| DensityField {
            rho_plus: p.into_iter().map(|c| f64::from(c) / runs).collect(),
            rho_minus: m.into_iter().map(|c| f64::from(c) / runs).collect(),
        })
        .collect();
    Ok(EnsembleStats {
        times,
        means,
        realizations: cfg.mc_runs,
    })
}
