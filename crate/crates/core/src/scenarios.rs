//! Experiment descriptions that expand into matched CA, mesoscopic and PDE
//! runs on one clock and one spatial frame, plus the binning and metrics
//! used to compare them.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ca::{CaConfig, InitialCondition};
use crate::error::{Error, Result, Species};
use crate::field::{min_max, total_variation, DensityField};
use crate::meso::{default_dt, MesoState};
use crate::model::VelocityParams;
use crate::pde::{Grid, SchemeParams};

/// Relative tolerance for `N h = L = M dx`.
const FRAME_TOLERANCE: f64 = 1e-9;

/// Walker counts per sector of the built-in fully mixed experiments: 35 per
/// species over 30 sectors, drawn once from a seeded uniform multinomial.
pub const MIXED_PLUS_COUNTS: [usize; 30] = [
    2, 4, 1, 1, 2, 2, 1, 0, 0, 0, 2, 1, 1, 0, 1, 1, 1, 1, 4, 1, 2, 2, 0, 3, 0, 0, 0, 1, 0, 1,
];
pub const MIXED_MINUS_COUNTS: [usize; 30] = [
    1, 1, 0, 0, 2, 2, 4, 1, 2, 0, 2, 2, 1, 1, 1, 0, 0, 0, 1, 1, 0, 4, 1, 0, 2, 0, 0, 3, 2, 1,
];

/// Constant density `height` on `[from, to]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub from: f64,
    pub to: f64,
    pub height: f64,
}

impl Plateau {
    fn validate(&self, length: f64) -> Result<()> {
        if !(0.0 <= self.from && self.from <= self.to && self.to <= length) {
            return Err(Error::invalid(format!(
                "plateau [{}, {}] must lie inside [0, {length}]",
                self.from, self.to
            )));
        }
        if !(0.0..=1.0).contains(&self.height) {
            return Err(Error::invalid(format!("plateau height {} outside [0,1]", self.height)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// Two packed groups released toward each other (1-based CA labels).
    RedLight { n1: usize, n2: usize },
    /// Per-sector walker counts; the PDE starts from `count / cells_per_sector`.
    FullyMixed {
        plus_counts: Vec<usize>,
        minus_counts: Vec<usize>,
        cells_per_sector: usize,
    },
    /// One plateau per species, sampled cell by cell for the CA.
    Nonhyperbolic { plus: Plateau, minus: Plateau },
    /// Sums of plateaus per species, sampled cell by cell for the CA.
    Custom { plus: Vec<Plateau>, minus: Vec<Plateau> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaSettings {
    #[serde(alias = "N")]
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub mc_runs: usize,
    pub seed: u64,
    #[serde(default)]
    pub literal_rates: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MesoSettings {
    /// Forward-Euler step; defaults to `0.25 h / c0`.
    #[serde(default)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeSettings {
    #[serde(alias = "M")]
    pub m: usize,
    pub theta: f64,
    pub cfl: f64,
    pub eps: f64,
}

impl PdeSettings {
    pub fn scheme(&self) -> SchemeParams {
        SchemeParams {
            theta: self.theta,
            cfl: self.cfl,
            eps: self.eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(flatten)]
    pub family: Family,
    pub velocities: VelocityParams,
    /// Domain length (m).
    pub length: f64,
    pub ca: CaSettings,
    #[serde(default)]
    pub meso: MesoSettings,
    pub pde: PdeSettings,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
}

impl ScenarioSpec {
    pub fn validate_frame(&self) -> Result<()> {
        let ca_len = self.ca.n as f64 * self.ca.h;
        if !(self.length > 0.0) || (ca_len - self.length).abs() > FRAME_TOLERANCE * self.length {
            return Err(Error::FrameMismatch(format!(
                "CA frame N*h = {ca_len} does not match domain length {}",
                self.length
            )));
        }
        Grid::new(self.length, self.pde.m)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.length, self.pde.m)
    }

    /// Set the PDE cell count from a target spacing; `length / dx` must be
    /// an integer.
    pub fn set_dx(&mut self, dx: f64) -> Result<()> {
        let cells = self.length / dx;
        let rounded = cells.round();
        if !(dx > 0.0) || (cells - rounded).abs() > 1e-6 * cells.max(1.0) {
            return Err(Error::FrameMismatch(format!(
                "dx = {dx} does not divide the domain length {}",
                self.length
            )));
        }
        self.pde.m = rounded as usize;
        Ok(())
    }

    /// Replace the horizon, dropping snapshot times beyond it.
    pub fn set_t_end(&mut self, t_end: f64) {
        self.t_end = t_end;
        self.snapshot_times.retain(|&t| t <= t_end);
    }
}

/// One initial density field expressed on a given partition of the domain.
fn plateau_averages(plateaus: &[Plateau], grid: &Grid) -> Vec<f64> {
    let mut out = vec![0.0; grid.cells()];
    for p in plateaus {
        for (o, a) in out.iter_mut().zip(grid.average_indicator(p.from, p.to, p.height)) {
            *o += a;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MesoSetup {
    pub state0: MesoState,
    pub velocities: VelocityParams,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeSetup {
    pub grid: Grid,
    pub state0: DensityField,
    pub params: SchemeParams,
    pub velocities: VelocityParams,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expanded {
    pub ca: CaConfig,
    pub meso: MesoSetup,
    pub pde: PdeSetup,
}

/// Derive matched configurations for all three tiers from one scenario.
pub fn expand(spec: &ScenarioSpec) -> Result<Expanded> {
    spec.validate_frame()?;
    let n = spec.ca.n;
    let grid = spec.grid()?;
    // the CA lattice seen as a grid
    let lattice = |plateaus: &[Plateau]| Ok(plateau_averages(plateaus, &Grid::new(spec.length, n)?));

    let (init, lattice_field, pde_field) = match &spec.family {
        Family::RedLight { n1, n2 } => {
            let init = InitialCondition::RedLight { n1: *n1, n2: *n2 };
            let field = init.expected_occupation(n)?;
            let pde = bin_to_grid(&field, spec.ca.h, &grid)?;
            (init, field, pde)
        }
        Family::FullyMixed {
            plus_counts,
            minus_counts,
            cells_per_sector,
        } => {
            let init = InitialCondition::MixedSectors {
                plus_counts: plus_counts.clone(),
                minus_counts: minus_counts.clone(),
                cells_per_sector: *cells_per_sector,
            };
            let field = init.expected_occupation(n)?;
            let pde = bin_to_grid(&field, spec.ca.h, &grid)?;
            (init, field, pde)
        }
        Family::Nonhyperbolic { plus, minus } => plateau_setup(spec, &grid, &[*plus], &[*minus], lattice)?,
        Family::Custom { plus, minus } => plateau_setup(spec, &grid, plus, minus, lattice)?,
    };

    let ca = CaConfig {
        n,
        h: spec.ca.h,
        dt: spec.ca.dt,
        t_end: spec.t_end,
        snapshot_times: spec.snapshot_times.clone(),
        mc_runs: spec.ca.mc_runs,
        seed: spec.ca.seed,
        velocities: spec.velocities,
        init,
        literal_rates: spec.ca.literal_rates,
    };
    ca.validate()?;

    let meso = MesoSetup {
        state0: MesoState::new(lattice_field, spec.ca.h)?,
        velocities: spec.velocities,
        dt: spec.meso.dt.unwrap_or_else(|| default_dt(spec.ca.h, &spec.velocities)),
        t_end: spec.t_end,
        snapshot_times: spec.snapshot_times.clone(),
    };
    let pde = PdeSetup {
        grid,
        state0: pde_field,
        params: spec.pde.scheme(),
        velocities: spec.velocities,
        t_end: spec.t_end,
        snapshot_times: spec.snapshot_times.clone(),
    };
    pde.params.validate()?;
    Ok(Expanded { ca, meso, pde })
}

fn plateau_setup<L>(
    spec: &ScenarioSpec,
    grid: &Grid,
    plus: &[Plateau],
    minus: &[Plateau],
    lattice: L,
) -> Result<(InitialCondition, DensityField, DensityField)>
where
    L: Fn(&[Plateau]) -> Result<Vec<f64>>,
{
    for p in plus.iter().chain(minus) {
        p.validate(spec.length)?;
    }
    let (lp, lm) = (lattice(plus)?, lattice(minus)?);
    if lp.iter().chain(&lm).any(|&r| r > 1.0 + 1e-12) {
        return Err(Error::invalid("overlapping plateaus exceed density 1"));
    }
    let clamp = |v: Vec<f64>| v.into_iter().map(|r| r.min(1.0)).collect::<Vec<_>>();
    let (lp, lm) = (clamp(lp), clamp(lm));
    let init = InitialCondition::FromDensity {
        rho_plus: lp.clone(),
        rho_minus: lm.clone(),
    };
    let pde = DensityField::new(plateau_averages(plus, grid), plateau_averages(minus, grid))?;
    Ok((init, DensityField::new(lp, lm)?, pde))
}

/// Conservative overlap averaging of a field with cell size `src_h` onto
/// `grid`. Both must cover the same domain.
pub fn bin_to_grid(field: &DensityField, src_h: f64, grid: &Grid) -> Result<DensityField> {
    let n = field.len();
    let length = grid.length();
    if n == 0 || (n as f64 * src_h - length).abs() > FRAME_TOLERANCE * length {
        return Err(Error::FrameMismatch(format!(
            "source frame {n} x {src_h} does not cover domain length {length}"
        )));
    }
    if n == grid.cells() {
        return Ok(field.clone());
    }
    // shared edges are placed on the same lattice of fractions of `length`
    let src_edge = |k: usize| length * k as f64 / n as f64;
    let dst_edge = |j: usize| length * j as f64 / grid.cells() as f64;
    let dx = grid.dx();
    let mut out = DensityField::zeros(grid.cells());
    let (mut k, mut j) = (0, 0);
    while k < n && j < grid.cells() {
        let lo = src_edge(k).max(dst_edge(j));
        let hi = src_edge(k + 1).min(dst_edge(j + 1));
        let w = (hi - lo).max(0.0) / dx;
        out.rho_plus[j] += w * field.rho_plus[k];
        out.rho_minus[j] += w * field.rho_minus[k];
        if src_edge(k + 1) <= dst_edge(j + 1) {
            k += 1;
        } else {
            j += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeciesMetrics {
    pub species: Species,
    /// `sum |reference - pde| dx`.
    pub l1: f64,
    pub linf: f64,
    /// Total variation of the reference (binned CA) field.
    pub tv_reference: f64,
    pub tv_pde: f64,
    pub min_pde: f64,
    pub max_pde: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub time: f64,
    pub plus: SpeciesMetrics,
    pub minus: SpeciesMetrics,
}

impl ComparisonEntry {
    /// `l1(rho+) + l1(rho-)`.
    pub fn total_l1(&self) -> f64 {
        self.plus.l1 + self.minus.l1
    }
}

/// Distances and diagnostics between a binned reference field and a PDE
/// field on the same grid.
pub fn compare(time: f64, reference: &DensityField, pde: &DensityField, dx: f64) -> Result<ComparisonEntry> {
    if reference.len() != pde.len() {
        return Err(Error::LengthMismatch {
            expected: pde.len(),
            actual: reference.len(),
        });
    }
    let metrics = |species: Species| {
        let (a, b) = (reference.species(species), pde.species(species));
        let mut l1 = 0.0;
        let mut linf: f64 = 0.0;
        for (x, y) in a.iter().zip(b) {
            let d = (x - y).abs();
            l1 += d;
            linf = linf.max(d);
        }
        let (min_pde, max_pde) = min_max(b);
        SpeciesMetrics {
            species,
            l1: l1 * dx,
            linf,
            tv_reference: total_variation(a),
            tv_pde: total_variation(b),
            min_pde,
            max_pde,
        }
    };
    Ok(ComparisonEntry {
        time,
        plus: metrics(Species::Plus),
        minus: metrics(Species::Minus),
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub entries: Vec<ComparisonEntry>,
}

impl ComparisonReport {
    /// CSV with header `time,species,l1,linf,tv_ca,tv_pde,min_pde,max_pde`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,species,l1,linf,tv_ca,tv_pde,min_pde,max_pde")?;
        for e in &self.entries {
            for m in [&e.plus, &e.minus] {
                writeln!(
                    w,
                    "{:?},{},{:?},{:?},{:?},{:?},{:?},{:?}",
                    e.time, m.species, m.l1, m.linf, m.tv_reference, m.tv_pde, m.min_pde, m.max_pde
                )?;
            }
        }
        Ok(())
    }
}

fn red_light(name: &str, a: f64) -> ScenarioSpec {
    ScenarioSpec {
        name: name.to_string(),
        family: Family::RedLight { n1: 301, n2: 340 },
        velocities: VelocityParams::slowdown(0.8, a).expect("built-in velocities are valid"),
        length: 280.0,
        ca: CaSettings {
            n: 1400,
            h: 0.2,
            dt: 0.01,
            mc_runs: 5000,
            seed: 20_130_501,
            literal_rates: false,
        },
        meso: MesoSettings::default(),
        pde: PdeSettings {
            m: 350,
            theta: 1.0,
            cfl: 0.5,
            eps: 0.0,
        },
        t_end: 210.0,
        snapshot_times: vec![80.0, 110.0, 140.0, 170.0, 210.0],
    }
}

fn fully_mixed(name: &str, a: f64, eps: f64) -> ScenarioSpec {
    ScenarioSpec {
        name: name.to_string(),
        family: Family::FullyMixed {
            plus_counts: MIXED_PLUS_COUNTS.to_vec(),
            minus_counts: MIXED_MINUS_COUNTS.to_vec(),
            cells_per_sector: 15,
        },
        velocities: VelocityParams::slowdown(1.0, a).expect("built-in velocities are valid"),
        length: 210.0,
        ca: CaSettings {
            n: 450,
            h: 210.0 / 450.0,
            dt: 0.005,
            mc_runs: 3000,
            seed: 20_130_502,
            literal_rates: false,
        },
        meso: MesoSettings::default(),
        pde: PdeSettings {
            m: 210,
            theta: 1.0,
            cfl: 0.5,
            eps,
        },
        t_end: 200.0,
        snapshot_times: vec![0.0, 25.0, 50.0, 100.0, 150.0, 200.0],
    }
}

fn nonhyperbolic(name: &str, eps: f64) -> ScenarioSpec {
    ScenarioSpec {
        name: name.to_string(),
        family: Family::Nonhyperbolic {
            plus: Plateau {
                from: 140.0,
                to: 210.0,
                height: 0.6,
            },
            minus: Plateau {
                from: 186.6,
                to: 233.3,
                height: 0.6,
            },
        },
        velocities: VelocityParams::slowdown(1.0, 2.0).expect("built-in velocities are valid"),
        length: 420.0,
        ca: CaSettings {
            n: 900,
            h: 420.0 / 900.0,
            dt: 0.005,
            mc_runs: 3000,
            seed: 20_130_503,
            literal_rates: false,
        },
        meso: MesoSettings::default(),
        pde: PdeSettings {
            m: 1280,
            theta: 1.0,
            cfl: 0.5,
            eps,
        },
        t_end: 40.0,
        snapshot_times: vec![0.0, 10.0, 20.0, 30.0, 40.0],
    }
}

/// The shipped experiments.
pub fn builtin_scenarios() -> Vec<ScenarioSpec> {
    vec![
        red_light("redlight-a2", 2.0),
        red_light("redlight-a3", 3.0),
        fully_mixed("mixed-a2", 2.0, 0.0),
        fully_mixed("mixed-a3", 3.0, 0.0),
        fully_mixed("mixed-a2-viscous", 2.0, 0.5),
        fully_mixed("mixed-a3-viscous", 3.0, 0.5),
        nonhyperbolic("nonhyp-a2", 0.0),
        nonhyperbolic("nonhyp-a2-eps0.5", 0.5),
        nonhyperbolic("nonhyp-a2-eps1.5", 1.5),
    ]
}

pub fn find_builtin(name: &str) -> Option<ScenarioSpec> {
    builtin_scenarios().into_iter().find(|s| s.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn builtins_have_consistent_frames() {
        let all = builtin_scenarios();
        for name in ["redlight-a2", "redlight-a3", "mixed-a2", "mixed-a3", "nonhyp-a2"] {
            assert!(all.iter().any(|s| s.name == name), "{name} missing");
        }
        for s in &all {
            s.validate_frame().unwrap();
            expand(s).unwrap();
        }
    }

    #[test]
    fn red_light_frame_matches_corridor_domain() {
        let s = find_builtin("redlight-a2").unwrap();
        assert_eq!(s.ca.n as f64 * s.ca.h, 280.0);
        assert_eq!(s.grid().unwrap().dx(), 0.8);
        assert_eq!(s.velocities.c1(), 0.4);
        assert_eq!(s.velocities.c3(), 0.2);
        // labels 301..=340 cover (60, 68]
        let ex = expand(&s).unwrap();
        let f = &ex.meso.state0.field;
        let covered: Vec<usize> = (0..1400).filter(|&k| f.rho_plus[k] == 1.0).collect();
        assert_eq!(covered.first().map(|&k| k as f64 * 0.2), Some(60.0));
        assert_relative_eq!((covered.last().unwrap() + 1) as f64 * 0.2, 68.0, epsilon = 1e-12);
    }

    #[test]
    fn nonhyperbolic_grid_spacing() {
        let s = find_builtin("nonhyp-a2").unwrap();
        assert_eq!(s.grid().unwrap().dx(), 420.0 / 1280.0);
        match s.family {
            Family::Nonhyperbolic { minus, .. } => {
                assert_eq!((minus.from, minus.to, minus.height), (186.6, 233.3, 0.6))
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn mixed_counts_sum_to_35() {
        assert_eq!(MIXED_PLUS_COUNTS.iter().sum::<usize>(), 35);
        assert_eq!(MIXED_MINUS_COUNTS.iter().sum::<usize>(), 35);
        assert!(MIXED_PLUS_COUNTS.iter().chain(&MIXED_MINUS_COUNTS).all(|&c| c <= 15));
    }

    #[test]
    fn red_light_pde_start_is_indicator_average() {
        let ex = expand(&find_builtin("redlight-a2").unwrap()).unwrap();
        let p = &ex.pde.state0.rho_plus;
        // [60, 68] is aligned with dx = 0.8: cells 75..85
        assert!((75..85).all(|j| (p[j] - 1.0).abs() < 1e-12));
        assert!(p.iter().enumerate().all(|(j, &x)| (75..85).contains(&j) || x == 0.0));
        // left-movers start on [211.8, 219.8]: fractional edge cells
        let m = &ex.pde.state0.rho_minus;
        assert_relative_eq!(m[264], 0.25, epsilon = 1e-12);
        assert_relative_eq!(m[274], 0.75, epsilon = 1e-12);
    }

    #[test]
    fn uniform_sectors_give_uniform_density() {
        let mut s = find_builtin("mixed-a2").unwrap();
        s.family = Family::FullyMixed {
            plus_counts: vec![3; 30],
            minus_counts: vec![6; 30],
            cells_per_sector: 15,
        };
        let ex = expand(&s).unwrap();
        assert!(ex.pde.state0.rho_plus.iter().all(|&x| (x - 0.2).abs() < 1e-12));
        assert!(ex.pde.state0.rho_minus.iter().all(|&x| (x - 0.4).abs() < 1e-12));
    }

    #[test]
    fn masses_agree_across_tiers() {
        for s in builtin_scenarios() {
            let ex = expand(&s).unwrap();
            let (cp, cm) = ex.ca.init.expected_occupation(s.ca.n).unwrap().mass(s.ca.h);
            let (mp, mm) = ex.meso.state0.field.mass(s.ca.h);
            let (pp, pm) = ex.pde.state0.mass(ex.pde.grid.dx());
            for (a, b) in [(cp, mp), (cp, pp), (cm, mm), (cm, pm)] {
                assert!((a - b).abs() <= 1e-12 * a.max(1.0), "{}: {a} vs {b}", s.name);
            }
        }
    }

    #[test]
    fn frame_mismatch_rejected() {
        let mut s = find_builtin("redlight-a2").unwrap();
        s.ca.h = 0.25;
        assert!(matches!(expand(&s), Err(Error::FrameMismatch(_))));
        let mut s = find_builtin("redlight-a2").unwrap();
        assert!(s.set_dx(0.75).is_err());
        s.set_dx(1.6).unwrap();
        assert_eq!(s.pde.m, 175);
    }

    #[test]
    fn binning_cases() {
        let grid = Grid::new(4.0, 4).unwrap();
        let f = DensityField::new(vec![0.1, 0.2, 0.3, 0.4], vec![0.0; 4]).unwrap();
        assert_eq!(bin_to_grid(&f, 1.0, &grid).unwrap(), f);

        let pair = DensityField::new(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], vec![0.0; 8]).unwrap();
        let b = bin_to_grid(&pair, 0.5, &grid).unwrap();
        assert_eq!(b.rho_plus[0], 0.5);

        let uni = DensityField::uniform(7, 0.3, 0.9);
        let b = bin_to_grid(&uni, 4.0 / 7.0, &grid).unwrap();
        assert!(b.rho_plus.iter().all(|&x| (x - 0.3).abs() < 1e-14));
        assert!(b.rho_minus.iter().all(|&x| (x - 0.9).abs() < 1e-14));

        assert!(bin_to_grid(&uni, 0.5, &grid).is_err());
    }

    #[test]
    fn compare_cases() {
        let a = DensityField::new(vec![0.1, 0.5, 0.2, 0.0], vec![0.3; 4]).unwrap();
        let e = compare(1.0, &a, &a, 0.5).unwrap();
        assert_eq!((e.plus.l1, e.plus.linf, e.minus.l1, e.minus.linf), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(e.minus.tv_pde, 0.0);

        let mut b = a.clone();
        b.rho_plus[2] += 0.25;
        let e = compare(1.0, &a, &b, 0.5).unwrap();
        assert_relative_eq!(e.plus.l1, 0.25 * 0.5, epsilon = 1e-15);
        assert_relative_eq!(e.plus.linf, 0.25, epsilon = 1e-15);
        assert!(compare(1.0, &a, &DensityField::zeros(3), 0.5).is_err());
    }

    #[test]
    fn report_csv_header() {
        let a = DensityField::uniform(4, 0.5, 0.25);
        let report = ComparisonReport {
            entries: vec![compare(2.0, &a, &a, 1.0).unwrap()],
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("time,species,l1,linf,tv_ca,tv_pde,min_pde,max_pde"));
        assert_eq!(lines.next(), Some("2.0,rho_plus,0.0,0.0,0.0,0.0,0.5,0.5"));
        assert_eq!(lines.next(), Some("2.0,rho_minus,0.0,0.0,0.0,0.0,0.25,0.25"));
    }

    #[test]
    fn scenario_json_round_trip() {
        for s in builtin_scenarios() {
            let text = serde_json::to_string_pretty(&s).unwrap();
            let back: ScenarioSpec = serde_json::from_str(&text).unwrap();
            assert_eq!(back, s);
        }
    }

    proptest! {
        #[test]
        fn binning_preserves_mass(values in proptest::collection::vec(0.0f64..=1.0, 30), m in 4usize..50) {
            let length = 21.0;
            let src = DensityField::new(values.clone(), values.iter().rev().copied().collect()).unwrap();
            let h = length / 30.0;
            let grid = Grid::new(length, m).unwrap();
            let b = bin_to_grid(&src, h, &grid).unwrap();
            let (sp, sm) = src.mass(h);
            let (bp, bm) = b.mass(grid.dx());
            prop_assert!((sp - bp).abs() <= 1e-13 * sp.max(1.0));
            prop_assert!((sm - bm).abs() <= 1e-13 * sm.max(1.0));
        }
    }
}
