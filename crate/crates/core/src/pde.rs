//! Semi-discrete second-order central-upwind finite-volume scheme for
//!
//! ```text
//! rho+_t + [ f(rho+) g(rho-)]_x = (Q+(rho-) rho+_x)_x
//! rho-_t + [-f(rho-) g(rho+)]_x = (Q-(rho+) rho-_x)_x
//! ```
//!
//! on a uniform periodic grid, with generalized-minmod reconstruction,
//! one-sided local speeds that switch formula where the system loses
//! hyperbolicity, and third-order SSP Runge-Kutta time stepping.
//!
//! The sign of the left-mover transport lives in the flux vector
//! ([`signed_flux`]), so both species share one conservative update.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ca::check_snapshot_times;
use crate::error::{Error, Result};
use crate::field::{min_max, total_variation, DensityField};
use crate::model::{diffusion_coefficient, flux_f, flux_g, hyperbolicity_discriminant, trace_term, DensityPair, VelocityParams};

/// Below this speed gap the central-upwind flux degenerates to the mean of
/// the two side fluxes.
pub const SPEED_GAP_FLOOR: f64 = 1e-12;

/// Lower bound on the maximal local speed used by [`cfl_dt`].
pub const SPEED_FLOOR: f64 = 1e-12;

/// Excursions beyond `[0,1]` larger than this are reported in diagnostics.
pub const BOX_DIAGNOSTIC_TOLERANCE: f64 = 1e-8;

/// Uniform periodic grid on `[0, length]`; cell `j` is
/// `[j dx, (j+1) dx]` with centre `(j + 1/2) dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    length: f64,
    cells: usize,
}

impl Grid {
    pub fn new(length: f64, cells: usize) -> Result<Self> {
        if cells < 4 {
            return Err(Error::invalid(format!("grid needs at least 4 cells, got {cells}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::invalid(format!("domain length must be positive, got {length}")));
        }
        Ok(Grid { length, cells })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn dx(&self) -> f64 {
        self.length / self.cells as f64
    }

    pub fn center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dx()
    }

    /// Exact cell averages of the indicator of `[a, b]` (scaled by `height`).
    pub fn average_indicator(&self, a: f64, b: f64, height: f64) -> Vec<f64> {
        let dx = self.dx();
        (0..self.cells)
            .map(|j| {
                let (lo, hi) = (j as f64 * dx, (j + 1) as f64 * dx);
                height * (hi.min(b) - lo.max(a)).max(0.0) / dx
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams {
    /// Generalized minmod parameter in `[1, 2]`.
    pub theta: f64,
    /// Courant number in `(0, 1]`.
    pub cfl: f64,
    /// Viscosity length scale (m); zero for the inviscid system.
    pub eps: f64,
}

impl Default for SchemeParams {
    fn default() -> Self {
        SchemeParams {
            theta: 1.0,
            cfl: 0.5,
            eps: 0.0,
        }
    }
}

impl SchemeParams {
    pub fn validate(&self) -> Result<()> {
        if !(1.0..=2.0).contains(&self.theta) {
            return Err(Error::invalid(format!("theta must lie in [1,2], got {}", self.theta)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::invalid(format!("cfl must lie in (0,1], got {}", self.cfl)));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::invalid(format!("eps must be >= 0, got {}", self.eps)));
        }
        Ok(())
    }
}

/// Smallest argument if all are positive, largest if all are negative,
/// otherwise zero.
#[inline]
pub fn minmod(z1: f64, z2: f64, z3: f64) -> f64 {
    if z1 > 0.0 && z2 > 0.0 && z3 > 0.0 {
        z1.min(z2).min(z3)
    } else if z1 < 0.0 && z2 < 0.0 && z3 < 0.0 {
        z1.max(z2).max(z3)
    } else {
        0.0
    }
}

/// Limited slopes and the one-sided interface values of every cell.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Reconstruction {
    pub slope_plus: Vec<f64>,
    pub slope_minus: Vec<f64>,
    /// Value at the right edge of each cell.
    pub east: Vec<DensityPair>,
    /// Value at the left edge of each cell.
    pub west: Vec<DensityPair>,
}

fn limited_slopes(u: &[f64], dx: f64, theta: f64, out: &mut Vec<f64>) {
    let n = u.len();
    out.clear();
    out.extend((0..n).map(|j| {
        let prev = u[if j == 0 { n - 1 } else { j - 1 }];
        let next = u[if j + 1 == n { 0 } else { j + 1 }];
        minmod(
            theta * (u[j] - prev) / dx,
            (next - prev) / (2.0 * dx),
            theta * (next - u[j]) / dx,
        )
    }));
}

pub fn reconstruct_into(state: &DensityField, dx: f64, theta: f64, rec: &mut Reconstruction) {
    limited_slopes(&state.rho_plus, dx, theta, &mut rec.slope_plus);
    limited_slopes(&state.rho_minus, dx, theta, &mut rec.slope_minus);
    let half = 0.5 * dx;
    let n = state.len();
    rec.east.clear();
    rec.west.clear();
    for j in 0..n {
        let (p, m) = (state.rho_plus[j], state.rho_minus[j]);
        let (sp, sm) = (rec.slope_plus[j], rec.slope_minus[j]);
        rec.east.push(DensityPair::new(p + half * sp, m + half * sm));
        rec.west.push(DensityPair::new(p - half * sp, m - half * sm));
    }
}

pub fn reconstruct(state: &DensityField, dx: f64, theta: f64) -> Reconstruction {
    let mut rec = Reconstruction::default();
    reconstruct_into(state, dx, theta, &mut rec);
    rec
}

/// Flux vector `(f(rho+) g(rho-), -f(rho-) g(rho+))`.
#[inline]
pub fn signed_flux(d: DensityPair, v: &VelocityParams) -> [f64; 2] {
    [
        flux_f(d.plus) * flux_g(d.minus, v),
        -(flux_f(d.minus) * flux_g(d.plus, v)),
    ]
}

/// One-sided local speeds `(a+, a-)` at an interface with left state
/// `east` (east edge of cell `j`) and right state `west` (west edge of
/// cell `j+1`). Always `a- <= 0 <= a+`.
pub fn local_speeds(east: DensityPair, west: DensityPair, v: &VelocityParams) -> (f64, f64) {
    let (r_e, d_e) = (trace_term(east, v), hyperbolicity_discriminant(east, v));
    let (r_w, d_w) = (trace_term(west, v), hyperbolicity_discriminant(west, v));
    if d_e >= 0.0 && d_w >= 0.0 {
        let (s_e, s_w) = (d_e.sqrt(), d_w.sqrt());
        let ap = 0.5 * (r_e + s_e).max(r_w + s_w).max(0.0);
        let am = 0.5 * (r_e - s_e).min(r_w - s_w).min(0.0);
        (ap, am)
    } else {
        // Eigenvalue modulus on the complex side; on a side that is still
        // hyperbolic, twice its spectral radius.
        let modulus = |r: f64, d: f64| {
            if d < 0.0 {
                (r * r - d).sqrt()
            } else {
                r.abs() + d.sqrt()
            }
        };
        let ap = 0.5 * modulus(r_e, d_e).max(modulus(r_w, d_w));
        (ap, -ap)
    }
}

/// Central-upwind numerical flux for both species.
pub fn hyperbolic_flux(east: DensityPair, west: DensityPair, speeds: (f64, f64), v: &VelocityParams) -> [f64; 2] {
    let (ap, am) = speeds;
    let (fe, fw) = (signed_flux(east, v), signed_flux(west, v));
    let gap = ap - am;
    if gap < SPEED_GAP_FLOOR {
        return [0.5 * (fe[0] + fw[0]), 0.5 * (fe[1] + fw[1])];
    }
    let jump = [west.plus - east.plus, west.minus - east.minus];
    let w = ap * am / gap;
    [
        (ap * fe[0] - am * fw[0]) / gap + w * jump[0],
        (ap * fe[1] - am * fw[1]) / gap + w * jump[1],
    ]
}

/// Diagonal viscosity `Q(mid)`; each species' coefficient depends on the
/// opposite density.
#[inline]
pub fn viscosity(mid: DensityPair, v: &VelocityParams, eps: f64) -> [f64; 2] {
    [
        diffusion_coefficient(mid.minus, v, eps),
        diffusion_coefficient(mid.plus, v, eps),
    ]
}

/// Parabolic flux `Q(rho_mid) (avg_{j+1} - avg_j) / dx` with `rho_mid` the
/// mean of the two reconstructed interface values.
pub fn parabolic_flux(
    east: DensityPair,
    west: DensityPair,
    avg_left: DensityPair,
    avg_right: DensityPair,
    dx: f64,
    v: &VelocityParams,
    eps: f64,
) -> [f64; 2] {
    if eps == 0.0 {
        return [0.0, 0.0];
    }
    let mid = DensityPair::new(0.5 * (east.plus + west.plus), 0.5 * (east.minus + west.minus));
    let q = viscosity(mid, v, eps);
    [
        q[0] * (avg_right.plus - avg_left.plus) / dx,
        q[1] * (avg_right.minus - avg_left.minus) / dx,
    ]
}

/// Parabolic flux at interface `j + 1/2` of a state, reconstructing with `theta`.
pub fn parabolic_flux_at(state: &DensityField, j: usize, dx: f64, theta: f64, v: &VelocityParams, eps: f64) -> [f64; 2] {
    let rec = reconstruct(state, dx, theta);
    let n = state.len();
    let k = (j + 1) % n;
    let avg = |i: usize| DensityPair::new(state.rho_plus[i], state.rho_minus[i]);
    parabolic_flux(rec.east[j], rec.west[k], avg(j), avg(k), dx, v, eps)
}

/// Scratch buffers reused across right-hand-side evaluations.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    rec: Reconstruction,
    /// Total interface flux `H - P` at `j + 1/2`.
    flux: Vec<[f64; 2]>,
    /// Largest one-sided speed seen in the last evaluation.
    amax: f64,
    /// Largest viscosity coefficient seen in the last evaluation.
    qmax: f64,
}

fn interface_fluxes(state: &DensityField, grid: &Grid, params: &SchemeParams, v: &VelocityParams, ws: &mut Workspace) {
    let n = state.len();
    let dx = grid.dx();
    reconstruct_into(state, dx, params.theta, &mut ws.rec);
    ws.flux.clear();
    ws.amax = 0.0;
    ws.qmax = 0.0;
    for j in 0..n {
        let k = if j + 1 == n { 0 } else { j + 1 };
        let (east, west) = (ws.rec.east[j], ws.rec.west[k]);
        let speeds = local_speeds(east, west, v);
        ws.amax = ws.amax.max(speeds.0).max(-speeds.1);
        let h = hyperbolic_flux(east, west, speeds, v);
        let total = if params.eps > 0.0 {
            let mid = DensityPair::new(0.5 * (east.plus + west.plus), 0.5 * (east.minus + west.minus));
            let q = viscosity(mid, v, params.eps);
            ws.qmax = ws.qmax.max(q[0]).max(q[1]);
            let p = [
                q[0] * (state.rho_plus[k] - state.rho_plus[j]) / dx,
                q[1] * (state.rho_minus[k] - state.rho_minus[j]) / dx,
            ];
            [h[0] - p[0], h[1] - p[1]]
        } else {
            h
        };
        ws.flux.push(total);
    }
}

/// `d avg_j / dt = -(H_{j+1/2} - H_{j-1/2})/dx + (P_{j+1/2} - P_{j-1/2})/dx`.
pub fn semi_discrete_rhs_into(
    state: &DensityField,
    grid: &Grid,
    params: &SchemeParams,
    v: &VelocityParams,
    ws: &mut Workspace,
    out: &mut DensityField,
) {
    interface_fluxes(state, grid, params, v, ws);
    let n = state.len();
    let inv_dx = 1.0 / grid.dx();
    out.rho_plus.resize(n, 0.0);
    out.rho_minus.resize(n, 0.0);
    for j in 0..n {
        let left = ws.flux[if j == 0 { n - 1 } else { j - 1 }];
        let right = ws.flux[j];
        out.rho_plus[j] = -(right[0] - left[0]) * inv_dx;
        out.rho_minus[j] = -(right[1] - left[1]) * inv_dx;
    }
}

pub fn semi_discrete_rhs(state: &DensityField, grid: &Grid, params: &SchemeParams, v: &VelocityParams) -> DensityField {
    let mut ws = Workspace::default();
    let mut out = DensityField::zeros(state.len());
    semi_discrete_rhs_into(state, grid, params, v, &mut ws, &mut out);
    out
}

fn dt_from_bounds(amax: f64, qmax: f64, dx: f64, params: &SchemeParams) -> f64 {
    let hyperbolic = dx / amax.max(SPEED_FLOOR);
    let limit = if params.eps > 0.0 && qmax > 0.0 {
        hyperbolic.min(dx * dx / (2.0 * qmax))
    } else {
        hyperbolic
    };
    params.cfl * limit
}

/// `cfl * min(dx / amax, dx^2 / (2 qmax))`, the second bound only when
/// `eps > 0`.
pub fn cfl_dt(state: &DensityField, grid: &Grid, params: &SchemeParams, v: &VelocityParams) -> f64 {
    let mut ws = Workspace::default();
    interface_fluxes(state, grid, params, v, &mut ws);
    dt_from_bounds(ws.amax, ws.qmax, grid.dx(), params)
}

/// Three-stage third-order strong-stability-preserving Runge-Kutta step.
pub fn ssp_rk3_step<F>(state: &DensityField, dt: f64, mut rhs: F) -> DensityField
where
    F: FnMut(&DensityField) -> DensityField,
{
    let euler = |u: &DensityField, r: &DensityField| DensityField {
        rho_plus: u.rho_plus.iter().zip(&r.rho_plus).map(|(a, b)| a + dt * b).collect(),
        rho_minus: u.rho_minus.iter().zip(&r.rho_minus).map(|(a, b)| a + dt * b).collect(),
    };
    let blend = |wa: f64, a: &DensityField, wb: f64, b: &DensityField| DensityField {
        rho_plus: a.rho_plus.iter().zip(&b.rho_plus).map(|(x, y)| wa * x + wb * y).collect(),
        rho_minus: a.rho_minus.iter().zip(&b.rho_minus).map(|(x, y)| wa * x + wb * y).collect(),
    };
    let u1 = euler(state, &rhs(state));
    let u2 = blend(0.75, state, 0.25, &euler(&u1, &rhs(&u1)));
    blend(1.0 / 3.0, state, 2.0 / 3.0, &euler(&u2, &rhs(&u2)))
}

/// Per-snapshot summary of a PDE run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotDiagnostics {
    pub time: f64,
    pub min_plus: f64,
    pub max_plus: f64,
    pub min_minus: f64,
    pub max_minus: f64,
    pub tv_plus: f64,
    pub tv_minus: f64,
    pub mass_plus: f64,
    pub mass_minus: f64,
    /// Some value lies outside `[0,1]` by more than [`BOX_DIAGNOSTIC_TOLERANCE`].
    pub out_of_box: bool,
}

impl SnapshotDiagnostics {
    pub fn of(time: f64, field: &DensityField, dx: f64) -> Self {
        let (min_plus, max_plus) = min_max(&field.rho_plus);
        let (min_minus, max_minus) = min_max(&field.rho_minus);
        let (mass_plus, mass_minus) = field.mass(dx);
        let tol = BOX_DIAGNOSTIC_TOLERANCE;
        SnapshotDiagnostics {
            time,
            min_plus,
            max_plus,
            min_minus,
            max_minus,
            tv_plus: total_variation(&field.rho_plus),
            tv_minus: total_variation(&field.rho_minus),
            mass_plus,
            mass_minus,
            out_of_box: min_plus.min(min_minus) < -tol || max_plus.max(max_minus) > 1.0 + tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeRun {
    pub times: Vec<f64>,
    pub snapshots: Vec<DensityField>,
    pub diagnostics: Vec<SnapshotDiagnostics>,
    pub steps: usize,
    pub wall_time_s: f64,
}

/// Integrates from `state0` to `t_end` with CFL-limited SSP-RK3 steps,
/// shortening steps to land on every snapshot time. An empty snapshot
/// list records `t_end` only.
pub fn run_pde(
    grid: &Grid,
    state0: &DensityField,
    params: &SchemeParams,
    v: &VelocityParams,
    t_end: f64,
    snapshot_times: &[f64],
) -> Result<PdeRun> {
    params.validate()?;
    if state0.len() != grid.cells() {
        return Err(Error::LengthMismatch {
            expected: grid.cells(),
            actual: state0.len(),
        });
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::invalid(format!("t_end must be >= 0, got {t_end}")));
    }
    check_snapshot_times(snapshot_times, t_end)?;
    if let Some((cell, species)) = state0.find_non_finite() {
        return Err(Error::NonFinite { time: 0.0, cell, species });
    }
    let times: Vec<f64> = if snapshot_times.is_empty() {
        vec![t_end]
    } else {
        snapshot_times.to_vec()
    };

    let started = Instant::now();
    let dx = grid.dx();
    let mut ws = Workspace::default();
    let mut rate = DensityField::zeros(grid.cells());
    let mut state = state0.clone();
    let mut t = 0.0;
    let mut steps = 0;
    let mut snapshots = Vec::with_capacity(times.len());
    let mut diagnostics = Vec::with_capacity(times.len());

    for &target in &times {
        while t < target {
            // the first stage's fluxes also give the CFL bound
            semi_discrete_rhs_into(&state, grid, params, v, &mut ws, &mut rate);
            let dt_cfl = dt_from_bounds(ws.amax, ws.qmax, dx, params);
            let remaining = target - t;
            let (dt, last) = if remaining <= dt_cfl * (1.0 + 1e-9) {
                (remaining, true)
            } else {
                (dt_cfl, false)
            };
            let mut first = Some(rate.clone());
            state = ssp_rk3_step(&state, dt, |u| {
                first.take().unwrap_or_else(|| {
                    let mut r = DensityField::zeros(u.len());
                    semi_discrete_rhs_into(u, grid, params, v, &mut ws, &mut r);
                    r
                })
            });
            t = if last { target } else { t + dt };
            steps += 1;
            if let Some((cell, species)) = state.find_non_finite() {
                return Err(Error::NonFinite { time: t, cell, species });
            }
        }
        diagnostics.push(SnapshotDiagnostics::of(target, &state, dx));
        snapshots.push(state.clone());
    }
    Ok(PdeRun {
        times,
        snapshots,
        diagnostics,
        steps,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}
