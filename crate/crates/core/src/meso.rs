//! Closed mean-field ODE system for the per-cell expected densities, in
//! conservative flux form on the CA lattice, integrated with forward Euler.

use serde::{Deserialize, Serialize};

use crate::ca::check_snapshot_times;
use crate::error::{Error, Result, Species};
use crate::field::DensityField;
use crate::model::VelocityParams;

/// Densities are allowed this far outside `[0,1]` before integration aborts.
pub const ESCAPE_TOLERANCE: f64 = 1e-10;

/// Default forward-Euler step as a fraction of `h / c0`.
pub const DEFAULT_STEP_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MesoState {
    pub field: DensityField,
    /// Cell length (m).
    pub h: f64,
}

impl MesoState {
    pub fn new(field: DensityField, h: f64) -> Result<Self> {
        if field.len() < 2 {
            return Err(Error::invalid("mesoscopic lattice needs at least 2 cells"));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid(format!("cell length must be positive, got {h}")));
        }
        Ok(MesoState { field, h })
    }

    pub fn len(&self) -> usize {
        self.field.len()
    }

    pub fn is_empty(&self) -> bool {
        self.field.is_empty()
    }
}

/// Mean hop rate of a walker leaving a cell with opposite-species density
/// `opp_here` toward a cell with opposite-species density `opp_ahead`,
/// times its own occupation and the vacancy of the target.
#[inline]
fn lattice_flux(own_from: f64, own_to: f64, opp_here: f64, opp_ahead: f64, c: &[f64; 4]) -> f64 {
    own_from
        * (1.0 - own_to)
        * ((1.0 - opp_ahead) * (c[0] * (1.0 - opp_here) + c[1] * opp_here)
            + opp_ahead * (c[2] * (1.0 - opp_here) + c[3] * opp_here))
}

/// `(F+_{k,k+1}, F-_{k,k+1})`: the right-mover flux leaving `k` and the
/// left-mover flux leaving `k+1`, both non-negative.
pub fn meso_flux_pair(state: &MesoState, k: usize, v: &VelocityParams) -> (f64, f64) {
    let n = state.len();
    let next = (k + 1) % n;
    let (p, m) = (&state.field.rho_plus, &state.field.rho_minus);
    let c = v.as_array();
    (
        lattice_flux(p[k], p[next], m[k], m[next], &c),
        lattice_flux(m[next], m[k], p[next], p[k], &c),
    )
}

/// Time derivative of both density arrays, written into `out`.
pub fn meso_rhs_into(state: &MesoState, v: &VelocityParams, out: &mut DensityField) {
    let n = state.len();
    let inv_h = 1.0 / state.h;
    let (p, m) = (&state.field.rho_plus, &state.field.rho_minus);
    let c = v.as_array();
    let flux = |k: usize| {
        let next = if k + 1 == n { 0 } else { k + 1 };
        (
            lattice_flux(p[k], p[next], m[k], m[next], &c),
            lattice_flux(m[next], m[k], p[next], p[k], &c),
        )
    };
    out.rho_plus.resize(n, 0.0);
    out.rho_minus.resize(n, 0.0);
    let mut left = flux(n - 1);
    for k in 0..n {
        let right = flux(k);
        out.rho_plus[k] = -(right.0 - left.0) * inv_h;
        out.rho_minus[k] = (right.1 - left.1) * inv_h;
        left = right;
    }
}

pub fn meso_rhs(state: &MesoState, v: &VelocityParams) -> DensityField {
    let mut out = DensityField::zeros(state.len());
    meso_rhs_into(state, v, &mut out);
    out
}

/// Largest stable default step, `0.25 h / c0`.
pub fn default_dt(h: f64, v: &VelocityParams) -> f64 {
    DEFAULT_STEP_FRACTION * h / v.c0()
}

fn check_box(field: &DensityField, time: f64) -> Result<()> {
    let bad = |x: f64| !(x >= -ESCAPE_TOLERANCE && x <= 1.0 + ESCAPE_TOLERANCE);
    for (k, (&p, &m)) in field.rho_plus.iter().zip(&field.rho_minus).enumerate() {
        for (species, value) in [(Species::Plus, p), (Species::Minus, m)] {
            if bad(value) {
                return Err(Error::DensityEscape {
                    time,
                    cell: k,
                    species,
                    value,
                });
            }
        }
    }
    Ok(())
}

/// Forward-Euler integration of [`meso_rhs`]. Steps are shortened to land
/// on each snapshot time exactly; an empty snapshot list records `t_end`.
/// Aborts if any density leaves `[0,1]` by more than [`ESCAPE_TOLERANCE`].
pub fn integrate_meso(
    state0: &MesoState,
    v: &VelocityParams,
    t_end: f64,
    dt: f64,
    snapshot_times: &[f64],
) -> Result<Vec<MesoState>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::invalid(format!("t_end must be >= 0, got {t_end}")));
    }
    check_snapshot_times(snapshot_times, t_end)?;
    check_box(&state0.field, 0.0)?;
    let times: Vec<f64> = if snapshot_times.is_empty() {
        vec![t_end]
    } else {
        snapshot_times.to_vec()
    };

    let mut state = state0.clone();
    let mut rate = DensityField::zeros(state.len());
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in &times {
        while t < target {
            let remaining = target - t;
            // absorb a sliver left over from rounding into this step
            let (tau, last) = if remaining <= dt * (1.0 + 1e-9) {
                (remaining, true)
            } else {
                (dt, false)
            };
            meso_rhs_into(&state, v, &mut rate);
            let f = &mut state.field;
            for (u, du) in f.rho_plus.iter_mut().zip(&rate.rho_plus) {
                *u += tau * du;
            }
            for (u, du) in f.rho_minus.iter_mut().zip(&rate.rho_minus) {
                *u += tau * du;
            }
            t = if last { target } else { t + tau };
            check_box(&state.field, t)?;
        }
        out.push(state.clone());
    }
    Ok(out)
}
