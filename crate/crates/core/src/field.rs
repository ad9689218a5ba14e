use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Species};

/// Paired per-cell densities on a uniform periodic 1-D grid. Shared by the
/// CA ensemble means, the mesoscopic state and the PDE cell averages.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DensityField {
    pub rho_plus: Vec<f64>,
    pub rho_minus: Vec<f64>,
}

impl DensityField {
    pub fn new(rho_plus: Vec<f64>, rho_minus: Vec<f64>) -> Result<Self> {
        if rho_plus.len() != rho_minus.len() {
            return Err(Error::LengthMismatch {
                expected: rho_plus.len(),
                actual: rho_minus.len(),
            });
        }
        Ok(DensityField { rho_plus, rho_minus })
    }

    pub fn zeros(n: usize) -> Self {
        DensityField {
            rho_plus: vec![0.0; n],
            rho_minus: vec![0.0; n],
        }
    }

    pub fn uniform(n: usize, plus: f64, minus: f64) -> Self {
        DensityField {
            rho_plus: vec![plus; n],
            rho_minus: vec![minus; n],
        }
    }

    pub fn len(&self) -> usize {
        self.rho_plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho_plus.is_empty()
    }

    pub fn species(&self, s: Species) -> &[f64] {
        match s {
            Species::Plus => &self.rho_plus,
            Species::Minus => &self.rho_minus,
        }
    }

    /// Reflect `k -> n-1-k` and exchange the two species.
    pub fn mirrored(&self) -> Self {
        let rev = |v: &[f64]| v.iter().rev().copied().collect::<Vec<_>>();
        DensityField {
            rho_plus: rev(&self.rho_minus),
            rho_minus: rev(&self.rho_plus),
        }
    }

    /// `sum(rho) * cell_size` for each species.
    pub fn mass(&self, cell_size: f64) -> (f64, f64) {
        (
            self.rho_plus.iter().sum::<f64>() * cell_size,
            self.rho_minus.iter().sum::<f64>() * cell_size,
        )
    }

    /// First non-finite entry, if any.
    pub fn find_non_finite(&self) -> Option<(usize, Species)> {
        for (k, (p, m)) in self.rho_plus.iter().zip(&self.rho_minus).enumerate() {
            if !p.is_finite() {
                return Some((k, Species::Plus));
            }
            if !m.is_finite() {
                return Some((k, Species::Minus));
            }
        }
        None
    }
}

/// Periodic total variation `sum |u[j+1] - u[j]|`.
pub fn total_variation(u: &[f64]) -> f64 {
    let n = u.len();
    if n < 2 {
        return 0.0;
    }
    (0..n).map(|j| (u[(j + 1) % n] - u[j]).abs()).sum()
}

pub fn min_max(u: &[f64]) -> (f64, f64) {
    u.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}
