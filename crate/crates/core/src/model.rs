//! Model parameterization and the macroscopic flux kernel shared by every tier.
//!
//! The right-moving species is transported by `f(rho+) g(rho-)` and the
//! left-moving species by `f(rho-) g(rho+)` in the opposite direction, with
//! `f(u) = u(1-u)` and `g` the quadratic interpolating the four interaction
//! velocities.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four interaction velocities of a right-mover (and, mirrored, of a
/// left-mover), in m/s:
///
/// * `c0` - no opposite walker in the current or target cell
/// * `c1` - opposite walker in the current cell only
/// * `c2` - opposite walker in the target cell only
/// * `c3` - opposite walkers in both cells
///
/// Validated once at construction: `0 < c3 <= min(c1, c2)` and
/// `max(c1, c2) <= c0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVelocities", into = "RawVelocities")]
pub struct VelocityParams {
    c: [f64; 4],
    ga: f64,
    gb: f64,
}

#[derive(Serialize, Deserialize)]
struct RawVelocities {
    c0: f64,
    c1: f64,
    c2: f64,
    c3: f64,
}

impl TryFrom<RawVelocities> for VelocityParams {
    type Error = Error;

    fn try_from(raw: RawVelocities) -> Result<Self> {
        VelocityParams::new(raw.c0, raw.c1, raw.c2, raw.c3)
    }
}

impl From<VelocityParams> for RawVelocities {
    fn from(v: VelocityParams) -> Self {
        RawVelocities {
            c0: v.c0(),
            c1: v.c1(),
            c2: v.c2(),
            c3: v.c3(),
        }
    }
}

impl VelocityParams {
    pub fn new(c0: f64, c1: f64, c2: f64, c3: f64) -> Result<Self> {
        let all_finite = [c0, c1, c2, c3].iter().all(|c| c.is_finite());
        if !all_finite || !(c3 > 0.0 && c3 <= c1.min(c2) && c1.max(c2) <= c0) {
            return Err(Error::invalid(format!(
                "velocities must satisfy 0 < c3 <= min(c1, c2) <= max(c1, c2) <= c0, got \
                 c0={c0}, c1={c1}, c2={c2}, c3={c3}"
            )));
        }
        Ok(VelocityParams {
            c: [c0, c1, c2, c3],
            ga: c3 - c2 - c1 + c0,
            gb: c1 + c2 - 2.0 * c0,
        })
    }

    /// The one-parameter family used throughout the experiments:
    /// `c1 = c2 = c0/a`, `c3 = c0/(2a)`.
    pub fn slowdown(c0: f64, a: f64) -> Result<Self> {
        if !(a >= 1.0) {
            return Err(Error::invalid(format!("slowdown factor a must be >= 1, got {a}")));
        }
        VelocityParams::new(c0, c0 / a, c0 / a, c0 / (2.0 * a))
    }

    pub fn c0(&self) -> f64 {
        self.c[0]
    }
    pub fn c1(&self) -> f64 {
        self.c[1]
    }
    pub fn c2(&self) -> f64 {
        self.c[2]
    }
    pub fn c3(&self) -> f64 {
        self.c[3]
    }

    /// `[c0, c1, c2, c3]`, indexed by `occupied_here + 2 * occupied_ahead`.
    pub fn as_array(&self) -> [f64; 4] {
        self.c
    }

    /// Quadratic coefficient of `g`.
    pub fn g_a(&self) -> f64 {
        self.ga
    }
    /// Linear coefficient of `g`.
    pub fn g_b(&self) -> f64 {
        self.gb
    }
    /// Constant coefficient of `g` (equal to `c0`).
    pub fn g_c(&self) -> f64 {
        self.c[0]
    }

    pub fn alpha1(&self) -> f64 {
        self.c[1] / self.c[0]
    }
    pub fn alpha3(&self) -> f64 {
        self.c[3] / self.c[0]
    }

    /// Multiply every velocity by `lambda > 0`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        VelocityParams::new(
            lambda * self.c[0],
            lambda * self.c[1],
            lambda * self.c[2],
            lambda * self.c[3],
        )
    }
}

/// A state `(rho+, rho-)`. Not range-checked: reconstructed interface
/// values may leave the unit box in the nonhyperbolic regime.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DensityPair {
    pub plus: f64,
    pub minus: f64,
}

impl DensityPair {
    pub const fn new(plus: f64, minus: f64) -> Self {
        DensityPair { plus, minus }
    }

    /// Construct a state inside the admissible box `[0,1]^2`.
    pub fn admissible(plus: f64, minus: f64) -> Result<Self> {
        let ok = |u: f64| (0.0..=1.0).contains(&u);
        if ok(plus) && ok(minus) {
            Ok(DensityPair { plus, minus })
        } else {
            Err(Error::invalid(format!("densities ({plus}, {minus}) outside [0,1]")))
        }
    }

    pub fn is_admissible(&self) -> bool {
        (0.0..=1.0).contains(&self.plus) && (0.0..=1.0).contains(&self.minus)
    }

    pub fn swapped(&self) -> Self {
        DensityPair::new(self.minus, self.plus)
    }
}

/// Row-major 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobian2x2(pub [[f64; 2]; 2]);

impl Jacobian2x2 {
    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    /// `trace^2 - 4 det`.
    pub fn eigen_discriminant(&self) -> f64 {
        let t = self.trace();
        t * t - 4.0 * self.det()
    }

    /// Real eigenvalues `(smaller, larger)`, or `None` when they are complex.
    pub fn real_eigenvalues(&self) -> Option<(f64, f64)> {
        let disc = self.eigen_discriminant();
        if disc < 0.0 {
            return None;
        }
        let t = self.trace();
        let s = disc.sqrt();
        Some(((t - s) / 2.0, (t + s) / 2.0))
    }

    pub fn entries(&self) -> [[f64; 2]; 2] {
        self.0
    }
}

#[inline]
pub fn flux_f(u: f64) -> f64 {
    u * (1.0 - u)
}

#[inline]
pub fn flux_f_prime(u: f64) -> f64 {
    1.0 - 2.0 * u
}

/// `g(u) = gA u^2 + gB u + gC`, evaluated in the Bernstein basis
/// `c0 (1-u)^2 + (c1+c2) u (1-u) + c3 u^2` so that `g(0) = c0` and
/// `g(1) = c3` hold exactly in floating point.
#[inline]
pub fn flux_g(u: f64, v: &VelocityParams) -> f64 {
    let w = 1.0 - u;
    v.c[0] * w * w + (v.c[1] + v.c[2]) * u * w + v.c[3] * u * u
}

#[inline]
pub fn flux_g_prime(u: f64, v: &VelocityParams) -> f64 {
    2.0 * v.ga * u + v.gb
}

/// Flux of the right-movers, `f(rho+) g(rho-)`.
#[inline]
pub fn flux_plus(d: DensityPair, v: &VelocityParams) -> f64 {
    flux_f(d.plus) * flux_g(d.minus, v)
}

/// Magnitude of the flux of the left-movers, `f(rho-) g(rho+)`.
#[inline]
pub fn flux_minus(d: DensityPair, v: &VelocityParams) -> f64 {
    flux_f(d.minus) * flux_g(d.plus, v)
}

/// Jacobian of `(f(rho+) g(rho-), -f(rho-) g(rho+))`.
pub fn jacobian(d: DensityPair, v: &VelocityParams) -> Jacobian2x2 {
    let (p, m) = (d.plus, d.minus);
    Jacobian2x2([
        [
            flux_f_prime(p) * flux_g(m, v),
            flux_f(p) * flux_g_prime(m, v),
        ],
        [
            -flux_f(m) * flux_g_prime(p, v),
            -flux_f_prime(m) * flux_g(p, v),
        ],
    ])
}

/// `R = f'(rho+) g(rho-) - f'(rho-) g(rho+)`, the Jacobian trace.
#[inline]
pub fn trace_term(d: DensityPair, v: &VelocityParams) -> f64 {
    flux_f_prime(d.plus) * flux_g(d.minus, v) - flux_f_prime(d.minus) * flux_g(d.plus, v)
}

/// Hyperbolicity discriminant
/// `D = [f'(rho-) g(rho+) + f'(rho+) g(rho-)]^2 - 4 f(rho-) f(rho+) g'(rho-) g'(rho+)`.
///
/// `D > 0` means the Jacobian has two distinct real eigenvalues.
#[inline]
pub fn hyperbolicity_discriminant(d: DensityPair, v: &VelocityParams) -> f64 {
    let (p, m) = (d.plus, d.minus);
    let s = flux_f_prime(m) * flux_g(p, v) + flux_f_prime(p) * flux_g(m, v);
    s * s - 4.0 * flux_f(m) * flux_f(p) * flux_g_prime(m, v) * flux_g_prime(p, v)
}

/// Nonlinear viscosity of one species, driven by the density of the
/// opposite species:
/// `(eps c0 / 2) [(1-r)^2 + 2 alpha1 r (1-r) + alpha3 r^2]`.
#[inline]
pub fn diffusion_coefficient(rho_opposite: f64, v: &VelocityParams, eps: f64) -> f64 {
    let r = rho_opposite;
    let w = 1.0 - r;
    0.5 * eps * v.c0() * (w * w + 2.0 * v.alpha1() * r * w + v.alpha3() * r * r)
}

/// Nonhyperbolic (`D <= 0`) flags sampled at the cell centres of a
/// `resolution x resolution` partition of the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicityMap {
    resolution: usize,
    /// Row-major: row `i` is `rho-`, column `j` is `rho+`.
    flags: Vec<bool>,
}

impl HyperbolicityMap {
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Sample coordinate of row/column `i`.
    pub fn coordinate(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.resolution as f64
    }

    pub fn is_nonhyperbolic(&self, i_minus: usize, j_plus: usize) -> bool {
        self.flags[i_minus * self.resolution + j_plus]
    }

    /// Flag of the sample cell containing the state `(rho+, rho-)`.
    pub fn at_state(&self, rho_plus: f64, rho_minus: f64) -> bool {
        let idx = |u: f64| ((u * self.resolution as f64) as usize).min(self.resolution - 1);
        self.is_nonhyperbolic(idx(rho_minus), idx(rho_plus))
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn count_nonhyperbolic(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    /// CSV with header `rho_minus,rho_plus,nonhyperbolic`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "rho_minus,rho_plus,nonhyperbolic")?;
        for i in 0..self.resolution {
            let rm = self.coordinate(i);
            for j in 0..self.resolution {
                let flag = u8::from(self.is_nonhyperbolic(i, j));
                writeln!(w, "{rm:?},{:?},{flag}", self.coordinate(j))?;
            }
        }
        Ok(())
    }
}

/// Sample the sign of the discriminant over `[0,1]^2`. States with
/// `D = 0` count as nonhyperbolic.
pub fn classify_hyperbolicity_map(v: &VelocityParams, resolution: usize) -> Result<HyperbolicityMap> {
    if resolution < 2 {
        return Err(Error::invalid(format!("map resolution must be >= 2, got {resolution}")));
    }
    let coord = |i: usize| (i as f64 + 0.5) / resolution as f64;
    let flags = (0..resolution * resolution)
        .map(|idx| {
            let d = DensityPair::new(coord(idx % resolution), coord(idx / resolution));
            hyperbolicity_discriminant(d, v) <= 0.0
        })
        .collect();
    Ok(HyperbolicityMap { resolution, flags })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn v_half() -> VelocityParams {
        VelocityParams::new(1.0, 0.5, 0.5, 0.25).unwrap()
    }

    /// Expanded-polynomial discriminant, written out term by term from the
    /// raw velocities.
    fn brute_discriminant(p: f64, m: f64, c: [f64; 4]) -> f64 {
        let g = |u: f64| (c[3] - c[2] - c[1] + c[0]) * u * u + (c[2] + c[1] - 2.0 * c[0]) * u + c[0];
        let gp = |u: f64| 2.0 * (c[3] - c[2] - c[1] + c[0]) * u + (c[2] + c[1] - 2.0 * c[0]);
        let f = |u: f64| u - u * u;
        let fp = |u: f64| 1.0 - 2.0 * u;
        (fp(m) * g(p) + fp(p) * g(m)).powi(2) - 4.0 * f(m) * f(p) * gp(m) * gp(p)
    }

    #[test]
    fn rejects_misordered_velocities() {
        assert!(VelocityParams::new(1.0, 1.2, 0.5, 0.25).is_err());
        assert!(VelocityParams::new(1.0, 0.5, 0.5, 0.0).is_err());
        assert!(VelocityParams::new(1.0, 0.5, 0.4, 0.45).is_err());
        assert!(VelocityParams::new(f64::NAN, 0.5, 0.5, 0.25).is_err());
        // degenerate but admissible
        assert!(VelocityParams::new(1.0, 1.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn derived_coefficients() {
        let v = v_half();
        assert_eq!(v.g_a(), 0.25);
        assert_eq!(v.g_b(), -1.0);
        assert_eq!(v.g_c(), 1.0);
        assert_eq!(v.alpha1(), 0.5);
        assert_eq!(v.alpha3(), 0.25);
    }

    #[test]
    fn json_round_trip_validates() {
        let v: VelocityParams = serde_json::from_str(r#"{"c0":0.8,"c1":0.4,"c2":0.4,"c3":0.2}"#).unwrap();
        assert_eq!(v.c1(), 0.4);
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"{"c0":0.8,"c1":0.4,"c2":0.4,"c3":0.2}"#);
        assert!(serde_json::from_str::<VelocityParams>(r#"{"c0":0.1,"c1":0.4,"c2":0.4,"c3":0.2}"#).is_err());
    }

    #[test]
    fn f_values() {
        assert_eq!(flux_f(0.0), 0.0);
        assert_eq!(flux_f(1.0), 0.0);
        assert_eq!(flux_f(0.5), 0.25);
    }

    #[test]
    fn g_values() {
        let v = v_half();
        assert_eq!(flux_g(0.0, &v), 1.0);
        assert_eq!(flux_g(1.0, &v), 0.25);
        // 0.25 u^2 - u + 1 at u = 0.5
        assert_relative_eq!(flux_g(0.5, &v), 0.5625, epsilon = 1e-15);
    }

    #[test]
    fn jacobian_examples() {
        let v = v_half();
        assert_eq!(jacobian(DensityPair::new(0.0, 0.0), &v).0, [[1.0, 0.0], [0.0, -1.0]]);
        let j1 = jacobian(DensityPair::new(1.0, 1.0), &v).0;
        assert_eq!(j1[0][0], -0.25);
        assert_eq!(j1[1][1], 0.25);
        assert_eq!(j1[0][1].abs(), 0.0);
        assert_eq!(j1[1][0].abs(), 0.0);
        let j = jacobian(DensityPair::new(0.6, 0.6), &v).0;
        let want = [[-0.098, -0.168], [0.168, 0.098]];
        for r in 0..2 {
            for c in 0..2 {
                assert_relative_eq!(j[r][c], want[r][c], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn discriminant_examples() {
        let v = v_half();
        assert_relative_eq!(hyperbolicity_discriminant(DensityPair::new(0.0, 0.0), &v), 4.0);
        let d06 = hyperbolicity_discriminant(DensityPair::new(0.6, 0.6), &v);
        assert_relative_eq!(d06, -0.07448, epsilon = 1e-14);
        let d01 = hyperbolicity_discriminant(DensityPair::new(0.1, 0.1), &v);
        // (2 * 0.8 * 0.9025)^2 - 4 * 0.09^2 * 0.95^2
        assert_relative_eq!(d01, 2.055_895, epsilon = 1e-12);
        assert_relative_eq!(d01, brute_discriminant(0.1, 0.1, [1.0, 0.5, 0.5, 0.25]), epsilon = 1e-14);
    }

    #[test]
    fn diffusion_examples() {
        let v = v_half();
        assert_eq!(diffusion_coefficient(0.0, &v, 2.0), 1.0);
        assert_eq!(diffusion_coefficient(1.0, &v, 2.0), 0.25);
        assert_relative_eq!(diffusion_coefficient(0.5, &v, 1.0), 0.28125, epsilon = 1e-15);
    }

    #[test]
    fn hyperbolicity_map_examples() {
        let v = v_half();
        assert!(classify_hyperbolicity_map(&v, 1).is_err());
        let map = classify_hyperbolicity_map(&v, 100).unwrap();
        assert!(map.at_state(0.6, 0.6));
        assert!(!map.at_state(0.1, 0.1));
        for (p, m) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
            assert!(hyperbolicity_discriminant(DensityPair::new(p, m), &v) > 0.0);
        }
        let scaled = classify_hyperbolicity_map(&VelocityParams::new(2.0, 1.0, 1.0, 0.5).unwrap(), 100).unwrap();
        assert_eq!(map, scaled);
        // swap symmetry of the sampled region
        for i in 0..100 {
            for j in 0..100 {
                assert_eq!(map.is_nonhyperbolic(i, j), map.is_nonhyperbolic(j, i));
            }
        }
    }

    #[test]
    fn map_csv_layout() {
        let map = classify_hyperbolicity_map(&v_half(), 2).unwrap();
        let mut buf = Vec::new();
        map.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "rho_minus,rho_plus,nonhyperbolic");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[1], "0.25,0.25,0");
        assert_eq!(lines[2], "0.25,0.75,1");
    }

    fn velocities() -> impl Strategy<Value = VelocityParams> {
        (0.1f64..5.0, 0.05f64..=1.0, 0.05f64..=1.0, 0.01f64..=1.0).prop_map(|(c0, r1, r2, r3)| {
            let (c1, c2) = (c0 * r1, c0 * r2);
            let c3 = c1.min(c2) * r3;
            VelocityParams::new(c0, c1, c2, c3).unwrap()
        })
    }

    proptest! {
        #[test]
        fn g_hits_endpoints_exactly(v in velocities()) {
            prop_assert_eq!(flux_g(0.0, &v), v.c0());
            prop_assert_eq!(flux_g(1.0, &v), v.c3());
        }

        #[test]
        fn g_matches_monomial_form(v in velocities(), u in 0.0f64..=1.0) {
            let mono = (v.g_a() * u + v.g_b()) * u + v.g_c();
            prop_assert!((flux_g(u, &v) - mono).abs() <= 1e-13 * v.c0());
        }

        #[test]
        fn trace_vanishes_on_diagonal(v in velocities(), u in 0.0f64..=1.0) {
            let j = jacobian(DensityPair::new(u, u), &v);
            prop_assert_eq!(j.trace(), 0.0);
        }

        #[test]
        fn discriminant_swap_symmetric(v in velocities(), p in 0.0f64..=1.0, m in 0.0f64..=1.0) {
            let a = hyperbolicity_discriminant(DensityPair::new(p, m), &v);
            let b = hyperbolicity_discriminant(DensityPair::new(m, p), &v);
            prop_assert!((a - b).abs() <= 1e-14 * (1.0 + a.abs()) * v.c0() * v.c0());
        }

        #[test]
        fn scale_covariance(v in velocities(), p in 0.0f64..=1.0, m in 0.0f64..=1.0, lambda in 0.1f64..10.0) {
            let d = DensityPair::new(p, m);
            let w = v.scaled(lambda).unwrap();
            let (j, jw) = (jacobian(d, &v).0, jacobian(d, &w).0);
            for r in 0..2 {
                for c in 0..2 {
                    prop_assert!((jw[r][c] - lambda * j[r][c]).abs() <= 1e-12 * lambda * v.c0());
                }
            }
            let (dv, dw) = (hyperbolicity_discriminant(d, &v), hyperbolicity_discriminant(d, &w));
            prop_assert!((dw - lambda * lambda * dv).abs() <= 1e-11 * lambda * lambda * v.c0() * v.c0());
        }

        #[test]
        fn eigenvalues_consistent_with_discriminant(v in velocities(), p in 0.0f64..=1.0, m in 0.0f64..=1.0) {
            let d = DensityPair::new(p, m);
            let disc = hyperbolicity_discriminant(d, &v);
            let j = jacobian(d, &v);
            let scale = (j.trace().powi(2) + 4.0 * j.det().abs()).max(f64::MIN_POSITIVE);
            prop_assert!((j.eigen_discriminant() - disc).abs() <= 1e-12 * scale);
            if disc > 1e-12 * scale {
                prop_assert!(j.real_eigenvalues().is_some());
            }
        }

        #[test]
        fn discriminant_matches_expanded_form(v in velocities(), p in 0.0f64..=1.0, m in 0.0f64..=1.0) {
            let brute = brute_discriminant(p, m, v.as_array());
            let d = hyperbolicity_discriminant(DensityPair::new(p, m), &v);
            prop_assert!((brute - d).abs() <= 1e-12 * v.c0() * v.c0());
        }
    }
}
