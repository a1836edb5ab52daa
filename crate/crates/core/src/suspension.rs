//! Suspension flows over a subshift and their reduction to base-system
//! potentials.
//!
//! A strictly positive roof `tau` (a locally constant potential) assigns
//! each base point a return time; the flow moves upward at unit speed in
//! the fiber `0 <= t < tau(x)` and jumps to the shifted base point at the
//! roof. An along-flow observable is described by a profile `G(x, t)`;
//! integrating it over one return collapses it to a base potential
//!
//! ```text
//!   psi(x) = ∫_0^{tau(x)} G(x, t) dt ,
//! ```
//!
//! and time averages of the flow reduce to ratios of Birkhoff sums:
//! an orbit segment of flow length `T = S_n tau` carries the integral
//! `S_n psi`, so flow averages near `p` correspond to base sums with
//! `S_n (psi - p tau) ≈ 0`. Everything downstream (pressure, tilts, rate
//! functions, window asymptotics) therefore operates on the pair
//! `(psi, tau)` of ordinary potentials produced here.
//!
//! Profiles are chosen so that the fiber integral has a closed form; a
//! numeric route (`verify_return_identity`) re-integrates the profile with
//! adaptive quadrature and reports the worst mismatch, keeping the closed
//! forms honest. The smooth reshaping uses the cubic ramp
//! `lambda(s) = 3 s^2 - 2 s^3`, whose derivative `6 s (1 - s)` vanishes at
//! both fiber endpoints and integrates to 1.

use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::quad::{adaptive_simpson, gauss_legendre};
use crate::scalar::Scalar;
use crate::sft::{MarkovModel, Symbol};
use num_complex::Complex64;

/// Along-flow observable shapes with closed-form fiber integrals.
#[derive(Clone, Debug)]
pub enum Profile {
    /// `G = level` throughout the fiber; integral `level * tau`.
    Constant { level: Scalar },
    /// `G = level + (mass/tau - level) * lambda'(t/tau)`: equals `level` at
    /// both fiber endpoints, integrates to exactly `mass`.
    Bump { level: Scalar, mass: Potential },
    /// `G = lambda'(t/tau) / tau`: a smooth unit impulse per return,
    /// vanishing at the endpoints; integral exactly 1 (return counter).
    ReturnUnit,
    /// Values of `G` at the Gauss-Legendre nodes of normalized fiber time
    /// `s = t/tau in [0, 1]`; `G` is the interpolating polynomial and the
    /// fiber integral is `tau` times its exact Gauss-Legendre sum.
    Sampled { values: Vec<f64> },
}

/// derivative of the cubic ramp `lambda(s) = 3 s^2 - 2 s^3`
fn ramp_slope(s: f64) -> f64 {
    6.0 * s * (1.0 - s)
}

/// A suspension: positive roof plus profile.
#[derive(Clone, Debug)]
pub struct Suspension {
    roof: Potential,
    profile: Profile,
}

impl Suspension {
    pub fn new(roof: Potential, profile: Profile) -> Result<Self> {
        // strict positivity, certified by the value enclosures
        for (w, v) in roof.values() {
            if !(v.enc.lo > 0.0) {
                return Err(Error::BadPotential(format!(
                    "roof must be strictly positive; value for window {w:?} has \
                     enclosure [{}, {}]",
                    v.enc.lo, v.enc.hi
                )));
            }
        }
        match &profile {
            Profile::Sampled { values } => {
                if values.is_empty() || values.len() > 64 {
                    return Err(Error::Domain(
                        "sampled profile needs between 1 and 64 node values".into(),
                    ));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Domain("sampled profile value not finite".into()));
                }
            }
            Profile::Constant { level } => {
                if !level.val.is_finite() {
                    return Err(Error::Domain("profile level not finite".into()));
                }
            }
            Profile::Bump { level, .. } => {
                if !level.val.is_finite() {
                    return Err(Error::Domain("profile level not finite".into()));
                }
            }
            Profile::ReturnUnit => {}
        }
        Ok(Suspension { roof, profile })
    }

    pub fn roof(&self) -> &Potential {
        &self.roof
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    /// Memory needed to evaluate the profile (roof and, for bumps, mass).
    pub fn memory(&self) -> usize {
        match &self.profile {
            Profile::Bump { mass, .. } => self.roof.memory().max(mass.memory()),
            _ => self.roof.memory(),
        }
    }

    /// The base potential `psi(x) = ∫_0^tau G dt`, in closed form.
    pub fn observable(&self, model: &MarkovModel) -> Result<Potential> {
        match &self.profile {
            Profile::Constant { level } => self.roof.scale(level),
            Profile::Bump { mass, .. } => Ok(mass.clone()),
            Profile::ReturnUnit => Ok(Potential::constant(model, Scalar::from_integer(1))),
            Profile::Sampled { values } => {
                // Gauss-Legendre with n nodes integrates the degree n-1
                // interpolant exactly; map [-1, 1] -> [0, 1].
                let (_, weights) = gauss_legendre(values.len());
                let integral01: f64 = weights
                    .iter()
                    .zip(values)
                    .map(|(w, v)| 0.5 * w * v)
                    .sum();
                self.roof.scale(&Scalar::from_f64(integral01)?)
            }
        }
    }

    /// `psi - p tau`: the base potential whose near-zero Birkhoff sums mark
    /// flow averages near `p` (with `p` read as the exact double).
    pub fn deviation_observable(&self, model: &MarkovModel, p: f64) -> Result<Potential> {
        let psi = self.observable(model)?;
        let scaled_roof = self.roof.scale(&Scalar::from_f64(-p)?)?;
        psi.add(model, &scaled_roof)
    }

    /// `G(x, t)` for physical fiber time `0 <= t <= tau(x)` on the cylinder
    /// of `word`.
    pub fn profile_value(&self, word: &[Symbol], t: f64) -> Result<f64> {
        let tau = self.roof.eval(word)?.val;
        if !(t >= 0.0 && t <= tau * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!(
                "fiber time {t} outside [0, {tau}]"
            )));
        }
        let s = (t / tau).clamp(0.0, 1.0);
        Ok(match &self.profile {
            Profile::Constant { level } => level.val,
            Profile::Bump { level, mass } => {
                let m = mass.eval(word)?.val;
                level.val + (m / tau - level.val) * ramp_slope(s)
            }
            Profile::ReturnUnit => ramp_slope(s) / tau,
            Profile::Sampled { values } => interpolate_gl(values, s),
        })
    }

    /// Re-integrate the profile numerically over every admissible window
    /// and report the worst absolute mismatch against the closed-form
    /// observable. A dual route: any algebra slip in the closed forms shows
    /// up here.
    pub fn verify_return_identity(&self, model: &MarkovModel) -> Result<f64> {
        let psi = self.observable(model)?;
        let memory = self.memory().max(psi.memory());
        let words = model.enumerate_words(memory, 1 << 20)?;
        let mut worst = 0.0f64;
        for w in &words {
            let tau = self.roof.eval(w)?.val;
            let numeric = adaptive_simpson(
                &|t| Complex64::new(self.profile_value(w, t).unwrap_or(f64::NAN), 0.0),
                0.0,
                tau,
                1e-13,
                40,
            )?;
            if !numeric.value.re.is_finite() {
                return Err(Error::Convergence(
                    "profile evaluation failed during verification".into(),
                ));
            }
            let residual = (numeric.value.re - psi.eval(w)?.val).abs();
            worst = worst.max(residual);
        }
        Ok(worst)
    }
}

/// Barycentric Lagrange interpolation at the Gauss-Legendre nodes mapped to
/// `[0, 1]`.
fn interpolate_gl(values: &[f64], s: f64) -> f64 {
    let (nodes, _) = gauss_legendre(values.len());
    let xs: Vec<f64> = nodes.iter().map(|x| 0.5 * (x + 1.0)).collect();
    // barycentric weights
    let mut bw = vec![1.0f64; xs.len()];
    for i in 0..xs.len() {
        for j in 0..xs.len() {
            if i != j {
                bw[i] /= xs[i] - xs[j];
            }
        }
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..xs.len() {
        let d = s - xs[i];
        if d.abs() < 1e-14 {
            return values[i];
        }
        let t = bw[i] / d;
        num += t * values[i];
        den += t;
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sft::MarkovModel;
    use std::collections::BTreeMap;

    fn golden() -> MarkovModel {
        MarkovModel::new(vec![vec![1, 1], vec![1, 0]]).unwrap()
    }

    fn roof_3_2(model: &MarkovModel) -> Potential {
        let mut table = BTreeMap::new();
        table.insert(vec![0u8], Scalar::from_integer(1));
        table.insert(vec![1u8], Scalar::from_rational(3, 2).unwrap());
        Potential::from_table(model, 1, table).unwrap()
    }

    #[test]
    fn constant_profile_integrates_to_level_times_roof() {
        let model = golden();
        let susp = Suspension::new(
            roof_3_2(&model),
            Profile::Constant {
                level: Scalar::from_integer(2),
            },
        )
        .unwrap();
        let psi = susp.observable(&model).unwrap();
        assert_eq!(psi.eval(&[0]).unwrap().canonical(), "2");
        assert_eq!(psi.eval(&[1]).unwrap().canonical(), "3");
        let worst = susp.verify_return_identity(&model).unwrap();
        assert!(worst < 1e-12, "return identity residual {worst}");
    }

    #[test]
    fn bump_profile_returns_mass_exactly_and_is_level_at_endpoints() {
        let model = golden();
        let mut mass_table = BTreeMap::new();
        mass_table.insert(vec![0u8], Scalar::parse("sqrt2").unwrap());
        mass_table.insert(vec![1u8], Scalar::from_integer(1));
        let mass = Potential::from_table(&model, 1, mass_table).unwrap();
        let susp = Suspension::new(
            roof_3_2(&model),
            Profile::Bump {
                level: Scalar::from_rational(1, 2).unwrap(),
                mass: mass.clone(),
            },
        )
        .unwrap();
        let psi = susp.observable(&model).unwrap();
        assert_eq!(psi.eval(&[0]).unwrap().canonical(), "sqrt2");
        // endpoint continuity across returns: G = level at t = 0 and t = tau
        for w in [[0u8], [1u8]] {
            let tau = susp.roof().eval(&w).unwrap().val;
            assert!((susp.profile_value(&w, 0.0).unwrap() - 0.5).abs() < 1e-15);
            assert!((susp.profile_value(&w, tau).unwrap() - 0.5).abs() < 1e-15);
        }
        let worst = susp.verify_return_identity(&model).unwrap();
        assert!(worst < 1e-10, "return identity residual {worst}");
    }

    #[test]
    fn return_unit_counts_one_per_cycle() {
        let model = golden();
        let susp = Suspension::new(roof_3_2(&model), Profile::ReturnUnit).unwrap();
        let psi = susp.observable(&model).unwrap();
        assert_eq!(psi.eval(&[0]).unwrap().canonical(), "1");
        assert_eq!(psi.eval(&[1]).unwrap().canonical(), "1");
        // impulse vanishes at the gluing times
        assert_eq!(susp.profile_value(&[0], 0.0).unwrap(), 0.0);
        assert_eq!(susp.profile_value(&[0], 1.0).unwrap(), 0.0);
        let worst = susp.verify_return_identity(&model).unwrap();
        assert!(worst < 1e-12, "return identity residual {worst}");
    }

    /// Sample the polynomial 1 + s - s^2 at 4 Gauss-Legendre nodes: the
    /// interpolant reproduces it, so psi = tau * (1 + 1/2 - 1/3) = tau * 7/6.
    #[test]
    fn sampled_profile_integrates_its_interpolant_exactly() {
        let model = golden();
        let (nodes, _) = gauss_legendre(4);
        let values: Vec<f64> = nodes
            .iter()
            .map(|x| {
                let s = 0.5 * (x + 1.0);
                1.0 + s - s * s
            })
            .collect();
        let susp = Suspension::new(roof_3_2(&model), Profile::Sampled { values }).unwrap();
        let psi = susp.observable(&model).unwrap();
        assert!(
            (psi.eval(&[0]).unwrap().val - 7.0 / 6.0).abs() < 1e-14,
            "psi(0) = {}",
            psi.eval(&[0]).unwrap().val
        );
        assert!((psi.eval(&[1]).unwrap().val - 1.5 * 7.0 / 6.0).abs() < 1e-14);
        // pointwise: the interpolant is the polynomial itself
        assert!((susp.profile_value(&[0], 0.3).unwrap() - (1.0 + 0.3 - 0.09)).abs() < 1e-12);
        let worst = susp.verify_return_identity(&model).unwrap();
        assert!(worst < 1e-11, "return identity residual {worst}");
    }

    #[test]
    fn nonpositive_roofs_are_rejected() {
        let model = golden();
        let mut table = BTreeMap::new();
        table.insert(vec![0u8], Scalar::from_integer(1));
        table.insert(vec![1u8], Scalar::zero());
        let flat = Potential::from_table(&model, 1, table).unwrap();
        let err = Suspension::new(flat, Profile::ReturnUnit);
        assert!(err.is_err(), "zero roof must be rejected");
    }

    #[test]
    fn deviation_observable_is_psi_minus_p_roof() {
        let model = golden();
        let susp = Suspension::new(
            roof_3_2(&model),
            Profile::Constant {
                level: Scalar::from_integer(2),
            },
        )
        .unwrap();
        let p = 0.3f64;
        let dev = susp.deviation_observable(&model, p).unwrap();
        for w in [[0u8], [1u8]] {
            let tau = susp.roof().eval(&w).unwrap().val;
            let psi = susp.observable(&model).unwrap();
            let expect = psi.eval(&w).unwrap().val - p * tau;
            assert!(
                (dev.eval(&w).unwrap().val - expect).abs() < 1e-15,
                "window {w:?}"
            );
        }
    }
}
