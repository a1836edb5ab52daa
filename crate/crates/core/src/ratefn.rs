//! The large-deviation rate function by Legendre duality.
//!
//! On a normalized system (`Pr(phi~) = 0`, equilibrium mean of `psi~` = 0)
//! the rate of the running averages of `psi~` is
//!
//! ```text
//!   J(p) = xi_p p - Pr(phi~ + xi_p psi~),   where   d/dxi Pr(...)|_{xi_p} = p .
//! ```
//!
//! `Pr` is smooth and strictly convex in `xi` (variance > 0 away from
//! coboundaries), so `xi_p` is found by a safeguarded Newton iteration on
//! the tilted mean; the achievable open interval of `p` is exactly the range
//! of periodic-orbit means, delivered by the min/max-mean-cycle routine.
//!
//! A second, independent evaluation of `J(p)` as a straight supremum of
//! `xi p - Pr(xi)` on a grid around `xi_p` is carried in the result next to
//! the duality value; the two agree to the grid's quadratic resolution and
//! are never merged.

use crate::error::{Error, Result};
use crate::sft::{cycle_mean_extremes, CycleMeanExtremes};
use crate::thermo::{tilted_pressure, tilt_moments, NormalizedSystem};
use rayon::prelude::*;

/// Achievable interval of asymptotic averages of the normalized `psi~`:
/// the closed hull of periodic-orbit means. Interior points have finite
/// rate; the endpoints are reached only in the `xi -> ±inf` limit.
pub fn mean_range(sys: &NormalizedSystem) -> Result<CycleMeanExtremes> {
    let edges: Vec<(usize, usize)> = sys.rec.edges.iter().map(|e| (e.from, e.to)).collect();
    cycle_mean_extremes(sys.rec.state_count(), &edges, &sys.psi.values)
}

/// Solution of `d/dxi Pr(phi~ + xi psi~) = p`.
#[derive(Clone, Debug)]
pub struct TiltSolve {
    pub xi: f64,
    /// Tilted mean at `xi` (equals `p` up to the stopping tolerance).
    pub mean: f64,
    /// Tilted variance at `xi`.
    pub variance: f64,
    pub iterations: usize,
}

/// Safeguarded Newton for the tilt parameter: Newton steps on the tilted
/// mean, falling back to bisection whenever a step leaves the bracket.
pub fn solve_xi(sys: &NormalizedSystem, p: f64) -> Result<TiltSolve> {
    let range = mean_range(sys)?;
    if !(p > range.min && p < range.max) {
        return Err(Error::Domain(format!(
            "target mean {p} outside the achievable open interval ({}, {})",
            range.min, range.max
        )));
    }
    let psi_scale = sys
        .psi
        .values
        .iter()
        .map(|v| v.val.abs())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let xi_cap = 600.0 / psi_scale;
    let moments = |xi: f64| tilt_moments(&sys.rec, &sys.phi, &sys.psi, xi);

    // Bracket the root: the tilted mean is increasing in xi.
    let (mut lo, mut hi) = (-1.0 / psi_scale, 1.0 / psi_scale);
    let mut f_lo = moments(lo)?.0;
    let mut f_hi = moments(hi)?.0;
    let mut expansions = 0;
    while f_lo >= p {
        lo *= 2.0;
        if lo < -xi_cap {
            return Err(Error::Domain(format!(
                "target mean {p} too close to the lower endpoint {}; tilt exceeds overflow cap",
                range.min
            )));
        }
        f_lo = moments(lo)?.0;
        expansions += 1;
    }
    while f_hi <= p {
        hi *= 2.0;
        if hi > xi_cap {
            return Err(Error::Domain(format!(
                "target mean {p} too close to the upper endpoint {}; tilt exceeds overflow cap",
                range.max
            )));
        }
        f_hi = moments(hi)?.0;
        expansions += 1;
    }

    let tol = 1e-14 * (range.max - range.min);
    let mut xi = 0.5 * (lo + hi);
    let (mut mean, mut var) = moments(xi)?;
    for it in 1..=100 {
        if (mean - p).abs() <= tol {
            return Ok(TiltSolve {
                xi,
                mean,
                variance: var,
                iterations: it + expansions,
            });
        }
        if mean < p {
            lo = xi;
        } else {
            hi = xi;
        }
        let newton = xi + (p - mean) / var;
        xi = if var > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let m = moments(xi)?;
        mean = m.0;
        var = m.1;
    }
    // The mean is monotone and smooth; 100 safeguarded steps resolve any
    // interior target to tolerance.
    Err(Error::Convergence(format!(
        "tilt solve stalled at xi = {xi}, mean {mean} vs target {p}"
    )))
}

/// Rate function value with its duality data and an independent grid check.
#[derive(Clone, Debug)]
pub struct RateData {
    pub p: f64,
    pub xi: f64,
    /// `xi p - Pr(phi~ + xi psi~)` at the solved tilt.
    pub value: f64,
    pub tilted_pressure: f64,
    /// Tilted variance; `1 / variance` is the curvature `J''(p)`.
    pub variance: f64,
    /// Independent route: `max_k (xi_k p - Pr(xi_k))` over a local grid
    /// around `xi`. Always `<= value` up to rounding, and quadratically
    /// close for a fine grid.
    pub grid_sup: f64,
}

const GRID_POINTS: usize = 81;
const GRID_HALF_WIDTH: f64 = 0.5;

pub fn rate(sys: &NormalizedSystem, p: f64) -> Result<RateData> {
    let solve = solve_xi(sys, p)?;
    let pr_tilt = tilted_pressure(&sys.rec, &sys.phi, &sys.psi, solve.xi)?;
    let value = solve.xi * p - pr_tilt;

    let mut grid_sup = f64::NEG_INFINITY;
    for i in 0..GRID_POINTS {
        let xi = solve.xi - GRID_HALF_WIDTH
            + 2.0 * GRID_HALF_WIDTH * i as f64 / (GRID_POINTS - 1) as f64;
        let pr = tilted_pressure(&sys.rec, &sys.phi, &sys.psi, xi)?;
        grid_sup = grid_sup.max(xi * p - pr);
    }
    Ok(RateData {
        p,
        xi: solve.xi,
        value,
        tilted_pressure: pr_tilt,
        variance: solve.variance,
        grid_sup,
    })
}

/// Rate function on a grid of targets (parallel, order-preserving).
pub fn rate_curve(sys: &NormalizedSystem, ps: &[f64]) -> Result<Vec<RateData>> {
    ps.par_iter().map(|&p| rate(sys, p)).collect()
}

/// `J(p)` as a direct infimum: minimize `q -> Pr(phi~ + q psi~) - q p`
/// over the whole line by bracket doubling plus golden-section search.
/// Entirely derivative-free, so it shares no machinery with the Newton
/// route in [`rate`] beyond the pressure evaluations themselves; the two
/// values agree to the search tolerance squared times the curvature.
pub fn rate_infimum(sys: &NormalizedSystem, p: f64) -> Result<f64> {
    let obj = |q: f64| -> Result<f64> {
        Ok(tilted_pressure(&sys.rec, &sys.phi, &sys.psi, q)? - q * p)
    };

    // bracket a minimum of the strictly convex objective
    let mut lo = -1.0f64;
    let mut hi = 1.0f64;
    let mut f_lo = obj(lo)?;
    let mut f_hi = obj(hi)?;
    let mut f_mid = obj(0.0)?;
    let mut grows = 0usize;
    while !(f_lo > f_mid && f_hi > f_mid) {
        if f_lo <= f_mid {
            f_mid = f_lo;
            lo = lo * 2.0 - hi.abs().max(1.0);
            f_lo = obj(lo)?;
        } else {
            f_mid = f_hi;
            hi = hi * 2.0 + lo.abs().max(1.0);
            f_hi = obj(hi)?;
        }
        grows += 1;
        if grows > 120 {
            return Err(Error::Convergence(
                "could not bracket the pressure-minus-linear minimum; \
                 target may sit at the edge of the achievable range"
                    .into(),
            ));
        }
    }

    // golden-section to width ~1e-7: the value error is quadratic in the
    // width, far below the 1e-9 agreement this route is held to
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut a = lo;
    let mut b = hi;
    let mut c = b - (b - a) * INV_PHI;
    let mut d = a + (b - a) * INV_PHI;
    let mut fc = obj(c)?;
    let mut fd = obj(d)?;
    while (b - a).abs() > 1e-7 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * INV_PHI;
            fc = obj(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * INV_PHI;
            fd = obj(d)?;
        }
    }
    Ok(-fc.min(fd))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::Potential;
    use crate::scalar::Scalar;
    use crate::sft::MarkovModel;
    use crate::thermo::normalize_pair;
    use std::collections::BTreeMap;

    fn table(model: &MarkovModel, memory: usize, vals: &[(&str, &str)]) -> Potential {
        let values: BTreeMap<_, _> = vals
            .iter()
            .map(|(w, v)| (model.parse_word(w).unwrap(), Scalar::parse(v).unwrap()))
            .collect();
        Potential::from_table(model, memory, values).unwrap()
    }

    fn fair_coin_indicator() -> NormalizedSystem {
        let model = MarkovModel::full_shift(2);
        let phi = Potential::zero(&model);
        let psi = Potential::indicator(&model, 0).unwrap();
        normalize_pair(&model, &phi, &psi).unwrap()
    }

    fn golden_irrational() -> NormalizedSystem {
        let model = MarkovModel::golden_mean();
        let phi = Potential::zero(&model);
        let psi = table(&model, 2, &[("aa", "1"), ("ab", "sqrt2"), ("ba", "0")]);
        normalize_pair(&model, &phi, &psi).unwrap()
    }

    /// The saddle evaluation (solve the tilt, read off xi p - Pr) and the
    /// derivative-free infimum of Pr(xi) - xi p must meet to 1e-9 across a
    /// 19-point grid on both systems.
    #[test]
    fn duality_and_infimum_routes_agree_on_a_grid() {
        for sys in [fair_coin_indicator(), golden_irrational()] {
            let range = mean_range(&sys).unwrap();
            let span = range.max - range.min;
            for i in 0..19 {
                let p = range.min + span * (0.05 + 0.9 * i as f64 / 18.0);
                let dual = rate(&sys, p).unwrap().value;
                let inf = rate_infimum(&sys, p).unwrap();
                assert!(
                    (dual - inf).abs() <= 1e-9,
                    "p = {p}: saddle route {dual} vs infimum route {inf}"
                );
            }
        }
    }

    /// Fair-coin oracle, derived by hand. Frequencies of heads obey
    /// J(p) = log 2 + p log p + (1-p) log(1-p); in centered coordinates
    /// p_hat = p - 1/2. At p = 0.7:
    ///   J      = log 2 + 0.7 log 0.7 + 0.3 log 0.3 = 0.08228287850505180
    ///   xi     = log(p/(1-p)) = log(7/3)           = 0.84729786038720363
    ///   sigma2 = p(1-p)                            = 0.21
    #[test]
    fn fair_coin_rate_closed_form() {
        let sys = fair_coin_indicator();
        assert!((sys.pressure_shift - 2.0f64.ln()).abs() < 1e-14);
        assert!((sys.mean_shift - 0.5).abs() < 1e-14);
        let r = rate(&sys, 0.2).unwrap();
        assert!(
            (r.value - 0.08228287850505180).abs() < 1e-11,
            "J(0.7 as centered 0.2) = {}",
            r.value
        );
        assert!(
            (r.xi - 0.84729786038720363).abs() < 1e-10,
            "xi = {} vs log(7/3)",
            r.xi
        );
        assert!((r.variance - 0.21).abs() < 1e-10, "sigma^2 = {}", r.variance);
        assert!(r.grid_sup <= r.value + 1e-12);
        assert!(r.value - r.grid_sup < 1e-6, "grid gap {}", r.value - r.grid_sup);
    }

    #[test]
    fn rate_vanishes_at_the_mean() {
        for sys in [fair_coin_indicator(), golden_irrational()] {
            let r = rate(&sys, 0.0).unwrap();
            assert!(r.value.abs() < 1e-12, "J(0) = {}", r.value);
            assert!(r.xi.abs() < 1e-10, "xi(0) = {}", r.xi);
        }
    }

    /// The achievable range of the centered golden-mean observable: orbit
    /// means of {aa: 1, ab: sqrt2, ba: 0} lie in [sqrt2/2, 1], shifted by
    /// the equilibrium mean.
    #[test]
    fn mean_range_matches_hand_karp() {
        let sys = golden_irrational();
        let range = mean_range(&sys).unwrap();
        let lo_raw = std::f64::consts::SQRT_2 / 2.0;
        assert!(
            (range.min - (lo_raw - sys.mean_shift)).abs() < 1e-12,
            "min {} vs {}",
            range.min,
            lo_raw - sys.mean_shift
        );
        assert!((range.max - (1.0 - sys.mean_shift)).abs() < 1e-12);
        assert!(range.min < 0.0 && 0.0 < range.max, "mean must be interior");
    }

    #[test]
    fn targets_outside_range_are_rejected() {
        let sys = fair_coin_indicator();
        // achievable interval is (-1/2, 1/2) after centering
        assert!(rate(&sys, 0.5).is_err());
        assert!(rate(&sys, 0.51).is_err());
        assert!(rate(&sys, -0.5).is_err());
        assert!(rate(&sys, 0.49).is_ok());
    }

    /// J is convex, vanishes at 0, has curvature 1/sigma^2, and dominates
    /// every Legendre line xi p - Pr(xi).
    #[test]
    fn curve_convexity_curvature_and_envelope() {
        let sys = golden_irrational();
        let range = mean_range(&sys).unwrap();
        let pad = 0.05 * (range.max - range.min);
        let n = 41;
        let ps: Vec<f64> = (0..n)
            .map(|i| {
                range.min + pad + (range.max - range.min - 2.0 * pad) * i as f64 / (n - 1) as f64
            })
            .collect();
        let curve = rate_curve(&sys, &ps).unwrap();
        let dp = ps[1] - ps[0];
        for w in curve.windows(3) {
            let second = (w[2].value - 2.0 * w[1].value + w[0].value) / (dp * dp);
            assert!(second > -1e-9, "convexity defect {second} at p = {}", w[1].p);
            // curvature matches the inverse tilted variance
            let curv = 1.0 / w[1].variance;
            assert!(
                (second - curv).abs() < 0.02 * curv,
                "J'' = {second} vs 1/sigma^2 = {curv} at p = {}",
                w[1].p
            );
        }
        // envelope: J(p) >= xi p - Pr(xi) for every tilt, with equality at xi_p
        for probe in [-1.5f64, -0.4, 0.3, 1.1] {
            let pr = tilted_pressure(&sys.rec, &sys.phi, &sys.psi, probe).unwrap();
            for r in &curve {
                assert!(
                    r.value >= probe * r.p - pr - 1e-10,
                    "envelope violated at p = {}, xi = {probe}",
                    r.p
                );
            }
        }
        for r in &curve {
            assert!(r.grid_sup <= r.value + 1e-12);
            assert!(r.value - r.grid_sup <= 1e-4 * r.variance.max(1e-3));
        }
    }
}
