//! Smooth compactly supported window functions ("cutoffs") with entire
//! Fourier transforms, used to smooth window indicators from above and
//! below.
//!
//! Both families take values in [0, 1], equal 1 on a central plateau and 0
//! outside a compact support, and are even. The transform convention is
//!
//! ```text
//!   hat(w) = ∫ chi(x) e^{-i w x} dx ,
//! ```
//!
//! extended to complex `w` (both transforms are entire of exponential type
//! equal to the support half-width). Decay is certified through total
//! variation of derivatives:
//!
//! ```text
//!   |hat(u + iv)| <= e^{support |v|} min_m ||chi^(m)||_1 / |u|^m .
//! ```
//!
//! * `PlateauCutoff`: indicator of `[-r, r]` convolved with `k` centered
//!   boxcars of half-widths `w_i`. Values come from the distribution
//!   function of the boxcar sum (inclusion-exclusion over the cube
//!   corners); the transform is `2 r sinc(r w) prod_i sinc(w_i w)`.
//!   Smoothness grows with `k`: `||chi^(m)||_1 <= 2 / (w_(1) ... w_(m-1))`
//!   against the largest widths.
//! * `CosineTaper`: 1 on `[-a, a]`, cosine-squared shoulder down to `±s`.
//!
//! For a unit target window `[-1, 1]` and taper budget `eta`, each family
//! provides an upper cutoff (`chi >= indicator`, plateau exactly the
//! window) and a lower one (`chi <= indicator`, support exactly the
//! window); squeezing a window measure between the two turns smooth-window
//! asymptotics into sharp two-sided bounds.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Common interface of the cutoff families (unit scale: the caller rescales
/// arguments by the window half-width).
pub trait Cutoff {
    /// Pointwise value in [0, 1].
    fn value(&self, x: f64) -> f64;
    /// Entire Fourier transform `∫ chi e^{-iwx} dx` at complex `w`.
    fn hat(&self, w: Complex64) -> Complex64;
    /// Half-width of the support.
    fn support(&self) -> f64;
    /// Half-width of the plateau where `chi = 1`.
    fn plateau(&self) -> f64;
    /// A Lipschitz constant.
    fn lip(&self) -> f64;
    /// `||chi^(m)||_1` (total variation for the highest order), when finite.
    fn deriv_l1_bound(&self, order: usize) -> Option<f64>;

    /// Certified bound on `|hat(u + iv)|`, minimized over available decay
    /// orders and the trivial area bound.
    fn hat_bound(&self, re_abs: f64, im_abs: f64) -> f64 {
        let growth = (self.support() * im_abs).exp();
        let mut best = 2.0 * self.support() * growth;
        if re_abs > 0.0 {
            for m in 1..=8 {
                if let Some(c) = self.deriv_l1_bound(m) {
                    best = best.min(growth * c / re_abs.powi(m as i32));
                }
            }
        }
        best
    }
}

/// `sin(z)/z`, stable near the origin.
fn sinc(z: Complex64) -> Complex64 {
    if z.norm() < 1e-4 {
        let z2 = z * z;
        Complex64::new(1.0, 0.0) - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// Indicator of `[-r, r]` convolved with boxcars of half-widths `widths`.
#[derive(Clone, Debug)]
pub struct PlateauCutoff {
    r: f64,
    widths: Vec<f64>,
    /// widths sorted descending, for the derivative bounds
    sorted_desc: Vec<f64>,
}

impl PlateauCutoff {
    pub fn new(r: f64, widths: Vec<f64>) -> Result<Self> {
        if !(r > 0.0) || widths.is_empty() || widths.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Domain(
                "plateau cutoff needs r > 0 and at least one positive width".into(),
            ));
        }
        if widths.len() > 16 {
            return Err(Error::Domain(
                "more than 16 smoothing boxcars is never useful here".into(),
            ));
        }
        let mut sorted_desc = widths.clone();
        sorted_desc.sort_by(|a, b| b.partial_cmp(a).unwrap());
        Ok(PlateauCutoff {
            r,
            widths,
            sorted_desc,
        })
    }

    /// Upper sandwich member for the unit window: plateau exactly
    /// `[-1, 1]`, support `[-(1 + eta), 1 + eta]`, `k` equal boxcars.
    pub fn upper_for_unit(k: usize, eta: f64) -> Result<Self> {
        if !(eta > 0.0) || k == 0 {
            return Err(Error::Domain("need eta > 0 and k >= 1".into()));
        }
        PlateauCutoff::new(1.0 + eta / 2.0, vec![eta / (2.0 * k as f64); k])
    }

    /// Lower sandwich member: support exactly `[-1, 1]`, plateau
    /// `[-(1 - eta), 1 - eta]`. Needs `eta < 1`.
    pub fn lower_for_unit(k: usize, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) || k == 0 {
            return Err(Error::Domain("need 0 < eta < 1 and k >= 1".into()));
        }
        PlateauCutoff::new(1.0 - eta / 2.0, vec![eta / (2.0 * k as f64); k])
    }

    /// Distribution function of `W = sum U_i`, `U_i ~ Unif[-w_i, w_i]`:
    /// inclusion-exclusion over the corners of the width cube.
    fn boxcar_cdf(&self, x: f64) -> f64 {
        let k = self.widths.len();
        let total: f64 = self.widths.iter().sum();
        if x <= -total {
            return 0.0;
        }
        if x >= total {
            return 1.0;
        }
        let kf = k as f64;
        let mut acc = 0.0f64;
        for mask in 0u32..(1 << k) {
            let mut shift = total;
            let mut sign = 1.0;
            for (i, w) in self.widths.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    shift -= 2.0 * w;
                    sign = -sign;
                }
            }
            let t = x + shift;
            if t > 0.0 {
                acc += sign * t.powf(kf);
            }
        }
        let mut denom = 1.0f64;
        for (i, w) in self.widths.iter().enumerate() {
            denom *= 2.0 * w * (i as f64 + 1.0);
        }
        (acc / denom).clamp(0.0, 1.0)
    }
}

impl Cutoff for PlateauCutoff {
    fn value(&self, x: f64) -> f64 {
        (self.boxcar_cdf(x + self.r) - self.boxcar_cdf(x - self.r)).clamp(0.0, 1.0)
    }

    fn hat(&self, w: Complex64) -> Complex64 {
        let mut acc = 2.0 * self.r * sinc(self.r * w);
        for wi in &self.widths {
            acc *= sinc(*wi * w);
        }
        acc
    }

    fn support(&self) -> f64 {
        self.r + self.widths.iter().sum::<f64>()
    }

    fn plateau(&self) -> f64 {
        (self.r - self.widths.iter().sum::<f64>()).max(0.0)
    }

    fn lip(&self) -> f64 {
        // the density of the boxcar sum never exceeds that of its widest
        // factor
        1.0 / (2.0 * self.sorted_desc[0])
    }

    fn deriv_l1_bound(&self, order: usize) -> Option<f64> {
        if order == 0 {
            return Some(2.0 * self.support()); // area bound
        }
        if order > self.widths.len() + 1 {
            return None;
        }
        let mut c = 2.0;
        for w in self.sorted_desc.iter().take(order - 1) {
            c /= w;
        }
        Some(c)
    }
}

/// 1 on `[-a, a]`, cosine-squared shoulders vanishing at `±s`.
#[derive(Clone, Debug)]
pub struct CosineTaper {
    a: f64,
    s: f64,
}

impl CosineTaper {
    pub fn new(a: f64, s: f64) -> Result<Self> {
        if !(a >= 0.0 && s > a) {
            return Err(Error::Domain(format!(
                "cosine taper needs 0 <= a < s, got a = {a}, s = {s}"
            )));
        }
        Ok(CosineTaper { a, s })
    }

    pub fn upper_for_unit(eta: f64) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::Domain("need eta > 0".into()));
        }
        CosineTaper::new(1.0, 1.0 + eta)
    }

    pub fn lower_for_unit(eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::Domain("need 0 < eta < 1".into()));
        }
        CosineTaper::new(1.0 - eta, 1.0)
    }

    fn taper_len(&self) -> f64 {
        self.s - self.a
    }
}

impl Cutoff for CosineTaper {
    fn value(&self, x: f64) -> f64 {
        let ax = x.abs();
        if ax <= self.a {
            1.0
        } else if ax >= self.s {
            0.0
        } else {
            let t = (ax - self.a) / self.taper_len();
            0.5 * (1.0 + (std::f64::consts::PI * t).cos())
        }
    }

    /// `(pi/L)^2 (sin(a w) + sin(s w)) / (w ((pi/L)^2 - w^2))` with the
    /// removable points at `w = 0` and `w = ±pi/L` handled by series /
    /// l'Hopital branches.
    fn hat(&self, w: Complex64) -> Complex64 {
        let l = self.taper_len();
        let p = std::f64::consts::PI / l;
        let p2 = Complex64::new(p * p, 0.0);
        let a = self.a;
        let s = self.s;
        if w.norm() < 1e-7 {
            // (sin(aw) + sin(sw)) / w by series
            let w2 = w * w;
            let num_over_w = Complex64::new(a + s, 0.0)
                - w2 * (a.powi(3) + s.powi(3)) / 6.0
                + w2 * w2 * (a.powi(5) + s.powi(5)) / 120.0;
            return p2 * num_over_w / (p2 - w2);
        }
        let denom_quad = p2 - w * w;
        if denom_quad.norm() < 1e-6 * p * p {
            // both numerator and (p^2 - w^2) vanish at w = ±p: l'Hopital
            // against D(w) = w (p^2 - w^2), D'(w) = p^2 - 3 w^2
            let dprime = p2 - 3.0 * w * w;
            return p2 * (a * (a * w).cos() + s * (s * w).cos()) / dprime;
        }
        p2 * ((a * w).sin() + (s * w).sin()) / (w * denom_quad)
    }

    fn support(&self) -> f64 {
        self.s
    }

    fn plateau(&self) -> f64 {
        self.a
    }

    fn lip(&self) -> f64 {
        std::f64::consts::PI / (2.0 * self.taper_len())
    }

    fn deriv_l1_bound(&self, order: usize) -> Option<f64> {
        let l = self.taper_len();
        let p = std::f64::consts::PI / l;
        match order {
            0 => Some(2.0 * self.s),
            1 => Some(2.0),
            2 => Some(2.0 * std::f64::consts::PI / l),
            // chi'' has four jumps of size p^2/2 plus a smooth part of the
            // same total mass: TV(chi'') = 4 p^2
            3 => Some(4.0 * p * p),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive_simpson;

    fn numeric_hat(c: &dyn Cutoff, w: Complex64) -> Complex64 {
        let s = c.support();
        adaptive_simpson(
            &|x| (-Complex64::new(0.0, 1.0) * w * x).exp() * c.value(x),
            -s,
            s,
            1e-12,
            32,
        )
        .unwrap()
        .value
    }

    /// Single boxcar: chi is the trapezoid with plateau r - w and support
    /// r + w; values checked by hand.
    #[test]
    fn trapezoid_values_by_hand() {
        let c = PlateauCutoff::new(2.0, vec![1.0]).unwrap();
        assert_eq!(c.value(0.0), 1.0);
        assert_eq!(c.value(1.0), 1.0);
        assert!((c.value(2.0) - 0.5).abs() < 1e-15);
        assert!((c.value(2.5) - 0.25).abs() < 1e-15);
        assert_eq!(c.value(3.0), 0.0);
        assert_eq!(c.value(-2.5), c.value(2.5));
        assert_eq!(c.support(), 3.0);
        assert_eq!(c.plateau(), 1.0);
    }

    /// Three equal boxcars: the distribution function at the symmetry
    /// point is 1/2, tails are exact.
    #[test]
    fn boxcar_cdf_oracle() {
        let c = PlateauCutoff::new(1.0, vec![0.5, 0.5, 0.5]).unwrap();
        assert!((c.boxcar_cdf(0.0) - 0.5).abs() < 1e-15);
        assert_eq!(c.boxcar_cdf(-1.5), 0.0);
        assert_eq!(c.boxcar_cdf(1.5), 1.0);
        // monotone
        let mut prev = -1.0;
        for i in -40..=40 {
            let v = c.boxcar_cdf(i as f64 * 0.05);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn plateau_hat_matches_numeric_transform() {
        let c = PlateauCutoff::new(1.2, vec![0.3, 0.15]).unwrap();
        for w in [
            Complex64::new(0.0, 0.0),
            Complex64::new(0.7, 0.0),
            Complex64::new(3.0, 0.0),
            Complex64::new(1.0, 0.5),
            Complex64::new(-2.0, -0.8),
        ] {
            let analytic = c.hat(w);
            let numeric = numeric_hat(&c, w);
            assert!(
                (analytic - numeric).norm() < 1e-9,
                "w = {w}: {analytic} vs {numeric}"
            );
        }
        assert!((c.hat(Complex64::new(0.0, 0.0)).re - 2.0 * 1.2).abs() < 1e-14);
    }

    #[test]
    fn cosine_hat_matches_numeric_transform() {
        let c = CosineTaper::new(0.8, 1.5).unwrap();
        for w in [
            Complex64::new(0.0, 0.0),
            Complex64::new(1.3, 0.0),
            Complex64::new(5.0, 0.0),
            Complex64::new(0.6, 0.9),
        ] {
            let analytic = c.hat(w);
            let numeric = numeric_hat(&c, w);
            assert!(
                (analytic - numeric).norm() < 1e-9,
                "w = {w}: {analytic} vs {numeric}"
            );
        }
        assert!((c.hat(Complex64::new(0.0, 0.0)).re - (0.8 + 1.5)).abs() < 1e-12);
    }

    /// The transform is continuous across its removable points w = ±pi/L.
    #[test]
    fn cosine_hat_removable_points() {
        let c = CosineTaper::new(0.5, 1.25).unwrap();
        let p = std::f64::consts::PI / 0.75;
        let at = c.hat(Complex64::new(p, 0.0));
        let near = c.hat(Complex64::new(p * (1.0 + 1e-7), 0.0));
        assert!(
            (at - near).norm() < 1e-6,
            "across the pole: {at} vs {near}"
        );
        let numeric = numeric_hat(&c, Complex64::new(p, 0.0));
        assert!((at - numeric).norm() < 1e-8, "{at} vs {numeric}");
    }

    /// chi_lower <= indicator of [-1,1] <= chi_upper, with the advertised
    /// plateau and support, for both families.
    #[test]
    fn sandwich_brackets_unit_indicator() {
        let eta = 0.4;
        let cases: Vec<(Box<dyn Cutoff>, Box<dyn Cutoff>)> = vec![
            (
                Box::new(PlateauCutoff::lower_for_unit(3, eta).unwrap()),
                Box::new(PlateauCutoff::upper_for_unit(3, eta).unwrap()),
            ),
            (
                Box::new(CosineTaper::lower_for_unit(eta).unwrap()),
                Box::new(CosineTaper::upper_for_unit(eta).unwrap()),
            ),
        ];
        for (lower, upper) in &cases {
            assert!((lower.support() - 1.0).abs() < 1e-14);
            assert!((upper.plateau() - 1.0).abs() < 1e-14);
            for i in -300..=300 {
                let x = i as f64 * 0.01;
                let ind = if x.abs() <= 1.0 { 1.0 } else { 0.0 };
                assert!(
                    lower.value(x) <= ind + 1e-12,
                    "lower({x}) = {} above indicator",
                    lower.value(x)
                );
                assert!(
                    upper.value(x) >= ind - 1e-12,
                    "upper({x}) = {} below indicator",
                    upper.value(x)
                );
            }
        }
    }

    #[test]
    fn lipschitz_bounds_hold_numerically() {
        let cs: Vec<Box<dyn Cutoff>> = vec![
            Box::new(PlateauCutoff::new(1.0, vec![0.25, 0.1]).unwrap()),
            Box::new(CosineTaper::new(0.7, 1.2).unwrap()),
        ];
        for c in &cs {
            let h = 1e-6;
            let mut steepest = 0.0f64;
            for i in -2000..=2000 {
                let x = i as f64 * 1e-3 * c.support();
                steepest = steepest.max((c.value(x + h) - c.value(x)).abs() / h);
            }
            assert!(
                steepest <= c.lip() * (1.0 + 1e-4),
                "observed slope {steepest} vs bound {}",
                c.lip()
            );
        }
    }

    /// Certified decay: |hat(u + iv)| <= hat_bound for sampled arguments.
    #[test]
    fn hat_decay_bounds_hold()  {
        let cs: Vec<Box<dyn Cutoff>> = vec![
            Box::new(PlateauCutoff::upper_for_unit(4, 0.5).unwrap()),
            Box::new(CosineTaper::upper_for_unit(0.5).unwrap()),
        ];
        for c in &cs {
            for &u in &[0.5f64, 3.0, 17.0, 120.0, 900.0] {
                for &v in &[0.0f64, 0.4, 1.3] {
                    let val = c.hat(Complex64::new(u, v)).norm();
                    let bound = c.hat_bound(u, v);
                    assert!(
                        val <= bound * (1.0 + 1e-9),
                        "|hat({u} + {v}i)| = {val} above bound {bound}"
                    );
                }
            }
        }
    }

    /// Evenness and realness on the real axis.
    #[test]
    fn hat_is_real_and_even_on_reals() {
        let c = PlateauCutoff::upper_for_unit(2, 0.3).unwrap();
        for &u in &[0.2f64, 1.7, 8.3] {
            let plus = c.hat(Complex64::new(u, 0.0));
            let minus = c.hat(Complex64::new(-u, 0.0));
            assert!(plus.im.abs() < 1e-15);
            assert!((plus - minus).norm() < 1e-15);
        }
    }
}
