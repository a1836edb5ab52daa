//! Quadrature: Gauss-Legendre nodes for smooth profiles and an adaptive
//! Simpson rule for complex-valued integrands with a Richardson error
//! estimate (`|S_fine - S_coarse| / 15` per panel).

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on
/// the Legendre polynomial from the Chebyshev initial guess.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // p_n(x) and p_n'(x) by the three-term recurrence
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Integrate a real function over `[a, b]` with an `n`-point Gauss rule.
pub fn integrate_gl(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let (xs, ws) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    xs.iter()
        .zip(&ws)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct QuadResult {
    pub value: Complex64,
    /// Accumulated Richardson error estimate.
    pub error: f64,
    pub evaluations: usize,
}

struct Panel {
    a: f64,
    b: f64,
    fa: Complex64,
    fm: Complex64,
    fb: Complex64,
    coarse: Complex64,
}

/// Adaptive Simpson for complex integrands. `tol` is absolute; panels are
/// split until the local Richardson estimate passes its share of `tol` or
/// `max_depth` is reached (the leftover estimate is reported, not hidden).
pub fn adaptive_simpson(
    f: &dyn Fn(f64) -> Complex64,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: usize,
) -> Result<QuadResult> {
    if !(b > a) {
        return Err(Error::Domain(format!("bad interval [{a}, {b}]")));
    }
    let mut evals = 0usize;
    let mut eval = |x: f64| {
        evals += 1;
        f(x)
    };
    let fa = eval(a);
    let m = 0.5 * (a + b);
    let fm = eval(m);
    let fb = eval(b);
    let coarse = (fa + 4.0 * fm + fb) * ((b - a) / 6.0);
    let mut stack = vec![(
        Panel {
            a,
            b,
            fa,
            fm,
            fb,
            coarse,
        },
        tol,
        0usize,
    )];
    let mut value = Complex64::new(0.0, 0.0);
    let mut error = 0.0f64;
    while let Some((p, tol_p, depth)) = stack.pop() {
        let m = 0.5 * (p.a + p.b);
        let lm = 0.5 * (p.a + m);
        let rm = 0.5 * (m + p.b);
        let flm = eval(lm);
        let frm = eval(rm);
        let left = (p.fa + 4.0 * flm + p.fm) * ((m - p.a) / 6.0);
        let right = (p.fm + 4.0 * frm + p.fb) * ((p.b - m) / 6.0);
        let fine = left + right;
        let est = (fine - p.coarse).norm() / 15.0;
        if est <= tol_p || depth >= max_depth {
            // Richardson extrapolation of the pair
            value += fine + (fine - p.coarse) / 15.0;
            error += est;
        } else {
            stack.push((
                Panel {
                    a: p.a,
                    b: m,
                    fa: p.fa,
                    fm: flm,
                    fb: p.fm,
                    coarse: left,
                },
                0.5 * tol_p,
                depth + 1,
            ));
            stack.push((
                Panel {
                    a: m,
                    b: p.b,
                    fa: p.fm,
                    fm: frm,
                    fb: p.fb,
                    coarse: right,
                },
                0.5 * tol_p,
                depth + 1,
            ));
        }
    }
    Ok(QuadResult {
        value,
        error,
        evaluations: evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_is_exact_on_polynomials() {
        // n-point Gauss integrates degree 2n-1 exactly: x^9 with n = 5
        let exact = 2.0 / 11.0; // ∫_{-1}^{1} x^10 dx
        let got = integrate_gl(|x| x.powi(10), -1.0, 1.0, 6);
        assert!((got - exact).abs() < 1e-15, "{got} vs {exact}");
        // and x^9 integrates to 0 by symmetry
        let odd = integrate_gl(|x| x.powi(9), -1.0, 1.0, 5);
        assert!(odd.abs() < 1e-15);
        // ∫_0^1 x^2 = 1/3 with 2 points
        let sq = integrate_gl(|x| x * x, 0.0, 1.0, 2);
        assert!((sq - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gauss_handles_smooth_transcendentals() {
        let got = integrate_gl(f64::sin, 0.0, std::f64::consts::PI, 24);
        assert!((got - 2.0).abs() < 1e-14, "{got}");
    }

    #[test]
    fn simpson_complex_oracle() {
        // ∫_0^1 e^{ix} dx = sin 1 + i (1 - cos 1)
        let r = adaptive_simpson(&|x| Complex64::new(0.0, x).exp(), 0.0, 1.0, 1e-12, 30).unwrap();
        let expect = Complex64::new(1.0f64.sin(), 1.0 - 1.0f64.cos());
        assert!((r.value - expect).norm() < 1e-11, "{:?}", r.value);
        // full turn integrates to zero
        let r = adaptive_simpson(
            &|x| Complex64::new(0.0, x).exp(),
            0.0,
            2.0 * std::f64::consts::PI,
            1e-12,
            30,
        )
        .unwrap();
        assert!(r.value.norm() < 1e-10, "{:?}", r.value);
    }

    #[test]
    fn simpson_tracks_oscillatory_integrals() {
        // ∫_0^{10} cos(40 x) dx = sin(400)/40
        let r = adaptive_simpson(
            &|x| Complex64::new((40.0 * x).cos(), 0.0),
            0.0,
            10.0,
            1e-11,
            40,
        )
        .unwrap();
        let expect = (400.0f64).sin() / 40.0;
        assert!(
            (r.value.re - expect).abs() < 1e-9,
            "{} vs {expect}",
            r.value.re
        );
        assert!(r.evaluations > 100, "oscillation must force refinement");
    }

    #[test]
    fn simpson_rejects_empty_interval() {
        assert!(adaptive_simpson(&|_| Complex64::new(1.0, 0.0), 1.0, 1.0, 1e-9, 10).is_err());
    }
}
