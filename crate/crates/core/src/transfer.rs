//! Weighted transfer operators on a recoded subshift and their spectra.
//!
//! For an edge potential `g` on a presentation with 0/1 adjacency `a`, the
//! forward weight matrix is
//!
//! ```text
//!   B[i][j] = a_ij e^{g(i -> j)}
//! ```
//!
//! and the transfer (pull-back-over-preimages) operator acts on functions
//! of the leading state by the transpose:
//!
//! ```text
//!   (L f)_u = sum_{v -> u} e^{g(v -> u)} f_v = (B^T f)_u .
//! ```
//!
//! `perron` returns the full Perron data of an irreducible nonnegative
//! operator: the eigenvalue with a Collatz-Wielandt enclosure
//! (`min_i (Bv)_i / v_i <= rho <= max_i (Bv)_i / v_i` for any positive `v`),
//! the eigenfunction `h` (right vector of `B^T`, max-normalized) and the
//! eigenmeasure weights `nu` (right vector of `B`, scaled so `<nu, h> = 1`).
//!
//! Complex twists `B_z[i][j] = a_ij e^{g + z psi}` at `z = xi + i u` feed the
//! spectral-radius machinery, which runs two independent routes:
//!
//! * power iteration with a Rayleigh-quotient stopping rule (primary), with
//!   a dense Schur-based eigensolve as fallback when iteration stalls, and
//! * a Gelfand sandwich from matrix powers,
//!   `(|tr B^n| / k)^{1/n} <= rho <= ||B^n||_inf^{1/n}`,
//!   evaluated along a squaring chain with logarithmic rescaling.
//!
//! The sandwich is reported as an enclosure next to the point estimate so
//! downstream consumers can see how much slack the bound leaves.

use crate::error::{Error, Result};
use crate::interval::Iv;
use crate::potentials::EdgePotential;
use crate::sft::Recoded;
use num_complex::Complex64;
use rayon::prelude::*;

/// Nonnegative forward weight matrix of a transfer operator.
#[derive(Clone, Debug)]
pub struct TransferMatrix {
    k: usize,
    b: Vec<f64>, // row-major: b[i*k + j] = weight of edge i -> j (0 if absent)
}

impl TransferMatrix {
    /// Build from explicit forward weights (row-major, zero = no edge).
    pub fn from_forward(k: usize, b: Vec<f64>) -> Result<Self> {
        if b.len() != k * k || k == 0 {
            return Err(Error::InvalidModel("weight matrix shape".into()));
        }
        if b.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidModel(
                "forward weights must be finite and nonnegative".into(),
            ));
        }
        Ok(TransferMatrix { k, b })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Weight of the edge `from -> to` (zero when the edge is absent).
    pub fn forward(&self, from: usize, to: usize) -> f64 {
        self.b[from * self.k + to]
    }

    /// `out = B v` (forward direction).
    pub fn apply_forward(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..self.k {
            let row = &self.b[i * self.k..(i + 1) * self.k];
            out[i] = row.iter().zip(v).map(|(w, x)| w * x).sum();
        }
    }

    /// `out = B^T f` (transfer direction).
    pub fn apply_transfer(&self, f: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (i, fi) in f.iter().enumerate() {
            let row = &self.b[i * self.k..(i + 1) * self.k];
            for (j, w) in row.iter().enumerate() {
                out[j] += w * fi;
            }
        }
    }
}

/// Forward weights `e^{g}` on the edges of a recoded presentation.
pub fn build_operator(rec: &Recoded, g: &EdgePotential) -> Result<TransferMatrix> {
    build_tilted(rec, g, g, 0.0)
}

/// Forward weights `e^{g + xi psi}` (real tilt).
pub fn build_tilted(
    rec: &Recoded,
    g: &EdgePotential,
    psi: &EdgePotential,
    xi: f64,
) -> Result<TransferMatrix> {
    let k = rec.state_count();
    if g.values.len() != rec.edges.len() || psi.values.len() != rec.edges.len() {
        return Err(Error::InvalidModel(
            "edge potential length does not match presentation".into(),
        ));
    }
    let mut b = vec![0.0; k * k];
    for (e, (gv, pv)) in rec
        .edges
        .iter()
        .zip(g.values.iter().zip(psi.values.iter()))
    {
        b[e.from * k + e.to] = (gv.val + xi * pv.val).exp();
    }
    TransferMatrix::from_forward(k, b)
}

/// Perron eigendata of an irreducible nonnegative transfer operator.
#[derive(Clone, Debug)]
pub struct PerronData {
    pub lambda: f64,
    /// Collatz-Wielandt enclosure evaluated at the final positive iterates
    /// of both directions, inflated for floating-point evaluation error.
    pub enclosure: Iv,
    /// Eigenfunction `h` (of `B^T`), normalized so `max h = 1`.
    pub right: Vec<f64>,
    /// Eigenmeasure weights `nu` (of `B`), normalized so `<nu, h> = 1`.
    pub left: Vec<f64>,
    /// `max_i |(B^T h - lambda h)_i| / lambda`, same for `nu`.
    pub residual: f64,
    pub iterations: usize,
}

/// Perron data via power iteration with inverse-iteration polish.
pub fn perron(t: &TransferMatrix) -> Result<PerronData> {
    let k = t.k;
    let (lam_r, right, it_r) = positive_power_iterate(k, |v, out| t.apply_transfer(v, out))?;
    let (lam_l, left, it_l) = positive_power_iterate(k, |v, out| t.apply_forward(v, out))?;

    let lambda0 = 0.5 * (lam_r + lam_l);
    let right = polish(t, right, lambda0, true);
    let left = polish(t, left, lambda0, false);

    // Each CW functional is evaluated in floating point: inflate by the
    // evaluation error before intersecting the two directions.
    let cw_r = collatz_wielandt(k, |v, out| t.apply_transfer(v, out), &right);
    let cw_l = collatz_wielandt(k, |v, out| t.apply_forward(v, out), &left);
    let pad = 8.0 * f64::EPSILON * lambda0 * k as f64;
    let lo = (cw_r.0 - pad).max(cw_l.0 - pad);
    let hi = (cw_r.1 + pad).min(cw_l.1 + pad);
    if lo > hi {
        return Err(Error::Convergence(format!(
            "Collatz-Wielandt intervals disjoint: [{}, {}] vs [{}, {}]",
            cw_r.0, cw_r.1, cw_l.0, cw_l.1
        )));
    }
    let lambda = 0.5 * (lo + hi);
    let enclosure = Iv::new(lo, hi);

    // Normalize: max(right) = 1, <left, right> = 1.
    let rmax = right.iter().cloned().fold(0.0f64, f64::max);
    let right: Vec<f64> = right.iter().map(|x| x / rmax).collect();
    let dot: f64 = left.iter().zip(&right).map(|(a, b)| a * b).sum();
    let left: Vec<f64> = left.iter().map(|x| x / dot).collect();

    let residual = {
        let mut buf = vec![0.0; k];
        t.apply_transfer(&right, &mut buf);
        let res_r = buf
            .iter()
            .zip(&right)
            .map(|(w, v)| (w - lambda * v).abs())
            .fold(0.0, f64::max);
        t.apply_forward(&left, &mut buf);
        let res_l = buf
            .iter()
            .zip(&left)
            .map(|(w, v)| (w - lambda * v).abs())
            .fold(0.0, f64::max)
            / left.iter().cloned().fold(0.0f64, f64::max);
        (res_r / lambda).max(res_l / lambda)
    };

    Ok(PerronData {
        lambda,
        enclosure,
        right,
        left,
        residual,
        iterations: it_r.max(it_l),
    })
}

/// Power iteration keeping strictly positive iterates; returns the
/// Collatz-Wielandt midpoint, the final vector, and the iteration count.
fn positive_power_iterate(
    k: usize,
    matvec: impl Fn(&[f64], &mut [f64]),
) -> Result<(f64, Vec<f64>, usize)> {
    let mut v = vec![1.0; k];
    let mut w = vec![0.0; k];
    let mut last_gap = f64::INFINITY;
    for it in 1..=50_000 {
        matvec(&v, &mut w);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (wi, vi) in w.iter().zip(&v) {
            if *wi <= 0.0 {
                return Err(Error::NotIrreducible(
                    "transfer iterate lost positivity; operator is reducible".into(),
                ));
            }
            let q = wi / vi;
            lo = lo.min(q);
            hi = hi.max(q);
        }
        let norm = w.iter().cloned().fold(0.0f64, f64::max);
        v.iter_mut().zip(&w).for_each(|(x, wi)| *x = wi / norm);
        let gap = (hi - lo) / hi;
        if gap < 1e-14 || (gap >= last_gap && gap < 1e-10) {
            return Ok((0.5 * (lo + hi), v, it));
        }
        last_gap = gap;
    }
    // Primitive operators converge geometrically; a period-d presentation
    // keeps the gap open forever.
    Err(Error::Convergence(
        "power iteration did not contract; presentation is likely not primitive".into(),
    ))
}

/// One step of inverse iteration at the estimated eigenvalue; falls back to
/// the input when the solve fails or positivity is lost.
fn polish(t: &TransferMatrix, v: Vec<f64>, lambda: f64, transfer_direction: bool) -> Vec<f64> {
    use nalgebra::{DMatrix, DVector};
    let k = t.k;
    // Shift slightly off the eigenvalue so the LU stays usable; inverse
    // iteration magnifies the eigendirection regardless.
    let shift = lambda * (1.0 + 1e-11);
    let mut a = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let w = if transfer_direction {
                t.forward(j, i)
            } else {
                t.forward(i, j)
            };
            a[(i, j)] = w - if i == j { shift } else { 0.0 };
        }
    }
    let b = DVector::from_row_slice(&v);
    match crate::eigen::lu_solve(&a, &b) {
        Some(w) => {
            let scale = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let sign = if w.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
            let cand: Vec<f64> = w.iter().map(|x| sign * x / scale).collect();
            if cand.iter().all(|x| *x > 0.0) {
                cand
            } else {
                v
            }
        }
        None => v,
    }
}

fn collatz_wielandt(
    k: usize,
    matvec: impl Fn(&[f64], &mut [f64]),
    v: &[f64],
) -> (f64, f64) {
    let mut w = vec![0.0; k];
    matvec(v, &mut w);
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for (wi, vi) in w.iter().zip(v) {
        let q = wi / vi;
        lo = lo.min(q);
        hi = hi.max(q);
    }
    (lo, hi)
}

/// Complex forward weight matrix `B_z[i][j] = a_ij e^{g + z psi}`.
#[derive(Clone, Debug)]
pub struct ComplexTransfer {
    k: usize,
    b: Vec<Complex64>,
}

impl ComplexTransfer {
    pub fn from_forward(k: usize, b: Vec<Complex64>) -> Result<Self> {
        if b.len() != k * k || k == 0 {
            return Err(Error::InvalidModel("weight matrix shape".into()));
        }
        Ok(ComplexTransfer { k, b })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn entry(&self, from: usize, to: usize) -> Complex64 {
        self.b[from * self.k + to]
    }

    pub(crate) fn apply(&self, v: &[Complex64], out: &mut [Complex64]) {
        for i in 0..self.k {
            let row = &self.b[i * self.k..(i + 1) * self.k];
            out[i] = row.iter().zip(v).map(|(w, x)| w * x).sum();
        }
    }

    pub(crate) fn inf_norm(&self) -> f64 {
        (0..self.k)
            .map(|i| {
                self.b[i * self.k..(i + 1) * self.k]
                    .iter()
                    .map(|z| z.norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

/// Twisted operator at `z = xi + i u`.
pub fn build_twisted(
    rec: &Recoded,
    g: &EdgePotential,
    psi: &EdgePotential,
    z: Complex64,
) -> Result<ComplexTransfer> {
    let k = rec.state_count();
    if g.values.len() != rec.edges.len() || psi.values.len() != rec.edges.len() {
        return Err(Error::InvalidModel(
            "edge potential length does not match presentation".into(),
        ));
    }
    let mut b = vec![Complex64::new(0.0, 0.0); k * k];
    for (e, (gv, pv)) in rec
        .edges
        .iter()
        .zip(g.values.iter().zip(psi.values.iter()))
    {
        b[e.from * k + e.to] = (Complex64::new(gv.val, 0.0) + z * pv.val).exp();
    }
    ComplexTransfer::from_forward(k, b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RadiusMethod {
    PowerIteration,
    DenseEigen,
}

#[derive(Clone, Debug)]
pub struct SpectralRadius {
    pub value: f64,
    /// Gelfand sandwich `[max_n (|tr B^n|/k)^{1/n}, min_n ||B^n||^{1/n}]`,
    /// hulled with the point estimate inflated by its residual.
    pub enclosure: Iv,
    pub method: RadiusMethod,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct RadiusOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// Iteration is declared stalled when the relative residual exceeds
    /// this after `max_iter`; the dense route then takes over.
    pub fallback_residual: f64,
    /// Powers (by repeated squaring) probed for the Gelfand sandwich.
    pub gelfand_powers: Vec<u32>,
}

impl Default for RadiusOptions {
    fn default() -> Self {
        RadiusOptions {
            max_iter: 20_000,
            tol: 1e-13,
            fallback_residual: 1e-9,
            gelfand_powers: vec![1, 2, 4, 8, 16, 32, 64, 128],
        }
    }
}

/// Spectral radius of a complex transfer matrix: power iteration with a
/// dense-eigensolve fallback, certified by a Gelfand power sandwich.
pub fn spectral_radius(m: &ComplexTransfer, opts: &RadiusOptions) -> SpectralRadius {
    let (lo_g, hi_g) = gelfand_sandwich(m, &opts.gelfand_powers);
    let scale = m.inf_norm();
    if scale == 0.0 {
        return SpectralRadius {
            value: 0.0,
            enclosure: Iv::point(0.0),
            method: RadiusMethod::PowerIteration,
            iterations: 0,
            residual: 0.0,
        };
    }

    let mut best = match complex_power_iterate(m, opts) {
        Some((value, iterations, residual)) if residual <= opts.fallback_residual * scale => {
            SpectralRadius {
                value,
                enclosure: Iv::ZERO, // filled below
                method: RadiusMethod::PowerIteration,
                iterations,
                residual,
            }
        }
        other => {
            let value = crate::eigen::complex_radius_dense(m.k, &m.b);
            let (iterations, residual) = match other {
                Some((_, it, r)) => (it, r),
                None => (opts.max_iter, f64::NAN),
            };
            SpectralRadius {
                value,
                enclosure: Iv::ZERO,
                method: RadiusMethod::DenseEigen,
                iterations,
                residual,
            }
        }
    };

    let pad = if best.residual.is_finite() {
        best.residual + 16.0 * f64::EPSILON * scale
    } else {
        1e-12 * scale
    };
    let point = Iv::new(best.value - pad, best.value + pad);
    let sandwich = Iv::new(lo_g.min(point.lo), hi_g.max(point.hi));
    best.enclosure = Iv::new(sandwich.lo.max(0.0), sandwich.hi);
    best
}

/// Power iteration on a complex matrix; returns `(|mu|, iterations,
/// absolute residual)` or `None` when the iterate collapses structurally.
fn complex_power_iterate(
    m: &ComplexTransfer,
    opts: &RadiusOptions,
) -> Option<(f64, usize, f64)> {
    let k = m.k;
    let mut v: Vec<Complex64> = (0..k)
        .map(|j| Complex64::from_polar(1.0 + j as f64 / k as f64, 0.39 * j as f64))
        .collect();
    let n0 = l2(&v);
    v.iter_mut().for_each(|z| *z /= n0);
    let mut w = vec![Complex64::new(0.0, 0.0); k];
    let mut mu_prev = Complex64::new(f64::INFINITY, 0.0);
    let mut stable = 0usize;
    for it in 1..=opts.max_iter {
        m.apply(&v, &mut w);
        let nw = l2(&w);
        if nw == 0.0 {
            // Iterate annihilated: the matrix is nilpotent on this vector;
            // radius indistinguishable from 0 at this scale.
            return Some((0.0, it, 0.0));
        }
        let mu: Complex64 = v.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
        let residual = v
            .iter()
            .zip(&w)
            .map(|(a, b)| (b - mu * a).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if (mu - mu_prev).norm() <= opts.tol * mu.norm().max(1e-300) {
            stable += 1;
        } else {
            stable = 0;
        }
        mu_prev = mu;
        v.iter_mut().zip(&w).for_each(|(x, wi)| *x = wi / nw);
        if stable >= 4 {
            return Some((mu.norm(), it, residual));
        }
    }
    let mu = mu_prev;
    if mu.re.is_finite() {
        let residual = {
            m.apply(&v, &mut w);
            v.iter()
                .zip(&w)
                .map(|(a, b)| (b - mu * a).norm_sqr())
                .sum::<f64>()
                .sqrt()
        };
        Some((mu.norm(), opts.max_iter, residual))
    } else {
        None
    }
}

fn l2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Gelfand sandwich along a squaring chain with log rescaling:
/// lower bounds `(|tr B^n| / k)^{1/n}`, upper bounds `||B^n||_inf^{1/n}`.
fn gelfand_sandwich(m: &ComplexTransfer, powers: &[u32]) -> (f64, f64) {
    let k = m.k;
    let max_pow = powers.iter().copied().max().unwrap_or(1);
    let mut lo: f64 = 0.0;
    let mut hi = f64::INFINITY;
    let mut p = m.b.clone();
    let mut log_scale = 0.0f64;
    let mut n = 1u32;
    loop {
        if powers.contains(&n) {
            let norm = inf_norm_raw(k, &p);
            if norm == 0.0 {
                return (0.0, 0.0);
            }
            let tr: Complex64 = (0..k).map(|i| p[i * k + i]).sum();
            hi = hi.min(((norm.ln() + log_scale) / n as f64).exp());
            if tr.norm() > 0.0 {
                lo = lo.max(((tr.norm().ln() + log_scale - (k as f64).ln()) / n as f64).exp());
            }
        }
        if n >= max_pow {
            break;
        }
        // p <- p * p, renormalized to keep entries in range.
        let mut q = vec![Complex64::new(0.0, 0.0); k * k];
        for i in 0..k {
            for l in 0..k {
                let pil = p[i * k + l];
                if pil == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..k {
                    q[i * k + j] += pil * p[l * k + j];
                }
            }
        }
        let s = inf_norm_raw(k, &q);
        if s == 0.0 {
            // Nilpotent: all higher powers vanish.
            return (0.0, 0.0);
        }
        q.iter_mut().for_each(|z| *z /= s);
        log_scale = 2.0 * log_scale + s.ln();
        p = q;
        n *= 2;
    }
    (lo, hi)
}

fn inf_norm_raw(k: usize, b: &[Complex64]) -> f64 {
    (0..k)
        .map(|i| b[i * k..(i + 1) * k].iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// One evaluated point of a twisted-radius sweep.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub u: f64,
    pub rho: f64,
    pub enclosure: Iv,
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    /// All evaluated points, sorted by `u`.
    pub points: Vec<SweepPoint>,
    /// Largest radius seen (the sup estimate over the band).
    pub rho_hat: f64,
    pub u_at_max: f64,
    pub enclosure_at_max: Iv,
    pub refinement_levels: usize,
}

/// Sweep the twisted radius `u -> rho(B_{xi + i u})` over a band, refining
/// around local maxima until the sup stabilizes.
pub fn spectral_sweep(
    rec: &Recoded,
    g: &EdgePotential,
    psi: &EdgePotential,
    xi: f64,
    u_range: (f64, f64),
    initial_points: usize,
    opts: &RadiusOptions,
) -> Result<SweepReport> {
    let (u0, u1) = u_range;
    if !(u1 > u0) || initial_points < 3 {
        return Err(Error::Domain(format!(
            "sweep needs u_min < u_max and >= 3 points, got [{u0}, {u1}]"
        )));
    }
    let eval = |u: f64| -> Result<SweepPoint> {
        let m = build_twisted(rec, g, psi, Complex64::new(xi, u))?;
        let r = spectral_radius(&m, opts);
        Ok(SweepPoint {
            u,
            rho: r.value,
            enclosure: r.enclosure,
        })
    };

    let grid: Vec<f64> = (0..initial_points)
        .map(|i| u0 + (u1 - u0) * i as f64 / (initial_points - 1) as f64)
        .collect();
    let mut points: Vec<SweepPoint> = grid
        .par_iter()
        .map(|&u| eval(u))
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| a.u.partial_cmp(&b.u).unwrap());

    let mut levels = 0usize;
    let mut prev_best = f64::NEG_INFINITY;
    for level in 1..=12 {
        levels = level;
        let best = points
            .iter()
            .map(|p| p.rho)
            .fold(f64::NEG_INFINITY, f64::max);
        if level >= 3 && (best - prev_best).abs() <= 1e-4 * best.abs().max(1e-12) {
            break;
        }
        prev_best = best;

        // Midpoints flanking the top local maxima.
        let mut maxima: Vec<usize> = (0..points.len())
            .filter(|&i| {
                let v = points[i].rho;
                (i == 0 || points[i - 1].rho <= v)
                    && (i + 1 == points.len() || points[i + 1].rho <= v)
            })
            .collect();
        maxima.sort_by(|&a, &b| points[b].rho.partial_cmp(&points[a].rho).unwrap());
        maxima.truncate(3);
        let mut new_us = Vec::new();
        for &i in &maxima {
            if i > 0 {
                new_us.push(0.5 * (points[i - 1].u + points[i].u));
            }
            if i + 1 < points.len() {
                new_us.push(0.5 * (points[i].u + points[i + 1].u));
            }
        }
        new_us.dedup();
        if new_us.is_empty() {
            break;
        }
        let fresh: Vec<SweepPoint> = new_us
            .par_iter()
            .map(|&u| eval(u))
            .collect::<Result<Vec<_>>>()?;
        points.extend(fresh);
        points.sort_by(|a, b| a.u.partial_cmp(&b.u).unwrap());
        points.dedup_by(|a, b| a.u == b.u);
    }

    let best = points
        .iter()
        .max_by(|a, b| a.rho.partial_cmp(&b.rho).unwrap())
        .expect("nonempty sweep");
    Ok(SweepReport {
        rho_hat: best.rho,
        u_at_max: best.u,
        enclosure_at_max: best.enclosure,
        refinement_levels: levels,
        points,
    })
}

/// Least-squares slope of `n -> log ||B^n 1||` over a tail window: an
/// independent estimate of `log rho` by norm growth.
#[derive(Clone, Debug)]
pub struct NormGrowth {
    pub log_rate: f64,
    /// RMS deviation of the fitted line over the window.
    pub fit_rms: f64,
}

pub fn iterate_norm_growth(m: &ComplexTransfer, window: std::ops::Range<usize>) -> Result<NormGrowth> {
    if window.is_empty() || window.start == 0 {
        return Err(Error::Domain("norm-growth window must be nonempty and start past 0".into()));
    }
    let k = m.k;
    let mut v = vec![Complex64::new(1.0, 0.0); k];
    let mut w = vec![Complex64::new(0.0, 0.0); k];
    let mut log_norm = 0.0f64;
    let mut samples = Vec::with_capacity(window.len());
    for n in 1..window.end {
        m.apply(&v, &mut w);
        let s = l2(&w);
        if s == 0.0 {
            return Err(Error::Degenerate(
                "iterate annihilated; norm growth undefined".into(),
            ));
        }
        log_norm += s.ln();
        w.iter_mut().for_each(|z| *z /= s);
        std::mem::swap(&mut v, &mut w);
        if window.contains(&n) {
            samples.push((n as f64, log_norm));
        }
    }
    let n = samples.len() as f64;
    let sx: f64 = samples.iter().map(|(x, _)| x).sum();
    let sy: f64 = samples.iter().map(|(_, y)| y).sum();
    let sxx: f64 = samples.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = samples.iter().map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    if denom <= 0.0 {
        return Err(Error::Domain("norm-growth window too short for a slope".into()));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let rms = (samples
        .iter()
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(NormGrowth {
        log_rate: slope,
        fit_rms: rms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{recode_potentials, Potential};
    use crate::scalar::Scalar;
    use crate::sft::MarkovModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    const PHI: f64 = 1.618033988749894848;

    fn golden_zero() -> (crate::sft::Recoded, EdgePotential) {
        let model = MarkovModel::golden_mean();
        let zero = Potential::zero(&model);
        let (rec, mut pots) = recode_potentials(&model, &[&zero]).unwrap();
        (rec, pots.pop().unwrap())
    }

    /// The adjacency operator of the golden-mean shift has Perron root
    /// phi = (1 + sqrt 5)/2, eigenfunction (1, 1/phi).
    #[test]
    fn golden_adjacency_perron_is_golden_ratio() {
        let (rec, g) = golden_zero();
        let t = build_operator(&rec, &g).unwrap();
        let p = perron(&t).unwrap();
        assert!(
            (p.lambda - PHI).abs() < 1e-13,
            "lambda {} vs phi {}",
            p.lambda,
            PHI
        );
        assert!(p.enclosure.contains(PHI), "enclosure {:?}", p.enclosure);
        assert!(p.enclosure.width() < 1e-10);
        assert!(p.residual < 1e-12, "residual {}", p.residual);
        // states sorted lexicographically: [a], [b]
        assert!((p.right[0] - 1.0).abs() < 1e-12);
        assert!((p.right[1] - 1.0 / PHI).abs() < 1e-10);
        let dot: f64 = p.left.iter().zip(&p.right).map(|(a, b)| a * b).sum();
        assert!((dot - 1.0).abs() < 1e-12, "normalization <l, r> = {dot}");
        // adjacency here is symmetric, so left is proportional to right
        assert!((p.left[1] / p.left[0] - 1.0 / PHI).abs() < 1e-10);
    }

    #[test]
    fn full_shift_perron_is_alphabet_size() {
        for k in [2usize, 3, 5] {
            let model = MarkovModel::full_shift(k);
            let zero = Potential::zero(&model);
            let (rec, pots) = recode_potentials(&model, &[&zero]).unwrap();
            let t = build_operator(&rec, &pots[0]).unwrap();
            let p = perron(&t).unwrap();
            assert!((p.lambda - k as f64).abs() < 1e-12);
            for r in &p.right {
                assert!((r - 1.0).abs() < 1e-12, "flat eigenfunction");
            }
            for l in &p.left {
                assert!((l - 1.0 / k as f64).abs() < 1e-12, "uniform eigenmeasure");
            }
        }
    }

    /// Closed form for a 2x2 weighted operator with one forbidden edge:
    /// B = [[x, y], [z, 0]] has lambda = (x + sqrt(x^2 + 4 y z)) / 2.
    #[test]
    fn weighted_two_state_closed_form() {
        let model = MarkovModel::golden_mean();
        let mut vals = BTreeMap::new();
        vals.insert(model.parse_word("aa").unwrap(), Scalar::parse("3/10").unwrap());
        vals.insert(model.parse_word("ab").unwrap(), Scalar::parse("-1/5").unwrap());
        vals.insert(model.parse_word("ba").unwrap(), Scalar::parse("7/10").unwrap());
        let g = Potential::from_table(&model, 2, vals).unwrap();
        let (rec, pots) = recode_potentials(&model, &[&g]).unwrap();
        let t = build_tilted(&rec, &pots[0], &pots[0], 0.0).unwrap();
        let x = (0.3f64).exp();
        let y = (-0.2f64).exp();
        let z = (0.7f64).exp();
        let expect = 0.5 * (x + (x * x + 4.0 * y * z).sqrt());
        let p = perron(&t).unwrap();
        assert!(
            (p.lambda - expect).abs() < 1e-12 * expect,
            "lambda {} vs closed form {}",
            p.lambda,
            expect
        );
        assert!(p.enclosure.contains(expect));
    }

    #[test]
    fn twisted_at_zero_matches_untwisted() {
        let model = MarkovModel::golden_mean();
        let g = Potential::zero(&model);
        let mut vals = BTreeMap::new();
        vals.insert(model.parse_word("aa").unwrap(), Scalar::parse("1").unwrap());
        vals.insert(model.parse_word("ab").unwrap(), Scalar::parse("sqrt2").unwrap());
        vals.insert(model.parse_word("ba").unwrap(), Scalar::parse("0").unwrap());
        let psi = Potential::from_table(&model, 2, vals).unwrap();
        let (rec, pots) = recode_potentials(&model, &[&g, &psi]).unwrap();
        let m = build_twisted(&rec, &pots[0], &pots[1], Complex64::new(0.0, 0.0)).unwrap();
        let r = spectral_radius(&m, &RadiusOptions::default());
        assert!((r.value - PHI).abs() < 1e-11, "rho(0) = {} vs phi", r.value);
        assert!(r.enclosure.contains(PHI));
    }

    /// Full 2-shift twisted by the first-symbol indicator has the closed
    /// form rho(i u) = |1 + e^{iu}| = 2 |cos(u/2)|, including the zero at
    /// u = pi (nilpotent) and the resonance rho = 2 at u = 2 pi, which is
    /// the spectral face of the arithmetic lattice c = 1.
    #[test]
    fn twisted_full_shift_closed_form_and_resonance() {
        let model = MarkovModel::full_shift(2);
        let g = Potential::zero(&model);
        let psi = Potential::indicator(&model, 0).unwrap();
        let (rec, pots) = recode_potentials(&model, &[&g, &psi]).unwrap();
        let opts = RadiusOptions::default();
        for u in [0.0, 0.3, 1.0, 2.2, std::f64::consts::PI, 2.0 * std::f64::consts::PI] {
            let m = build_twisted(&rec, &pots[0], &pots[1], Complex64::new(0.0, u)).unwrap();
            let r = spectral_radius(&m, &opts);
            let expect = 2.0 * (u / 2.0).cos().abs();
            assert!(
                (r.value - expect).abs() < 1e-9,
                "rho({u}) = {} vs |1 + e^(iu)| = {}",
                r.value,
                expect
            );
        }
    }

    /// Conjugating the twist reflects u -> -u and cannot change the radius.
    #[test]
    fn twisted_radius_is_even_in_u() {
        let model = MarkovModel::golden_mean();
        let g = Potential::zero(&model);
        let mut vals = BTreeMap::new();
        vals.insert(model.parse_word("aa").unwrap(), Scalar::parse("1").unwrap());
        vals.insert(model.parse_word("ab").unwrap(), Scalar::parse("sqrt2").unwrap());
        vals.insert(model.parse_word("ba").unwrap(), Scalar::parse("0").unwrap());
        let psi = Potential::from_table(&model, 2, vals).unwrap();
        let (rec, pots) = recode_potentials(&model, &[&g, &psi]).unwrap();
        let opts = RadiusOptions::default();
        for u in [0.7, 1.9, 13.4] {
            let plus = build_twisted(&rec, &pots[0], &pots[1], Complex64::new(0.1, u)).unwrap();
            let minus = build_twisted(&rec, &pots[0], &pots[1], Complex64::new(0.1, -u)).unwrap();
            let rp = spectral_radius(&plus, &opts).value;
            let rm = spectral_radius(&minus, &opts).value;
            assert!(
                (rp - rm).abs() <= 1e-13 * rp.max(1.0),
                "rho({u}) = {rp} vs rho(-{u}) = {rm}"
            );
        }
    }

    /// Power iteration and the dense Schur route must agree on random
    /// complex matrices; the Gelfand sandwich must contain the answer.
    #[test]
    fn power_iteration_agrees_with_dense_eigensolve() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let opts = RadiusOptions::default();
        for trial in 0..20 {
            let k = 3 + (trial % 5);
            let b: Vec<Complex64> = (0..k * k)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let dense = crate::eigen::complex_radius_dense(k, &b);
            let m = ComplexTransfer::from_forward(k, b).unwrap();
            let r = spectral_radius(&m, &opts);
            assert!(
                (r.value - dense).abs() <= 1e-7 * dense.max(1e-6),
                "trial {trial}: {} vs dense {}",
                r.value,
                dense
            );
            assert!(
                r.enclosure.lo <= dense + 1e-9 && dense <= r.enclosure.hi + 1e-9,
                "trial {trial}: enclosure {:?} misses {}",
                r.enclosure,
                dense
            );
        }
    }

    #[test]
    fn gelfand_enclosure_brackets_golden_ratio() {
        let (rec, g) = golden_zero();
        let m = build_twisted(&rec, &g, &g, Complex64::new(0.0, 0.0)).unwrap();
        let r = spectral_radius(&m, &RadiusOptions::default());
        assert!(r.enclosure.contains(PHI), "{:?}", r.enclosure);
        // powers up to 128 make the sandwich reasonably tight here
        assert!(r.enclosure.width() < 0.05, "width {}", r.enclosure.width());
    }

    #[test]
    fn norm_growth_slope_matches_log_lambda() {
        let (rec, g) = golden_zero();
        let m = build_twisted(&rec, &g, &g, Complex64::new(0.0, 0.0)).unwrap();
        let growth = iterate_norm_growth(&m, 200..400).unwrap();
        assert!(
            (growth.log_rate - PHI.ln()).abs() < 1e-8,
            "slope {} vs log phi {}",
            growth.log_rate,
            PHI.ln()
        );
        assert!(growth.fit_rms < 1e-8);
    }

    /// Sweep of the closed-form radius 2|cos(u/2)| over [0.5, 3]: the sup
    /// sits at the left endpoint.
    #[test]
    fn sweep_finds_endpoint_supremum() {
        let model = MarkovModel::full_shift(2);
        let g = Potential::zero(&model);
        let psi = Potential::indicator(&model, 0).unwrap();
        let (rec, pots) = recode_potentials(&model, &[&g, &psi]).unwrap();
        let report = spectral_sweep(
            &rec,
            &pots[0],
            &pots[1],
            0.0,
            (0.5, 3.0),
            33,
            &RadiusOptions::default(),
        )
        .unwrap();
        let expect = 2.0 * (0.25f64).cos();
        assert!(
            (report.rho_hat - expect).abs() < 1e-6,
            "sup {} vs {}",
            report.rho_hat,
            expect
        );
        assert!((report.u_at_max - 0.5).abs() < 1e-12);
        assert!(report.points.len() >= 33);
    }
}
