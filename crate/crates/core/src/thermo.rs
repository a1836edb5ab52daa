//! Pressure, equilibrium measures, and their derivatives.
//!
//! For a forward weight matrix `B[i][j] = a_ij e^{g(i->j)}` with Perron root
//! `lambda`, right vector `nu` (`B nu = lambda nu`) and left vector `h`
//! (`B^T h = lambda h`):
//!
//! ```text
//!   pressure        Pr(g) = log lambda
//!   Markov kernel   P[i][j] = B[i][j] nu_j / (lambda nu_i)   (row-stochastic)
//!   stationary law  pi_i = h_i nu_i                          (<h, nu> = 1)
//!   cylinder mass   m[w] = pi_{s0} P[s0 s1] ... P[s_{n-1} s_n]
//! ```
//!
//! The kernel rows are renormalized to sum to one exactly, and every entry
//! carries a conservative interval inflated by the Perron residual, so
//! cylinder masses and distribution brackets downstream stay honest about
//! eigen-solve error.
//!
//! First and second pressure derivatives in a tilt direction `psi` come from
//! the equilibrium mean and the Green-Kubo variance
//!
//! ```text
//!   d1 = sum_ij pi_i P_ij psi_ij
//!   d2 = sum_ij pi_i P_ij (psi~_ij + w_j - w_i)^2 ,
//! ```
//!
//! where `w` solves the Poisson equation `(I - P + 1 pi^T) w = P psi~` and
//! `psi~` is `psi` centered at `d1`. A Richardson finite-difference route is
//! computed alongside and returned unmerged: agreement of the two routes is
//! a checkable diagnostic, not an assumption.

use crate::error::{Error, Result};
use crate::interval::Iv;
use crate::potentials::{recode_potentials, EdgePotential, Potential};
use crate::sft::{MarkovModel, Recoded, Symbol};
use crate::transfer::{build_operator, build_tilted, perron, PerronData, TransferMatrix};

/// Topological pressure with an enclosure transported from the
/// Collatz-Wielandt interval.
#[derive(Clone, Debug)]
pub struct PressureData {
    pub value: f64,
    pub enclosure: Iv,
    pub perron: PerronData,
}

pub fn pressure(t: &TransferMatrix) -> Result<PressureData> {
    let p = perron(t)?;
    let enclosure = Iv::new(p.enclosure.lo.ln(), p.enclosure.hi.ln()).inflate(f64::EPSILON);
    Ok(PressureData {
        value: p.lambda.ln(),
        enclosure,
        perron: p,
    })
}

/// The equilibrium (Gibbs-Markov) measure of an edge potential.
#[derive(Clone, Debug)]
pub struct EquilibriumMeasure {
    k: usize,
    kernel: Vec<f64>,
    kernel_iv: Vec<Iv>,
    /// Stationary law, sums to 1.
    pub stationary: Vec<f64>,
    pub perron: PerronData,
}

impl EquilibriumMeasure {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Transition probability `P[i][j]` (zero when the edge is absent).
    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.kernel[i * self.k + j]
    }

    /// Conservative interval for `P[i][j]`.
    pub fn p_iv(&self, i: usize, j: usize) -> Iv {
        self.kernel_iv[i * self.k + j]
    }

    /// Edge flow `pi_i P[i][j]`, the measure of the 2-cylinder `[i j]`.
    pub fn edge_flow(&self, i: usize, j: usize) -> f64 {
        self.stationary[i] * self.p(i, j)
    }

    /// Stationary interval with the same inflation as the kernel.
    pub fn stationary_iv(&self, i: usize) -> Iv {
        let delta = self.inflation();
        let p = self.stationary[i];
        Iv::new((p * (1.0 - delta)).max(0.0), (p * (1.0 + delta)).min(1.0))
    }

    fn inflation(&self) -> f64 {
        4.0 * self.perron.residual + 16.0 * self.k as f64 * f64::EPSILON
    }
}

/// Equilibrium measure of the operator: kernel, intervals, stationary law.
pub fn equilibrium(t: &TransferMatrix) -> Result<EquilibriumMeasure> {
    let p = perron(t)?;
    let k = t.k();
    let nu = &p.left;
    let mut kernel = vec![0.0; k * k];
    for i in 0..k {
        let mut row_sum = 0.0;
        for j in 0..k {
            let b = t.forward(i, j);
            if b > 0.0 {
                kernel[i * k + j] = b * nu[j] / (p.lambda * nu[i]);
                row_sum += kernel[i * k + j];
            }
        }
        // Rows sum to 1 up to the eigen residual; pin them exactly so mass
        // accounting downstream telescopes.
        for j in 0..k {
            kernel[i * k + j] /= row_sum;
        }
    }
    let delta = 4.0 * p.residual + 16.0 * k as f64 * f64::EPSILON;
    let kernel_iv = kernel
        .iter()
        .map(|&q| {
            if q == 0.0 {
                Iv::point(0.0)
            } else {
                Iv::new((q * (1.0 - delta)).max(0.0), (q * (1.0 + delta)).min(1.0))
            }
        })
        .collect();
    let mut stationary: Vec<f64> = p
        .left
        .iter()
        .zip(&p.right)
        .map(|(n, h)| n * h)
        .collect();
    let total: f64 = stationary.iter().sum();
    stationary.iter_mut().for_each(|x| *x /= total);
    Ok(EquilibriumMeasure {
        k,
        kernel,
        kernel_iv,
        stationary,
        perron: p,
    })
}

/// Equilibrium mean of an edge potential: `sum_e pi_from P_e psi_e`.
pub fn edge_mean(rec: &Recoded, em: &EquilibriumMeasure, psi: &EdgePotential) -> f64 {
    rec.edges
        .iter()
        .zip(&psi.values)
        .map(|(e, v)| em.edge_flow(e.from, e.to) * v.val)
        .sum()
}

/// Kolmogorov-Sinai entropy of the equilibrium measure:
/// `-sum_ij pi_i P_ij log P_ij`.
pub fn entropy(em: &EquilibriumMeasure) -> f64 {
    let k = em.k();
    let mut h = 0.0;
    for i in 0..k {
        for j in 0..k {
            let p = em.p(i, j);
            if p > 0.0 {
                h -= em.stationary[i] * p * p.ln();
            }
        }
    }
    h
}

/// First and second directional pressure derivatives, each computed two
/// independent ways (spectral/Green-Kubo and Richardson finite differences).
#[derive(Clone, Debug)]
pub struct PressureDerivatives {
    /// Equilibrium mean of `psi` under the tilted measure.
    pub d1: f64,
    /// Asymptotic variance (Green-Kubo via the Poisson equation); this is
    /// `sigma^2` of the CLT for `psi` under the tilted equilibrium.
    pub d2: f64,
    /// Five-point Richardson estimates of the same quantities.
    pub fd_d1: f64,
    pub fd_d2: f64,
    pub fd_step: f64,
}

/// Spectral route only: `(d1, d2)` of `xi -> Pr(g + xi psi)` at `xi`,
/// via the tilted equilibrium mean and the Poisson-equation variance.
pub fn tilt_moments(
    rec: &Recoded,
    g: &EdgePotential,
    psi: &EdgePotential,
    xi: f64,
) -> Result<(f64, f64)> {
    let t = build_tilted(rec, g, psi, xi)?;
    let em = equilibrium(&t)?;
    let k = em.k();
    let d1 = edge_mean(rec, &em, psi);

    // Poisson equation (I - P + 1 pi^T) w = r with r_i = sum_j P_ij psi~_ij.
    use nalgebra::{DMatrix, DVector};
    let mut a = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let delta = if i == j { 1.0 } else { 0.0 };
            a[(i, j)] = delta - em.p(i, j) + em.stationary[j];
        }
    }
    let mut r = vec![0.0; k];
    for (e, v) in rec.edges.iter().zip(&psi.values) {
        r[e.from] += em.p(e.from, e.to) * (v.val - d1);
    }
    let w = crate::eigen::lu_solve(&a, &DVector::from_row_slice(&r)).ok_or_else(|| {
        Error::Degenerate("Poisson equation singular; kernel not ergodic".into())
    })?;
    let mut d2 = 0.0;
    for (e, v) in rec.edges.iter().zip(&psi.values) {
        let inc = (v.val - d1) + w[e.to] - w[e.from];
        d2 += em.edge_flow(e.from, e.to) * inc * inc;
    }
    Ok((d1, d2))
}

pub fn pressure_derivatives(
    rec: &Recoded,
    g: &EdgePotential,
    psi: &EdgePotential,
    xi: f64,
) -> Result<PressureDerivatives> {
    let (d1, d2) = tilt_moments(rec, g, psi, xi)?;

    // Independent route: five-point Richardson differences of the pressure.
    let h = 1e-3 * xi.abs().max(1.0);
    let pr = |s: f64| -> Result<f64> {
        Ok(pressure(&build_tilted(rec, g, psi, s)?)?.value)
    };
    let p0 = pr(xi)?;
    let p1 = pr(xi + h)?;
    let m1 = pr(xi - h)?;
    let p2 = pr(xi + 2.0 * h)?;
    let m2 = pr(xi - 2.0 * h)?;
    let fd_d1 = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
    let fd_d2 = (-p2 + 16.0 * p1 - 30.0 * p0 + 16.0 * m1 - m2) / (12.0 * h * h);

    Ok(PressureDerivatives {
        d1,
        d2,
        fd_d1,
        fd_d2,
        fd_step: h,
    })
}

/// Pressure of the tilted operator `Pr(g + xi psi)` as a bare number.
pub fn tilted_pressure(
    rec: &Recoded,
    g: &EdgePotential,
    psi: &EdgePotential,
    xi: f64,
) -> Result<f64> {
    Ok(pressure(&build_tilted(rec, g, psi, xi)?)?.value)
}

/// Sample `xi -> Pr(g + xi psi)` on a grid.
pub fn pressure_curve(
    rec: &Recoded,
    g: &EdgePotential,
    psi: &EdgePotential,
    xis: &[f64],
) -> Result<Vec<(f64, f64)>> {
    xis.iter()
        .map(|&xi| Ok((xi, pressure(&build_tilted(rec, g, psi, xi)?)?.value)))
        .collect()
}

/// Interval mass of the base-word cylinder `[w]` under the equilibrium
/// measure: `pi_{s0} prod P[s_k s_{k+1}]` along the recoded state path.
pub fn cylinder_measure(
    rec: &Recoded,
    em: &EquilibriumMeasure,
    word: &[Symbol],
) -> Result<Iv> {
    let path = rec.state_path(word)?;
    let mut m = em.stationary_iv(path[0]);
    for pair in path.windows(2) {
        let step = em.p_iv(pair[0], pair[1]);
        if step.hi == 0.0 {
            return Ok(Iv::point(0.0));
        }
        m = m.mul_nonneg(step);
    }
    Ok(m)
}

/// A jointly recoded, pressure- and mean-normalized pair ready for rate
/// and distribution work.
#[derive(Clone, Debug)]
pub struct NormalizedSystem {
    pub model: MarkovModel,
    pub rec: Recoded,
    /// Edge values of `phi~ = phi - Pr(phi)`; `Pr(phi~) = 0`.
    pub phi: EdgePotential,
    /// Edge values of `psi~ = psi - mean`; equilibrium mean is 0.
    pub psi: EdgePotential,
    pub phi_potential: Potential,
    pub psi_potential: Potential,
    /// `Pr(phi_raw)`.
    pub pressure_shift: f64,
    /// `∫ psi_raw dm_phi`.
    pub mean_shift: f64,
    /// Equilibrium measure of `phi~` (identical kernel to `phi_raw`).
    pub equilibrium: EquilibriumMeasure,
}

/// Normalize `(phi, psi)` so the working pressure is 0 and the working mean
/// of `psi` is 0. Rate functions and window asymptotics are invariant under
/// these shifts; performing them first keeps exponentials well scaled.
pub fn normalize_pair(
    model: &MarkovModel,
    phi: &Potential,
    psi: &Potential,
) -> Result<NormalizedSystem> {
    let (rec, pots) = recode_potentials(model, &[phi, psi])?;
    let t = build_operator(&rec, &pots[0])?;
    let pr = pressure(&t)?;
    let em = equilibrium(&t)?;
    let mean = edge_mean(&rec, &em, &pots[1]);

    let phi_potential = phi.shift_f64(pr.value);
    let psi_potential = psi.shift_f64(mean);
    let phi_edges = EdgePotential {
        values: rec
            .edges
            .iter()
            .map(|e| phi_potential.eval(&e.word).cloned())
            .collect::<Result<_>>()?,
    };
    let psi_edges = EdgePotential {
        values: rec
            .edges
            .iter()
            .map(|e| psi_potential.eval(&e.word).cloned())
            .collect::<Result<_>>()?,
    };
    Ok(NormalizedSystem {
        model: model.clone(),
        rec,
        phi: phi_edges,
        psi: psi_edges,
        phi_potential,
        psi_potential,
        pressure_shift: pr.value,
        mean_shift: mean,
        equilibrium: em,
    })
}
