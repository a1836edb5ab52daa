//! Locally constant potentials on a subshift and their basic calculus.
//!
//! A potential of memory `m` assigns a scalar to every admissible `m`-word;
//! as a function on one-sided sequences it reads the first `m` symbols. The
//! module provides:
//!
//! * Birkhoff sums along finite words and along periodic orbits (cyclic
//!   windows), in compensated floating point with the exact form carried
//!   alongside.
//! * Joint recoding of several potentials to edge functions on a common
//!   higher-block presentation.
//! * A lattice detector: does there exist `(a, c)` with `c > 0` such that
//!   every periodic-orbit sum satisfies `S - a n ∈ c Z`? The test reduces
//!   drift-free pairwise commutators `S_i n_j - S_j n_i` with a real
//!   Euclidean algorithm (continued-fraction commensurability), then solves
//!   the drift congruence and verifies every orbit. The verdict records the
//!   probed period range and resolution: a `no-lattice-found` answer is
//!   evidence at that resolution, not a proof.
//! * A Lipschitz-to-minimum diagnostic under the symbolic metric
//!   `d(x, y) = 2^-(length of common prefix)`.

use crate::error::{Error, Result};
use crate::scalar::{rational_to_f64, Scalar};
use crate::sft::{higher_block_recode, periodic_orbits, MarkovModel, Recoded, Symbol, Word};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use std::collections::BTreeMap;

/// Scalar-valued potential reading the first `memory` symbols.
#[derive(Clone, Debug)]
pub struct Potential {
    memory: usize,
    values: BTreeMap<Word, Scalar>,
}

impl Potential {
    /// Build from a value table; the table must cover exactly the admissible
    /// `memory`-words of the model.
    pub fn from_table(
        model: &MarkovModel,
        memory: usize,
        values: BTreeMap<Word, Scalar>,
    ) -> Result<Self> {
        if memory == 0 {
            return Err(Error::BadPotential("memory must be >= 1".into()));
        }
        let words = model.enumerate_words(memory, 1 << 22)?;
        for w in &words {
            if !values.contains_key(w) {
                return Err(Error::BadPotential(format!(
                    "missing value for admissible word {:?}",
                    model.word_string(w)
                )));
            }
        }
        if values.len() != words.len() {
            let extra = values
                .keys()
                .find(|w| !model.word_admissible(w) || w.len() != memory)
                .map(|w| model.word_string(w))
                .unwrap_or_else(|| "?".into());
            return Err(Error::BadPotential(format!(
                "table has {} entries for {} admissible words (e.g. inadmissible {:?})",
                values.len(),
                words.len(),
                extra
            )));
        }
        Ok(Potential { memory, values })
    }

    pub fn constant(model: &MarkovModel, value: Scalar) -> Self {
        let values = model
            .enumerate_words(1, 1 << 22)
            .expect("alphabet enumeration")
            .into_iter()
            .map(|w| (w, value.clone()))
            .collect();
        Potential { memory: 1, values }
    }

    pub fn zero(model: &MarkovModel) -> Self {
        Potential::constant(model, Scalar::zero())
    }

    /// Indicator of the 1-cylinder `[symbol]`.
    pub fn indicator(model: &MarkovModel, symbol: Symbol) -> Result<Self> {
        if symbol as usize >= model.len() {
            return Err(Error::BadPotential(format!("no symbol {symbol}")));
        }
        let values = model
            .enumerate_words(1, 1 << 22)?
            .into_iter()
            .map(|w| {
                let v = if w[0] == symbol {
                    Scalar::from_integer(1)
                } else {
                    Scalar::zero()
                };
                (w, v)
            })
            .collect();
        Ok(Potential { memory: 1, values })
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn values(&self) -> &BTreeMap<Word, Scalar> {
        &self.values
    }

    /// Value on the `memory`-prefix of `w`.
    pub fn eval(&self, w: &[Symbol]) -> Result<&Scalar> {
        if w.len() < self.memory {
            return Err(Error::Domain(format!(
                "window of length {} shorter than memory {}",
                w.len(),
                self.memory
            )));
        }
        self.values.get(&w[..self.memory]).ok_or_else(|| {
            Error::BadPotential(format!("no value for window {:?}", &w[..self.memory]))
        })
    }

    /// `self - c`, with `c` treated as an exact dyadic rational.
    pub fn shift_f64(&self, c: f64) -> Potential {
        Potential {
            memory: self.memory,
            values: self
                .values
                .iter()
                .map(|(w, v)| (w.clone(), v.shift_f64(-c)))
                .collect(),
        }
    }

    /// Pointwise exact product with a scalar factor (fails only when both
    /// the factor and a value are irrational).
    pub fn scale(&self, factor: &Scalar) -> Result<Potential> {
        let values = self
            .values
            .iter()
            .map(|(w, v)| Ok((w.clone(), v.mul(factor)?)))
            .collect::<Result<_>>()?;
        Ok(Potential {
            memory: self.memory,
            values,
        })
    }

    /// Pointwise exact sum; potentials may have different memories.
    pub fn add(&self, model: &MarkovModel, other: &Potential) -> Result<Potential> {
        let memory = self.memory.max(other.memory);
        let words = model.enumerate_words(memory, 1 << 22)?;
        let values = words
            .into_iter()
            .map(|w| {
                let v = self.eval(&w)?.add(other.eval(&w)?);
                Ok((w, v))
            })
            .collect::<Result<_>>()?;
        Ok(Potential { memory, values })
    }

    pub fn min_value(&self) -> f64 {
        self.values.values().map(|s| s.val).fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .values()
            .map(|s| s.val)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_rational(&self) -> bool {
        self.values.values().all(|s| s.is_rational())
    }
}

/// Birkhoff sum of `pot` along `word`: the sum of the potential over all
/// `len - memory + 1` windows. Compensated in floating point; exact form
/// accumulated alongside.
pub fn birkhoff_sum(pot: &Potential, word: &[Symbol]) -> Result<Scalar> {
    if word.len() < pot.memory() {
        return Err(Error::Domain(format!(
            "word of length {} supports no window of memory {}",
            word.len(),
            pot.memory()
        )));
    }
    let mut exact = crate::scalar::Exact::zero();
    let mut sum = 0.0f64;
    let mut comp = 0.0f64; // Kahan compensation
    for w in word.windows(pot.memory()) {
        let v = pot.eval(w)?;
        exact = exact.add(&v.exact);
        let y = v.val - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    let mut s = Scalar::from_exact(exact);
    s.val = sum; // compensated value is the representative
    Ok(s)
}

/// Birkhoff sum over one full period of the periodic sequence `(word)^∞`:
/// windows wrap around cyclically, one per position.
pub fn orbit_sum(pot: &Potential, word: &[Symbol]) -> Result<Scalar> {
    let n = word.len();
    let m = pot.memory();
    let mut extended = word.to_vec();
    for i in 0..m.saturating_sub(1) {
        extended.push(word[i % n]);
    }
    let mut exact = crate::scalar::Exact::zero();
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for i in 0..n {
        let v = pot.eval(&extended[i..i + m])?;
        exact = exact.add(&v.exact);
        let y = v.val - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    let mut s = Scalar::from_exact(exact);
    s.val = sum;
    Ok(s)
}

/// A potential pushed onto the edges of a higher-block presentation:
/// one scalar per recoded edge.
#[derive(Clone, Debug)]
pub struct EdgePotential {
    pub values: Vec<Scalar>,
}

/// Recode `model` at a block length that turns every listed potential into
/// an edge function, and push the potentials onto the edges.
pub fn recode_potentials(
    model: &MarkovModel,
    pots: &[&Potential],
) -> Result<(Recoded, Vec<EdgePotential>)> {
    let max_mem = pots.iter().map(|p| p.memory()).max().unwrap_or(1);
    let block = max_mem.saturating_sub(1).max(1);
    let rec = higher_block_recode(model, block)?;
    let edge_pots = pots
        .iter()
        .map(|p| {
            let values = rec
                .edges
                .iter()
                .map(|e| p.eval(&e.word).cloned())
                .collect::<Result<Vec<_>>>()?;
            Ok(EdgePotential { values })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((rec, edge_pots))
}

/// Outcome of the periodic-orbit lattice test.
#[derive(Clone, Debug, PartialEq)]
pub enum LatticeKind {
    /// Every tested orbit satisfies `S - a n ∈ c Z` within the residual.
    Lattice { a: f64, c: f64 },
    /// No `(a, c)` with `c >= resolution` fits the tested orbits.
    NoLatticeFound,
}

#[derive(Clone, Debug)]
pub struct LatticeVerdict {
    pub kind: LatticeKind,
    pub max_period: usize,
    pub resolution: f64,
    pub orbit_count: usize,
    /// Largest `|S - a n - c round((S - a n)/c)|` over tested orbits
    /// (zero when the exact rational path ran).
    pub max_residual: f64,
    /// All commutators vanished: psi is cohomologous to a constant and
    /// every span works; `c` is reported as 1 by convention.
    pub degenerate_constant: bool,
    /// Exact arithmetic was used end to end.
    pub exact: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct LatticeOptions {
    pub max_period: usize,
    pub resolution: f64,
    pub orbit_budget: u64,
}

impl Default for LatticeOptions {
    fn default() -> Self {
        LatticeOptions {
            max_period: 10,
            resolution: 1e-6,
            orbit_budget: 2_000_000,
        }
    }
}

/// Search for a lattice representation of `psi` over periodic orbits.
pub fn lattice_check(
    model: &MarkovModel,
    psi: &Potential,
    opts: LatticeOptions,
) -> Result<LatticeVerdict> {
    let report = model.validate();
    if !report.irreducible {
        return Err(Error::NotIrreducible(
            "lattice test needs a strongly connected model".into(),
        ));
    }
    let orbits = periodic_orbits(model, opts.max_period, opts.orbit_budget)?;
    if orbits.is_empty() {
        return Err(Error::Domain("no periodic orbits up to max_period".into()));
    }
    let sums: Vec<(usize, Scalar)> = orbits
        .iter()
        .map(|w| Ok((w.len(), orbit_sum(psi, w)?)))
        .collect::<Result<Vec<_>>>()?;

    if psi.is_rational() {
        Ok(lattice_exact(&sums, &opts))
    } else {
        Ok(lattice_float(&sums, &opts))
    }
}

/// Exact path: orbit sums are rationals, the gcd and drift solve are exact.
fn lattice_exact(sums: &[(usize, Scalar)], opts: &LatticeOptions) -> LatticeVerdict {
    let vals: Vec<(BigInt, BigRational)> = sums
        .iter()
        .map(|(n, s)| (BigInt::from(*n), s.exact.rat.clone()))
        .collect();

    // Drift-free commutators S_i n_j - S_j n_i against a reference plus a
    // dense block of small-period pairs.
    let mut g = BigRational::zero();
    let dense = vals.len().min(64);
    for i in 0..vals.len() {
        let (nj, sj) = &vals[0];
        let d = &vals[i].1 * nj - sj * &vals[i].0;
        g = rational_gcd(&g, &d);
    }
    for i in 0..dense {
        for j in (i + 1)..dense {
            let d = &vals[i].1 * &vals[j].0 - &vals[j].1 * &vals[i].0;
            g = rational_gcd(&g, &d);
        }
    }

    if g.is_zero() {
        // psi is cohomologous to the constant S_1/n_1.
        let a = &vals[0].1 / BigRational::from_integer(vals[0].0.clone());
        return LatticeVerdict {
            kind: LatticeKind::Lattice {
                a: rational_to_f64(&a),
                c: 1.0,
            },
            max_period: opts.max_period,
            resolution: opts.resolution,
            orbit_count: sums.len(),
            max_residual: 0.0,
            degenerate_constant: true,
            exact: true,
        };
    }

    // Maximal candidate first: c = g/m, drift from the shortest orbit.
    let (n1, s1) = shortest(&vals);
    for m in 1..=256u32 {
        let c = &g / BigRational::from_integer(BigInt::from(m));
        if rational_to_f64(&c) < opts.resolution {
            break;
        }
        for k1 in 0..n1_usize(&n1) {
            let a = (&s1 - &c * BigRational::from_integer(BigInt::from(k1)))
                / BigRational::from_integer(n1.clone());
            if vals.iter().all(|(n, s)| {
                let r = s - &a * BigRational::from_integer(n.clone());
                (&r / &c).is_integer()
            }) {
                // The drift is defined modulo the span; report it in [0, c).
                let a = &a - &c * (&a / &c).floor();
                return LatticeVerdict {
                    kind: LatticeKind::Lattice {
                        a: rational_to_f64(&a),
                        c: rational_to_f64(&c),
                    },
                    max_period: opts.max_period,
                    resolution: opts.resolution,
                    orbit_count: sums.len(),
                    max_residual: 0.0,
                    degenerate_constant: false,
                    exact: true,
                };
            }
        }
    }
    LatticeVerdict {
        kind: LatticeKind::NoLatticeFound,
        max_period: opts.max_period,
        resolution: opts.resolution,
        orbit_count: sums.len(),
        max_residual: 0.0,
        degenerate_constant: false,
        exact: true,
    }
}

/// Floating path: Euclidean reduction of commutators with a tolerance tied
/// to the requested resolution.
fn lattice_float(sums: &[(usize, Scalar)], opts: &LatticeOptions) -> LatticeVerdict {
    let vals: Vec<(f64, f64)> = sums
        .iter()
        .map(|(n, s)| (*n as f64, s.val))
        .collect();
    let scale = vals
        .iter()
        .map(|(n, s)| s.abs().max(*n))
        .fold(1.0f64, f64::max);
    let tol = (opts.resolution / 64.0).max(scale * 1e-12);

    let mut g = 0.0f64;
    let dense = vals.len().min(64);
    let (n1, s1) = vals[0];
    for &(n, s) in &vals {
        g = real_gcd(g, (s * n1 - s1 * n).abs(), tol);
    }
    for i in 0..dense {
        for j in (i + 1)..dense {
            let d = (vals[i].1 * vals[j].0 - vals[j].1 * vals[i].0).abs();
            g = real_gcd(g, d, tol);
        }
    }

    let verify_tol = tol * 16.0;
    if g < tol * 2.0 {
        // All commutators vanish within tolerance: constant-like.
        let a = s1 / n1;
        let residual = vals
            .iter()
            .map(|(n, s)| (s - a * n).abs())
            .fold(0.0, f64::max);
        if residual <= verify_tol {
            return LatticeVerdict {
                kind: LatticeKind::Lattice { a, c: 1.0 },
                max_period: opts.max_period,
                resolution: opts.resolution,
                orbit_count: sums.len(),
                max_residual: residual,
                degenerate_constant: true,
                exact: false,
            };
        }
        return no_lattice(opts, sums.len());
    }

    let (n1i, s1f) = shortest_f(&vals);
    for m in 1..=256u32 {
        let c = g / m as f64;
        if c < opts.resolution {
            break;
        }
        for k1 in 0..n1i {
            let a = (s1f - c * k1 as f64) / n1i as f64;
            let residual = vals
                .iter()
                .map(|(n, s)| {
                    let r = s - a * n;
                    (r - c * (r / c).round()).abs()
                })
                .fold(0.0, f64::max);
            if residual <= verify_tol {
                let a = a - c * (a / c).floor();
                return LatticeVerdict {
                    kind: LatticeKind::Lattice { a, c },
                    max_period: opts.max_period,
                    resolution: opts.resolution,
                    orbit_count: sums.len(),
                    max_residual: residual,
                    degenerate_constant: false,
                    exact: false,
                };
            }
        }
    }
    no_lattice(opts, sums.len())
}

fn no_lattice(opts: &LatticeOptions, orbit_count: usize) -> LatticeVerdict {
    LatticeVerdict {
        kind: LatticeKind::NoLatticeFound,
        max_period: opts.max_period,
        resolution: opts.resolution,
        orbit_count,
        max_residual: f64::NAN,
        degenerate_constant: false,
        exact: false,
    }
}

fn shortest(vals: &[(BigInt, BigRational)]) -> (BigInt, BigRational) {
    vals.iter()
        .min_by(|a, b| a.0.cmp(&b.0))
        .map(|(n, s)| (n.clone(), s.clone()))
        .expect("nonempty")
}

fn n1_usize(n: &BigInt) -> u32 {
    use num_traits::ToPrimitive;
    n.to_u32().unwrap_or(u32::MAX).min(1 << 16)
}

fn shortest_f(vals: &[(f64, f64)]) -> (u32, f64) {
    let (n, s) = vals
        .iter()
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .expect("nonempty");
    (*n as u32, *s)
}

/// gcd of rationals: gcd(p/q, r/s) = gcd(p s, r q) / (q s).
fn rational_gcd(a: &BigRational, b: &BigRational) -> BigRational {
    if a.is_zero() {
        return b.abs();
    }
    if b.is_zero() {
        return a.abs();
    }
    let p = a.numer().abs();
    let q = a.denom().abs();
    let r = b.numer().abs();
    let s = b.denom().abs();
    BigRational::new((&p * &s).gcd(&(&r * &q)), &q * &s)
}

/// Euclid on nonnegative reals, stopping below `tol`.
fn real_gcd(a: f64, b: f64, tol: f64) -> f64 {
    let (mut a, mut b) = (a.abs().max(b.abs()), a.abs().min(b.abs()));
    while b > tol {
        let r = a - b * (a / b).round();
        a = b;
        b = r.abs();
    }
    a
}

/// Lipschitz-to-minimum diagnostic for a potential under the symbolic
/// metric `d(x, y) = 2^-(common prefix length)`.
#[derive(Clone, Debug)]
pub struct RatioReport {
    /// max |v(w) - v(w')| / d(w, w') over admissible word pairs.
    pub lip: f64,
    /// min |v| over the table.
    pub min_abs: f64,
    /// lip / min_abs (infinite when min_abs = 0).
    pub ratio: f64,
    /// The metric convention baked into `lip`.
    pub metric: &'static str,
}

pub const SYMBOLIC_METRIC: &str = "d(x,y) = 2^-(length of common prefix)";

pub fn lip_ratio(pot: &Potential) -> RatioReport {
    let words: Vec<(&Word, f64)> = pot.values().iter().map(|(w, s)| (w, s.val)).collect();
    let mut lip = 0.0f64;
    for i in 0..words.len() {
        for j in (i + 1)..words.len() {
            let (wi, vi) = words[i];
            let (wj, vj) = words[j];
            let prefix = wi
                .iter()
                .zip(wj.iter())
                .take_while(|(a, b)| a == b)
                .count();
            if prefix == wi.len() {
                continue; // identical windows
            }
            let d = (2.0f64).powi(-(prefix as i32));
            lip = lip.max((vi - vj).abs() / d);
        }
    }
    let min_abs = words
        .iter()
        .map(|(_, v)| v.abs())
        .fold(f64::INFINITY, f64::min);
    let ratio = if min_abs > 0.0 { lip / min_abs } else { f64::INFINITY };
    RatioReport {
        lip,
        min_abs,
        ratio,
        metric: SYMBOLIC_METRIC,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(model: &MarkovModel, memory: usize, vals: &[(&str, &str)]) -> Potential {
        let values = vals
            .iter()
            .map(|(w, v)| {
                (
                    model.parse_word(w).unwrap(),
                    Scalar::parse(v).unwrap(),
                )
            })
            .collect();
        Potential::from_table(model, memory, values).unwrap()
    }

    #[test]
    fn table_validation() {
        let golden = MarkovModel::golden_mean();
        // missing word
        let partial: BTreeMap<Word, Scalar> =
            [(golden.parse_word("a").unwrap(), Scalar::zero())].into();
        assert!(Potential::from_table(&golden, 1, partial).is_err());
        // inadmissible word bb
        let mut values: BTreeMap<Word, Scalar> = BTreeMap::new();
        for w in ["aa", "ab", "ba", "bb"] {
            values.insert(golden.parse_word(w).unwrap(), Scalar::zero());
        }
        assert!(Potential::from_table(&golden, 2, values).is_err());
    }

    /// Oracle: Birkhoff sums spelled out by hand for a memory-2 table.
    #[test]
    fn birkhoff_sums_by_hand() {
        let golden = MarkovModel::golden_mean();
        let pot = table(
            &golden,
            2,
            &[("aa", "1"), ("ab", "1/2"), ("ba", "-1")],
        );
        // word aabaa: windows aa, ab, ba, aa -> 1 + 1/2 - 1 + 1 = 3/2
        let w = golden.parse_word("aabaa").unwrap();
        let s = birkhoff_sum(&pot, &w).unwrap();
        assert_eq!(s.canonical(), "3/2");
        assert!((s.val - 1.5).abs() < 1e-15);
        // too short
        assert!(birkhoff_sum(&pot, &golden.parse_word("a").unwrap()).is_err());
    }

    /// Cocycle property S_{n+k}(x) = S_n(x) + S_k(sigma^n x) on exact forms.
    #[test]
    fn birkhoff_cocycle() {
        let golden = MarkovModel::golden_mean();
        let pot = table(&golden, 2, &[("aa", "1/3"), ("ab", "sqrt2"), ("ba", "-2")]);
        let w = golden.parse_word("aabaabab").unwrap();
        let m = pot.memory();
        for split in 1..(w.len() - m) {
            let total = birkhoff_sum(&pot, &w).unwrap();
            let left = birkhoff_sum(&pot, &w[..split + m - 1]).unwrap();
            let right = birkhoff_sum(&pot, &w[split..]).unwrap();
            assert_eq!(
                total.exact,
                left.exact.add(&right.exact),
                "cocycle split at {split}"
            );
        }
    }

    #[test]
    fn orbit_sum_wraps() {
        let golden = MarkovModel::golden_mean();
        let pot = table(&golden, 2, &[("aa", "1"), ("ab", "10"), ("ba", "100")]);
        // orbit ab: windows ab, ba -> 110
        let s = orbit_sum(&pot, &golden.parse_word("ab").unwrap()).unwrap();
        assert_eq!(s.canonical(), "110");
        // orbit a: window aa -> 1
        let s = orbit_sum(&pot, &golden.parse_word("a").unwrap()).unwrap();
        assert_eq!(s.canonical(), "1");
    }

    #[test]
    fn recode_pushes_values_onto_edges() {
        let golden = MarkovModel::golden_mean();
        let phi = Potential::zero(&golden);
        let psi = table(&golden, 2, &[("aa", "1"), ("ab", "sqrt2"), ("ba", "0")]);
        let (rec, pots) = recode_potentials(&golden, &[&phi, &psi]).unwrap();
        assert_eq!(rec.block, 1);
        assert_eq!(rec.edge_count(), 3);
        for (e, v) in rec.edges.iter().zip(&pots[1].values) {
            let expect = psi.eval(&e.word).unwrap();
            assert_eq!(v.exact, expect.exact);
        }
        // memory-3 potential forces block 2
        let deep = table(
            &golden,
            3,
            &[("aaa", "0"), ("aab", "1"), ("aba", "2"), ("baa", "3"), ("bab", "4")],
        );
        let (rec3, _) = recode_potentials(&golden, &[&deep]).unwrap();
        assert_eq!(rec3.block, 2);
        assert_eq!(rec3.state_count(), 3);
    }

    /// Integer-valued psi: lattice with a = 0 and maximal span c = 1,
    /// solved in exact arithmetic.
    #[test]
    fn integer_indicator_is_lattice() {
        let full = MarkovModel::full_shift(2);
        let psi = Potential::indicator(&full, 0).unwrap();
        let v = lattice_check(&full, &psi, LatticeOptions::default()).unwrap();
        assert!(v.exact);
        match v.kind {
            LatticeKind::Lattice { a, c } => {
                assert_eq!(a, 0.0);
                assert_eq!(c, 1.0);
            }
            _ => panic!("indicator must be lattice"),
        }
        assert_eq!(v.max_residual, 0.0);
    }

    /// Constant psi: every orbit sum is beta * n, commutators vanish.
    #[test]
    fn constant_is_degenerate_lattice() {
        let full = MarkovModel::full_shift(2);
        let psi = Potential::constant(&full, Scalar::parse("3/7").unwrap());
        let v = lattice_check(&full, &psi, LatticeOptions::default()).unwrap();
        assert!(v.degenerate_constant);
        match v.kind {
            LatticeKind::Lattice { a, .. } => {
                assert!((a - 3.0 / 7.0).abs() < 1e-15);
            }
            _ => panic!("constant must be lattice"),
        }
    }

    /// Half-integer shift: values {3/2, 1/2} on the full 2-shift satisfy
    /// S - n/2 ∈ Z, i.e. lattice with drift 1/2 and span 1.
    #[test]
    fn drifted_integer_lattice() {
        let full = MarkovModel::full_shift(2);
        let psi = table(&full, 1, &[("a", "3/2"), ("b", "1/2")]);
        let v = lattice_check(&full, &psi, LatticeOptions::default()).unwrap();
        match v.kind {
            LatticeKind::Lattice { a, c } => {
                assert!((a - 0.5).abs() < 1e-12, "drift {a} (canonical in [0, c))");
                assert_eq!(c, 1.0);
            }
            _ => panic!("expected lattice"),
        }
    }

    /// The golden-mean two-generator trap: memory-1 values {1, sqrt2, 0}
    /// ARE lattice with span c = 2 - sqrt2 because the cycle space has rank
    /// 2 and the drift absorbs one generator: an orbit with k b-symbols in
    /// n steps sums to (n - 2k) + k sqrt2 = n - k(2 - sqrt2). The detector
    /// must find it (drift 1 reported canonically as 1 - c = sqrt2 - 1).
    #[test]
    fn rank_two_cycle_space_is_lattice() {
        let golden = MarkovModel::golden_mean();
        let psi = table(&golden, 2, &[("aa", "1"), ("ab", "sqrt2"), ("ba", "0")]);
        let v = lattice_check(&golden, &psi, LatticeOptions::default()).unwrap();
        match v.kind {
            LatticeKind::Lattice { a, c } => {
                let expect_c = 2.0 - std::f64::consts::SQRT_2;
                let expect_a = std::f64::consts::SQRT_2 - 1.0;
                assert!((a - expect_a).abs() < 1e-9, "drift {a} vs {expect_a}");
                assert!((c - expect_c).abs() < 1e-9, "span {c} vs {expect_c}");
            }
            _ => panic!("rank-2 example must be lattice"),
        }
    }

    /// Memory-2 golden-mean potential with rank-3 cycle space and an
    /// irrational generator: genuinely non-lattice.
    #[test]
    fn rank_three_irrational_is_not_lattice() {
        let golden = MarkovModel::golden_mean();
        let psi = table(
            &golden,
            3,
            &[
                ("aaa", "1"),
                ("aab", "sqrt2"),
                ("aba", "0"),
                ("baa", "0"),
                ("bab", "0"),
            ],
        );
        let v = lattice_check(&golden, &psi, LatticeOptions::default()).unwrap();
        assert_eq!(v.kind, LatticeKind::NoLatticeFound);
    }

    #[test]
    fn lip_ratio_two_values_memory_one() {
        let full = MarkovModel::full_shift(2);
        let psi = table(&full, 1, &[("a", "11/10"), ("b", "1")]);
        let r = lip_ratio(&psi);
        // words a, b share no prefix: d = 1, |Δ| = 1/10
        assert!((r.lip - 0.1).abs() < 1e-12);
        assert!((r.min_abs - 1.0).abs() < 1e-15);
        assert!((r.ratio - 0.1).abs() < 1e-12);
        assert_eq!(r.metric, SYMBOLIC_METRIC);
    }

    #[test]
    fn lip_ratio_weights_by_prefix_depth() {
        let full = MarkovModel::full_shift(2);
        let psi = table(&full, 2, &[("aa", "1"), ("ab", "2"), ("ba", "1"), ("bb", "1")]);
        let r = lip_ratio(&psi);
        // aa vs ab share prefix length 1: |Δ| = 1 over d = 1/2 -> lip 2
        assert!((r.lip - 2.0).abs() < 1e-12);
    }
}
