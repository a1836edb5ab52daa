//! Subshifts of finite type presented by 0/1 transition matrices.
//!
//! A model is a finite alphabet `{0, .., k-1}` and a matrix `adj` where
//! `adj[i][j]` says the two-letter word `ij` is admissible. One-sided
//! sequences and their shift map are never materialized; everything works
//! through admissible finite words, cycles, and the weighted walk calculus on
//! the transition graph.
//!
//! ```text
//! irreducible = transition graph strongly connected
//! period      = gcd of all cycle lengths
//! primitive   = irreducible and period 1  (some power of adj is positive)
//! ```
//!
//! [`higher_block_recode`] rewrites the model on the alphabet of admissible
//! `r`-words so that potentials of memory `r + 1` become functions of single
//! recoded edges; all spectral and distributional machinery downstream runs
//! on recoded edges.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use std::collections::BTreeMap;

pub type Symbol = u8;
pub type Word = Vec<Symbol>;

/// Transition-matrix model of a subshift of finite type.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovModel {
    adj: Vec<Vec<bool>>,
    labels: Vec<String>,
}

/// Structural facts established by [`MarkovModel::validate`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModelReport {
    pub states: usize,
    pub edges: usize,
    pub irreducible: bool,
    pub period: usize,
    pub primitive: bool,
}

impl MarkovModel {
    /// Build from 0/1 rows. Rejects empty or ragged matrices and any state
    /// with no successor or no predecessor (dead symbols make the shift
    /// space smaller than the alphabet pretends).
    pub fn new(rows: Vec<Vec<u8>>) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::InvalidModel("empty transition matrix".into()));
        }
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidModel(format!(
                "transition matrix must be square ({k} rows)"
            )));
        }
        if let Some(bad) = rows
            .iter()
            .flatten()
            .find(|&&v| v != 0 && v != 1)
        {
            return Err(Error::InvalidModel(format!(
                "transition entries must be 0 or 1, found {bad}"
            )));
        }
        let adj: Vec<Vec<bool>> = rows
            .into_iter()
            .map(|r| r.into_iter().map(|v| v == 1).collect())
            .collect();
        for i in 0..k {
            if !adj[i].iter().any(|&b| b) {
                return Err(Error::InvalidModel(format!(
                    "state {i} has no outgoing transition"
                )));
            }
            if !(0..k).any(|j| adj[j][i]) {
                return Err(Error::InvalidModel(format!(
                    "state {i} has no incoming transition"
                )));
            }
        }
        let labels = default_labels(k);
        Ok(MarkovModel { adj, labels })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::InvalidModel(format!(
                "{} labels for {} states",
                labels.len(),
                self.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for l in &labels {
            if l.chars().count() != 1 {
                return Err(Error::InvalidModel(format!(
                    "label {l:?} must be a single character"
                )));
            }
            if !seen.insert(l.clone()) {
                return Err(Error::InvalidModel(format!("duplicate label {l:?}")));
            }
        }
        self.labels = labels;
        Ok(self)
    }

    /// Full shift on `k` symbols (all transitions allowed).
    pub fn full_shift(k: usize) -> Self {
        MarkovModel::new(vec![vec![1; k]; k]).expect("full shift is valid")
    }

    /// Golden-mean shift: two symbols, the word `11` forbidden.
    pub fn golden_mean() -> Self {
        MarkovModel::new(vec![vec![1, 1], vec![1, 0]]).expect("golden mean is valid")
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn allowed(&self, i: Symbol, j: Symbol) -> bool {
        self.adj[i as usize][j as usize]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().flatten().filter(|&&b| b).count()
    }

    pub fn successors(&self, i: Symbol) -> impl Iterator<Item = Symbol> + '_ {
        self.adj[i as usize]
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(j, _)| j as Symbol)
    }

    pub fn word_admissible(&self, w: &[Symbol]) -> bool {
        w.iter().all(|&s| (s as usize) < self.len())
            && w.windows(2).all(|p| self.allowed(p[0], p[1]))
    }

    /// Render a word with the model's single-character labels.
    pub fn word_string(&self, w: &[Symbol]) -> String {
        w.iter().map(|&s| self.labels[s as usize].as_str()).collect()
    }

    pub fn parse_word(&self, s: &str) -> Result<Word> {
        s.chars()
            .map(|c| {
                self.labels
                    .iter()
                    .position(|l| l.chars().next() == Some(c))
                    .map(|i| i as Symbol)
                    .ok_or_else(|| Error::InvalidModel(format!("unknown symbol {c:?} in word {s:?}")))
            })
            .collect()
    }

    /// Irreducibility, period, primitivity. Structural defects were already
    /// rejected in `new`, so this always returns a report.
    pub fn validate(&self) -> ModelReport {
        let k = self.len();
        let fwd = self.reachable(false);
        let bwd = self.reachable(true);
        let irreducible = fwd.iter().all(|&b| b) && bwd.iter().all(|&b| b);
        let period = if irreducible { self.period() } else { 0 };
        ModelReport {
            states: k,
            edges: self.edge_count(),
            irreducible,
            period,
            primitive: irreducible && period == 1,
        }
    }

    pub fn require_primitive(&self) -> Result<ModelReport> {
        let report = self.validate();
        if !report.irreducible {
            return Err(Error::NotIrreducible(
                "transition graph is not strongly connected".into(),
            ));
        }
        if !report.primitive {
            return Err(Error::NotPrimitive {
                period: report.period,
            });
        }
        Ok(report)
    }

    fn reachable(&self, transpose: bool) -> Vec<bool> {
        let k = self.len();
        let mut seen = vec![false; k];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..k {
                let edge = if transpose { self.adj[v][u] } else { self.adj[u][v] };
                if edge && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }

    /// gcd of `depth[u] + 1 - depth[v]` over edges, after a BFS layering;
    /// equals the gcd of all cycle lengths for strongly connected graphs.
    fn period(&self) -> usize {
        let k = self.len();
        let mut depth = vec![usize::MAX; k];
        let mut queue = std::collections::VecDeque::new();
        depth[0] = 0;
        queue.push_back(0usize);
        let mut g: i64 = 0;
        while let Some(u) = queue.pop_front() {
            for v in 0..k {
                if !self.adj[u][v] {
                    continue;
                }
                if depth[v] == usize::MAX {
                    depth[v] = depth[u] + 1;
                    queue.push_back(v);
                } else {
                    let diff = depth[u] as i64 + 1 - depth[v] as i64;
                    g = gcd_i64(g, diff.abs());
                }
            }
        }
        g.max(1) as usize
    }

    /// Number of admissible words of length `n`, in exact integer
    /// arithmetic. Overflow is an error, never a wrap.
    pub fn count_words(&self, n: usize) -> Result<u128> {
        match self.count_words_capped(n, u128::MAX) {
            Some(c) => Ok(c),
            None => Err(Error::Overflow {
                context: format!("count_words({n})"),
            }),
        }
    }

    /// Like `count_words` but gives up (returns `None`) as soon as the count
    /// provably exceeds `cap`. Used for budget decisions.
    pub fn count_words_capped(&self, n: usize, cap: u128) -> Option<u128> {
        let k = self.len();
        if n == 0 {
            return Some(1);
        }
        // counts[i] = number of admissible words of current length ending at i
        let mut counts = vec![1u128; k];
        for _ in 1..n {
            let mut next = vec![0u128; k];
            for i in 0..k {
                if counts[i] == 0 {
                    continue;
                }
                for j in 0..k {
                    if self.adj[i][j] {
                        next[j] = next[j].checked_add(counts[i])?;
                    }
                }
            }
            counts = next;
            let total: u128 = {
                let mut t: u128 = 0;
                for &c in &counts {
                    t = t.checked_add(c)?;
                }
                t
            };
            if total > cap {
                return None;
            }
        }
        let mut total: u128 = 0;
        for &c in &counts {
            total = total.checked_add(c)?;
        }
        if total > cap {
            None
        } else {
            Some(total)
        }
    }

    /// All admissible words of length `n`, lexicographic. Refuses to build
    /// more than `budget` words.
    pub fn enumerate_words(&self, n: usize, budget: u64) -> Result<Vec<Word>> {
        let count = self
            .count_words_capped(n, budget as u128)
            .ok_or_else(|| {
                Error::resource(
                    &format!("enumerate_words({n})"),
                    u64::MAX,
                    budget,
                    "raise the word budget or reduce n",
                )
            })?;
        if count > budget as u128 {
            return Err(Error::resource(
                &format!("enumerate_words({n})"),
                count as u64,
                budget,
                "raise the word budget or reduce n",
            ));
        }
        let mut out = Vec::with_capacity(count as usize);
        let mut word: Word = Vec::with_capacity(n);
        self.enumerate_rec(n, &mut word, &mut out);
        Ok(out)
    }

    fn enumerate_rec(&self, n: usize, word: &mut Word, out: &mut Vec<Word>) {
        if word.len() == n {
            out.push(word.clone());
            return;
        }
        for s in 0..self.len() as Symbol {
            if word.last().map_or(true, |&p| self.allowed(p, s)) {
                word.push(s);
                self.enumerate_rec(n, word, out);
                word.pop();
            }
        }
    }
}

fn default_labels(k: usize) -> Vec<String> {
    (0..k)
        .map(|i| {
            if k <= 26 {
                char::from(b'a' + i as u8).to_string()
            } else {
                format!("{i}")
            }
        })
        .collect()
}

fn gcd_i64(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd_i64(b, a % b)
    }
}

/// Prime periodic orbits of period up to `max_period`, one representative
/// per orbit (the lexicographically least rotation). The closing transition
/// `w[n-1] -> w[0]` must be admissible.
pub fn periodic_orbits(model: &MarkovModel, max_period: usize, budget: u64) -> Result<Vec<Word>> {
    let mut out = Vec::new();
    let mut visited: u64 = 0;
    for n in 1..=max_period {
        let mut word: Word = Vec::with_capacity(n);
        orbit_rec(model, n, &mut word, &mut out, &mut visited, budget)?;
    }
    Ok(out)
}

fn orbit_rec(
    model: &MarkovModel,
    n: usize,
    word: &mut Word,
    out: &mut Vec<Word>,
    visited: &mut u64,
    budget: u64,
) -> Result<()> {
    if word.len() == n {
        if model.allowed(word[n - 1], word[0]) && is_prime_necklace(word) {
            out.push(word.clone());
        }
        return Ok(());
    }
    *visited += 1;
    if *visited > budget {
        return Err(Error::resource(
            "periodic_orbits",
            *visited,
            budget,
            "reduce max_period or raise the orbit budget",
        ));
    }
    for s in 0..model.len() as Symbol {
        if word.last().map_or(true, |&p| model.allowed(p, s)) {
            // Lexicographically least rotation starts with the smallest
            // symbol; prune words starting above their own tail.
            word.push(s);
            orbit_rec(model, n, word, out, visited, budget)?;
            word.pop();
        }
    }
    Ok(())
}

/// True when `w` is aperiodic and lexicographically minimal among its
/// rotations (a prime necklace representative).
fn is_prime_necklace(w: &[Symbol]) -> bool {
    let n = w.len();
    for r in 1..n {
        let rotated = (0..n).map(|i| w[(i + r) % n]);
        match rotated.cmp(w.iter().copied()) {
            std::cmp::Ordering::Less => return false,
            std::cmp::Ordering::Equal => return false, // proper period divides n
            std::cmp::Ordering::Greater => {}
        }
    }
    true
}

/// Higher-block presentation: states are admissible `block`-words, edges are
/// admissible `(block+1)`-words. Potentials of memory `<= block + 1` become
/// functions of single edges.
#[derive(Clone, Debug)]
pub struct Recoded {
    pub base: MarkovModel,
    pub block: usize,
    pub model: MarkovModel,
    /// Recoded state id -> the base `block`-word it stands for.
    pub states: Vec<Word>,
    pub state_index: BTreeMap<Word, usize>,
    pub edges: Vec<RecodedEdge>,
    /// Outgoing / incoming edge ids per recoded state.
    pub out_edges: Vec<Vec<usize>>,
    pub in_edges: Vec<Vec<usize>>,
}

#[derive(Clone, Debug)]
pub struct RecodedEdge {
    pub from: usize,
    pub to: usize,
    /// The base `(block+1)`-word this edge reads.
    pub word: Word,
}

impl Recoded {
    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Recoded state path for a base word of length `n + block`, i.e. the
    /// sequence of `block`-windows.
    pub fn state_path(&self, base_word: &[Symbol]) -> Result<Vec<usize>> {
        if base_word.len() < self.block {
            return Err(Error::Domain(format!(
                "word of length {} is shorter than block {}",
                base_word.len(),
                self.block
            )));
        }
        base_word
            .windows(self.block)
            .map(|w| {
                self.state_index.get(w).copied().ok_or_else(|| {
                    Error::InvalidModel(format!(
                        "inadmissible block {:?} in word",
                        self.base.word_string(w)
                    ))
                })
            })
            .collect()
    }
}

pub fn higher_block_recode(model: &MarkovModel, block: usize) -> Result<Recoded> {
    if block == 0 {
        return Err(Error::Domain("block length must be >= 1".into()));
    }
    let states = model.enumerate_words(block, 1 << 22)?;
    let state_index: BTreeMap<Word, usize> = states
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, w)| (w, i))
        .collect();
    let k = states.len();
    let mut adj = vec![vec![0u8; k]; k];
    let mut edges = Vec::new();
    let mut out_edges = vec![Vec::new(); k];
    let mut in_edges = vec![Vec::new(); k];
    for (i, w) in states.iter().enumerate() {
        for s in model.successors(w[block - 1]) {
            let mut next = w[1..].to_vec();
            next.push(s);
            // `next` is admissible: suffix of an admissible word plus an
            // admissible transition.
            let j = state_index[&next];
            adj[i][j] = 1;
            let mut word = w.clone();
            word.push(s);
            let id = edges.len();
            edges.push(RecodedEdge { from: i, to: j, word });
            out_edges[i].push(id);
            in_edges[j].push(id);
        }
    }
    let recoded_model = MarkovModel::new(adj)?;
    Ok(Recoded {
        base: model.clone(),
        block,
        model: recoded_model,
        states,
        state_index,
        edges,
        out_edges,
        in_edges,
    })
}

/// Extreme average edge weights over directed cycles.
#[derive(Clone, Debug)]
pub struct CycleMeanExtremes {
    pub min: f64,
    pub max: f64,
    /// Exact values when every weight is rational.
    pub min_exact: Option<BigRational>,
    pub max_exact: Option<BigRational>,
    /// Witness cycles as state sequences (first state not repeated at end).
    pub min_cycle: Vec<usize>,
    pub max_cycle: Vec<usize>,
}

/// Karp's minimum-mean-cycle recurrence over a strongly connected graph
/// given by `edges` on `k` states. Runs in exact rational arithmetic when
/// every weight is rational, otherwise in doubles. The maximum is the
/// negated minimum over negated weights.
pub fn cycle_mean_extremes(
    k: usize,
    edges: &[(usize, usize)],
    weights: &[Scalar],
) -> Result<CycleMeanExtremes> {
    if edges.len() != weights.len() {
        return Err(Error::Domain("one weight per edge required".into()));
    }
    if k == 0 {
        return Err(Error::Domain("empty graph".into()));
    }
    let all_rational = weights.iter().all(|w| w.is_rational());
    if all_rational {
        let w: Vec<BigRational> = weights.iter().map(|s| s.exact.rat.clone()).collect();
        let neg: Vec<BigRational> = w.iter().map(|x| -x.clone()).collect();
        let (min_val, min_cycle) = karp_min::<BigRational>(k, edges, &w)?;
        let (neg_max, max_cycle) = karp_min::<BigRational>(k, edges, &neg)?;
        let max_val = -neg_max;
        Ok(CycleMeanExtremes {
            min: crate::scalar::rational_to_f64(&min_val),
            max: crate::scalar::rational_to_f64(&max_val),
            min_exact: Some(min_val),
            max_exact: Some(max_val),
            min_cycle,
            max_cycle,
        })
    } else {
        let w: Vec<f64> = weights.iter().map(|s| s.val).collect();
        let neg: Vec<f64> = w.iter().map(|x| -x).collect();
        let (min_val, min_cycle) = karp_min::<f64>(k, edges, &w)?;
        let (neg_max, max_cycle) = karp_min::<f64>(k, edges, &neg)?;
        Ok(CycleMeanExtremes {
            min: min_val,
            max: -neg_max,
            min_exact: None,
            max_exact: None,
            min_cycle,
            max_cycle,
        })
    }
}

/// Weight abstraction for Karp's recurrence.
trait KarpWeight: Clone + PartialOrd {
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn div_len(&self, len: usize) -> Self;
    fn zero() -> Self;
}

impl KarpWeight for f64 {
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn div_len(&self, len: usize) -> Self {
        self / len as f64
    }
    fn zero() -> Self {
        0.0
    }
}

impl KarpWeight for BigRational {
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn div_len(&self, len: usize) -> Self {
        self / BigRational::from_integer(BigInt::from(len))
    }
    fn zero() -> Self {
        <BigRational as Zero>::zero()
    }
}

/// Minimum mean cycle value plus a witness cycle. `dist[t][v]` is the
/// minimum weight of a walk of exactly `t` edges from state 0 to `v`;
/// Karp's theorem reads the answer off the last row.
fn karp_min<W: KarpWeight>(
    k: usize,
    edges: &[(usize, usize)],
    weights: &[W],
) -> Result<(W, Vec<usize>)> {
    let n = k;
    let mut dist: Vec<Vec<Option<W>>> = vec![vec![None; k]; n + 1];
    let mut parent: Vec<Vec<Option<usize>>> = vec![vec![None; k]; n + 1];
    dist[0][0] = Some(W::zero());
    for t in 1..=n {
        for (eid, &(u, v)) in edges.iter().enumerate() {
            if let Some(du) = dist[t - 1][u].clone() {
                let cand = du.add(&weights[eid]);
                let better = match &dist[t][v] {
                    None => true,
                    Some(cur) => cand < *cur,
                };
                if better {
                    dist[t][v] = Some(cand);
                    parent[t][v] = Some(eid);
                }
            }
        }
    }

    let mut best: Option<(W, usize)> = None; // (mean, terminal state)
    for v in 0..k {
        let Some(dn) = dist[n][v].clone() else {
            continue;
        };
        // max over t < n of (dist[n][v] - dist[t][v]) / (n - t)
        let mut vmax: Option<W> = None;
        for (t, row) in dist.iter().enumerate().take(n) {
            if let Some(dt) = row[v].clone() {
                let mean = dn.sub(&dt).div_len(n - t);
                if vmax.as_ref().map_or(true, |m| mean > *m) {
                    vmax = Some(mean);
                }
            }
        }
        if let Some(m) = vmax {
            if best.as_ref().map_or(true, |(b, _)| m < *b) {
                best = Some((m, v));
            }
        }
    }
    let (mean, terminal) = best.ok_or_else(|| {
        Error::NotIrreducible("no state reachable by a full-length walk".into())
    })?;

    // Walk parents back from (n, terminal); a repeated state closes a cycle.
    let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
    let mut path = Vec::with_capacity(n + 1);
    let mut t = n;
    let mut v = terminal;
    path.push(v);
    seen.insert(v, 0);
    let cycle = loop {
        let Some(eid) = parent[t][v] else {
            break vec![terminal]; // self-loop degenerate fallback
        };
        let (u, _) = edges[eid];
        t -= 1;
        v = u;
        if let Some(&pos) = seen.get(&v) {
            let mut cyc: Vec<usize> = path[pos..].to_vec();
            cyc.reverse();
            break cyc;
        }
        path.push(v);
        seen.insert(v, path.len() - 1);
    };
    Ok((mean, cycle))
}
