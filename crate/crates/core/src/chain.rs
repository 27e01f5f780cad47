//! Loop-free Markov chains on a finite window.
//!
//! A chain lives on an ordered list of states with a substochastic transition
//! table; the row-sum deficit of every state is the probability of leaving the
//! window for the absorbing final state, and the deficit of the initial
//! distribution is the probability that the trajectory never enters the window.
//! Loop-freeness on a finite window means the support digraph is acyclic, so the
//! transition matrix is nilpotent and every trajectory is a finite set of states.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row sums and initial mass may exceed one by at most this much.
pub const PROB_TOLERANCE: f64 = 1e-9;

/// Largest window for which dense hit matrices and kernels are built.
pub const MAX_DENSE_STATES: usize = 8192;

/// Opaque state identifier. Integers and strings are both accepted in spec files.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Int(i64),
    Str(String),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Int(i) => write!(f, "{i}"),
            Label::Str(s) => f.write_str(s),
        }
    }
}

impl From<i64> for Label {
    fn from(v: i64) -> Self {
        Label::Int(v)
    }
}

impl From<&str> for Label {
    fn from(v: &str) -> Self {
        Label::Str(v.to_owned())
    }
}

impl From<String> for Label {
    fn from(v: String) -> Self {
        Label::Str(v)
    }
}

/// Serialized chain description: `{"states": [...], "pi": [...], "transitions": [[from, to, p], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub states: Vec<Label>,
    pub pi: Vec<f64>,
    pub transitions: Vec<(Label, Label, f64)>,
}

/// A validated loop-free chain. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopFreeChain {
    states: Vec<Label>,
    successors: Vec<Vec<(usize, f64)>>,
    initial: Vec<f64>,
    exit: Vec<f64>,
    order: Vec<usize>,
    rank: Vec<usize>,
}

/// `Q = P + P² + ⋯` on the window: `Q[x][y]` is the probability that a
/// trajectory started at `x` later passes through `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct HitMatrix(pub DMatrix<f64>);

impl HitMatrix {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.0[(x, y)]
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Where the trajectory first meets a window, and how likely it misses it.
#[derive(Debug, Clone, PartialEq)]
pub struct EntranceLaw {
    /// Window states (chain indices, ascending).
    pub window: Vec<usize>,
    /// `pi_tilde[k]`: probability that the first window point is `window[k]`.
    pub pi_tilde: Vec<f64>,
    /// Probability that the trajectory never meets the window.
    pub pi_zero: f64,
}

/// `max(0, 1 − Σ values)` with Neumaier compensation; small deficits keep their relative accuracy.
fn deficit(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 1.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum - v;
        comp += if sum.abs() >= v.abs() { (sum - t) - v } else { (-v - t) + sum };
        sum = t;
    }
    (sum + comp).max(0.0)
}

fn check_probability(what: impl FnOnce() -> String, p: f64) -> Result<()> {
    if p.is_finite() && (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidProbability(format!("{} = {p}", what())))
    }
}

impl LoopFreeChain {
    /// Validates ranges and loop-freeness and builds the chain.
    ///
    /// Zero-probability transitions are dropped; they do not belong to the support digraph.
    pub fn new(
        states: Vec<Label>,
        transitions: &[(usize, usize, f64)],
        initial: Vec<f64>,
    ) -> Result<Self> {
        let n = states.len();
        if n > MAX_DENSE_STATES {
            return Err(Error::WindowTooLarge { size: n, limit: MAX_DENSE_STATES });
        }
        let mut seen = BTreeSet::new();
        for s in &states {
            if !seen.insert(s) {
                return Err(Error::DuplicateState(s.to_string()));
            }
        }
        if initial.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: initial.len() });
        }
        for (i, &p) in initial.iter().enumerate() {
            check_probability(|| format!("pi[{}]", states[i]), p)?;
        }
        let pi_mass: f64 = initial.iter().sum();
        if pi_mass > 1.0 + PROB_TOLERANCE {
            return Err(Error::InvalidProbability(format!("initial mass {pi_mass} exceeds 1")));
        }

        let mut successors: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(from, to, p) in transitions {
            if from >= n {
                return Err(Error::UnknownState(format!("#{from}")));
            }
            if to >= n {
                return Err(Error::UnknownState(format!("#{to}")));
            }
            check_probability(|| format!("P[{} -> {}]", states[from], states[to]), p)?;
            if successors[from].iter().any(|&(j, _)| j == to) {
                return Err(Error::DuplicateTransition {
                    from: states[from].to_string(),
                    to: states[to].to_string(),
                });
            }
            if p > 0.0 {
                successors[from].push((to, p));
            }
        }
        let mut exit = Vec::with_capacity(n);
        for (x, row) in successors.iter_mut().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            let mass: f64 = row.iter().map(|&(_, p)| p).sum();
            if mass > 1.0 + PROB_TOLERANCE {
                return Err(Error::InvalidProbability(format!(
                    "row {} sums to {mass}",
                    states[x]
                )));
            }
            exit.push(deficit(row.iter().map(|&(_, p)| p)));
        }

        let order = topological_order(&states, &successors)?;
        let mut rank = vec![0; n];
        for (pos, &x) in order.iter().enumerate() {
            rank[x] = pos;
        }
        Ok(Self { states, successors, initial, exit, order, rank })
    }

    pub fn from_spec(spec: &ChainSpec) -> Result<Self> {
        let lookup = |l: &Label| {
            spec.states
                .iter()
                .position(|s| s == l)
                .ok_or_else(|| Error::UnknownState(l.to_string()))
        };
        let mut transitions = Vec::with_capacity(spec.transitions.len());
        for (from, to, p) in &spec.transitions {
            transitions.push((lookup(from)?, lookup(to)?, *p));
        }
        Self::new(spec.states.clone(), &transitions, spec.pi.clone())
    }

    pub fn to_spec(&self) -> ChainSpec {
        let transitions = self
            .successors
            .iter()
            .enumerate()
            .flat_map(|(x, row)| {
                row.iter().map(move |&(y, p)| (self.states[x].clone(), self.states[y].clone(), p))
            })
            .collect();
        ChainSpec { states: self.states.clone(), pi: self.initial.clone(), transitions }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Label] {
        &self.states
    }

    pub fn label(&self, x: usize) -> &Label {
        &self.states[x]
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// Positive transitions out of `x`, sorted by target index.
    pub fn successors(&self, x: usize) -> &[(usize, f64)] {
        &self.successors[x]
    }

    pub fn transition(&self, x: usize, y: usize) -> f64 {
        self.successors[x]
            .iter()
            .find(|&&(j, _)| j == y)
            .map_or(0.0, |&(_, p)| p)
    }

    /// Probability of leaving the window from `x` (the row-sum deficit).
    pub fn exit_probability(&self, x: usize) -> f64 {
        self.exit[x]
    }

    pub fn exit_probabilities(&self) -> &[f64] {
        &self.exit
    }

    /// Probability that the trajectory never enters the window.
    pub fn miss_probability(&self) -> f64 {
        deficit(self.initial.iter().copied())
    }

    /// States listed so that transitions only go forward; incomparable states by ascending index.
    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    /// Position of `x` in [`Self::topological_order`].
    pub fn rank(&self, x: usize) -> usize {
        self.rank[x]
    }

    pub fn index_of(&self, label: &Label) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }

    /// Resolves textual labels (as printed by `Display`) to indices.
    pub fn resolve<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|name| {
                let name = name.as_ref().trim();
                self.states
                    .iter()
                    .position(|s| s.to_string() == name)
                    .ok_or_else(|| Error::UnknownState(name.to_owned()))
            })
            .collect()
    }

    pub(crate) fn labels_of(&self, xs: &[usize]) -> Vec<String> {
        xs.iter().map(|&x| self.states[x].to_string()).collect()
    }
}

/// Kahn's algorithm with a min-heap so ties resolve by ascending index.
fn topological_order(states: &[Label], successors: &[Vec<(usize, f64)>]) -> Result<Vec<usize>> {
    let n = states.len();
    let mut indegree = vec![0usize; n];
    for row in successors {
        for &(j, _) in row {
            indegree[j] += 1;
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&x| indegree[x] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(x)) = ready.pop() {
        order.push(x);
        for &(j, _) in &successors[x] {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                ready.push(Reverse(j));
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }

    // Every unprocessed state keeps a predecessor among the unprocessed ones,
    // so walking predecessors from any of them must close a cycle.
    let mut predecessors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (x, row) in successors.iter().enumerate() {
        for &(j, _) in row {
            if indegree[j] > 0 && indegree[x] > 0 {
                predecessors[j].push(x);
            }
        }
    }
    let start = (0..n).find(|&x| indegree[x] > 0).expect("unprocessed state exists");
    let mut walk = vec![start];
    let mut visited = vec![usize::MAX; n];
    visited[start] = 0;
    let mut current = start;
    loop {
        let prev = *predecessors[current].iter().min().expect("cycle predecessor");
        if visited[prev] != usize::MAX {
            let mut cycle: Vec<usize> = walk[visited[prev]..].to_vec();
            cycle.push(prev);
            cycle.reverse();
            return Err(Error::CycleDetected {
                cycle: cycle.iter().map(|&x| states[x].to_string()).collect(),
            });
        }
        visited[prev] = walk.len();
        walk.push(prev);
        current = prev;
    }
}

/// Checks ranges and acyclicity of a spec and returns its states in topological order.
pub fn validate_loop_free(spec: &ChainSpec) -> Result<Vec<Label>> {
    let chain = LoopFreeChain::from_spec(spec)?;
    Ok(chain.topological_order().iter().map(|&x| chain.label(x).clone()).collect())
}

/// Computes `Q = P(I − P)⁻¹` by back substitution in reverse topological order.
///
/// In topological order `I − P` is unit upper triangular, so `R = (I − P)⁻¹`
/// satisfies `R_x = e_x + Σ_j P_xj R_j` and `Q = R − I`.
pub fn compute_hit_matrix(chain: &LoopFreeChain) -> HitMatrix {
    let n = chain.len();
    let mut rows = vec![0.0f64; n * n];
    for &x in chain.topological_order().iter().rev() {
        let mut acc = vec![0.0f64; n];
        for &(j, p) in chain.successors(x) {
            acc[j] += p;
            let row_j = &rows[j * n..(j + 1) * n];
            for (a, &q) in acc.iter_mut().zip(row_j) {
                *a += p * q;
            }
        }
        rows[x * n..(x + 1) * n].copy_from_slice(&acc);
    }
    HitMatrix(DMatrix::from_row_slice(n, n, &rows))
}

/// `π_x + (πQ)_x`: the probability that `x` lies on the trajectory.
pub fn hit_intensity(chain: &LoopFreeChain, q: &HitMatrix) -> Vec<f64> {
    let n = chain.len();
    let pi = chain.initial();
    let mut h = pi.to_vec();
    for (x, &px) in pi.iter().enumerate() {
        if px == 0.0 {
            continue;
        }
        for (y, hy) in h.iter_mut().enumerate().take(n) {
            *hy += px * q.get(x, y);
        }
    }
    h
}

/// Sorts and deduplicates a window, rejecting indices outside the chain.
pub fn normalize_window(n: usize, window: &[usize]) -> Result<Vec<usize>> {
    let mut w: Vec<usize> = window.to_vec();
    if let Some(&bad) = w.iter().find(|&&x| x >= n) {
        return Err(Error::UnknownState(format!("#{bad}")));
    }
    w.sort_unstable();
    w.dedup();
    Ok(w)
}

/// Fails with a witness `y → z → y′` if a trajectory can leave the window and come back.
pub fn check_no_return(chain: &LoopFreeChain, q: &HitMatrix, window: &[usize]) -> Result<()> {
    let n = chain.len();
    let mut inside = vec![false; n];
    for &y in window {
        inside[y] = true;
    }
    for &y in window {
        for z in (0..n).filter(|&z| !inside[z] && q.get(y, z) > 0.0) {
            if let Some(&back) = window.iter().find(|&&y2| q.get(z, y2) > 0.0) {
                return Err(Error::ReturnToWindow { path: chain.labels_of(&[y, z, back]) });
            }
        }
    }
    Ok(())
}

/// Entrance law of a no-return window, obtained by making the window absorbing
/// and solving the absorption system over the complement.
pub fn entrance_law(chain: &LoopFreeChain, q: &HitMatrix, window: &[usize]) -> Result<EntranceLaw> {
    let n = chain.len();
    let window = normalize_window(n, window)?;
    if window.is_empty() {
        return Err(Error::InvalidSpec("window must be nonempty".into()));
    }
    check_no_return(chain, q, &window)?;

    let m = window.len();
    let mut slot = vec![usize::MAX; n];
    for (k, &y) in window.iter().enumerate() {
        slot[y] = k;
    }
    // absorb[x][k]: probability that the first window state reached from x is window[k];
    // escape[x]: probability of leaving through the exit without meeting the window
    let mut absorb: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut escape = vec![0.0; n];
    for &x in chain.topological_order().iter().rev() {
        if slot[x] != usize::MAX {
            continue;
        }
        let mut acc = vec![0.0; m];
        let mut out = chain.exit_probability(x);
        for &(j, p) in chain.successors(x) {
            if slot[j] != usize::MAX {
                acc[slot[j]] += p;
            } else {
                out += p * escape[j];
                for (a, &b) in acc.iter_mut().zip(&absorb[j]) {
                    *a += p * b;
                }
            }
        }
        absorb[x] = acc;
        escape[x] = out;
    }

    let mut pi_tilde = vec![0.0; m];
    // summed from nonnegative terms so that a small miss probability keeps its relative accuracy
    let mut pi_zero = chain.miss_probability();
    for (x, &px) in chain.initial().iter().enumerate() {
        if px == 0.0 {
            continue;
        }
        if slot[x] != usize::MAX {
            pi_tilde[slot[x]] += px;
        } else {
            pi_zero += px * escape[x];
            for (t, &a) in pi_tilde.iter_mut().zip(&absorb[x]) {
                *t += px * a;
            }
        }
    }
    for t in &mut pi_tilde {
        *t = t.clamp(0.0, 1.0);
    }
    let pi_zero = pi_zero.clamp(0.0, 1.0);
    Ok(EntranceLaw { window, pi_tilde, pi_zero })
}

/// Restricts the chain to a no-return window; everything outside collapses into the exit.
/// The returned chain's initial distribution is the entrance law.
pub fn contract_to_window(
    chain: &LoopFreeChain,
    q: &HitMatrix,
    window: &[usize],
) -> Result<LoopFreeChain> {
    let law = entrance_law(chain, q, window)?;
    let w = &law.window;
    let mut slot = vec![usize::MAX; chain.len()];
    for (k, &y) in w.iter().enumerate() {
        slot[y] = k;
    }
    let mut transitions = Vec::new();
    for (k, &y) in w.iter().enumerate() {
        for &(j, p) in chain.successors(y) {
            if slot[j] != usize::MAX {
                transitions.push((k, slot[j], p));
            }
        }
    }
    let states = w.iter().map(|&y| chain.label(y).clone()).collect();
    LoopFreeChain::new(states, &transitions, law.pi_tilde)
}
