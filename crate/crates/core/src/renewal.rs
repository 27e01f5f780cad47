//! Delayed renewal processes and Markov renewal (semi-Markov) processes as
//! loop-free chains, plus the renewal-function and tail diagnostics used to
//! study them.
//!
//! A delayed renewal process with first increment `ξ₀` and later increments
//! distributed as `ξ₁` is the chain on `{1..T}` with `π_i = P(ξ₀ = i)` and
//! `P_{ij} = P(ξ₁ = j − i)`. A semi-Markov process with passage-time kernel
//! `P_{s₁s₂}(t)` is the chain on `S × {1..T}` moving `(s₁, t₁) → (s₂, t₂)` with
//! probability `P_{s₁s₂}(t₂ − t₁)`. Mass overshooting the horizon `T` leaves the
//! window.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::chain::{Label, LoopFreeChain, PROB_TOLERANCE};
use crate::error::{Error, Result};

/// Deviations at or below this are treated as converged when fitting decay rates.
pub const FIT_FLOOR: f64 = 1e-14;

/// Probability mass function on `{offset, offset + 1, …}` with `offset ≥ 1`.
///
/// Total mass may fall short of one when the tail has been truncated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pmf {
    pub offset: usize,
    pub probs: Vec<f64>,
}

impl Pmf {
    pub fn new(offset: usize, probs: Vec<f64>) -> Result<Self> {
        let pmf = Self { offset, probs };
        pmf.validate()?;
        Ok(pmf)
    }

    /// Point mass at `n`.
    pub fn delta(n: usize) -> Result<Self> {
        Self::new(n, vec![1.0])
    }

    /// Uniform on `{lo, …, hi}`.
    pub fn uniform(lo: usize, hi: usize) -> Result<Self> {
        if hi < lo {
            return Err(Error::InvalidPmf(format!("empty range {lo}..={hi}")));
        }
        let k = hi - lo + 1;
        Self::new(lo, vec![1.0 / k as f64; k])
    }

    /// Builds a pmf from explicit `(value, probability)` pairs.
    pub fn from_points(points: &[(usize, f64)]) -> Result<Self> {
        let lo = points.iter().map(|&(n, _)| n).min().unwrap_or(1);
        let hi = points.iter().map(|&(n, _)| n).max().unwrap_or(lo);
        let mut probs = vec![0.0; hi - lo + 1];
        for &(n, p) in points {
            probs[n - lo] += p;
        }
        Self::new(lo, probs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.offset == 0 {
            return Err(Error::InvalidPmf("support must lie in the positive integers".into()));
        }
        if let Some(p) = self.probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidPmf(format!("negative or non-finite probability {p}")));
        }
        let mass = self.mass();
        if mass > 1.0 + PROB_TOLERANCE {
            return Err(Error::InvalidPmf(format!("total mass {mass} exceeds 1")));
        }
        Ok(())
    }

    /// `P(ξ = n)`.
    pub fn prob(&self, n: usize) -> f64 {
        if n < self.offset {
            return 0.0;
        }
        self.probs.get(n - self.offset).copied().unwrap_or(0.0)
    }

    pub fn mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Values carrying positive probability, ascending.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(move |(i, &p)| (i + self.offset, p))
    }

    pub fn max_support(&self) -> Option<usize> {
        self.support().map(|(n, _)| n).last()
    }

    /// `E ξ` of the (possibly deficient) pmf, normalized by its mass.
    pub fn mean(&self) -> f64 {
        let mass = self.mass();
        self.support().map(|(n, p)| n as f64 * p).sum::<f64>() / mass
    }

    /// The same shape rescaled to unit mass.
    pub fn normalized(&self) -> Result<Self> {
        let mass = self.mass();
        if mass <= 0.0 {
            return Err(Error::InvalidPmf("zero mass".into()));
        }
        Self::new(self.offset, self.probs.iter().map(|p| p / mass).collect())
    }
}

/// Delayed renewal process truncated at `horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalSpec {
    pub xi0: Pmf,
    pub xi1: Pmf,
    pub horizon: usize,
}

impl RenewalSpec {
    pub fn validate(&self) -> Result<()> {
        self.xi0.validate()?;
        self.xi1.validate()?;
        if self.horizon == 0 {
            return Err(Error::InvalidSpec("horizon must be positive".into()));
        }
        for (name, pmf) in [("xi0", &self.xi0), ("xi1", &self.xi1)] {
            if let Some(top) = pmf.max_support() {
                if top > self.horizon {
                    return Err(Error::InvalidSpec(format!(
                        "{name} support reaches {top}, beyond horizon {}",
                        self.horizon
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The chain on `{1..T}` whose trajectories are the renewal epochs.
pub fn renewal_chain(spec: &RenewalSpec) -> Result<LoopFreeChain> {
    spec.validate()?;
    let t = spec.horizon;
    let states = (1..=t as i64).map(Label::Int).collect();
    let initial = (1..=t).map(|i| spec.xi0.prob(i)).collect();
    let mut transitions = Vec::new();
    for i in 1..=t {
        for (step, p) in spec.xi1.support() {
            if i + step <= t {
                transitions.push((i - 1, i + step - 1, p));
            }
        }
    }
    LoopFreeChain::new(states, &transitions, initial)
}

/// `f_n`, `n = 1..=n_max`: the probability that `n` is a renewal epoch of the
/// undelayed process, from `f_n = g_n + Σ_{k<n} g_k f_{n−k}`.
///
/// These are the coefficients of `f(z) = g(z)/(1 − g(z))` with `g(z) = E z^ξ`.
pub fn renewal_function(g: &Pmf, n_max: usize) -> Result<Vec<f64>> {
    g.validate()?;
    let mut f = vec![0.0; n_max];
    for n in 1..=n_max {
        let mut v = g.prob(n);
        for (k, gk) in g.support() {
            if k >= n {
                break;
            }
            v += gk * f[n - k - 1];
        }
        f[n - 1] = v;
    }
    Ok(f)
}

/// Result of fitting `log|f_n − 1/Eξ| ≈ log_intercept − decay_rate · n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RateFit {
    /// Every deviation is already below the floor (e.g. `ξ ≡ 1`).
    Converged,
    Exponential {
        log_intercept: f64,
        decay_rate: f64,
        max_residual: f64,
        points: usize,
    },
}

/// Least-squares slope and intercept of `ys` against `xs`, with the largest absolute residual.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let resid = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    (slope, intercept, resid)
}

/// Fits the exponential convergence rate of a renewal sequence to `1/Eξ`.
///
/// Only deviations above [`FIT_FLOOR`] are used, and of those only the trailing
/// two thirds, so early transients do not bias the slope.
pub fn renewal_rate_fit(g: &Pmf, f: &[f64]) -> Result<RateFit> {
    let (aperiodic, period) = is_aperiodic(g)?;
    if !aperiodic {
        return Err(Error::PeriodicInput { period });
    }
    let limit = 1.0 / g.mean();
    let above: Vec<(f64, f64)> = f
        .iter()
        .enumerate()
        .map(|(i, &v)| ((i + 1) as f64, (v - limit).abs()))
        .filter(|&(_, d)| d > FIT_FLOOR)
        .collect();
    if above.is_empty() {
        return Ok(RateFit::Converged);
    }
    let tail = &above[above.len() / 3..];
    if tail.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "only {} deviation(s) above the floor",
            tail.len()
        )));
    }
    let xs: Vec<f64> = tail.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = tail.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept, max_residual) = linear_fit(&xs, &ys);
    Ok(RateFit::Exponential {
        log_intercept: intercept,
        decay_rate: -slope,
        max_residual,
        points: tail.len(),
    })
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Aperiodicity as `gcd(support) = 1`; returns the flag and the period.
pub fn is_aperiodic(g: &Pmf) -> Result<(bool, u64)> {
    g.validate()?;
    let period = g.support().fold(0u64, |acc, (n, _)| gcd(acc, n as u64));
    if period == 0 {
        return Err(Error::InvalidPmf("empty support".into()));
    }
    Ok((period == 1, period))
}

/// A distribution with a declared tail, for class-ℰ certification.
#[derive(Debug, Clone, PartialEq)]
pub enum TailForm {
    /// Finitely supported.
    Finite(Pmf),
    /// `P(ξ = n) = coeff · ratio^n`.
    Geometric { coeff: f64, ratio: f64 },
    /// `P(ξ = n) = coeff · n^{−exponent}`.
    PowerLaw { coeff: f64, exponent: f64 },
}

impl TailForm {
    pub fn prob(&self, n: usize) -> f64 {
        match self {
            TailForm::Finite(p) => p.prob(n),
            TailForm::Geometric { coeff, ratio } => coeff * ratio.powi(n as i32),
            TailForm::PowerLaw { coeff, exponent } => coeff * (n as f64).powf(-exponent),
        }
    }
}

/// Whether `P(ξ = n) ≤ rⁿ` for all `n ≥ n0`. With `n0 = None`, whether some such index exists.
pub fn class_e_check(tail: &TailForm, r: f64, n0: Option<usize>) -> Result<bool> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidRatio(r));
    }
    let ok = match (tail, n0) {
        (TailForm::Finite(_), None) => true,
        (TailForm::Finite(p), Some(n0)) => {
            let top = p.max_support().unwrap_or(0);
            (n0.max(1)..=top).all(|n| p.prob(n) <= r.powi(n as i32))
        }
        (TailForm::Geometric { coeff, ratio }, n0) => {
            if *coeff <= 0.0 {
                true
            } else if ratio < &r {
                // coeff·(ratio/r)^n is decreasing, so the first index decides
                match n0 {
                    None => true,
                    Some(n0) => coeff * (ratio / r).powi(n0.max(1) as i32) <= 1.0,
                }
            } else if (ratio - r).abs() == 0.0 {
                *coeff <= 1.0
            } else {
                false
            }
        }
        (TailForm::PowerLaw { coeff, .. }, _) => *coeff <= 0.0,
    };
    Ok(ok)
}

/// Markov renewal process with a finite driving state set.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiMarkovSpec {
    states: Vec<Label>,
    kernel: BTreeMap<(usize, usize), Pmf>,
    initial: BTreeMap<usize, Pmf>,
    horizon: usize,
}

/// JSON form: `{"states": [...], "kernel": [[s1, s2, offset, [probs]], ...],
/// "initial": [[s, offset, [probs]], ...], "horizon": T}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiMarkovFile {
    pub states: Vec<Label>,
    pub kernel: Vec<(Label, Label, usize, Vec<f64>)>,
    pub initial: Vec<(Label, usize, Vec<f64>)>,
    pub horizon: usize,
}

impl SemiMarkovSpec {
    pub fn new(
        states: Vec<Label>,
        kernel: Vec<(Label, Label, Pmf)>,
        initial: Vec<(Label, Pmf)>,
        horizon: usize,
    ) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidSpec("driving state set is empty".into()));
        }
        if horizon == 0 {
            return Err(Error::InvalidSpec("horizon must be positive".into()));
        }
        for (i, s) in states.iter().enumerate() {
            if states[..i].contains(s) {
                return Err(Error::DuplicateState(s.to_string()));
            }
        }
        let lookup = |l: &Label| {
            states.iter().position(|s| s == l).ok_or_else(|| Error::UnknownState(l.to_string()))
        };
        let mut k = BTreeMap::new();
        for (a, b, pmf) in kernel {
            pmf.validate()?;
            let key = (lookup(&a)?, lookup(&b)?);
            if k.insert(key, pmf).is_some() {
                return Err(Error::InvalidSpec(format!("duplicate kernel entry {a} -> {b}")));
            }
        }
        let mut init = BTreeMap::new();
        for (s, pmf) in initial {
            pmf.validate()?;
            if init.insert(lookup(&s)?, pmf).is_some() {
                return Err(Error::InvalidSpec(format!("duplicate initial entry for {s}")));
            }
        }
        let spec = Self { states, kernel: k, initial: init, horizon };
        for (s, row) in spec.driving_matrix().iter().enumerate() {
            let mass: f64 = row.iter().sum();
            if mass > 1.0 + PROB_TOLERANCE {
                return Err(Error::InvalidSpec(format!(
                    "passage mass out of {} is {mass}",
                    spec.states[s]
                )));
            }
        }
        let init_mass: f64 = spec.initial.values().map(Pmf::mass).sum();
        if init_mass > 1.0 + PROB_TOLERANCE {
            return Err(Error::InvalidSpec(format!("initial mass {init_mass} exceeds 1")));
        }
        Ok(spec)
    }

    pub fn from_file(file: &SemiMarkovFile) -> Result<Self> {
        let kernel = file
            .kernel
            .iter()
            .map(|(a, b, off, p)| Ok((a.clone(), b.clone(), Pmf::new(*off, p.clone())?)))
            .collect::<Result<Vec<_>>>()?;
        let initial = file
            .initial
            .iter()
            .map(|(s, off, p)| Ok((s.clone(), Pmf::new(*off, p.clone())?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(file.states.clone(), kernel, initial, file.horizon)
    }

    pub fn to_file(&self) -> SemiMarkovFile {
        SemiMarkovFile {
            states: self.states.clone(),
            kernel: self
                .kernel
                .iter()
                .map(|(&(a, b), p)| {
                    (self.states[a].clone(), self.states[b].clone(), p.offset, p.probs.clone())
                })
                .collect(),
            initial: self
                .initial
                .iter()
                .map(|(&s, p)| (self.states[s].clone(), p.offset, p.probs.clone()))
                .collect(),
            horizon: self.horizon,
        }
    }

    pub fn states(&self) -> &[Label] {
        &self.states
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Same process with a different horizon.
    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidSpec("horizon must be positive".into()));
        }
        Ok(Self { horizon, ..self.clone() })
    }

    pub fn index_of(&self, label: &Label) -> Result<usize> {
        self.states.iter().position(|s| s == label).ok_or_else(|| Error::UnknownState(label.to_string()))
    }

    /// Index of `(s, t)` in the chain built by [`semi_markov_chain`] (time-major).
    pub fn state_index(&self, s: usize, t: usize) -> usize {
        (t - 1) * self.states.len() + s
    }

    /// `P(s₁ → s₂ at lag t)`, zero when no kernel entry exists.
    pub fn passage(&self, from: usize, to: usize) -> Option<&Pmf> {
        self.kernel.get(&(from, to))
    }

    /// `P_{s₁s₂} = Σ_t P_{s₁s₂}(t)`.
    pub fn driving_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.states.len();
        let mut m = vec![vec![0.0; n]; n];
        for (&(a, b), p) in &self.kernel {
            m[a][b] = p.mass();
        }
        m
    }
}

/// The loop-free chain on `S × {1..T}`; time strictly increases along every transition.
pub fn semi_markov_chain(spec: &SemiMarkovSpec) -> Result<LoopFreeChain> {
    for (s, row) in spec.driving_matrix().iter().enumerate() {
        let mass: f64 = row.iter().sum();
        if (mass - 1.0).abs() > PROB_TOLERANCE {
            return Err(Error::InvalidSpec(format!(
                "driving chain row {} sums to {mass}, expected 1",
                spec.states[s]
            )));
        }
    }
    let n_s = spec.states.len();
    let t_max = spec.horizon;
    let mut labels = Vec::with_capacity(n_s * t_max);
    for t in 1..=t_max {
        for s in &spec.states {
            labels.push(Label::Str(format!("({s},{t})")));
        }
    }
    let mut initial = vec![0.0; n_s * t_max];
    for (&s, pmf) in &spec.initial {
        for (t, p) in pmf.support().filter(|&(t, _)| t <= t_max) {
            initial[spec.state_index(s, t)] += p;
        }
    }
    let mut transitions = Vec::new();
    for t in 1..=t_max {
        for (&(a, b), pmf) in &spec.kernel {
            for (lag, p) in pmf.support() {
                if t + lag <= t_max {
                    transitions.push((spec.state_index(a, t), spec.state_index(b, t + lag), p));
                }
            }
        }
    }
    LoopFreeChain::new(labels, &transitions, initial)
}

/// Distribution of the first arrival time at `to` for the process started at `from` at time 0,
/// over times `1..=t_max`. With `from == to` this is the first return time.
///
/// The result is deficient by the probability that the arrival happens after `t_max` or never.
pub fn first_passage_distribution(
    spec: &SemiMarkovSpec,
    from: usize,
    to: usize,
    t_max: usize,
) -> Result<Pmf> {
    let n_s = spec.states.len();
    if from >= n_s || to >= n_s {
        return Err(Error::InvalidSpec(format!("driving state index out of range ({from}, {to})")));
    }
    if t_max == 0 {
        return Err(Error::InvalidSpec("t_max must be positive".into()));
    }
    // mass[t][s]: probability of sitting at s at elapsed time t without having reached `to`
    let mut mass = vec![vec![0.0; n_s]; t_max + 1];
    mass[0][from] = 1.0;
    let mut arrivals = vec![0.0; t_max];
    for t in 0..t_max {
        for u in 0..n_s {
            let m = mass[t][u];
            if m == 0.0 {
                continue;
            }
            for v in 0..n_s {
                let Some(pmf) = spec.passage(u, v) else { continue };
                for (lag, p) in pmf.support() {
                    if t + lag > t_max {
                        break;
                    }
                    if v == to {
                        arrivals[t + lag - 1] += m * p;
                    } else {
                        mass[t + lag][v] += m * p;
                    }
                }
            }
        }
    }
    Pmf::new(1, arrivals)
}

/// Strong connectivity of the driving chain's transition support.
pub fn driving_irreducible(spec: &SemiMarkovSpec) -> bool {
    let n = spec.states.len();
    let m = spec.driving_matrix();
    let reach = |start: usize, forward: bool| {
        let mut seen = vec![false; n];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                let w = if forward { m[u][v] } else { m[v][u] };
                if w > 0.0 && !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(0, true) && reach(0, false)
}

/// How strictly aperiodicity of passage times is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AperiodicityRule {
    /// Every passage time with `P_{ss′} > 0` must be aperiodic.
    AllPassageTimes,
    /// Only the first-return time to each state must be aperiodic.
    FirstReturn,
}

/// Checks the hypotheses under which the semi-Markov kernel admits a bounded conjugation:
/// finite irreducible driving chain and aperiodic passage times. Finitely supported
/// pmfs are automatically of exponential tail class.
pub fn check_markov_renewal_hypotheses(spec: &SemiMarkovSpec, rule: AperiodicityRule) -> Result<()> {
    if !driving_irreducible(spec) {
        return Err(Error::InvalidSpec("driving chain is not irreducible".into()));
    }
    match rule {
        AperiodicityRule::AllPassageTimes => {
            for pmf in spec.kernel.values().filter(|p| p.mass() > 0.0) {
                let (ok, period) = is_aperiodic(pmf)?;
                if !ok {
                    return Err(Error::PeriodicInput { period });
                }
            }
        }
        AperiodicityRule::FirstReturn => {
            // periods of return times are determined by cycles of length ≤ |S| in the lag graph
            let horizon = 4 * spec.states.len() * spec.kernel.values().filter_map(Pmf::max_support).max().unwrap_or(1);
            for s in 0..spec.states.len() {
                let ret = first_passage_distribution(spec, s, s, horizon)?;
                let (ok, period) = is_aperiodic(&ret)?;
                if !ok {
                    return Err(Error::PeriodicInput { period });
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::compute_hit_matrix;
    use approx::assert_abs_diff_eq;

    fn lab(s: &str) -> Label {
        Label::Str(s.into())
    }

    fn zigzag(horizon: usize) -> SemiMarkovSpec {
        SemiMarkovSpec::new(
            vec![lab("a"), lab("b")],
            vec![
                (lab("a"), lab("b"), Pmf::delta(1).unwrap()),
                (lab("b"), lab("a"), Pmf::delta(1).unwrap()),
            ],
            vec![(lab("a"), Pmf::delta(1).unwrap())],
            horizon,
        )
        .unwrap()
    }

    fn branching(horizon: usize) -> SemiMarkovSpec {
        SemiMarkovSpec::new(
            vec![lab("a"), lab("b")],
            vec![
                (lab("a"), lab("b"), Pmf::uniform(1, 2).unwrap()),
                (lab("b"), lab("a"), Pmf::delta(1).unwrap()),
            ],
            vec![(lab("a"), Pmf::delta(1).unwrap())],
            horizon,
        )
        .unwrap()
    }

    #[test]
    fn renewal_chain_examples() {
        let spec = RenewalSpec {
            xi0: Pmf::delta(1).unwrap(),
            xi1: Pmf::uniform(1, 2).unwrap(),
            horizon: 4,
        };
        let c = renewal_chain(&spec).unwrap();
        assert_eq!(c.initial(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(c.transition(0, 1), 0.5);
        assert_eq!(c.transition(0, 2), 0.5);
        assert_eq!(c.transition(2, 3), 0.5);
        assert_eq!(c.exit_probability(2), 0.5);
        assert_eq!(c.exit_probability(3), 1.0);

        let det = RenewalSpec { xi1: Pmf::delta(1).unwrap(), ..spec.clone() };
        let c = renewal_chain(&det).unwrap();
        for i in 0..3 {
            assert_eq!(c.successors(i), &[(i + 1, 1.0)]);
        }

        let delayed =
            RenewalSpec { xi0: Pmf::uniform(1, 2).unwrap(), xi1: Pmf::delta(1).unwrap(), horizon: 2 };
        assert_eq!(renewal_chain(&delayed).unwrap().initial(), &[0.5, 0.5]);

        let short = RenewalSpec { horizon: 1, ..spec };
        assert!(matches!(renewal_chain(&short), Err(Error::InvalidSpec(_))));
        assert!(Pmf::new(0, vec![1.0]).is_err());
        assert!(Pmf::new(1, vec![0.7, 0.7]).is_err());
    }

    #[test]
    fn renewal_function_examples() {
        let f = renewal_function(&Pmf::uniform(1, 2).unwrap(), 4).unwrap();
        for (got, want) in f.iter().zip([0.5, 0.75, 0.625, 0.6875]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        let ones = renewal_function(&Pmf::delta(1).unwrap(), 20).unwrap();
        assert!(ones.iter().all(|&v| v == 1.0));
        let long = renewal_function(&Pmf::uniform(1, 2).unwrap(), 60).unwrap();
        assert_abs_diff_eq!(long[59], 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn renewal_function_closed_form_for_two_point_uniform() {
        // f_n − 2/3 = (1/3)(−1/2)^n
        let f = renewal_function(&Pmf::uniform(1, 2).unwrap(), 40).unwrap();
        for (i, v) in f.iter().enumerate() {
            let n = (i + 1) as i32;
            assert_abs_diff_eq!(*v, 2.0 / 3.0 + (-0.5f64).powi(n) / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn rate_fit_examples() {
        let g = Pmf::uniform(1, 2).unwrap();
        let f = renewal_function(&g, 40).unwrap();
        let RateFit::Exponential { decay_rate, max_residual, .. } = renewal_rate_fit(&g, &f).unwrap()
        else {
            panic!("expected a fit")
        };
        assert_abs_diff_eq!(decay_rate, std::f64::consts::LN_2, epsilon = 1e-6);
        // what is left is roundoff in deviations near the 1e-14 floor
        assert!(max_residual < 1e-3);

        let one = Pmf::delta(1).unwrap();
        let f = renewal_function(&one, 20).unwrap();
        assert_eq!(renewal_rate_fit(&one, &f).unwrap(), RateFit::Converged);

        let periodic = Pmf::from_points(&[(2, 0.5), (4, 0.5)]).unwrap();
        let f = renewal_function(&periodic, 20).unwrap();
        assert_eq!(renewal_rate_fit(&periodic, &f), Err(Error::PeriodicInput { period: 2 }));
    }

    #[test]
    fn rate_fit_three_point_uniform() {
        let g = Pmf::uniform(1, 3).unwrap();
        let f = renewal_function(&g, 60).unwrap();
        let RateFit::Exponential { decay_rate, max_residual, .. } = renewal_rate_fit(&g, &f).unwrap()
        else {
            panic!("expected a fit")
        };
        // 1 − g(z) = (1 − z)(z² + 2z + 3)/3, so the deviation decays like |z|⁻ⁿ = 3^{−n/2}
        // with an oscillating factor; the log-linear residual therefore stays of order one
        assert!(decay_rate > 0.0);
        assert_abs_diff_eq!(decay_rate, 0.5 * 3f64.ln(), epsilon = 0.05 * 0.5 * 3f64.ln());
        assert!(max_residual.is_finite());
    }

    #[test]
    fn aperiodicity_examples() {
        let p = |pts: &[(usize, f64)]| Pmf::from_points(pts).unwrap();
        assert_eq!(is_aperiodic(&p(&[(2, 0.5), (4, 0.5)])).unwrap(), (false, 2));
        assert_eq!(is_aperiodic(&p(&[(2, 0.5), (3, 0.5)])).unwrap(), (true, 1));
        assert_eq!(is_aperiodic(&p(&[(3, 1.0)])).unwrap(), (false, 3));
        assert!(is_aperiodic(&Pmf::new(1, vec![0.0]).unwrap()).is_err());
    }

    #[test]
    fn class_e_examples() {
        let finite = TailForm::Finite(Pmf::uniform(2, 5).unwrap());
        assert!(class_e_check(&finite, 0.5, None).unwrap());
        let geo = TailForm::Geometric { coeff: 0.3, ratio: 0.6 };
        assert!(class_e_check(&geo, 0.7, Some(1)).unwrap());
        for n in 1..200 {
            assert!(geo.prob(n) <= 0.7f64.powi(n as i32));
        }
        let power = TailForm::PowerLaw { coeff: 1.0, exponent: 2.0 };
        for r in [0.5, 0.9, 0.999] {
            assert!(!class_e_check(&power, r, Some(1)).unwrap());
            assert!(!class_e_check(&power, r, None).unwrap());
        }
        // an explicit witness: at n = 3·10⁴, n⁻² exceeds 0.999ⁿ
        assert!(power.prob(30_000) > 0.999f64.powi(30_000));
        assert_eq!(class_e_check(&finite, 1.0, None), Err(Error::InvalidRatio(1.0)));
        assert_eq!(class_e_check(&finite, 0.0, None), Err(Error::InvalidRatio(0.0)));
    }

    #[test]
    fn zigzag_chain() {
        let spec = zigzag(4);
        let c = semi_markov_chain(&spec).unwrap();
        let (a, b) = (0, 1);
        assert_eq!(c.initial()[spec.state_index(a, 1)], 1.0);
        assert_eq!(c.transition(spec.state_index(a, 1), spec.state_index(b, 2)), 1.0);
        assert_eq!(c.transition(spec.state_index(b, 2), spec.state_index(a, 3)), 1.0);
        assert_eq!(c.transition(spec.state_index(a, 3), spec.state_index(b, 4)), 1.0);
        assert_eq!(c.exit_probability(spec.state_index(b, 4)), 1.0);
        assert_eq!(c.label(spec.state_index(b, 2)).to_string(), "(b,2)");
    }

    #[test]
    fn single_state_reduces_to_renewal() {
        let xi0 = Pmf::uniform(1, 3).unwrap();
        let xi1 = Pmf::from_points(&[(1, 0.2), (2, 0.5), (4, 0.3)]).unwrap();
        let horizon = 12;
        let sm = SemiMarkovSpec::new(
            vec![lab("s")],
            vec![(lab("s"), lab("s"), xi1.clone())],
            vec![(lab("s"), xi0.clone())],
            horizon,
        )
        .unwrap();
        let a = semi_markov_chain(&sm).unwrap();
        let b = renewal_chain(&RenewalSpec { xi0, xi1, horizon }).unwrap();
        assert_eq!(a.initial(), b.initial());
        for x in 0..horizon {
            assert_eq!(a.successors(x), b.successors(x));
        }
    }

    #[test]
    fn branching_chain_rows() {
        let spec = branching(6);
        let c = semi_markov_chain(&spec).unwrap();
        // states whose every successor lies within the horizon have full rows
        for t in 1..=4 {
            for s in 0..2 {
                assert_abs_diff_eq!(c.exit_probability(spec.state_index(s, t)), 0.0, epsilon = 1e-15);
            }
        }
        let a1 = spec.state_index(0, 1);
        assert_eq!(c.transition(a1, spec.state_index(1, 2)), 0.5);
        assert_eq!(c.transition(a1, spec.state_index(1, 3)), 0.5);
        assert_eq!(c.exit_probability(spec.state_index(0, 5)), 0.5);
    }

    #[test]
    fn first_passage_examples() {
        let fp = first_passage_distribution(&zigzag(4), 0, 0, 10).unwrap();
        assert_eq!(fp.prob(2), 1.0);
        assert_abs_diff_eq!(fp.mass(), 1.0, epsilon = 1e-15);

        let fp = first_passage_distribution(&branching(4), 0, 0, 10).unwrap();
        assert_abs_diff_eq!(fp.prob(2), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(fp.prob(3), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(fp.mass(), 1.0, epsilon = 1e-15);

        let one_way = SemiMarkovSpec::new(
            vec![lab("a"), lab("b")],
            vec![
                (lab("a"), lab("a"), Pmf::delta(1).unwrap()),
                (lab("b"), lab("a"), Pmf::delta(1).unwrap()),
            ],
            vec![],
            5,
        )
        .unwrap();
        let fp = first_passage_distribution(&one_way, 0, 1, 10).unwrap();
        assert_eq!(fp.mass(), 0.0);
    }

    #[test]
    fn irreducibility_examples() {
        assert!(driving_irreducible(&zigzag(3)));
        let one_way = SemiMarkovSpec::new(
            vec![lab("a"), lab("b")],
            vec![(lab("a"), lab("b"), Pmf::delta(1).unwrap())],
            vec![],
            3,
        )
        .unwrap();
        assert!(!driving_irreducible(&one_way));
        let single = SemiMarkovSpec::new(
            vec![lab("s")],
            vec![(lab("s"), lab("s"), Pmf::uniform(1, 2).unwrap())],
            vec![],
            3,
        )
        .unwrap();
        assert!(driving_irreducible(&single));
    }

    #[test]
    fn hypothesis_rules() {
        // zigzag: every passage time is the point mass at 1 (aperiodic), but returns take 2
        let z = zigzag(4);
        assert!(check_markov_renewal_hypotheses(&z, AperiodicityRule::AllPassageTimes).is_ok());
        assert_eq!(
            check_markov_renewal_hypotheses(&z, AperiodicityRule::FirstReturn),
            Err(Error::PeriodicInput { period: 2 })
        );
        let b = branching(4);
        assert!(check_markov_renewal_hypotheses(&b, AperiodicityRule::FirstReturn).is_ok());
    }

    #[test]
    fn semi_markov_rejects_deficient_driving_rows() {
        let spec = SemiMarkovSpec::new(
            vec![lab("a"), lab("b")],
            vec![(lab("a"), lab("b"), Pmf::delta(1).unwrap())],
            vec![(lab("a"), Pmf::delta(1).unwrap())],
            3,
        )
        .unwrap();
        assert!(matches!(semi_markov_chain(&spec), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn renewal_hits_match_renewal_function() {
        let g = Pmf::uniform(1, 3).unwrap();
        let spec = RenewalSpec { xi0: Pmf::delta(1).unwrap(), xi1: g.clone(), horizon: 30 };
        let c = renewal_chain(&spec).unwrap();
        let q = compute_hit_matrix(&c);
        let f = renewal_function(&g, 30).unwrap();
        for i in 0..30 {
            for j in i + 1..30 {
                assert_abs_diff_eq!(q.get(i, j), f[j - i - 1], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn file_round_trip() {
        let json = r#"{"states": ["a", "b"], "kernel": [["a", "b", 1, [0.5, 0.5]], ["b", "a", 1, [1.0]]],
            "initial": [["a", 1, [1.0]]], "horizon": 6}"#;
        let file: SemiMarkovFile = serde_json::from_str(json).unwrap();
        let spec = SemiMarkovSpec::from_file(&file).unwrap();
        assert_eq!(spec, branching(6));
        assert_eq!(SemiMarkovSpec::from_file(&spec.to_file()).unwrap(), spec);
    }
}
