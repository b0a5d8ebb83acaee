//! Exact average-reward quantities on small finite MDPs.
//!
//! Everything the learner estimates from samples — gain, bias, entropy gain,
//! entropy bias, per-objective advantages and their soft combination — is
//! computed here exactly with dense linear algebra, so estimator tests have
//! ground truth to converge against. Chains must be irreducible under the
//! policy being evaluated; this is checked before any solve.
//!
//! Conventions: bias vectors are anchored at `v[0] = 0` (bias is defined only
//! up to an additive constant); zero-probability actions contribute zero
//! entropy reward (the `x·ln x → 0` limit).

use nalgebra::{DMatrix, DVector};
use rand::RngExt;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;
const RESIDUAL_TOL: f64 = 1e-10;

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// Finite MDP: transition tensor `p[s][a][s']` and reward table `r[s][a]`,
/// both stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// Row-major `[s][a][s']`, each `[s][a]` row a probability distribution.
    pub transition: Vec<f64>,
    /// Row-major `[s][a]`.
    pub reward: Vec<f64>,
}

impl TabularMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
    ) -> Result<Self> {
        let mdp = Self { n_states, n_actions, transition, reward };
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn p(&self, s: usize, a: usize, sp: usize) -> f64 {
        self.transition[(s * self.n_actions + a) * self.n_states + sp]
    }

    pub fn r(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_states == 0 || self.n_actions == 0 {
            return Err(Error::InvalidInput("MDP needs at least one state and action".into()));
        }
        if self.transition.len() != self.n_states * self.n_actions * self.n_states {
            return Err(Error::InvalidInput("transition tensor has wrong length".into()));
        }
        if self.reward.len() != self.n_states * self.n_actions {
            return Err(Error::InvalidInput("reward table has wrong length".into()));
        }
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let mut sum = 0.0;
                for sp in 0..self.n_states {
                    let p = self.p(s, a, sp);
                    if !(p.is_finite() && p >= 0.0) {
                        return Err(Error::InvalidInput(format!(
                            "p({sp}|{s},{a}) = {p} is not a probability"
                        )));
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::InvalidInput(format!(
                        "transition row (s={s}, a={a}) sums to {sum}"
                    )));
                }
                if !self.r(s, a).is_finite() {
                    return Err(Error::InvalidInput(format!("r({s},{a}) is not finite")));
                }
            }
        }
        Ok(())
    }

    /// Returns a copy with `delta` added to every reward entry.
    pub fn with_reward_shift(&self, delta: f64) -> Self {
        let mut out = self.clone();
        for r in &mut out.reward {
            *r += delta;
        }
        out
    }

    /// Random dense MDP: every transition probability strictly positive, so
    /// any stochastic policy induces an irreducible chain. Rewards uniform in
    /// [−1, 1].
    pub fn random_recurrent(rng: &mut ChaCha8Rng, n_states: usize, n_actions: usize) -> Self {
        let mut transition = vec![0.0; n_states * n_actions * n_states];
        for row in transition.chunks_mut(n_states) {
            let mut sum = 0.0;
            for p in row.iter_mut() {
                *p = rng.random::<f64>() + 0.05;
                sum += *p;
            }
            for p in row.iter_mut() {
                *p /= sum;
            }
        }
        let reward = (0..n_states * n_actions)
            .map(|_| rng.random::<f64>() * 2.0 - 1.0)
            .collect();
        Self { n_states, n_actions, transition, reward }
    }
}

/// Stationary stochastic policy `π[s][a]`, stored flat row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    pub n_states: usize,
    pub n_actions: usize,
    pub probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        let pi = Self { n_states, n_actions, probs };
        pi.validate()?;
        Ok(pi)
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn validate(&self) -> Result<()> {
        if self.probs.len() != self.n_states * self.n_actions {
            return Err(Error::InvalidInput("policy table has wrong length".into()));
        }
        for s in 0..self.n_states {
            let mut sum = 0.0;
            for a in 0..self.n_actions {
                let p = self.prob(s, a);
                if !(p.is_finite() && p >= 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "π({a}|{s}) = {p} is not a probability"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidInput(format!("policy row s={s} sums to {sum}")));
            }
        }
        Ok(())
    }

    /// Uniform distribution over actions in every state.
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    /// Random policy with full support everywhere.
    pub fn random(rng: &mut ChaCha8Rng, n_states: usize, n_actions: usize) -> Self {
        let mut probs = vec![0.0; n_states * n_actions];
        for row in probs.chunks_mut(n_actions) {
            let mut sum = 0.0;
            for p in row.iter_mut() {
                *p = rng.random::<f64>() + 0.05;
                sum += *p;
            }
            for p in row.iter_mut() {
                *p /= sum;
            }
        }
        Self { n_states, n_actions, probs }
    }
}

/// All exact quantities for one (MDP, policy, τ) triple. Advantage tables are
/// flat `[s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub gain: f64,
    pub bias: Vec<f64>,
    pub entropy_gain: f64,
    pub entropy_bias: Vec<f64>,
    pub reward_advantage: Vec<f64>,
    pub entropy_advantage: Vec<f64>,
    /// Combined advantage: elementwise reward + entropy advantage.
    pub soft_advantage: Vec<f64>,
    /// Gain-subtracted entropy-augmented reward per (s, a).
    pub soft_differential_reward: Vec<f64>,
    /// Per-state sum of both bias vectors.
    pub soft_bias: Vec<f64>,
}

// ---------------------------------------------------------------------------
// Core solves
// ---------------------------------------------------------------------------

fn check_compatible(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<()> {
    if policy.n_states != mdp.n_states || policy.n_actions != mdp.n_actions {
        return Err(Error::InvalidInput(format!(
            "policy shape {}x{} does not match MDP {}x{}",
            policy.n_states, policy.n_actions, mdp.n_states, mdp.n_actions
        )));
    }
    Ok(())
}

/// Policy-induced chain `P_π[s][s']` (row-major) and state reward `r_π[s]`
/// for an arbitrary per-(s,a) reward table.
fn induced_chain(mdp: &TabularMdp, policy: &TabularPolicy, reward: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = mdp.n_states;
    let mut p_pi = vec![0.0; n * n];
    let mut r_pi = vec![0.0; n];
    for s in 0..n {
        for a in 0..mdp.n_actions {
            let w = policy.prob(s, a);
            if w == 0.0 {
                continue;
            }
            r_pi[s] += w * reward[s * mdp.n_actions + a];
            for sp in 0..n {
                p_pi[s * n + sp] += w * mdp.p(s, a, sp);
            }
        }
    }
    (p_pi, r_pi)
}

/// Verifies the policy-induced chain is irreducible (one recurrent class
/// covering every state) by forward and backward reachability from state 0.
pub fn check_irreducible(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<()> {
    check_compatible(mdp, policy)?;
    let n = mdp.n_states;
    let (p_pi, _) = induced_chain(mdp, policy, &mdp.reward);
    let reach = |transpose: bool| -> Vec<bool> {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(s) = stack.pop() {
            for sp in 0..n {
                let edge = if transpose { p_pi[sp * n + s] } else { p_pi[s * n + sp] };
                if edge > 0.0 && !seen[sp] {
                    seen[sp] = true;
                    stack.push(sp);
                }
            }
        }
        seen
    };
    let forward = reach(false);
    let backward = reach(true);
    let mut bad: Vec<usize> = Vec::new();
    for s in 0..n {
        if !(forward[s] && backward[s]) {
            bad.push(s);
        }
    }
    if !bad.is_empty() {
        return Err(Error::Precondition(format!(
            "policy-induced chain is reducible; states not on state 0's recurrent class: {bad:?}"
        )));
    }
    Ok(())
}

/// Unique stationary distribution `d` of the policy-induced chain:
/// `dᵀ P_π = dᵀ`, `Σ d = 1`.
pub fn stationary_distribution(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<Vec<f64>> {
    check_irreducible(mdp, policy)?;
    let n = mdp.n_states;
    let (p_pi, _) = induced_chain(mdp, policy, &mdp.reward);
    // (P_πᵀ − I) d = 0 with the last balance equation replaced by Σ d = 1.
    let mut a = DMatrix::<f64>::zeros(n, n);
    for s in 0..n {
        for sp in 0..n {
            a[(sp, s)] = p_pi[s * n + sp];
        }
    }
    for i in 0..n {
        a[(i, i)] -= 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let d = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Numerical("stationary-distribution solve failed".into()))?;
    // Residual check against the defining equations.
    let mut max_resid: f64 = 0.0;
    for sp in 0..n {
        let mut acc = 0.0;
        for s in 0..n {
            acc += d[s] * p_pi[s * n + sp];
        }
        max_resid = max_resid.max((acc - d[sp]).abs());
    }
    let total: f64 = d.iter().sum();
    max_resid = max_resid.max((total - 1.0).abs());
    if max_resid > RESIDUAL_TOL || d.iter().any(|&x| x < -RESIDUAL_TOL) {
        return Err(Error::Numerical(format!(
            "stationary distribution failed verification (residual {max_resid:.3e})"
        )));
    }
    Ok(d.iter().copied().collect())
}

/// Long-run average reward of the policy.
pub fn exact_gain(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<f64> {
    gain_for_reward(mdp, policy, &mdp.reward)
}

fn gain_for_reward(mdp: &TabularMdp, policy: &TabularPolicy, reward: &[f64]) -> Result<f64> {
    let d = stationary_distribution(mdp, policy)?;
    let (_, r_pi) = induced_chain(mdp, policy, reward);
    Ok(d.iter().zip(&r_pi).map(|(di, ri)| di * ri).sum())
}

/// Solves `v + ρ·1 = r_π + P_π v` anchored at `v[0] = 0`, verifying the
/// residual of the defining equation.
fn bias_for_reward(mdp: &TabularMdp, policy: &TabularPolicy, reward: &[f64]) -> Result<Vec<f64>> {
    let rho = gain_for_reward(mdp, policy, reward)?;
    let n = mdp.n_states;
    let (p_pi, r_pi) = induced_chain(mdp, policy, reward);
    // (I − P_π + 1·e₀ᵀ) v = r_π − ρ·1 pins the anchor and is nonsingular for
    // irreducible chains.
    let mut a = DMatrix::<f64>::zeros(n, n);
    for s in 0..n {
        for sp in 0..n {
            a[(s, sp)] = -p_pi[s * n + sp];
        }
        a[(s, s)] += 1.0;
        a[(s, 0)] += 1.0;
    }
    let b = DVector::<f64>::from_iterator(n, r_pi.iter().map(|ri| ri - rho));
    let mut v: Vec<f64> = a
        .lu()
        .solve(&b)
        .ok_or_else(|| {
            Error::Numerical("bias solve failed: singular system on an irreducible chain".into())
        })?
        .iter()
        .copied()
        .collect();
    let anchor = v[0];
    for vi in &mut v {
        *vi -= anchor;
    }
    let mut max_resid: f64 = 0.0;
    for s in 0..n {
        let mut expect = r_pi[s] - rho;
        for sp in 0..n {
            expect += p_pi[s * n + sp] * v[sp];
        }
        max_resid = max_resid.max((v[s] - expect).abs());
    }
    if max_resid > RESIDUAL_TOL {
        return Err(Error::Numerical(format!(
            "bias solve failed verification (residual {max_resid:.3e})"
        )));
    }
    Ok(v)
}

/// Transient relative value of each state under the reward objective.
pub fn exact_bias(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<Vec<f64>> {
    bias_for_reward(mdp, policy, &mdp.reward)
}

/// Per-(s,a) entropy reward `−τ·ln π(a|s)`, with zero-probability actions
/// contributing zero.
fn entropy_reward(policy: &TabularPolicy, tau: f64) -> Vec<f64> {
    policy
        .probs
        .iter()
        .map(|&p| if p > 0.0 { -tau * p.ln() } else { 0.0 })
        .collect()
}

/// Long-run average of `−τ·ln π`: the policy's temperature-scaled entropy
/// rate under the stationary distribution.
pub fn exact_entropy_gain(mdp: &TabularMdp, policy: &TabularPolicy, tau: f64) -> Result<f64> {
    gain_for_reward(mdp, policy, &entropy_reward(policy, tau))
}

/// Transient relative value under the entropy objective.
pub fn exact_entropy_bias(mdp: &TabularMdp, policy: &TabularPolicy, tau: f64) -> Result<Vec<f64>> {
    bias_for_reward(mdp, policy, &entropy_reward(policy, tau))
}

/// Computes both objectives end to end and combines them. The combined table
/// is cross-checked against the sum of the per-objective tables to 1e-12.
pub fn exact_soft_advantage(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    tau: f64,
) -> Result<OracleResult> {
    let n = mdp.n_states;
    let m = mdp.n_actions;
    let gain = exact_gain(mdp, policy)?;
    let bias = exact_bias(mdp, policy)?;
    let r_h = entropy_reward(policy, tau);
    let entropy_gain = gain_for_reward(mdp, policy, &r_h)?;
    let entropy_bias = bias_for_reward(mdp, policy, &r_h)?;

    let expect_next = |v: &[f64], s: usize, a: usize| -> f64 {
        (0..n).map(|sp| mdp.p(s, a, sp) * v[sp]).sum()
    };
    let mut reward_advantage = vec![0.0; n * m];
    let mut entropy_advantage = vec![0.0; n * m];
    let mut soft_advantage = vec![0.0; n * m];
    let mut soft_differential_reward = vec![0.0; n * m];
    let soft_bias: Vec<f64> = (0..n).map(|s| bias[s] + entropy_bias[s]).collect();
    for s in 0..n {
        for a in 0..m {
            let i = s * m + a;
            reward_advantage[i] = mdp.r(s, a) - gain + expect_next(&bias, s, a) - bias[s];
            entropy_advantage[i] =
                r_h[i] - entropy_gain + expect_next(&entropy_bias, s, a) - entropy_bias[s];
            soft_differential_reward[i] = mdp.r(s, a) + r_h[i] - (gain + entropy_gain);
            soft_advantage[i] =
                soft_differential_reward[i] + expect_next(&soft_bias, s, a) - soft_bias[s];
            let direct = reward_advantage[i] + entropy_advantage[i];
            if (soft_advantage[i] - direct).abs() > 1e-12 {
                return Err(Error::Numerical(format!(
                    "soft-advantage decomposition violated at (s={s}, a={a}): {} vs {}",
                    soft_advantage[i], direct
                )));
            }
        }
    }
    Ok(OracleResult {
        gain,
        bias,
        entropy_gain,
        entropy_bias,
        reward_advantage,
        entropy_advantage,
        soft_advantage,
        soft_differential_reward,
        soft_bias,
    })
}

// ---------------------------------------------------------------------------
// Fixture files
// ---------------------------------------------------------------------------

/// Parsed MDP fixture, optionally with a policy and expected values the
/// self-test compares against.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub name: String,
    pub mdp: TabularMdp,
    pub policy: Option<TabularPolicy>,
    pub tau: f64,
    pub expect_gain: Option<f64>,
    pub expect_entropy_gain: Option<f64>,
}

/// Parses the plain-text fixture format:
///
/// ```text
/// # comments run to end of line
/// name two-state-cycle
/// n_states 2
/// n_actions 1
/// transition 0 0  0.0 1.0     # p(·|s=0, a=0)
/// transition 1 0  1.0 0.0
/// reward 0 0  0.0             # omitted rewards default to 0
/// reward 1 0  1.0
/// policy 0  1.0               # optional, row per state
/// policy 1  1.0
/// tau 1.0                     # optional, default 1.0
/// expect_gain 0.5             # optional self-test assertions
/// expect_entropy_gain 0.0
/// ```
///
/// Every `transition` row must be present for each (s, a) pair.
pub fn parse_fixture(text: &str) -> Result<Fixture> {
    let mut n_states: Option<usize> = None;
    let mut n_actions: Option<usize> = None;
    let mut name = String::from("unnamed");
    let mut tau = 1.0;
    let mut expect_gain = None;
    let mut expect_entropy_gain = None;
    let mut transitions: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    let mut rewards: Vec<(usize, usize, f64)> = Vec::new();
    let mut policy_rows: Vec<(usize, Vec<f64>)> = Vec::new();

    let bad = |line_no: usize, why: &str| {
        Error::InvalidInput(format!("fixture line {line_no}: {why}"))
    };
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tok = line.split_whitespace();
        let key = tok.next().unwrap();
        let rest: Vec<&str> = tok.collect();
        let parse_usize = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| bad(line_no, &format!("expected integer, got '{s}'")))
        };
        let parse_f64 = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| bad(line_no, &format!("expected number, got '{s}'")))
        };
        match key {
            "name" => {
                name = rest.join(" ");
            }
            "n_states" => {
                n_states = Some(parse_usize(rest.first().ok_or_else(|| bad(line_no, "missing value"))?)?);
            }
            "n_actions" => {
                n_actions = Some(parse_usize(rest.first().ok_or_else(|| bad(line_no, "missing value"))?)?);
            }
            "transition" => {
                if rest.len() < 3 {
                    return Err(bad(line_no, "transition needs: s a p0 p1 ..."));
                }
                let s = parse_usize(rest[0])?;
                let a = parse_usize(rest[1])?;
                let row = rest[2..].iter().map(|t| parse_f64(t)).collect::<Result<Vec<_>>>()?;
                transitions.push((s, a, row));
            }
            "reward" => {
                if rest.len() != 3 {
                    return Err(bad(line_no, "reward needs: s a value"));
                }
                rewards.push((parse_usize(rest[0])?, parse_usize(rest[1])?, parse_f64(rest[2])?));
            }
            "policy" => {
                if rest.len() < 2 {
                    return Err(bad(line_no, "policy needs: s p0 p1 ..."));
                }
                let s = parse_usize(rest[0])?;
                let row = rest[1..].iter().map(|t| parse_f64(t)).collect::<Result<Vec<_>>>()?;
                policy_rows.push((s, row));
            }
            "tau" => {
                tau = parse_f64(rest.first().ok_or_else(|| bad(line_no, "missing value"))?)?;
            }
            "expect_gain" => {
                expect_gain =
                    Some(parse_f64(rest.first().ok_or_else(|| bad(line_no, "missing value"))?)?);
            }
            "expect_entropy_gain" => {
                expect_entropy_gain =
                    Some(parse_f64(rest.first().ok_or_else(|| bad(line_no, "missing value"))?)?);
            }
            other => return Err(bad(line_no, &format!("unknown directive '{other}'"))),
        }
    }

    let n = n_states.ok_or_else(|| Error::InvalidInput("fixture missing n_states".into()))?;
    let m = n_actions.ok_or_else(|| Error::InvalidInput("fixture missing n_actions".into()))?;
    let mut transition = vec![f64::NAN; n * m * n];
    for (s, a, row) in transitions {
        if s >= n || a >= m || row.len() != n {
            return Err(Error::InvalidInput(format!(
                "transition row (s={s}, a={a}) out of range or wrong width"
            )));
        }
        transition[(s * m + a) * n..(s * m + a + 1) * n].copy_from_slice(&row);
    }
    if transition.iter().any(|p| p.is_nan()) {
        return Err(Error::InvalidInput(
            "fixture must specify a transition row for every (state, action) pair".into(),
        ));
    }
    let mut reward = vec![0.0; n * m];
    for (s, a, v) in rewards {
        if s >= n || a >= m {
            return Err(Error::InvalidInput(format!("reward entry (s={s}, a={a}) out of range")));
        }
        reward[s * m + a] = v;
    }
    let mdp = TabularMdp::new(n, m, transition, reward)?;
    let policy = if policy_rows.is_empty() {
        None
    } else {
        let mut probs = vec![f64::NAN; n * m];
        for (s, row) in policy_rows {
            if s >= n || row.len() != m {
                return Err(Error::InvalidInput(format!(
                    "policy row s={s} out of range or wrong width"
                )));
            }
            probs[s * m..(s + 1) * m].copy_from_slice(&row);
        }
        if probs.iter().any(|p| p.is_nan()) {
            return Err(Error::InvalidInput("policy must cover every state".into()));
        }
        Some(TabularPolicy::new(n, m, probs)?)
    };
    Ok(Fixture { name, mdp, policy, tau, expect_gain, expect_entropy_gain })
}

/// Fixtures compiled into the binary for the self-test. The perturbed
/// negative-control fixture is deliberately NOT part of this set; it lives on
/// disk for tests that exercise the mismatch path.
pub fn builtin_fixtures() -> Result<Vec<Fixture>> {
    [
        include_str!("../fixtures/cycle.txt"),
        include_str!("../fixtures/soft_uniform.txt"),
    ]
    .iter()
    .map(|text| parse_fixture(text))
    .collect()
}
