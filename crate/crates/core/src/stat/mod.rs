//! Decision procedures and estimators over Bernoulli run outcomes.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatError {
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("no samples")]
    Empty,
}

fn check_prob(name: &str, v: f64, lo_open: bool, hi: f64) -> Result<(), StatError> {
    let ok = if lo_open { v > 0.0 } else { v >= 0.0 } && v < hi;
    if ok && v.is_finite() {
        Ok(())
    } else {
        Err(StatError::Param(format!("{name} = {v} out of range")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SprtParams {
    pub theta: f64,
    pub delta0: f64,
    pub delta1: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl SprtParams {
    pub fn new(theta: f64, delta0: f64, delta1: f64, alpha: f64, beta: f64) -> Result<Self, StatError> {
        check_prob("alpha", alpha, true, 0.5 + f64::EPSILON)?;
        check_prob("beta", beta, true, 0.5 + f64::EPSILON)?;
        if !(delta0 > 0.0 && delta1 > 0.0) {
            return Err(StatError::Param("indifference half-widths must be positive".into()));
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(StatError::Param(format!("threshold {theta} outside [0, 1]")));
        }
        let p = SprtParams {
            theta,
            delta0,
            delta1,
            alpha,
            beta,
        };
        if p.p0() >= 1.0 || p.p1() <= 0.0 {
            return Err(StatError::Param(format!(
                "indifference region [{}, {}] leaves (0, 1)",
                p.p1(),
                p.p0()
            )));
        }
        Ok(p)
    }

    pub fn p0(&self) -> f64 {
        self.theta + self.delta0
    }

    pub fn p1(&self) -> f64 {
        self.theta - self.delta1
    }

    /// LLR at or above which H1 is accepted.
    pub fn upper(&self) -> f64 {
        ((1.0 - self.beta) / self.alpha).ln()
    }

    /// LLR at or below which H0 is accepted.
    pub fn lower(&self) -> f64 {
        (self.beta / (1.0 - self.alpha)).ln()
    }
}

/// H0: p >= p0, H1: p <= p1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SprtState {
    pub runs: u64,
    pub successes: u64,
}

impl SprtState {
    pub fn llr(&self, p: &SprtParams) -> f64 {
        let (p0, p1) = (p.p0(), p.p1());
        let dm = self.successes as f64;
        let m = self.runs as f64;
        dm * (p1 / p0).ln() + (m - dm) * ((1.0 - p1) / (1.0 - p0)).ln()
    }

    /// Add one outcome and report a decision once a boundary is crossed.
    pub fn feed(&mut self, p: &SprtParams, success: bool) -> Option<Hypothesis> {
        self.runs += 1;
        self.successes += success as u64;
        self.decision(p)
    }

    pub fn decision(&self, p: &SprtParams) -> Option<Hypothesis> {
        let llr = self.llr(p);
        if llr >= p.upper() {
            Some(Hypothesis::H1)
        } else if llr <= p.lower() {
            Some(Hypothesis::H0)
        } else {
            None
        }
    }
}

/// Runs needed for an `(eps, alpha)` estimate by the two-sided Hoeffding bound.
pub fn required_runs(eps: f64, alpha: f64) -> Result<u64, StatError> {
    check_prob("epsilon", eps, true, 1.0)?;
    check_prob("alpha", alpha, true, 1.0)?;
    let n = ((2.0 / alpha).ln() / (2.0 * eps * eps)).ceil();
    Ok((n as u64).max(1))
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma((n + 1) as f64) - ln_gamma((k + 1) as f64) - ln_gamma((n - k + 1) as f64)
}

/// Lanczos approximation, accurate to about 1e-15 relative for x > 0.
fn ln_gamma(x: f64) -> f64 {
    const G: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = G[0];
    let t = x + 7.5;
    for (i, g) in G.iter().enumerate().skip(1) {
        a += g / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn ln_pmf(n: u64, k: u64, p: f64) -> f64 {
    let a = if k == 0 { 0.0 } else { k as f64 * p.ln() };
    let b = if k == n { 0.0 } else { (n - k) as f64 * (1.0 - p).ln() };
    ln_choose(n, k) + a + b
}

/// P(Bin(n, p) <= k).
pub fn binom_cdf(n: u64, k: u64, p: f64) -> f64 {
    if k >= n || p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let terms: Vec<f64> = (0..=k).map(|i| ln_pmf(n, i, p)).collect();
    log_sum_exp(&terms).exp().min(1.0)
}

/// P(Bin(n, p) >= k).
pub fn binom_sf(n: u64, k: u64, p: f64) -> f64 {
    if k == 0 || p >= 1.0 {
        return 1.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    let terms: Vec<f64> = (k..=n).map(|i| ln_pmf(n, i, p)).collect();
    log_sum_exp(&terms).exp().min(1.0)
}

/// Root of a monotone function on [0, 1] by bisection.
fn bisect(mut f: impl FnMut(f64) -> f64, increasing: bool) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) < 0.0) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpInterval {
    pub lo: f64,
    pub hi: f64,
}

/// Exact two-sided Clopper-Pearson interval at level `1 - alpha`.
pub fn clopper_pearson(k: u64, n: u64, alpha: f64) -> Result<CpInterval, StatError> {
    if n == 0 {
        return Err(StatError::Empty);
    }
    if k > n {
        return Err(StatError::Param(format!("{k} successes out of {n} runs")));
    }
    check_prob("alpha", alpha, true, 1.0)?;
    let half = alpha / 2.0;
    let lo = if k == 0 {
        0.0
    } else {
        bisect(|p| binom_sf(n, k, p) - half, true)
    };
    let hi = if k == n {
        1.0
    } else {
        bisect(|p| binom_cdf(n, k, p) - half, false)
    };
    Ok(CpInterval { lo, hi })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub p_hat: f64,
    pub epsilon: f64,
    pub runs: u64,
    pub successes: u64,
    pub ci: CpInterval,
}

pub fn estimate(successes: u64, runs: u64, epsilon: f64, alpha: f64) -> Result<Estimate, StatError> {
    let ci = clopper_pearson(successes, runs, alpha)?;
    Ok(Estimate {
        p_hat: successes as f64 / runs as f64,
        epsilon,
        runs,
        successes,
        ci,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    /// P(φ1) > P(φ2).
    Greater,
    /// P(φ1) < P(φ2).
    Less,
    Indistinguishable,
}

/// Paired comparison: an SPRT at θ = 0.5 over the discordant pairs, where
/// a success is a pair in which only the first property held.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareState {
    pub pairs: u64,
    pub sprt: SprtState,
}

impl CompareState {
    pub fn new() -> Self {
        CompareState {
            pairs: 0,
            sprt: SprtState::default(),
        }
    }

    pub fn params(alpha: f64, beta: f64, delta: f64) -> Result<SprtParams, StatError> {
        SprtParams::new(0.5, delta, delta, alpha, beta)
    }

    pub fn feed(&mut self, p: &SprtParams, first: bool, second: bool) -> Option<Comparison> {
        self.pairs += 1;
        if first == second {
            return None;
        }
        self.sprt.feed(p, first).map(|h| match h {
            Hypothesis::H0 => Comparison::Greater,
            Hypothesis::H1 => Comparison::Less,
        })
    }
}

impl Default for CompareState {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: u64,
}

/// Sample mean and (n-1)-normalised standard deviation, two-pass.
pub fn mean_std(values: &[f64]) -> Result<MeanStd, StatError> {
    if values.is_empty() {
        return Err(StatError::Empty);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Ok(MeanStd {
        mean,
        std,
        n: values.len() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_boundaries() {
        let p = SprtParams::new(0.5, 0.1, 0.1, 0.05, 0.05).unwrap();
        assert!((p.upper() + p.lower()).abs() < 1e-12);
    }

    #[test]
    fn all_successes_accept_h0_after_eight() {
        let p = SprtParams::new(0.5, 0.1, 0.1, 0.05, 0.05).unwrap();
        let expected = ((0.05f64 / 0.95).ln() / (0.4f64 / 0.6).ln()).ceil() as u64;
        assert_eq!(expected, 8);
        let mut s = SprtState::default();
        let mut n = 0;
        loop {
            n += 1;
            if let Some(h) = s.feed(&p, true) {
                assert_eq!(h, Hypothesis::H0);
                break;
            }
        }
        assert_eq!(n, expected);
    }

    #[test]
    fn run_counts() {
        assert_eq!(required_runs(0.05, 0.05).unwrap(), 738);
        assert_eq!(required_runs(0.1, 0.05).unwrap(), 185);
        assert_eq!(required_runs(0.01, 0.05).unwrap(), 18445);
        assert!(required_runs(0.99, 0.9).unwrap() >= 1);
    }

    #[test]
    fn cp_edges() {
        assert_eq!(clopper_pearson(0, 10, 0.05).unwrap().lo, 0.0);
        assert_eq!(clopper_pearson(10, 10, 0.05).unwrap().hi, 1.0);
        assert!(clopper_pearson(11, 10, 0.05).is_err());
        assert!(clopper_pearson(0, 0, 0.05).is_err());
    }

    #[test]
    fn ln_gamma_factorials() {
        let mut f = 1.0f64;
        for n in 1..30u32 {
            f *= n as f64;
            assert!((ln_gamma(n as f64 + 1.0) - f.ln()).abs() < 1e-10 * (1.0 + f.ln()));
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(SprtParams::new(0.95, 0.1, 0.1, 0.05, 0.05).is_err());
        assert!(SprtParams::new(0.5, 0.0, 0.1, 0.05, 0.05).is_err());
        assert!(SprtParams::new(0.5, 0.1, 0.1, 0.0, 0.05).is_err());
    }

    #[test]
    fn compare_ignores_ties() {
        let p = CompareState::params(0.05, 0.05, 0.1).unwrap();
        let mut c = CompareState::new();
        for _ in 0..1000 {
            assert_eq!(c.feed(&p, true, true), None);
        }
        assert_eq!(c.sprt.runs, 0);
    }
}
