//! One-tailed tests comparing a subgroup against its complement: the
//! Mann-Whitney U test for continuous targets and the pooled two-proportion
//! z-test for binary targets, plus Benjamini-Hochberg adjustment.

use crate::metrics::midranks;
use serde::{Deserialize, Serialize};

/// Largest combined sample size for which the Mann-Whitney p-value is
/// computed exactly.
pub const EXACT_CUTOFF: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    MannWhitney,
    ProportionsZ,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Greater,
    Less,
}

impl Direction {
    pub fn flip(self) -> Direction {
        match self {
            Direction::Greater => Direction::Less,
            Direction::Less => Direction::Greater,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test: TestKind,
    pub direction: Direction,
    /// U for Mann-Whitney, z for the proportions test.
    pub statistic: f64,
    pub p_value: f64,
    pub n_subgroup: usize,
    pub n_reference: usize,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("{0} sample is empty")]
    EmptySample(&'static str),
    #[error("invalid counts: {successes} successes out of {n}")]
    Counts { successes: usize, n: usize },
    #[error("non-finite observation")]
    NonFinite,
}

/// Standard normal CDF, accurate to about 1e-16 absolute.
///
/// ```
/// use discover::stats::normal_cdf;
/// assert_eq!(normal_cdf(0.0), 0.5);
/// assert!((normal_cdf(1.959963985) - 0.975).abs() < 1e-9);
/// ```
pub fn normal_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
    } else {
        1.0 - normal_cdf(-x)
    }
}

/// Upper-tail p-value `P(Z >= z)`.
fn upper_tail(z: f64) -> f64 {
    normal_cdf(-z)
}

fn clamp_p(p: f64) -> f64 {
    p.clamp(f64::MIN_POSITIVE, 1.0)
}

/// Number of rank allocations giving each value of U, for `n` subgroup and
/// `m` reference observations without ties. Index u holds the count.
pub fn mann_whitney_null_counts(n: usize, m: usize) -> Vec<f64> {
    // f[i][j][u]: arrangements of i subgroup and j reference values with U = u
    let max_u = n * m;
    let mut table: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); m + 1]; n + 1];
    for i in 0..=n {
        for j in 0..=m {
            let mut row = vec![0.0; i * j + 1];
            if i == 0 || j == 0 {
                row[0] = 1.0;
            } else {
                // largest value belongs to the subgroup: it beats all j references
                for (u, c) in table[i - 1][j].iter().enumerate() {
                    row[u + j] += c;
                }
                for (u, c) in table[i][j - 1].iter().enumerate() {
                    row[u] += c;
                }
            }
            table[i][j] = row;
        }
    }
    let counts = std::mem::take(&mut table[n][m]);
    debug_assert_eq!(counts.len(), max_u + 1);
    counts
}

fn check_sample(values: &[f64], name: &'static str) -> Result<(), StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptySample(name));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

/// One-tailed Mann-Whitney U test. `Greater` tests whether the subgroup is
/// stochastically larger than the reference.
///
/// ```
/// use discover::stats::{mann_whitney_one_tailed, Direction, Method};
/// let r = mann_whitney_one_tailed(&[4.0, 5.0, 6.0], &[1.0, 2.0, 3.0], Direction::Greater).unwrap();
/// assert_eq!(r.statistic, 9.0);
/// assert_eq!(r.method, Method::Exact);
/// assert!((r.p_value - 0.05).abs() < 1e-15);
/// ```
pub fn mann_whitney_one_tailed(
    subgroup: &[f64],
    reference: &[f64],
    direction: Direction,
) -> Result<TestResult, StatsError> {
    check_sample(subgroup, "subgroup")?;
    check_sample(reference, "reference")?;
    let n = subgroup.len();
    let pooled: Vec<f64> = subgroup.iter().chain(reference).copied().collect();
    let ranks = midranks(&pooled);
    let rank_sum: f64 = ranks[..n].iter().sum();
    Ok(mann_whitney_from_ranks(n, reference.len(), rank_sum, &Ties::of(&pooled), direction))
}

/// Tie structure of a pooled sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ties {
    /// Sum of `t^3 - t` over tie groups of size `t`.
    pub term: f64,
    pub any: bool,
}

impl Ties {
    pub fn of(pooled: &[f64]) -> Ties {
        let mut sorted = pooled.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut term = 0.0;
        let mut any = false;
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i + 1;
            while j < sorted.len() && sorted[j] == sorted[i] {
                j += 1;
            }
            if j - i > 1 {
                let t = (j - i) as f64;
                any = true;
                term += t * t * t - t;
            }
            i = j;
        }
        Ties { term, any }
    }
}

/// Mann-Whitney test from the subgroup's midrank sum within the pooled
/// sample of `n + m` values whose ties are summarised by `ties`.
pub fn mann_whitney_from_ranks(n: usize, m: usize, rank_sum: f64, ties: &Ties, direction: Direction) -> TestResult {
    let u = rank_sum - (n * (n + 1)) as f64 / 2.0;
    let total = n + m;
    let (p, method) = if total <= EXACT_CUTOFF && !ties.any {
        let counts = mann_whitney_null_counts(n, m);
        let all: f64 = counts.iter().sum();
        let u_obs = u.round() as usize;
        let tail: f64 = match direction {
            Direction::Greater => counts[u_obs..].iter().sum(),
            Direction::Less => counts[..=u_obs].iter().sum(),
        };
        (tail / all, Method::Exact)
    } else {
        let (nf, mf, tf) = (n as f64, m as f64, total as f64);
        let mean = nf * mf / 2.0;
        let var = nf * mf / 12.0 * ((tf + 1.0) - ties.term / (tf * (tf - 1.0)));
        let p = if var <= 0.0 {
            1.0
        } else {
            let sd = var.sqrt();
            match direction {
                Direction::Greater => upper_tail((u - mean - 0.5) / sd),
                Direction::Less => normal_cdf((u - mean + 0.5) / sd),
            }
        };
        (p, Method::NormalApprox)
    };
    TestResult {
        test: TestKind::MannWhitney,
        direction,
        statistic: u,
        p_value: clamp_p(p),
        n_subgroup: n,
        n_reference: m,
        method,
    }
}

/// One-tailed pooled two-proportion z-test. `Greater` tests whether the
/// subgroup's success rate exceeds the reference's.
pub fn proportions_z_one_tailed(
    successes_sub: usize,
    n_sub: usize,
    successes_ref: usize,
    n_ref: usize,
    direction: Direction,
) -> Result<TestResult, StatsError> {
    for (s, n) in [(successes_sub, n_sub), (successes_ref, n_ref)] {
        if n == 0 || s > n {
            return Err(StatsError::Counts { successes: s, n });
        }
    }
    let (n1, n2) = (n_sub as f64, n_ref as f64);
    let pooled = (successes_sub + successes_ref) as f64 / (n1 + n2);
    let (z, p) = if pooled <= 0.0 || pooled >= 1.0 {
        (0.0, 1.0)
    } else {
        let se = (pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2)).sqrt();
        let z = (successes_sub as f64 / n1 - successes_ref as f64 / n2) / se;
        let p = match direction {
            Direction::Greater => upper_tail(z),
            Direction::Less => normal_cdf(z),
        };
        (z, p)
    };
    Ok(TestResult {
        test: TestKind::ProportionsZ,
        direction,
        statistic: z,
        p_value: clamp_p(p),
        n_subgroup: n_sub,
        n_reference: n_ref,
        method: Method::NormalApprox,
    })
}

/// Benjamini-Hochberg adjusted p-values, in input order.
pub fn benjamini_hochberg(p_values: &[f64]) -> Vec<f64> {
    let k = p_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let mut adjusted = vec![0.0; k];
    let mut running = 1.0f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        running = running.min(p_values[i] * k as f64 / (rank + 1) as f64);
        adjusted[i] = running.min(1.0);
    }
    adjusted
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_anchors() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!(normal_cdf(-8.0) < 1e-15);
        assert!(normal_cdf(-8.0) > 0.0);
        for x in [0.3, 1.0, 2.5, 7.0, 37.0] {
            assert_eq!(normal_cdf(x) + normal_cdf(-x), 1.0);
        }
    }

    #[test]
    fn null_counts_sum_to_binomial() {
        let c = mann_whitney_null_counts(3, 3);
        assert_eq!(c, vec![1.0, 1.0, 2.0, 3.0, 3.0, 3.0, 3.0, 2.0, 1.0, 1.0]);
        assert_eq!(mann_whitney_null_counts(6, 6).iter().sum::<f64>(), 924.0);
    }

    #[test]
    fn mann_whitney_example() {
        let r = mann_whitney_one_tailed(&[4.0, 5.0, 6.0], &[1.0, 2.0, 3.0], Direction::Greater).unwrap();
        assert_eq!((r.statistic, r.method), (9.0, Method::Exact));
        assert!((r.p_value - 0.05).abs() < 1e-15);
        let r = mann_whitney_one_tailed(&[4.0, 5.0, 6.0], &[1.0, 2.0, 3.0], Direction::Less).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn identical_samples_are_centered() {
        let a: Vec<f64> = (0..20).map(|i| (i * 3 % 11) as f64).collect();
        for d in [Direction::Greater, Direction::Less] {
            let r = mann_whitney_one_tailed(&a, &a, d).unwrap();
            assert!((0.45..=0.55).contains(&r.p_value), "{}", r.p_value);
        }
    }

    #[test]
    fn all_tied_gives_one() {
        let r = mann_whitney_one_tailed(&[2.0; 10], &[2.0; 10], Direction::Greater).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn empty_rejected() {
        assert_eq!(
            mann_whitney_one_tailed(&[], &[1.0], Direction::Greater),
            Err(StatsError::EmptySample("subgroup"))
        );
    }

    #[test]
    fn proportion_examples() {
        let r = proportions_z_one_tailed(5, 10, 50, 100, Direction::Greater).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 0.5));
        let r = proportions_z_one_tailed(10, 10, 10, 100, Direction::Greater).unwrap();
        assert!(r.p_value < 1e-4);
        let r = proportions_z_one_tailed(0, 10, 0, 100, Direction::Less).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert!(proportions_z_one_tailed(11, 10, 0, 100, Direction::Less).is_err());
        assert!(proportions_z_one_tailed(0, 0, 0, 100, Direction::Less).is_err());
    }

    #[test]
    fn bh_adjustment() {
        // hand-computed: sorted 0.01,0.02,0.03,0.5 -> 0.04,0.04,0.04,0.5
        let adj = benjamini_hochberg(&[0.03, 0.5, 0.01, 0.02]);
        let want = [0.04, 0.5, 0.04, 0.04];
        for (a, w) in adj.iter().zip(want) {
            assert!((a - w).abs() < 1e-15);
        }
        assert!(benjamini_hochberg(&[]).is_empty());
    }
}
