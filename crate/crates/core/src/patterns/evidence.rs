use super::condition::{bind_conditions, Condition};
use super::mask::Mask;
use super::PatternError;
use crate::metrics::midranks;
use crate::stats::{self, Direction, Ties, TestResult};
use crate::table::{ColumnData, Table};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectFamily {
    Mean,
    Odds,
    Variance,
}

/// The claimed shift of the target inside the subgroup. Odds effects refer
/// to the positive class (code 1) of a binary target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    MeanIncrease,
    MeanDecrease,
    OddsIncrease,
    OddsDecrease,
    VarianceIncrease,
    VarianceDecrease,
}

impl Effect {
    pub fn new(family: EffectFamily, direction: Direction) -> Effect {
        use Direction::*;
        match (family, direction) {
            (EffectFamily::Mean, Greater) => Effect::MeanIncrease,
            (EffectFamily::Mean, Less) => Effect::MeanDecrease,
            (EffectFamily::Odds, Greater) => Effect::OddsIncrease,
            (EffectFamily::Odds, Less) => Effect::OddsDecrease,
            (EffectFamily::Variance, Greater) => Effect::VarianceIncrease,
            (EffectFamily::Variance, Less) => Effect::VarianceDecrease,
        }
    }

    pub fn family(self) -> EffectFamily {
        match self {
            Effect::MeanIncrease | Effect::MeanDecrease => EffectFamily::Mean,
            Effect::OddsIncrease | Effect::OddsDecrease => EffectFamily::Odds,
            Effect::VarianceIncrease | Effect::VarianceDecrease => EffectFamily::Variance,
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            Effect::MeanIncrease | Effect::OddsIncrease | Effect::VarianceIncrease => Direction::Greater,
            _ => Direction::Less,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Effect::MeanIncrease => "mean_increase",
            Effect::MeanDecrease => "mean_decrease",
            Effect::OddsIncrease => "odds_increase",
            Effect::OddsDecrease => "odds_decrease",
            Effect::VarianceIncrease => "variance_increase",
            Effect::VarianceDecrease => "variance_decrease",
        }
    }
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The (n, μ, p) triplet for one subgroup against its complement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternEvidence {
    pub n: usize,
    /// Subgroup target mean; positive fraction for binary targets.
    pub mu: Option<f64>,
    pub mu_reference: Option<f64>,
    /// Difference of means (proportions), or of mean absolute deviations
    /// from the group median for variance effects.
    pub effect_size: f64,
    pub p: f64,
    pub test: Option<TestResult>,
    /// Empty subgroup or empty complement: no contrast was possible.
    pub degenerate: bool,
    /// Position in the final ranking, starting at 1; 0 when unranked.
    pub novelty_rank: usize,
}

enum Contrast {
    Ranks { rank_sum: f64, ties: Ties },
    Counts { sub: usize, reference: usize },
}

/// Target values of one table prepared for repeated subgroup evaluation.
pub struct Evaluator {
    target: Vec<f64>,
    valid: Mask,
    binary: bool,
    ranks: Vec<f64>,
    ties: Ties,
}

impl Evaluator {
    pub fn new(table: &Table) -> Result<Evaluator, PatternError> {
        let col = table.require_target().map_err(|_| PatternError::NoTarget)?;
        let (target, binary): (Vec<f64>, bool) = match &col.data {
            ColumnData::Numeric(v) => (v.clone(), false),
            ColumnData::Categorical { codes, levels } => {
                if levels.len() > 2 {
                    return Err(PatternError::TargetNotBinary(col.name().to_string()));
                }
                (codes.iter().map(|&c| c as f64).collect(), true)
            }
        };
        let valid = Mask::from_bools(&col.missing.iter().map(|m| !m).collect::<Vec<_>>());
        let rows = valid.indices();
        let values: Vec<f64> = rows.iter().map(|&r| target[r]).collect();
        let mut ranks = vec![0.0; target.len()];
        for (&r, rank) in rows.iter().zip(midranks(&values)) {
            ranks[r] = rank;
        }
        Ok(Evaluator {
            ties: Ties::of(&values),
            target,
            valid,
            binary,
            ranks,
        })
    }

    pub fn is_binary(&self) -> bool {
        self.binary
    }

    /// Rows with a non-missing target.
    pub fn valid(&self) -> &Mask {
        &self.valid
    }

    pub fn families(&self, variance: bool) -> Vec<EffectFamily> {
        if self.binary {
            vec![EffectFamily::Odds]
        } else if variance {
            vec![EffectFamily::Mean, EffectFamily::Variance]
        } else {
            vec![EffectFamily::Mean]
        }
    }

    /// Target values of `mask` rows with a present target, in row order.
    pub fn values(&self, mask: &Mask) -> Vec<f64> {
        mask.and(&self.valid).iter().map(|r| self.target[r]).collect()
    }

    /// Evidence for `mask` with the direction that the data favours.
    pub fn evaluate_family(&self, mask: &Mask, family: EffectFamily) -> Result<(Effect, PatternEvidence), PatternError> {
        self.run(mask, family, None)
    }

    pub fn evaluate(&self, mask: &Mask, effect: Effect) -> Result<PatternEvidence, PatternError> {
        self.run(mask, effect.family(), Some(effect.direction())).map(|(_, e)| e)
    }

    fn run(
        &self,
        mask: &Mask,
        family: EffectFamily,
        direction: Option<Direction>,
    ) -> Result<(Effect, PatternEvidence), PatternError> {
        if (family == EffectFamily::Odds) != self.binary {
            return Err(PatternError::EffectMismatch(family));
        }
        let sub = mask.and(&self.valid);
        let comp = self.valid.and_not(&sub);
        let (n, m) = (sub.count(), comp.count());
        let mean = |k: &Mask, count: usize| (count > 0).then(|| k.iter().map(|r| self.target[r]).sum::<f64>() / count as f64);
        let (mu, mu_reference) = (mean(&sub, n), mean(&comp, m));
        if n == 0 || m == 0 {
            let direction = direction.unwrap_or(Direction::Greater);
            let evidence = PatternEvidence {
                n,
                mu,
                mu_reference,
                effect_size: 0.0,
                p: 1.0,
                test: None,
                degenerate: true,
                novelty_rank: 0,
            };
            return Ok((Effect::new(family, direction), evidence));
        }
        let (contrast, effect_size, expected_rank_sum) = match family {
            EffectFamily::Mean => {
                let rank_sum = sub.iter().map(|r| self.ranks[r]).sum();
                let expected = n as f64 * (n + m + 1) as f64 / 2.0;
                let contrast = Contrast::Ranks {
                    rank_sum,
                    ties: self.ties,
                };
                (contrast, mu.unwrap() - mu_reference.unwrap(), expected)
            }
            EffectFamily::Odds => {
                let successes = |k: &Mask| k.iter().filter(|&r| self.target[r] == 1.0).count();
                let contrast = Contrast::Counts {
                    sub: successes(&sub),
                    reference: successes(&comp),
                };
                (contrast, mu.unwrap() - mu_reference.unwrap(), 0.0)
            }
            EffectFamily::Variance => {
                let dev_sub = abs_deviations(&self.values(&sub));
                let dev_comp = abs_deviations(&self.values(&comp));
                let pooled: Vec<f64> = dev_sub.iter().chain(&dev_comp).copied().collect();
                let ranks = midranks(&pooled);
                let contrast = Contrast::Ranks {
                    rank_sum: ranks[..n].iter().sum(),
                    ties: Ties::of(&pooled),
                };
                let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
                let expected = n as f64 * (n + m + 1) as f64 / 2.0;
                (contrast, avg(&dev_sub) - avg(&dev_comp), expected)
            }
        };
        let direction = direction.unwrap_or(match &contrast {
            Contrast::Ranks { rank_sum, .. } => {
                if *rank_sum >= expected_rank_sum {
                    Direction::Greater
                } else {
                    Direction::Less
                }
            }
            Contrast::Counts { .. } => {
                if effect_size >= 0.0 {
                    Direction::Greater
                } else {
                    Direction::Less
                }
            }
        });
        let test = match contrast {
            Contrast::Ranks { rank_sum, ties } => stats::mann_whitney_from_ranks(n, m, rank_sum, &ties, direction),
            Contrast::Counts { sub: s1, reference: s2 } => stats::proportions_z_one_tailed(s1, n, s2, m, direction)
                .expect("counts are within bounds by construction"),
        };
        let evidence = PatternEvidence {
            n,
            mu,
            mu_reference,
            effect_size,
            p: test.p_value,
            test: Some(test),
            degenerate: false,
            novelty_rank: 0,
        };
        Ok((Effect::new(family, direction), evidence))
    }
}

/// `|x - median(x)|` for each value.
pub fn abs_deviations(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len();
    let median = if k % 2 == 1 {
        sorted[k / 2]
    } else {
        (sorted[k / 2 - 1] + sorted[k / 2]) / 2.0
    };
    values.iter().map(|v| (v - median).abs()).collect()
}

/// Evidence for a conjunction of conditions on `table`, whose target column
/// holds the raw (unscaled) target.
pub fn evaluate_pattern(table: &Table, conditions: &[Condition], effect: Effect) -> Result<PatternEvidence, PatternError> {
    let mask = bind_conditions(table, conditions)?;
    Evaluator::new(table)?.evaluate(&mask, effect)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mann_whitney_one_tailed;
    use crate::table::Column;

    fn table(y: Vec<f64>) -> Table {
        let x: Vec<f64> = (0..y.len()).map(|i| i as f64).collect();
        Table::new(vec![Column::numeric("x", x), Column::numeric("y", y)])
            .unwrap()
            .with_target("y")
            .unwrap()
    }

    #[test]
    fn matches_direct_test() {
        let y: Vec<f64> = (0..40).map(|i| ((i * 17) % 23) as f64 + if i >= 30 { 9.0 } else { 0.0 }).collect();
        let t = table(y.clone());
        let c = Condition::quantile_above(&t, "x", 0.7).unwrap();
        let ev = evaluate_pattern(&t, &[c], Effect::MeanIncrease).unwrap();
        let (sub, rest): (Vec<_>, Vec<_>) = (0..40).partition(|&i| i as f64 > 27.3);
        let sub: Vec<f64> = sub.iter().map(|&i| y[i]).collect();
        let rest: Vec<f64> = rest.iter().map(|&i| y[i]).collect();
        let direct = mann_whitney_one_tailed(&sub, &rest, Direction::Greater).unwrap();
        assert_eq!(ev.n, sub.len());
        assert_eq!(ev.test.as_ref(), Some(&direct));
        assert_eq!(ev.p, direct.p_value);
        assert_eq!(ev.mu, Some(sub.iter().sum::<f64>() / sub.len() as f64));
    }

    #[test]
    fn all_rows_is_degenerate() {
        let t = table(vec![1.0, 2.0, 3.0]);
        let c = Condition::interval("x", -1.0, 5.0).unwrap();
        let ev = evaluate_pattern(&t, &[c], Effect::MeanIncrease).unwrap();
        assert!(ev.degenerate);
        assert_eq!((ev.n, ev.p), (3, 1.0));
    }

    #[test]
    fn natural_direction() {
        let y: Vec<f64> = (0..30).map(|i| if i < 10 { -5.0 } else { i as f64 }).collect();
        let t = table(y);
        let mask = Condition::quantile_below(&t, "x", 0.3).unwrap().bind(&t).unwrap();
        let ev = Evaluator::new(&t).unwrap();
        let (effect, e) = ev.evaluate_family(&mask, EffectFamily::Mean).unwrap();
        assert_eq!(effect, Effect::MeanDecrease);
        assert!(e.p < 1e-4);
        assert!(matches!(ev.evaluate(&mask, Effect::OddsIncrease), Err(PatternError::EffectMismatch(_))));
    }

    #[test]
    fn variance_effect() {
        // subgroup spread out, complement tight
        let y: Vec<f64> = (0..60)
            .map(|i| if i < 20 { if i % 2 == 0 { 10.0 + i as f64 } else { -10.0 - i as f64 } } else { (i % 3) as f64 })
            .collect();
        let t = table(y);
        let mask = Condition::quantile_below(&t, "x", 0.33).unwrap().bind(&t).unwrap();
        let (effect, e) = Evaluator::new(&t).unwrap().evaluate_family(&mask, EffectFamily::Variance).unwrap();
        assert_eq!(effect, Effect::VarianceIncrease);
        assert!(e.p < 1e-6);
        assert!(e.effect_size > 0.0);
    }
}
