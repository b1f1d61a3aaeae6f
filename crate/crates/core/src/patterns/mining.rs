use super::condition::{bind_conditions, cmp_conjunctions, quantile_sorted, Condition, ConditionForm};
use super::evidence::{Effect, EffectFamily, Evaluator, PatternEvidence};
use super::mask::Mask;
use super::{pattern_key, MinedPattern, MiningConfig, MiningResult, Pattern, PatternError, PatternKind};
use crate::stats::benjamini_hochberg;
use crate::table::{ColumnData, Table};
use rayon::prelude::*;
use std::cmp::Ordering;
use std::collections::BTreeSet;

/// Everything the search needs besides the configuration.
pub struct MiningInput<'a> {
    /// Raw training partition with its target column set.
    pub train: &'a Table,
    /// Raw holdout partition, same schema.
    pub holdout: &'a Table,
    /// Candidate features, most important first.
    pub ranked_features: Vec<String>,
    /// Model predictions per train row (`NaN` where unavailable).
    pub train_predictions: Vec<f64>,
    pub holdout_predictions: Vec<f64>,
}

#[derive(Clone)]
struct Node {
    conditions: Vec<Condition>,
    features: BTreeSet<String>,
    mask: Mask,
    effect: Effect,
    evidence: PatternEvidence,
    key: String,
}

/// Grid of single conditions on one feature, bound to the training table.
pub fn candidate_conditions(train: &Table, feature: &str, grid: &[f64]) -> Result<Vec<Condition>, PatternError> {
    let col = train
        .column(feature)
        .ok_or_else(|| PatternError::UnknownFeature(feature.to_string()))?;
    match &col.data {
        ColumnData::Categorical { codes, levels } => {
            let mut seen = vec![false; levels.len()];
            for (c, m) in codes.iter().zip(&col.missing) {
                if !m {
                    seen[*c as usize] = true;
                }
            }
            Ok(levels
                .iter()
                .zip(seen)
                .filter(|(_, s)| *s)
                .map(|(l, _)| Condition::category_equals(feature, l))
                .collect())
        }
        ColumnData::Numeric(_) => {
            let mut values = col.present_values();
            if values.is_empty() {
                return Ok(Vec::new());
            }
            values.sort_by(f64::total_cmp);
            let cuts: Vec<(f64, f64)> = grid.iter().map(|&q| (q, quantile_sorted(&values, q))).collect();
            let mut out = Vec::new();
            let mut last: Option<f64> = None;
            for &(q, t) in &cuts {
                if last != Some(t) {
                    out.push(Condition {
                        feature: feature.to_string(),
                        form: ConditionForm::QuantileAbove { q, threshold: t },
                    });
                    out.push(Condition {
                        feature: feature.to_string(),
                        form: ConditionForm::QuantileBelow { q, threshold: t },
                    });
                }
                last = Some(t);
            }
            let mut distinct: Vec<f64> = cuts.iter().map(|c| c.1).collect();
            distinct.dedup();
            for span in 1..=3 {
                for i in 0..distinct.len().saturating_sub(span) {
                    out.push(Condition::interval(feature, distinct[i], distinct[i + span])?);
                }
            }
            Ok(out)
        }
    }
}

fn rank_order(a: &Node, b: &Node) -> Ordering {
    a.evidence
        .p
        .total_cmp(&b.evidence.p)
        .then(b.evidence.effect_size.abs().total_cmp(&a.evidence.effect_size.abs()))
        .then_with(|| cmp_conjunctions(&a.conditions, &b.conditions))
        .then(a.effect.cmp(&b.effect))
}

fn make_node(conditions: Vec<Condition>, mask: Mask, effect: Effect, evidence: PatternEvidence) -> Node {
    let mut conditions = conditions;
    conditions.sort_by(|a, b| a.feature.cmp(&b.feature));
    let features = conditions.iter().map(|c| c.feature.clone()).collect();
    Node {
        key: pattern_key(&conditions),
        conditions,
        features,
        mask,
        effect,
        evidence,
    }
}

/// Mean (or spread, for variance effects) of model predictions inside the
/// mask minus outside it, over rows with a prediction.
fn model_effect(inside: &[f64], outside: &[f64], family: EffectFamily) -> Option<f64> {
    if inside.is_empty() || outside.is_empty() {
        return None;
    }
    let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Some(match family {
        EffectFamily::Variance => {
            avg(&super::evidence::abs_deviations(inside)) - avg(&super::evidence::abs_deviations(outside))
        }
        _ => avg(inside) - avg(outside),
    })
}

/// Discovery, hypothesis or dropped, given the BH-adjusted holdout p-value.
pub fn classify_pattern(
    train: &PatternEvidence,
    holdout: &PatternEvidence,
    adjusted_p: f64,
    model_agrees: bool,
    config: &MiningConfig,
) -> PatternKind {
    if holdout.n >= config.n_min && !holdout.degenerate && adjusted_p <= config.alpha_discovery {
        PatternKind::Discovery
    } else if train.p <= config.alpha_hypothesis && model_agrees {
        PatternKind::Hypothesis
    } else {
        PatternKind::Dropped
    }
}

/// Beam search over conjunctions, validated on the holdout.
pub fn mine(input: &MiningInput, config: &MiningConfig) -> Result<MiningResult, PatternError> {
    config.validate()?;
    let features: Vec<String> = input.ranked_features.iter().take(config.top_k_features).cloned().collect();
    if features.is_empty() {
        return Err(PatternError::NoFeatures);
    }
    if input.train_predictions.len() != input.train.row_count()
        || input.holdout_predictions.len() != input.holdout.row_count()
    {
        return Err(PatternError::PredictionLength);
    }
    let evaluator = Evaluator::new(input.train)?;
    let families = evaluator.families(config.variance_effects);

    let mut singles: Vec<(Condition, Mask)> = Vec::new();
    for f in &features {
        for c in candidate_conditions(input.train, f, &config.quantile_grid)? {
            let mask = c.bind(input.train)?;
            singles.push((c, mask));
        }
    }

    let admissible = |e: &PatternEvidence| !e.degenerate && e.n >= config.n_min;
    let mut evaluated = 0usize;

    let level_one: Vec<Node> = singles
        .par_iter()
        .flat_map_iter(|(c, mask)| {
            families.iter().map(|&fam| {
                let (effect, ev) = evaluator.evaluate_family(mask, fam)?;
                Ok(make_node(vec![c.clone()], mask.clone(), effect, ev))
            })
        })
        .collect::<Result<Vec<_>, PatternError>>()?;
    evaluated += level_one.len();
    let mut beam: Vec<Node> = level_one.into_iter().filter(|n| admissible(&n.evidence)).collect();
    beam.sort_by(rank_order);
    beam.truncate(config.beam_width);

    let mut emitted: Vec<Node> = Vec::new();
    let mut emitted_keys: BTreeSet<(String, Effect)> = BTreeSet::new();
    let mut push_emitted = |nodes: &[Node], emitted: &mut Vec<Node>| {
        for n in nodes {
            if emitted_keys.insert((n.key.clone(), n.effect)) {
                emitted.push(n.clone());
            }
        }
    };
    push_emitted(&beam, &mut emitted);

    for _arity in 2..=config.max_arity {
        let jobs: Vec<(usize, usize)> = beam
            .iter()
            .enumerate()
            .flat_map(|(bi, node)| {
                singles
                    .iter()
                    .enumerate()
                    .filter(|(_, (c, _))| !node.features.contains(&c.feature))
                    .map(move |(si, _)| (bi, si))
            })
            .collect();
        let children: Vec<Node> = jobs
            .par_iter()
            .map(|&(bi, si)| {
                let parent = &beam[bi];
                let (c, cmask) = &singles[si];
                let mask = parent.mask.and(cmask);
                let ev = evaluator.evaluate(&mask, parent.effect)?;
                let mut conds = parent.conditions.clone();
                conds.push(c.clone());
                let gain = parent.evidence.p.log10() - ev.p.log10();
                let improves = ev.p < parent.evidence.p && gain >= config.min_refinement_gain;
                Ok(improves.then(|| make_node(conds, mask, parent.effect, ev)))
            })
            .collect::<Result<Vec<_>, PatternError>>()?
            .into_iter()
            .flatten()
            .collect();
        evaluated += jobs.len();
        let mut seen = BTreeSet::new();
        let mut next: Vec<Node> = children
            .into_iter()
            .filter(|n| admissible(&n.evidence))
            .filter(|n| seen.insert((n.key.clone(), n.effect)))
            .collect();
        if next.is_empty() {
            break;
        }
        next.sort_by(rank_order);
        next.truncate(config.beam_width);
        push_emitted(&next, &mut emitted);
        beam = next;
    }

    // Holdout validation, multiple-testing control and classification.
    let holdout_eval = Evaluator::new(input.holdout)?;
    let validated: Vec<(Node, Mask, PatternEvidence)> = emitted
        .into_par_iter()
        .map(|node| {
            let mask = bind_conditions(input.holdout, &node.conditions)?;
            let ev = holdout_eval.evaluate(&mask, node.effect)?;
            Ok((node, mask, ev))
        })
        .collect::<Result<_, PatternError>>()?;
    let p_values: Vec<f64> = validated.iter().map(|(_, _, ev)| ev.p).collect();
    let adjusted = benjamini_hochberg(&p_values);

    let mut rows: Vec<(Node, PatternEvidence, f64, Mask)> = validated
        .into_iter()
        .zip(adjusted)
        .map(|((node, mask, ev), adj)| (node, ev, adj, mask))
        .collect();
    rows.sort_by(|a, b| {
        a.1.p
            .total_cmp(&b.1.p)
            .then(b.1.effect_size.abs().total_cmp(&a.1.effect_size.abs()))
            .then_with(|| cmp_conjunctions(&a.0.conditions, &b.0.conditions))
            .then(a.0.effect.cmp(&b.0.effect))
    });

    let emitted_count = rows.len();
    let mut patterns = Vec::new();
    for (node, mut holdout, adjusted_p, hmask) in rows {
        let split = |sources: &[(&Mask, &Vec<f64>)]| {
            let mut inside = Vec::new();
            let mut outside = Vec::new();
            for (mask, preds) in sources {
                for (r, &p) in preds.iter().enumerate() {
                    if p.is_nan() {
                        continue;
                    }
                    if mask.get(r) {
                        inside.push(p);
                    } else {
                        outside.push(p);
                    }
                }
            }
            (inside, outside)
        };
        // Holdout rows first: the model has not seen them.
        let (mut inside, mut outside) = split(&[(&hmask, &input.holdout_predictions)]);
        if inside.is_empty() || outside.is_empty() {
            (inside, outside) = split(&[(&node.mask, &input.train_predictions), (&hmask, &input.holdout_predictions)]);
        }
        let model_effect = model_effect(&inside, &outside, node.effect.family());
        let agrees = model_effect.is_some_and(|d| match node.effect.direction() {
            crate::stats::Direction::Greater => d > 0.0,
            crate::stats::Direction::Less => d < 0.0,
        });
        let kind = classify_pattern(&node.evidence, &holdout, adjusted_p, agrees, config);
        if kind == PatternKind::Dropped {
            continue;
        }
        let rank = patterns.len() + 1;
        let mut train = node.evidence;
        train.novelty_rank = rank;
        holdout.novelty_rank = rank;
        patterns.push(MinedPattern {
            pattern: Pattern {
                conditions: node.conditions,
                effect: node.effect,
                kind,
            },
            train,
            holdout,
            adjusted_p,
            model_effect,
        });
    }

    Ok(MiningResult {
        features_searched: features,
        candidates_evaluated: evaluated,
        patterns_emitted: emitted_count,
        patterns,
    })
}
