//! Confidence-based membership inference (CoMI).
//!
//! For each target class the attack sees the model's probability for that
//! class on deletion-set samples (members) and on unseen samples of the same
//! classes (non-members). The larger side is subsampled to balance the two,
//! the pool is split into shadow and test halves, a single threshold is fit
//! on the shadow half, and its accuracy on the test half is recorded. Class
//! accuracies are weighted by balanced pool size; the result is averaged over
//! several resampling runs. 50% means no attack advantage.

use std::collections::BTreeSet;

use ndarray::ArrayView2;
use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{predict_probs, Model};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiaConfig {
    pub shadow_fraction: f64,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for MiaConfig {
    fn default() -> Self {
        Self {
            shadow_fraction: 0.5,
            repetitions: 20,
            seed: 0,
        }
    }
}

impl MiaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.shadow_fraction > 0.0 && self.shadow_fraction < 1.0) {
            return Err(Error::config("mia shadow_fraction must lie in (0, 1)"));
        }
        if self.repetitions == 0 {
            return Err(Error::config("mia repetitions must be at least 1"));
        }
        Ok(())
    }
}

/// A probability observed at a sample's target class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub target: usize,
    pub prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiaOutcome {
    /// Attack accuracy in percent.
    pub accuracy: f64,
    /// Target classes with fewer than two samples on a side.
    pub skipped_classes: Vec<usize>,
}

/// Threshold with the best accuracy on `shadow` (member iff `p > t`).
///
/// Candidates are `-inf` and every distinct shadow value, so the attack
/// depends only on the order of probabilities. Ties go to the smallest
/// threshold.
pub fn fit_threshold(shadow: &[(f64, bool)]) -> f64 {
    let mut sorted: Vec<(f64, bool)> = shadow.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let members = sorted.iter().filter(|s| s.1).count();
    // threshold -inf: everything predicted member
    let mut correct = members;
    let mut best = (correct, f64::NEG_INFINITY);
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i].0;
        // move every sample equal to v below the threshold
        while i < sorted.len() && sorted[i].0 == v {
            if sorted[i].1 {
                correct -= 1;
            } else {
                correct += 1;
            }
            i += 1;
        }
        if correct > best.0 {
            best = (correct, v);
        }
    }
    best.1
}

pub fn threshold_accuracy(samples: &[(f64, bool)], threshold: f64) -> f64 {
    let correct = samples
        .iter()
        .filter(|&&(p, member)| (p > threshold) == member)
        .count();
    correct as f64 / samples.len() as f64
}

/// CoMI from precomputed target-class probabilities.
pub fn comi_from_observations(
    members: &[Observation],
    nonmembers: &[Observation],
    config: &MiaConfig,
) -> Result<MiaOutcome> {
    config.validate()?;
    if members.is_empty() || nonmembers.is_empty() {
        return Err(Error::eval("comi needs members and non-members"));
    }
    let targets: BTreeSet<usize> = members.iter().map(|o| o.target).collect();
    let by_target = |obs: &[Observation], t: usize| -> Vec<f64> {
        obs.iter()
            .filter(|o| o.target == t)
            .map(|o| o.prob)
            .collect()
    };
    let mut groups = Vec::new();
    let mut skipped = Vec::new();
    for t in targets {
        let m = by_target(members, t);
        let u = by_target(nonmembers, t);
        if m.len() < 2 || u.len() < 2 {
            log::warn!(
                "comi: skipping target class {t} ({} members, {} non-members)",
                m.len(),
                u.len()
            );
            skipped.push(t);
        } else {
            groups.push((m, u));
        }
    }
    if groups.is_empty() {
        return Err(Error::eval("comi: every target class was skipped"));
    }

    let mut total = 0.0;
    for rep in 0..config.repetitions {
        let mut rng = seed::rng(seed::derive(config.seed, "comi", rep as u64));
        let mut weighted = 0.0;
        let mut weight = 0.0;
        for (m, u) in &groups {
            let k = m.len().min(u.len());
            let mut pool: Vec<(f64, bool)> = Vec::with_capacity(2 * k);
            for (side, member) in [(m, true), (u, false)] {
                if side.len() > k {
                    let mut picked = index::sample(&mut rng, side.len(), k).into_vec();
                    picked.sort_unstable();
                    pool.extend(picked.into_iter().map(|i| (side[i], member)));
                } else {
                    pool.extend(side.iter().map(|&p| (p, member)));
                }
            }
            pool.shuffle(&mut rng);
            let n = pool.len();
            let shadow_len = ((n as f64 * config.shadow_fraction).round() as usize).clamp(1, n - 1);
            let (shadow, test) = pool.split_at(shadow_len);
            let threshold = fit_threshold(shadow);
            weighted += n as f64 * threshold_accuracy(test, threshold);
            weight += n as f64;
        }
        total += weighted / weight;
    }
    Ok(MiaOutcome {
        accuracy: 100.0 * total / config.repetitions as f64,
        skipped_classes: skipped,
    })
}

/// CoMI of `model` distinguishing `members` (the deletion set) from
/// `nonmembers` (unseen samples), each row paired with its target class.
pub fn comi(
    model: &Model,
    members: (ArrayView2<f64>, &[usize]),
    nonmembers: (ArrayView2<f64>, &[usize]),
    config: &MiaConfig,
) -> Result<MiaOutcome> {
    let observe = |(x, targets): (ArrayView2<f64>, &[usize])| -> Result<Vec<Observation>> {
        if x.nrows() != targets.len() {
            return Err(Error::eval("comi: rows and targets differ in length"));
        }
        let probs = predict_probs(model, x)?;
        targets
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                if t >= probs.ncols() {
                    return Err(Error::eval(format!("comi: target class {t} out of range")));
                }
                Ok(Observation {
                    target: t,
                    prob: probs[[i, t]],
                })
            })
            .collect()
    };
    comi_from_observations(&observe(members)?, &observe(nonmembers)?, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(target: usize, probs: &[f64]) -> Vec<Observation> {
        probs
            .iter()
            .map(|&prob| Observation { target, prob })
            .collect()
    }

    #[test]
    fn separated_distributions_give_perfect_attack() {
        let out = comi_from_observations(
            &obs(0, &[0.9; 30]),
            &obs(0, &[0.1; 50]),
            &MiaConfig::default(),
        )
        .unwrap();
        assert_eq!(out.accuracy, 100.0);
    }

    #[test]
    fn threshold_fit_picks_smallest_best() {
        let shadow = [(0.2, true), (0.8, false)];
        // -inf and 0.8 both reach 50%; the smaller wins.
        assert_eq!(fit_threshold(&shadow), f64::NEG_INFINITY);
        let shadow = [(0.9, true), (0.8, false), (0.1, false)];
        assert_eq!(fit_threshold(&shadow), 0.8);
    }

    #[test]
    fn small_classes_are_skipped() {
        let mut m = obs(0, &[0.9, 0.8, 0.7]);
        m.extend(obs(1, &[0.5]));
        let u = [obs(0, &[0.1, 0.2, 0.3]), obs(1, &[0.4, 0.6])].concat();
        let out = comi_from_observations(&m, &u, &MiaConfig::default()).unwrap();
        assert_eq!(out.skipped_classes, vec![1]);

        let err = comi_from_observations(&obs(1, &[0.5]), &u, &MiaConfig::default());
        assert!(matches!(err, Err(Error::Evaluation(_))));
    }

    #[test]
    fn bad_config() {
        let c = MiaConfig {
            shadow_fraction: 1.0,
            ..Default::default()
        };
        assert!(comi_from_observations(&obs(0, &[0.1, 0.2]), &obs(0, &[0.1, 0.2]), &c).is_err());
    }

    #[test]
    fn seeded_repeatable() {
        let m = obs(0, &[0.3, 0.5, 0.9, 0.2, 0.8]);
        let u = obs(0, &[0.4, 0.1, 0.6, 0.7]);
        let c = MiaConfig::default();
        assert_eq!(
            comi_from_observations(&m, &u, &c).unwrap(),
            comi_from_observations(&m, &u, &c).unwrap()
        );
    }
}
