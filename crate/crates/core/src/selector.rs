//! Confidence ranking and re-training candidate selection.
//!
//! Two schemes mirror the two ways of deciding how much decoded data to
//! fold back per iteration: volume halving takes a fixed fraction of the
//! class's current pool size off the top of the ranking; fixed threshold
//! takes everything at or above a per-class confidence cut that never moves.

use std::fs;
use std::path::Path;

use crate::corpus::{LabelClass, PerClass};
use crate::error::{Error, Result};
use crate::features::EpochId;

/// A decoded epoch: argmax class, normalized confidence, the winning
/// class's raw per-epoch log likelihood, and all six class likelihoods.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub id: EpochId,
    pub start: f64,
    pub class: LabelClass,
    pub confidence: f64,
    pub raw_score: f64,
    pub scores: PerClass<f64>,
}

/// Rank every decoded epoch (no argmax gate) by one class's raw log
/// likelihood, descending. This is the axis threshold sweeps explore: loose
/// cuts deliberately reach epochs the class does not own.
pub fn rank_all_by_class_likelihood(decoded: &[Decoded], class: LabelClass) -> Vec<Decoded> {
    let mut out: Vec<Decoded> = decoded.to_vec();
    out.sort_by(|a, b| {
        b.scores[class.index()]
            .total_cmp(&a.scores[class.index()])
            .then_with(|| a.id.cmp(&b.id))
    });
    for d in &mut out {
        d.raw_score = d.scores[class.index()];
    }
    out
}

/// Which per-epoch score thresholds and rankings read.
///
/// Confidence is the length-normalized log posterior; the raw score is the
/// winning class's unnormalized log likelihood, the scale the fixed-threshold
/// scheme historically uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreKind {
    Confidence,
    RawLikelihood,
}

impl ScoreKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKind::Confidence => "confidence",
            ScoreKind::RawLikelihood => "raw",
        }
    }

    pub fn parse(s: &str) -> Option<ScoreKind> {
        match s {
            "confidence" | "conf" => Some(ScoreKind::Confidence),
            "raw" | "likelihood" => Some(ScoreKind::RawLikelihood),
            _ => None,
        }
    }

    pub fn of(self, d: &Decoded) -> f64 {
        match self {
            ScoreKind::Confidence => d.confidence,
            ScoreKind::RawLikelihood => d.raw_score,
        }
    }
}

/// Which scheme governs selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// S1: per-class target counts grown from the current pool size.
    VolumeHalving,
    /// S2: per-class thresholds fixed after the first iteration.
    FixedThreshold,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::VolumeHalving => "s1",
            Scheme::FixedThreshold => "s2",
        }
    }

    pub fn parse(s: &str) -> Option<Scheme> {
        match s {
            "s1" => Some(Scheme::VolumeHalving),
            "s2" => Some(Scheme::FixedThreshold),
            _ => None,
        }
    }
}

/// Per-class selection controls for one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionPolicy {
    pub scheme: Scheme,
    /// Score axis that rankings and thresholds read.
    pub score_kind: ScoreKind,
    /// Per-class thresholds in `score_kind` units (used by S2).
    pub thresholds: PerClass<f64>,
    /// Per-class target counts (used by S1).
    pub target_counts: PerClass<usize>,
    /// Fraction of the current pool size selected per iteration under S1.
    pub growth_factor: f64,
    pub iteration: usize,
    /// Classes eligible for selection; background classes default to off.
    pub enabled: PerClass<bool>,
}

impl SelectionPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.growth_factor > 0.0 && self.growth_factor <= 1.0) {
            return Err(Error::Validation(format!(
                "growth_factor must lie in (0,1], got {}",
                self.growth_factor
            )));
        }
        Ok(())
    }

    /// S1 policy seeded from the per-class pool sizes. Background classes
    /// start disabled (their pools are large already and extra pseudo-labels
    /// mostly hurt); pass `include_background` to enable them.
    pub fn volume(
        growth_factor: f64,
        pool_sizes: &PerClass<usize>,
        include_background: bool,
    ) -> SelectionPolicy {
        let mut enabled = [true; 6];
        if !include_background {
            for c in LabelClass::ALL {
                enabled[c.index()] = c.is_signal();
            }
        }
        let mut target_counts = [0usize; 6];
        for c in LabelClass::ALL {
            if enabled[c.index()] {
                target_counts[c.index()] = round_half_up(growth_factor * pool_sizes[c.index()] as f64);
            }
        }
        SelectionPolicy {
            scheme: Scheme::VolumeHalving,
            score_kind: ScoreKind::Confidence,
            thresholds: [f64::NEG_INFINITY; 6],
            target_counts,
            growth_factor,
            iteration: 0,
            enabled,
        }
    }

    /// S2 policy with fixed per-class thresholds in `score_kind` units.
    pub fn threshold(
        thresholds: PerClass<f64>,
        score_kind: ScoreKind,
        include_background: bool,
    ) -> SelectionPolicy {
        let mut enabled = [true; 6];
        if !include_background {
            for c in LabelClass::ALL {
                enabled[c.index()] = c.is_signal();
            }
        }
        SelectionPolicy {
            scheme: Scheme::FixedThreshold,
            score_kind,
            thresholds,
            target_counts: [0; 6],
            growth_factor: 0.5,
            iteration: 0,
            enabled,
        }
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

/// Accepted epochs for one class, with the threshold actually applied.
#[derive(Debug, Clone, Default)]
pub struct ClassSelection {
    pub accepted: Vec<Decoded>,
    /// Confidence of the last accepted item (volume) or the cut (threshold);
    /// +inf when nothing was accepted.
    pub effective_threshold: f64,
    /// How many decoded epochs of this class were considered.
    pub considered: usize,
}

/// Per-class selections for one iteration. Accepted sets are disjoint across
/// classes by construction: an epoch is only considered for its argmax class.
#[derive(Debug, Clone)]
pub struct SelectionResult {
    pub iteration: usize,
    pub per_class: PerClass<ClassSelection>,
}

impl SelectionResult {
    pub fn total_accepted(&self) -> usize {
        self.per_class.iter().map(|c| c.accepted.len()).sum()
    }
}

/// Stable descending sort by confidence for one class's decoded epochs.
/// Ties break by (record_id, channel, start) so ranking is deterministic.
pub fn rank(decoded: &[Decoded], class: LabelClass) -> Vec<Decoded> {
    rank_by(decoded, class, ScoreKind::Confidence)
}

/// [`rank`] over an arbitrary score axis.
pub fn rank_by(decoded: &[Decoded], class: LabelClass, kind: ScoreKind) -> Vec<Decoded> {
    let mut out: Vec<Decoded> = decoded.iter().filter(|d| d.class == class).cloned().collect();
    out.sort_by(|a, b| {
        kind.of(b)
            .total_cmp(&kind.of(a))
            .then_with(|| a.id.cmp(&b.id))
    });
    out
}

/// S1 slice: the top `round(growth_factor * pool_count)` of the ranking.
pub fn select_volume(ranked: &[Decoded], pool_count: usize, growth_factor: f64) -> ClassSelection {
    select_volume_by(ranked, pool_count, growth_factor, ScoreKind::Confidence)
}

pub fn select_volume_by(
    ranked: &[Decoded],
    pool_count: usize,
    growth_factor: f64,
    kind: ScoreKind,
) -> ClassSelection {
    let k = round_half_up(growth_factor * pool_count as f64).min(ranked.len());
    select_top_k(ranked, k, kind)
}

fn select_top_k(ranked: &[Decoded], k: usize, kind: ScoreKind) -> ClassSelection {
    let accepted: Vec<Decoded> = ranked[..k].to_vec();
    let effective_threshold = accepted.last().map_or(f64::INFINITY, |d| kind.of(d));
    ClassSelection {
        accepted,
        effective_threshold,
        considered: ranked.len(),
    }
}

/// S2 slice: everything whose confidence is at or above the cut.
pub fn select_threshold(ranked: &[Decoded], cut: f64) -> ClassSelection {
    select_threshold_by(ranked, cut, ScoreKind::Confidence)
}

/// S2 slice over an arbitrary score axis. `ranked` must be ranked by the
/// same axis.
pub fn select_threshold_by(ranked: &[Decoded], cut: f64, kind: ScoreKind) -> ClassSelection {
    let k = ranked.iter().take_while(|d| kind.of(d) >= cut).count();
    let mut sel = select_top_k(ranked, k, kind);
    sel.effective_threshold = cut;
    sel
}

/// Count how many ranked epochs clear each candidate threshold.
/// Counts are non-increasing in the threshold.
pub fn sweep_threshold(ranked: &[Decoded], cuts: &[f64]) -> Result<Vec<(f64, usize)>> {
    sweep_threshold_by(ranked, cuts, ScoreKind::Confidence)
}

pub fn sweep_threshold_by(
    ranked: &[Decoded],
    cuts: &[f64],
    kind: ScoreKind,
) -> Result<Vec<(f64, usize)>> {
    if cuts.is_empty() {
        return Err(Error::Usage("threshold sweep needs at least one value".into()));
    }
    Ok(cuts
        .iter()
        .map(|&t| (t, ranked.iter().filter(|d| kind.of(d) >= t).count()))
        .collect())
}

/// Move the policy to the next iteration. Volume targets track the updated
/// per-class pool sizes; fixed thresholds stay put.
pub fn adjust_policy(policy: &SelectionPolicy, pool_sizes: &PerClass<usize>) -> SelectionPolicy {
    let mut next = policy.clone();
    next.iteration += 1;
    if policy.scheme == Scheme::VolumeHalving {
        for c in LabelClass::ALL {
            let i = c.index();
            next.target_counts[i] = if policy.enabled[i] {
                round_half_up(policy.growth_factor * pool_sizes[i] as f64)
            } else {
                0
            };
        }
    }
    next
}

/// Apply the policy to every class of a decode batch.
pub fn select(decoded: &[Decoded], policy: &SelectionPolicy) -> Result<SelectionResult> {
    policy.validate()?;
    let mut per_class: PerClass<ClassSelection> = Default::default();
    for c in LabelClass::ALL {
        let i = c.index();
        let ranked = rank_by(decoded, c, policy.score_kind);
        per_class[i] = if !policy.enabled[i] {
            ClassSelection {
                accepted: Vec::new(),
                effective_threshold: f64::INFINITY,
                considered: ranked.len(),
            }
        } else {
            match policy.scheme {
                Scheme::VolumeHalving => select_top_k(
                    &ranked,
                    policy.target_counts[i].min(ranked.len()),
                    policy.score_kind,
                ),
                Scheme::FixedThreshold => {
                    select_threshold_by(&ranked, policy.thresholds[i], policy.score_kind)
                }
            }
        };
    }
    Ok(SelectionResult {
        iteration: policy.iteration,
        per_class,
    })
}

/// Audit trail: one row per considered epoch, flagging acceptance.
pub fn write_selection_audit(
    path: &Path,
    iteration: usize,
    decoded: &[Decoded],
    result: &SelectionResult,
) -> Result<()> {
    let mut out = String::from("iteration,class,record_id,channel,start_s,confidence,accepted\n");
    for c in LabelClass::ALL {
        let sel = &result.per_class[c.index()];
        let accepted_ids: std::collections::BTreeSet<&EpochId> =
            sel.accepted.iter().map(|d| &d.id).collect();
        for d in rank(decoded, c) {
            out.push_str(&format!(
                "{},{},{},{},{},{:.9e},{}\n",
                iteration,
                c,
                d.id.record_id,
                d.id.channel,
                d.start,
                d.confidence,
                u8::from(accepted_ids.contains(&d.id))
            ));
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decoded(class: LabelClass, conf: f64, rec: &str, idx: usize) -> Decoded {
        Decoded {
            id: EpochId {
                record_id: rec.into(),
                channel: 0,
                index: idx,
            },
            start: idx as f64,
            class,
            confidence: conf,
            raw_score: conf * 100.0,
            scores: [conf * 100.0; 6],
        }
    }

    #[test]
    fn rank_sorts_descending_with_stable_ties() {
        let batch = vec![
            decoded(LabelClass::Spsw, -0.1, "b", 0),
            decoded(LabelClass::Spsw, -0.5, "a", 1),
            decoded(LabelClass::Spsw, -0.3, "a", 0),
            decoded(LabelClass::Gped, -0.05, "a", 2),
        ];
        let ranked = rank(&batch, LabelClass::Spsw);
        let confs: Vec<f64> = ranked.iter().map(|d| d.confidence).collect();
        assert_eq!(confs, vec![-0.1, -0.3, -0.5]);

        let tied = vec![
            decoded(LabelClass::Spsw, -0.2, "z", 0),
            decoded(LabelClass::Spsw, -0.2, "a", 0),
        ];
        let r1 = rank(&tied, LabelClass::Spsw);
        let r2 = rank(&tied, LabelClass::Spsw);
        assert_eq!(r1[0].id.record_id, "a", "ties break by id");
        assert_eq!(r1, r2);
    }

    #[test]
    fn rank_top_of_ten_thousand_is_the_maximum() {
        use rand::Rng;
        let mut rng = crate::seed::rng_for(99, "test/rank10k");
        let batch: Vec<Decoded> = (0..10_000)
            .map(|i| decoded(LabelClass::Spsw, -rng.random_range(0.0..5.0f64), "r", i))
            .collect();
        let ranked = rank(&batch, LabelClass::Spsw);
        let max_by_scan = batch
            .iter()
            .map(|d| d.confidence)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(ranked[0].confidence, max_by_scan);
    }

    #[test]
    fn volume_rounding_matches_half_the_pool() {
        let ranked: Vec<Decoded> = (0..1000)
            .map(|i| decoded(LabelClass::Spsw, -(i as f64) / 1000.0, "r", i))
            .collect();
        let sel = select_volume(&ranked, 643, 0.5);
        assert_eq!(sel.accepted.len(), 322, "round-half-up of 321.5");
        assert!((sel.accepted.len() as i64 - 320).abs() <= 3);
        assert_eq!(
            sel.effective_threshold,
            sel.accepted.last().unwrap().confidence
        );

        // Saturation: fewer available than requested.
        let short: Vec<Decoded> = ranked[..5].to_vec();
        assert_eq!(select_volume(&short, 643, 0.5).accepted.len(), 5);

        // growth_factor 1.0, pool 100, 1000 available.
        assert_eq!(select_volume(&ranked, 100, 1.0).accepted.len(), 100);
    }

    #[test]
    fn threshold_selection() {
        let ranked = vec![
            decoded(LabelClass::Pled, -0.1, "r", 0),
            decoded(LabelClass::Pled, -0.2, "r", 1),
            decoded(LabelClass::Pled, -0.4, "r", 2),
        ];
        assert_eq!(select_threshold(&ranked, -0.25).accepted.len(), 2);
        assert_eq!(select_threshold(&ranked, 0.5).accepted.len(), 0);
        assert_eq!(
            select_threshold(&ranked, f64::NEG_INFINITY).accepted.len(),
            3
        );
    }

    #[test]
    fn sweep_counts_are_non_increasing() {
        let ranked: Vec<Decoded> = (0..100)
            .map(|i| decoded(LabelClass::Spsw, -(i as f64) / 50.0, "r", i))
            .collect();
        let cuts = vec![-2.0, -1.0, -0.5, -0.1, 0.0];
        let table = sweep_threshold(&ranked, &cuts).unwrap();
        for w in table.windows(2) {
            assert!(w[0].0 < w[1].0);
            assert!(w[0].1 >= w[1].1);
        }
        // A cut at the maximum confidence keeps at least one epoch.
        let max_conf = ranked[0].confidence;
        assert!(sweep_threshold(&ranked, &[max_conf]).unwrap()[0].1 >= 1);
        assert!(sweep_threshold(&ranked, &[]).is_err());
    }

    #[test]
    fn policy_adjustment_recurrence() {
        let pools = {
            let mut p = [0usize; 6];
            p[LabelClass::Spsw.index()] = 643;
            p
        };
        let policy = SelectionPolicy::volume(0.5, &pools, false);
        assert_eq!(policy.target_counts[LabelClass::Spsw.index()], 322);

        let mut grown = pools;
        grown[LabelClass::Spsw.index()] = 965;
        let next = adjust_policy(&policy, &grown);
        assert_eq!(next.target_counts[LabelClass::Spsw.index()], 483);
        assert_eq!(next.iteration, policy.iteration + 1);

        let s2 = SelectionPolicy::threshold([-0.2; 6], ScoreKind::Confidence, false);
        let s2_next = adjust_policy(&s2, &grown);
        assert_eq!(s2_next.thresholds, s2.thresholds);
        assert_eq!(s2_next.iteration, 1);
    }

    #[test]
    fn background_classes_default_to_disabled() {
        let pools = [100usize; 6];
        let policy = SelectionPolicy::volume(0.5, &pools, false);
        for c in LabelClass::ALL {
            assert_eq!(policy.enabled[c.index()], c.is_signal());
            if c.is_background() {
                assert_eq!(policy.target_counts[c.index()], 0);
            }
        }
        let all_on = SelectionPolicy::volume(0.5, &pools, true);
        assert!(all_on.enabled.iter().all(|&e| e));
    }

    #[test]
    fn accepted_sets_are_disjoint_across_classes() {
        let mut batch = Vec::new();
        for (i, c) in LabelClass::ALL.iter().enumerate() {
            for j in 0..10 {
                batch.push(decoded(*c, -0.01 * j as f64, "r", i * 10 + j));
            }
        }
        let policy = SelectionPolicy::volume(0.5, &[8; 6], true);
        let result = select(&batch, &policy).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for sel in &result.per_class {
            for d in &sel.accepted {
                assert!(seen.insert(d.id.clone()), "epoch accepted twice");
                assert!(d.confidence >= sel.effective_threshold);
            }
        }
    }

    #[test]
    fn selection_is_monotone_in_confidence() {
        let ranked: Vec<Decoded> = (0..50)
            .map(|i| decoded(LabelClass::Gped, -(i as f64) * 0.02, "r", i))
            .collect();
        let sel = select_volume(&ranked, 40, 0.5);
        let accepted: std::collections::BTreeSet<usize> =
            sel.accepted.iter().map(|d| d.id.index).collect();
        for a in &sel.accepted {
            for b in &ranked {
                if b.confidence > a.confidence {
                    assert!(accepted.contains(&b.id.index));
                }
            }
        }
    }
}
