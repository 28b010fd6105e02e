//! Evaluation metrics for one-class scoring — AUC, EER/HTER, and the
//! BPCER/APCER/ACER family — plus the exhaustive hyperparameter grid search.
//!
//! All metrics work on an oriented score axis. With
//! `Orientation::HigherIsTarget` (the default everywhere), a sample is
//! accepted as target iff its score is ≥ the threshold.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataio::{Label, MklConfig};
use crate::{Error, Result};

/// Which end of the score axis is target-like.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    HigherIsTarget,
    LowerIsTarget,
}

impl Orientation {
    fn orient(&self, score: f64) -> f64 {
        match self {
            Orientation::HigherIsTarget => score,
            Orientation::LowerIsTarget => -score,
        }
    }
}

impl std::str::FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "higher" => Ok(Orientation::HigherIsTarget),
            "lower" => Ok(Orientation::LowerIsTarget),
            other => Err(Error::InvalidParam(format!(
                "unknown orientation {other:?}; expected higher or lower"
            ))),
        }
    }
}

/// Scores with labels (and optional attack-instrument tags) for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet {
    pub scores: Vec<f64>,
    pub labels: Vec<Label>,
}

impl EvalSet {
    pub fn new(scores: Vec<f64>, labels: Vec<Label>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} scores for {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidParam("non-finite score".into()));
        }
        Ok(Self { scores, labels })
    }

    fn split(&self, orientation: Orientation) -> (Vec<f64>, Vec<f64>) {
        let mut targets = Vec::new();
        let mut nontargets = Vec::new();
        for (score, label) in self.scores.iter().zip(&self.labels) {
            let s = orientation.orient(*score);
            if label.target {
                targets.push(s);
            } else {
                nontargets.push(s);
            }
        }
        (targets, nontargets)
    }

    fn split_checked(&self, orientation: Orientation) -> Result<(Vec<f64>, Vec<f64>)> {
        let (targets, nontargets) = self.split(orientation);
        if targets.is_empty() || nontargets.is_empty() {
            return Err(Error::SingleClass(format!(
                "{} targets, {} nontargets",
                targets.len(),
                nontargets.len()
            )));
        }
        Ok((targets, nontargets))
    }
}

/// Probability that a random target outscores a random non-target, ties
/// counted one half (rank-based Mann–Whitney statistic).
pub fn auc(eval: &EvalSet, orientation: Orientation) -> Result<f64> {
    let (targets, nontargets) = eval.split_checked(orientation)?;
    let nt = targets.len();
    let nn = nontargets.len();
    let mut all: Vec<(f64, bool)> = targets
        .iter()
        .map(|&s| (s, true))
        .chain(nontargets.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite scores"));
    // average ranks over tie groups, 1-based
    let mut rank_sum_targets = 0.0f64;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        let avg_rank = ((i + 1) + j) as f64 / 2.0;
        for item in &all[i..j] {
            if item.1 {
                rank_sum_targets += avg_rank;
            }
        }
        i = j;
    }
    let u = rank_sum_targets - (nt * (nt + 1)) as f64 / 2.0;
    Ok(u / (nt as f64 * nn as f64))
}

fn far_at(nontargets: &[f64], threshold: f64) -> f64 {
    nontargets.iter().filter(|&&s| s >= threshold).count() as f64 / nontargets.len() as f64
}

fn frr_at(targets: &[f64], threshold: f64) -> f64 {
    targets.iter().filter(|&&s| s < threshold).count() as f64 / targets.len() as f64
}

/// Equal-error-rate operating point on the oriented score axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EerPoint {
    /// Threshold in oriented score space (apply the same orientation before
    /// comparing raw scores against it).
    pub threshold: f64,
    pub eer: f64,
}

/// Threshold where the false-accept and false-reject rates cross, found by
/// linear interpolation between adjacent operating points.
pub fn eer_threshold(dev: &EvalSet, orientation: Orientation) -> Result<EerPoint> {
    let (targets, nontargets) = dev.split_checked(orientation)?;
    let mut candidates: Vec<f64> = targets.iter().chain(nontargets.iter()).copied().collect();
    candidates.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    candidates.dedup();
    let span = (candidates[candidates.len() - 1] - candidates[0]).max(1.0);
    let mut thresholds = Vec::with_capacity(candidates.len() + 1);
    thresholds.push(candidates[0] - span);
    for pair in candidates.windows(2) {
        thresholds.push((pair[0] + pair[1]) / 2.0);
    }
    thresholds.push(candidates[candidates.len() - 1] + span);

    // d(t) = FAR − FRR is non-increasing in t, from +1 down to −1
    let mut prev_t = thresholds[0];
    let mut prev_d = far_at(&nontargets, prev_t) - frr_at(&targets, prev_t);
    for &t in &thresholds[1..] {
        let d = far_at(&nontargets, t) - frr_at(&targets, t);
        if d <= 0.0 {
            let threshold = if d == 0.0 || prev_d == d {
                t
            } else {
                prev_t + prev_d * (t - prev_t) / (prev_d - d)
            };
            let far = far_at(&nontargets, threshold);
            let frr = frr_at(&targets, threshold);
            return Ok(EerPoint {
                threshold,
                eer: (far + frr) / 2.0,
            });
        }
        prev_t = t;
        prev_d = d;
    }
    Err(Error::Internal("no equal-error crossing found".into()))
}

/// Half total error rate on a test set at a fixed threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HterReport {
    pub threshold: f64,
    pub dev_eer: f64,
    pub far: f64,
    pub frr: f64,
    pub hter: f64,
}

/// Fixes the threshold at the dev-set equal error rate, then reports
/// (FAR + FRR)/2 on the test set at that threshold.
pub fn hter(dev: &EvalSet, test: &EvalSet, orientation: Orientation) -> Result<HterReport> {
    let point = eer_threshold(dev, orientation)?;
    let (targets, nontargets) = test.split_checked(orientation)?;
    let far = far_at(&nontargets, point.threshold);
    let frr = frr_at(&targets, point.threshold);
    Ok(HterReport {
        threshold: point.threshold,
        dev_eer: point.eer,
        far,
        frr,
        hter: (far + frr) / 2.0,
    })
}

/// BPCER / per-instrument APCER / ACER at a threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcerReport {
    /// Fraction of targets rejected.
    pub bpcer: f64,
    /// Fraction of each instrument's attacks accepted.
    pub apcer_per_instrument: BTreeMap<String, f64>,
    pub max_apcer: f64,
    /// (BPCER + worst APCER) / 2.
    pub acer: f64,
}

/// Average classification error rate over the worst attack instrument.
/// Every non-target sample must carry an instrument tag.
pub fn acer(eval: &EvalSet, threshold: f64, orientation: Orientation) -> Result<AcerReport> {
    let mut target_total = 0usize;
    let mut target_rejected = 0usize;
    let mut per_instrument: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (score, label) in eval.scores.iter().zip(&eval.labels) {
        let s = orientation.orient(*score);
        if label.target {
            target_total += 1;
            if s < threshold {
                target_rejected += 1;
            }
        } else {
            let tag = label
                .instrument
                .as_ref()
                .ok_or(Error::MissingInstrumentTags)?;
            let entry = per_instrument.entry(tag.clone()).or_insert((0, 0));
            entry.0 += 1;
            if s >= threshold {
                entry.1 += 1;
            }
        }
    }
    if target_total == 0 || per_instrument.is_empty() {
        return Err(Error::SingleClass(
            "acer needs targets and tagged non-targets".into(),
        ));
    }
    let bpcer = target_rejected as f64 / target_total as f64;
    let apcer_per_instrument: BTreeMap<String, f64> = per_instrument
        .into_iter()
        .map(|(tag, (total, accepted))| (tag, accepted as f64 / total as f64))
        .collect();
    let max_apcer = apcer_per_instrument
        .values()
        .fold(0.0f64, |acc, &v| acc.max(v));
    Ok(AcerReport {
        bpcer,
        apcer_per_instrument,
        max_apcer,
        acer: (bpcer + max_apcer) / 2.0,
    })
}

/// Hyperparameter grid: δ multipliers (×n) and exponent candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub delta_multipliers: Vec<f64>,
    pub p_values: Vec<f64>,
    pub q_values: Vec<f64>,
}

impl Default for GridSpec {
    /// The standard search grid: δ/n ∈ {1e-3, 1e-2, 1e-1, 1, 10, 100} and
    /// p, q ∈ {32/31, 16/15, 8/7, 4/3, 2, 4, 8, 10}.
    fn default() -> Self {
        let exponents = vec![
            32.0 / 31.0,
            16.0 / 15.0,
            8.0 / 7.0,
            4.0 / 3.0,
            2.0,
            4.0,
            8.0,
            10.0,
        ];
        Self {
            delta_multipliers: vec![1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0],
            p_values: exponents.clone(),
            q_values: exponents,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.delta_multipliers.is_empty() || self.p_values.is_empty() || self.q_values.is_empty()
        {
            return Err(Error::EmptyGrid(
                "delta multipliers, p values, and q values must be non-empty".into(),
            ));
        }
        if self
            .delta_multipliers
            .iter()
            .any(|v| *v <= 0.0 || !v.is_finite())
        {
            return Err(Error::EmptyGrid("delta multipliers must be positive".into()));
        }
        if self
            .p_values
            .iter()
            .chain(self.q_values.iter())
            .any(|v| *v < 1.0 || !v.is_finite())
        {
            return Err(Error::EmptyGrid("exponents must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// What `tune` maximises on the dev set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMetric {
    Auc,
    /// 1 − EER on the dev set.
    OneMinusEer,
}

impl std::str::FromStr for SelectionMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auc" => Ok(SelectionMetric::Auc),
            "eer" | "one-minus-eer" => Ok(SelectionMetric::OneMinusEer),
            other => Err(Error::InvalidParam(format!(
                "unknown selection metric {other:?}; expected auc or eer"
            ))),
        }
    }
}

/// One evaluated grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub delta_multiplier: f64,
    pub delta: f64,
    pub p: f64,
    pub q: f64,
    pub score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub best: MklConfig,
    pub best_score: f64,
    pub cells: Vec<GridCell>,
}

/// Exhaustively evaluates every (δ, p, q) cell with the supplied closure and
/// returns the config maximising its score. Cells are visited in ascending
/// lexicographic (δ, p, q) order and ties keep the earlier cell, so the
/// lexicographically smallest winner is returned. Cell failures are recorded;
/// only a fully failed grid is an error.
pub fn grid_search<F>(
    grid: &GridSpec,
    base: &MklConfig,
    n_train: usize,
    mut evaluate: F,
) -> Result<GridSearchResult>
where
    F: FnMut(&MklConfig) -> Result<f64>,
{
    grid.validate()?;
    if n_train == 0 {
        return Err(Error::InvalidParam("empty training set".into()));
    }
    let mut multipliers = grid.delta_multipliers.clone();
    multipliers.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    let mut p_values = grid.p_values.clone();
    p_values.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    let mut q_values = grid.q_values.clone();
    q_values.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));

    let mut cells = Vec::with_capacity(multipliers.len() * p_values.len() * q_values.len());
    let mut best: Option<(f64, MklConfig)> = None;
    let mut first_error: Option<String> = None;
    for &dm in &multipliers {
        for &p in &p_values {
            for &q in &q_values {
                let mut cfg = base.clone();
                cfg.delta = dm * n_train as f64;
                cfg.p = p;
                cfg.q = q;
                match evaluate(&cfg) {
                    Ok(score) => {
                        let better = match &best {
                            None => true,
                            Some((s, _)) => score > *s,
                        };
                        if better {
                            best = Some((score, cfg.clone()));
                        }
                        cells.push(GridCell {
                            delta_multiplier: dm,
                            delta: cfg.delta,
                            p,
                            q,
                            score: Some(score),
                            error: None,
                        });
                    }
                    Err(e) => {
                        if first_error.is_none() {
                            first_error = Some(e.to_string());
                        }
                        cells.push(GridCell {
                            delta_multiplier: dm,
                            delta: cfg.delta,
                            p,
                            q,
                            score: None,
                            error: Some(e.to_string()),
                        });
                    }
                }
            }
        }
    }
    match best {
        Some((best_score, best)) => Ok(GridSearchResult {
            best,
            best_score,
            cells,
        }),
        None => Err(Error::AllCellsFailed(
            first_error.unwrap_or_else(|| "no cells evaluated".into()),
        )),
    }
}

/// One-vs-rest protocols for a multi-class label column: for each class, the
/// indices of its samples (training targets) and of all other samples
/// (non-targets for tuning/evaluation).
pub fn one_vs_rest_protocols(classes: &[String]) -> Vec<(String, Vec<usize>, Vec<usize>)> {
    let mut seen = Vec::new();
    for c in classes {
        if !seen.contains(c) {
            seen.push(c.clone());
        }
    }
    seen.into_iter()
        .map(|class| {
            let (inside, outside): (Vec<usize>, Vec<usize>) =
                (0..classes.len()).partition(|&i| classes[i] == class);
            (class, inside, outside)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn target() -> Label {
        Label {
            target: true,
            instrument: None,
        }
    }

    fn attack(tag: &str) -> Label {
        Label {
            target: false,
            instrument: Some(tag.to_string()),
        }
    }

    fn eval(scores: &[f64], targets: usize) -> EvalSet {
        let labels = (0..scores.len())
            .map(|i| if i < targets { target() } else { attack("inst") })
            .collect();
        EvalSet::new(scores.to_vec(), labels).unwrap()
    }

    #[test]
    fn auc_perfect_separation_is_one() {
        let e = eval(&[0.9, 0.8, 0.2, 0.1], 2);
        assert!((auc(&e, Orientation::HigherIsTarget).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn auc_all_ties_is_half() {
        let e = eval(&[0.5, 0.5, 0.5, 0.5], 2);
        assert!((auc(&e, Orientation::HigherIsTarget).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn auc_counts_pairwise_wins() {
        // targets [0.9, 0.8] vs nontargets [0.85, 0.1]: one inversion in four pairs
        let e = eval(&[0.9, 0.8, 0.85, 0.1], 2);
        assert!((auc(&e, Orientation::HigherIsTarget).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn auc_matches_pair_enumeration_oracle() {
        let scores = [0.3, 0.9, 0.42, 0.42, 0.8, 0.1, 0.42, 0.55];
        let e = eval(&scores, 4);
        let mut wins = 0.0;
        for t in &scores[..4] {
            for n in &scores[4..] {
                if t > n {
                    wins += 1.0;
                } else if t == n {
                    wins += 0.5;
                }
            }
        }
        let want = wins / 16.0;
        assert!((auc(&e, Orientation::HigherIsTarget).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn auc_is_invariant_under_increasing_transforms() {
        let scores = [0.3, 0.9, 0.42, 0.8, 0.1, 0.55, 0.2];
        let e = eval(&scores, 3);
        let base = auc(&e, Orientation::HigherIsTarget).unwrap();
        let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() + 7.0).collect();
        let e2 = eval(&transformed, 3);
        assert_eq!(base, auc(&e2, Orientation::HigherIsTarget).unwrap());
    }

    #[test]
    fn auc_requires_both_classes() {
        let e = EvalSet::new(vec![0.4, 0.6], vec![target(), target()]).unwrap();
        assert!(matches!(
            auc(&e, Orientation::HigherIsTarget),
            Err(Error::SingleClass(_))
        ));
    }

    #[test]
    fn eer_on_hand_built_dev_set() {
        // targets [0.9, 0.8, 0.3], nontargets [0.7, 0.2, 0.1]:
        // FAR = FRR = 1/3 between 0.3 and 0.7, crossing at the midpoint 0.5
        let e = eval(&[0.9, 0.8, 0.3, 0.7, 0.2, 0.1], 3);
        let point = eer_threshold(&e, Orientation::HigherIsTarget).unwrap();
        assert!((point.threshold - 0.5).abs() < 1e-12);
        assert!((point.eer - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn hter_zero_when_test_repeats_a_separable_dev() {
        let dev = eval(&[0.9, 0.8, 0.2, 0.1], 2);
        let report = hter(&dev, &dev, Orientation::HigherIsTarget).unwrap();
        assert_eq!(report.hter, 0.0);
        assert_eq!(report.dev_eer, 0.0);
    }

    #[test]
    fn hter_hand_case() {
        let dev = eval(&[0.9, 0.8, 0.3, 0.7, 0.2, 0.1], 3);
        let test = eval(&[0.9, 0.8, 0.45, 0.7, 0.3, 0.6], 4);
        let report = hter(&dev, &test, Orientation::HigherIsTarget).unwrap();
        // threshold 0.5: FRR = 1/4 (0.45), FAR = 1/2 (0.6) → HTER = 0.375
        assert!((report.hter - 0.375).abs() < 1e-12);
    }

    #[test]
    fn hter_near_half_for_random_scores() {
        let mut scores = Vec::new();
        let mut state = 0x2545F4914F6CDD1Du64;
        for _ in 0..2000 {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            scores.push((state >> 11) as f64 / (1u64 << 53) as f64);
        }
        let dev = eval(&scores[..1000], 500);
        let test = eval(&scores[1000..], 500);
        let report = hter(&dev, &test, Orientation::HigherIsTarget).unwrap();
        assert!((report.hter - 0.5).abs() < 0.05, "hter {}", report.hter);
    }

    #[test]
    fn hter_is_identical_under_sign_flip_with_reversed_orientation() {
        let dev = eval(&[0.9, 0.8, 0.3, 0.7, 0.2, 0.1], 3);
        let test = eval(&[0.9, 0.8, 0.45, 0.7, 0.3, 0.6], 4);
        let a = hter(&dev, &test, Orientation::HigherIsTarget).unwrap();
        let flip = |e: &EvalSet| {
            EvalSet::new(e.scores.iter().map(|s| -s).collect(), e.labels.clone()).unwrap()
        };
        let b = hter(&flip(&dev), &flip(&test), Orientation::LowerIsTarget).unwrap();
        assert_eq!(a.hter, b.hter);
        assert_eq!(a.far, b.far);
        assert_eq!(a.frr, b.frr);
    }

    #[test]
    fn acer_uses_the_worst_instrument() {
        // 100 targets with 2 rejected → BPCER 0.02;
        // instrument A: 25 attacks, 1 accepted → 0.04;
        // instrument B: 50 attacks, 3 accepted → 0.06; ACER = (0.02+0.06)/2
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for i in 0..100 {
            scores.push(if i < 2 { 0.1 } else { 0.9 });
            labels.push(target());
        }
        for i in 0..25 {
            scores.push(if i < 1 { 0.9 } else { 0.1 });
            labels.push(attack("A"));
        }
        for i in 0..50 {
            scores.push(if i < 3 { 0.9 } else { 0.1 });
            labels.push(attack("B"));
        }
        let e = EvalSet::new(scores, labels).unwrap();
        let report = acer(&e, 0.5, Orientation::HigherIsTarget).unwrap();
        assert!((report.bpcer - 0.02).abs() < 1e-12);
        assert!((report.apcer_per_instrument["A"] - 0.04).abs() < 1e-12);
        assert!((report.apcer_per_instrument["B"] - 0.06).abs() < 1e-12);
        assert!((report.acer - 0.04).abs() < 1e-12);
    }

    #[test]
    fn acer_perfect_classifier_is_all_zeros() {
        let e = EvalSet::new(
            vec![0.9, 0.8, 0.1, 0.2],
            vec![target(), target(), attack("A"), attack("B")],
        )
        .unwrap();
        let report = acer(&e, 0.5, Orientation::HigherIsTarget).unwrap();
        assert_eq!(report.bpcer, 0.0);
        assert_eq!(report.max_apcer, 0.0);
        assert_eq!(report.acer, 0.0);
    }

    #[test]
    fn acer_accept_everything_threshold() {
        let e = EvalSet::new(
            vec![0.9, 0.1, 0.2],
            vec![target(), attack("A"), attack("B")],
        )
        .unwrap();
        let report = acer(&e, f64::NEG_INFINITY, Orientation::HigherIsTarget).unwrap();
        assert_eq!(report.bpcer, 0.0);
        assert!(report.apcer_per_instrument.values().all(|&v| v == 1.0));
        assert_eq!(report.acer, 0.5);
    }

    #[test]
    fn acer_requires_instrument_tags() {
        let e = EvalSet::new(
            vec![0.9, 0.1],
            vec![
                target(),
                Label {
                    target: false,
                    instrument: None,
                },
            ],
        )
        .unwrap();
        assert!(matches!(
            acer(&e, 0.5, Orientation::HigherIsTarget),
            Err(Error::MissingInstrumentTags)
        ));
    }

    #[test]
    fn acer_stays_in_range_and_dominates_half_the_worst_rate() {
        let mut state = 0x9E3779B97F4A7C15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..20 {
            let mut scores = Vec::new();
            let mut labels = Vec::new();
            for i in 0..40 {
                scores.push(next());
                labels.push(if i < 15 {
                    target()
                } else {
                    attack(if i % 2 == 0 { "A" } else { "B" })
                });
            }
            let e = EvalSet::new(scores, labels).unwrap();
            let report = acer(&e, 0.5, Orientation::HigherIsTarget).unwrap();
            assert!((0.0..=1.0).contains(&report.acer));
            assert!(report.acer >= report.bpcer.max(report.max_apcer) / 2.0 - 1e-15);
        }
    }

    #[test]
    fn default_grid_has_the_standard_sizes() {
        let grid = GridSpec::default();
        assert_eq!(grid.delta_multipliers.len(), 6);
        assert_eq!(grid.p_values.len(), 8);
        assert_eq!(grid.q_values.len(), 8);
    }

    #[test]
    fn grid_search_enumerates_every_cell_and_breaks_ties_lexicographically() {
        let grid = GridSpec::default();
        let base = MklConfig::new(2.0, 2.0, 1.0);
        let result = grid_search(&grid, &base, 10, |_cfg| Ok(0.5)).unwrap();
        assert_eq!(result.cells.len(), 384);
        // constant metric → lexicographically smallest cell wins
        assert!((result.best.delta - 1e-3 * 10.0).abs() < 1e-12);
        assert!((result.best.p - 32.0 / 31.0).abs() < 1e-12);
        assert!((result.best.q - 32.0 / 31.0).abs() < 1e-12);
    }

    #[test]
    fn single_cell_grid_returns_that_cell() {
        let grid = GridSpec {
            delta_multipliers: vec![0.5],
            p_values: vec![2.0],
            q_values: vec![4.0],
        };
        let base = MklConfig::new(1.0, 1.0, 1.0);
        let result = grid_search(&grid, &base, 8, |cfg| Ok(cfg.delta)).unwrap();
        assert!((result.best.delta - 4.0).abs() < 1e-12);
        assert_eq!(result.best.q, 4.0);
    }

    #[test]
    fn failed_cells_are_recorded_and_a_dead_grid_errors() {
        let grid = GridSpec {
            delta_multipliers: vec![1.0, 2.0],
            p_values: vec![2.0],
            q_values: vec![2.0],
        };
        let base = MklConfig::new(2.0, 2.0, 1.0);
        let result = grid_search(&grid, &base, 4, |cfg| {
            if cfg.delta > 5.0 {
                Err(Error::DegenerateWeights)
            } else {
                Ok(1.0)
            }
        })
        .unwrap();
        assert_eq!(result.cells.iter().filter(|c| c.error.is_some()).count(), 1);
        let all_fail = grid_search(&grid, &base, 4, |_| {
            Err::<f64, _>(Error::DegenerateWeights)
        });
        assert!(matches!(all_fail, Err(Error::AllCellsFailed(_))));
    }

    #[test]
    fn one_vs_rest_splits_cover_everything() {
        let classes: Vec<String> = ["cat", "dog", "cat", "bird"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let protocols = one_vs_rest_protocols(&classes);
        assert_eq!(protocols.len(), 3);
        let (name, inside, outside) = &protocols[0];
        assert_eq!(name, "cat");
        assert_eq!(inside, &vec![0, 2]);
        assert_eq!(outside, &vec![1, 3]);
    }
}
