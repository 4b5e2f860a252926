//! Classification metrics, the majority baseline and the train/test harness.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::classifier::{ClassifierError, GenderModel, Hyperparams};
use crate::dataset::{GenderLabel, UserProfile};
use crate::features::{FeatureError, FeatureExtractor, FeatureSet, NgramRange, TweetMode, DEFAULT_NGRAM_RANGE};

/// Share of the shuffled training set held out for calibration.
pub const CALIBRATION_FRACTION: f64 = 0.1;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{predictions} predictions for {gold} gold labels")]
    LengthMismatch { predictions: usize, gold: usize },
    #[error("no instances to evaluate")]
    Empty,
    #[error("{which} label at index {index} is Unknown")]
    UnknownLabel { which: &'static str, index: usize },
    #[error("{set} profile {user_id:?} has no gold gender")]
    MissingGold { set: &'static str, user_id: String },
    #[error("split file line {line}: {message}")]
    Split { line: usize, message: String },
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

/// Rounds half up to one decimal. The small epsilon absorbs binary
/// representation error so that e.g. 26.65 becomes 26.7.
pub fn round1(x: f64) -> f64 {
    ((x * 10.0) + 0.5 + 1e-9).floor() / 10.0
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Unrounded metrics as fractions in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RawMetrics {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ExperimentLabel {
    pub train_set: String,
    pub features: String,
}

/// Metrics in percent, rounded to one decimal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub raw: RawMetrics,
    /// `confusion[gold][predicted]` with index 0 = Male, 1 = Female.
    pub confusion: [[u64; 2]; 2],
    pub config: ExperimentLabel,
}

impl EvalReport {
    pub fn total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }

    /// Tab-separated: train data, features, Acc, P, R, F1.
    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{:.1}\t{:.1}\t{:.1}\t{:.1}",
            self.config.train_set, self.config.features, self.accuracy, self.macro_precision, self.macro_recall, self.macro_f1
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub const TSV_HEADER: &str = "train_data\tfeatures\tacc\tp\tr\tf1";

fn class_index(label: GenderLabel) -> Option<usize> {
    match label {
        GenderLabel::Male => Some(0),
        GenderLabel::Female => Some(1),
        GenderLabel::Unknown => None,
    }
}

/// Accuracy and macro-averaged precision, recall and F1 over the two
/// classes. Per-class values with a zero denominator count as 0.
pub fn compute_metrics(predictions: &[GenderLabel], gold: &[GenderLabel]) -> Result<EvalReport, EvalError> {
    if predictions.len() != gold.len() {
        return Err(EvalError::LengthMismatch { predictions: predictions.len(), gold: gold.len() });
    }
    if gold.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut confusion = [[0u64; 2]; 2];
    for (index, (p, g)) in predictions.iter().zip(gold).enumerate() {
        let gi = class_index(*g).ok_or(EvalError::UnknownLabel { which: "gold", index })?;
        let pi = class_index(*p).ok_or(EvalError::UnknownLabel { which: "predicted", index })?;
        confusion[gi][pi] += 1;
    }
    let n = gold.len() as u64;
    let correct = confusion[0][0] + confusion[1][1];
    let (mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0);
    #[allow(clippy::needless_range_loop)]
    for c in 0..2 {
        let tp = confusion[c][c];
        let predicted = confusion[0][c] + confusion[1][c];
        let actual = confusion[c][0] + confusion[c][1];
        let p = ratio(tp, predicted);
        let r = ratio(tp, actual);
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        p_sum += p;
        r_sum += r;
        f_sum += f;
    }
    let raw = RawMetrics {
        accuracy: ratio(correct, n),
        macro_precision: p_sum / 2.0,
        macro_recall: r_sum / 2.0,
        macro_f1: f_sum / 2.0,
    };
    Ok(EvalReport {
        accuracy: round1(100.0 * raw.accuracy),
        macro_precision: round1(100.0 * raw.macro_precision),
        macro_recall: round1(100.0 * raw.macro_recall),
        macro_f1: round1(100.0 * raw.macro_f1),
        raw,
        confusion,
        config: ExperimentLabel::default(),
    })
}

/// Majority class of `gold`; a tie goes to Male.
pub fn majority_class(gold: &[GenderLabel]) -> GenderLabel {
    let male = gold.iter().filter(|g| **g == GenderLabel::Male).count();
    let female = gold.iter().filter(|g| **g == GenderLabel::Female).count();
    if female > male {
        GenderLabel::Female
    } else {
        GenderLabel::Male
    }
}

pub fn majority_baseline(train_gold: &[GenderLabel], test_gold: &[GenderLabel]) -> Result<EvalReport, EvalError> {
    if train_gold.is_empty() {
        return Err(EvalError::Empty);
    }
    let label = majority_class(train_gold);
    let mut report = compute_metrics(&vec![label; test_gold.len()], test_gold)?;
    report.config.features = "Majority Baseline".into();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub train_set: String,
    pub feature_set: FeatureSet,
    pub tweet_mode: TweetMode,
    pub ngram_range: NgramRange,
    /// `None` uses the per-field default.
    pub min_df: Option<usize>,
    pub hyperparams: Hyperparams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            train_set: "train".into(),
            feature_set: FeatureSet::Usernames,
            tweet_mode: TweetMode::Aggregate,
            ngram_range: DEFAULT_NGRAM_RANGE,
            min_df: None,
            hyperparams: Hyperparams::default(),
        }
    }
}

impl ExperimentConfig {
    fn features_label(&self) -> String {
        match (self.feature_set, self.tweet_mode) {
            (FeatureSet::Tweets, TweetMode::Single) => "Tweets (single)".into(),
            (set, _) => set.to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: EvalReport,
    pub model: GenderModel,
    pub predictions: Vec<GenderLabel>,
}

fn gold_labels(set: &'static str, profiles: &[UserProfile]) -> Result<Vec<GenderLabel>, EvalError> {
    profiles
        .iter()
        .map(|p| {
            if p.gold_gender.is_known() {
                Ok(p.gold_gender)
            } else {
                Err(EvalError::MissingGold { set, user_id: p.user_id.clone() })
            }
        })
        .collect()
}

/// Fits features on `train`, trains on a seeded shuffle of it and
/// calibrates on the last tenth of that shuffle.
pub fn train_model(train: &[UserProfile], config: &ExperimentConfig) -> Result<GenderModel, EvalError> {
    let gold = gold_labels("train", train)?;
    if train.is_empty() {
        return Err(EvalError::Empty);
    }
    let extractor = FeatureExtractor::fit(train, config.feature_set, config.tweet_mode, config.ngram_range, config.min_df)?;
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.hyperparams.seed));
    let n_cal = (train.len() as f64 * CALIBRATION_FRACTION).floor() as usize;
    let (fit_idx, cal_idx) = order.split_at(train.len() - n_cal);
    let examples = |idx: &[usize]| -> Vec<_> { idx.iter().map(|&i| (extractor.transform(&train[i]), gold[i])).collect() };
    let fit_set = examples(fit_idx);
    let cal_set = examples(cal_idx);
    let mut model = GenderModel::train(extractor, &fit_set, &config.hyperparams)?;
    model.calibrate(&cal_set)?;
    Ok(model)
}

/// Trains with [`train_model`] and scores `test`. The test set is never
/// seen during fitting.
pub fn run_experiment(
    train: &[UserProfile],
    test: &[UserProfile],
    config: &ExperimentConfig,
) -> Result<ExperimentOutcome, EvalError> {
    gold_labels("train", train)?;
    let test_gold = gold_labels("test", test)?;
    if test.is_empty() {
        return Err(EvalError::Empty);
    }
    let model = train_model(train, config)?;
    let predictions: Vec<GenderLabel> = test.iter().map(|p| model.predict_profile(p).label).collect();
    let mut report = compute_metrics(&predictions, &test_gold)?;
    report.config = ExperimentLabel { train_set: config.train_set.clone(), features: config.features_label() };
    Ok(ExperimentOutcome { report, model, predictions })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitPart {
    Train,
    Test,
}

/// Reads `user_id<TAB>train|test` lines; `#` starts a comment.
pub fn read_split<R: BufRead>(reader: R) -> Result<HashMap<String, SplitPart>, EvalError> {
    let mut split = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| EvalError::Split { line: i + 1, message };
        let (id, part) = line.split_once('\t').ok_or_else(|| err("expected user_id<TAB>part".into()))?;
        let part = match part.trim() {
            "train" => SplitPart::Train,
            "test" => SplitPart::Test,
            other => return Err(err(format!("unknown part {other:?}"))),
        };
        if split.insert(id.to_owned(), part).is_some() {
            return Err(err(format!("user {id:?} listed twice")));
        }
    }
    Ok(split)
}

/// Partitions profiles by the split map. Profiles not listed are dropped.
pub fn apply_split(
    profiles: &[UserProfile],
    split: &HashMap<String, SplitPart>,
) -> (Vec<UserProfile>, Vec<UserProfile>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for p in profiles {
        match split.get(&p.user_id) {
            Some(SplitPart::Train) => train.push(p.clone()),
            Some(SplitPart::Test) => test.push(p.clone()),
            None => {}
        }
    }
    (train, test)
}

pub fn write_report_tsv<W: Write>(mut out: W, reports: &[EvalReport]) -> io::Result<()> {
    writeln!(out, "{TSV_HEADER}")?;
    for r in reports {
        writeln!(out, "{}", r.tsv_row())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use GenderLabel::{Female as F, Male as M};

    fn labels(m: usize, f: usize) -> Vec<GenderLabel> {
        std::iter::repeat_n(M, m).chain(std::iter::repeat_n(F, f)).collect()
    }

    #[test]
    fn majority_baseline_row() {
        let gold = labels(533, 467);
        let r = compute_metrics(&vec![M; 1000], &gold).unwrap();
        assert_eq!((r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1), (53.3, 26.7, 50.0, 34.8));
        assert_eq!(r.confusion, [[533, 0], [467, 0]]);
    }

    #[test]
    fn perfect_predictions() {
        let gold = labels(3, 4);
        let r = compute_metrics(&gold, &gold).unwrap();
        assert_eq!((r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1), (100.0, 100.0, 100.0, 100.0));
    }

    #[test]
    fn two_by_two_confusion() {
        // TP=2, FN=1, FP=1, TN=2 with Male positive
        let gold = [M, M, M, F, F, F];
        let pred = [M, M, F, M, F, F];
        let r = compute_metrics(&pred, &gold).unwrap();
        assert_eq!(r.confusion, [[2, 1], [1, 2]]);
        assert_eq!((r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1), (66.7, 66.7, 66.7, 66.7));
    }

    #[test]
    fn metric_errors() {
        assert!(matches!(compute_metrics(&[M], &[M, F]), Err(EvalError::LengthMismatch { .. })));
        assert!(matches!(compute_metrics(&[], &[]), Err(EvalError::Empty)));
        assert!(matches!(compute_metrics(&[M], &[GenderLabel::Unknown]), Err(EvalError::UnknownLabel { which: "gold", .. })));
        assert!(matches!(compute_metrics(&[GenderLabel::Unknown], &[F]), Err(EvalError::UnknownLabel { which: "predicted", .. })));
    }

    #[test]
    fn rounding() {
        assert_eq!(round1(26.65), 26.7);
        assert_eq!(round1(34.77), 34.8);
        assert_eq!(round1(66.666), 66.7);
        assert_eq!(round1(50.0), 50.0);
        assert_eq!(round1(0.04), 0.0);
    }

    #[test]
    fn baseline_rules() {
        assert_eq!(majority_class(&labels(8, 2)), M);
        assert_eq!(majority_class(&labels(5, 5)), M);
        assert_eq!(majority_class(&labels(2, 3)), F);
        let r = majority_baseline(&labels(8, 2), &labels(5, 0)).unwrap();
        assert_eq!((r.accuracy, r.macro_f1), (100.0, 50.0));
        assert!(matches!(majority_baseline(&[], &labels(1, 0)), Err(EvalError::Empty)));
    }

    #[test]
    fn tsv_and_json() {
        let mut r = compute_metrics(&vec![M; 1000], &labels(533, 467)).unwrap();
        r.config = ExperimentLabel { train_set: "ours".into(), features: "Usernames".into() };
        assert_eq!(r.tsv_row(), "ours\tUsernames\t53.3\t26.7\t50.0\t34.8");
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["confusion"][1][0], 467);
        assert_eq!(v["config"]["features"], "Usernames");
    }

    #[test]
    fn split_file() {
        let split = read_split("# header\na\ttrain\nb\ttest\n\nc\ttest\n".as_bytes()).unwrap();
        let ps: Vec<UserProfile> =
            ["a", "b", "c", "d"].iter().map(|id| UserProfile { user_id: (*id).into(), ..Default::default() }).collect();
        let (train, test) = apply_split(&ps, &split);
        assert_eq!(train.iter().map(|p| p.user_id.as_str()).collect::<Vec<_>>(), ["a"]);
        assert_eq!(test.iter().map(|p| p.user_id.as_str()).collect::<Vec<_>>(), ["b", "c"]);
        assert!(matches!(read_split("a\tdev\n".as_bytes()), Err(EvalError::Split { line: 1, .. })));
        assert!(matches!(read_split("a\ttrain\na\ttest\n".as_bytes()), Err(EvalError::Split { line: 2, .. })));
    }

    #[test]
    fn missing_gold_is_rejected() {
        let ps = vec![UserProfile { user_id: "x".into(), display_name: "x".into(), ..Default::default() }];
        assert!(matches!(
            run_experiment(&ps, &ps, &ExperimentConfig::default()),
            Err(EvalError::MissingGold { set: "train", .. })
        ));
    }

    fn arb_pairs() -> impl Strategy<Value = Vec<(bool, bool)>> {
        prop::collection::vec((any::<bool>(), any::<bool>()), 1..60)
    }

    fn to_labels(xs: &[(bool, bool)]) -> (Vec<GenderLabel>, Vec<GenderLabel>) {
        let l = |b: bool| if b { M } else { F };
        xs.iter().map(|&(p, g)| (l(p), l(g))).unzip()
    }

    proptest! {
        #[test]
        fn permutation_invariant(xs in arb_pairs(), seed in any::<u64>()) {
            let (p, g) = to_labels(&xs);
            let mut shuffled = xs.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let (sp, sg) = to_labels(&shuffled);
            prop_assert_eq!(compute_metrics(&p, &g).unwrap(), compute_metrics(&sp, &sg).unwrap());
        }

        #[test]
        fn swapping_classes_keeps_macro(xs in arb_pairs()) {
            let (p, g) = to_labels(&xs);
            let flip = |v: &[GenderLabel]| v.iter().map(|l| if *l == M { F } else { M }).collect::<Vec<_>>();
            let a = compute_metrics(&p, &g).unwrap();
            let b = compute_metrics(&flip(&p), &flip(&g)).unwrap();
            prop_assert!((a.raw.macro_f1 - b.raw.macro_f1).abs() < 1e-12);
            prop_assert!((a.raw.macro_precision - b.raw.macro_precision).abs() < 1e-12);
            prop_assert!((a.raw.macro_recall - b.raw.macro_recall).abs() < 1e-12);
            prop_assert_eq!(a.accuracy, b.accuracy);
        }

        #[test]
        fn metric_ranges(xs in arb_pairs()) {
            let (p, g) = to_labels(&xs);
            let r = compute_metrics(&p, &g).unwrap();
            prop_assert_eq!(r.total(), xs.len() as u64);
            for m in [r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1] {
                prop_assert!((0.0..=100.0).contains(&m));
            }
        }
    }
}
