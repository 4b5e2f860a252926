//! Linear max-margin gender classifier over sparse n-gram vectors.
//!
//! Training minimizes the L2-regularized hinge objective
//!
//! ```text
//! F(w, b) = λ/2 · (‖w‖² + b²) + 1/n · Σ max(0, 1 − yᵢ(w·xᵢ + b))
//! ```
//!
//! with stochastic subgradient steps of size 1/(λt) over seeded shuffles of
//! the training set. The bias is an extra constant feature and shares the
//! penalty. Positive margins mean Male; a margin of exactly 0 is Male too.

use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::GenderLabel;
use crate::features::{
    FeatureError, FeatureExtractor, FeatureSet, FieldTag, NgramRange, SparseVector, TweetMode, Vocabulary,
};

pub const FORMAT_MAJOR: u32 = 1;
pub const FORMAT_MINOR: u32 = 0;
const HEADER_PREFIX: &str = "profile-gender model ";

/// Default p(Male) below which the prediction counts as not confidently Male.
pub const DEFAULT_CONFIDENCE_TAU: f64 = 0.8;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("no training examples")]
    NoExamples,
    #[error("training data must contain both classes (got {male} male, {female} female)")]
    SingleClass { male: usize, female: usize },
    #[error("example {0} has an Unknown label")]
    UnknownLabel(usize),
    #[error("example {0} has a non-finite feature value")]
    NonFinite(usize),
    #[error("vector needs dimension {needed}, model has {dim}")]
    DimensionMismatch { needed: usize, dim: usize },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("model format {found} is not supported (this build reads {supported})")]
    Version { found: String, supported: String },
    #[error("model file is truncated")]
    Truncated,
    #[error("model file is corrupt: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub lambda: f64,
    pub epochs: u32,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams { lambda: 1e-4, epochs: 20, seed: 42 }
    }
}

impl Hyperparams {
    fn validate(&self) -> Result<(), ClassifierError> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(ClassifierError::InvalidHyperparams(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.epochs == 0 {
            return Err(ClassifierError::InvalidHyperparams("epochs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingMeta {
    /// Hinge objective at the returned solution.
    pub objective: f64,
    pub n_examples: u64,
}

/// Logistic map from margin to p(Male): `σ(slope · margin + intercept)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub slope: f64,
    pub intercept: f64,
    pub fitted: bool,
}

impl Calibration {
    pub const IDENTITY: Calibration = Calibration { slope: 1.0, intercept: 0.0, fitted: false };

    pub fn p_male(&self, margin: f64) -> f64 {
        sigmoid(self.slope * margin + self.intercept)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CalibrationStatus {
    Fitted { slope: f64 },
    /// Calibration left at identity.
    Degenerate(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: GenderLabel,
    pub margin: f64,
    pub p_male: f64,
}

impl Prediction {
    /// Probability of the predicted label, always at least 0.5.
    pub fn confidence(&self) -> f64 {
        match self.label {
            GenderLabel::Female => 1.0 - self.p_male,
            _ => self.p_male,
        }
    }
}

fn label_sign(label: GenderLabel) -> Option<f64> {
    match label {
        GenderLabel::Male => Some(1.0),
        GenderLabel::Female => Some(-1.0),
        GenderLabel::Unknown => None,
    }
}

/// Linear decision function `w·x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn margin(&self, v: &SparseVector) -> Result<f64, ClassifierError> {
        let needed = v.min_dim();
        if needed > self.weights.len() {
            return Err(ClassifierError::DimensionMismatch { needed, dim: self.weights.len() });
        }
        Ok(v.dot_dense(&self.weights) + self.bias)
    }
}

/// `λ/2 (‖w‖² + b²) + mean hinge loss`. Examples with Unknown labels are
/// skipped.
pub fn hinge_objective(model: &LinearModel, examples: &[(SparseVector, GenderLabel)], lambda: f64) -> f64 {
    let reg = 0.5 * lambda * (model.weights.iter().map(|w| w * w).sum::<f64>() + model.bias * model.bias);
    let labeled: Vec<(f64, &SparseVector)> =
        examples.iter().filter_map(|(x, y)| label_sign(*y).map(|s| (s, x))).collect();
    if labeled.is_empty() {
        return reg;
    }
    let loss: f64 = labeled
        .iter()
        .map(|(y, x)| (1.0 - y * (x.dot_dense(&model.weights) + model.bias)).max(0.0))
        .sum();
    reg + loss / labeled.len() as f64
}

/// Weight vector stored as `scale · v` so the shrink step is O(1). The last
/// coordinate of `v` is the bias.
///
/// Once `averaging` is on, the running sum of every iterate is kept lazily:
/// coordinate j accumulates `v[j] · Σ scale` over the steps since it last
/// changed, so each step stays proportional to the example's non-zeros.
struct ScaledWeights {
    v: Vec<f64>,
    scale: f64,
    sq_norm: f64,
    averaging: bool,
    sum: Vec<f64>,
    scale_total: f64,
    flushed_at: Vec<f64>,
    iterates: u64,
}

impl ScaledWeights {
    fn new(dim: usize) -> Self {
        ScaledWeights {
            v: vec![0.0; dim + 1],
            scale: 1.0,
            sq_norm: 0.0,
            averaging: false,
            sum: vec![0.0; dim + 1],
            scale_total: 0.0,
            flushed_at: vec![0.0; dim + 1],
            iterates: 0,
        }
    }

    fn bias_index(&self) -> usize {
        self.v.len() - 1
    }

    fn margin(&self, x: &SparseVector) -> f64 {
        self.scale * (x.dot_dense(&self.v) + self.v[self.bias_index()])
    }

    fn flush(&mut self, j: usize) {
        if self.averaging {
            self.sum[j] += self.v[j] * (self.scale_total - self.flushed_at[j]);
            self.flushed_at[j] = self.scale_total;
        }
    }

    fn flush_all(&mut self) {
        for j in 0..self.v.len() {
            self.flush(j);
        }
    }

    fn shrink(&mut self, factor: f64) {
        self.scale *= factor;
        if self.scale == 0.0 {
            self.flush_all();
            self.v.iter_mut().for_each(|w| *w = 0.0);
            self.scale = 1.0;
            self.sq_norm = 0.0;
        } else if self.scale < 1e-9 {
            self.fold_scale();
        }
    }

    fn fold_scale(&mut self) {
        self.flush_all();
        let s = self.scale;
        self.v.iter_mut().for_each(|w| *w *= s);
        self.scale = 1.0;
        self.sq_norm = self.v.iter().map(|w| w * w).sum();
    }

    fn add(&mut self, coef: f64, x: &SparseVector) {
        let c = coef / self.scale;
        for (i, xi) in x.iter() {
            let i = i as usize;
            self.flush(i);
            let old = self.v[i];
            self.v[i] += c * xi;
            self.sq_norm += self.v[i] * self.v[i] - old * old;
        }
        let b = self.bias_index();
        self.flush(b);
        let old = self.v[b];
        self.v[b] += c;
        self.sq_norm += self.v[b] * self.v[b] - old * old;
    }

    fn norm(&self) -> f64 {
        self.scale * self.sq_norm.max(0.0).sqrt()
    }

    /// Counts the current iterate towards the average.
    fn record(&mut self) {
        if self.averaging {
            self.scale_total += self.scale;
            self.iterates += 1;
        }
    }

    fn snapshot(&self) -> LinearModel {
        let b = self.bias_index();
        LinearModel {
            weights: self.v[..b].iter().map(|w| w * self.scale).collect(),
            bias: self.v[b] * self.scale,
        }
    }

    fn average(&mut self) -> Option<LinearModel> {
        if self.iterates == 0 {
            return None;
        }
        self.flush_all();
        let n = self.iterates as f64;
        let b = self.bias_index();
        Some(LinearModel { weights: self.sum[..b].iter().map(|s| s / n).collect(), bias: self.sum[b] / n })
    }
}

/// Exact minimizer of the objective over bias-only models (w = 0).
fn best_bias_only(signs: &[f64], dim: usize, lambda: f64) -> LinearModel {
    let pos = signs.iter().filter(|&&s| s > 0.0).count() as f64;
    let neg = signs.len() as f64 - pos;
    let b = ((pos - neg) / (signs.len() as f64 * lambda)).clamp(-1.0, 1.0);
    LinearModel { weights: vec![0.0; dim], bias: b }
}

/// Returns the final iterate and the average of the second-half iterates.
fn run_sgd(
    examples: &[(SparseVector, GenderLabel)],
    signs: &[f64],
    dim: usize,
    hp: &Hyperparams,
) -> (LinearModel, Option<LinearModel>) {
    let lambda = hp.lambda;
    let radius = 1.0 / lambda.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut w = ScaledWeights::new(dim);
    let total_steps = hp.epochs as u64 * examples.len() as u64;
    let mut t = 0u64;

    for _ in 0..hp.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            if !w.averaging && t > total_steps / 2 {
                w.averaging = true;
            }
            let eta = 1.0 / (lambda * t as f64);
            let (x, y) = (&examples[i].0, signs[i]);
            let m = y * w.margin(x);
            w.shrink(1.0 - eta * lambda);
            if m < 1.0 {
                w.add(eta * y, x);
            }
            let norm = w.norm();
            if norm > radius {
                w.shrink(radius / norm);
            }
            w.record();
        }
        w.fold_scale();
    }

    let average = w.average();
    (w.snapshot(), average)
}

/// Trains a linear model on `dim`-dimensional vectors.
///
/// Candidates are the final iterate, the average of all iterates from the
/// second half of training, and the best bias-only model; the one with the
/// lowest objective is returned.
pub fn train_linear(
    examples: &[(SparseVector, GenderLabel)],
    dim: usize,
    hp: &Hyperparams,
) -> Result<(LinearModel, TrainingMeta), ClassifierError> {
    hp.validate()?;
    if examples.is_empty() {
        return Err(ClassifierError::NoExamples);
    }
    let mut signs = Vec::with_capacity(examples.len());
    for (i, (x, y)) in examples.iter().enumerate() {
        let s = label_sign(*y).ok_or(ClassifierError::UnknownLabel(i))?;
        if !x.is_finite() {
            return Err(ClassifierError::NonFinite(i));
        }
        if x.min_dim() > dim {
            return Err(ClassifierError::DimensionMismatch { needed: x.min_dim(), dim });
        }
        signs.push(s);
    }
    let male = signs.iter().filter(|&&s| s > 0.0).count();
    let female = signs.len() - male;
    if male == 0 || female == 0 {
        return Err(ClassifierError::SingleClass { male, female });
    }

    let (last, average) = run_sgd(examples, &signs, dim, hp);
    let mut candidates = vec![last];
    candidates.extend(average);
    candidates.push(best_bias_only(&signs, dim, hp.lambda));
    let (model, objective) = candidates
        .into_iter()
        .map(|m| {
            let obj = hinge_objective(&m, examples, hp.lambda);
            (m, obj)
        })
        .reduce(|best, next| if next.1 < best.1 { next } else { best })
        .expect("at least one candidate");
    Ok((model, TrainingMeta { objective, n_examples: examples.len() as u64 }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenderModel {
    pub extractor: FeatureExtractor,
    pub linear: LinearModel,
    pub calibration: Calibration,
    pub hyperparams: Hyperparams,
    pub meta: TrainingMeta,
}

impl GenderModel {
    /// Trains on vectors produced by `extractor`.
    pub fn train(
        extractor: FeatureExtractor,
        examples: &[(SparseVector, GenderLabel)],
        hp: &Hyperparams,
    ) -> Result<Self, ClassifierError> {
        let (linear, meta) = train_linear(examples, extractor.dim(), hp)?;
        Ok(GenderModel { extractor, linear, calibration: Calibration::IDENTITY, hyperparams: *hp, meta })
    }

    pub fn dim(&self) -> usize {
        self.linear.weights.len()
    }

    pub fn predict(&self, v: &SparseVector) -> Result<Prediction, ClassifierError> {
        let margin = self.linear.margin(v)?;
        let label = if margin >= 0.0 { GenderLabel::Male } else { GenderLabel::Female };
        Ok(Prediction { label, margin, p_male: self.calibration.p_male(margin) })
    }

    pub fn predict_name(&self, name: &str) -> Prediction {
        self.predict(&self.extractor.transform_name(name))
            .expect("extractor vectors always fit the model dimension")
    }

    pub fn predict_profile(&self, profile: &crate::dataset::UserProfile) -> Prediction {
        self.predict(&self.extractor.transform(profile))
            .expect("extractor vectors always fit the model dimension")
    }

    /// Fits the logistic slope of p(Male) on dev-set margins (Platt scaling
    /// with smoothed targets). The intercept is pinned at 0 so that
    /// p(Male) ≥ 0.5 exactly when the margin is non-negative.
    pub fn calibrate(&mut self, dev: &[(SparseVector, GenderLabel)]) -> Result<CalibrationStatus, ClassifierError> {
        let mut points = Vec::with_capacity(dev.len());
        for (x, y) in dev {
            if let Some(s) = label_sign(*y) {
                points.push((self.linear.margin(x)?, s > 0.0));
            }
        }
        let status = fit_slope(&points);
        self.calibration = match &status {
            CalibrationStatus::Fitted { slope } => Calibration { slope: *slope, intercept: 0.0, fitted: true },
            CalibrationStatus::Degenerate(reason) => {
                log::warn!("calibration left at identity: {reason}");
                Calibration::IDENTITY
            }
        };
        Ok(status)
    }

    /// `<format>+<first 8 hex digits of the payload digest>`, with an
    /// `-uncalibrated` suffix when no calibration was fitted.
    pub fn version(&self) -> String {
        let payload = encode_payload(self);
        let digest = Sha256::digest(&payload);
        let hash: String = digest[..4].iter().map(|b| format!("{b:02x}")).collect();
        let suffix = if self.calibration.fitted { "" } else { "-uncalibrated" };
        format!("{FORMAT_MAJOR}.{FORMAT_MINOR}+{hash}{suffix}")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ClassifierError> {
        let mut file = fs::File::create(path)?;
        self.write_to(&mut file)?;
        file.sync_all()?;
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), ClassifierError> {
        let payload = encode_payload(self);
        writeln!(out, "{HEADER_PREFIX}{FORMAT_MAJOR}.{FORMAT_MINOR}")?;
        out.write_u64::<LittleEndian>(payload.len() as u64)?;
        out.write_all(&payload)?;
        out.write_all(&Sha256::digest(&payload))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ClassifierError> {
        Self::read_from(&fs::read(path)?[..])
    }

    pub fn read_from(bytes: &[u8]) -> Result<Self, ClassifierError> {
        let newline = bytes.iter().take(256).position(|&b| b == b'\n').ok_or_else(|| {
            if bytes.len() < 256 {
                ClassifierError::Truncated
            } else {
                ClassifierError::Corrupt("missing header line".into())
            }
        })?;
        let header = std::str::from_utf8(&bytes[..newline])
            .map_err(|_| ClassifierError::Corrupt("header is not UTF-8".into()))?;
        let version = header
            .strip_prefix(HEADER_PREFIX)
            .ok_or_else(|| ClassifierError::Corrupt(format!("unrecognized header {header:?}")))?;
        let (major, _minor) = version
            .split_once('.')
            .and_then(|(a, b)| Some((a.parse::<u32>().ok()?, b.parse::<u32>().ok()?)))
            .ok_or_else(|| ClassifierError::Corrupt(format!("bad version {version:?}")))?;
        if major != FORMAT_MAJOR {
            return Err(ClassifierError::Version {
                found: version.to_owned(),
                supported: format!("{FORMAT_MAJOR}.{FORMAT_MINOR}"),
            });
        }

        let mut rest = Cursor::new(&bytes[newline + 1..]);
        let len = rest.read_u64::<LittleEndian>().map_err(eof_to_truncated)? as usize;
        let body = &bytes[newline + 1 + 8..];
        if body.len() < len.saturating_add(32) {
            return Err(ClassifierError::Truncated);
        }
        if body.len() > len + 32 {
            return Err(ClassifierError::Corrupt("trailing bytes after checksum".into()));
        }
        let (payload, digest) = body.split_at(len);
        if Sha256::digest(payload)[..] != digest[..] {
            return Err(ClassifierError::Corrupt("checksum mismatch".into()));
        }
        decode_payload(payload)
    }
}

fn eof_to_truncated(e: std::io::Error) -> ClassifierError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        ClassifierError::Truncated
    } else {
        ClassifierError::Io(e)
    }
}

/// Maximizes the Platt log-likelihood over the slope alone.
fn fit_slope(points: &[(f64, bool)]) -> CalibrationStatus {
    let n_pos = points.iter().filter(|p| p.1).count();
    let n_neg = points.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return CalibrationStatus::Degenerate(format!("dev set has {n_pos} male and {n_neg} female examples"));
    }
    let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    if hi - lo < 1e-12 {
        return CalibrationStatus::Degenerate("all dev margins are equal".into());
    }
    let t_pos = (n_pos as f64 + 1.0) / (n_pos as f64 + 2.0);
    let t_neg = 1.0 / (n_neg as f64 + 2.0);
    // derivative of the log-likelihood; strictly decreasing in the slope
    let grad = |a: f64| -> f64 {
        points
            .iter()
            .map(|&(m, pos)| ((if pos { t_pos } else { t_neg }) - sigmoid(a * m)) * m)
            .sum()
    };
    if grad(0.0) <= 0.0 {
        return CalibrationStatus::Degenerate("margins do not increase with the Male label".into());
    }
    let mut upper = 1.0;
    while grad(upper) > 0.0 {
        upper *= 2.0;
        if upper > 1e12 {
            return CalibrationStatus::Degenerate("slope diverges".into());
        }
    }
    let mut lower = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lower + upper);
        if grad(mid) > 0.0 {
            lower = mid;
        } else {
            upper = mid;
        }
        if upper - lower <= 1e-12 * upper {
            break;
        }
    }
    CalibrationStatus::Fitted { slope: 0.5 * (lower + upper) }
}

fn tweet_mode_code(m: TweetMode) -> u8 {
    match m {
        TweetMode::Aggregate => 0,
        TweetMode::Single => 1,
    }
}

fn encode_payload(model: &GenderModel) -> Vec<u8> {
    let mut out = Vec::new();
    // Writes into a Vec cannot fail.
    let w = &mut out;
    w.write_u8(model.extractor.feature_set().to_u8()).unwrap();
    w.write_u8(tweet_mode_code(model.extractor.tweet_mode())).unwrap();
    w.write_f64::<LittleEndian>(model.hyperparams.lambda).unwrap();
    w.write_u32::<LittleEndian>(model.hyperparams.epochs).unwrap();
    w.write_u64::<LittleEndian>(model.hyperparams.seed).unwrap();
    w.write_f64::<LittleEndian>(model.meta.objective).unwrap();
    w.write_u64::<LittleEndian>(model.meta.n_examples).unwrap();
    let vocabs = model.extractor.vocabularies();
    w.write_u32::<LittleEndian>(vocabs.len() as u32).unwrap();
    for v in vocabs {
        w.write_u8(v.field().to_u8()).unwrap();
        w.write_u32::<LittleEndian>(v.range().low as u32).unwrap();
        w.write_u32::<LittleEndian>(v.range().high as u32).unwrap();
        w.write_u32::<LittleEndian>(v.min_df() as u32).unwrap();
        w.write_u64::<LittleEndian>(v.n_docs() as u64).unwrap();
        w.write_u64::<LittleEndian>(v.len() as u64).unwrap();
        for (gram, idf) in v.grams().iter().zip(v.idf_values()) {
            w.write_u32::<LittleEndian>(gram.len() as u32).unwrap();
            w.extend_from_slice(gram.as_bytes());
            w.write_f64::<LittleEndian>(*idf).unwrap();
        }
    }
    w.write_u64::<LittleEndian>(model.linear.weights.len() as u64).unwrap();
    for &x in &model.linear.weights {
        w.write_f64::<LittleEndian>(x).unwrap();
    }
    w.write_f64::<LittleEndian>(model.linear.bias).unwrap();
    w.write_f64::<LittleEndian>(model.calibration.slope).unwrap();
    w.write_f64::<LittleEndian>(model.calibration.intercept).unwrap();
    w.write_u8(model.calibration.fitted as u8).unwrap();
    out
}

fn decode_payload(payload: &[u8]) -> Result<GenderModel, ClassifierError> {
    let corrupt = |what: &str| ClassifierError::Corrupt(what.to_owned());
    let mut r = Cursor::new(payload);
    let feature_set = FeatureSet::from_u8(r.read_u8().map_err(eof_to_truncated)?).ok_or_else(|| corrupt("feature set"))?;
    let tweet_mode = match r.read_u8().map_err(eof_to_truncated)? {
        0 => TweetMode::Aggregate,
        1 => TweetMode::Single,
        _ => return Err(corrupt("tweet mode")),
    };
    let rd = |r: &mut Cursor<&[u8]>| r.read_f64::<LittleEndian>().map_err(eof_to_truncated);
    let lambda = rd(&mut r)?;
    let epochs = r.read_u32::<LittleEndian>().map_err(eof_to_truncated)?;
    let seed = r.read_u64::<LittleEndian>().map_err(eof_to_truncated)?;
    let objective = rd(&mut r)?;
    let n_examples = r.read_u64::<LittleEndian>().map_err(eof_to_truncated)?;
    let n_vocabs = r.read_u32::<LittleEndian>().map_err(eof_to_truncated)?;
    if n_vocabs > 3 {
        return Err(corrupt("vocabulary count"));
    }
    let mut vocabs = Vec::new();
    for _ in 0..n_vocabs {
        let field = FieldTag::from_u8(r.read_u8().map_err(eof_to_truncated)?).ok_or_else(|| corrupt("field tag"))?;
        let low = r.read_u32::<LittleEndian>().map_err(eof_to_truncated)? as usize;
        let high = r.read_u32::<LittleEndian>().map_err(eof_to_truncated)? as usize;
        let min_df = r.read_u32::<LittleEndian>().map_err(eof_to_truncated)? as usize;
        let n_docs = r.read_u64::<LittleEndian>().map_err(eof_to_truncated)? as usize;
        let n_grams = r.read_u64::<LittleEndian>().map_err(eof_to_truncated)? as usize;
        if n_grams > payload.len() {
            return Err(corrupt("gram count"));
        }
        let mut grams = Vec::with_capacity(n_grams);
        let mut idf = Vec::with_capacity(n_grams);
        for _ in 0..n_grams {
            let len = r.read_u32::<LittleEndian>().map_err(eof_to_truncated)? as usize;
            if len > payload.len() {
                return Err(corrupt("gram length"));
            }
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf).map_err(eof_to_truncated)?;
            grams.push(String::from_utf8(buf).map_err(|_| corrupt("gram is not UTF-8"))?);
            idf.push(rd(&mut r)?);
        }
        let range = NgramRange::new(low, high)?;
        vocabs.push(Vocabulary::from_parts(field, range, min_df, n_docs, grams, idf)?);
    }
    let extractor = FeatureExtractor::from_parts(feature_set, tweet_mode, vocabs)?;
    let n_weights = r.read_u64::<LittleEndian>().map_err(eof_to_truncated)? as usize;
    if n_weights != extractor.dim() {
        return Err(ClassifierError::Corrupt(format!(
            "{n_weights} weights for a {}-dimensional vocabulary",
            extractor.dim()
        )));
    }
    let weights = (0..n_weights).map(|_| rd(&mut r)).collect::<Result<Vec<_>, _>>()?;
    let bias = rd(&mut r)?;
    let slope = rd(&mut r)?;
    let intercept = rd(&mut r)?;
    let fitted = r.read_u8().map_err(eof_to_truncated)? != 0;
    if r.position() as usize != payload.len() {
        return Err(corrupt("unexpected bytes after calibration"));
    }
    if slope < 0.0 {
        return Err(corrupt("negative calibration slope"));
    }
    Ok(GenderModel {
        extractor,
        linear: LinearModel { weights, bias },
        calibration: Calibration { slope, intercept, fitted },
        hyperparams: Hyperparams { lambda, epochs, seed },
        meta: TrainingMeta { objective, n_examples },
    })
}
