//! Character n-gram tf-idf features over profile text fields.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use crate::dataset::UserProfile;
use crate::normalize::{normalize_text, NormalizedText};

pub const DEFAULT_NGRAM_RANGE: NgramRange = NgramRange { low: 2, high: 5 };
pub const MAX_TWEETS_PER_USER: usize = 200;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("cannot fit a vocabulary on an empty corpus")]
    EmptyCorpus,
    #[error("invalid n-gram range [{low}, {high}]")]
    InvalidRange { low: usize, high: usize },
    #[error("min_df must be at least 1")]
    InvalidMinDf,
    #[error("unknown feature set {0:?} (expected usernames, description, tweets or all)")]
    UnknownFeatureSet(String),
    #[error("inconsistent vocabulary: {0}")]
    InconsistentVocabulary(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NgramRange {
    pub low: usize,
    pub high: usize,
}

impl NgramRange {
    pub fn new(low: usize, high: usize) -> Result<Self, FeatureError> {
        if low == 0 || low > high {
            return Err(FeatureError::InvalidRange { low, high });
        }
        Ok(NgramRange { low, high })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FieldTag {
    Username,
    Description,
    Tweets,
}

impl FieldTag {
    /// Default document-frequency cutoff: usernames are short and sparse, so
    /// they keep every gram.
    pub fn default_min_df(self) -> usize {
        match self {
            FieldTag::Username => 1,
            FieldTag::Description | FieldTag::Tweets => 2,
        }
    }

    pub fn to_u8(self) -> u8 {
        self as u8
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        [FieldTag::Username, FieldTag::Description, FieldTag::Tweets].get(v as usize).copied()
    }
}

/// How the tweets field is built from a user's timeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TweetMode {
    /// All tweets (up to 200) joined with single spaces.
    #[default]
    Aggregate,
    /// Only the first tweet in record order.
    Single,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureSet {
    Usernames,
    Description,
    Tweets,
    All,
}

impl FeatureSet {
    pub fn fields(self) -> &'static [FieldTag] {
        match self {
            FeatureSet::Usernames => &[FieldTag::Username],
            FeatureSet::Description => &[FieldTag::Description],
            FeatureSet::Tweets => &[FieldTag::Tweets],
            FeatureSet::All => &[FieldTag::Username, FieldTag::Description, FieldTag::Tweets],
        }
    }

    pub fn to_u8(self) -> u8 {
        self as u8
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        [FeatureSet::Usernames, FeatureSet::Description, FeatureSet::Tweets, FeatureSet::All]
            .get(v as usize)
            .copied()
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureSet::Usernames => "Usernames",
            FeatureSet::Description => "Description",
            FeatureSet::Tweets => "Tweets",
            FeatureSet::All => "All",
        })
    }
}

impl FromStr for FeatureSet {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, FeatureError> {
        match s.to_ascii_lowercase().as_str() {
            "usernames" | "username" => Ok(FeatureSet::Usernames),
            "description" => Ok(FeatureSet::Description),
            "tweets" => Ok(FeatureSet::Tweets),
            "all" => Ok(FeatureSet::All),
            _ => Err(FeatureError::UnknownFeatureSet(s.to_owned())),
        }
    }
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVector {
    /// Sorts by index and sums duplicate entries.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut merged: BTreeMap<u32, f64> = BTreeMap::new();
        for (i, v) in pairs {
            *merged.entry(i).or_default() += v;
        }
        let (indices, values) = merged.into_iter().unzip();
        SparseVector { indices, values }
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Scales to unit L2 norm; the zero vector stays zero.
    pub fn l2_normalized(mut self) -> Self {
        let norm = self.norm();
        if norm > 0.0 {
            for v in &mut self.values {
                *v /= norm;
            }
        }
        self
    }

    /// One past the largest index, or 0 for the empty vector.
    pub fn min_dim(&self) -> usize {
        self.indices.last().map_or(0, |&i| i as usize + 1)
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| dense[i as usize] * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn shifted(&self, offset: u32) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.iter().map(move |(i, v)| (i + offset, v))
    }
}

/// Every contiguous code-point substring with length in the range,
/// internal spaces included. Text shorter than `range.low` is its own gram.
pub fn char_ngrams(text: &NormalizedText, range: NgramRange) -> Vec<String> {
    grams_of(text.as_str(), range)
}

fn grams_of(text: &str, range: NgramRange) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    if chars.is_empty() {
        return Vec::new();
    }
    if chars.len() < range.low {
        return vec![text.to_owned()];
    }
    let mut out = Vec::new();
    for n in range.low..=range.high.min(chars.len()) {
        for window in chars.windows(n) {
            out.push(window.iter().collect());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    field: FieldTag,
    range: NgramRange,
    min_df: usize,
    n_docs: usize,
    grams: Vec<String>,
    idf: Vec<f64>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Rebuilds a vocabulary from stored parts; grams must be strictly
    /// increasing and every idf positive.
    pub fn from_parts(
        field: FieldTag,
        range: NgramRange,
        min_df: usize,
        n_docs: usize,
        grams: Vec<String>,
        idf: Vec<f64>,
    ) -> Result<Self, FeatureError> {
        if grams.len() != idf.len() {
            return Err(FeatureError::InconsistentVocabulary(format!(
                "{} grams but {} idf values",
                grams.len(),
                idf.len()
            )));
        }
        if grams.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FeatureError::InconsistentVocabulary("grams not strictly sorted".into()));
        }
        if idf.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(FeatureError::InconsistentVocabulary("idf must be positive".into()));
        }
        let index = grams.iter().enumerate().map(|(i, g)| (g.clone(), i as u32)).collect();
        Ok(Vocabulary { field, range, min_df, n_docs, grams, idf, index })
    }

    pub fn field(&self) -> FieldTag {
        self.field
    }

    pub fn range(&self) -> NgramRange {
        self.range
    }

    pub fn min_df(&self) -> usize {
        self.min_df
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn grams(&self) -> &[String] {
        &self.grams
    }

    pub fn idf_values(&self) -> &[f64] {
        &self.idf
    }

    pub fn len(&self) -> usize {
        self.grams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }

    pub fn index_of(&self, gram: &str) -> Option<u32> {
        self.index.get(gram).copied()
    }

    pub fn idf(&self, gram: &str) -> Option<f64> {
        self.index_of(gram).map(|i| self.idf[i as usize])
    }
}

/// Smoothed inverse document frequency, `ln((1 + n) / (1 + df)) + 1`.
pub fn smoothed_idf(n_docs: usize, df: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

pub fn fit_vectorizer(
    corpus: &[NormalizedText],
    range: NgramRange,
    min_df: usize,
    field: FieldTag,
) -> Result<Vocabulary, FeatureError> {
    if corpus.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    if min_df == 0 {
        return Err(FeatureError::InvalidMinDf);
    }
    let range = NgramRange::new(range.low, range.high)?;
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for doc in corpus {
        let mut grams = char_ngrams(doc, range);
        grams.sort_unstable();
        grams.dedup();
        for g in grams {
            *df.entry(g).or_default() += 1;
        }
    }
    let (grams, idf): (Vec<String>, Vec<f64>) = df
        .into_iter()
        .filter(|&(_, d)| d >= min_df)
        .map(|(g, d)| {
            let idf = smoothed_idf(corpus.len(), d);
            (g, idf)
        })
        .unzip();
    Vocabulary::from_parts(field, range, min_df, corpus.len(), grams, idf)
}

/// Raw counts times idf, L2-normalized. Grams outside the vocabulary are
/// ignored.
pub fn vectorize(text: &str, vocab: &Vocabulary) -> SparseVector {
    let normalized = normalize_text(text);
    let mut counts: HashMap<u32, f64> = HashMap::new();
    for g in char_ngrams(&normalized, vocab.range) {
        if let Some(i) = vocab.index_of(&g) {
            *counts.entry(i).or_default() += 1.0;
        }
    }
    SparseVector::from_pairs(counts.into_iter().map(|(i, c)| (i, c * vocab.idf[i as usize]))).l2_normalized()
}

static URL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:https?://|www\.)\S+").expect("valid regex"));
static MENTION_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"@\w+").expect("valid regex"));

/// Replaces URLs with `URL` and user mentions with `@USER`.
pub fn preprocess_tweet(text: &str) -> String {
    let no_urls = URL_RE.replace_all(text, "URL");
    MENTION_RE.replace_all(&no_urls, "@USER").into_owned()
}

pub fn aggregate_tweets(tweets: &[String]) -> String {
    tweets
        .iter()
        .take(MAX_TWEETS_PER_USER)
        .map(|t| preprocess_tweet(t))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Raw text of one profile field, before normalization.
pub fn field_text(profile: &UserProfile, field: FieldTag, tweet_mode: TweetMode) -> String {
    match field {
        FieldTag::Username => profile.username().to_owned(),
        FieldTag::Description => profile.description.clone(),
        FieldTag::Tweets => match tweet_mode {
            TweetMode::Aggregate => aggregate_tweets(&profile.tweets),
            TweetMode::Single => profile.tweets.first().map(|t| preprocess_tweet(t)).unwrap_or_default(),
        },
    }
}

/// Fitted vocabularies for a feature set. Multi-field sets produce a
/// block-structured vector: each field block is L2-normalized on its own and
/// the concatenation is normalized again.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureExtractor {
    feature_set: FeatureSet,
    tweet_mode: TweetMode,
    vocabs: Vec<Vocabulary>,
}

impl FeatureExtractor {
    pub fn fit(
        profiles: &[UserProfile],
        feature_set: FeatureSet,
        tweet_mode: TweetMode,
        range: NgramRange,
        min_df: Option<usize>,
    ) -> Result<Self, FeatureError> {
        let vocabs = feature_set
            .fields()
            .iter()
            .map(|&field| {
                let corpus: Vec<NormalizedText> =
                    profiles.iter().map(|p| normalize_text(&field_text(p, field, tweet_mode))).collect();
                fit_vectorizer(&corpus, range, min_df.unwrap_or(field.default_min_df()), field)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FeatureExtractor { feature_set, tweet_mode, vocabs })
    }

    pub fn from_parts(
        feature_set: FeatureSet,
        tweet_mode: TweetMode,
        vocabs: Vec<Vocabulary>,
    ) -> Result<Self, FeatureError> {
        let expected = feature_set.fields();
        let actual: Vec<FieldTag> = vocabs.iter().map(Vocabulary::field).collect();
        if actual != expected {
            return Err(FeatureError::InconsistentVocabulary(format!(
                "feature set {feature_set} needs fields {expected:?}, found {actual:?}"
            )));
        }
        Ok(FeatureExtractor { feature_set, tweet_mode, vocabs })
    }

    pub fn feature_set(&self) -> FeatureSet {
        self.feature_set
    }

    pub fn tweet_mode(&self) -> TweetMode {
        self.tweet_mode
    }

    pub fn vocabularies(&self) -> &[Vocabulary] {
        &self.vocabs
    }

    pub fn dim(&self) -> usize {
        self.vocabs.iter().map(Vocabulary::len).sum()
    }

    fn combine(&self, blocks: impl Iterator<Item = Option<SparseVector>>) -> SparseVector {
        if self.vocabs.len() == 1 {
            return blocks.flatten().next().unwrap_or_default();
        }
        let mut offset = 0u32;
        let mut pairs = Vec::new();
        for (vocab, block) in self.vocabs.iter().zip(blocks) {
            if let Some(block) = block {
                pairs.extend(block.shifted(offset));
            }
            offset += vocab.len() as u32;
        }
        SparseVector::from_pairs(pairs).l2_normalized()
    }

    pub fn transform(&self, profile: &UserProfile) -> SparseVector {
        self.combine(
            self.vocabs
                .iter()
                .map(|v| Some(vectorize(&field_text(profile, v.field(), self.tweet_mode), v))),
        )
    }

    /// Vector for a bare name. In multi-field sets only the username block
    /// is populated.
    pub fn transform_name(&self, name: &str) -> SparseVector {
        self.combine(
            self.vocabs
                .iter()
                .map(|v| (v.field() == FieldTag::Username).then(|| vectorize(name, v))),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn nt(s: &str) -> NormalizedText {
        normalize_text(s)
    }

    fn sorted(mut v: Vec<String>) -> Vec<String> {
        v.sort();
        v
    }

    #[test]
    fn ngram_enumeration() {
        let r = DEFAULT_NGRAM_RANGE;
        assert_eq!(char_ngrams(&nt("ab"), r), ["ab"]);
        assert_eq!(sorted(char_ngrams(&nt("abc"), r)), ["ab", "abc", "bc"]);
        assert_eq!(sorted(char_ngrams(&nt("نور"), r)), sorted(vec!["نو".into(), "ور".into(), "نور".into()]));
        assert_eq!(char_ngrams(&nt("a"), r), ["a"]);
        assert!(char_ngrams(&nt(""), r).is_empty());
        assert!(char_ngrams(&nt("a b"), r).contains(&"a b".to_owned()));
    }

    #[test]
    fn idf_values() {
        let corpus = [nt("xy"), nt("ab"), nt("ab")];
        let v = fit_vectorizer(&corpus, NgramRange::new(2, 2).unwrap(), 1, FieldTag::Username).unwrap();
        // hand computation: ln(4/2) + 1
        assert!((v.idf("xy").unwrap() - 1.693_147_180_559_945_3).abs() < 1e-12);
        let all = [nt("ab"), nt("ab"), nt("ab")];
        let v = fit_vectorizer(&all, NgramRange::new(2, 2).unwrap(), 1, FieldTag::Username).unwrap();
        assert_eq!(v.idf("ab"), Some(1.0));
    }

    #[test]
    fn min_df_filters() {
        let corpus = [nt("xy"), nt("ab"), nt("ab")];
        let v = fit_vectorizer(&corpus, NgramRange::new(2, 2).unwrap(), 2, FieldTag::Description).unwrap();
        assert_eq!(v.grams(), ["ab"]);
        assert_eq!(v.index_of("xy"), None);
    }

    #[test]
    fn fit_errors() {
        assert_eq!(fit_vectorizer(&[], DEFAULT_NGRAM_RANGE, 1, FieldTag::Username), Err(FeatureError::EmptyCorpus));
        assert!(NgramRange::new(3, 2).is_err());
        assert!(NgramRange::new(0, 2).is_err());
    }

    #[test]
    fn vectorize_examples() {
        let r = NgramRange::new(2, 2).unwrap();
        let v = fit_vectorizer(&[nt("ab"), nt("cd"), nt("abcd")], r, 1, FieldTag::Username).unwrap();
        assert!(vectorize("zz", &v).is_empty());
        let single = vectorize("ab", &v);
        assert_eq!(single.nnz(), 1);
        assert_eq!(single.values(), [1.0]);
        // "ab" and "cd" have equal df and equal counts in "ab cd"
        let two = fit_vectorizer(&[nt("ab"), nt("cd")], r, 1, FieldTag::Username).unwrap();
        let x = vectorize("abxcd", &two);
        assert_eq!(x.nnz(), 2);
        for &w in x.values() {
            assert!((w - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        }
    }

    #[test]
    fn tweet_preprocessing() {
        assert_eq!(preprocess_tweet("@ali شوف https://t.co/abc هذا"), "@USER شوف URL هذا");
        let tweets: Vec<String> = (0..250).map(|i| format!("t{i}")).collect();
        let agg = aggregate_tweets(&tweets);
        assert_eq!(agg.split(' ').count(), MAX_TWEETS_PER_USER);
        let p = UserProfile { tweets: vec!["one".into(), "two".into()], ..Default::default() };
        assert_eq!(field_text(&p, FieldTag::Tweets, TweetMode::Single), "one");
        assert_eq!(field_text(&p, FieldTag::Tweets, TweetMode::Aggregate), "one two");
    }

    #[test]
    fn username_falls_back_to_screen_name() {
        let p = UserProfile { screen_name: "handle".into(), display_name: "  ".into(), ..Default::default() };
        assert_eq!(field_text(&p, FieldTag::Username, TweetMode::Aggregate), "handle");
    }

    #[test]
    fn all_features_blocks() {
        let profiles = vec![
            UserProfile { display_name: "سارة".into(), description: "طبيبة".into(), tweets: vec!["مرحبا".into()], ..Default::default() },
            UserProfile { display_name: "خالد".into(), description: "مهندس".into(), tweets: vec!["اهلا".into()], ..Default::default() },
        ];
        let fx = FeatureExtractor::fit(&profiles, FeatureSet::All, TweetMode::Aggregate, DEFAULT_NGRAM_RANGE, Some(1)).unwrap();
        assert_eq!(fx.vocabularies().len(), 3);
        let v = fx.transform(&profiles[0]);
        assert!((v.norm() - 1.0).abs() < 1e-12);
        assert!(v.min_dim() <= fx.dim());
        let name_only = fx.transform_name("سارة");
        assert!(name_only.indices().iter().all(|&i| (i as usize) < fx.vocabularies()[0].len()));
    }

    proptest! {
        #[test]
        fn vectorize_norm_is_zero_or_one(docs in proptest::collection::vec("[abcد ]{0,8}", 1..6), probe in "[abcdد ]{0,10}") {
            let corpus: Vec<_> = docs.iter().map(|d| nt(d)).collect();
            let v = fit_vectorizer(&corpus, DEFAULT_NGRAM_RANGE, 1, FieldTag::Username).unwrap();
            let x = vectorize(&probe, &v);
            let n = x.norm();
            prop_assert!(n.abs() < 1e-9 || (n - 1.0).abs() < 1e-9);
            prop_assert!(x.indices().windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn idf_is_permutation_invariant(docs in proptest::collection::vec("[abc]{0,6}", 1..8), seed in any::<u64>()) {
            let corpus: Vec<_> = docs.iter().map(|d| nt(d)).collect();
            let mut shuffled = corpus.clone();
            let k = (seed as usize) % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            let a = fit_vectorizer(&corpus, DEFAULT_NGRAM_RANGE, 1, FieldTag::Username).unwrap();
            let b = fit_vectorizer(&shuffled, DEFAULT_NGRAM_RANGE, 1, FieldTag::Username).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn ngram_count_formula(s in "[a-zء-ي]{5,30}") {
            let text = nt(&s);
            let len = text.as_str().chars().count();
            prop_assume!(len >= 5);
            let n = char_ngrams(&text, DEFAULT_NGRAM_RANGE).len();
            prop_assert_eq!(n, (len - 1) + (len - 2) + (len - 3) + (len - 4));
        }
    }
}
