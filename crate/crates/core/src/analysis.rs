//! Corpus contrast (valence) and descriptive statistics over profiles.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use chrono::Datelike;
use thiserror::Error;

use crate::dataset::{GenderLabel, UserProfile};
use crate::features::preprocess_tweet;
use crate::lexicon::{match_description, ExclusionList, Lexicon};
use crate::normalize::{first_token, normalize_text};

pub const DEFAULT_MIN_TOTAL: u64 = 5;
pub const DEFAULT_VALENCE_THRESHOLD: f64 = 0.5;

const BUNDLED_PROFESSION_PAIRS: &str = include_str!("../data/profession_pairs.tsv");

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("valence needs at least two categories, got {0}")]
    TooFewCategories(usize),
    #[error("category {0:?} has no tokens")]
    EmptyCategory(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

/// Token counts per category.
pub type Corpora = BTreeMap<String, HashMap<String, u64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct ValenceScore {
    pub token: String,
    pub scores: BTreeMap<String, f64>,
    pub counts: BTreeMap<String, u64>,
}

impl ValenceScore {
    pub fn score(&self, category: &str) -> Option<f64> {
        self.scores.get(category).copied()
    }

    pub fn count(&self, category: &str) -> u64 {
        self.counts.get(category).copied().unwrap_or(0)
    }
}

/// Valence of every token seen at least `min_total` times across all
/// categories: `2 · rateᵢ / Σ rate − 1` where `rateᵢ = C(x|Lᵢ) / T(Lᵢ)`.
/// Results are sorted by token.
pub fn valence(corpora: &Corpora, min_total: u64) -> Result<Vec<ValenceScore>, AnalysisError> {
    if corpora.len() < 2 {
        return Err(AnalysisError::TooFewCategories(corpora.len()));
    }
    let mut totals = BTreeMap::new();
    for (cat, counts) in corpora {
        let t: u64 = counts.values().sum();
        if t == 0 {
            return Err(AnalysisError::EmptyCategory(cat.clone()));
        }
        totals.insert(cat.as_str(), t as f64);
    }
    let mut merged: BTreeMap<&str, u64> = BTreeMap::new();
    for counts in corpora.values() {
        for (tok, &c) in counts {
            *merged.entry(tok.as_str()).or_default() += c;
        }
    }
    let mut out = Vec::new();
    for (tok, total) in merged {
        if total < min_total || total == 0 {
            continue;
        }
        let counts: BTreeMap<String, u64> =
            corpora.iter().map(|(cat, c)| (cat.clone(), c.get(tok).copied().unwrap_or(0))).collect();
        let rates: Vec<(&String, f64)> = counts.iter().map(|(cat, &c)| (cat, c as f64 / totals[cat.as_str()])).collect();
        let sum: f64 = rates.iter().map(|r| r.1).sum();
        let scores = rates.into_iter().map(|(cat, r)| (cat.clone(), (2.0 * r / sum - 1.0).clamp(-1.0, 1.0))).collect();
        out.push(ValenceScore { token: tok.to_owned(), scores, counts });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedToken {
    pub token: String,
    pub score: f64,
    pub count: u64,
}

/// Tokens scoring strictly above `threshold` for `category`, ranked by
/// score, then count in that category, then token.
pub fn top_valence_words(scores: &[ValenceScore], category: &str, threshold: f64, k: usize) -> Vec<RankedToken> {
    let mut ranked: Vec<RankedToken> = scores
        .iter()
        .filter_map(|s| {
            let score = s.score(category)?;
            (score > threshold).then(|| RankedToken { token: s.token.clone(), score, count: s.count(category) })
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(b.count.cmp(&a.count))
            .then_with(|| a.token.cmp(&b.token))
    });
    ranked.truncate(k);
    ranked
}

/// Whitespace tokens of a tweet after placeholder substitution and
/// normalization.
pub fn tweet_tokens(tweet: &str) -> Vec<String> {
    normalize_text(&preprocess_tweet(tweet)).as_str().split(' ').filter(|t| !t.is_empty()).map(str::to_owned).collect()
}

/// Builds the `m` / `f` tweet corpora from profiles with a known gender.
pub fn gender_corpora(profiles: &[UserProfile], gender: impl Fn(&UserProfile) -> GenderLabel) -> Corpora {
    let mut corpora = Corpora::new();
    corpora.insert(GenderLabel::Male.code().to_owned(), HashMap::new());
    corpora.insert(GenderLabel::Female.code().to_owned(), HashMap::new());
    for p in profiles {
        let g = gender(p);
        if !g.is_known() {
            continue;
        }
        let counts = corpora.get_mut(g.code()).expect("both categories present");
        for t in p.tweets.iter().flat_map(|t| tweet_tokens(t)) {
            *counts.entry(t).or_default() += 1;
        }
    }
    corpora
}

pub fn write_valence_tsv<W: Write>(mut out: W, scores: &[ValenceScore]) -> io::Result<()> {
    let cats: Vec<&String> = scores.first().map(|s| s.scores.keys().collect()).unwrap_or_default();
    write!(out, "token")?;
    for c in &cats {
        write!(out, "\tscore_{c}")?;
    }
    for c in &cats {
        write!(out, "\tcount_{c}")?;
    }
    writeln!(out)?;
    for s in scores {
        write!(out, "{}", s.token)?;
        for c in &cats {
            write!(out, "\t{:.6}", s.scores[*c])?;
        }
        for c in &cats {
            write!(out, "\t{}", s.counts[*c])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfessionPair {
    pub masculine: String,
    pub feminine: String,
    pub domain: String,
}

pub fn bundled_profession_pairs() -> Vec<ProfessionPair> {
    read_profession_pairs(BUNDLED_PROFESSION_PAIRS.as_bytes()).expect("bundled profession pairs are valid")
}

/// Reads `masculine<TAB>feminine<TAB>domain` rows; `#` starts a comment.
pub fn read_profession_pairs<R: BufRead>(reader: R) -> Result<Vec<ProfessionPair>, AnalysisError> {
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let [m, f, d] = cols[..] else {
            return Err(AnalysisError::Parse { line: i + 1, message: format!("expected 3 columns, got {}", cols.len()) });
        };
        pairs.push(ProfessionPair { masculine: m.to_owned(), feminine: f.to_owned(), domain: d.to_owned() });
    }
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GenderCounts {
    pub male: u64,
    pub female: u64,
    pub unknown: u64,
}

impl GenderCounts {
    fn add(&mut self, g: GenderLabel) {
        match g {
            GenderLabel::Male => self.male += 1,
            GenderLabel::Female => self.female += 1,
            GenderLabel::Unknown => self.unknown += 1,
        }
    }

    pub fn known(&self) -> u64 {
        self.male + self.female
    }

    pub fn total(&self) -> u64 {
        self.known() + self.unknown
    }

    /// Male and female shares of the known-gender accounts, in percent.
    /// Both are 0 when no gender is known.
    pub fn percentages(&self) -> (f64, f64) {
        split_percent(self.male, self.female)
    }
}

fn split_percent(a: u64, b: u64) -> (f64, f64) {
    let n = a + b;
    if n == 0 {
        (0.0, 0.0)
    } else {
        (100.0 * a as f64 / n as f64, 100.0 * b as f64 / n as f64)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Engagement {
    pub accounts: u64,
    pub mean_followers: f64,
    pub mean_friends: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct YearRow {
    pub year: i32,
    pub counts: GenderCounts,
    /// Accounts created in this year or earlier.
    pub cumulative: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfessionGapRow {
    pub pair: ProfessionPair,
    pub masculine_count: u64,
    pub feminine_count: u64,
    pub masculine_pct: f64,
    pub feminine_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StatsReport {
    pub genders: GenderCounts,
    pub by_country: BTreeMap<String, GenderCounts>,
    pub joining_years: Vec<YearRow>,
    pub engagement_male: Engagement,
    pub engagement_female: Engagement,
    pub top_first_words_male: Vec<(String, u64)>,
    pub top_first_words_female: Vec<(String, u64)>,
    pub top_names_male: Vec<(String, u64)>,
    pub top_names_female: Vec<(String, u64)>,
    pub professions: Vec<ProfessionGapRow>,
}

pub struct StatsOptions<'a> {
    /// Used to label profiles whose gold gender is Unknown.
    pub lexicon: Option<(&'a Lexicon, &'a ExclusionList)>,
    pub pairs: &'a [ProfessionPair],
    pub top_k: usize,
}

fn top_k(counts: HashMap<String, u64>, k: usize) -> Vec<(String, u64)> {
    let mut v: Vec<(String, u64)> = counts.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v.truncate(k);
    v
}

pub fn stats_report(profiles: &[UserProfile], opts: &StatsOptions) -> StatsReport {
    let gender_of = |p: &UserProfile| match (p.gold_gender, opts.lexicon) {
        (GenderLabel::Unknown, Some((lex, excl))) => match_description(&p.description, lex, excl),
        (g, _) => g,
    };

    let mut report = StatsReport::default();
    let mut years: BTreeMap<i32, GenderCounts> = BTreeMap::new();
    let mut sums = [(0u64, 0u64, 0u64); 2];
    let mut words: [HashMap<String, u64>; 2] = Default::default();
    let mut names: [HashMap<String, u64>; 2] = Default::default();
    let mut first_words: HashMap<String, u64> = HashMap::new();

    for p in profiles {
        let g = gender_of(p);
        report.genders.add(g);
        report.by_country.entry(p.gold_country.as_str().to_owned()).or_default().add(g);
        if let Some(d) = p.created_at {
            years.entry(d.year()).or_default().add(g);
        }
        let first = first_token(&p.description);
        if let Some(w) = &first {
            *first_words.entry(w.clone()).or_default() += 1;
        }
        let slot = match g {
            GenderLabel::Male => 0,
            GenderLabel::Female => 1,
            GenderLabel::Unknown => continue,
        };
        let s = &mut sums[slot];
        s.0 += 1;
        s.1 += p.followers_count;
        s.2 += p.friends_count;
        if let Some(w) = first {
            *words[slot].entry(w).or_default() += 1;
        }
        if let Some(n) = first_token(p.username()) {
            *names[slot].entry(n).or_default() += 1;
        }
    }

    let mut cumulative = 0;
    report.joining_years = years
        .into_iter()
        .map(|(year, counts)| {
            cumulative += counts.total();
            YearRow { year, counts, cumulative }
        })
        .collect();
    let engagement = |(n, f, r): (u64, u64, u64)| {
        if n == 0 {
            Engagement::default()
        } else {
            Engagement { accounts: n, mean_followers: f as f64 / n as f64, mean_friends: r as f64 / n as f64 }
        }
    };
    report.engagement_male = engagement(sums[0]);
    report.engagement_female = engagement(sums[1]);
    let [wm, wf] = words;
    let [nm, nf] = names;
    report.top_first_words_male = top_k(wm, opts.top_k);
    report.top_first_words_female = top_k(wf, opts.top_k);
    report.top_names_male = top_k(nm, opts.top_k);
    report.top_names_female = top_k(nf, opts.top_k);
    report.professions = opts
        .pairs
        .iter()
        .map(|pair| {
            let count = |w: &str| normalize_text(w).as_str().to_owned();
            let m = first_words.get(&count(&pair.masculine)).copied().unwrap_or(0);
            let f = first_words.get(&count(&pair.feminine)).copied().unwrap_or(0);
            let (mp, fp) = split_percent(m, f);
            ProfessionGapRow { pair: pair.clone(), masculine_count: m, feminine_count: f, masculine_pct: mp, feminine_pct: fp }
        })
        .collect();
    report
}

fn write_ranked<W: Write>(mut out: W, male: &[(String, u64)], female: &[(String, u64)]) -> io::Result<()> {
    writeln!(out, "gender\trank\ttoken\tcount")?;
    for (label, rows) in [("male", male), ("female", female)] {
        for (i, (t, c)) in rows.iter().enumerate() {
            writeln!(out, "{label}\t{}\t{t}\t{c}", i + 1)?;
        }
    }
    Ok(())
}

/// Writes one TSV per report section into `dir` and returns the paths.
pub fn write_stats_tsv(report: &StatsReport, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    let mut file = |name: &str| -> io::Result<io::BufWriter<fs::File>> {
        let p = dir.join(name);
        paths.push(p.clone());
        Ok(io::BufWriter::new(fs::File::create(p)?))
    };

    let mut f = file("genders.tsv")?;
    let g = &report.genders;
    let (mp, fp) = g.percentages();
    writeln!(f, "male\tfemale\tunknown\tmale_pct\tfemale_pct")?;
    writeln!(f, "{}\t{}\t{}\t{mp:.1}\t{fp:.1}", g.male, g.female, g.unknown)?;
    f.flush()?;

    let mut f = file("countries.tsv")?;
    writeln!(f, "country\tmale\tfemale\tunknown\tmale_pct\tfemale_pct")?;
    for (c, g) in &report.by_country {
        let (mp, fp) = g.percentages();
        writeln!(f, "{c}\t{}\t{}\t{}\t{mp:.1}\t{fp:.1}", g.male, g.female, g.unknown)?;
    }
    f.flush()?;

    let mut f = file("joining_years.tsv")?;
    writeln!(f, "year\tmale\tfemale\tunknown\tcumulative")?;
    for r in &report.joining_years {
        writeln!(f, "{}\t{}\t{}\t{}\t{}", r.year, r.counts.male, r.counts.female, r.counts.unknown, r.cumulative)?;
    }
    f.flush()?;

    let mut f = file("engagement.tsv")?;
    writeln!(f, "gender\taccounts\tmean_followers\tmean_friends")?;
    for (label, e) in [("male", &report.engagement_male), ("female", &report.engagement_female)] {
        writeln!(f, "{label}\t{}\t{:.2}\t{:.2}", e.accounts, e.mean_followers, e.mean_friends)?;
    }
    f.flush()?;

    let mut f = file("first_words.tsv")?;
    write_ranked(&mut f, &report.top_first_words_male, &report.top_first_words_female)?;
    f.flush()?;

    let mut f = file("names.tsv")?;
    write_ranked(&mut f, &report.top_names_male, &report.top_names_female)?;
    f.flush()?;

    let mut f = file("professions.tsv")?;
    writeln!(f, "masculine\tfeminine\tmasculine_count\tfeminine_count\tmasculine_pct\tfeminine_pct\tdomain")?;
    for r in &report.professions {
        writeln!(
            f,
            "{}\t{}\t{}\t{}\t{:.1}\t{:.1}\t{}",
            r.pair.masculine, r.pair.feminine, r.masculine_count, r.feminine_count, r.masculine_pct, r.feminine_pct, r.pair.domain
        )?;
    }
    f.flush()?;
    Ok(paths)
}
