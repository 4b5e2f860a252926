//! Gender-marker word list built from the first words of profile descriptions.
//!
//! Words are tagged by the Taa Marbouta rule with three editable exception
//! tables on top: feminine words without a marker, masculine words that have
//! no feminine form, and ambiguous or dual-gender words. Each tagged word
//! also contributes its opposite-gender counterpart.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::dataset::{GenderLabel, UserProfile};
use crate::normalize::{
    clean_surface, first_surface_token, first_token, normalize_text, ALIF_MAQSOURA, KASRATAN,
    TAA_MARBOUTA,
};

pub const DEFAULT_MIN_COUNT: u64 = 2;

const BUNDLED_FEMININE_UNMARKED: &str = include_str!("../data/feminine_unmarked.txt");
const BUNDLED_MASCULINE_ONLY: &str = include_str!("../data/masculine_only.txt");
const BUNDLED_AMBIGUOUS: &str = include_str!("../data/ambiguous.txt");

const YAA: char = '\u{064A}';

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("empty token")]
    EmptyToken,
    #[error("min_count must be at least 2, got {0}")]
    InvalidMinCount(u64),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MarkerGender {
    Masculine,
    Feminine,
}

impl MarkerGender {
    pub fn opposite(self) -> Self {
        match self {
            MarkerGender::Masculine => MarkerGender::Feminine,
            MarkerGender::Feminine => MarkerGender::Masculine,
        }
    }

    pub fn label(self) -> GenderLabel {
        match self {
            MarkerGender::Masculine => GenderLabel::Male,
            MarkerGender::Feminine => GenderLabel::Female,
        }
    }

    fn code(self) -> &'static str {
        match self {
            MarkerGender::Masculine => "m",
            MarkerGender::Feminine => "f",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeuristicGender {
    Masculine,
    Feminine,
    Ambiguous,
}

impl fmt::Display for HeuristicGender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HeuristicGender::Masculine => "m",
            HeuristicGender::Feminine => "f",
            HeuristicGender::Ambiguous => "ambiguous",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntrySource {
    Heuristic,
    ExceptionList,
    Counterpart,
}

impl EntrySource {
    fn code(self) -> &'static str {
        match self {
            EntrySource::Heuristic => "heuristic",
            EntrySource::ExceptionList => "exception",
            EntrySource::Counterpart => "counterpart",
        }
    }

    fn from_code(s: &str) -> Option<Self> {
        match s {
            "heuristic" => Some(EntrySource::Heuristic),
            "exception" => Some(EntrySource::ExceptionList),
            "counterpart" => Some(EntrySource::Counterpart),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry {
    pub normalized_form: String,
    /// Spellings that normalize to `normalized_form`; the first is canonical.
    pub surface_variants: Vec<String>,
    pub gender: MarkerGender,
    pub source: EntrySource,
    pub corpus_count: u64,
}

/// Hand-editable word tables, stored normalized.
#[derive(Debug, Clone, Default)]
pub struct ExceptionTables {
    pub feminine_unmarked: HashSet<String>,
    pub masculine_only: HashSet<String>,
    pub ambiguous: HashSet<String>,
}

fn parse_token_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| normalize_text(l).into_string())
        .collect()
}

impl ExceptionTables {
    pub fn bundled() -> Self {
        ExceptionTables {
            feminine_unmarked: parse_token_list(BUNDLED_FEMININE_UNMARKED),
            masculine_only: parse_token_list(BUNDLED_MASCULINE_ONLY),
            ambiguous: parse_token_list(BUNDLED_AMBIGUOUS),
        }
    }

    /// Loads `feminine_unmarked.txt`, `masculine_only.txt` and `ambiguous.txt`
    /// from `dir`, falling back to the bundled table for any missing file.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let dir = dir.as_ref();
        let read = |name: &str, fallback: &str| -> Result<HashSet<String>, LexiconError> {
            let path = dir.join(name);
            if path.exists() {
                Ok(parse_token_list(&fs::read_to_string(path)?))
            } else {
                Ok(parse_token_list(fallback))
            }
        };
        Ok(ExceptionTables {
            feminine_unmarked: read("feminine_unmarked.txt", BUNDLED_FEMININE_UNMARKED)?,
            masculine_only: read("masculine_only.txt", BUNDLED_MASCULINE_ONLY)?,
            ambiguous: read("ambiguous.txt", BUNDLED_AMBIGUOUS)?,
        })
    }

    fn is_exception(&self, normalized: &str) -> bool {
        self.feminine_unmarked.contains(normalized) || self.masculine_only.contains(normalized)
    }
}

/// Tags one word. Takes the surface form because normalization folds the
/// Taa Marbouta into Haa and the suffix signal would be lost.
pub fn heuristic_gender(surface: &str, tables: &ExceptionTables) -> Result<HeuristicGender, LexiconError> {
    let normalized = normalize_text(surface);
    if normalized.is_empty() {
        return Err(LexiconError::EmptyToken);
    }
    let key = normalized.as_str();
    if tables.feminine_unmarked.contains(key) {
        return Ok(HeuristicGender::Feminine);
    }
    if tables.ambiguous.contains(key) {
        return Ok(HeuristicGender::Ambiguous);
    }
    if clean_surface(surface).ends_with(TAA_MARBOUTA) {
        Ok(HeuristicGender::Feminine)
    } else {
        Ok(HeuristicGender::Masculine)
    }
}

/// Opposite-gender spellings of `surface`, canonical spelling first.
///
/// Feminine to masculine drops the Taa Marbouta; a resulting final Yaa also
/// yields the Alif Maqsoura and kasratan spellings (محامية → محامي, محامى, محامٍ).
/// Masculine to feminine appends the Taa Marbouta, restoring the Yaa of a
/// defective ending first.
pub fn counterpart(surface: &str, gender: MarkerGender) -> Vec<String> {
    let word = clean_surface(surface);
    match gender {
        MarkerGender::Feminine => {
            let Some(base) = word.strip_suffix(TAA_MARBOUTA) else {
                return Vec::new();
            };
            if base.is_empty() {
                return Vec::new();
            }
            let mut forms = vec![base.to_owned()];
            if let Some(stem) = base.strip_suffix(YAA) {
                if !stem.is_empty() {
                    forms.push(format!("{stem}{ALIF_MAQSOURA}"));
                    forms.push(format!("{stem}{KASRATAN}"));
                }
            }
            forms
        }
        MarkerGender::Masculine => {
            if word.is_empty() || word.ends_with(TAA_MARBOUTA) {
                return Vec::new();
            }
            let stem = word
                .strip_suffix(KASRATAN)
                .or_else(|| word.strip_suffix(ALIF_MAQSOURA))
                .map(|s| format!("{s}{YAA}"));
            vec![format!("{}{TAA_MARBOUTA}", stem.as_deref().unwrap_or(&word))]
        }
    }
}

/// Normalized tokens that are never labeled.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExclusionList {
    tokens: BTreeSet<String>,
}

impl ExclusionList {
    pub fn contains(&self, normalized: &str) -> bool {
        self.tokens.contains(normalized)
    }

    pub fn insert(&mut self, token: &str) {
        let key = normalize_text(token).into_string();
        if !key.is_empty() {
            self.tokens.insert(key);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn from_reader<R: Read>(mut reader: R) -> Result<Self, LexiconError> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        Ok(ExclusionList { tokens: parse_token_list(&text).into_iter().collect() })
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), LexiconError> {
        for t in &self.tokens {
            writeln!(out, "{t}")?;
        }
        Ok(())
    }
}

impl FromIterator<String> for ExclusionList {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        let mut list = ExclusionList::default();
        for t in iter {
            list.insert(&t);
        }
        list
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    index: HashMap<String, usize>,
}

impl Lexicon {
    /// Builds a lexicon in canonical order: corpus count descending, then
    /// normalized form ascending. Later duplicates of a form are dropped.
    pub fn from_entries(entries: Vec<LexiconEntry>) -> Self {
        let mut entries = entries;
        entries.sort_by(|a, b| {
            b.corpus_count.cmp(&a.corpus_count).then_with(|| a.normalized_form.cmp(&b.normalized_form))
        });
        let mut seen = HashSet::new();
        entries.retain(|e| seen.insert(e.normalized_form.clone()));
        let index = entries.iter().enumerate().map(|(i, e)| (e.normalized_form.clone(), i)).collect();
        Lexicon { entries, index }
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn get(&self, normalized: &str) -> Option<&LexiconEntry> {
        self.index.get(normalized).map(|&i| &self.entries[i])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Tab-separated: normalized form, gender, source, count, variants.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<(), LexiconError> {
        writeln!(out, "# normalized_form\tgender\tsource\tcount\tvariants")?;
        for e in &self.entries {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                e.normalized_form,
                e.gender.code(),
                e.source.code(),
                e.corpus_count,
                e.surface_variants.join(",")
            )?;
        }
        Ok(())
    }

    pub fn read_tsv<R: Read>(reader: R) -> Result<Self, LexiconError> {
        let mut entries = Vec::new();
        for (idx, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: String| LexiconError::Parse { line: line_no, message };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 5 {
                return Err(bad(format!("expected 5 columns, found {}", cols.len())));
            }
            let normalized_form = normalize_text(cols[0]).into_string();
            if normalized_form.is_empty() {
                return Err(bad("empty normalized form".into()));
            }
            let gender = match cols[1] {
                "m" => MarkerGender::Masculine,
                "f" => MarkerGender::Feminine,
                g => return Err(bad(format!("bad gender {g:?}"))),
            };
            let source = EntrySource::from_code(cols[2]).ok_or_else(|| bad(format!("bad source {:?}", cols[2])))?;
            let corpus_count = cols[3].parse().map_err(|_| bad(format!("bad count {:?}", cols[3])))?;
            let surface_variants = cols[4].split(',').filter(|v| !v.is_empty()).map(str::to_owned).collect();
            entries.push(LexiconEntry { normalized_form, surface_variants, gender, source, corpus_count });
        }
        Ok(Lexicon::from_entries(entries))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        Self::read_tsv(fs::File::open(path)?)
    }
}

/// A retained first word before counterpart generation, for manual curation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub token: String,
    pub count: u64,
    pub canonical_surface: String,
    pub gender: HeuristicGender,
}

pub fn write_candidates<W: Write>(mut out: W, candidates: &[Candidate]) -> Result<(), LexiconError> {
    writeln!(out, "# token\tcount\theuristic\tsurface")?;
    for c in candidates {
        writeln!(out, "{}\t{}\t{}\t{}", c.token, c.count, c.gender, c.canonical_surface)?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct LexiconBuild {
    pub lexicon: Lexicon,
    pub exclusions: ExclusionList,
    pub candidates: Vec<Candidate>,
}

pub fn build_lexicon(
    profiles: &[UserProfile],
    min_count: u64,
    tables: &ExceptionTables,
) -> Result<LexiconBuild, LexiconError> {
    if min_count < 2 {
        return Err(LexiconError::InvalidMinCount(min_count));
    }

    // normalized first word → (count, surface spelling → count)
    let mut counts: HashMap<String, (u64, BTreeMap<String, u64>)> = HashMap::new();
    for p in profiles {
        let Some(token) = first_token(&p.description) else {
            continue;
        };
        let slot = counts.entry(token.clone()).or_default();
        slot.0 += 1;
        if let Some(surface) = first_surface_token(&p.description).map(|s| clean_surface(&s)) {
            if normalize_text(&surface).as_str() == token {
                *slot.1.entry(surface).or_default() += 1;
            }
        }
    }

    let mut retained: Vec<(String, u64, Vec<String>)> = counts
        .into_iter()
        .filter(|(_, (count, _))| *count >= min_count)
        .map(|(token, (count, surfaces))| {
            let mut variants: Vec<(String, u64)> = surfaces.into_iter().collect();
            variants.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            let mut variants: Vec<String> = variants.into_iter().map(|(s, _)| s).collect();
            if variants.is_empty() {
                variants.push(token.clone());
            }
            (token, count, variants)
        })
        .collect();
    retained.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let mut exclusions: ExclusionList = tables.ambiguous.iter().cloned().collect();
    let mut candidates = Vec::with_capacity(retained.len());
    let mut entries: Vec<LexiconEntry> = Vec::new();
    for (token, count, variants) in retained {
        let gender = heuristic_gender(&variants[0], tables)?;
        candidates.push(Candidate {
            token: token.clone(),
            count,
            canonical_surface: variants[0].clone(),
            gender,
        });
        let gender = match gender {
            HeuristicGender::Masculine => MarkerGender::Masculine,
            HeuristicGender::Feminine => MarkerGender::Feminine,
            HeuristicGender::Ambiguous => {
                exclusions.insert(&token);
                continue;
            }
        };
        let source = if tables.is_exception(&token) { EntrySource::ExceptionList } else { EntrySource::Heuristic };
        entries.push(LexiconEntry {
            normalized_form: token,
            surface_variants: variants,
            gender,
            source,
            corpus_count: count,
        });
    }

    let mut known: HashSet<String> = entries.iter().map(|e| e.normalized_form.clone()).collect();
    let mut generated: Vec<LexiconEntry> = Vec::new();
    for entry in &entries {
        if tables.is_exception(&entry.normalized_form) {
            continue;
        }
        let mut by_form: Vec<(String, Vec<String>)> = Vec::new();
        for surface in counterpart(&entry.surface_variants[0], entry.gender) {
            let form = normalize_text(&surface).into_string();
            match by_form.iter_mut().find(|(f, _)| *f == form) {
                Some((_, v)) => v.push(surface),
                None => by_form.push((form, vec![surface])),
            }
        }
        for (form, surface_variants) in by_form {
            if form.is_empty() || exclusions.contains(&form) || tables.is_exception(&form) || !known.insert(form.clone()) {
                continue;
            }
            generated.push(LexiconEntry {
                normalized_form: form,
                surface_variants,
                gender: entry.gender.opposite(),
                source: EntrySource::Counterpart,
                corpus_count: 0,
            });
        }
    }
    entries.extend(generated);

    Ok(LexiconBuild { lexicon: Lexicon::from_entries(entries), exclusions, candidates })
}

pub fn match_description(description: &str, lexicon: &Lexicon, exclusions: &ExclusionList) -> GenderLabel {
    let Some(token) = first_token(description) else {
        return GenderLabel::Unknown;
    };
    if exclusions.contains(&token) {
        return GenderLabel::Unknown;
    }
    lexicon.get(&token).map_or(GenderLabel::Unknown, |e| e.gender.label())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(descs: &[&str]) -> Vec<UserProfile> {
        descs
            .iter()
            .enumerate()
            .map(|(i, d)| UserProfile { user_id: format!("u{i}"), description: (*d).to_owned(), ..Default::default() })
            .collect()
    }

    #[test]
    fn heuristic_cases() {
        let t = ExceptionTables::bundled();
        assert_eq!(heuristic_gender("مهندسة", &t).unwrap(), HeuristicGender::Feminine);
        assert_eq!(heuristic_gender("مهندس", &t).unwrap(), HeuristicGender::Masculine);
        assert_eq!(heuristic_gender("داعية", &t).unwrap(), HeuristicGender::Ambiguous);
        assert_eq!(heuristic_gender("بنت", &t).unwrap(), HeuristicGender::Feminine);
        assert_eq!(heuristic_gender("أنثى", &t).unwrap(), HeuristicGender::Feminine);
        assert_eq!(heuristic_gender("دكتور", &t).unwrap(), HeuristicGender::Ambiguous);
        assert_eq!(heuristic_gender("مهندسـة", &t).unwrap(), HeuristicGender::Feminine);
        assert!(matches!(heuristic_gender("", &t), Err(LexiconError::EmptyToken)));
        assert!(matches!(heuristic_gender("  ", &t), Err(LexiconError::EmptyToken)));
    }

    #[test]
    fn counterpart_rules() {
        assert_eq!(counterpart("مدير", MarkerGender::Masculine), ["مديرة"]);
        assert_eq!(counterpart("مديرة", MarkerGender::Feminine), ["مدير"]);
        assert_eq!(counterpart("محامية", MarkerGender::Feminine), ["محامي", "محامى", "محامٍ"]);
        assert_eq!(counterpart("محامى", MarkerGender::Masculine), ["محامية"]);
        assert_eq!(counterpart("محامٍ", MarkerGender::Masculine), ["محامية"]);
        assert!(counterpart("بنت", MarkerGender::Feminine).is_empty());
    }

    #[test]
    fn build_adds_feminine_counterpart() {
        let build = build_lexicon(
            &corpus(&["مدير مبيعات", "مدير عام", "مُدير تنفيذي", "شاعر"]),
            2,
            &ExceptionTables::bundled(),
        )
        .unwrap();
        let lex = &build.lexicon;
        let m = lex.get("مدير").unwrap();
        assert_eq!((m.gender, m.source, m.corpus_count), (MarkerGender::Masculine, EntrySource::Heuristic, 3));
        let f = lex.get("مديره").unwrap();
        assert_eq!((f.gender, f.source, f.corpus_count), (MarkerGender::Feminine, EntrySource::Counterpart, 0));
        assert_eq!(f.surface_variants, ["مديرة"]);
        assert!(lex.get("شاعر").is_none());
        assert_eq!(build.candidates.len(), 1);
    }

    #[test]
    fn build_adds_masculine_variants() {
        let build = build_lexicon(&corpus(&["محامية", "محامية ومستشارة"]), 2, &ExceptionTables::bundled()).unwrap();
        let lex = &build.lexicon;
        assert_eq!(lex.get("محاميه").unwrap().gender, MarkerGender::Feminine);
        let m = lex.get("محامي").unwrap();
        assert_eq!(m.gender, MarkerGender::Masculine);
        assert_eq!(m.source, EntrySource::Counterpart);
        assert_eq!(m.surface_variants, ["محامي", "محامى"]);
        let defective = lex.get("محام").unwrap();
        assert_eq!(defective.surface_variants, ["محامٍ"]);
        let all: BTreeSet<&str> = lex.entries().iter().flat_map(|e| e.surface_variants.iter().map(String::as_str)).collect();
        for v in ["محامي", "محامى", "محامٍ"] {
            assert!(all.contains(v), "{v} missing");
        }
    }

    #[test]
    fn ambiguous_words_go_to_exclusions() {
        let build = build_lexicon(&corpus(&["داعية", "داعية إسلامي", "دكتورة", "دكتورة أسنان"]), 2, &ExceptionTables::bundled())
            .unwrap();
        assert!(build.exclusions.contains("داعيه"));
        assert!(build.lexicon.get("داعيه").is_none());
        // the counterpart of دكتورة is excluded and must not be generated
        assert!(build.lexicon.get("دكتور").is_none());
        assert!(build.lexicon.get("دكتوره").is_some());
    }

    #[test]
    fn masculine_only_words_get_no_counterpart() {
        let build = build_lexicon(&corpus(&["شخص بسيط", "شخص"]), 2, &ExceptionTables::bundled()).unwrap();
        let e = build.lexicon.get("شخص").unwrap();
        assert_eq!(e.source, EntrySource::ExceptionList);
        assert_eq!(build.lexicon.len(), 1);
    }

    #[test]
    fn empty_and_invalid_inputs() {
        let t = ExceptionTables::bundled();
        let build = build_lexicon(&[], 2, &t).unwrap();
        assert!(build.lexicon.is_empty());
        assert!(matches!(build_lexicon(&[], 1, &t), Err(LexiconError::InvalidMinCount(1))));
    }

    #[test]
    fn matching() {
        let build = build_lexicon(&corpus(&["مهندس", "مهندس"]), 2, &ExceptionTables::bundled()).unwrap();
        let (lex, ex) = (&build.lexicon, &build.exclusions);
        assert_eq!(match_description("مهندس برمجيات", lex, ex), GenderLabel::Male);
        assert_eq!(match_description("مهندسة معمارية", lex, ex), GenderLabel::Female);
        assert_eq!(match_description("دكتور قلب", lex, ex), GenderLabel::Unknown);
        assert_eq!(match_description("", lex, ex), GenderLabel::Unknown);
        assert_eq!(match_description("🙂 123", lex, ex), GenderLabel::Unknown);
        assert_eq!(match_description("طيار", lex, ex), GenderLabel::Unknown);
    }

    #[test]
    fn tsv_round_trip() {
        let build = build_lexicon(&corpus(&["محامية", "محامية", "مدير", "مدير", "مدير"]), 2, &ExceptionTables::bundled())
            .unwrap();
        let mut buf = Vec::new();
        build.lexicon.write_tsv(&mut buf).unwrap();
        let back = Lexicon::read_tsv(buf.as_slice()).unwrap();
        assert_eq!(back, build.lexicon);
        assert!(Lexicon::read_tsv("x\tq\theuristic\t1\tx\n".as_bytes()).is_err());

        let mut buf = Vec::new();
        build.exclusions.write_to(&mut buf).unwrap();
        assert_eq!(ExclusionList::from_reader(buf.as_slice()).unwrap(), build.exclusions);
    }

    #[test]
    fn build_is_order_independent() {
        let descs = ["مهندس", "طبيبة", "مهندس", "طبيبة", "معلمة", "معلمة", "معلمة", "طالب", "طالب"];
        let t = ExceptionTables::bundled();
        let a = build_lexicon(&corpus(&descs), 2, &t).unwrap();
        let mut rev = descs;
        rev.reverse();
        let b = build_lexicon(&corpus(&rev), 2, &t).unwrap();
        assert_eq!(a.lexicon, b.lexicon);
        assert_eq!(a.candidates, b.candidates);
        assert_eq!(a.lexicon.entries()[0].normalized_form, "معلمه");
    }

    #[test]
    fn feminine_entries_carry_marker_or_exception() {
        let t = ExceptionTables::bundled();
        let descs = ["بنت", "بنت", "مهندس", "مهندس", "طبيبة", "طبيبة", "محامى", "محامى"];
        let build = build_lexicon(&corpus(&descs), 2, &t).unwrap();
        for e in build.lexicon.entries() {
            if e.gender == MarkerGender::Feminine {
                assert!(
                    e.surface_variants[0].ends_with(TAA_MARBOUTA) || t.feminine_unmarked.contains(&e.normalized_form),
                    "{e:?}"
                );
            }
            for v in &e.surface_variants {
                assert_eq!(normalize_text(v).as_str(), e.normalized_form);
            }
            assert!(!build.exclusions.contains(&e.normalized_form));
        }
    }

    proptest! {
        #[test]
        fn counterpart_is_an_involution(stem in "[بتثجحخدذرزسشصضطظعغفقكلمنهو]{2,6}", ending in prop_oneof![Just(""), Just("ي")]) {
            let word = format!("{stem}{ending}");
            let fem = counterpart(&word, MarkerGender::Masculine);
            prop_assert_eq!(fem.len(), 1);
            let back = counterpart(&fem[0], MarkerGender::Feminine);
            prop_assert_eq!(normalize_text(&back[0]), normalize_text(&word));
        }

        #[test]
        fn excluded_first_words_never_labeled(suffix in "\\PC{0,20}") {
            let build = build_lexicon(&corpus(&["داعية", "داعية"]), 2, &ExceptionTables::bundled()).unwrap();
            for word in ["داعية", "دكتور", "مدرسة"] {
                let desc = format!("{word} {suffix}");
                prop_assert_eq!(match_description(&desc, &build.lexicon, &build.exclusions), GenderLabel::Unknown);
            }
        }
    }
}
