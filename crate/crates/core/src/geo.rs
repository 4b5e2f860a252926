//! Free-text location to country mapping.
//!
//! Locations resolve against an offline gazetteer of normalized aliases. The
//! result is always one of the 22 Arab League alpha-2 codes, `OTH` (a country
//! outside the Arab League) or `UNK`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use thiserror::Error;

use crate::normalize::normalize_text;

/// Arab League members, alphabetical by alpha-2 code.
pub const ARAB_LEAGUE: [&str; 22] = [
    "AE", "BH", "DJ", "DZ", "EG", "IQ", "JO", "KM", "KW", "LB", "LY", "MA", "MR", "OM", "PS", "QA",
    "SA", "SD", "SO", "SY", "TN", "YE",
];

const ISO_ALPHA2: &str = "AD AE AF AG AI AL AM AO AQ AR AS AT AU AW AX AZ BA BB BD BE BF BG BH BI BJ \
BL BM BN BO BQ BR BS BT BV BW BY BZ CA CC CD CF CG CH CI CK CL CM CN CO CR CU CV CW CX CY CZ DE DJ \
DK DM DO DZ EC EE EG EH ER ES ET FI FJ FK FM FO FR GA GB GD GE GF GG GH GI GL GM GN GP GQ GR GS GT \
GU GW GY HK HM HN HR HT HU ID IE IL IM IN IO IQ IR IS IT JE JM JO JP KE KG KH KI KM KN KP KR KW KY \
KZ LA LB LC LI LK LR LS LT LU LV LY MA MC MD ME MF MG MH MK ML MM MN MO MP MQ MR MS MT MU MV MW MX \
MY MZ NA NC NE NF NG NI NL NO NP NR NU NZ OM PA PE PF PG PH PK PL PM PN PR PS PT PW PY QA RE RO RS \
RU RW SA SB SC SD SE SG SH SI SJ SK SL SM SN SO SR SS ST SV SX SY SZ TC TD TF TG TH TJ TK TL TM TN \
TO TR TT TV TW TZ UA UG UM US UY UZ VA VC VE VG VI VN VU WF WS YE YT ZA ZM ZW";

/// Starter gazetteer shipped with the crate.
pub const BUNDLED_GAZETTEER: &str = include_str!("../data/gazetteer.tsv");

pub fn is_iso_alpha2(code: &str) -> bool {
    code.len() == 2 && ISO_ALPHA2.split(' ').any(|c| c == code)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArabCountry(u8);

impl ArabCountry {
    pub fn from_code(code: &str) -> Option<Self> {
        ARAB_LEAGUE.iter().position(|&c| c == code).map(|i| ArabCountry(i as u8))
    }

    pub fn code(self) -> &'static str {
        ARAB_LEAGUE[self.0 as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum CountryCode {
    Arab(ArabCountry),
    Other,
    #[default]
    Unknown,
}

impl CountryCode {
    /// Parses `"OTH"`, `"UNK"` or an Arab League alpha-2 code.
    pub fn parse(code: &str) -> Option<Self> {
        match code {
            "OTH" => Some(CountryCode::Other),
            "UNK" => Some(CountryCode::Unknown),
            c => ArabCountry::from_code(c).map(CountryCode::Arab),
        }
    }

    /// Classifies any ISO alpha-2 code into the closed set.
    pub fn from_alpha2(code: &str) -> Self {
        ArabCountry::from_code(code).map_or(CountryCode::Other, CountryCode::Arab)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CountryCode::Arab(c) => c.code(),
            CountryCode::Other => "OTH",
            CountryCode::Unknown => "UNK",
        }
    }

    pub fn is_mapped(self) -> bool {
        self != CountryCode::Unknown
    }
}

impl fmt::Display for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// All 24 values a location can map to.
pub fn closed_code_set() -> Vec<CountryCode> {
    (0..ARAB_LEAGUE.len() as u8)
        .map(|i| CountryCode::Arab(ArabCountry(i)))
        .chain([CountryCode::Other, CountryCode::Unknown])
        .collect()
}

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("alias {alias:?} maps to both {first} and {second}")]
    ConflictingAlias { alias: String, first: String, second: String },
    #[error("line {line}: unknown country code {code:?}")]
    UnknownCode { line: usize, code: String },
    #[error("line {line}: expected `alias<TAB>code`")]
    BadLine { line: usize },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    /// normalized alias → alpha-2
    aliases: HashMap<String, String>,
    /// alias token sequences keyed by their first token
    by_first_token: HashMap<String, Vec<Vec<String>>>,
}

fn location_tokens(normalized: &str) -> Vec<String> {
    normalized
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

impl Gazetteer {
    pub fn bundled() -> Self {
        Self::from_reader(BUNDLED_GAZETTEER.as_bytes()).expect("bundled gazetteer is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GeoError> {
        Self::from_reader(fs::File::open(path)?)
    }

    /// Reads `alias<TAB>code` rows. Blank lines and `#` comments are skipped.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, GeoError> {
        let mut aliases: HashMap<String, String> = HashMap::new();
        for (idx, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (alias, code) = line.split_once('\t').ok_or(GeoError::BadLine { line: line_no })?;
            let code = code.trim();
            if !is_iso_alpha2(code) {
                return Err(GeoError::UnknownCode { line: line_no, code: code.to_owned() });
            }
            let key = location_tokens(normalize_text(alias).as_str()).join(" ");
            if key.is_empty() {
                return Err(GeoError::BadLine { line: line_no });
            }
            match aliases.get(&key) {
                Some(existing) if existing != code => {
                    return Err(GeoError::ConflictingAlias {
                        alias: key,
                        first: existing.clone(),
                        second: code.to_owned(),
                    })
                }
                Some(_) => {}
                None => {
                    aliases.insert(key, code.to_owned());
                }
            }
        }
        let mut by_first_token: HashMap<String, Vec<Vec<String>>> = HashMap::new();
        for alias in aliases.keys() {
            let tokens: Vec<String> = alias.split(' ').map(str::to_owned).collect();
            by_first_token.entry(tokens[0].clone()).or_default().push(tokens);
        }
        Ok(Gazetteer { aliases, by_first_token })
    }

    pub fn len(&self) -> usize {
        self.aliases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aliases.is_empty()
    }

    /// Alpha-2 code for an alias given in any spelling.
    pub fn lookup(&self, alias: &str) -> Option<&str> {
        let key = location_tokens(normalize_text(alias).as_str()).join(" ");
        self.aliases.get(&key).map(String::as_str)
    }

    /// Longest alias found on token boundaries; ties go to the earliest start.
    fn longest_match(&self, tokens: &[String]) -> Option<&str> {
        let mut best: Option<(usize, &str)> = None;
        for start in 0..tokens.len() {
            let Some(candidates) = self.by_first_token.get(&tokens[start]) else {
                continue;
            };
            for alias in candidates {
                let end = start + alias.len();
                if end > tokens.len() || tokens[start..end] != alias[..] {
                    continue;
                }
                let key = alias.join(" ");
                let len = key.chars().count();
                if best.is_none_or(|(best_len, _)| len > best_len) {
                    let code = self.aliases[&key].as_str();
                    best = Some((len, code));
                }
            }
        }
        best.map(|(_, code)| code)
    }
}

pub fn map_location(location_raw: &str, gaz: &Gazetteer) -> CountryCode {
    let normalized = normalize_text(location_raw);
    if normalized.is_empty() {
        return CountryCode::Unknown;
    }
    let tokens = location_tokens(normalized.as_str());
    if tokens.is_empty() {
        return CountryCode::Unknown;
    }
    let whole = tokens.join(" ");
    let code = gaz.aliases.get(&whole).map(String::as_str).or_else(|| gaz.longest_match(&tokens));
    code.map_or(CountryCode::Unknown, CountryCode::from_alpha2)
}

/// An online geocoding backend. Receives a normalized query and answers
/// with an alpha-2 code, or `None` when the place is not resolvable.
pub trait Geocoder {
    fn geocode(&self, normalized_query: &str) -> Result<Option<String>, GeoError>;
}

/// Wraps a [`Geocoder`] with a persistent TSV cache keyed by normalized
/// query. Unresolvable queries are cached as `-`.
pub struct CachedGeocoder<G> {
    backend: G,
    cache_path: PathBuf,
    cache: Mutex<BTreeMap<String, Option<String>>>,
}

impl<G: Geocoder> CachedGeocoder<G> {
    pub fn open(backend: G, cache_path: impl Into<PathBuf>) -> Result<Self, GeoError> {
        let cache_path = cache_path.into();
        let mut cache = BTreeMap::new();
        if cache_path.exists() {
            for line in BufReader::new(fs::File::open(&cache_path)?).lines() {
                let line = line?;
                if let Some((query, code)) = line.split_once('\t') {
                    let code = (code != "-").then(|| code.to_owned());
                    cache.insert(query.to_owned(), code);
                }
            }
        }
        Ok(CachedGeocoder { backend, cache_path, cache: Mutex::new(cache) })
    }

    pub fn resolve(&self, location_raw: &str) -> Result<CountryCode, GeoError> {
        let query = normalize_text(location_raw).into_string();
        if query.is_empty() {
            return Ok(CountryCode::Unknown);
        }
        let mut cache = self.cache.lock().expect("geocoder cache poisoned");
        let code = match cache.get(&query) {
            Some(hit) => hit.clone(),
            None => {
                let answer = self.backend.geocode(&query)?.filter(|c| is_iso_alpha2(c));
                let mut file = fs::OpenOptions::new().create(true).append(true).open(&self.cache_path)?;
                writeln!(file, "{query}\t{}", answer.as_deref().unwrap_or("-"))?;
                cache.insert(query, answer.clone());
                answer
            }
        };
        Ok(code.map_or(CountryCode::Unknown, |c| CountryCode::from_alpha2(&c)))
    }
}

/// Gazetteer first, then the geocoder for anything the gazetteer misses.
pub fn map_location_with_fallback<G: Geocoder>(
    location_raw: &str,
    gaz: &Gazetteer,
    geocoder: &CachedGeocoder<G>,
) -> Result<CountryCode, GeoError> {
    match map_location(location_raw, gaz) {
        CountryCode::Unknown if !normalize_text(location_raw).is_empty() => geocoder.resolve(location_raw),
        code => Ok(code),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    fn gaz(rows: &str) -> Result<Gazetteer, GeoError> {
        Gazetteer::from_reader(rows.as_bytes())
    }

    #[test]
    fn load_normalizes_aliases() {
        let g = gaz("جدة\tSA\n").unwrap();
        assert_eq!(g.aliases.get("جده").map(String::as_str), Some("SA"));
        assert_eq!(g.lookup("جدة"), Some("SA"));
    }

    #[test]
    fn duplicate_rows_merge() {
        let g = gaz("Dubai\tAE\ndubai\tAE\n").unwrap();
        assert_eq!(g.len(), 1);
    }

    #[test]
    fn conflicting_rows_name_the_alias() {
        let err = gaz("paris\tFR\nparis\tUS\n").unwrap_err();
        match err {
            GeoError::ConflictingAlias { alias, .. } => assert_eq!(alias, "paris"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err_string("paris\tFR\nParis\tUS\n").contains("paris"));
    }

    fn err_string(rows: &str) -> String {
        gaz(rows).unwrap_err().to_string()
    }

    #[test]
    fn unknown_code_rejected() {
        assert!(matches!(gaz("atlantis\tXX\n"), Err(GeoError::UnknownCode { line: 1, .. })));
    }

    #[test]
    fn bundled_examples() {
        let g = Gazetteer::bundled();
        assert_eq!(map_location("جدة", &g).as_str(), "SA");
        assert_eq!(map_location("UAE - Dubai", &g).as_str(), "AE");
        assert_eq!(map_location("", &g).as_str(), "UNK");
        assert_eq!(map_location("   ", &g).as_str(), "UNK");
        assert_eq!(map_location("Paris, France", &g).as_str(), "OTH");
        assert_eq!(map_location("somewhere over the rainbow", &g).as_str(), "UNK");
        assert_eq!(map_location("الرياض، السعودية", &g).as_str(), "SA");
    }

    #[test]
    fn longest_alias_wins() {
        let g = gaz("dubai\tAE\ndubai mall\tAE\n").unwrap();
        assert_eq!(map_location("at the dubai mall today", &g).as_str(), "AE");
        let g = gaz("jordan\tJO\nmichael jordan fan club\tUS\n").unwrap();
        assert_eq!(map_location("michael jordan fan club", &g).as_str(), "OTH");
        assert_eq!(map_location("the michael jordan fan club hq", &g).as_str(), "OTH");
    }

    #[test]
    fn earliest_alias_wins_ties() {
        let g = gaz("oman\tOM\ndoha\tQA\n").unwrap();
        assert_eq!(map_location("oman / doha", &g).as_str(), "OM");
        assert_eq!(map_location("doha / oman", &g).as_str(), "QA");
    }

    #[test]
    fn aliases_match_only_whole_tokens() {
        let g = gaz("oman\tOM\n").unwrap();
        assert_eq!(map_location("romance", &g).as_str(), "UNK");
    }

    struct CountingGeocoder(Cell<usize>);

    impl Geocoder for CountingGeocoder {
        fn geocode(&self, q: &str) -> Result<Option<String>, GeoError> {
            self.0.set(self.0.get() + 1);
            Ok((q == "atlantis city").then(|| "GR".to_owned()))
        }
    }

    #[test]
    fn geocoder_cache_persists() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.tsv");
        let client = CachedGeocoder::open(CountingGeocoder(Cell::new(0)), &path).unwrap();
        assert_eq!(client.resolve("Atlantis  City").unwrap(), CountryCode::Other);
        assert_eq!(client.resolve("atlantis city").unwrap(), CountryCode::Other);
        assert_eq!(client.resolve("nowhere").unwrap(), CountryCode::Unknown);
        assert_eq!(client.backend.0.get(), 2);

        let reopened = CachedGeocoder::open(CountingGeocoder(Cell::new(0)), &path).unwrap();
        assert_eq!(reopened.resolve("atlantis city").unwrap(), CountryCode::Other);
        assert_eq!(reopened.resolve("nowhere").unwrap(), CountryCode::Unknown);
        assert_eq!(reopened.backend.0.get(), 0);

        let g = Gazetteer::bundled();
        assert_eq!(map_location_with_fallback("جدة", &g, &reopened).unwrap().as_str(), "SA");
        assert_eq!(map_location_with_fallback("atlantis city", &g, &reopened).unwrap(), CountryCode::Other);
    }
}
