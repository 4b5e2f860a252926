//! Profile records: the line-delimited JSON schema, ingest and anonymization.
//!
//! One JSON object per line with the fields `user_id`, `display_name`,
//! `screen_name`, `description`, `location_raw`, `created_at` (`YYYY-MM-DD`),
//! `followers_count`, `friends_count`, `verified`, `tweets`, `friend_names`,
//! `gold_gender` (`"m"`, `"f"` or `"?"`) and `gold_country` (Arab League
//! alpha-2 code, `"OTH"` or `"?"`). Only `user_id` is required.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};

use chrono::NaiveDate;
use hmac::{Hmac, KeyInit, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use thiserror::Error;

use crate::geo::CountryCode;

pub const MAX_FRIEND_NAMES: usize = 100;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("input is not valid UTF-8 (first invalid byte at offset {offset})")]
    Decode { offset: usize },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum GenderLabel {
    Male,
    Female,
    #[default]
    Unknown,
}

impl GenderLabel {
    pub fn code(self) -> &'static str {
        match self {
            GenderLabel::Male => "m",
            GenderLabel::Female => "f",
            GenderLabel::Unknown => "?",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "m" => Some(GenderLabel::Male),
            "f" => Some(GenderLabel::Female),
            "?" => Some(GenderLabel::Unknown),
            _ => None,
        }
    }

    pub fn is_known(self) -> bool {
        self != GenderLabel::Unknown
    }
}

impl fmt::Display for GenderLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GenderLabel::Male => "male",
            GenderLabel::Female => "female",
            GenderLabel::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UserProfile {
    pub user_id: String,
    pub display_name: String,
    pub screen_name: String,
    pub description: String,
    pub location_raw: String,
    pub created_at: Option<NaiveDate>,
    pub followers_count: u64,
    pub friends_count: u64,
    pub verified: bool,
    pub tweets: Vec<String>,
    pub friend_names: Vec<String>,
    pub gold_gender: GenderLabel,
    pub gold_country: CountryCode,
}

impl UserProfile {
    /// The name the classifier sees: the display name, or the screen name
    /// when the display name is blank.
    pub fn username(&self) -> &str {
        if self.display_name.trim().is_empty() {
            &self.screen_name
        } else {
            &self.display_name
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    user_id: String,
    #[serde(default)]
    display_name: String,
    #[serde(default)]
    screen_name: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    location_raw: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    created_at: Option<String>,
    #[serde(default)]
    followers_count: u64,
    #[serde(default)]
    friends_count: u64,
    #[serde(default)]
    verified: bool,
    #[serde(default)]
    tweets: Vec<String>,
    #[serde(default)]
    friend_names: Vec<String>,
    #[serde(default = "unknown_code")]
    gold_gender: String,
    #[serde(default = "unknown_code")]
    gold_country: String,
}

fn unknown_code() -> String {
    "?".to_owned()
}

impl TryFrom<Record> for UserProfile {
    type Error = String;

    fn try_from(r: Record) -> Result<Self, String> {
        if r.user_id.is_empty() {
            return Err("empty user_id".into());
        }
        if r.friend_names.len() > MAX_FRIEND_NAMES {
            return Err(format!(
                "friend_names has {} entries (limit {MAX_FRIEND_NAMES})",
                r.friend_names.len()
            ));
        }
        let created_at = match r.created_at.as_deref() {
            None | Some("") => None,
            Some(s) => Some(
                NaiveDate::parse_from_str(s, "%Y-%m-%d")
                    .map_err(|e| format!("bad created_at {s:?}: {e}"))?,
            ),
        };
        let gold_gender = GenderLabel::from_code(&r.gold_gender)
            .ok_or_else(|| format!("bad gold_gender {:?}", r.gold_gender))?;
        let gold_country = match r.gold_country.as_str() {
            "?" => CountryCode::Unknown,
            code => CountryCode::parse(code)
                .ok_or_else(|| format!("bad gold_country {code:?}"))?,
        };
        Ok(UserProfile {
            user_id: r.user_id,
            display_name: r.display_name,
            screen_name: r.screen_name,
            description: r.description,
            location_raw: r.location_raw,
            created_at,
            followers_count: r.followers_count,
            friends_count: r.friends_count,
            verified: r.verified,
            tweets: r.tweets,
            friend_names: r.friend_names,
            gold_gender,
            gold_country,
        })
    }
}

impl From<&UserProfile> for Record {
    fn from(p: &UserProfile) -> Self {
        Record {
            user_id: p.user_id.clone(),
            display_name: p.display_name.clone(),
            screen_name: p.screen_name.clone(),
            description: p.description.clone(),
            location_raw: p.location_raw.clone(),
            created_at: p.created_at.map(|d| d.format("%Y-%m-%d").to_string()),
            followers_count: p.followers_count,
            friends_count: p.friends_count,
            verified: p.verified,
            tweets: p.tweets.clone(),
            friend_names: p.friend_names.clone(),
            gold_gender: p.gold_gender.code().to_owned(),
            gold_country: match p.gold_country {
                CountryCode::Unknown => "?".to_owned(),
                other => other.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiagnosticKind {
    Malformed(String),
    DuplicateId(String),
}

/// A record-level problem. Line numbers are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub kind: DiagnosticKind,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            DiagnosticKind::Malformed(msg) => write!(f, "line {}: malformed record: {msg}", self.line),
            DiagnosticKind::DuplicateId(id) => {
                write!(f, "line {}: duplicate user_id {id:?}, keeping first occurrence", self.line)
            }
        }
    }
}

#[derive(Debug, Default)]
pub struct ParsedProfiles {
    pub profiles: Vec<UserProfile>,
    pub diagnostics: Vec<Diagnostic>,
    /// Records dropped because their id is on the exclusion list.
    pub excluded: usize,
}

pub fn parse_profiles<R: Read>(stream: R) -> Result<ParsedProfiles, DatasetError> {
    parse_profiles_excluding(stream, &HashSet::new())
}

/// Parses a record stream, dropping accounts whose `user_id` is in
/// `excluded_ids` (the stand-in for adult/spam account filtering).
pub fn parse_profiles_excluding<R: Read>(
    mut stream: R,
    excluded_ids: &HashSet<String>,
) -> Result<ParsedProfiles, DatasetError> {
    let mut bytes = Vec::new();
    stream.read_to_end(&mut bytes)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| DatasetError::Decode {
        offset: e.valid_up_to(),
    })?;

    let mut out = ParsedProfiles::default();
    let mut seen = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<Record>(line)
            .map_err(|e| e.to_string())
            .and_then(UserProfile::try_from);
        let profile = match parsed {
            Ok(p) => p,
            Err(msg) => {
                out.diagnostics.push(Diagnostic { line: line_no, kind: DiagnosticKind::Malformed(msg) });
                continue;
            }
        };
        if excluded_ids.contains(&profile.user_id) {
            out.excluded += 1;
            continue;
        }
        if !seen.insert(profile.user_id.clone()) {
            out.diagnostics.push(Diagnostic {
                line: line_no,
                kind: DiagnosticKind::DuplicateId(profile.user_id),
            });
            continue;
        }
        out.profiles.push(profile);
    }
    Ok(out)
}

pub fn serialize_profile(profile: &UserProfile) -> Result<String, DatasetError> {
    Ok(serde_json::to_string(&Record::from(profile))?)
}

pub fn write_profiles<W: Write>(mut out: W, profiles: &[UserProfile]) -> Result<(), DatasetError> {
    for p in profiles {
        writeln!(out, "{}", serialize_profile(p)?)?;
    }
    Ok(())
}

const SYNTHETIC_PROFILES: &str = include_str!("../data/synthetic_profiles.jsonl");

/// Sixty synthetic labelled profiles, alternating Male and Female. Male
/// names use only the letters ب ت ث ج ح خ د ذ and female names only
/// س ش ص ض ط ظ ع غ, so no name n-gram is shared across genders.
pub fn synthetic_profiles() -> Vec<UserProfile> {
    let parsed = parse_profiles(SYNTHETIC_PROFILES.as_bytes()).expect("bundled fixture is UTF-8");
    debug_assert!(parsed.diagnostics.is_empty());
    parsed.profiles
}

/// Replaces identifiers: `user_id` becomes a sequential opaque id and
/// `screen_name` a keyed-hash pseudonym under `secret`. Same secret, same
/// output.
pub fn anonymize(profiles: &[UserProfile], secret: &[u8]) -> Vec<UserProfile> {
    let width = profiles.len().to_string().len().max(6);
    profiles
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut mac = <Hmac<Sha256> as KeyInit>::new_from_slice(secret)
                .expect("HMAC accepts keys of any length");
            mac.update(p.screen_name.as_bytes());
            let digest = mac.finalize().into_bytes();
            let pseudonym: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
            UserProfile {
                user_id: format!("U{:0width$}", i + 1),
                screen_name: format!("user_{pseudonym}"),
                ..p.clone()
            }
        })
        .collect()
}
