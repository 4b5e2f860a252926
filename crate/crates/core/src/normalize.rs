//! Orthographic normalization for Arabic and mixed-script profile text.
//!
//! The pipeline, applied in order:
//! - compatibility normalization (presentation forms and decorated letters
//!   collapse to their base letters)
//! - removal of Arabic diacritics, Quranic annotation marks and tatweel
//! - Alif variants (آ أ إ ٱ) to bare Alif, Taa Marbouta to Haa, Alif Maqsoura to Yaa
//! - lower-casing of non-Arabic script
//! - whitespace runs collapsed to one space, then trimmed

use std::fmt;

use unicode_normalization::UnicodeNormalization;

pub const TATWEEL: char = '\u{0640}';
pub const TAA_MARBOUTA: char = '\u{0629}';
pub const ALIF_MAQSOURA: char = '\u{0649}';
pub const KASRATAN: char = '\u{064D}';
const ALIF: char = '\u{0627}';
const HAA: char = '\u{0647}';
const YAA: char = '\u{064A}';

/// Text that has been through [`normalize_text`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct NormalizedText(String);

impl NormalizedText {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for NormalizedText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for NormalizedText {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Arabic combining marks that carry no letter identity: harakat, tanween,
/// shadda, sukun, maddah/hamza marks, superscript alif, honorific signs and
/// Quranic annotation.
pub fn is_arabic_mark(c: char) -> bool {
    matches!(c,
        '\u{0610}'..='\u{061A}'
        | '\u{064B}'..='\u{065F}'
        | '\u{0670}'
        | '\u{06D6}'..='\u{06DC}'
        | '\u{06DF}'..='\u{06E4}'
        | '\u{06E7}'..='\u{06E8}'
        | '\u{06EA}'..='\u{06ED}'
        | '\u{08D3}'..='\u{08E1}'
        | '\u{08E3}'..='\u{08FF}')
}

fn is_alif_variant(c: char) -> bool {
    matches!(c, '\u{0622}' | '\u{0623}' | '\u{0625}' | '\u{0671}')
}

fn is_arabic_script(c: char) -> bool {
    matches!(c,
        '\u{0600}'..='\u{06FF}'
        | '\u{0750}'..='\u{077F}'
        | '\u{08A0}'..='\u{08FF}'
        | '\u{FB50}'..='\u{FDFF}'
        | '\u{FE70}'..='\u{FEFF}')
}

/// Canonicalizes `text` so that matching and featurization ignore
/// orthographic variation. Total and idempotent.
pub fn normalize_text(text: &str) -> NormalizedText {
    let mut folded = String::with_capacity(text.len());
    for c in text.nfkc() {
        if c == TATWEEL || is_arabic_mark(c) {
            continue;
        }
        let mapped = if is_alif_variant(c) {
            ALIF
        } else if c == TAA_MARBOUTA {
            HAA
        } else if c == ALIF_MAQSOURA {
            YAA
        } else {
            c
        };
        if is_arabic_script(mapped) {
            folded.push(mapped);
        } else {
            folded.extend(mapped.to_lowercase());
        }
    }

    // Removing marks can leave Latin base + combining sequences that compose
    // differently than before; recomposing here keeps the function idempotent.
    let mut out = String::with_capacity(folded.len());
    let mut pending_space = false;
    for c in folded.nfc() {
        if c.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        out.push(c);
    }
    NormalizedText(out)
}

/// The first maximal run of letters in the normalized text, skipping any
/// leading digits, punctuation, symbols or emoji. Hyphens and underscores
/// separate tokens.
pub fn first_token(description: &str) -> Option<String> {
    let normalized = normalize_text(description);
    normalized
        .as_str()
        .split(|c: char| !c.is_alphabetic())
        .find(|run| !run.is_empty())
        .map(str::to_owned)
}

/// The first letter run of the raw, unnormalized description. Diacritics and
/// tatweel stay attached to the run so the original ending (in particular a
/// Taa Marbouta) is visible to the gender heuristic.
pub fn first_surface_token(description: &str) -> Option<String> {
    let mut token = String::new();
    for c in description.chars() {
        let in_word = c.is_alphabetic() || c == TATWEEL || is_arabic_mark(c);
        if in_word {
            if token.is_empty() && (c == TATWEEL || is_arabic_mark(c)) {
                continue;
            }
            token.push(c);
        } else if !token.is_empty() {
            break;
        }
    }
    (!token.is_empty()).then_some(token)
}

/// Compatibility-folds a surface word and removes tatweel and marks, but keeps
/// the letters the normalizer would merge (ة, ى, hamzated Alif). A trailing
/// kasratan survives because it marks a defective masculine ending (محامٍ).
pub fn clean_surface(word: &str) -> String {
    let folded: Vec<char> = word.nfkc().filter(|&c| c != TATWEEL).collect();
    let last_letter = folded.iter().rposition(|&c| !is_arabic_mark(c));
    let mut out = String::with_capacity(word.len());
    for (i, &c) in folded.iter().enumerate() {
        let trailing_kasratan = c == KASRATAN && last_letter.is_some_and(|l| i > l) && !out.ends_with(KASRATAN);
        if !is_arabic_mark(c) || trailing_kasratan {
            out.push(c);
        }
    }
    out.nfc().collect()
}

/// Code points that must never appear in normalized output.
pub fn is_forbidden_in_normalized(c: char) -> bool {
    matches!(c, '\u{064B}'..='\u{0652}')
        || c == TATWEEL
        || is_alif_variant(c)
        || c == TAA_MARBOUTA
        || c == ALIF_MAQSOURA
        || (matches!(c, '\u{FB50}'..='\u{FDFF}' | '\u{FE70}'..='\u{FEFF}') && !std::iter::once(c).nfkc().eq([c]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strips_diacritics_and_maps_taa_marbouta() {
        assert_eq!(normalize_text("مُدِيرَة").as_str(), "مديره");
    }

    #[test]
    fn maps_alif_maqsoura() {
        assert_eq!(normalize_text("محامى").as_str(), "محامي");
    }

    #[test]
    fn lowercases_latin_and_collapses_space() {
        assert_eq!(normalize_text("Ahmed  ALI").as_str(), "ahmed ali");
        assert_eq!(normalize_text("  a\t\n b  ").as_str(), "a b");
    }

    #[test]
    fn alif_variants_and_tatweel() {
        assert_eq!(normalize_text("أحمد إبراهيم آمال ٱلله").as_str(), "احمد ابراهيم امال الله");
        assert_eq!(normalize_text("جميـــلة").as_str(), "جميله");
    }

    #[test]
    fn presentation_forms_fold_to_base_letters() {
        // ﻣﺤﻤﺪ in isolated/initial/medial/final presentation forms
        assert_eq!(normalize_text("\u{FEE3}\u{FEA4}\u{FEE4}\u{FEAA}").as_str(), "محمد");
        // lam-alif ligature
        assert_eq!(normalize_text("\u{FEFB}").as_str(), "لا");
        // final taa marbouta presentation form still maps to haa
        assert_eq!(normalize_text("\u{FE94}").as_str(), "ه");
    }

    #[test]
    fn first_token_examples() {
        assert_eq!(first_token("طبيبة أسنان").as_deref(), Some("طبيبه"));
        assert_eq!(first_token("★ مهندس وأب").as_deref(), Some("مهندس"));
        assert_eq!(first_token("123 🙂"), None);
        assert_eq!(first_token(""), None);
        assert_eq!(first_token("-_- hello_world").as_deref(), Some("hello"));
    }

    #[test]
    fn surface_token_keeps_taa_marbouta() {
        assert_eq!(first_surface_token("★ مهندسة برمجيات").as_deref(), Some("مهندسة"));
        assert_eq!(first_surface_token("محامٍ متقاعد").as_deref(), Some("محامٍ"));
        assert_eq!(first_surface_token("123"), None);
    }

    #[test]
    fn clean_surface_keeps_gender_letters() {
        assert_eq!(clean_surface("مُهَنْدِسَة"), "مهندسة");
        assert_eq!(clean_surface("محامٍ"), "محامٍ");
        assert_eq!(clean_surface("مـديـر"), "مدير");
    }

    fn any_text() -> impl Strategy<Value = String> {
        prop_oneof![
            any::<String>(),
            "[\u{0600}-\u{06FF}\u{FB50}-\u{FDFF}\u{FE70}-\u{FEFF} a-zA-Z\u{0300}-\u{036F}]{0,24}",
        ]
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in any_text()) {
            let once = normalize_text(&s);
            prop_assert_eq!(normalize_text(once.as_str()), once);
        }

        #[test]
        fn output_has_no_forbidden_code_points(s in any_text()) {
            let n = normalize_text(&s);
            prop_assert!(!n.as_str().chars().any(is_forbidden_in_normalized));
        }

        #[test]
        fn first_token_is_letter_substring(s in any_text()) {
            if let Some(tok) = first_token(&s) {
                prop_assert!(!tok.is_empty());
                prop_assert!(tok.chars().all(char::is_alphabetic));
                let normalized = normalize_text(&s);
                prop_assert!(normalized.as_str().contains(&tok));
            }
        }
    }
}
