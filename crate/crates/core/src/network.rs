//! Friend-network vote used to override low-confidence Male predictions.

use std::collections::HashSet;

use crate::classifier::{GenderModel, Prediction};
use crate::dataset::{GenderLabel, UserProfile};
use crate::normalize::normalize_text;

/// Share of predicted-Female friends at which the vote says Female.
pub const FEMALE_FRIEND_THRESHOLD: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FriendVote {
    pub female: usize,
    pub total: usize,
    /// `None` when there are no usable friend names.
    pub decision: Option<GenderLabel>,
}

impl FriendVote {
    pub fn female_ratio(&self) -> Option<f64> {
        (self.total > 0).then(|| self.female as f64 / self.total as f64)
    }
}

/// Classifies each distinct friend name and votes Female when at least a
/// third of them come out Female. Names are compared after normalization;
/// names that normalize to nothing are ignored.
pub fn friend_vote(friend_names: &[String], model: &GenderModel) -> FriendVote {
    let mut seen = HashSet::new();
    let mut female = 0;
    for name in friend_names {
        let key = normalize_text(name).into_string();
        if key.is_empty() || !seen.insert(key) {
            continue;
        }
        if model.predict_name(name).label == GenderLabel::Female {
            female += 1;
        }
    }
    let total = seen.len();
    let label = if female as f64 >= FEMALE_FRIEND_THRESHOLD * total as f64 {
        GenderLabel::Female
    } else {
        GenderLabel::Male
    };
    let decision = (total > 0).then_some(label);
    FriendVote { female, total, decision }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombinedPrediction {
    pub label: GenderLabel,
    pub classifier: Prediction,
    pub vote: Option<FriendVote>,
}

/// Keeps a Male prediction with p(Male) ≥ `tau`; otherwise defers to the
/// friend vote, falling back to the classifier when the vote abstains.
pub fn combined_predict(profile: &UserProfile, model: &GenderModel, tau: f64) -> CombinedPrediction {
    let classifier = model.predict_profile(profile);
    if classifier.label == GenderLabel::Male && classifier.p_male >= tau {
        return CombinedPrediction { label: GenderLabel::Male, classifier, vote: None };
    }
    let vote = friend_vote(&profile.friend_names, model);
    let label = vote.decision.unwrap_or(classifier.label);
    CombinedPrediction { label, classifier, vote: Some(vote) }
}
