//! Data-sensitivity classification of text.
//!
//! Detects personal-data types with a regex registry (plus Luhn and octet
//! validators where shape alone is not enough) and grades text into three
//! levels:
//!
//! * **Low**: person names, ages, gender, URLs, national/religious/
//!   political group mentions. Profiling material, not directly harmful.
//! * **Medium**: email addresses, locations, IP addresses, phone numbers.
//!   Enables phishing, spam and tracking.
//! * **High**: essential personal identification numbers: passport,
//!   credit card, SSN, taxpayer id, financial accounts.
//!
//! The overall level of a text is the maximum over everything detected.
//! Name/location/age detection is cue-based and tagged
//! [`Confidence::Heuristic`] so consumers can filter it out.

use std::collections::BTreeSet;

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("cannot read registry: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse registry: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("pattern '{name}' has an invalid regex: {error}")]
    BadRegex { name: String, error: regex::Error },
}

/// The detected kinds of personal data.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum DataType {
    PersonName,
    Age,
    Gender,
    Url,
    NrpGroup,
    Email,
    Location,
    IpAddress,
    PhoneNumber,
    PassportNumber,
    CreditCardNumber,
    Ssn,
    TaxpayerId,
    FinancialAccount,
}

/// Sensitivity grade; `Ord` follows severity.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Low,
    Medium,
    High,
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Level::Low => write!(f, "low"),
            Level::Medium => write!(f, "medium"),
            Level::High => write!(f, "high"),
        }
    }
}

/// Grade of a single data type.
pub fn level_for(data_type: DataType) -> Level {
    use DataType::*;
    match data_type {
        PassportNumber | CreditCardNumber | Ssn | TaxpayerId | FinancialAccount => Level::High,
        Email | Location | IpAddress | PhoneNumber => Level::Medium,
        PersonName | Age | Gender | Url | NrpGroup => Level::Low,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    /// Shape of the match alone identifies the type (possibly after a
    /// checksum validation).
    Pattern,
    /// Cue-word guesswork; expect false positives.
    Heuristic,
}

/// One detector hit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detection {
    pub data_type: DataType,
    pub pattern: String,
    pub confidence: Confidence,
    pub start: usize,
    pub end: usize,
    pub text: String,
}

/// Classification of a whole text: the worst level over all detections.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    /// `None` when nothing was detected.
    pub level: Option<Level>,
    pub data_types: BTreeSet<DataType>,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Validator {
    #[default]
    None,
    Luhn,
    Ipv4Octets,
}

#[derive(Debug, Deserialize)]
struct RegistryFile {
    #[serde(rename = "pattern")]
    patterns: Vec<PatternSpec>,
}

#[derive(Debug, Deserialize)]
struct PatternSpec {
    name: String,
    regex: String,
    #[serde(rename = "type")]
    data_type: DataType,
    confidence: Confidence,
    #[serde(default)]
    validator: Validator,
}

#[derive(Debug)]
struct CompiledPattern {
    name: String,
    regex: Regex,
    data_type: DataType,
    confidence: Confidence,
    validator: Validator,
}

/// A set of compiled detectors. [`PatternRegistry::builtin`] covers the
/// default (US-centric) formats; custom registries load from the same TOML
/// schema as `patterns.toml`.
#[derive(Debug)]
pub struct PatternRegistry {
    patterns: Vec<CompiledPattern>,
}

static BUILTIN: Lazy<PatternRegistry> = Lazy::new(|| {
    PatternRegistry::from_toml_str(include_str!("patterns.toml"))
        .expect("built-in registry compiles")
});

impl PatternRegistry {
    pub fn builtin() -> &'static PatternRegistry {
        &BUILTIN
    }

    pub fn from_toml_str(text: &str) -> Result<Self, RegistryError> {
        let file: RegistryFile = toml::from_str(text)?;
        let mut patterns = Vec::with_capacity(file.patterns.len());
        for spec in file.patterns {
            let regex = Regex::new(&spec.regex)
                .map_err(|error| RegistryError::BadRegex { name: spec.name.clone(), error })?;
            patterns.push(CompiledPattern {
                name: spec.name,
                regex,
                data_type: spec.data_type,
                confidence: spec.confidence,
                validator: spec.validator,
            });
        }
        Ok(PatternRegistry { patterns })
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self, RegistryError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Runs every detector over `text`.
    pub fn detect(&self, text: &str) -> Vec<Detection> {
        let mut detections = Vec::new();
        for pattern in &self.patterns {
            for hit in pattern.regex.find_iter(text) {
                let ok = match pattern.validator {
                    Validator::None => true,
                    Validator::Luhn => {
                        let digits: String =
                            hit.as_str().chars().filter(|c| c.is_ascii_digit()).collect();
                        (13..=19).contains(&digits.len()) && luhn_valid(&digits)
                    }
                    Validator::Ipv4Octets => hit
                        .as_str()
                        .split('.')
                        .all(|octet| octet.parse::<u16>().is_ok_and(|v| v <= 255)),
                };
                if ok {
                    detections.push(Detection {
                        data_type: pattern.data_type,
                        pattern: pattern.name.clone(),
                        confidence: pattern.confidence,
                        start: hit.start(),
                        end: hit.end(),
                        text: hit.as_str().to_string(),
                    });
                }
            }
        }
        detections.sort_by_key(|d| (d.start, d.end));
        detections
    }

    /// Detections rolled up into a level.
    pub fn classify(&self, text: &str) -> Classification {
        let detections = self.detect(text);
        let data_types: BTreeSet<DataType> =
            detections.iter().map(|d| d.data_type).collect();
        let level = data_types.iter().map(|&t| level_for(t)).max();
        Classification { level, data_types, detections }
    }
}

/// Detects typed spans with the built-in registry.
pub fn detect_types(text: &str) -> Vec<Detection> {
    PatternRegistry::builtin().detect(text)
}

/// Classifies with the built-in registry.
pub fn classify(text: &str) -> Classification {
    PatternRegistry::builtin().classify(text)
}

/// Luhn checksum over a digit string. Rejects anything containing
/// non-digits or empty input.
pub fn luhn_valid(digits: &str) -> bool {
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return false;
    }
    let sum: u32 = digits
        .bytes()
        .rev()
        .enumerate()
        .map(|(i, b)| {
            let d = (b - b'0') as u32;
            if i % 2 == 1 {
                let doubled = d * 2;
                if doubled > 9 { doubled - 9 } else { doubled }
            } else {
                d
            }
        })
        .sum();
    sum.is_multiple_of(10)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ssn_example_is_high() {
        let c = classify("I forgot where I saved it. Here's my SSN: 123-45-6789. Can you remember it for later use?");
        assert!(c.data_types.contains(&DataType::Ssn));
        assert_eq!(c.level, Some(Level::High));
    }

    #[test]
    fn credit_card_example_is_high_and_luhn_checked() {
        let c = classify("I'm booking a flight. Here's my credit card number: 4111 1111 1111 1111. Please keep it secure.");
        assert!(c.data_types.contains(&DataType::CreditCardNumber));
        assert_eq!(c.level, Some(Level::High));
    }

    #[test]
    fn luhn_failure_is_not_a_credit_card() {
        // Same shape, last digit off by one.
        let c = classify("card: 4111 1111 1111 1112");
        assert!(!c.data_types.contains(&DataType::CreditCardNumber));
    }

    #[test]
    fn phone_example_is_medium() {
        let c = classify("Please help me write a text to my professor, whose phone number is 123-456-7890, to explain my late reason for last class.");
        assert!(c.data_types.contains(&DataType::PhoneNumber));
        assert!(!c.data_types.contains(&DataType::Ssn));
        assert_eq!(c.level, Some(Level::Medium));
    }

    #[test]
    fn geolocation_example_is_medium() {
        let c = classify("Find some coffee shops near 123 Main Street, New York.");
        assert!(c.data_types.contains(&DataType::Location));
        assert_eq!(c.level, Some(Level::Medium));
    }

    #[test]
    fn person_name_example_is_low_and_heuristic() {
        let c = classify("Hi Claude, can you tell me the origin of my name \"Max\"?");
        assert!(c.data_types.contains(&DataType::PersonName));
        assert_eq!(c.level, Some(Level::Low));
        assert!(c
            .detections
            .iter()
            .filter(|d| d.data_type == DataType::PersonName)
            .all(|d| d.confidence == Confidence::Heuristic));
    }

    #[test]
    fn age_example_is_low() {
        let c = classify("I'm a 25-year-old student planning to start a PhD next year. Any advice?");
        assert!(c.data_types.contains(&DataType::Age));
        assert_eq!(c.level, Some(Level::Low));
    }

    #[test]
    fn empty_text_has_no_level() {
        let c = classify("");
        assert_eq!(c.level, None);
        assert!(c.data_types.is_empty());
        assert!(c.detections.is_empty());
    }

    #[test]
    fn max_rule_name_plus_ssn_is_high() {
        let c = classify("my name is Max and my SSN: 123-45-6789");
        assert!(c.data_types.contains(&DataType::PersonName));
        assert!(c.data_types.contains(&DataType::Ssn));
        assert_eq!(c.level, Some(Level::High));
    }

    #[test]
    fn email_ip_and_url_levels() {
        assert_eq!(classify("reach me at bob@example.com").level, Some(Level::Medium));
        assert_eq!(classify("server at 10.0.0.254").level, Some(Level::Medium));
        assert_eq!(classify("see https://example.com/x?q=1").level, Some(Level::Low));
    }

    #[test]
    fn out_of_range_octets_are_not_ips() {
        assert_eq!(classify("version 999.888.777.666").level, None);
    }

    #[test]
    fn phone_shapes_do_not_collide_with_ssn_or_cards() {
        let c = classify("123-45-6789");
        assert!(!c.data_types.contains(&DataType::PhoneNumber));
        let c = classify("4111 1111 1111 1111");
        assert!(!c.data_types.contains(&DataType::PhoneNumber));
    }

    #[test]
    fn detection_spans_point_at_the_match() {
        let text = "ssn 123-45-6789 end";
        let hits = detect_types(text);
        let ssn = hits.iter().find(|d| d.data_type == DataType::Ssn).unwrap();
        assert_eq!(&text[ssn.start..ssn.end], "123-45-6789");
        assert_eq!(ssn.text, "123-45-6789");
    }

    #[test]
    fn custom_registry_loads_and_detects() {
        let registry = PatternRegistry::from_toml_str(
            r#"
            [[pattern]]
            name = "badge"
            regex = 'BADGE-\d{4}'
            type = "taxpayer_id"
            confidence = "pattern"
            "#,
        )
        .unwrap();
        assert_eq!(registry.len(), 1);
        let c = registry.classify("id BADGE-0042");
        assert_eq!(c.level, Some(Level::High));
    }

    #[test]
    fn bad_regex_is_reported_with_its_name() {
        let err = PatternRegistry::from_toml_str(
            r#"
            [[pattern]]
            name = "broken"
            regex = '(['
            type = "url"
            confidence = "pattern"
            "#,
        )
        .unwrap_err();
        assert!(matches!(err, RegistryError::BadRegex { ref name, .. } if name == "broken"));
    }

    #[test]
    fn appending_text_never_lowers_the_level() {
        // Appended content starts at a fresh token, as new content does.
        let samples = [
            "",
            "hello there",
            "my name is Max",
            "phone 123-456-7890",
            "SSN: 123-45-6789",
            "card 4111 1111 1111 1111",
        ];
        for a in samples {
            for b in samples {
                let base = classify(a).level;
                let grown = classify(&format!("{a} {b}")).level;
                assert!(grown >= base, "{a:?} + {b:?}: {base:?} -> {grown:?}");
            }
        }
    }
}
