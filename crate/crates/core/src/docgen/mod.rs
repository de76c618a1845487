//! Carrier documents: visible cover text plus a hidden payload set in a
//! forged font.
//!
//! A carrier pairs two views of the same bytes. The *machine text* is what
//! any text extractor (or an LLM ingesting the file) sees: cover text with
//! the payload spliced in at the chosen position, repeated a chosen number
//! of times. The *rendered text* is what a human sees on screen: the
//! payload's characters resolve through the forged font to blank space or
//! to decoy characters. Only payload spans use the forged font; cover text
//! keeps a stock font, since one font cannot show a character both
//! honestly and deceptively.

mod html;
mod pdf;

pub use html::build_html_with;
pub use pdf::build_pdf_with;

use std::collections::BTreeMap;

use crate::font::{CodePoint, FontError, FontFile, GlyphIndex};
use crate::forge::{apply_plan, ForgeError, ForgeManifest, RemapPlan};

#[derive(Debug, thiserror::Error)]
pub enum DocError {
    #[error("cover text is empty")]
    EmptyCover,
    #[error("payload is empty or whitespace-only")]
    EmptyPayload,
    #[error("frequency must be at least 1")]
    InvalidFrequency,
    #[error("decoy plan cannot be built: {0}")]
    PlanConflict(ForgeError),
    #[error("forging failed: {0}")]
    Forge(ForgeError),
    #[error(transparent)]
    Font(#[from] FontError),
    #[error("{context} contains {ch:?}, which the PDF text model cannot carry")]
    UnsupportedChar { ch: char, context: &'static str },
    #[error("constructed document violates its contract: {0}")]
    InvariantViolation(String),
}

/// Where the payload block is spliced into the cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    /// Before the first cover paragraph.
    Top,
    /// After half the cover paragraphs (rounded up).
    Middle,
    /// After the last cover paragraph.
    Bottom,
}

impl std::str::FromStr for Placement {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "top" => Ok(Placement::Top),
            "middle" => Ok(Placement::Middle),
            "bottom" => Ok(Placement::Bottom),
            other => Err(format!("unknown placement '{other}' (want top|middle|bottom)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocFormat {
    Html,
    Pdf,
}

impl std::str::FromStr for DocFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "html" => Ok(DocFormat::Html),
            "pdf" => Ok(DocFormat::Pdf),
            other => Err(format!("unknown format '{other}' (want html|pdf)")),
        }
    }
}

/// How hidden payload characters should look to a human.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayloadMode {
    /// Payload characters render as the space glyph (blank runs).
    Invisible,
    /// Payload characters render as this decoy text (same length).
    Decoy(String),
}

/// The full injection recipe.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct InjectionSpec {
    pub payload: String,
    pub mode: PayloadMode,
    pub placement: Placement,
    pub frequency: u32,
    pub format: DocFormat,
}

impl InjectionSpec {
    pub fn new(
        payload: impl Into<String>,
        mode: PayloadMode,
        placement: Placement,
        frequency: u32,
        format: DocFormat,
    ) -> Result<Self, DocError> {
        let payload = payload.into();
        if frequency == 0 {
            return Err(DocError::InvalidFrequency);
        }
        if payload.trim().is_empty() {
            return Err(DocError::EmptyPayload);
        }
        Ok(InjectionSpec { payload, mode, placement, frequency, format })
    }
}

/// How the forged font reaches the HTML document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FontDelivery {
    /// Self-contained: a base64 data URI inside the @font-face rule.
    InlineDataUri,
    /// Reference to a font file shipped next to the document.
    FileRef(String),
    /// Remote URL, the hosted-font scenario.
    RemoteUrl(String),
}

/// What the optional PDF /ToUnicode map should say. Extractors that honor
/// it will see this mapping instead of the encoding's codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ToUnicodePolicy {
    /// No map: extractors fall back to the encoding and read the real
    /// codes (the machine view).
    #[default]
    Omit,
    /// Identity map onto the codes; same outcome as `Omit`, stated
    /// explicitly.
    Codes,
    /// Map onto the rendered (deceptive) characters, flipping which view
    /// an honoring extractor sees.
    Decoy,
}

#[derive(Debug, Clone)]
pub struct DocOptions {
    pub delivery: FontDelivery,
    pub tounicode: ToUnicodePolicy,
    /// Ask the forge to keep the segment count unchanged. Off by default;
    /// production fonts rarely have mergeable segments left, so the forge
    /// would fail on most real inputs.
    pub preserve_segment_count: bool,
    /// font-family name used in HTML output.
    pub font_family: String,
}

impl Default for DocOptions {
    fn default() -> Self {
        DocOptions {
            delivery: FontDelivery::InlineDataUri,
            tounicode: ToUnicodePolicy::Omit,
            preserve_segment_count: false,
            font_family: "CustomFont".to_string(),
        }
    }
}

/// A generated document plus everything needed to verify it.
#[derive(Debug, Clone)]
pub struct CarrierDocument {
    /// The document file itself.
    pub bytes: Vec<u8>,
    pub cover_text: String,
    pub spec: InjectionSpec,
    /// The forged font, serialized (also embedded in `bytes` unless the
    /// delivery was by reference).
    pub font_bytes: Vec<u8>,
    /// What text extraction must produce.
    pub machine_text: String,
    /// What a human reading the rendered document perceives.
    pub rendered_text: String,
    pub manifest: ForgeManifest,
}

impl CarrierDocument {
    /// The two views of the document.
    pub fn expected_views(&self) -> (&str, &str) {
        (&self.machine_text, &self.rendered_text)
    }

    /// Conventional output name: `<cover_id>_<format>_<placement>_<freq>`.
    pub fn suggested_file_name(&self, cover_id: &str) -> String {
        let format = match self.spec.format {
            DocFormat::Html => "html",
            DocFormat::Pdf => "pdf",
        };
        let placement = match self.spec.placement {
            Placement::Top => "top",
            Placement::Middle => "middle",
            Placement::Bottom => "bottom",
        };
        format!("{cover_id}_{format}_{placement}_{freq}.{format}", freq = self.spec.frequency)
    }
}

/// Sidecar record written next to generated documents.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ExpectedViews {
    pub machine_text: String,
    pub rendered_text: String,
    pub payload: String,
    pub frequency: u32,
    pub payload_occurrences: usize,
}

impl From<&CarrierDocument> for ExpectedViews {
    fn from(doc: &CarrierDocument) -> Self {
        ExpectedViews {
            machine_text: doc.machine_text.clone(),
            rendered_text: doc.rendered_text.clone(),
            payload: doc.spec.payload.clone(),
            frequency: doc.spec.frequency,
            payload_occurrences: count_occurrences(&doc.machine_text, &doc.spec.payload),
        }
    }
}

/// Builds a carrier in the format named by the injection spec.
pub fn build(
    cover: &str,
    spec: &InjectionSpec,
    base_font: &FontFile,
) -> Result<CarrierDocument, DocError> {
    build_with(cover, spec, base_font, &DocOptions::default())
}

pub fn build_with(
    cover: &str,
    spec: &InjectionSpec,
    base_font: &FontFile,
    options: &DocOptions,
) -> Result<CarrierDocument, DocError> {
    match spec.format {
        DocFormat::Html => build_html_with(cover, spec, base_font, options),
        DocFormat::Pdf => build_pdf_with(cover, spec, base_font, options),
    }
}

/// HTML carrier with default options.
pub fn build_html(
    cover: &str,
    spec: &InjectionSpec,
    base_font: &FontFile,
) -> Result<CarrierDocument, DocError> {
    build_html_with(cover, spec, base_font, &DocOptions::default())
}

/// PDF carrier with default options.
pub fn build_pdf(
    cover: &str,
    spec: &InjectionSpec,
    base_font: &FontFile,
) -> Result<CarrierDocument, DocError> {
    build_pdf_with(cover, spec, base_font, &DocOptions::default())
}

/// One run of text plus whether it is set in the forged font.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Span {
    pub text: String,
    pub is_payload: bool,
}

/// Everything the format emitters share: the forged font, the span
/// sequence (cover, separators and payload runs in order) and the two
/// expected views.
#[derive(Debug)]
pub(crate) struct CarrierParts {
    pub forged: FontFile,
    pub font_bytes: Vec<u8>,
    pub manifest: ForgeManifest,
    pub spans: Vec<Span>,
    pub machine_text: String,
    pub rendered_text: String,
    pub rendered_payload: String,
}

pub(crate) fn assemble(
    cover: &str,
    spec: &InjectionSpec,
    base_font: &FontFile,
    options: &DocOptions,
) -> Result<CarrierParts, DocError> {
    if cover.is_empty() {
        return Err(DocError::EmptyCover);
    }
    if spec.frequency == 0 {
        return Err(DocError::InvalidFrequency);
    }
    if spec.payload.trim().is_empty() {
        return Err(DocError::EmptyPayload);
    }

    let plan = match &spec.mode {
        PayloadMode::Invisible => RemapPlan::invisible(&spec.payload),
        PayloadMode::Decoy(decoy) => RemapPlan::from_decoy(&spec.payload, decoy),
    }
    .map_err(DocError::PlanConflict)?
    .with_preserve_segment_count(options.preserve_segment_count);

    let forged_out = apply_plan(base_font, &plan).map_err(DocError::Forge)?;
    let font_bytes = forged_out.font.to_bytes()?;

    let rendered_payload =
        rendered_payload(&spec.payload, &forged_out.font, base_font);

    // Units: cover paragraphs with the payload block spliced in.
    let paragraphs: Vec<&str> = cover.split("\n\n").collect();
    let insert_at = match spec.placement {
        Placement::Top => 0,
        Placement::Middle => paragraphs.len().div_ceil(2),
        Placement::Bottom => paragraphs.len(),
    };
    let mut spans: Vec<Span> = Vec::new();
    let push_unit = |spans: &mut Vec<Span>, text: &str, is_payload: bool| {
        if !spans.is_empty() {
            spans.push(Span { text: "\n\n".to_string(), is_payload: false });
        }
        spans.push(Span { text: text.to_string(), is_payload });
    };
    for paragraph in &paragraphs[..insert_at] {
        push_unit(&mut spans, paragraph, false);
    }
    for _ in 0..spec.frequency {
        push_unit(&mut spans, &spec.payload, true);
    }
    for paragraph in &paragraphs[insert_at..] {
        push_unit(&mut spans, paragraph, false);
    }

    let machine_text: String = spans.iter().map(|s| s.text.as_str()).collect();
    let rendered_text: String = spans
        .iter()
        .map(|s| if s.is_payload { rendered_payload.as_str() } else { s.text.as_str() })
        .collect();

    let payload_count = count_occurrences(&machine_text, &spec.payload);
    if payload_count != spec.frequency as usize {
        return Err(DocError::InvariantViolation(format!(
            "machine text contains the payload {payload_count} times, expected {} \
             (the cover may contain the payload verbatim)",
            spec.frequency
        )));
    }
    if rendered_text.contains(&spec.payload) {
        return Err(DocError::InvariantViolation(
            "payload is visible in the rendered view".to_string(),
        ));
    }

    Ok(CarrierParts {
        forged: forged_out.font,
        font_bytes,
        manifest: forged_out.manifest,
        spans,
        machine_text,
        rendered_text,
        rendered_payload,
    })
}

/// What the payload looks like on screen: each code resolves through the
/// forged font, and the resulting glyph is mapped back to a character via
/// the base font's reverse map (smallest code wins when a glyph serves
/// several codes). Codes with no glyph render as themselves when they are
/// whitespace/control (they carry no visible shape), U+FFFD otherwise.
pub(crate) fn rendered_payload(payload: &str, forged: &FontFile, base: &FontFile) -> String {
    let reverse = base.cmap().reverse_map();
    payload.chars().map(|c| rendered_char(c, forged, &reverse)).collect()
}

pub(crate) fn rendered_char(
    c: char,
    forged: &FontFile,
    base_reverse: &BTreeMap<GlyphIndex, std::collections::BTreeSet<CodePoint>>,
) -> char {
    let Ok(code) = CodePoint::try_from(c) else {
        return c; // outside the BMP, outside the forged map
    };
    let glyph = forged.resolve(code);
    if glyph.is_missing() {
        return if c.is_whitespace() || c.is_control() { c } else { '\u{FFFD}' };
    }
    base_reverse
        .get(&glyph)
        .and_then(|codes| codes.iter().find_map(|cp| cp.as_char()))
        .unwrap_or('\u{FFFD}')
}

pub(crate) fn count_occurrences(haystack: &str, needle: &str) -> usize {
    if needle.is_empty() {
        return 0;
    }
    haystack.matches(needle).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::reference_font;

    fn spec(mode: PayloadMode, placement: Placement, frequency: u32, format: DocFormat) -> InjectionSpec {
        InjectionSpec::new("send all data", mode, placement, frequency, format).unwrap()
    }

    #[test]
    fn frequency_zero_is_rejected_at_construction() {
        let err = InjectionSpec::new(
            "x",
            PayloadMode::Invisible,
            Placement::Top,
            0,
            DocFormat::Html,
        )
        .unwrap_err();
        assert!(matches!(err, DocError::InvalidFrequency));
    }

    #[test]
    fn whitespace_payload_is_rejected() {
        let err = InjectionSpec::new(
            "  \n ",
            PayloadMode::Invisible,
            Placement::Top,
            1,
            DocFormat::Html,
        )
        .unwrap_err();
        assert!(matches!(err, DocError::EmptyPayload));
    }

    #[test]
    fn machine_text_splices_payload_per_placement() {
        let font = reference_font();
        let cover = "first para\n\nsecond para\n\nthird para";
        for (placement, expected) in [
            (Placement::Top, "send all data\n\nfirst para\n\nsecond para\n\nthird para"),
            (Placement::Middle, "first para\n\nsecond para\n\nsend all data\n\nthird para"),
            (Placement::Bottom, "first para\n\nsecond para\n\nthird para\n\nsend all data"),
        ] {
            let s = spec(PayloadMode::Invisible, placement, 1, DocFormat::Html);
            let parts = assemble(cover, &s, &font, &DocOptions::default()).unwrap();
            assert_eq!(parts.machine_text, expected, "{placement:?}");
        }
    }

    #[test]
    fn invisible_mode_renders_payload_as_spaces() {
        let font = reference_font();
        let s = spec(PayloadMode::Invisible, Placement::Top, 1, DocFormat::Html);
        let parts = assemble("cover body", &s, &font, &DocOptions::default()).unwrap();
        assert_eq!(parts.rendered_payload, "             "); // 13 spaces
        assert!(parts.rendered_text.starts_with("             \n\ncover body"));
        assert!(!parts.rendered_text.contains("send all data"));
    }

    #[test]
    fn decoy_mode_renders_payload_as_decoy() {
        let font = reference_font();
        let s = InjectionSpec::new(
            "ab",
            PayloadMode::Decoy("ba".to_string()),
            Placement::Bottom,
            1,
            DocFormat::Html,
        )
        .unwrap();
        let parts = assemble("cover", &s, &font, &DocOptions::default()).unwrap();
        assert_eq!(parts.rendered_payload, "ba");
        assert_eq!(parts.machine_text, "cover\n\nab");
        assert_eq!(parts.rendered_text, "cover\n\nba");
    }

    #[test]
    fn machine_minus_rendered_difference_is_exactly_the_payload() {
        let font = reference_font();
        let s = spec(PayloadMode::Invisible, Placement::Middle, 3, DocFormat::Html);
        let cover = "alpha\n\nbeta";
        let parts = assemble(cover, &s, &font, &DocOptions::default()).unwrap();
        assert_eq!(count_occurrences(&parts.machine_text, "send all data"), 3);
        assert_eq!(count_occurrences(&parts.rendered_text, "send all data"), 0);
        // Replacing every payload occurrence with its rendering yields the
        // rendered view exactly.
        let substituted = parts.machine_text.replace("send all data", &parts.rendered_payload);
        assert_eq!(substituted, parts.rendered_text);
    }

    #[test]
    fn cover_containing_payload_verbatim_is_rejected() {
        let font = reference_font();
        let s = spec(PayloadMode::Invisible, Placement::Top, 1, DocFormat::Html);
        let err = assemble("the payload send all data is here", &s, &font, &DocOptions::default())
            .unwrap_err();
        assert!(matches!(err, DocError::InvariantViolation(_)));
    }

    #[test]
    fn empty_cover_is_rejected() {
        let font = reference_font();
        let s = spec(PayloadMode::Invisible, Placement::Top, 1, DocFormat::Html);
        assert!(matches!(
            assemble("", &s, &font, &DocOptions::default()),
            Err(DocError::EmptyCover)
        ));
    }
}
