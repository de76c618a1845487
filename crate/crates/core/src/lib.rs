//! Toolkit for code-to-glyph deception in TrueType fonts.
//!
//! A font's character map decides which glyph is drawn for each character
//! code. Rewriting that map makes the text a machine extracts ("machine
//! text") diverge from the text a human sees ("rendered text"). This crate
//! covers both sides of that trick:
//!
//! * [`font`]: parse, inspect and re-serialize sfnt/TrueType binaries with
//!   exact control over the format-4 character map and file checksums.
//! * [`forge`]: rewrite a benign font so chosen codes render as other
//!   characters' glyphs, by singleton-segment idDelta rewrites and by
//!   segment split/merge.
//! * [`docgen`]: build HTML and PDF carrier documents that pair visible
//!   cover text with a hidden payload set in a forged font.
//! * [`scanner`]: the defensive side: extract embedded fonts from
//!   documents, diff character maps against a reference, recover hidden
//!   text and produce a verdict.
//! * [`sensitivity`]: classify recovered text into data-sensitivity levels
//!   (names and ages up to SSNs and card numbers).
//! * [`analysis`]: success-rate statistics: exact rates, moving averages,
//!   Wilson intervals and a logistic regression over trial factors.
//! * [`synth`]: build small valid TrueType files with a prescribed cmap,
//!   used as fixtures for forging and scanning experiments.

pub mod analysis;
pub mod docgen;
pub mod font;
pub mod forge;
pub mod scanner;
pub mod sensitivity;
pub mod synth;

pub use font::{CmapSegment, CmapSegmentTable, CodePoint, FontError, FontFile, GlyphIndex};
pub use forge::{ForgeError, ForgeManifest, RemapPair, RemapPlan};
/// Default scalar type for the statistical routines in [`analysis`].
pub type Scalar = f64;
