//! Character-map forgery: make chosen codes render as other characters.
//!
//! The rewrite has two shapes. When the source code sits alone in its
//! segment, changing that segment's idDelta to
//! `target + target_delta - source` (mod 2^16) points the source at the
//! target's glyph and touches nothing else. When the source shares a
//! segment, the segment is first split into up to three parts so the source
//! becomes a singleton, and, when segment-count preservation is requested,
//! adjacent segments elsewhere that share an idDelta are merged until the
//! table is back at its original size.

use std::collections::{BTreeMap, BTreeSet};

use crate::font::{
    CmapSegment, CmapSegmentTable, CodePoint, FontError, FontFile, GlyphIndex,
};

#[derive(Debug, thiserror::Error)]
pub enum ForgeError {
    #[error("remap source {0} equals its target")]
    SourceEqualsTarget(CodePoint),
    #[error("conflicting pairs: source {code} mapped to both {first} and {second}")]
    ConflictingPairs { code: CodePoint, first: CodePoint, second: CodePoint },
    #[error("target {0} resolves to the missing glyph in the base font")]
    TargetUnmapped(CodePoint),
    #[error("code {0} is not alone in its segment; the split path must be used")]
    SegmentNotSingleton(CodePoint),
    #[error("code {0} is not covered by any segment")]
    SourceUnmapped(CodePoint),
    #[error("segment covering {0} maps through glyphIdArray; normalize it first")]
    RangeOffsetSegment(CodePoint),
    #[error(
        "segment count cannot be preserved: {still_needed} merge(s) missing after {merged} merge(s)"
    )]
    NoMergeAvailable { merged: usize, still_needed: usize },
    #[error("payload is {payload} code point(s), decoy is {decoy}")]
    LengthMismatch { payload: usize, decoy: usize },
    #[error("inconsistent cipher: {0}")]
    InconsistentCipher(CipherConflicts),
    #[error("code point outside the Basic Multilingual Plane: {0:?}")]
    UnsupportedCodePoint(char),
    #[error(transparent)]
    Font(#[from] FontError),
}

/// Every position where a payload character would need two different decoy
/// appearances. A font maps each code to exactly one glyph, so a cipher
/// must be consistent per character, not per position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CipherConflicts {
    pub conflicts: Vec<CipherConflict>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CipherConflict {
    pub source: char,
    /// `(position, demanded decoy character)` for every occurrence.
    pub demands: Vec<(usize, char)>,
}

impl std::fmt::Display for CipherConflicts {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, c) in self.conflicts.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{:?} wanted at ", c.source)?;
            for (j, (pos, target)) in c.demands.iter().enumerate() {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "position {pos} as {target:?}")?;
            }
        }
        Ok(())
    }
}

/// One visual substitution: make `source` render with `target`'s glyph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RemapPair {
    pub source: CodePoint,
    pub target: CodePoint,
}

impl RemapPair {
    pub fn new(source: impl Into<CodePoint>, target: impl Into<CodePoint>) -> Self {
        RemapPair { source: source.into(), target: target.into() }
    }
}

/// How the plan was derived; recorded in the manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMode {
    /// Sources are pointed at the space glyph, so the payload shows as
    /// blank runs.
    Invisible,
    /// Sources are pointed at decoy characters' glyphs.
    Decoy,
    Custom,
}

/// A conflict-free set of substitutions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemapPlan {
    pairs: BTreeMap<CodePoint, CodePoint>,
    /// Keep the table's segment count unchanged (splits compensated by
    /// merges). Defaults to true; production fonts usually ship maximally
    /// merged tables, in which case applying a splitting plan will fail
    /// with [`ForgeError::NoMergeAvailable`]; callers that prefer a larger
    /// table over an error should disable this.
    pub preserve_segment_count: bool,
    pub mode: PlanMode,
}

impl RemapPlan {
    pub fn from_pairs(pairs: impl IntoIterator<Item = RemapPair>) -> Result<Self, ForgeError> {
        let mut map = BTreeMap::new();
        for pair in pairs {
            if pair.source == pair.target {
                return Err(ForgeError::SourceEqualsTarget(pair.source));
            }
            if let Some(&existing) = map.get(&pair.source) {
                if existing != pair.target {
                    return Err(ForgeError::ConflictingPairs {
                        code: pair.source,
                        first: existing,
                        second: pair.target,
                    });
                }
            }
            map.insert(pair.source, pair.target);
        }
        Ok(RemapPlan { pairs: map, preserve_segment_count: true, mode: PlanMode::Custom })
    }

    /// Plan that makes every visible payload character render as the space
    /// glyph. Whitespace is left alone; it is already invisible.
    pub fn invisible(payload: &str) -> Result<Self, ForgeError> {
        let mut pairs = Vec::new();
        let mut seen = BTreeSet::new();
        for c in payload.chars() {
            if c.is_whitespace() || !seen.insert(c) {
                continue;
            }
            let source = CodePoint::try_from(c).map_err(ForgeError::UnsupportedCodePoint)?;
            pairs.push(RemapPair::new(source, CodePoint(0x0020)));
        }
        let mut plan = Self::from_pairs(pairs)?;
        plan.mode = PlanMode::Invisible;
        Ok(plan)
    }

    /// Derives per-character substitutions that make `payload` render as
    /// `decoy`. Both must have the same length in code points, and each
    /// payload character must demand a single decoy character everywhere it
    /// occurs; all violations are reported together.
    pub fn from_decoy(payload: &str, decoy: &str) -> Result<Self, ForgeError> {
        let p: Vec<char> = payload.chars().collect();
        let d: Vec<char> = decoy.chars().collect();
        if p.len() != d.len() {
            return Err(ForgeError::LengthMismatch { payload: p.len(), decoy: d.len() });
        }
        let mut demands: BTreeMap<char, Vec<(usize, char)>> = BTreeMap::new();
        for (i, (&pc, &dc)) in p.iter().zip(&d).enumerate() {
            demands.entry(pc).or_default().push((i, dc));
        }
        let conflicts: Vec<CipherConflict> = demands
            .iter()
            .filter(|(_, wants)| wants.iter().any(|(_, t)| *t != wants[0].1))
            .map(|(&source, wants)| CipherConflict { source, demands: wants.clone() })
            .collect();
        if !conflicts.is_empty() {
            return Err(ForgeError::InconsistentCipher(CipherConflicts { conflicts }));
        }
        let mut pairs = Vec::new();
        for (source, wants) in demands {
            let target = wants[0].1;
            if source == target {
                continue;
            }
            let s = CodePoint::try_from(source).map_err(ForgeError::UnsupportedCodePoint)?;
            let t = CodePoint::try_from(target).map_err(ForgeError::UnsupportedCodePoint)?;
            pairs.push(RemapPair::new(s, t));
        }
        let mut plan = Self::from_pairs(pairs)?;
        plan.mode = PlanMode::Decoy;
        Ok(plan)
    }

    pub fn with_preserve_segment_count(mut self, preserve: bool) -> Self {
        self.preserve_segment_count = preserve;
        self
    }

    /// Pairs in ascending source order.
    pub fn pairs(&self) -> impl Iterator<Item = RemapPair> + '_ {
        self.pairs.iter().map(|(&source, &target)| RemapPair { source, target })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn target_of(&self, source: CodePoint) -> Option<CodePoint> {
        self.pairs.get(&source).copied()
    }
}

/// Machine-readable record of an applied plan; scanners use it as ground
/// truth when checking recovered substitutions.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ForgeManifest {
    pub schema_version: u32,
    pub base_font_sha256: String,
    pub mode: PlanMode,
    pub preserve_segment_count: bool,
    pub pairs: Vec<ManifestPair>,
    pub segment_count_before: usize,
    pub segment_count_after: usize,
    pub segments: Vec<ManifestSegment>,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ManifestPair {
    pub source: u16,
    pub target: u16,
    pub source_char: Option<char>,
    pub target_char: Option<char>,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ManifestSegment {
    pub start: u16,
    pub end: u16,
    pub id_delta: u16,
    pub uses_array: bool,
}

impl ForgeManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn remap_pairs(&self) -> Vec<RemapPair> {
        self.pairs.iter().map(|p| RemapPair::new(p.source, p.target)).collect()
    }
}

/// A forged font together with its manifest.
#[derive(Debug, Clone)]
pub struct ForgeOutput {
    pub font: FontFile,
    pub manifest: ForgeManifest,
}

/// Rewrites the idDelta of the singleton segment covering `pair.source` so
/// the source renders with the target's glyph. The segment must contain
/// exactly that code and map arithmetically.
pub fn forge_case_one(font: &FontFile, pair: RemapPair) -> Result<FontFile, ForgeError> {
    let target_glyph = require_target_glyph(font, pair)?;
    let mut table = font.cmap().clone();
    let idx = table
        .find_segment(pair.source)
        .ok_or(ForgeError::SourceUnmapped(pair.source))?;
    let seg = &table.segments()[idx];
    if seg.uses_array() {
        return Err(ForgeError::RangeOffsetSegment(pair.source));
    }
    if !seg.is_singleton() {
        return Err(ForgeError::SegmentNotSingleton(pair.source));
    }
    set_singleton_delta(&mut table, idx, pair.source, target_glyph);
    Ok(font.with_cmap(table)?)
}

/// Splits the multi-code segment covering `pair.source` so the source
/// becomes a singleton, rewrites it, and merges adjacent same-idDelta
/// segments elsewhere until the count is back to the original.
pub fn forge_case_two(font: &FontFile, pair: RemapPair) -> Result<FontFile, ForgeError> {
    forge_case_two_opts(font, pair, true)
}

/// [`forge_case_two`] with explicit control over count preservation.
pub fn forge_case_two_opts(
    font: &FontFile,
    pair: RemapPair,
    preserve_segment_count: bool,
) -> Result<FontFile, ForgeError> {
    let target_glyph = require_target_glyph(font, pair)?;
    let mut table = font.cmap().clone();
    let idx = table
        .find_segment(pair.source)
        .ok_or(ForgeError::SourceUnmapped(pair.source))?;
    if table.segments()[idx].uses_array() {
        return Err(ForgeError::RangeOffsetSegment(pair.source));
    }
    let before = table.segment_count();
    let split = split_out_singleton(&mut table, idx, pair.source);
    set_singleton_delta(&mut table, split.singleton, pair.source, target_glyph);
    if preserve_segment_count {
        restore_segment_count(&mut table, &split, before)?;
    }
    Ok(font.with_cmap(table)?)
}

/// Rewrites the glyphIdArray-backed segment covering `code` as arithmetic
/// segments with identical resolution: maximal runs where `glyph - code` is
/// constant become one segment each, codes mapping to the missing glyph
/// lose their (redundant) coverage. No-op when the covering segment is
/// already arithmetic or the code is uncovered.
pub fn normalize_segment(font: &FontFile, code: CodePoint) -> Result<FontFile, ForgeError> {
    let mut table = font.cmap().clone();
    let Some(idx) = table.find_segment(code) else {
        return Ok(font.clone());
    };
    if !table.segments()[idx].uses_array() {
        return Ok(font.clone());
    }
    normalize_in_place(&mut table, idx);
    Ok(font.with_cmap(table)?)
}

/// Applies a whole plan: targets are resolved against the *input* font (so
/// swaps like `a->b, b->a` work), array-backed source segments are
/// normalized first, then each source is isolated and rewritten in
/// ascending order.
pub fn apply_plan(font: &FontFile, plan: &RemapPlan) -> Result<ForgeOutput, ForgeError> {
    let base_digest = font.digest();
    let original_count = font.cmap().segment_count();

    if plan.is_empty() {
        let manifest = ForgeManifest {
            schema_version: 1,
            base_font_sha256: base_digest,
            mode: plan.mode,
            preserve_segment_count: plan.preserve_segment_count,
            pairs: Vec::new(),
            segment_count_before: original_count,
            segment_count_after: original_count,
            segments: manifest_segments(font.cmap()),
        };
        return Ok(ForgeOutput { font: font.clone(), manifest });
    }

    // Resolve every target up front, against the unmodified font.
    let mut targets: BTreeMap<CodePoint, GlyphIndex> = BTreeMap::new();
    for pair in plan.pairs() {
        if pair.source == pair.target {
            return Err(ForgeError::SourceEqualsTarget(pair.source));
        }
        let glyph = font.resolve(pair.target);
        if glyph.is_missing() {
            return Err(ForgeError::TargetUnmapped(pair.target));
        }
        targets.insert(pair.source, glyph);
    }

    let mut table = font.cmap().clone();
    for pair in plan.pairs() {
        let target_glyph = targets[&pair.source];
        // Re-locate on each step; earlier rewrites may have moved segments.
        if let Some(idx) = table.find_segment(pair.source) {
            if table.segments()[idx].uses_array() {
                normalize_in_place(&mut table, idx);
            }
        }
        let count_before = table.segment_count();
        match table.find_segment(pair.source) {
            Some(idx) if table.segments()[idx].is_singleton() => {
                set_singleton_delta(&mut table, idx, pair.source, target_glyph);
            }
            Some(idx) => {
                let split = split_out_singleton(&mut table, idx, pair.source);
                set_singleton_delta(&mut table, split.singleton, pair.source, target_glyph);
                if plan.preserve_segment_count {
                    restore_segment_count(&mut table, &split, count_before)?;
                }
            }
            None => {
                // Source had no coverage (possibly dropped by
                // normalization). Insert a fresh singleton for it.
                let at = table.segments().partition_point(|s| s.end < pair.source);
                let delta = target_glyph.value().wrapping_sub(pair.source.value());
                table.segments.insert(
                    at,
                    CmapSegment::delta(pair.source.value(), pair.source.value(), delta),
                );
                if plan.preserve_segment_count {
                    let pseudo = SplitOutcome { singleton: at, parts: at..at + 1 };
                    restore_segment_count(&mut table, &pseudo, count_before)?;
                }
            }
        }
    }

    let forged = font.with_cmap(table)?;
    let manifest = ForgeManifest {
        schema_version: 1,
        base_font_sha256: base_digest,
        mode: plan.mode,
        preserve_segment_count: plan.preserve_segment_count,
        pairs: plan
            .pairs()
            .map(|p| ManifestPair {
                source: p.source.value(),
                target: p.target.value(),
                source_char: p.source.as_char(),
                target_char: p.target.as_char(),
            })
            .collect(),
        segment_count_before: original_count,
        segment_count_after: forged.cmap().segment_count(),
        segments: manifest_segments(forged.cmap()),
    };
    Ok(ForgeOutput { font: forged, manifest })
}

fn manifest_segments(table: &CmapSegmentTable) -> Vec<ManifestSegment> {
    table
        .segments()
        .iter()
        .map(|s| ManifestSegment {
            start: s.start.value(),
            end: s.end.value(),
            id_delta: s.id_delta,
            uses_array: s.uses_array(),
        })
        .collect()
}

fn require_target_glyph(font: &FontFile, pair: RemapPair) -> Result<GlyphIndex, ForgeError> {
    if pair.source == pair.target {
        return Err(ForgeError::SourceEqualsTarget(pair.source));
    }
    let glyph = font.resolve(pair.target);
    if glyph.is_missing() {
        return Err(ForgeError::TargetUnmapped(pair.target));
    }
    Ok(glyph)
}

/// Points a singleton segment at `glyph`: its new idDelta is
/// `glyph - code` mod 2^16, which for an arithmetic target segment equals
/// `target + target_delta - source`.
fn set_singleton_delta(
    table: &mut CmapSegmentTable,
    idx: usize,
    code: CodePoint,
    glyph: GlyphIndex,
) {
    let seg = &mut table.segments[idx];
    debug_assert!(seg.is_singleton() && seg.contains(code));
    seg.id_delta = glyph.value().wrapping_sub(code.value());
    seg.id_range_offset = 0;
    seg.array_base = None;
}

#[derive(Debug)]
struct SplitOutcome {
    /// Index of the singleton now covering the isolated code.
    singleton: usize,
    /// Index range of every part produced by the split (including the
    /// singleton); these are exempt from merging.
    parts: std::ops::Range<usize>,
}

/// Splits the arithmetic segment at `idx` into lower part / singleton /
/// upper part (empty parts omitted). Resolution is unchanged: the parts
/// keep the original idDelta.
fn split_out_singleton(table: &mut CmapSegmentTable, idx: usize, code: CodePoint) -> SplitOutcome {
    let seg = table.segments[idx].clone();
    debug_assert!(seg.contains(code) && !seg.uses_array());
    let mut parts = Vec::with_capacity(3);
    if seg.start < code {
        parts.push(CmapSegment::delta(seg.start.value(), code.value() - 1, seg.id_delta));
    }
    let singleton_offset = parts.len();
    parts.push(CmapSegment::delta(code.value(), code.value(), seg.id_delta));
    if code < seg.end {
        parts.push(CmapSegment::delta(code.value() + 1, seg.end.value(), seg.id_delta));
    }
    let n = parts.len();
    table.segments.splice(idx..idx + 1, parts);
    SplitOutcome { singleton: idx + singleton_offset, parts: idx..idx + n }
}

/// Merges adjacent, code-contiguous segments with equal idDelta until the
/// table is back at `target_count` segments. Segments produced by the
/// current split are only merged as a last resort (and the forged singleton
/// never), so the table keeps the shape the split was meant to produce.
/// Candidates closest to the split point are taken first.
fn restore_segment_count(
    table: &mut CmapSegmentTable,
    split: &SplitOutcome,
    target_count: usize,
) -> Result<(), ForgeError> {
    let mut protected = split.parts.clone();
    let mut singleton = split.singleton;
    let mut merged = 0usize;
    while table.segment_count() > target_count {
        let needed = table.segment_count() - target_count;
        let Some(at) = find_merge_candidate(table, &protected, singleton) else {
            return Err(ForgeError::NoMergeAvailable { merged, still_needed: needed });
        };
        // Merge segments at and at+1.
        let next_end = table.segments[at + 1].end;
        table.segments[at].end = next_end;
        table.segments.remove(at + 1);
        merged += 1;
        // Keep the protected range and singleton index in step.
        if at + 1 < protected.start {
            protected = protected.start - 1..protected.end - 1;
            singleton -= 1;
        } else if at < protected.end {
            // A protected part itself was merged (fallback tier); shrink.
            protected = protected.start..protected.end.saturating_sub(1);
            if at < singleton {
                singleton = singleton.saturating_sub(1);
            }
        }
    }
    Ok(())
}

/// Finds the best mergeable neighbor pair `(i, i+1)`: both arithmetic,
/// code-contiguous, equal idDelta. Pairs not touching the split parts are
/// preferred; among those, the pair closest to the singleton wins. The
/// singleton itself is never merged away.
fn find_merge_candidate(
    table: &CmapSegmentTable,
    protected: &std::ops::Range<usize>,
    singleton: usize,
) -> Option<usize> {
    let segs = table.segments();
    let mut best: Option<(bool, usize, usize)> = None; // (touches_split, distance, index)
    for i in 0..segs.len().saturating_sub(1) {
        let a = &segs[i];
        let b = &segs[i + 1];
        if a.uses_array() || b.uses_array() || a.id_delta != b.id_delta {
            continue;
        }
        if a.end.value().checked_add(1) != Some(b.start.value()) {
            continue;
        }
        if i == singleton || i + 1 == singleton {
            continue;
        }
        let touches_split = protected.contains(&i) || protected.contains(&(i + 1));
        let distance = if i + 1 < singleton {
            singleton - (i + 1)
        } else {
            i.saturating_sub(singleton)
        };
        let key = (touches_split, distance, i);
        if best.is_none_or(|b| key < b) {
            best = Some(key);
        }
    }
    best.map(|(_, _, i)| i)
}

/// Replaces the array-backed segment at `idx` by arithmetic segments with
/// identical resolution. A trailing 0xFFFF terminator is re-synthesized if
/// the rewrite would otherwise drop it.
fn normalize_in_place(table: &mut CmapSegmentTable, idx: usize) {
    let seg = table.segments[idx].clone();
    debug_assert!(seg.uses_array());
    let mut runs: Vec<CmapSegment> = Vec::new();
    let mut current: Option<(u16, u16, u16)> = None; // start, end, delta
    for code in seg.start.value()..=seg.end.value() {
        let glyph = table.resolve(CodePoint(code));
        if glyph.is_missing() {
            // Dropping coverage keeps resolution identical: uncovered codes
            // resolve to the missing glyph anyway.
            if let Some(run) = current.take() {
                runs.push(CmapSegment::delta(run.0, run.1, run.2));
            }
            continue;
        }
        let delta = glyph.value().wrapping_sub(code);
        match &mut current {
            Some((_, end, d)) if *d == delta && *end + 1 == code => *end = code,
            _ => {
                if let Some(run) = current.take() {
                    runs.push(CmapSegment::delta(run.0, run.1, run.2));
                }
                current = Some((code, code, delta));
            }
        }
    }
    if let Some(run) = current.take() {
        runs.push(CmapSegment::delta(run.0, run.1, run.2));
    }
    let covered_terminator = seg.end.value() == 0xFFFF;
    let runs_cover_terminator = runs.last().is_some_and(|r| r.end.value() == 0xFFFF);
    table.segments.splice(idx..idx + 1, runs);
    if covered_terminator && !runs_cover_terminator {
        table.segments.push(CmapSegment::delta(0xFFFF, 0xFFFF, 1));
    }
}
