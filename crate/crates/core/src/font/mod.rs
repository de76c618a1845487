//! sfnt container parsing and re-serialization.
//!
//! [`FontFile`] preserves the original bytes of every table it does not
//! touch. Re-serializing an unmodified font patches checksums in place, so
//! a font that shipped with correct checksums survives a parse/serialize
//! round trip byte for byte. Replacing the character map triggers a full
//! rebuild: the format-4 subtable is re-encoded, every other encoding
//! record is pointed at it (or dropped), offsets and checksums are
//! recomputed.

pub mod checksum;
mod cmap;

use std::collections::BTreeMap;
use std::fmt;

use sha2::{Digest, Sha256};

pub use cmap::{
    CmapSegment, CmapSegmentTable, CodePoint, Format4Header, GlyphIndex, ResolveIssue,
    MAX_SEGMENTS,
};

/// Four-byte table identifier.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag(pub [u8; 4]);

impl Tag {
    pub const CMAP: Tag = Tag(*b"cmap");
    pub const HEAD: Tag = Tag(*b"head");
    pub const MAXP: Tag = Tag(*b"maxp");
    pub const HHEA: Tag = Tag(*b"hhea");
    pub const HMTX: Tag = Tag(*b"hmtx");
    pub const NAME: Tag = Tag(*b"name");
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            let c = if b.is_ascii_graphic() || b == b' ' { b as char } else { '?' };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tag({self})")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FontError {
    #[error("not an sfnt font (magic {found:#010x})")]
    NotSfnt { found: u32 },
    #[error("input too short to be an sfnt font")]
    TooShort,
    #[error("table directory extends past the end of the file")]
    TruncatedDirectory,
    #[error("table '{tag}' extends past the end of the file")]
    TruncatedTable { tag: Tag },
    #[error("font has no usable format-4 character map")]
    NoFormat4Cmap,
    #[error("required table '{tag}' missing")]
    MissingTable { tag: Tag },
    #[error("malformed cmap: {0}")]
    MalformedCmap(String),
    #[error("too many segments for format 4 ({count} > {MAX_SEGMENTS})")]
    SegmentOverflow { count: usize },
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
}

impl FontError {
    pub(crate) fn truncated(tag: [u8; 4]) -> Self {
        FontError::TruncatedTable { tag: Tag(tag) }
    }
}

/// A stored checksum that does not match the table bytes. Real-world fonts
/// ship stale checksums, so these are warnings, not parse failures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChecksumWarning {
    Table { tag: Tag, stored: u32, computed: u32 },
    FileAdjustment { stored: u32, computed: u32 },
}

/// One table directory entry, as stored in the file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableRecord {
    pub tag: Tag,
    pub checksum: u32,
    pub offset: u32,
    pub length: u32,
}

/// One cmap encoding record: platform/encoding ids plus the subtable format
/// found behind its offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodingRecord {
    pub platform_id: u16,
    pub encoding_id: u16,
    pub subtable_offset: u32,
    pub format: u16,
}

/// What to do with non-canonical cmap encoding records when the character
/// map has been replaced and the font is re-serialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SubtablePolicy {
    /// Keep every encoding record, pointing each at the rebuilt format-4
    /// subtable so no renderer can see a divergent mapping. Format-14
    /// variation-sequence records are dropped (they cannot mirror a
    /// code-to-glyph map).
    #[default]
    MirrorAll,
    /// Keep only the canonical Unicode BMP record.
    DropOthers,
}

/// Vertical/horizontal metrics needed for document embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FontMetrics {
    pub units_per_em: u16,
    pub x_min: i16,
    pub y_min: i16,
    pub x_max: i16,
    pub y_max: i16,
    pub ascent: i16,
    pub descent: i16,
}

const SFNT_TRUETYPE: u32 = 0x0001_0000;
const SFNT_TRUE: u32 = 0x7472_7565; // 'true'
const SFNT_OTTO: u32 = 0x4F54_544F; // 'OTTO'

/// A parsed sfnt font.
///
/// Immutable after construction; all operations that "modify" a font
/// produce a new value. Safe to share across threads.
#[derive(Clone)]
pub struct FontFile {
    data: Vec<u8>,
    sfnt_version: u32,
    directory: Vec<TableRecord>,
    cmap: CmapSegmentTable,
    cmap_modified: bool,
    encoding_records: Vec<EncodingRecord>,
    canonical_record: usize,
    num_glyphs: u16,
    units_per_em: u16,
    checksum_warnings: Vec<ChecksumWarning>,
    subtable_policy: SubtablePolicy,
}

impl fmt::Debug for FontFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FontFile")
            .field("bytes", &self.data.len())
            .field("tables", &self.directory.len())
            .field("num_glyphs", &self.num_glyphs)
            .field("segments", &self.cmap.segment_count())
            .field("cmap_modified", &self.cmap_modified)
            .finish()
    }
}

impl FontFile {
    /// Parses an sfnt binary. Structural corruption fails; stale checksums
    /// are preserved as warnings on the returned value.
    pub fn parse(bytes: &[u8]) -> Result<Self, FontError> {
        if bytes.len() < 12 {
            return Err(if bytes.len() >= 4 {
                FontError::NotSfnt {
                    found: u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]),
                }
            } else {
                FontError::TooShort
            });
        }
        let sfnt_version = read_u32(bytes, 0);
        if !matches!(sfnt_version, SFNT_TRUETYPE | SFNT_TRUE | SFNT_OTTO) {
            return Err(FontError::NotSfnt { found: sfnt_version });
        }
        let num_tables = read_u16(bytes, 4) as usize;
        if 12 + num_tables * 16 > bytes.len() {
            return Err(FontError::TruncatedDirectory);
        }
        let mut directory = Vec::with_capacity(num_tables);
        for i in 0..num_tables {
            let at = 12 + i * 16;
            let record = TableRecord {
                tag: Tag([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]]),
                checksum: read_u32(bytes, at + 4),
                offset: read_u32(bytes, at + 8),
                length: read_u32(bytes, at + 12),
            };
            let end = record.offset as u64 + record.length as u64;
            if end > bytes.len() as u64 {
                return Err(FontError::TruncatedTable { tag: record.tag });
            }
            directory.push(record);
        }

        let table = |tag: Tag| -> Option<&[u8]> {
            directory
                .iter()
                .find(|r| r.tag == tag)
                .map(|r| &bytes[r.offset as usize..(r.offset + r.length) as usize])
        };

        // Checksum verification: warn, never fail.
        let mut warnings = Vec::new();
        for record in &directory {
            let body = &bytes[record.offset as usize..(record.offset + record.length) as usize];
            let computed = if record.tag == Tag::HEAD {
                checksum::head_checksum(body)
            } else {
                checksum::table_checksum(body)
            };
            if computed != record.checksum {
                warnings.push(ChecksumWarning::Table {
                    tag: record.tag,
                    stored: record.checksum,
                    computed,
                });
            }
        }

        let head = table(Tag::HEAD).ok_or(FontError::MissingTable { tag: Tag::HEAD })?;
        if head.len() < 54 {
            return Err(FontError::truncated(*b"head"));
        }
        let stored_adjustment = read_u32(head, checksum::HEAD_ADJUSTMENT_OFFSET);
        let units_per_em = read_u16(head, 18);
        let file_sum = checksum::table_checksum(bytes).wrapping_sub(stored_adjustment);
        let expected_adjustment = checksum::checksum_adjustment(file_sum);
        if expected_adjustment != stored_adjustment {
            warnings.push(ChecksumWarning::FileAdjustment {
                stored: stored_adjustment,
                computed: expected_adjustment,
            });
        }

        let maxp = table(Tag::MAXP).ok_or(FontError::MissingTable { tag: Tag::MAXP })?;
        if maxp.len() < 6 {
            return Err(FontError::truncated(*b"maxp"));
        }
        let num_glyphs = read_u16(maxp, 4);

        let cmap_bytes = table(Tag::CMAP).ok_or(FontError::NoFormat4Cmap)?;
        let (encoding_records, canonical_record, cmap) = decode_cmap_table(cmap_bytes)?;

        Ok(FontFile {
            data: bytes.to_vec(),
            sfnt_version,
            directory,
            cmap,
            cmap_modified: false,
            encoding_records,
            canonical_record,
            num_glyphs,
            units_per_em,
            checksum_warnings: warnings,
            subtable_policy: SubtablePolicy::default(),
        })
    }

    pub fn sfnt_version(&self) -> u32 {
        self.sfnt_version
    }

    pub fn directory(&self) -> &[TableRecord] {
        &self.directory
    }

    /// Raw bytes of a table, if present.
    pub fn table(&self, tag: Tag) -> Option<&[u8]> {
        self.directory
            .iter()
            .find(|r| r.tag == tag)
            .map(|r| &self.data[r.offset as usize..(r.offset + r.length) as usize])
    }

    /// All tables as `tag -> bytes`, in directory order.
    pub fn tables(&self) -> BTreeMap<Tag, &[u8]> {
        self.directory
            .iter()
            .map(|r| (r.tag, &self.data[r.offset as usize..(r.offset + r.length) as usize]))
            .collect()
    }

    pub fn cmap(&self) -> &CmapSegmentTable {
        &self.cmap
    }

    pub fn cmap_modified(&self) -> bool {
        self.cmap_modified
    }

    pub fn encoding_records(&self) -> &[EncodingRecord] {
        &self.encoding_records
    }

    pub fn num_glyphs(&self) -> u16 {
        self.num_glyphs
    }

    pub fn units_per_em(&self) -> u16 {
        self.units_per_em
    }

    pub fn checksum_warnings(&self) -> &[ChecksumWarning] {
        &self.checksum_warnings
    }

    /// Glyph index for a character code, through the canonical format-4 map.
    pub fn resolve(&self, code: CodePoint) -> GlyphIndex {
        self.cmap.resolve(code)
    }

    /// SHA-256 of the bytes this font was parsed from.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(&self.data);
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// A copy of this font with its character map replaced. The copy
    /// serializes through the full rebuild path.
    pub fn with_cmap(&self, cmap: CmapSegmentTable) -> Result<FontFile, FontError> {
        cmap.validate()?;
        // Reject maps that reach past the declared glyph count; a forged
        // map must still address real glyphs.
        for seg in cmap.segments() {
            if seg.uses_array() {
                continue;
            }
            for code in seg.start.0..=seg.end.0 {
                let glyph = code.wrapping_add(seg.id_delta);
                if glyph >= self.num_glyphs && glyph != 0 {
                    return Err(FontError::InvariantViolation(format!(
                        "code U+{code:04X} maps to glyph {glyph}, but the font has only {} glyphs",
                        self.num_glyphs
                    )));
                }
            }
        }
        let mut font = self.clone();
        font.cmap = cmap;
        font.cmap_modified = true;
        Ok(font)
    }

    pub fn with_subtable_policy(mut self, policy: SubtablePolicy) -> FontFile {
        self.subtable_policy = policy;
        self
    }

    /// Serializes the font.
    ///
    /// * Character map untouched: the original bytes are re-emitted with
    ///   checksums recomputed in place. A font whose shipped checksums were
    ///   already correct comes back byte-identical.
    /// * Character map replaced: the cmap table is rebuilt around the
    ///   re-encoded format-4 subtable, table offsets are re-laid out with
    ///   four-byte alignment, and every checksum plus the head adjustment
    ///   is recomputed.
    pub fn to_bytes(&self) -> Result<Vec<u8>, FontError> {
        if !self.cmap_modified {
            let mut out = self.data.clone();
            patch_checksums(&mut out, &self.directory)?;
            return Ok(out);
        }

        let new_cmap = encode_cmap_table(
            &self.cmap,
            &self.encoding_records,
            self.canonical_record,
            self.subtable_policy,
        )?;
        let tables: Vec<(TableRecord, Vec<u8>)> = {
            // Preserve the physical order tables had in the source file.
            let mut ordered: Vec<&TableRecord> = self.directory.iter().collect();
            ordered.sort_by_key(|r| r.offset);
            ordered
                .into_iter()
                .map(|r| {
                    let body = if r.tag == Tag::CMAP {
                        new_cmap.clone()
                    } else {
                        self.data[r.offset as usize..(r.offset + r.length) as usize].to_vec()
                    };
                    (*r, body)
                })
                .collect()
        };
        assemble_sfnt(
            self.sfnt_version,
            &self.directory.iter().map(|r| r.tag).collect::<Vec<_>>(),
            &tables,
        )
    }

    /// Advance width of a glyph in font units, from hhea/hmtx.
    pub fn advance_width(&self, glyph: GlyphIndex) -> Option<u16> {
        let hhea = self.table(Tag::HHEA)?;
        if hhea.len() < 36 {
            return None;
        }
        let num_h_metrics = read_u16(hhea, 34) as usize;
        if num_h_metrics == 0 {
            return None;
        }
        let hmtx = self.table(Tag::HMTX)?;
        let idx = (glyph.value() as usize).min(num_h_metrics - 1);
        hmtx.get(idx * 4..idx * 4 + 2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]))
    }

    /// Bounding box and vertical metrics, when head/hhea are well-formed.
    pub fn metrics(&self) -> Option<FontMetrics> {
        let head = self.table(Tag::HEAD)?;
        let hhea = self.table(Tag::HHEA)?;
        if head.len() < 54 || hhea.len() < 36 {
            return None;
        }
        Some(FontMetrics {
            units_per_em: self.units_per_em,
            x_min: read_u16(head, 36) as i16,
            y_min: read_u16(head, 38) as i16,
            x_max: read_u16(head, 40) as i16,
            y_max: read_u16(head, 42) as i16,
            ascent: read_u16(hhea, 4) as i16,
            descent: read_u16(hhea, 6) as i16,
        })
    }

    /// PostScript name from the name table (name id 6), if present.
    pub fn postscript_name(&self) -> Option<String> {
        let name = self.table(Tag::NAME)?;
        if name.len() < 6 {
            return None;
        }
        let count = read_u16(name, 2) as usize;
        let string_base = read_u16(name, 4) as usize;
        for i in 0..count {
            let at = 6 + i * 12;
            if at + 12 > name.len() {
                break;
            }
            let platform = read_u16(name, at);
            let name_id = read_u16(name, at + 6);
            if name_id != 6 {
                continue;
            }
            let len = read_u16(name, at + 8) as usize;
            let off = string_base + read_u16(name, at + 10) as usize;
            let Some(raw) = name.get(off..off + len) else { continue };
            let text = if platform == 1 {
                raw.iter().map(|&b| b as char).collect::<String>()
            } else {
                // UTF-16BE
                String::from_utf16_lossy(
                    &raw.chunks_exact(2)
                        .map(|b| u16::from_be_bytes([b[0], b[1]]))
                        .collect::<Vec<_>>(),
                )
            };
            let cleaned: String = text.chars().filter(|c| c.is_ascii_graphic()).collect();
            if !cleaned.is_empty() {
                return Some(cleaned);
            }
        }
        None
    }
}

fn read_u16(bytes: &[u8], at: usize) -> u16 {
    u16::from_be_bytes([bytes[at], bytes[at + 1]])
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

/// Decodes the cmap table: every encoding record (with its subtable format)
/// plus the decoded canonical Unicode BMP format-4 subtable.
fn decode_cmap_table(
    cmap: &[u8],
) -> Result<(Vec<EncodingRecord>, usize, CmapSegmentTable), FontError> {
    if cmap.len() < 4 {
        return Err(FontError::truncated(*b"cmap"));
    }
    let num_records = read_u16(cmap, 2) as usize;
    if 4 + num_records * 8 > cmap.len() {
        return Err(FontError::truncated(*b"cmap"));
    }
    let mut records = Vec::with_capacity(num_records);
    for i in 0..num_records {
        let at = 4 + i * 8;
        let offset = read_u32(cmap, at + 4);
        if offset as usize + 2 > cmap.len() {
            return Err(FontError::truncated(*b"cmap"));
        }
        records.push(EncodingRecord {
            platform_id: read_u16(cmap, at),
            encoding_id: read_u16(cmap, at + 2),
            subtable_offset: offset,
            format: read_u16(cmap, offset as usize),
        });
    }
    // Canonical subtable: Windows Unicode BMP first, then Unicode platform,
    // then any other format-4 record.
    let canonical = records
        .iter()
        .position(|r| r.format == 4 && r.platform_id == 3 && r.encoding_id == 1)
        .or_else(|| records.iter().position(|r| r.format == 4 && r.platform_id == 0))
        .or_else(|| records.iter().position(|r| r.format == 4))
        .ok_or(FontError::NoFormat4Cmap)?;
    let table = CmapSegmentTable::decode(&cmap[records[canonical].subtable_offset as usize..])?;
    Ok((records, canonical, table))
}

/// Rebuilds a whole cmap table around a single re-encoded format-4 subtable.
fn encode_cmap_table(
    table: &CmapSegmentTable,
    records: &[EncodingRecord],
    canonical: usize,
    policy: SubtablePolicy,
) -> Result<Vec<u8>, FontError> {
    let subtable = table.encode()?;
    let kept: Vec<(u16, u16)> = match policy {
        SubtablePolicy::MirrorAll => {
            let mut kept: Vec<(u16, u16)> = records
                .iter()
                .filter(|r| r.format != 14)
                .map(|r| (r.platform_id, r.encoding_id))
                .collect();
            if kept.is_empty() {
                kept.push((3, 1));
            }
            kept
        }
        SubtablePolicy::DropOthers => {
            let r = &records[canonical];
            vec![(r.platform_id, r.encoding_id)]
        }
    };
    let mut kept = kept;
    kept.sort_unstable();
    kept.dedup();

    let subtable_at = 4 + kept.len() * 8;
    let mut out = Vec::with_capacity(subtable_at + subtable.len());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&(kept.len() as u16).to_be_bytes());
    for (platform, encoding) in &kept {
        out.extend_from_slice(&platform.to_be_bytes());
        out.extend_from_slice(&encoding.to_be_bytes());
        out.extend_from_slice(&(subtable_at as u32).to_be_bytes());
    }
    out.extend_from_slice(&subtable);
    Ok(out)
}

/// Recomputes directory checksums and the head adjustment in place, without
/// moving any table.
fn patch_checksums(data: &mut [u8], directory: &[TableRecord]) -> Result<(), FontError> {
    let mut head_span: Option<(usize, usize)> = None;
    for (i, record) in directory.iter().enumerate() {
        let start = record.offset as usize;
        let end = start + record.length as usize;
        let computed = if record.tag == Tag::HEAD {
            head_span = Some((start, end));
            // Zero the adjustment before summing.
            let adj_at = start + checksum::HEAD_ADJUSTMENT_OFFSET;
            data[adj_at..adj_at + 4].copy_from_slice(&[0; 4]);
            checksum::table_checksum(&data[start..end])
        } else {
            checksum::table_checksum(&data[start..end])
        };
        let dir_at = 12 + i * 16 + 4;
        data[dir_at..dir_at + 4].copy_from_slice(&computed.to_be_bytes());
    }
    if let Some((start, _)) = head_span {
        let file_sum = checksum::table_checksum(data);
        let adjustment = checksum::checksum_adjustment(file_sum);
        let adj_at = start + checksum::HEAD_ADJUSTMENT_OFFSET;
        data[adj_at..adj_at + 4].copy_from_slice(&adjustment.to_be_bytes());
    }
    Ok(())
}

/// Assembles an sfnt file from table bodies.
///
/// `directory_order` fixes the order of directory entries; `tables` fixes
/// the physical order of the bodies. Offsets are four-byte aligned, all
/// checksums and the head adjustment are computed from scratch.
pub(crate) fn assemble_sfnt(
    sfnt_version: u32,
    directory_order: &[Tag],
    tables: &[(TableRecord, Vec<u8>)],
) -> Result<Vec<u8>, FontError> {
    let num_tables = tables.len() as u16;
    let header_len = 12 + tables.len() * 16;

    // Physical layout.
    let mut offsets: BTreeMap<Tag, (u32, u32)> = BTreeMap::new();
    let mut cursor = header_len;
    for (record, body) in tables {
        offsets.insert(record.tag, (cursor as u32, body.len() as u32));
        cursor += body.len().div_ceil(4) * 4;
    }

    let mut out = vec![0u8; cursor];
    out[0..4].copy_from_slice(&sfnt_version.to_be_bytes());
    out[4..6].copy_from_slice(&num_tables.to_be_bytes());
    let floor_log2 = if num_tables == 0 { 0 } else { 15 - num_tables.leading_zeros() as u16 };
    let search_range = 16 * (1u16 << floor_log2);
    out[6..8].copy_from_slice(&search_range.to_be_bytes());
    out[8..10].copy_from_slice(&floor_log2.to_be_bytes());
    out[10..12].copy_from_slice(&(num_tables * 16 - search_range).to_be_bytes());

    let mut head_at: Option<usize> = None;
    for (record, body) in tables {
        let (offset, _) = offsets[&record.tag];
        let start = offset as usize;
        out[start..start + body.len()].copy_from_slice(body);
        if record.tag == Tag::HEAD {
            head_at = Some(start);
            // Adjustment recomputed below; zero it for the table checksum.
            if body.len() >= checksum::HEAD_ADJUSTMENT_OFFSET + 4 {
                let at = start + checksum::HEAD_ADJUSTMENT_OFFSET;
                out[at..at + 4].copy_from_slice(&[0; 4]);
            }
        }
    }

    for (i, tag) in directory_order.iter().enumerate() {
        let (offset, length) = offsets
            .get(tag)
            .copied()
            .ok_or(FontError::MissingTable { tag: *tag })?;
        let body = &out[offset as usize..(offset + length) as usize];
        let sum = checksum::table_checksum(body);
        let at = 12 + i * 16;
        out[at..at + 4].copy_from_slice(&tag.0);
        out[at + 4..at + 8].copy_from_slice(&sum.to_be_bytes());
        out[at + 8..at + 12].copy_from_slice(&offset.to_be_bytes());
        out[at + 12..at + 16].copy_from_slice(&length.to_be_bytes());
    }

    if let Some(start) = head_at {
        let file_sum = checksum::table_checksum(&out);
        let adjustment = checksum::checksum_adjustment(file_sum);
        let at = start + checksum::HEAD_ADJUSTMENT_OFFSET;
        out[at..at + 4].copy_from_slice(&adjustment.to_be_bytes());
    }
    Ok(out)
}
