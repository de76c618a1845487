//! Minimal TrueType synthesis.
//!
//! Builds small, structurally valid TrueType files with a prescribed
//! format-4 character map. Every glyph gets a plain quad outline so the
//! files load in ordinary font stacks; the point of these fonts is their
//! segment layout, which remapping and scanning experiments need exact
//! control over.

use crate::font::{assemble_sfnt, CmapSegment, CmapSegmentTable, CodePoint, FontError, FontFile, Tag, TableRecord};

/// Segment description for the synthesized map.
#[derive(Debug, Clone)]
pub enum SynthSegment {
    /// Arithmetic segment: codes `start..=end` map to `code + id_delta`.
    Delta { start: u16, end: u16, id_delta: u16 },
    /// Array-backed segment: explicit glyph ids for `start..`, one per code.
    Array { start: u16, glyphs: Vec<u16> },
}

impl SynthSegment {
    pub fn delta(start: u16, end: u16, id_delta: u16) -> Self {
        SynthSegment::Delta { start, end, id_delta }
    }

    pub fn array(start: u16, glyphs: Vec<u16>) -> Self {
        SynthSegment::Array { start, glyphs }
    }
}

/// Builder for a synthetic font.
#[derive(Debug, Clone)]
pub struct SynthFont {
    pub num_glyphs: u16,
    pub units_per_em: u16,
    segments: Vec<SynthSegment>,
}

impl SynthFont {
    pub fn new(num_glyphs: u16) -> Self {
        SynthFont { num_glyphs, units_per_em: 1000, segments: Vec::new() }
    }

    /// Adds an arithmetic segment.
    pub fn segment(mut self, start: u16, end: u16, id_delta: u16) -> Self {
        self.segments.push(SynthSegment::delta(start, end, id_delta));
        self
    }

    /// Adds an array-backed segment.
    pub fn array_segment(mut self, start: u16, glyphs: Vec<u16>) -> Self {
        self.segments.push(SynthSegment::array(start, glyphs));
        self
    }

    /// The decoded segment table this builder describes (terminator
    /// appended if absent).
    pub fn cmap(&self) -> Result<CmapSegmentTable, FontError> {
        let mut segments = Vec::new();
        let mut array = Vec::new();
        for seg in &self.segments {
            match seg {
                SynthSegment::Delta { start, end, id_delta } => {
                    segments.push(CmapSegment::delta(*start, *end, *id_delta));
                }
                SynthSegment::Array { start, glyphs } => {
                    if glyphs.is_empty() {
                        continue;
                    }
                    let base = array.len();
                    array.extend_from_slice(glyphs);
                    let end = start + (glyphs.len() as u16 - 1);
                    segments.push(CmapSegment {
                        start: CodePoint(*start),
                        end: CodePoint(end),
                        id_delta: 0,
                        id_range_offset: 2, // recomputed on encode
                        array_base: Some(base),
                    });
                }
            }
        }
        if segments.last().map(|s| s.end.value()) != Some(0xFFFF) {
            segments.push(CmapSegment::delta(0xFFFF, 0xFFFF, 1));
        }
        CmapSegmentTable::new(segments, array, 0)
    }

    /// Serializes the font and parses it back, returning the handle.
    pub fn build_font(&self) -> Result<FontFile, FontError> {
        FontFile::parse(&self.build()?)
    }

    /// Serializes the font to sfnt bytes with correct checksums.
    pub fn build(&self) -> Result<Vec<u8>, FontError> {
        let cmap_table = self.cmap()?;
        let subtable = cmap_table.encode()?;

        // cmap with two Unicode BMP records sharing the one subtable,
        // matching how production fonts are laid out.
        let records: &[(u16, u16)] = &[(0, 3), (3, 1)];
        let subtable_at = 4 + records.len() * 8;
        let mut cmap = Vec::new();
        cmap.extend_from_slice(&0u16.to_be_bytes());
        cmap.extend_from_slice(&(records.len() as u16).to_be_bytes());
        for (platform, encoding) in records {
            cmap.extend_from_slice(&platform.to_be_bytes());
            cmap.extend_from_slice(&encoding.to_be_bytes());
            cmap.extend_from_slice(&(subtable_at as u32).to_be_bytes());
        }
        cmap.extend_from_slice(&subtable);

        let (glyf, loca) = self.outlines();
        let head = self.head_table();
        let hhea = self.hhea_table();
        let maxp = self.maxp_table();
        let hmtx = self.hmtx_table();
        let name = self.name_table();
        let post = post_table();

        // Directory order must be sorted by tag; physical order mirrors it.
        let mut tables: Vec<(Tag, Vec<u8>)> = vec![
            (Tag(*b"cmap"), cmap),
            (Tag(*b"glyf"), glyf),
            (Tag(*b"head"), head),
            (Tag(*b"hhea"), hhea),
            (Tag(*b"hmtx"), hmtx),
            (Tag(*b"loca"), loca),
            (Tag(*b"maxp"), maxp),
            (Tag(*b"name"), name),
            (Tag(*b"post"), post),
        ];
        tables.sort_by_key(|(tag, _)| tag.0);
        let order: Vec<Tag> = tables.iter().map(|(t, _)| *t).collect();
        let with_records: Vec<(TableRecord, Vec<u8>)> = tables
            .into_iter()
            .map(|(tag, body)| {
                (TableRecord { tag, checksum: 0, offset: 0, length: body.len() as u32 }, body)
            })
            .collect();
        assemble_sfnt(0x0001_0000, &order, &with_records)
    }

    fn head_table(&self) -> Vec<u8> {
        let mut head = Vec::with_capacity(54);
        head.extend_from_slice(&0x0001_0000u32.to_be_bytes()); // version
        head.extend_from_slice(&0x0001_0000u32.to_be_bytes()); // fontRevision
        head.extend_from_slice(&0u32.to_be_bytes()); // checkSumAdjustment
        head.extend_from_slice(&0x5F0F_3CF5u32.to_be_bytes()); // magicNumber
        head.extend_from_slice(&0u16.to_be_bytes()); // flags
        head.extend_from_slice(&self.units_per_em.to_be_bytes());
        // Fixed timestamp (seconds since 1904) so builds are reproducible
        // without looking like the epoch to font tooling.
        head.extend_from_slice(&3_660_000_000u64.to_be_bytes()); // created
        head.extend_from_slice(&3_660_000_000u64.to_be_bytes()); // modified
        for v in [50i16, 0, 550, 500] {
            head.extend_from_slice(&v.to_be_bytes()); // xMin yMin xMax yMax
        }
        head.extend_from_slice(&0u16.to_be_bytes()); // macStyle
        head.extend_from_slice(&8u16.to_be_bytes()); // lowestRecPPEM
        head.extend_from_slice(&2i16.to_be_bytes()); // fontDirectionHint
        head.extend_from_slice(&0i16.to_be_bytes()); // indexToLocFormat: short
        head.extend_from_slice(&0i16.to_be_bytes()); // glyphDataFormat
        head
    }

    fn hhea_table(&self) -> Vec<u8> {
        let mut hhea = Vec::with_capacity(36);
        hhea.extend_from_slice(&0x0001_0000u32.to_be_bytes());
        hhea.extend_from_slice(&800i16.to_be_bytes()); // ascent
        hhea.extend_from_slice(&(-200i16).to_be_bytes()); // descent
        hhea.extend_from_slice(&0i16.to_be_bytes()); // lineGap
        hhea.extend_from_slice(&600u16.to_be_bytes()); // advanceWidthMax
        hhea.extend_from_slice(&0i16.to_be_bytes()); // minLeftSideBearing
        hhea.extend_from_slice(&0i16.to_be_bytes()); // minRightSideBearing
        hhea.extend_from_slice(&600i16.to_be_bytes()); // xMaxExtent
        hhea.extend_from_slice(&1i16.to_be_bytes()); // caretSlopeRise
        hhea.extend_from_slice(&0i16.to_be_bytes()); // caretSlopeRun
        hhea.extend_from_slice(&0i16.to_be_bytes()); // caretOffset
        hhea.extend_from_slice(&[0u8; 8]); // reserved
        hhea.extend_from_slice(&0i16.to_be_bytes()); // metricDataFormat
        hhea.extend_from_slice(&self.num_glyphs.to_be_bytes()); // numberOfHMetrics
        hhea
    }

    fn maxp_table(&self) -> Vec<u8> {
        let mut maxp = Vec::with_capacity(32);
        maxp.extend_from_slice(&0x0001_0000u32.to_be_bytes());
        maxp.extend_from_slice(&self.num_glyphs.to_be_bytes());
        maxp.extend_from_slice(&4u16.to_be_bytes()); // maxPoints
        maxp.extend_from_slice(&1u16.to_be_bytes()); // maxContours
        maxp.extend_from_slice(&0u16.to_be_bytes()); // maxCompositePoints
        maxp.extend_from_slice(&0u16.to_be_bytes()); // maxCompositeContours
        maxp.extend_from_slice(&2u16.to_be_bytes()); // maxZones
        maxp.extend_from_slice(&0u16.to_be_bytes()); // maxTwilightPoints
        maxp.extend_from_slice(&0u16.to_be_bytes()); // maxStorage
        maxp.extend_from_slice(&0u16.to_be_bytes()); // maxFunctionDefs
        maxp.extend_from_slice(&0u16.to_be_bytes()); // maxInstructionDefs
        maxp.extend_from_slice(&64u16.to_be_bytes()); // maxStackElements
        maxp.extend_from_slice(&0u16.to_be_bytes()); // maxSizeOfInstructions
        maxp.extend_from_slice(&0u16.to_be_bytes()); // maxComponentElements
        maxp.extend_from_slice(&0u16.to_be_bytes()); // maxComponentDepth
        maxp
    }

    fn hmtx_table(&self) -> Vec<u8> {
        let mut hmtx = Vec::with_capacity(self.num_glyphs as usize * 4);
        for _ in 0..self.num_glyphs {
            hmtx.extend_from_slice(&600u16.to_be_bytes()); // advance
            hmtx.extend_from_slice(&50i16.to_be_bytes()); // lsb
        }
        hmtx
    }

    fn name_table(&self) -> Vec<u8> {
        let value: Vec<u8> = "SynthFont".encode_utf16().flat_map(|u| u.to_be_bytes()).collect();
        let mut name = Vec::new();
        name.extend_from_slice(&0u16.to_be_bytes()); // format
        name.extend_from_slice(&1u16.to_be_bytes()); // count
        name.extend_from_slice(&18u16.to_be_bytes()); // stringOffset
        name.extend_from_slice(&3u16.to_be_bytes()); // platform
        name.extend_from_slice(&1u16.to_be_bytes()); // encoding
        name.extend_from_slice(&0x0409u16.to_be_bytes()); // language
        name.extend_from_slice(&6u16.to_be_bytes()); // nameID: PostScript name
        name.extend_from_slice(&(value.len() as u16).to_be_bytes());
        name.extend_from_slice(&0u16.to_be_bytes()); // offset
        name.extend_from_slice(&value);
        name
    }

    /// Glyph 0 is empty; every other glyph is a small quad whose width
    /// varies with its index, just enough to make glyphs distinguishable.
    fn outlines(&self) -> (Vec<u8>, Vec<u8>) {
        let mut glyf = Vec::new();
        let mut loca = Vec::with_capacity((self.num_glyphs as usize + 1) * 2);
        loca.extend_from_slice(&0u16.to_be_bytes());
        for gid in 0..self.num_glyphs {
            if gid > 0 {
                glyf.extend_from_slice(&simple_quad(50 + (gid % 8) as i16 * 25));
            }
            let half_offset = (glyf.len() / 2) as u16;
            loca.extend_from_slice(&half_offset.to_be_bytes());
        }
        (glyf, loca)
    }
}

/// A one-contour rectangle from (50,0) to (width,500), as glyf bytes
/// (padded to four bytes so short loca offsets stay aligned).
fn simple_quad(width: i16) -> Vec<u8> {
    let mut g = Vec::with_capacity(36);
    g.extend_from_slice(&1i16.to_be_bytes()); // numberOfContours
    for v in [50i16, 0, width, 500] {
        g.extend_from_slice(&v.to_be_bytes()); // bbox
    }
    g.extend_from_slice(&3u16.to_be_bytes()); // endPtsOfContours[0]
    g.extend_from_slice(&0u16.to_be_bytes()); // instructionLength
    g.extend_from_slice(&[0x01; 4]); // flags: four on-curve points
    for dx in [50i16, width - 50, 0, -(width - 50)] {
        g.extend_from_slice(&dx.to_be_bytes());
    }
    for dy in [0i16, 0, 500, 0] {
        g.extend_from_slice(&dy.to_be_bytes());
    }
    while g.len() % 4 != 0 {
        g.push(0);
    }
    g
}

fn post_table() -> Vec<u8> {
    let mut post = Vec::with_capacity(32);
    post.extend_from_slice(&0x0003_0000u32.to_be_bytes()); // version 3.0
    post.extend_from_slice(&0i32.to_be_bytes()); // italicAngle
    post.extend_from_slice(&(-100i16).to_be_bytes()); // underlinePosition
    post.extend_from_slice(&50i16.to_be_bytes()); // underlineThickness
    post.extend_from_slice(&0u32.to_be_bytes()); // isFixedPitch
    post.extend_from_slice(&[0u8; 16]); // memory hints
    post
}

/// The segment layout used as the running example in this crate's tests:
/// punctuation, three digit segments and lowercase letters, all with
/// idDelta 0xffe4.
pub fn reference_font() -> FontFile {
    SynthFont::new(96)
        .segment(0x0020, 0x002f, 0xffe4)
        .segment(0x0030, 0x0030, 0xffe4)
        .segment(0x0031, 0x0031, 0xffe4)
        .segment(0x0032, 0x0033, 0xffe4)
        .segment(0x0061, 0x007a, 0xffe4)
        .build_font()
        .expect("reference font builds")
}
