//! Round-trip and checksum fidelity on real production fonts.

use glyphforge::font::{ChecksumWarning, CodePoint, FontFile, SubtablePolicy, Tag};

mod common;
use common::{corpus_font_bytes, corpus_paths, verify_checksums_independently};

#[test]
fn corpus_has_at_least_three_fonts() {
    assert!(corpus_paths().len() >= 3);
}

#[test]
fn corpus_fonts_parse_without_checksum_warnings() {
    for path in corpus_paths() {
        let font = FontFile::parse(&corpus_font_bytes(&path)).unwrap();
        assert!(
            font.checksum_warnings().is_empty(),
            "{path:?}: {:?}",
            font.checksum_warnings()
        );
        assert!(font.num_glyphs() > 0);
        assert!(font.cmap().segment_count() > 1);
    }
}

#[test]
fn parse_serialize_is_byte_identical_on_clean_corpus() {
    for path in corpus_paths() {
        let bytes = corpus_font_bytes(&path);
        let font = FontFile::parse(&bytes).unwrap();
        // Byte identity is only promised when the shipped checksums are
        // already correct, which the corpus test above establishes.
        assert!(font.checksum_warnings().is_empty());
        let out = font.to_bytes().unwrap();
        assert_eq!(out, bytes, "{path:?} did not round-trip byte-identically");
    }
}

#[test]
fn serialized_output_passes_independent_checksum_verifier() {
    for path in corpus_paths() {
        let font = FontFile::parse(&corpus_font_bytes(&path)).unwrap();
        let out = font.to_bytes().unwrap();
        verify_checksums_independently(&out).unwrap_or_else(|e| panic!("{path:?}: {e}"));
    }
}

#[test]
fn rebuild_path_preserves_resolution_for_every_code() {
    for path in corpus_paths() {
        let bytes = corpus_font_bytes(&path);
        let font = FontFile::parse(&bytes).unwrap();
        // Force the full rebuild by "replacing" the cmap with itself.
        let rebuilt = font.with_cmap(font.cmap().clone()).unwrap();
        let rebuilt_bytes = rebuilt.to_bytes().unwrap();
        verify_checksums_independently(&rebuilt_bytes).unwrap();

        let reparsed = FontFile::parse(&rebuilt_bytes).unwrap();
        assert!(reparsed.checksum_warnings().is_empty());
        for code in 0..=u16::MAX {
            assert_eq!(
                reparsed.resolve(CodePoint(code)),
                font.resolve(CodePoint(code)),
                "{path:?} code U+{code:04X}"
            );
        }
    }
}

#[test]
fn rebuild_mirrors_all_encoding_records_onto_one_subtable() {
    let bytes = corpus_font_bytes(&corpus_paths()[0]);
    let font = FontFile::parse(&bytes).unwrap();
    let n_records = font.encoding_records().len();
    let dropped_fmt14 = font.encoding_records().iter().filter(|r| r.format == 14).count();

    let rebuilt_bytes = font.with_cmap(font.cmap().clone()).unwrap().to_bytes().unwrap();
    let reparsed = FontFile::parse(&rebuilt_bytes).unwrap();
    assert_eq!(reparsed.encoding_records().len(), n_records - dropped_fmt14);
    let offsets: Vec<u32> =
        reparsed.encoding_records().iter().map(|r| r.subtable_offset).collect();
    assert!(offsets.windows(2).all(|w| w[0] == w[1]), "records must share one subtable");
    assert!(reparsed.encoding_records().iter().all(|r| r.format == 4));
}

#[test]
fn drop_others_policy_keeps_only_the_canonical_record() {
    let bytes = corpus_font_bytes(&corpus_paths()[0]);
    let font = FontFile::parse(&bytes).unwrap();
    let rebuilt = font
        .with_cmap(font.cmap().clone())
        .unwrap()
        .with_subtable_policy(SubtablePolicy::DropOthers)
        .to_bytes()
        .unwrap();
    let reparsed = FontFile::parse(&rebuilt).unwrap();
    assert_eq!(reparsed.encoding_records().len(), 1);
    assert_eq!(reparsed.encoding_records()[0].platform_id, 3);
    assert_eq!(reparsed.encoding_records()[0].encoding_id, 1);
}

#[test]
fn stale_checksum_is_a_warning_and_gets_repaired() {
    let mut bytes = corpus_font_bytes(&corpus_paths()[0]);
    // Corrupt the stored checksum of the first non-head table.
    let num_tables = u16::from_be_bytes([bytes[4], bytes[5]]) as usize;
    let mut victim = None;
    for i in 0..num_tables {
        let at = 12 + i * 16;
        if &bytes[at..at + 4] != b"head" {
            victim = Some(at + 4);
            break;
        }
    }
    let at = victim.unwrap();
    bytes[at] ^= 0xFF;

    let font = FontFile::parse(&bytes).unwrap();
    assert!(font
        .checksum_warnings()
        .iter()
        .any(|w| matches!(w, ChecksumWarning::Table { .. })));

    // Serialization repairs the stored sums; the result parses clean.
    let repaired = font.to_bytes().unwrap();
    let reparsed = FontFile::parse(&repaired).unwrap();
    assert!(reparsed.checksum_warnings().is_empty());
    assert_ne!(repaired, bytes);
}

#[test]
fn binary_search_matches_linear_scan_on_corpus_maps() {
    for path in corpus_paths() {
        let font = FontFile::parse(&corpus_font_bytes(&path)).unwrap();
        let table = font.cmap();
        for code in 0..=u16::MAX {
            let code = CodePoint(code);
            let linear = table
                .segments()
                .iter()
                .find(|s| s.contains(code))
                .map(|seg| {
                    if seg.uses_array() {
                        // Same segment, so resolve() exercises the same
                        // array path; only the search strategy differs.
                        table.resolve(code)
                    } else {
                        glyphforge::font::GlyphIndex(code.value().wrapping_add(seg.id_delta))
                    }
                })
                .unwrap_or(glyphforge::font::GlyphIndex::MISSING);
            assert_eq!(table.resolve(code), linear, "{path:?} {code}");
        }
    }
}

#[test]
fn tables_are_preserved_verbatim_through_rebuild() {
    let bytes = corpus_font_bytes(&corpus_paths()[0]);
    let font = FontFile::parse(&bytes).unwrap();
    let rebuilt = FontFile::parse(&font.with_cmap(font.cmap().clone()).unwrap().to_bytes().unwrap()).unwrap();
    for record in font.directory() {
        if record.tag == Tag::CMAP || record.tag == Tag::HEAD {
            continue; // cmap is re-encoded; head's adjustment moves
        }
        assert_eq!(
            font.table(record.tag).unwrap(),
            rebuilt.table(record.tag).unwrap(),
            "table {} changed",
            record.tag
        );
    }
}
