//! Shared fixtures for the integration suites.

use std::path::{Path, PathBuf};

/// Production fonts checked into testdata. All are DejaVu faces
/// (Bitstream Vera license, see testdata/corpus/LICENSE).
pub fn corpus_paths() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("testdata/corpus");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .expect("corpus directory exists")
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "ttf"))
        .collect();
    paths.sort();
    paths
}

pub fn corpus_font_bytes(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("read {path:?}: {e}"))
}

/// Checksum verifier written independently of the library's serializer: it
/// accumulates byte-by-byte with explicit shifts instead of word chunks,
/// and re-derives every directory field from the raw file.
pub fn verify_checksums_independently(file: &[u8]) -> Result<(), String> {
    fn sum_region(file: &[u8], start: usize, len: usize, skip: Option<usize>) -> u32 {
        let padded = len.div_ceil(4) * 4;
        let mut total: u32 = 0;
        let mut word: u32 = 0;
        for i in 0..padded {
            let at = start + i;
            let byte = if skip.is_some_and(|s| (s..s + 4).contains(&at)) {
                0
            } else {
                *file.get(at).unwrap_or(&0)
            };
            word = (word << 8) | byte as u32;
            if i % 4 == 3 {
                total = total.wrapping_add(word);
                word = 0;
            }
        }
        total
    }

    if file.len() < 12 {
        return Err("file too short".into());
    }
    let num_tables = u16::from_be_bytes([file[4], file[5]]) as usize;
    let mut head_adj_at: Option<usize> = None;
    let mut entries = Vec::new();
    for i in 0..num_tables {
        let at = 12 + i * 16;
        let tag = &file[at..at + 4];
        let stored = u32::from_be_bytes([file[at + 4], file[at + 5], file[at + 6], file[at + 7]]);
        let offset =
            u32::from_be_bytes([file[at + 8], file[at + 9], file[at + 10], file[at + 11]]) as usize;
        let length =
            u32::from_be_bytes([file[at + 12], file[at + 13], file[at + 14], file[at + 15]])
                as usize;
        if offset + length > file.len() {
            return Err(format!("table {:?} out of bounds", String::from_utf8_lossy(tag)));
        }
        if tag == b"head" {
            head_adj_at = Some(offset + 8);
        }
        entries.push((tag.to_vec(), stored, offset, length));
    }
    for (tag, stored, offset, length) in &entries {
        let skip = if tag == b"head" { head_adj_at } else { None };
        let computed = sum_region(file, *offset, *length, skip);
        if computed != *stored {
            return Err(format!(
                "table {:?}: stored {stored:#010x} != computed {computed:#010x}",
                String::from_utf8_lossy(tag)
            ));
        }
    }
    if let Some(adj_at) = head_adj_at {
        let stored_adj =
            u32::from_be_bytes([file[adj_at], file[adj_at + 1], file[adj_at + 2], file[adj_at + 3]]);
        let file_sum = sum_region(file, 0, file.len(), Some(adj_at));
        let expected = 0xB1B0_AFBAu32.wrapping_sub(file_sum);
        if expected != stored_adj {
            return Err(format!(
                "checkSumAdjustment: stored {stored_adj:#010x} != expected {expected:#010x}"
            ));
        }
    }
    Ok(())
}
