//! sfnt checksum arithmetic.
//!
//! Every table checksum is the wrapping sum of the table read as big-endian
//! u32 words, zero-padded to a four-byte multiple. The whole-file constant
//! is 0xB1B0AFBA: `head.checkSumAdjustment` is chosen so the file sums to it.

/// Magic constant the whole file must sum to once the adjustment is applied.
pub const CHECKSUM_MAGIC: u32 = 0xB1B0_AFBA;

/// Offset of `checkSumAdjustment` inside the `head` table.
pub const HEAD_ADJUSTMENT_OFFSET: usize = 8;

/// Wrapping big-endian u32 word sum over `bytes`, zero-padded at the tail.
pub fn table_checksum(bytes: &[u8]) -> u32 {
    let mut sum = 0u32;
    let mut chunks = bytes.chunks_exact(4);
    for word in &mut chunks {
        sum = sum.wrapping_add(u32::from_be_bytes([word[0], word[1], word[2], word[3]]));
    }
    let rest = chunks.remainder();
    if !rest.is_empty() {
        let mut tail = [0u8; 4];
        tail[..rest.len()].copy_from_slice(rest);
        sum = sum.wrapping_add(u32::from_be_bytes(tail));
    }
    sum
}

/// Checksum of a `head` table with its adjustment field treated as zero.
pub fn head_checksum(head: &[u8]) -> u32 {
    let mut sum = table_checksum(head);
    if head.len() >= HEAD_ADJUSTMENT_OFFSET + 4 {
        let adj = u32::from_be_bytes([head[8], head[9], head[10], head[11]]);
        sum = sum.wrapping_sub(adj);
    }
    sum
}

/// Adjustment value for a complete file whose stored adjustment is zero
/// (or has been subtracted out by the caller).
pub fn checksum_adjustment(file_sum_with_zero_adjustment: u32) -> u32 {
    CHECKSUM_MAGIC.wrapping_sub(file_sum_with_zero_adjustment)
}
