//! Property tests over the remapping and classification kernels.

use proptest::prelude::*;

use glyphforge::analysis;
use glyphforge::font::{CmapSegmentTable, CodePoint};
use glyphforge::forge::{apply_plan, RemapPlan};
use glyphforge::sensitivity::{self, DataType};
use glyphforge::synth::SynthFont;

/// Random sorted, non-overlapping delta segments below the terminator.
fn arb_delta_segments() -> impl Strategy<Value = Vec<(u16, u16, u16)>> {
    proptest::collection::vec((0u16..0xFFF0, 0u16..40, proptest::num::u16::ANY), 1..12).prop_map(
        |raw| {
            let mut segments: Vec<(u16, u16, u16)> = Vec::new();
            let mut next_start = 0u16;
            for (start_seed, span, delta) in raw {
                let start = next_start.saturating_add(start_seed % 512).min(0xFFF0);
                let end = start.saturating_add(span % 40).min(0xFFF0);
                if start < next_start || segments.len() >= 12 {
                    continue;
                }
                segments.push((start, end, delta));
                if end >= 0xFFEF {
                    break;
                }
                next_start = end + 1;
            }
            if segments.is_empty() {
                segments.push((0x20, 0x7E, 3));
            }
            segments
        },
    )
}

proptest! {
    /// Encoding and re-decoding a segment table preserves the mapping for
    /// every BMP code (checked on a sampled grid plus all segment edges).
    #[test]
    fn cmap_encode_decode_preserves_resolution(segments in arb_delta_segments()) {
        let table = CmapSegmentTable::from_delta_segments(segments.clone()).unwrap();
        let decoded = CmapSegmentTable::decode(&table.encode().unwrap()).unwrap();
        let mut probes: Vec<u16> = (0..=u16::MAX).step_by(251).collect();
        for (start, end, _) in &segments {
            probes.extend([start.saturating_sub(1), *start, *end, end.saturating_add(1)]);
        }
        for code in probes {
            prop_assert_eq!(decoded.resolve(CodePoint(code)), table.resolve(CodePoint(code)));
        }
        prop_assert_eq!(decoded.segments(), table.segments());
    }

    /// A plan derived from a per-character permutation cipher always
    /// applies, and the forged font maps payload to the decoy's glyphs.
    #[test]
    fn permutation_cipher_plans_apply_cleanly(perm_seed in 0u64..1000, len in 1usize..40) {
        // Build a deterministic permutation of a-z from the seed.
        let mut alphabet: Vec<char> = ('a'..='z').collect();
        let mut state = perm_seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        for i in (1..alphabet.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (state >> 33) as usize % (i + 1);
            alphabet.swap(i, j);
        }
        let payload: String = (0..len).map(|i| (b'a' + (i % 26) as u8) as char).collect();
        let decoy: String = payload
            .chars()
            .map(|c| alphabet[(c as u8 - b'a') as usize])
            .collect();

        let font = SynthFont::new(96).segment(0x0020, 0x007a, 0xffe4).build_font().unwrap();
        let plan = RemapPlan::from_decoy(&payload, &decoy).unwrap()
            .with_preserve_segment_count(false);
        let forged = apply_plan(&font, &plan).unwrap().font;
        for (p, d) in payload.chars().zip(decoy.chars()) {
            prop_assert_eq!(
                forged.resolve(CodePoint(p as u16)),
                font.resolve(CodePoint(d as u16))
            );
        }
        // Non-interference outside the plan sources.
        for code in (0u16..=0xFFFF).step_by(37) {
            if plan.target_of(CodePoint(code)).is_some() {
                continue;
            }
            prop_assert_eq!(forged.resolve(CodePoint(code)), font.resolve(CodePoint(code)));
        }
    }

    /// Sixteen-digit strings are tagged as card numbers exactly when they
    /// pass the Luhn check.
    #[test]
    fn luhn_gates_credit_card_detection(digits in proptest::collection::vec(0u8..10, 16)) {
        let number: String = digits.iter().map(|d| (b'0' + d) as char).collect();
        let text = format!("card {number} on file");
        let tagged = sensitivity::detect_types(&text)
            .iter()
            .any(|d| d.data_type == DataType::CreditCardNumber);
        prop_assert_eq!(tagged, sensitivity::luhn_valid(&number));
    }

    /// Trailing moving averages agree with per-window re-summation.
    #[test]
    fn moving_average_matches_naive(series in proptest::collection::vec(0.0f64..1.0, 5..30),
                                     window in 2usize..=5) {
        let smoothed = analysis::moving_average(&series, window).unwrap();
        prop_assert_eq!(smoothed.len(), series.len() - window + 1);
        for (i, value) in smoothed.iter().enumerate() {
            let naive: f64 = series[i..i + window].iter().sum::<f64>() / window as f64;
            prop_assert!((value - naive).abs() < 1e-12);
        }
    }

    /// The Wilson interval always contains the observed proportion.
    #[test]
    fn wilson_contains_point_estimate(successes in 0u64..=200, extra in 0u64..200) {
        let n = successes + extra;
        prop_assume!(n > 0);
        let (low, high) = analysis::binomial_ci(successes, n, 0.95f64).unwrap();
        let p = successes as f64 / n as f64;
        prop_assert!(low <= p && p <= high);
        prop_assert!((0.0..=1.0).contains(&low) && (0.0..=1.0).contains(&high));
    }
}
