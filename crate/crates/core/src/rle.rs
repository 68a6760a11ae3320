//! Uncompressed COCO run-length encoding: column-major runs, starting with a
//! (possibly empty) background run.

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

pub fn decode_rle(counts: &[u64], height: usize, width: usize) -> Result<BinaryMask> {
    let total: u64 = counts.iter().sum();
    if total != (height * width) as u64 {
        return Err(Error::Format(format!(
            "RLE counts sum to {total}, expected {}",
            height * width
        )));
    }
    let mut mask = BinaryMask::new(height, width);
    let mut idx = 0usize;
    for (run, &len) in counts.iter().enumerate() {
        let len = len as usize;
        if run % 2 == 1 {
            for i in idx..idx + len {
                mask.set(i % height, i / height, true);
            }
        }
        idx += len;
    }
    Ok(mask)
}

/// Canonical encoding: the only zero-length run that can appear is the
/// leading background run.
pub fn encode_rle(mask: &BinaryMask) -> Vec<u64> {
    let (height, width) = mask.dims();
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u64;
    for c in 0..width {
        for r in 0..height {
            let v = mask.get(r, c);
            if v != current {
                counts.push(run);
                run = 0;
                current = v;
            }
            run += 1;
        }
    }
    if run > 0 || counts.is_empty() {
        counts.push(run);
    }
    counts
}

/// Foreground pixel count straight from the counts.
pub fn rle_area(counts: &[u64]) -> u64 {
    counts.iter().skip(1).step_by(2).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decode_column_major() {
        let m = decode_rle(&[1, 2, 1], 2, 2).unwrap();
        assert_eq!(m, BinaryMask::from_pixels(2, 2, &[(1, 0), (0, 1)]));
    }

    #[test]
    fn decode_single_runs() {
        assert!(decode_rle(&[12], 3, 4).unwrap().is_empty());
        assert_eq!(decode_rle(&[0, 12], 3, 4).unwrap().count(), 12);
    }

    #[test]
    fn decode_sum_mismatch() {
        assert!(matches!(decode_rle(&[1, 2], 2, 2), Err(Error::Format(_))));
    }

    #[test]
    fn encode_uniform() {
        assert_eq!(encode_rle(&BinaryMask::new(3, 3)), vec![9]);
        let full = BinaryMask::from_fn(3, 3, |_, _| true);
        assert_eq!(encode_rle(&full), vec![0, 9]);
        assert_eq!(encode_rle(&BinaryMask::new(0, 0)), vec![0]);
    }

    #[test]
    fn area_from_counts() {
        assert_eq!(rle_area(&[1, 2, 1]), 2);
        assert_eq!(rle_area(&[0, 4, 3, 2]), 6);
    }

    fn arb_mask() -> impl Strategy<Value = BinaryMask> {
        (1usize..20, 1usize..20).prop_flat_map(|(h, w)| {
            proptest::collection::vec(any::<bool>(), h * w)
                .prop_map(move |bits| BinaryMask::from_bits(h, w, bits).unwrap())
        })
    }

    proptest! {
        #[test]
        fn round_trip(mask in arb_mask()) {
            let counts = encode_rle(&mask);
            prop_assert_eq!(decode_rle(&counts, mask.height(), mask.width()).unwrap(), mask);
            // canonical: no interior empty runs
            prop_assert!(counts.iter().skip(1).all(|&c| c > 0));
        }
    }
}
