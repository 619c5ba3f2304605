use rand::Rng;

use crate::error::{Error, Result};

/// Draws the single annotated frame uniformly from `[start, end]`.
pub fn sample_point_annotation(start: usize, end: usize, rng: &mut impl Rng) -> Result<usize> {
    if start > end {
        return Err(Error::invalid(format!(
            "cannot sample a point from ({start}, {end}): start exceeds end"
        )));
    }
    Ok(rng.random_range(start..=end))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn singleton_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        assert_eq!(sample_point_annotation(3, 3, &mut rng).unwrap(), 3);
    }

    #[test]
    fn reversed_interval_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_point_annotation(5, 2, &mut rng).is_err());
    }

    #[test]
    fn seeded_draws_repeat() {
        let a = sample_point_annotation(0, 9, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = sample_point_annotation(0, 9, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
        assert!(a <= 9);
    }

    #[test]
    fn frequencies_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = [0usize; 4];
        let n = 10_000;
        for _ in 0..n {
            counts[sample_point_annotation(2, 5, &mut rng).unwrap() - 2] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() <= 0.03, "{counts:?}");
        }
    }

    proptest! {
        #[test]
        fn draw_stays_inside(start in 0usize..500, len in 0usize..500, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = sample_point_annotation(start, start + len, &mut rng).unwrap();
            prop_assert!(start <= p && p <= start + len);
        }
    }
}
