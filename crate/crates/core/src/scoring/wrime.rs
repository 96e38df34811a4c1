use super::ScoringError;

pub const WRIME_MAX: u8 = 3;
/// An aggregated intensity strictly above this marks the emotion as present.
pub const WRIME_THRESHOLD: f64 = 1.0;

/// Writer/reader intensity aggregate: the mean of the writer's score and the mean
/// reader score.
pub fn aggregate_wrime_intensity(writer: u8, readers: &[u8]) -> Result<f64, ScoringError> {
    if readers.is_empty() {
        return Err(ScoringError::NoReaders);
    }
    if let Some(bad) = std::iter::once(&writer).chain(readers).find(|v| **v > WRIME_MAX) {
        return Err(ScoringError::Intensity(*bad));
    }
    let reader_sum: u32 = readers.iter().map(|&r| u32::from(r)).sum();
    // (w + sum/n) / 2 as one division so the result is correctly rounded
    let n = readers.len() as u64;
    let numerator = u64::from(writer) * n + u64::from(reader_sum);
    Ok(numerator as f64 / (2 * n) as f64)
}

pub fn has_emotion(intensity: f64) -> bool {
    intensity > WRIME_THRESHOLD
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let s = aggregate_wrime_intensity(3, &[2, 2, 2]).unwrap();
        assert_eq!(s, 2.5);
        assert!(has_emotion(s));
        let s = aggregate_wrime_intensity(0, &[0, 0, 0]).unwrap();
        assert_eq!(s, 0.0);
        assert!(!has_emotion(s));
        let s = aggregate_wrime_intensity(1, &[1, 1, 3]).unwrap();
        assert_eq!(s, 4.0 / 3.0);
        assert!(has_emotion(s));
        assert!(!has_emotion(1.0));
    }

    #[test]
    fn errors() {
        assert!(matches!(aggregate_wrime_intensity(4, &[0]), Err(ScoringError::Intensity(4))));
        assert!(matches!(aggregate_wrime_intensity(0, &[0, 9]), Err(ScoringError::Intensity(9))));
        assert!(matches!(aggregate_wrime_intensity(0, &[]), Err(ScoringError::NoReaders)));
    }

    proptest! {
        #[test]
        fn bounded_and_monotone(w in 0u8..=3, rs in proptest::collection::vec(0u8..=3, 1..6), k in 0usize..6) {
            let s = aggregate_wrime_intensity(w, &rs).unwrap();
            prop_assert!((0.0..=3.0).contains(&s));
            if w < 3 {
                prop_assert!(aggregate_wrime_intensity(w + 1, &rs).unwrap() > s);
            }
            let k = k % rs.len();
            if rs[k] < 3 {
                let mut up = rs.clone();
                up[k] += 1;
                prop_assert!(aggregate_wrime_intensity(w, &up).unwrap() > s);
            }
        }
    }
}
