use crate::error::{Error, Result};

use super::SpeedProfile;

/// Unconstrained DTW cost with absolute-difference local cost.
///
/// Steps are match, insertion and deletion over the full alignment lattice.
pub fn dtw_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::invalid("DTW needs two non-empty sequences"));
    }
    let m = y.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut curr = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for &xi in x {
        curr[0] = f64::INFINITY;
        for j in 1..=m {
            let best = prev[j - 1].min(prev[j]).min(curr[j - 1]);
            curr[j] = (xi - y[j - 1]).abs() + best;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[m])
}

/// Linear resampling of `values` onto `len` evenly spaced positions.
pub fn resample_linear(values: &[f64], len: usize) -> Vec<f64> {
    match (values.len(), len) {
        (_, 0) | (0, _) => Vec::new(),
        (1, _) => vec![values[0]; len],
        (_, 1) => vec![values[0]],
        (n, _) => (0..len)
            .map(|i| {
                let pos = i as f64 * (n - 1) as f64 / (len - 1) as f64;
                let lo = (pos.floor() as usize).min(n - 2);
                let frac = pos - lo as f64;
                values[lo] + (values[lo + 1] - values[lo]) * frac
            })
            .collect(),
    }
}

/// The cluster profile closest to `test` under DTW, stretched to the test length.
///
/// Ties go to the lexicographically lowest voyage id. The returned profile
/// carries the test voyage's id.
pub fn predict_1nn_dtw(test: &SpeedProfile, cluster: &[SpeedProfile]) -> Result<SpeedProfile> {
    let mut best: Option<(f64, &SpeedProfile)> = None;
    for cand in cluster {
        let d = dtw_distance(test.sog(), cand.sog())?;
        let better = match best {
            None => true,
            Some((bd, bp)) => d < bd || (d == bd && cand.voyage_id < bp.voyage_id),
        };
        if better {
            best = Some((d, cand));
        }
    }
    let (_, nearest) =
        best.ok_or_else(|| Error::InsufficientData("1NN-DTW cluster is empty".into()))?;
    SpeedProfile::new(
        test.voyage_id.clone(),
        resample_linear(nearest.sog(), test.len()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exponential-time recursive definition.
    fn dtw_recursive(x: &[f64], y: &[f64]) -> f64 {
        fn go(x: &[f64], y: &[f64], i: usize, j: usize) -> f64 {
            let c = (x[i] - y[j]).abs();
            match (i, j) {
                (0, 0) => c,
                (0, _) => c + go(x, y, 0, j - 1),
                (_, 0) => c + go(x, y, i - 1, 0),
                _ => {
                    c + go(x, y, i - 1, j - 1)
                        .min(go(x, y, i - 1, j))
                        .min(go(x, y, i, j - 1))
                }
            }
        }
        go(x, y, x.len() - 1, y.len() - 1)
    }

    #[test]
    fn reference_values() {
        assert_eq!(
            dtw_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(),
            0.0
        );
        assert_eq!(
            dtw_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 2.0, 3.0]).unwrap(),
            0.0
        );
        assert_eq!(dtw_distance(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 2.0);
    }

    #[test]
    fn matches_recursive_on_small_cases() {
        let xs: [&[f64]; 4] = [
            &[0.0],
            &[1.0, 2.0, 0.0],
            &[2.0, 2.0, 1.0, 0.0],
            &[0.0, 1.0, 0.0, 1.0, 2.0],
        ];
        for x in xs {
            for y in xs {
                assert_eq!(dtw_distance(x, y).unwrap(), dtw_recursive(x, y));
            }
        }
    }

    #[test]
    fn empty_sequence_rejected() {
        assert!(matches!(
            dtw_distance(&[], &[1.0]),
            Err(Error::InvalidInput(_))
        ));
    }

    fn profile(id: &str, v: Vec<f64>) -> SpeedProfile {
        SpeedProfile::new(id, v).unwrap()
    }

    #[test]
    fn exact_member_is_returned() {
        let member = profile("b", vec![3.0, 4.0, 5.0, 4.0]);
        let cluster = vec![profile("a", vec![1.0; 6]), member.clone()];
        let out = predict_1nn_dtw(&profile("t", member.sog().to_vec()), &cluster).unwrap();
        assert_eq!(out.sog(), member.sog());
        assert_eq!(out.voyage_id, "t");
    }

    #[test]
    fn nearest_level_wins() {
        let cluster = vec![profile("a", vec![3.0; 10]), profile("b", vec![5.0; 10])];
        let out = predict_1nn_dtw(&profile("t", vec![4.9; 10]), &cluster).unwrap();
        assert_eq!(out.sog(), &[5.0; 10]);
    }

    #[test]
    fn tie_goes_to_lowest_id() {
        let cluster = vec![profile("z", vec![5.0; 4]), profile("m", vec![3.0; 4])];
        let out = predict_1nn_dtw(&profile("t", vec![4.0; 4]), &cluster).unwrap();
        assert_eq!(out.sog(), &[3.0; 4]);
    }

    #[test]
    fn output_stretched_to_test_length() {
        let cluster = vec![profile("a", vec![0.0, 2.0])];
        let out = predict_1nn_dtw(&profile("t", vec![1.0; 5]), &cluster).unwrap();
        assert_eq!(out.sog(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn empty_cluster() {
        assert!(matches!(
            predict_1nn_dtw(&profile("t", vec![1.0]), &[]),
            Err(Error::InsufficientData(_))
        ));
    }
}
