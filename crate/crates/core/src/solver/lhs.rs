//! Latin hypercube sampling.

use crate::params::{AgingParameters, AgingRanges};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` points in the box `ranges`: each axis is cut into `n` equal strata and
/// every stratum holds exactly one point.
pub fn latin_hypercube<R: Rng>(n: usize, ranges: &[(f64, f64)], rng: &mut R) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; ranges.len()]; n];
    for (d, &(lo, hi)) in ranges.iter().enumerate() {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (point, s) in points.iter_mut().zip(strata) {
            let u: f64 = rng.gen();
            point[d] = lo + (hi - lo) * (s as f64 + u) / n as f64;
        }
    }
    points
}

/// Independent aging coordinates `[eps_s_neg, eps_s_pos, x100_neg, x0_pos]`.
pub fn latin_hypercube_sample(n: usize, ranges: &AgingRanges, seed: u64) -> Vec<[f64; 4]> {
    let r = &ranges.0;
    let axes = [
        r[AgingParameters::EPS_S_NEG],
        r[AgingParameters::EPS_S_POS],
        r[AgingParameters::X100_NEG],
        r[AgingParameters::X0_POS],
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    latin_hypercube(n, &axes, &mut rng)
        .into_iter()
        .map(|p| [p[0], p[1], p[2], p[3]])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hundred_points_fill_ten_bins_evenly() {
        let ranges = AgingRanges::default();
        let pts = latin_hypercube_sample(100, &ranges, 7);
        for d in 0..4 {
            let (lo, hi) = [ranges.0[0], ranges.0[1], ranges.0[2], ranges.0[5]][d];
            let mut bins = [0; 10];
            for p in &pts {
                let b = (((p[d] - lo) / (hi - lo)) * 10.0).floor() as usize;
                bins[b.min(9)] += 1;
            }
            assert_eq!(bins, [10; 10], "axis {d}");
        }
    }

    #[test]
    fn single_point_stays_in_range() {
        let ranges = AgingRanges::default();
        let p = latin_hypercube_sample(1, &ranges, 3)[0];
        assert!(p[0] >= 0.45 && p[0] <= 0.54);
        assert!(p[3] >= 0.70 && p[3] <= 0.90);
    }

    #[test]
    fn seed_determines_sample() {
        let ranges = AgingRanges::default();
        assert_eq!(latin_hypercube_sample(50, &ranges, 11), latin_hypercube_sample(50, &ranges, 11));
        assert_ne!(latin_hypercube_sample(50, &ranges, 11), latin_hypercube_sample(50, &ranges, 12));
    }

    proptest! {
        #[test]
        fn one_point_per_stratum(n in 1usize..200, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts = latin_hypercube(n, &[(0.0, 1.0), (-2.0, 3.0)], &mut rng);
            for (d, (lo, hi)) in [(0.0, 1.0), (-2.0, 3.0)].into_iter().enumerate() {
                let mut seen = vec![false; n];
                for p in &pts {
                    let s = (((p[d] - lo) / (hi - lo)) * n as f64).floor() as usize;
                    let s = s.min(n - 1);
                    prop_assert!(!seen[s]);
                    seen[s] = true;
                }
            }
        }
    }
}
