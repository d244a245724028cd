//! Random-labeling tests: marks are permuted over fixed locations and the
//! centred statistic `T(r) = L̂(r) − L_H0(r)` is compared with its permutation
//! distribution, pointwise and through the extreme rank length ordering.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::karcher::KarcherOptions;
use crate::pointprocess::{KOptions, MarkContext, MarkedPattern, SpatialContext};
use crate::registration::SymmetryGroup;
use crate::rng;

/// Smallest permutation count accepted.
pub const MIN_PERMUTATIONS: usize = 19;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeOptions {
    /// Number of permutations `s`.
    pub permutations: usize,
    pub alpha: f64,
    pub seed: u64,
    pub k: KOptions,
    pub karcher: KarcherOptions,
}

impl Default for EnvelopeOptions {
    fn default() -> Self {
        Self {
            permutations: 2499,
            alpha: 0.05,
            seed: 0,
            k: KOptions::default(),
            karcher: KarcherOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeResult {
    pub group: SymmetryGroup,
    pub r_grid: Vec<f64>,
    /// Ground-process `L̂`, the null reference.
    pub l_h0: Vec<f64>,
    pub t_observed: Vec<f64>,
    pub t_permuted: Vec<Vec<f64>>,
    pub alpha: f64,
    pub pointwise_lo: Vec<f64>,
    pub pointwise_hi: Vec<f64>,
    /// The pointwise bounds mapped to the K scale, `π(T + L_H0)²`.
    pub k_lo: Vec<f64>,
    pub k_hi: Vec<f64>,
    pub k_observed: Vec<f64>,
    pub deviation_proportion: f64,
    pub erl_p: f64,
    pub s: usize,
    pub seed: u64,
    pub c_f: f64,
    pub bandwidth: f64,
}

/// Pointwise order-statistic band and the share of radii where `t_obs` leaves it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseEnvelope {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub deviation_proportion: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn check_ensemble(t_obs: &[f64], t_perm: &[Vec<f64>]) -> Result<()> {
    if t_perm.is_empty() {
        return Err(Error::InvalidArgument("no permutation curves".into()));
    }
    if let Some(bad) = t_perm.iter().find(|c| c.len() != t_obs.len()) {
        return Err(Error::InvalidArgument(format!(
            "permutation curve has {} radii, observed has {}",
            bad.len(),
            t_obs.len()
        )));
    }
    Ok(())
}

/// Order index `k = max(1, ⌊α/2·(s+1)⌋)`: the band is the `k`-th smallest and
/// `k`-th largest permuted value at each radius.
pub fn envelope_rank(alpha: f64, s: usize) -> usize {
    (((alpha / 2.0) * (s + 1) as f64).floor() as usize).clamp(1, s.max(1))
}

pub fn pointwise_envelope(t_obs: &[f64], t_perm: &[Vec<f64>], alpha: f64) -> Result<PointwiseEnvelope> {
    check_alpha(alpha)?;
    check_ensemble(t_obs, t_perm)?;
    let s = t_perm.len();
    let k = envelope_rank(alpha, s);
    let mut lo = Vec::with_capacity(t_obs.len());
    let mut hi = Vec::with_capacity(t_obs.len());
    let mut column = vec![0.0; s];
    let mut outside = 0usize;
    for (r, &obs) in t_obs.iter().enumerate() {
        for (c, curve) in column.iter_mut().zip(t_perm) {
            *c = curve[r];
        }
        column.sort_by(f64::total_cmp);
        let l = column[k - 1];
        let h = column[s - k];
        if obs < l || obs > h {
            outside += 1;
        }
        lo.push(l);
        hi.push(h);
    }
    Ok(PointwiseEnvelope {
        lo,
        hi,
        deviation_proportion: if t_obs.is_empty() {
            0.0
        } else {
            outside as f64 / t_obs.len() as f64
        },
    })
}

/// Two-sided pointwise ranks of every curve in `curves`, each sorted ascending.
pub fn sorted_rank_vectors(curves: &[&[f64]]) -> Vec<Vec<usize>> {
    let m = curves.len();
    let nr = curves.first().map_or(0, |c| c.len());
    let mut ranks = vec![Vec::with_capacity(nr); m];
    let mut column = vec![0.0; m];
    for r in 0..nr {
        for (c, curve) in column.iter_mut().zip(curves) {
            *c = curve[r];
        }
        column.sort_by(f64::total_cmp);
        for (i, curve) in curves.iter().enumerate() {
            let v = curve[r];
            let le = column.partition_point(|x| x.total_cmp(&v) != Ordering::Greater);
            let lt = column.partition_point(|x| x.total_cmp(&v) == Ordering::Less);
            ranks[i].push(le.min(m - lt));
        }
    }
    for v in &mut ranks {
        v.sort_unstable();
    }
    ranks
}

/// Extreme-rank-length p-value of `t_obs` among `{t_obs} ∪ t_perm`: the share of
/// curves whose sorted rank vector is lexicographically no larger than that of `t_obs`.
pub fn global_erl_p(t_obs: &[f64], t_perm: &[Vec<f64>]) -> Result<f64> {
    check_ensemble(t_obs, t_perm)?;
    let mut curves: Vec<&[f64]> = Vec::with_capacity(t_perm.len() + 1);
    curves.push(t_obs);
    curves.extend(t_perm.iter().map(|c| c.as_slice()));
    let ranks = sorted_rank_vectors(&curves);
    let obs = &ranks[0];
    let count = ranks.iter().filter(|r| r.as_slice() <= obs.as_slice()).count();
    Ok(count as f64 / curves.len() as f64)
}

/// Uniform permutation number `index` of `0..n` under `seed`.
pub fn permutation(seed: u64, index: usize, n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::stream(seed, &[index as u64]));
    perm
}

/// Full random-labeling test from prepared contexts.
pub fn envelope_test(spatial: &SpatialContext, marks: &MarkContext, opts: &EnvelopeOptions) -> Result<EnvelopeResult> {
    if opts.permutations < MIN_PERMUTATIONS {
        return Err(Error::InvalidArgument(format!(
            "at least {MIN_PERMUTATIONS} permutations are required, got {}",
            opts.permutations
        )));
    }
    check_alpha(opts.alpha)?;
    let l_h0 = spatial.ground_k().l_values;
    let observed = spatial.mark_weighted_k(marks)?;
    let centred = |l: &[f64]| -> Vec<f64> { l.iter().zip(&l_h0).map(|(a, b)| a - b).collect() };
    let t_observed = centred(&observed.l_values);
    let n = spatial.len();
    let t_permuted: Vec<Vec<f64>> = (0..opts.permutations)
        .into_par_iter()
        .map(|k| {
            let perm = permutation(opts.seed, k, n);
            spatial.permuted_k(marks, &perm).map(|e| centred(&e.l_values))
        })
        .collect::<Result<_>>()?;

    let band = pointwise_envelope(&t_observed, &t_permuted, opts.alpha)?;
    let erl_p = global_erl_p(&t_observed, &t_permuted)?;
    let to_k = |t: &[f64]| -> Vec<f64> {
        t.iter()
            .zip(&l_h0)
            .map(|(t, l)| std::f64::consts::PI * (t + l).max(0.0).powi(2))
            .collect()
    };
    Ok(EnvelopeResult {
        group: marks.group(),
        r_grid: spatial.r_grid().to_vec(),
        k_lo: to_k(&band.lo),
        k_hi: to_k(&band.hi),
        k_observed: observed.k_values,
        l_h0,
        t_observed,
        t_permuted,
        alpha: opts.alpha,
        pointwise_lo: band.lo,
        pointwise_hi: band.hi,
        deviation_proportion: band.deviation_proportion,
        erl_p,
        s: opts.permutations,
        seed: opts.seed,
        c_f: marks.c_f(),
        bandwidth: spatial.bandwidth(),
    })
}

/// Random-labeling test of `pattern` under `group`.
pub fn permutation_statistics(
    pattern: &MarkedPattern,
    group: SymmetryGroup,
    r_grid: &[f64],
    opts: &EnvelopeOptions,
) -> Result<EnvelopeResult> {
    if opts.permutations < MIN_PERMUTATIONS {
        return Err(Error::InvalidArgument(format!(
            "at least {MIN_PERMUTATIONS} permutations are required, got {}",
            opts.permutations
        )));
    }
    let spatial = SpatialContext::for_pattern(pattern, r_grid, &opts.k)?;
    let marks = MarkContext::new(pattern.marks(), group, None, &opts.karcher)?;
    envelope_test(&spatial, &marks, opts)
}

impl EnvelopeResult {
    /// Recomputes the pointwise band at another level.
    pub fn pointwise(&self, alpha: f64) -> Result<PointwiseEnvelope> {
        pointwise_envelope(&self.t_observed, &self.t_permuted, alpha)
    }

    pub fn global_p(&self) -> Result<f64> {
        global_erl_p(&self.t_observed, &self.t_permuted)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_ranks(curves: &[Vec<f64>]) -> Vec<Vec<usize>> {
        let nr = curves[0].len();
        curves
            .iter()
            .map(|c| {
                let mut v: Vec<usize> = (0..nr)
                    .map(|r| {
                        let le = curves.iter().filter(|o| o[r] <= c[r]).count();
                        let ge = curves.iter().filter(|o| o[r] >= c[r]).count();
                        le.min(ge)
                    })
                    .collect();
                v.sort();
                v
            })
            .collect()
    }

    fn lex_le(a: &[usize], b: &[usize]) -> bool {
        for (x, y) in a.iter().zip(b) {
            if x != y {
                return x < y;
            }
        }
        true
    }

    #[test]
    fn envelope_rank_rule() {
        assert_eq!(envelope_rank(0.05, 2499), 62);
        assert_eq!(envelope_rank(0.05, 19), 1);
        assert_eq!(envelope_rank(0.05, 499), 12);
    }

    #[test]
    fn three_curve_toy_band() {
        let perm = vec![vec![3.0, 0.0], vec![1.0, 5.0], vec![2.0, -1.0]];
        let env = pointwise_envelope(&[2.0, 9.0], &perm, 0.5).unwrap();
        // k = max(1, ⌊0.25·4⌋) = 1: min and max of each column
        assert_eq!(env.lo, vec![1.0, -1.0]);
        assert_eq!(env.hi, vec![3.0, 5.0]);
        assert_eq!(env.deviation_proportion, 0.5);
    }

    #[test]
    fn median_inside_and_extreme_outside() {
        let perm: Vec<Vec<f64>> = (0..19).map(|k| vec![k as f64, -(k as f64)]).collect();
        let env = pointwise_envelope(&[9.0, -9.0], &perm, 0.05).unwrap();
        assert_eq!(env.deviation_proportion, 0.0);
        let env = pointwise_envelope(&[100.0, 100.0], &perm, 0.05).unwrap();
        assert_eq!(env.deviation_proportion, 1.0);
        assert_eq!(global_erl_p(&[100.0, 100.0], &perm).unwrap(), 1.0 / 20.0);
    }

    #[test]
    fn tied_curve_counts_both() {
        let perm = vec![vec![5.0, 5.0], vec![1.0, 2.0], vec![2.0, 3.0], vec![3.0, 1.0]];
        // sorted ranks: obs [2,2], tie [2,2], [1,2], [2,3], [1,3]
        let p = global_erl_p(&[5.0, 5.0], &perm).unwrap();
        assert_eq!(p, 4.0 / 5.0);
        let alone = global_erl_p(&[5.0, 5.0], &perm[1..]).unwrap();
        // without the tie obs is uniquely extreme at both radii
        assert_eq!(alone, 1.0 / 4.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(pointwise_envelope(&[1.0], &[vec![1.0]], 0.0).is_err());
        assert!(pointwise_envelope(&[1.0], &[], 0.05).is_err());
        assert!(global_erl_p(&[1.0, 2.0], &[vec![1.0]]).is_err());
    }

    #[test]
    fn permutations_are_reproducible() {
        let a = permutation(3, 7, 20);
        assert_eq!(a, permutation(3, 7, 20));
        assert_ne!(a, permutation(3, 8, 20));
        let mut sorted = a.clone();
        sorted.sort();
        assert_eq!(sorted, (0..20).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn erl_matches_brute_force(
            s in 1usize..7,
            nr in 1usize..6,
            raw in proptest::collection::vec(0u8..4, 42),
        ) {
            let curves: Vec<Vec<f64>> = (0..=s)
                .map(|i| (0..nr).map(|r| raw[i * 6 + r] as f64).collect())
                .collect();
            let ranks = brute_ranks(&curves);
            let expected = ranks.iter().filter(|r| lex_le(r, &ranks[0])).count() as f64 / (s + 1) as f64;
            let p = global_erl_p(&curves[0], &curves[1..]).unwrap();
            prop_assert_eq!(p, expected);
            prop_assert!(p >= 1.0 / (s + 1) as f64 && p <= 1.0);
        }

        #[test]
        fn erl_ignores_order_of_permutation_curves(
            raw in proptest::collection::vec(-3i8..3, 40),
            rot in 0usize..7,
        ) {
            let curves: Vec<Vec<f64>> = raw.chunks(5).map(|c| c.iter().map(|&v| v as f64).collect()).collect();
            let mut perm = curves[1..].to_vec();
            let p = global_erl_p(&curves[0], &perm).unwrap();
            perm.rotate_left(rot);
            perm.reverse();
            prop_assert_eq!(global_erl_p(&curves[0], &perm).unwrap(), p);
        }

        #[test]
        fn band_matches_direct_sort(
            raw in proptest::collection::vec(-100i32..100, 60),
            alpha in 0.01f64..0.5,
        ) {
            let perm: Vec<Vec<f64>> = raw.chunks(3).map(|c| c.iter().map(|&v| v as f64).collect()).collect();
            let obs = vec![0.0, 50.0, -75.0];
            let env = pointwise_envelope(&obs, &perm, alpha).unwrap();
            let s = perm.len();
            let k = ((alpha / 2.0 * (s + 1) as f64).floor() as usize).max(1);
            let mut outside = 0;
            for r in 0..3 {
                let mut col: Vec<f64> = perm.iter().map(|c| c[r]).collect();
                col.sort_by(|a, b| a.partial_cmp(b).unwrap());
                prop_assert_eq!(env.lo[r], col[k - 1]);
                prop_assert_eq!(env.hi[r], col[s - k]);
                prop_assert!(env.lo[r] <= env.hi[r]);
                if obs[r] < col[k - 1] || obs[r] > col[s - k] { outside += 1; }
            }
            prop_assert_eq!(env.deviation_proportion, outside as f64 / 3.0);
        }

        #[test]
        fn deviation_is_invariant_to_radius_reordering(
            raw in proptest::collection::vec(-10i32..10, 100),
            obs in proptest::collection::vec(-10i32..10, 5),
        ) {
            let perm: Vec<Vec<f64>> = raw.chunks(5).map(|c| c.iter().map(|&v| v as f64).collect()).collect();
            let obs: Vec<f64> = obs.iter().map(|&v| v as f64).collect();
            let a = pointwise_envelope(&obs, &perm, 0.1).unwrap();
            let order = [3usize, 0, 4, 1, 2];
            let re = |c: &[f64]| order.iter().map(|&i| c[i]).collect::<Vec<f64>>();
            let b = pointwise_envelope(&re(&obs), &perm.iter().map(|c| re(c)).collect::<Vec<_>>(), 0.1).unwrap();
            prop_assert_eq!(a.deviation_proportion, b.deviation_proportion);
        }
    }
}
