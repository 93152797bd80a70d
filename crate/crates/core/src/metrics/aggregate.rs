use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Mean and sample SD of per-group means (e.g. participants).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupedMeanSd {
    pub mean: f64,
    /// 0 when there is a single group.
    pub sd: f64,
    pub groups: usize,
    pub n: usize,
}

/// Averages within each group first, then reports mean ± SD across groups.
/// `None` for empty input.
pub fn mean_sd_across_groups<K: Ord>(samples: impl IntoIterator<Item = (K, f64)>) -> Option<GroupedMeanSd> {
    let mut by_group: BTreeMap<K, (f64, usize)> = BTreeMap::new();
    let mut n = 0;
    for (k, v) in samples {
        let e = by_group.entry(k).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
        n += 1;
    }
    if by_group.is_empty() {
        return None;
    }
    let means: Vec<f64> = by_group.values().map(|(s, c)| s / *c as f64).collect();
    let mean = crate::stats::mean(&means)?;
    let sd = crate::stats::sample_sd(&means);
    Some(GroupedMeanSd {
        mean,
        sd,
        groups: means.len(),
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_are_averaged_first() {
        // Group a: mean 2, group b: mean 6 (single sample).
        let r = mean_sd_across_groups([("a", 1.0), ("a", 3.0), ("b", 6.0)]).unwrap();
        assert_eq!(r.mean, 4.0);
        assert!((r.sd - 8f64.sqrt()).abs() < 1e-12);
        assert_eq!((r.groups, r.n), (2, 3));
        assert!(mean_sd_across_groups(Vec::<(u8, f64)>::new()).is_none());
        assert_eq!(mean_sd_across_groups([(1, 5.0)]).unwrap().sd, 0.0);
    }
}
