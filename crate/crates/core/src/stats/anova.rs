use serde::Serialize;

use super::StatsError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AnovaResult {
    /// `(SS_between / df_between) / (SS_within / df_within)`. Infinite when the
    /// groups are perfectly separated, NaN when every value is equal.
    pub f_statistic: f64,
    /// `SS_between / SS_total`, 0 when `SS_total = 0`.
    pub eta_squared: f64,
    pub ss_between: f64,
    pub ss_within: f64,
    pub ss_total: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub groups: usize,
    pub n: usize,
}

/// One-way analysis of variance with η² effect size. No p-value is computed.
pub fn one_way_anova<G: AsRef<[f64]>>(groups: &[G]) -> Result<AnovaResult, StatsError> {
    let k = groups.len();
    if k < 2 {
        return Err(StatsError::DegreesOfFreedom(format!("{k} group(s); need at least 2")));
    }
    if groups.iter().any(|g| g.as_ref().is_empty()) {
        return Err(StatsError::Empty);
    }
    let n: usize = groups.iter().map(|g| g.as_ref().len()).sum();
    if n <= k {
        return Err(StatsError::DegreesOfFreedom(format!("{n} samples in {k} groups leaves no within-group freedom")));
    }
    if groups.iter().flat_map(|g| g.as_ref()).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let grand = groups.iter().flat_map(|g| g.as_ref()).sum::<f64>() / n as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let g = g.as_ref();
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ss_between += g.len() as f64 * (m - grand).powi(2);
        ss_within += g.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    let ss_total: f64 = groups.iter().flat_map(|g| g.as_ref()).map(|v| (v - grand).powi(2)).sum();
    let df_between = k - 1;
    let df_within = n - k;
    let f_statistic = (ss_between / df_between as f64) / (ss_within / df_within as f64);
    let eta_squared = if ss_total > 0.0 {
        (ss_between / ss_total).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(AnovaResult {
        f_statistic,
        eta_squared,
        ss_between,
        ss_within,
        ss_total,
        df_between,
        df_within,
        groups: k,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_constant_groups() {
        let r = one_way_anova(&[vec![3.0, 3.0], vec![3.0, 3.0, 3.0]]).unwrap();
        assert_eq!(r.ss_between, 0.0);
        assert_eq!(r.eta_squared, 0.0);
    }

    #[test]
    fn perfect_separation() {
        let r = one_way_anova(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(r.ss_within, 0.0);
        assert_eq!(r.eta_squared, 1.0);
        assert!(r.f_statistic.is_infinite());
    }

    /// Groups {1,2,3}, {4,5,6}, {8,9,10}: grand mean 48/9 = 16/3.
    /// Group means 2, 5, 9 → SS_between = 3[(2-16/3)² + (5-16/3)² + (9-16/3)²]
    /// = 3[100/9 + 1/9 + 121/9] = 74. SS_within = 3 · 2 = 6.
    #[test]
    fn hand_built_sums_of_squares() {
        let r = one_way_anova(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [8.0, 9.0, 10.0]]).unwrap();
        assert!((r.ss_between - 74.0).abs() < 1e-12);
        assert!((r.ss_within - 6.0).abs() < 1e-12);
        assert!((r.ss_total - 80.0).abs() < 1e-12);
        assert!((r.f_statistic - (74.0 / 2.0) / (6.0 / 6.0)).abs() < 1e-12);
        assert!((r.eta_squared - 74.0 / 80.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(one_way_anova(&[vec![1.0, 2.0]]).is_err());
        assert_eq!(one_way_anova(&[vec![1.0], vec![]]), Err(StatsError::Empty));
        assert!(matches!(one_way_anova(&[vec![1.0], vec![2.0]]), Err(StatsError::DegreesOfFreedom(_))));
    }

    fn groups() -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 1..8), 2..6)
            .prop_filter("needs within-group freedom", |g| g.iter().map(Vec::len).sum::<usize>() > g.len())
    }

    proptest! {
        #[test]
        fn decomposition(g in groups()) {
            let r = one_way_anova(&g).unwrap();
            let sum = r.ss_between + r.ss_within;
            prop_assert!((sum - r.ss_total).abs() <= 1e-9 * r.ss_total.max(1e-300));
        }

        #[test]
        fn eta_squared_is_shift_and_scale_invariant(g in groups(), shift in -50.0f64..50.0, scale in 0.1f64..10.0) {
            let a = one_way_anova(&g).unwrap();
            prop_assume!(a.ss_total > 1e-6);
            let moved: Vec<Vec<f64>> = g.iter().map(|v| v.iter().map(|x| scale * x + shift).collect()).collect();
            let b = one_way_anova(&moved).unwrap();
            prop_assert!((a.eta_squared - b.eta_squared).abs() < 1e-9);
        }
    }
}
