use serde::{Deserialize, Serialize};

use super::MetricsError;

/// Detection scores of watermarked and human-written samples.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScorePools {
    pub wm: Vec<f64>,
    pub human: Vec<f64>,
    /// Samples dropped because nothing in them could be scored.
    pub excluded_wm: usize,
    pub excluded_human: usize,
}

impl ScorePools {
    pub fn new(wm: Vec<f64>, human: Vec<f64>) -> Result<Self, MetricsError> {
        if let Some(&bad) = wm.iter().chain(&human).find(|s| !s.is_finite()) {
            return Err(MetricsError::NonFiniteScore(bad));
        }
        Ok(ScorePools {
            wm,
            human,
            excluded_wm: 0,
            excluded_human: 0,
        })
    }

    /// Builds pools from optional z-scores; `None` entries are excluded and
    /// counted.
    pub fn from_optional(
        wm: impl IntoIterator<Item = Option<f64>>,
        human: impl IntoIterator<Item = Option<f64>>,
    ) -> Result<Self, MetricsError> {
        let (mut excluded_wm, mut excluded_human) = (0, 0);
        let wm: Vec<f64> = wm
            .into_iter()
            .filter_map(|z| z.or_else(|| {
                excluded_wm += 1;
                None
            }))
            .collect();
        let human: Vec<f64> = human
            .into_iter()
            .filter_map(|z| z.or_else(|| {
                excluded_human += 1;
                None
            }))
            .collect();
        let mut pools = ScorePools::new(wm, human)?;
        pools.excluded_wm = excluded_wm;
        pools.excluded_human = excluded_human;
        Ok(pools)
    }

    fn check(&self) -> Result<(), MetricsError> {
        if self.wm.is_empty() {
            return Err(MetricsError::EmptyPool("watermarked"));
        }
        if self.human.is_empty() {
            return Err(MetricsError::EmptyPool("human"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    /// Scores strictly above this count as positive.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// `(FPR, TPR)` at threshold `tau`, counting scores strictly above it.
pub fn rates_at(pools: &ScorePools, tau: f64) -> Result<(f64, f64), MetricsError> {
    pools.check()?;
    let rate = |scores: &[f64]| scores.iter().filter(|&&s| s > tau).count() as f64 / scores.len() as f64;
    Ok((rate(&pools.human), rate(&pools.wm)))
}

/// One point for `tau = -inf` and one per distinct score, ordered by
/// increasing threshold (so from `(1, 1)` down to `(0, 0)`).
pub fn roc_points(pools: &ScorePools) -> Result<Vec<RocPoint>, MetricsError> {
    pools.check()?;
    let mut thresholds: Vec<f64> = pools.wm.iter().chain(&pools.human).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let mut wm = pools.wm.clone();
    let mut human = pools.human.clone();
    wm.sort_by(f64::total_cmp);
    human.sort_by(f64::total_cmp);
    let above = |sorted: &[f64], tau: f64| {
        (sorted.len() - sorted.partition_point(|&s| s <= tau)) as f64 / sorted.len() as f64
    };

    let mut points = Vec::with_capacity(thresholds.len() + 1);
    points.push(RocPoint {
        threshold: f64::NEG_INFINITY,
        fpr: 1.0,
        tpr: 1.0,
    });
    for tau in thresholds {
        points.push(RocPoint {
            threshold: tau,
            fpr: above(&human, tau),
            tpr: above(&wm, tau),
        });
    }
    Ok(points)
}

/// Trapezoidal area under a set of ROC points.
pub fn trapezoid_area(points: &[RocPoint]) -> f64 {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p.fpr, p.tpr)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// Probability that a watermarked score beats a human one, ties counting
/// one half (the Mann–Whitney statistic normalized by `|wm| * |human|`).
pub fn auroc(pools: &ScorePools) -> Result<f64, MetricsError> {
    pools.check()?;
    let mut human = pools.human.clone();
    human.sort_by(f64::total_cmp);
    // twice the U statistic, kept integral
    let mut twice_u: u128 = 0;
    for &w in &pools.wm {
        let below = human.partition_point(|&h| h < w);
        let not_above = human.partition_point(|&h| h <= w);
        twice_u += 2 * below as u128 + (not_above - below) as u128;
    }
    let pairs = 2 * pools.wm.len() as u128 * pools.human.len() as u128;
    Ok(twice_u as f64 / pairs as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pools(wm: &[f64], human: &[f64]) -> ScorePools {
        ScorePools::new(wm.to_vec(), human.to_vec()).unwrap()
    }

    fn pairwise(p: &ScorePools) -> f64 {
        let mut s = 0.0;
        for &w in &p.wm {
            for &h in &p.human {
                s += if w > h {
                    1.0
                } else if w == h {
                    0.5
                } else {
                    0.0
                };
            }
        }
        s / (p.wm.len() * p.human.len()) as f64
    }

    #[test]
    fn extreme_thresholds() {
        let p = pools(&[3.0, 4.0], &[0.0, 1.0]);
        assert_eq!(rates_at(&p, -100.0).unwrap(), (1.0, 1.0));
        assert_eq!(rates_at(&p, 100.0).unwrap(), (0.0, 0.0));
        assert_eq!(rates_at(&p, 2.0).unwrap(), (0.0, 1.0));
        let pts = roc_points(&p).unwrap();
        assert_eq!((pts[0].fpr, pts[0].tpr), (1.0, 1.0));
        let last = pts.last().unwrap();
        assert_eq!((last.fpr, last.tpr), (0.0, 0.0));
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&pools(&[3.0, 4.0], &[0.0, 1.0])).unwrap(), 1.0);
        assert_eq!(auroc(&pools(&[1.0, 2.0], &[1.0, 2.0])).unwrap(), 0.5);
        assert_eq!(auroc(&pools(&[1.0, 3.0], &[2.0])).unwrap(), 0.5);
    }

    #[test]
    fn empty_pools_rejected() {
        assert!(matches!(auroc(&pools(&[], &[1.0])), Err(MetricsError::EmptyPool(_))));
        assert!(matches!(roc_points(&pools(&[1.0], &[])), Err(MetricsError::EmptyPool(_))));
        assert!(ScorePools::new(vec![f64::NAN], vec![]).is_err());
    }

    #[test]
    fn optional_scores_are_excluded() {
        let p = ScorePools::from_optional(vec![Some(1.0), None], vec![None, None, Some(0.0)]).unwrap();
        assert_eq!(p.wm, vec![1.0]);
        assert_eq!(p.human, vec![0.0]);
        assert_eq!((p.excluded_wm, p.excluded_human), (1, 2));
    }

    fn scores() -> impl Strategy<Value = Vec<f64>> {
        // small integer grid so ties are common
        prop::collection::vec((-6i32..6).prop_map(|x| x as f64 / 2.0), 1..30)
    }

    proptest! {
        #[test]
        fn auroc_is_pairwise_and_trapezoid(wm in scores(), human in scores()) {
            let p = pools(&wm, &human);
            let a = auroc(&p).unwrap();
            prop_assert_eq!(a, pairwise(&p));
            prop_assert!((a - trapezoid_area(&roc_points(&p).unwrap())).abs() < 1e-9);
        }

        #[test]
        fn auroc_invariant_under_monotone_maps(wm in scores(), human in scores()) {
            let p = pools(&wm, &human);
            let f = |x: &f64| (x * 0.7).exp() + 3.0 * x;
            let q = pools(&wm.iter().map(f).collect::<Vec<_>>(), &human.iter().map(f).collect::<Vec<_>>());
            prop_assert_eq!(auroc(&p).unwrap(), auroc(&q).unwrap());
        }
    }
}
