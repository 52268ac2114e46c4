//! Window statistics over per-episode metrics.

use super::EpisodeMetrics;

/// A numeric column of the metrics table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Reward,
    Cost,
    CostE,
    CostG,
    CostH,
    Lambda,
    ChpPower,
    ChpHeat,
    ChpCost,
}

impl Field {
    pub fn get(self, m: &EpisodeMetrics) -> f64 {
        match self {
            Field::Reward => m.cumulative_reward,
            Field::Cost => m.cumulative_cost,
            Field::CostE => m.cost_e,
            Field::CostG => m.cost_g,
            Field::CostH => m.cost_h,
            Field::Lambda => m.lambda,
            Field::ChpPower => m.chp_power,
            Field::ChpHeat => m.chp_heat,
            Field::ChpCost => m.chp_cost,
        }
    }
}

/// Mean of `field` over the episodes numbered `end - window + 1 ..= end`
/// that are present. `None` when none are.
pub fn window_mean(
    metrics: &[EpisodeMetrics],
    end: usize,
    window: usize,
    field: Field,
) -> Option<f64> {
    let start = end.saturating_sub(window.max(1)) + 1;
    let (sum, n) = metrics
        .iter()
        .filter(|m| (start..=end).contains(&m.episode))
        .fold((0.0, 0usize), |(s, n), m| (s + field.get(m), n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Mean of `field` over the last `window` episodes of the run.
pub fn tail_mean(metrics: &[EpisodeMetrics], window: usize, field: Field) -> Option<f64> {
    let end = metrics.iter().map(|m| m.episode).max()?;
    window_mean(metrics, end, window, field)
}

/// Episodes at which a run of `total` episodes is reported: the first, the
/// last, and 1/10, 1/5, 2/5, 3/5, 4/5 of the way through.
pub fn report_points(total: usize) -> Vec<usize> {
    if total == 0 {
        return Vec::new();
    }
    let mut points = vec![1];
    for (num, den) in [(1, 10), (1, 5), (2, 5), (3, 5), (4, 5), (1, 1)] {
        let p = (total * num / den).max(1);
        if points.last() != Some(&p) {
            points.push(p);
        }
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(rewards: &[f64]) -> Vec<EpisodeMetrics> {
        rewards
            .iter()
            .enumerate()
            .map(|(i, &r)| EpisodeMetrics {
                episode: i + 1,
                cumulative_reward: r,
                ..Default::default()
            })
            .collect()
    }

    #[test]
    fn windows() {
        let m = run(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(window_mean(&m, 1, 10, Field::Reward), Some(1.0));
        assert_eq!(window_mean(&m, 4, 2, Field::Reward), Some(3.5));
        assert_eq!(tail_mean(&m, 3, Field::Reward), Some(3.0));
        assert_eq!(tail_mean(&[], 3, Field::Reward), None);
        assert_eq!(window_mean(&m, 9, 2, Field::Reward), None);
    }

    #[test]
    fn points() {
        assert_eq!(report_points(1000), vec![1, 100, 200, 400, 600, 800, 1000]);
        assert_eq!(report_points(300), vec![1, 30, 60, 120, 180, 240, 300]);
        assert_eq!(report_points(3), vec![1, 2, 3]);
        assert!(report_points(0).is_empty());
    }
}
