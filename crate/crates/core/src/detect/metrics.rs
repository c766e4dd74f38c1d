use crate::model::Scenario;

use super::SubchannelDetection;

/// Detection outcome of one trial, summed over sub-channels.
///
/// Users sharing a block are excluded from missed-detection accounting and are
/// never counted as supported.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrialMetrics {
    pub active_users: usize,
    pub noncollided_users: usize,
    pub collided_users: usize,
    pub missed_detections: usize,
    pub false_alarms: usize,
    /// Blocks with no user, the false-alarm denominator.
    pub inactive_blocks: usize,
    /// Non-collided users whose block was declared active.
    pub supported_users: usize,
    pub symbol_errors: usize,
    pub symbols: usize,
    /// Sub-channels whose declared block set equals the true one.
    pub exact_subchannels: usize,
    pub subchannels: usize,
}

impl TrialMetrics {
    pub fn missed_detection_rate(&self) -> f64 {
        ratio(self.missed_detections, self.noncollided_users)
    }

    pub fn false_alarm_rate(&self) -> f64 {
        ratio(self.false_alarms, self.inactive_blocks)
    }

    /// `None` when no data symbol was decoded.
    pub fn symbol_error_rate(&self) -> Option<f64> {
        (self.symbols > 0).then(|| self.symbol_errors as f64 / self.symbols as f64)
    }

    pub fn detection_rate(&self) -> f64 {
        1.0 - self.missed_detection_rate()
    }

    pub fn exact_recovery_rate(&self) -> f64 {
        ratio(self.exact_subchannels, self.subchannels)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores detections against the ground truth of the same trial.
pub fn evaluate_trial(
    truth: &Scenario,
    detections: &[SubchannelDetection],
    u: usize,
) -> TrialMetrics {
    let mut m = TrialMetrics::default();
    for (j, (sub, det)) in truth
        .activity
        .subchannels
        .iter()
        .zip(detections)
        .enumerate()
    {
        let active = sub.active_blocks();
        let declared = |b: usize| det.active_blocks.binary_search(&b).is_ok();
        m.subchannels += 1;
        m.active_users += sub.load();
        m.inactive_blocks += u - active.len();
        m.false_alarms += det
            .active_blocks
            .iter()
            .filter(|b| active.binary_search(b).is_err())
            .count();
        if det.active_blocks == active {
            m.exact_subchannels += 1;
        }
        for user in &sub.users {
            if sub.is_collided(user.block) {
                m.collided_users += 1;
                continue;
            }
            m.noncollided_users += 1;
            if !declared(user.block) {
                m.missed_detections += 1;
                continue;
            }
            m.supported_users += 1;
            let Some(decisions) = &det.decisions else {
                continue;
            };
            let Some(k) = det
                .support
                .blocks
                .iter()
                .position(|b| b.block == user.block)
            else {
                continue;
            };
            for (i, slot) in decisions.iter().enumerate() {
                m.symbols += 1;
                match slot[k] {
                    Some(d) if d == truth.data.symbol(j, i + 1, user.block) => {}
                    _ => m.symbol_errors += 1,
                }
            }
        }
    }
    m
}
