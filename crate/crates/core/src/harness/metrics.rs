use super::trace::{Trace, TraceRecord};

/// Position error beyond which a run counts as diverged, in m.
pub const POSITION_LIMIT: f64 = 1.0;
/// Attitude error beyond which a run counts as diverged, in rad.
pub const ATTITUDE_LIMIT: f64 = 1.0;
/// Start of the RMSE window.
pub const TRANSIENT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub rmse_pos: f64,
    pub rmse_att: f64,
    pub max_pos_err: f64,
    pub stable: bool,
    pub divergence_time: Option<f64>,
    pub saturation_fraction: f64,
}

pub fn is_diverged(r: &TraceRecord) -> bool {
    !(r.pos_err <= POSITION_LIMIT) || !(r.att_err <= ATTITUDE_LIMIT)
}

/// First time the thresholds are crossed or the state stops being finite.
pub fn divergence_time(trace: &Trace) -> Option<f64> {
    trace.records.iter().find(|r| is_diverged(r)).map(|r| r.t)
}

/// Metrics over `t > 1 s`.
pub fn compute_metrics(trace: &Trace) -> Metrics {
    compute_metrics_window(trace, TRANSIENT, f64::INFINITY)
}

/// Metrics with the RMSE restricted to `t_from < t ≤ t_to`. Stability and
/// saturation are always judged on the whole run.
pub fn compute_metrics_window(trace: &Trace, t_from: f64, t_to: f64) -> Metrics {
    let window: Vec<&TraceRecord> = trace.records.iter().filter(|r| r.t > t_from && r.t <= t_to).collect();
    let rms = |f: &dyn Fn(&TraceRecord) -> f64| {
        if window.is_empty() {
            0.0
        } else {
            (window.iter().map(|r| f(r).powi(2)).sum::<f64>() / window.len() as f64).sqrt()
        }
    };
    let divergence_time = divergence_time(trace);
    Metrics {
        rmse_pos: rms(&|r| r.pos_err),
        rmse_att: rms(&|r| r.att_err),
        max_pos_err: trace.records.iter().map(|r| r.pos_err).fold(0.0, f64::max),
        stable: divergence_time.is_none(),
        divergence_time,
        saturation_fraction: if trace.ll_steps == 0 {
            0.0
        } else {
            trace.ll_saturated_steps as f64 / trace.ll_steps as f64
        },
    }
}
