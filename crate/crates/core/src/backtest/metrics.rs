//! Equity-curve and trade statistics.

use crate::num::{mean, sample_std};
use crate::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("equity curve is empty")]
    EmptyCurve,
}

/// Largest peak-to-trough decline, in percent of the running peak.
pub fn max_drawdown<T: Real>(equity: &[T]) -> Result<T, MetricsError> {
    let first = *equity.first().ok_or(MetricsError::EmptyCurve)?;
    let mut peak = first;
    let mut worst = T::zero();
    for &e in equity {
        peak = peak.max(e);
        if peak > T::zero() {
            worst = worst.max((peak - e) / peak);
        }
    }
    Ok(worst * T::lit(100.0))
}

/// System quality number in its trade-count-scaled form:
/// `n * mean(pnl) / std(pnl)` with the sample deviation. Fewer than two
/// trades or zero spread give 0.
pub fn sqn<T: Real>(pnls: &[T]) -> T {
    if pnls.len() < 2 {
        return T::zero();
    }
    let sd = sample_std(pnls);
    if !(sd > T::zero()) {
        return T::zero();
    }
    T::from_count(pnls.len()) * mean(pnls) / sd
}
