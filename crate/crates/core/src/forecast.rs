//! Spot-price forecasting: linear trend plus additive hour-of-day seasonality,
//! Gaussian prediction intervals, accuracy scoring and bid computation.
//!
//! The fit is the joint least-squares solution of
//! `price(h) = intercept + slope * h + season[h mod 24]` with the seasonal
//! offsets constrained to sum to zero. It is computed in closed form with the
//! within-group (fixed effects) estimator: the slope comes from hour-index and
//! price deviations around each hour-of-day mean, so a periodic component can
//! never leak into the trend.

use thiserror::Error;

use crate::domain::PriceSeries;
use crate::scalar::Scalar;

pub const SECONDS_PER_HOUR: i64 = 3600;
pub const SEASON_LEN: usize = 24;
pub const MIN_FIT_HOURS: usize = 48;
/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForecastError {
    #[error("insufficient data: {have} hourly observations, need {need}")]
    InsufficientData { have: usize, need: usize },
    #[error("length mismatch: {0} predicted vs {1} actual")]
    LengthMismatch(usize, usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastModel<T> {
    pub intercept: T,
    /// Price change per hour.
    pub slope: T,
    /// Additive offsets indexed by UTC hour of day; sum to zero.
    pub seasonal: [T; SEASON_LEN],
    pub residual_sigma: T,
    /// Hour index (unix seconds / 3600) the trend is measured from.
    pub origin_hour: i64,
    /// First and last fitted timestamps (hour-aligned).
    pub fitted_range: (i64, i64),
    pub instance_type: String,
    pub zone: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForecastPoint<T> {
    pub timestamp: i64,
    pub mean: T,
    pub lower95: T,
    pub upper95: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceForecast<T> {
    pub points: Vec<ForecastPoint<T>>,
}

/// Buckets observations to whole hours, averaging within each hour.
pub fn hourly_means<T: Scalar>(points: &[(i64, T)]) -> Vec<(i64, T)> {
    let mut out: Vec<(i64, T)> = Vec::new();
    let mut count = 0u64;
    for &(ts, p) in points {
        let h = ts.div_euclid(SECONDS_PER_HOUR);
        match out.last_mut() {
            Some((last_h, sum)) if *last_h == h => {
                *sum += p;
                count += 1;
            }
            _ => {
                if let Some((_, sum)) = out.last_mut() {
                    *sum /= T::from_count(count);
                }
                out.push((h, p));
                count = 1;
            }
        }
    }
    if let Some((_, sum)) = out.last_mut() {
        *sum /= T::from_count(count);
    }
    out
}

fn hour_of_day(hour: i64) -> usize {
    hour.rem_euclid(SEASON_LEN as i64) as usize
}

impl<T: Scalar> ForecastModel<T> {
    pub fn mean_at_hour(&self, hour: i64) -> T {
        self.intercept + self.slope * T::from_i64(hour - self.origin_hour).expect("hour fits") + self.seasonal[hour_of_day(hour)]
    }

    /// Point forecast for an arbitrary timestamp (hour containing `ts`).
    pub fn mean_at(&self, ts: i64) -> T {
        self.mean_at_hour(ts.div_euclid(SECONDS_PER_HOUR))
    }

    pub fn last_fitted_hour(&self) -> i64 {
        self.fitted_range.1.div_euclid(SECONDS_PER_HOUR)
    }
}

/// Fits trend and hour-of-day seasonality to `series` after bucketing to
/// hourly means. Needs at least [`MIN_FIT_HOURS`] buckets.
pub fn fit<T: Scalar>(series: &PriceSeries<T>) -> Result<ForecastModel<T>, ForecastError> {
    let obs = hourly_means(&series.points);
    if obs.len() < MIN_FIT_HOURS {
        return Err(ForecastError::InsufficientData {
            have: obs.len(),
            need: MIN_FIT_HOURS,
        });
    }
    let origin = obs[0].0;
    let x = |h: i64| T::from_i64(h - origin).expect("hour fits");

    let mut n_g = [0u64; SEASON_LEN];
    let mut sx_g = [T::zero(); SEASON_LEN];
    let mut sy_g = [T::zero(); SEASON_LEN];
    for &(h, p) in &obs {
        let g = hour_of_day(h);
        n_g[g] += 1;
        sx_g[g] += x(h);
        sy_g[g] += p;
    }
    let mean_g = |s: &[T; SEASON_LEN], g: usize| s[g] / T::from_count(n_g[g]);

    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for &(h, p) in &obs {
        let g = hour_of_day(h);
        let dx = x(h) - mean_g(&sx_g, g);
        sxy += dx * (p - mean_g(&sy_g, g));
        sxx += dx * dx;
    }
    let slope = if sxx > T::zero() {
        sxy / sxx
    } else {
        // one observation per hour of day: fall back to plain OLS
        let n = T::from_count(obs.len() as u64);
        let mx = obs.iter().map(|&(h, _)| x(h)).sum::<T>() / n;
        let my = obs.iter().map(|&(_, p)| p).sum::<T>() / n;
        let (mut num, mut den) = (T::zero(), T::zero());
        for &(h, p) in &obs {
            num += (x(h) - mx) * (p - my);
            den += (x(h) - mx) * (x(h) - mx);
        }
        if den > T::zero() {
            num / den
        } else {
            T::zero()
        }
    };

    // Per-group level after removing the trend; groups never observed get
    // the overall level so their offset is zero.
    let present: Vec<usize> = (0..SEASON_LEN).filter(|&g| n_g[g] > 0).collect();
    let mut level = [T::zero(); SEASON_LEN];
    for &g in &present {
        level[g] = mean_g(&sy_g, g) - slope * mean_g(&sx_g, g);
    }
    let intercept = present.iter().map(|&g| level[g]).sum::<T>() / T::from_count(present.len() as u64);
    let mut seasonal = [T::zero(); SEASON_LEN];
    for &g in &present {
        seasonal[g] = level[g] - intercept;
    }
    // Recentre over all 24 slots so the offsets sum to zero exactly.
    let shift = seasonal.iter().copied().sum::<T>() / T::from_count(SEASON_LEN as u64);
    let intercept = intercept + shift;
    for s in seasonal.iter_mut() {
        *s -= shift;
    }

    let mut model = ForecastModel {
        intercept,
        slope,
        seasonal,
        residual_sigma: T::zero(),
        origin_hour: origin,
        fitted_range: (origin * SECONDS_PER_HOUR, obs[obs.len() - 1].0 * SECONDS_PER_HOUR),
        instance_type: series.instance_type.clone(),
        zone: series.zone.clone(),
    };
    let ssr: T = obs
        .iter()
        .map(|&(h, p)| {
            let r = p - model.mean_at_hour(h);
            r * r
        })
        .sum();
    model.residual_sigma = (ssr / T::from_count(obs.len() as u64)).sqrt();
    Ok(model)
}

/// Forecasts the `horizon_hours` whole hours following the fitted range.
pub fn predict<T: Scalar>(model: &ForecastModel<T>, horizon_hours: u32) -> Result<PriceForecast<T>, ForecastError> {
    if horizon_hours < 1 {
        return Err(ForecastError::InvalidInput("horizon must be >= 1 hour".into()));
    }
    let start = model.last_fitted_hour() + 1;
    Ok(predict_hours(model, start, horizon_hours))
}

/// Forecasts `count` hours starting at hour index `start_hour`.
pub fn predict_hours<T: Scalar>(model: &ForecastModel<T>, start_hour: i64, count: u32) -> PriceForecast<T> {
    let half_width = T::lit(Z95) * model.residual_sigma;
    let points = (0..count as i64)
        .map(|k| {
            let h = start_hour + k;
            let mean = model.mean_at_hour(h);
            ForecastPoint {
                timestamp: h * SECONDS_PER_HOUR,
                mean,
                lower95: (mean - half_width).max(T::zero()),
                upper95: mean + half_width,
            }
        })
        .collect();
    PriceForecast { points }
}

pub fn rmse<T: Scalar>(predicted: &[T], actual: &[T]) -> Result<T, ForecastError> {
    if predicted.len() != actual.len() || predicted.is_empty() {
        return Err(ForecastError::LengthMismatch(predicted.len(), actual.len()));
    }
    let sse: T = predicted.iter().zip(actual).map(|(&p, &a)| (p - a) * (p - a)).sum();
    Ok((sse / T::from_count(predicted.len() as u64)).sqrt())
}

/// Bid above the forecast band but capped below the on-demand price:
/// `min(upper95 * (1 + margin), on_demand * cap)`.
pub fn bid_price<T: Scalar>(upper95: T, on_demand: T, margin_fraction: T, cap_fraction: T) -> Result<T, ForecastError> {
    if !(on_demand > T::zero()) {
        return Err(ForecastError::InvalidInput("on-demand price must be > 0".into()));
    }
    let bid = (upper95 * (T::one() + margin_fraction)).min(on_demand * cap_fraction);
    if !(bid > T::zero()) {
        return Err(ForecastError::InvalidInput(format!("bid {bid} is not positive")));
    }
    Ok(bid)
}
