//! Floating-point scalar abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar used for prices, rates and utilizations: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Every finite `f64` maps to some value of an
    /// implementing type, so this never fails for finite input.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count fits in scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `ceil(x)` as an unsigned count, saturating at zero for negative input.
pub(crate) fn ceil_count<T: Scalar>(x: T) -> u64 {
    if x <= T::zero() {
        0
    } else {
        x.ceil().to_u64().unwrap_or(u64::MAX)
    }
}

/// Rounds `x` to `decimals` fractional digits with ties going to the even neighbour.
pub fn round_half_even(x: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    let scaled = x * scale;
    let floor = scaled.floor();
    let diff = scaled - floor;
    let rounded = if (diff - 0.5).abs() < 1e-9 {
        if floor % 2.0 == 0.0 {
            floor
        } else {
            floor + 1.0
        }
    } else {
        scaled.round()
    };
    rounded / scale
}

/// Fixed-width decimal rendering after half-even rounding.
pub fn format_money(x: f64, decimals: u32) -> String {
    let r = round_half_even(x, decimals);
    // avoid "-0.0000"
    let r = if r == 0.0 { 0.0 } else { r };
    format!("{:.*}", decimals as usize, r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_even_ties() {
        assert_eq!(format_money(0.12345, 4), "0.1234");
        assert_eq!(format_money(0.12355, 4), "0.1236");
        assert_eq!(format_money(2.5, 0), "2");
        assert_eq!(format_money(3.5, 0), "4");
        assert_eq!(format_money(-0.00001, 4), "0.0000");
        assert_eq!(format_money(246.886, 2), "246.89");
    }

    #[test]
    fn ceil_count_clamps() {
        assert_eq!(ceil_count(-1.5f64), 0);
        assert_eq!(ceil_count(0.0f32), 0);
        assert_eq!(ceil_count(0.8f64), 1);
        assert_eq!(ceil_count(4.0f64), 4);
    }
}
