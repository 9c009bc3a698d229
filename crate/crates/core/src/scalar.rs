//! Scalar abstraction for the metric layer.
//!
//! Pixel geometry is exact integer arithmetic. Ratios derived from it (IoU,
//! precision, recall, AP) are computed in whatever floating type the caller
//! picks; the crate root aliases everything to `f64`.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type usable for ratios and averages.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    fn from_ratio(num: u64, den: u64) -> Self {
        Self::from_u64(num).unwrap() / Self::from_u64(den).unwrap()
    }

    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).unwrap()
    }

    fn lossy_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_in_both_widths() {
        assert_eq!(f64::from_ratio(1, 4), 0.25);
        assert_eq!(f32::from_ratio(3, 4), 0.75);
    }
}
