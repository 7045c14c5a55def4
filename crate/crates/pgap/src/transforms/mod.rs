//! Coordinate changes that flatten the gap: the per-neck chart used by the
//! solver and the annular map Φ with mollified profiles.

mod mollifier;
mod neck;
mod phi;

pub use mollifier::{MollifierRule, bump_normalization};
pub use neck::NeckChart;
pub use phi::{PhiBoundsReport, PhiChart, PhiPoint, PhiViolation};
