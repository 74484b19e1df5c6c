//! Small numeric helpers shared across modules.

/// Round half away from zero (`2.5 -> 3`, `-2.5 -> -3`); every position,
/// interval, and boundary computation rounds this way.
pub(crate) fn round_half_away(x: f64) -> i64 {
    x.round() as i64
}
