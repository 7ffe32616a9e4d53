//! Conversions between the boundary units used in configuration files
//! (linear MHz, microseconds) and the internal ones (rad/s, seconds).

use std::f64::consts::TAU;

/// rad/s per linear MHz.
pub const ANGULAR_PER_MHZ: f64 = TAU * 1.0e6;
/// Seconds per microsecond.
pub const SECONDS_PER_US: f64 = 1.0e-6;

pub fn mhz_to_angular(mhz: f64) -> f64 {
    mhz * ANGULAR_PER_MHZ
}

pub fn angular_to_mhz(omega: f64) -> f64 {
    invert_scaled(omega, ANGULAR_PER_MHZ)
}

pub fn us_to_seconds(us: f64) -> f64 {
    us * SECONDS_PER_US
}

pub fn seconds_to_us(seconds: f64) -> f64 {
    invert_scaled(seconds, SECONDS_PER_US)
}

/// Finds `x` with `x * scale == value` exactly when such an `x` exists near
/// `value / scale`, so that boundary conversions round-trip bit-for-bit.
fn invert_scaled(value: f64, scale: f64) -> f64 {
    let guess = value / scale;
    if !guess.is_finite() || guess * scale == value {
        return guess;
    }
    let mut lo = guess;
    let mut hi = guess;
    for _ in 0..8 {
        lo = lo.next_down();
        hi = hi.next_up();
        if lo * scale == value {
            return lo;
        }
        if hi * scale == value {
            return hi;
        }
    }
    guess
}
