//! Scalar math through `libm`, so results do not depend on whether `std` is linked.

#[inline]
pub fn exp(x: f32) -> f32 {
    libm::expf(x)
}

#[inline]
pub fn ln(x: f32) -> f32 {
    libm::logf(x)
}

#[inline]
pub fn sqrt(x: f32) -> f32 {
    libm::sqrtf(x)
}

#[inline]
pub fn tanh(x: f32) -> f32 {
    libm::tanhf(x)
}

#[inline]
pub fn sqrt64(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn exp64(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln64(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sin64(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn cos64(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn round64(x: f64) -> f64 {
    libm::round(x)
}
