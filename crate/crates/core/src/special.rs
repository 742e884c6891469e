//! Complex digamma function.
//!
//! Ψ(z) is shifted upward with Ψ(z) = Ψ(z+1) − 1/z until Re z ≥ 10, then the
//! asymptotic series
//!
//! Ψ(z) ~ ln z − 1/(2z) − Σ_{k=1}^{7} B_{2k} / (2k z^{2k})
//!
//! is summed. With Re z ≥ 10 the first omitted term (B₁₆) is below 1e−17.

use num_complex::Complex64;
use std::f64::consts::PI;

/// B_{2k}/(2k) for k = 1..7.
const ASYMPTOTIC: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
];

const SHIFT_THRESHOLD: f64 = 10.0;

/// Ψ(1/2) = −γ − 2 ln 2.
pub const DIGAMMA_HALF: f64 = -1.963_510_026_021_423_5;

/// Digamma of a complex argument. Returns NaN at the poles z = 0, −1, −2, ...
pub fn digamma(z: Complex64) -> Complex64 {
    if z.im == 0.0 && z.re <= 0.0 && z.re == z.re.floor() {
        return Complex64::new(f64::NAN, f64::NAN);
    }

    let mut z = z;
    let mut acc = Complex64::new(0.0, 0.0);
    while z.re < SHIFT_THRESHOLD {
        acc -= z.inv();
        z += 1.0;
    }

    let inv = z.inv();
    let inv2 = inv * inv;
    // Horner in 1/z² over the Bernoulli tail.
    let mut tail = Complex64::new(0.0, 0.0);
    for &c in ASYMPTOTIC.iter().rev() {
        tail = tail * inv2 + c;
    }
    tail *= inv2;

    acc + z.ln() - 0.5 * inv - tail
}

/// Digamma of a real argument.
pub fn digamma_real(x: f64) -> f64 {
    digamma(Complex64::new(x, 0.0)).re
}

/// π cot(πz), used by the reflection identity Ψ(1−z) − Ψ(z) = π cot(πz).
pub fn pi_cot_pi(z: Complex64) -> Complex64 {
    let w = z * PI;
    PI * w.cos() / w.sin()
}
