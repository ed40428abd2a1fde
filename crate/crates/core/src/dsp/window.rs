use std::f64::consts::PI;

/// Sine window of length `2 * half`; satisfies the Princen-Bradley condition.
pub fn sine(half: usize) -> Vec<f64> {
    let len = 2 * half;
    (0..len)
        .map(|n| (PI * (n as f64 + 0.5) / len as f64).sin())
        .collect()
}

/// Periodic Hann window.
pub fn hann_periodic(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// Zeroth-order modified Bessel function of the first kind.
pub fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
        k += 1.0;
    }
    sum
}

/// Kaiser window evaluated at `t` in `[-1, 1]`; zero outside.
pub fn kaiser(t: f64, beta: f64) -> f64 {
    if t.abs() > 1.0 {
        return 0.0;
    }
    bessel_i0(beta * (1.0 - t * t).sqrt()) / bessel_i0(beta)
}
