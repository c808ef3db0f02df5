//! Complex Gamma (Lanczos, g = 7) and the confluent hypergeometric `1F1`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{domain, Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const TERM_BUDGET: usize = 100_000;

fn is_nonpositive_integer(z: Complex64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re.fract() == 0.0
}

/// `ln Gamma(z)` for `Re z >= 1/2`.
fn ln_gamma_lanczos(z: Complex64) -> Complex64 {
    let z = z - 1.0;
    let mut x = Complex64::new(LANCZOS[0], 0.0);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

/// `ln sin(pi z)`, computed without overflow for large `|Im z|`.
fn ln_sin_pi(z: Complex64) -> Complex64 {
    let i = Complex64::i();
    if z.im >= 0.0 {
        -i * PI * z + (((2.0 * i * PI * z).exp() - 1.0) / (2.0 * i)).ln()
    } else {
        i * PI * z + ((1.0 - (-2.0 * i * PI * z).exp()) / (2.0 * i)).ln()
    }
}

/// A logarithm of `Gamma(z)`. The imaginary part is only defined modulo
/// `2 pi`; use it through `exp` or phase differences.
pub fn ln_gamma(z: Complex64) -> Result<Complex64> {
    if !z.is_finite() {
        return Err(domain("non-finite Gamma argument"));
    }
    if is_nonpositive_integer(z) {
        return Err(domain(format!("Gamma has a pole at {}", z.re)));
    }
    if z.re >= 0.5 {
        Ok(ln_gamma_lanczos(z))
    } else if z.re > -0.5 {
        Ok(ln_gamma_lanczos(z + 1.0) - z.ln())
    } else {
        Ok(Complex64::new(PI.ln(), 0.0) - ln_sin_pi(z) - ln_gamma_lanczos(1.0 - z))
    }
}

pub fn complex_gamma(z: Complex64) -> Result<Complex64> {
    if !z.is_finite() {
        return Err(domain("non-finite Gamma argument"));
    }
    if is_nonpositive_integer(z) {
        return Err(domain(format!("Gamma has a pole at {}", z.re)));
    }
    if z.re >= 0.5 {
        return Ok(ln_gamma_lanczos(z).exp());
    }
    // Reflection.
    let s = (PI * z).sin();
    Ok(PI / (s * ln_gamma_lanczos(1.0 - z).exp()))
}

/// Plain Maclaurin series of `1F1(a; b; z)`.
pub fn hyp1f1_series(a: Complex64, b: Complex64, z: Complex64) -> Result<Complex64> {
    if is_nonpositive_integer(b) {
        return Err(domain(format!("1F1 undefined for b = {}", b.re)));
    }
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut small = 0;
    for k in 0..TERM_BUDGET {
        let kf = k as f64;
        term *= (a + kf) / (b + kf) * z / (kf + 1.0);
        sum += term;
        if !sum.is_finite() {
            return Err(Error::Numeric {
                message: "1F1 series overflowed".into(),
                achieved: f64::INFINITY,
            });
        }
        if term.norm() < 1e-16 * sum.norm() || term.norm() == 0.0 {
            small += 1;
            if small == 3 {
                return Ok(sum);
            }
        } else {
            small = 0;
        }
    }
    Err(Error::Numeric {
        message: format!("1F1 series did not settle within {TERM_BUDGET} terms"),
        achieved: term.norm() / sum.norm(),
    })
}

/// `1F1(a; b; z)`. For `Re z < 0` the series is evaluated after Kummer's
/// transformation `e^z 1F1(b - a; b; -z)`, which keeps the terms from
/// alternating.
pub fn hyp1f1(a: Complex64, b: Complex64, z: Complex64) -> Result<Complex64> {
    if z.re < 0.0 {
        Ok(z.exp() * hyp1f1_series(b - a, b, -z)?)
    } else {
        hyp1f1_series(a, b, z)
    }
}
