//! Closed-form rotation matrices and coupling coefficients.

use num_complex::Complex64;

use crate::error::{Result, SnapError};

/// Largest `2j` the factorial sums are trusted for.
pub const ORACLE_MAX_TWOJ: u32 = 8;

fn fact(n: i64) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn binom(n: i64, k: i64) -> f64 {
    if k < 0 || k > n {
        0.0
    } else {
        fact(n) / (fact(k) * fact(n - k))
    }
}

/// Degree-`2j` symmetric power of `[[a, -conj b], [b, conj a]]` in the
/// normalized monomial basis, row-major `(2j+1) x (2j+1)`:
///
/// `U[r][c] = sqrt(r!(n-r)! / c!(n-c)!) * sum_{i+l=r} C(c,i) C(n-c,l)
///            a^i (-conj b)^(c-i) b^l (conj a)^(n-c-l)`.
pub fn wigner_direct(twoj: u32, a: Complex64, b: Complex64) -> Result<Vec<Complex64>> {
    if twoj > ORACLE_MAX_TWOJ {
        return Err(SnapError::OracleBound {
            twoj,
            max: ORACLE_MAX_TWOJ,
        });
    }
    let n = twoj as i64;
    let (alpha, beta, gamma, delta) = (a, -b.conj(), b, a.conj());
    let mut out = Vec::with_capacity(((n + 1) * (n + 1)) as usize);
    for r in 0..=n {
        for c in 0..=n {
            let mut s = Complex64::new(0.0, 0.0);
            for i in 0..=c.min(r) {
                let l = r - i;
                if l > n - c {
                    continue;
                }
                s += binom(c, i)
                    * binom(n - c, l)
                    * alpha.powi(i as i32)
                    * beta.powi((c - i) as i32)
                    * gamma.powi(l as i32)
                    * delta.powi((n - c - l) as i32);
            }
            let norm = (fact(r) * fact(n - r) / (fact(c) * fact(n - c))).sqrt();
            out.push(s * norm);
        }
    }
    Ok(out)
}

/// Clebsch-Gordan coefficient `<j1 m1; j2 m2 | j m>` with every argument doubled.
pub fn clebsch_gordan(j1: i64, m1: i64, j2: i64, m2: i64, j: i64, m: i64) -> f64 {
    if m1 + m2 != m || m1.abs() > j1 || m2.abs() > j2 || m.abs() > j {
        return 0.0;
    }
    if (j1 + m1) % 2 != 0 || (j2 + m2) % 2 != 0 || (j + m) % 2 != 0 {
        return 0.0;
    }
    if j > j1 + j2 || j < (j1 - j2).abs() || (j1 + j2 + j) % 2 != 0 {
        return 0.0;
    }
    let delta = (fact((j1 + j2 - j) / 2) * fact((j1 - j2 + j) / 2) * fact((j2 - j1 + j) / 2)
        / fact((j1 + j2 + j) / 2 + 1))
        .sqrt();
    let norm = ((j + 1) as f64
        * fact((j1 + m1) / 2)
        * fact((j1 - m1) / 2)
        * fact((j2 + m2) / 2)
        * fact((j2 - m2) / 2)
        * fact((j + m) / 2)
        * fact((j - m) / 2))
        .sqrt();
    let mut s = 0.0;
    for k in 0..=(j1 + j2 + j) / 2 {
        let d = [
            k,
            (j1 + j2 - j) / 2 - k,
            (j1 - m1) / 2 - k,
            (j2 + m2) / 2 - k,
            (j - j2 + m1) / 2 + k,
            (j - j1 - m2) / 2 + k,
        ];
        if d.iter().any(|&v| v < 0) {
            continue;
        }
        let den: f64 = d.iter().map(|&v| fact(v)).product();
        s += if k % 2 == 0 { 1.0 } else { -1.0 } / den;
    }
    delta * norm * s
}
