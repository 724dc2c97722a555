//! Special functions: error function differences and Hermite polynomials.

use num_complex::Complex64;

/// Highest degree for which exact monomial Hermite coefficients are tabulated.
pub const MAX_HERMITE_DEGREE: usize = 30;

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// `erf(b) - erf(a)` without cancellation when both ends sit in the same tail.
pub fn erf_diff(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        erfc(a) - erfc(b)
    } else if b <= 0.0 {
        erfc(-b) - erfc(-a)
    } else {
        erf(b) - erf(a)
    }
}

/// Physicists' Hermite polynomial `H_n(z)` by three-term recurrence.
pub fn hermite(n: usize, z: Complex64) -> Complex64 {
    let mut h_prev = Complex64::new(1.0, 0.0);
    if n == 0 {
        return h_prev;
    }
    let mut h = z * 2.0;
    for k in 1..n {
        let next = z * h * 2.0 - h_prev * (2.0 * k as f64);
        h_prev = h;
        h = next;
    }
    h
}

/// `H_0(x) .. H_{n_max}(x)` for real argument.
pub fn hermite_all(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(1.0);
    if n_max >= 1 {
        out.push(2.0 * x);
    }
    for k in 1..n_max {
        out.push(2.0 * x * out[k] - 2.0 * k as f64 * out[k - 1]);
    }
    out
}

/// Exact integer monomial coefficients of `H_n`, lowest degree first.
///
/// Panics if `n > MAX_HERMITE_DEGREE`.
pub fn hermite_monomial_coeffs(n: usize) -> Vec<i128> {
    assert!(
        n <= MAX_HERMITE_DEGREE,
        "Hermite degree {n} exceeds {MAX_HERMITE_DEGREE}"
    );
    let mut prev: Vec<i128> = vec![1];
    if n == 0 {
        return prev;
    }
    let mut cur: Vec<i128> = vec![0, 2];
    for k in 1..n {
        let mut next = vec![0i128; k + 2];
        for (i, &c) in cur.iter().enumerate() {
            next[i + 1] += 2 * c;
        }
        for (i, &c) in prev.iter().enumerate() {
            next[i] -= 2 * k as i128 * c;
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// Orthonormal Hermite functions `h_0(x) .. h_{n-1}(x)`,
/// `h_k(x) = H_k(x) e^{-x^2/2} / sqrt(2^k k! sqrt(pi))`.
pub fn hermite_functions(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp());
    if n > 1 {
        out.push(std::f64::consts::SQRT_2 * x * out[0]);
    }
    for k in 1..n.saturating_sub(1) {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * x * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
        out.push(next);
    }
    out
}

/// `ln(n!)` summed directly; fine for the small `n` used here.
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn monomials_match_recurrence() {
        for n in 0..=MAX_HERMITE_DEGREE {
            let coeffs = hermite_monomial_coeffs(n);
            assert_eq!(coeffs.len(), n + 1);
            assert_eq!(coeffs[n], 1i128 << n);
            for &x in &[-1.3, -0.2, 0.0, 0.7, 1.9] {
                let horner = coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c as f64);
                let rec = hermite(n, Complex64::new(x, 0.0)).re;
                assert!(
                    close(horner, rec, 1e-9 * rec.abs().max(1.0)),
                    "n={n} x={x}: {horner} vs {rec}"
                );
            }
        }
    }

    #[test]
    fn low_order_values() {
        let z = Complex64::new(0.5, -0.25);
        assert!((hermite(2, z) - (z * z * 4.0 - 2.0)).norm() < 1e-15);
        assert_eq!(hermite_all(3, 1.0), vec![1.0, 2.0, 2.0, -4.0]);
    }

    #[test]
    fn erf_diff_tails() {
        // Far tail stays positive and tiny instead of cancelling to zero.
        let d = erf_diff(6.0, 7.0);
        assert!(d > 0.0 && d < 1e-16);
        assert!(close(erf_diff(-0.5, 0.5), 2.0 * erf(0.5), 1e-15));
        assert!(close(erf_diff(-7.0, -6.0), d, 1e-30));
    }

    #[test]
    fn hermite_functions_orthonormal() {
        // Trapezoid on a wide grid is spectrally accurate for these integrands.
        let h = 0.01;
        let mut gram = [[0.0f64; 6]; 6];
        let mut x = -15.0;
        while x <= 15.0 {
            let v = hermite_functions(6, x);
            for i in 0..6 {
                for j in 0..6 {
                    gram[i][j] += h * v[i] * v[j];
                }
            }
            x += h;
        }
        for (i, row) in gram.iter().enumerate() {
            for (j, &g) in row.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(close(g, want, 1e-10), "({i},{j}) = {g}");
            }
        }
    }
}
