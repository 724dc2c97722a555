//! Brute-force reference path through the Fock basis.
//!
//! Nothing here reuses the closed-form quadrature distribution. The position
//! wavefunction is built from ladder operators acting on a squeezed Gaussian,
//! Fock amplitudes come from Gauss-Hermite overlap integrals, and state
//! comparisons go through truncated density matrices and a Jacobi eigensolver.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WitnessError};
use crate::special::hermite_functions;
use crate::states::{QuadratureAngle, State, StellarState};

pub const DEFAULT_TRUNCATION: usize = 64;
pub const MAX_GH_ORDER: usize = 512;
/// Expansions losing more norm than this are rejected.
pub const TRUNCATION_REJECT: f64 = 1e-6;
/// Expansions losing more norm than this are flagged.
pub const TRUNCATION_WARN: f64 = 1e-8;

/// Gauss-Hermite nodes with weights pre-multiplied by `e^{y^2}`, so that
/// `int g(y) dy ~ sum_i w_i g(y_i)` for `g` a polynomial times `e^{-y^2}`.
pub fn gauss_hermite_scaled(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..n.div_ceil(2) {
        // Initial guesses for the roots in descending order.
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut hm1 = 0.0;
        for _ in 0..100 {
            let h = hermite_functions(n + 1, z);
            let (hn, hnm1) = (h[n], h[n - 1]);
            // h_n' = sqrt(2n) h_{n-1} - z h_n, and h_n(z) = 0 at the root.
            let dz = hn / ((2.0 * nf).sqrt() * hnm1 - z * hn);
            z -= dz;
            hm1 = hnm1;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                hm1 = hermite_functions(n, z)[n - 1];
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 1.0 / (nf * hm1 * hm1);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Polynomial with complex coefficients, lowest degree first.
#[derive(Debug, Clone)]
struct Poly(Vec<Complex64>);

impl Poly {
    fn eval(&self, x: f64) -> Complex64 {
        self.0.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * x + c)
    }

    fn derivative(&self) -> Poly {
        Poly(self.0.iter().enumerate().skip(1).map(|(k, c)| c * k as f64).collect())
    }

    /// `sum_j a_j x^{j+1}`.
    fn times_x(&self, scale: Complex64) -> Poly {
        let mut out = vec![Complex64::new(0.0, 0.0)];
        out.extend(self.0.iter().map(|c| c * scale));
        Poly(out)
    }

    fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        let zero = Complex64::new(0.0, 0.0);
        Poly((0..n).map(|i| *self.0.get(i).unwrap_or(&zero) + *other.0.get(i).unwrap_or(&zero)).collect())
    }

    fn scale(&self, s: Complex64) -> Poly {
        Poly(self.0.iter().map(|c| c * s).collect())
    }
}

/// Position wavefunction `(Q(x) G(x))` of `S(chi) sum c_n |n>`, then displaced.
struct Wavefunction {
    poly: Poly,
    k: Complex64,
    norm: f64,
    x0: f64,
    p0: f64,
}

impl Wavefunction {
    fn new(state: &StellarState) -> Self {
        let (r, phi) = (state.chi_mag(), state.chi_phase());
        let (ch, sh) = (r.cosh(), r.sinh());
        let e = Complex64::from_polar(1.0, phi);
        let one = Complex64::new(1.0, 0.0);
        // Annihilated by S a S^dag: G = exp(-K x^2 / 2).
        let k = (ch + e * sh) / (ch - e * sh);
        let norm = (k.re / std::f64::consts::PI).powf(0.25);
        // S a^dag S^dag = ch a^dag + e^{-i phi} sh a, and on Q G
        // a^dag (QG) = ((1 + K) x Q - Q') G / sqrt2, a (QG) = ((1 - K) x Q + Q') G / sqrt2.
        let raise = |q: &Poly| -> Poly {
            let up = q.times_x(one + k).add(&q.derivative().scale(-one));
            let down = q.times_x(one - k).add(&q.derivative());
            up.scale(Complex64::new(ch, 0.0) / std::f64::consts::SQRT_2)
                .add(&down.scale(e.conj() * sh / std::f64::consts::SQRT_2))
        };
        let mut p_n = Poly(vec![one]);
        let mut total = Poly(vec![Complex64::new(0.0, 0.0)]);
        let mut inv_sqrt_fact = 1.0;
        for (n, c) in state.core().iter().enumerate() {
            if n > 0 {
                p_n = raise(&p_n);
                inv_sqrt_fact /= (n as f64).sqrt();
            }
            total = total.add(&p_n.scale(c * inv_sqrt_fact));
        }
        let alpha = state.alpha();
        Wavefunction {
            poly: total,
            k,
            norm,
            x0: std::f64::consts::SQRT_2 * alpha.re,
            p0: std::f64::consts::SQRT_2 * alpha.im,
        }
    }

    fn eval(&self, x: f64) -> Complex64 {
        let y = x - self.x0;
        let gauss = (-0.5 * self.k * y * y).exp() * self.norm;
        Complex64::from_polar(1.0, self.p0 * x) * self.poly.eval(y) * gauss
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FockVector {
    pub amplitudes: Vec<Complex64>,
    /// `1 - sum |a_n|^2`.
    pub truncation_error: f64,
    pub unreliable: bool,
    pub quadrature_order: usize,
}

impl FockVector {
    pub fn n_trunc(&self) -> usize {
        self.amplitudes.len()
    }

    /// `|sum_n a_n e^{-i n theta} h_n(q)|^2`.
    pub fn pdf(&self, theta: QuadratureAngle, q: f64) -> f64 {
        let h = hermite_functions(self.amplitudes.len(), q);
        let t = theta.radians();
        self.amplitudes
            .iter()
            .zip(&h)
            .enumerate()
            .map(|(n, (a, hn))| a * Complex64::from_polar(*hn, -(n as f64) * t))
            .sum::<Complex64>()
            .norm_sqr()
    }
}

/// Truncation adequate for the state's energy scale.
pub fn suggested_truncation(state: &StellarState) -> usize {
    let e = state.mean_energy();
    DEFAULT_TRUNCATION.max((8.0 * (e + 1.0)).ceil() as usize)
}

/// Fock amplitudes by numerical overlap with the Hermite functions.
pub fn fock_expand(state: &StellarState, n_trunc: usize) -> Result<FockVector> {
    if n_trunc < state.rank() + 1 {
        return Err(WitnessError::InvalidArgument(format!(
            "truncation {n_trunc} below rank + 1 = {}",
            state.rank() + 1
        )));
    }
    let wf = Wavefunction::new(state);
    let order = (4 * n_trunc).min(MAX_GH_ORDER);
    let (ys, ws) = gauss_hermite_scaled(order);
    // Centre and width of the product of both Gaussian envelopes.
    let re_k = wf.k.re;
    let centre = re_k * wf.x0 / (1.0 + re_k);
    let width = (2.0 / (1.0 + re_k)).sqrt();
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); n_trunc];
    for (y, w) in ys.iter().zip(&ws) {
        let x = centre + width * y;
        let psi = wf.eval(x) * (w * width);
        for (a, h) in amplitudes.iter_mut().zip(hermite_functions(n_trunc, x)) {
            *a += psi * h;
        }
    }
    // Fix the global phase so the largest amplitude is real and positive.
    if let Some(big) = amplitudes.iter().copied().max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr())) {
        if big.norm() > 0.0 {
            let rot = big.conj() / big.norm();
            for a in amplitudes.iter_mut() {
                *a *= rot;
            }
        }
    }
    let truncation_error = 1.0 - amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>();
    if truncation_error > TRUNCATION_REJECT {
        return Err(WitnessError::TruncationInsufficient {
            missing: truncation_error,
            n_trunc,
        });
    }
    Ok(FockVector {
        amplitudes,
        truncation_error,
        unreliable: truncation_error > TRUNCATION_WARN,
        quadrature_order: order,
    })
}

/// Largest truncation tried by [`fock_expand_auto`].
pub const MAX_AUTO_TRUNCATION: usize = 256;

/// Expands with a truncation grown from [`suggested_truncation`] until the
/// last few amplitudes carry negligible weight. Pointwise quantities such as
/// the quadrature density err by about the neglected amplitude, which is the
/// square root of the norm deficit, so a small deficit alone is not enough.
pub fn fock_expand_auto(state: &StellarState) -> Result<FockVector> {
    let mut n = suggested_truncation(state);
    loop {
        let v = match fock_expand(state, n) {
            Err(WitnessError::TruncationInsufficient { .. }) if n < MAX_AUTO_TRUNCATION => {
                n = (n + n / 2).min(MAX_AUTO_TRUNCATION);
                continue;
            }
            r => r?,
        };
        let tail: f64 = v.amplitudes[n - 8..].iter().map(|a| a.norm_sqr()).sum();
        if tail < 1e-24 || n >= MAX_AUTO_TRUNCATION {
            return Ok(v);
        }
        n = (n + n / 2).min(MAX_AUTO_TRUNCATION);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleEnergy {
    pub energy: f64,
    /// `n_trunc * truncation_error`: bounds the energy the truncation can hide.
    pub correction: f64,
}

pub fn oracle_energy(v: &FockVector) -> OracleEnergy {
    OracleEnergy {
        energy: v.amplitudes.iter().enumerate().map(|(n, a)| n as f64 * a.norm_sqr()).sum(),
        correction: v.n_trunc() as f64 * v.truncation_error.max(0.0),
    }
}

/// Row-major Hermitian matrix on the truncated Fock space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    pub dim: usize,
    pub entries: Vec<Complex64>,
    /// `1 - trace`.
    pub trace_deficit: f64,
}

impl DensityMatrix {
    pub fn from_pure(v: &FockVector) -> Self {
        DensityMatrix::from_mixture(&[(1.0, v.clone())]).expect("single component is consistent")
    }

    pub fn from_mixture(parts: &[(f64, FockVector)]) -> Result<Self> {
        let dim = parts
            .first()
            .ok_or_else(|| WitnessError::InvalidArgument("empty mixture".into()))?
            .1
            .n_trunc();
        if parts.iter().any(|(_, v)| v.n_trunc() != dim) {
            return Err(WitnessError::InvalidArgument("mixture components differ in truncation".into()));
        }
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for (w, v) in parts {
            for i in 0..dim {
                for j in 0..dim {
                    entries[i * dim + j] += *w * v.amplitudes[i] * v.amplitudes[j].conj();
                }
            }
        }
        let trace: f64 = (0..dim).map(|i| entries[i * dim + i].re).sum();
        Ok(DensityMatrix {
            dim,
            entries,
            trace_deficit: 1.0 - trace,
        })
    }

    /// Expands every component of a state at a common truncation.
    pub fn from_state(state: &State, n_trunc: usize) -> Result<Self> {
        let parts = state
            .components()
            .into_iter()
            .map(|(w, s)| Ok((w, fock_expand(s, n_trunc)?)))
            .collect::<Result<Vec<_>>>()?;
        DensityMatrix::from_mixture(&parts)
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.dim + j]
    }

    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        hermitian_eigenvalues(self.dim, &self.entries)
    }
}

/// Eigenvalues of a Hermitian matrix via its real symmetric embedding
/// `[[A, -B], [B, A]]`, whose spectrum is the original one doubled.
pub fn hermitian_eigenvalues(dim: usize, entries: &[Complex64]) -> Result<Vec<f64>> {
    let n = 2 * dim;
    let mut m = vec![0.0; n * n];
    for i in 0..dim {
        for j in 0..dim {
            let z = entries[i * dim + j];
            m[i * n + j] = z.re;
            m[(i + dim) * n + (j + dim)] = z.re;
            m[i * n + (j + dim)] = -z.im;
            m[(i + dim) * n + j] = z.im;
        }
    }
    let mut all = jacobi_eigenvalues(n, m)?;
    all.sort_by(f64::total_cmp);
    Ok(all.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect())
}

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi rotations on a real symmetric matrix.
pub fn jacobi_eigenvalues(n: usize, mut a: Vec<f64>) -> Result<Vec<f64>> {
    let frob: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if frob == 0.0 {
        return Ok(vec![0.0; n]);
    }
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * frob {
            return Ok((0..n).map(|i| a[i * n + i]).collect());
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let (app, aqq) = (a[p * n + p], a[q * n + q]);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    Err(WitnessError::EigensolverFailed { sweeps: MAX_SWEEPS })
}

/// `1/2 sum |lambda(a - b)|`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim != b.dim {
        return Err(WitnessError::InvalidArgument(format!(
            "truncations differ: {} vs {}",
            a.dim, b.dim
        )));
    }
    let diff: Vec<Complex64> = a.entries.iter().zip(&b.entries).map(|(x, y)| x - y).collect();
    Ok(0.5 * hermitian_eigenvalues(a.dim, &diff)?.iter().map(|l| l.abs()).sum::<f64>())
}
