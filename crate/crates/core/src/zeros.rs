//! Real zeros of quadrature distributions.
//!
//! The amplitude at angle `theta` is a Gaussian times a degree-`r` polynomial,
//! so the distribution vanishes exactly at the real roots of that polynomial.
//! Roots come from Durand-Kerner iteration on the monomial coefficients and
//! are mapped back to `q = sqrt(2) sigma u + mu`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WitnessError};
use crate::par;
use crate::states::{QuadratureAngle, StellarState};

/// Default real-classification threshold on `|Im q|`.
pub const DEFAULT_TOL_IMAG: f64 = 1e-8;

/// Roots closer than this (in `u`) are merged into one root with multiplicity.
pub const CLUSTER_RADIUS: f64 = 1e-6;

const MAX_ITERATIONS: usize = 5000;

/// Real zeros of one quadrature distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroSet {
    pub theta: QuadratureAngle,
    pub zeros: Vec<f64>,
    pub multiplicities: Vec<usize>,
    #[serde(default)]
    pub residual_imag: Vec<f64>,
}

impl ZeroSet {
    pub fn is_empty(&self) -> bool {
        self.zeros.is_empty()
    }

    pub fn total_multiplicity(&self) -> usize {
        self.multiplicities.iter().sum()
    }

    /// Same zeros seen from the opposite quadrature.
    pub fn reflected(&self) -> ZeroSet {
        ZeroSet {
            theta: self.theta.reflected(),
            zeros: self.zeros.iter().rev().map(|z| -z).collect(),
            multiplicities: self.multiplicities.iter().rev().copied().collect(),
            residual_imag: self.residual_imag.iter().rev().copied().collect(),
        }
    }
}

/// A root of the amplitude polynomial with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexRoot {
    /// Location in `q`.
    pub q: Complex64,
    /// Location in `u`.
    pub u: Complex64,
    pub multiplicity: usize,
}

fn horner(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// All complex roots of `sum_k coeffs[k] z^k` by Durand-Kerner iteration.
///
/// Returns one entry per root counted with multiplicity. `Err(iterations)` if
/// the simultaneous iteration stalls before the corrections settle.
pub fn durand_kerner(coeffs: &[Complex64]) -> std::result::Result<Vec<Complex64>, usize> {
    let degree = coeffs.len().saturating_sub(1);
    if degree == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[degree];
    let monic: Vec<Complex64> = coeffs.iter().map(|c| c / lead).collect();
    if degree == 1 {
        return Ok(vec![-monic[0]]);
    }

    let radius = 1.0 + monic[..degree].iter().map(|c| c.norm()).fold(0.0, f64::max);
    // Irrational offsets keep the starting points off any symmetry axis.
    let mut roots: Vec<Complex64> = (0..degree)
        .map(|k| {
            let angle = 2.0 * PI * k as f64 / degree as f64 + 0.4 + 0.1 * 2f64.sqrt();
            Complex64::from_polar(radius * (1.0 + 0.01 * k as f64 / degree as f64), angle)
        })
        .collect();

    let mut quiet = 0;
    for iter in 0..MAX_ITERATIONS {
        let mut max_step = 0.0f64;
        for i in 0..degree {
            let zi = roots[i];
            let mut denom = Complex64::new(1.0, 0.0);
            for (j, &zj) in roots.iter().enumerate() {
                if j != i {
                    let d = zi - zj;
                    denom *= if d.norm() == 0.0 { Complex64::new(1e-300, 0.0) } else { d };
                }
            }
            let step = horner(&monic, zi) / denom;
            if step.re.is_finite() && step.im.is_finite() {
                roots[i] = zi - step;
                max_step = max_step.max(step.norm() / zi.norm().max(1.0));
            }
        }
        if max_step < 1e-15 {
            quiet += 1;
            // A few extra sweeps after convergence squeeze out the last bits.
            if quiet >= 3 {
                return Ok(roots);
            }
        } else if iter + 1 == MAX_ITERATIONS {
            break;
        }
    }
    // Clustered (multiple) roots converge only linearly; accept them if the
    // residual is already at the attainable level.
    let scale = monic.iter().map(|c| c.norm()).fold(1.0, f64::max);
    if roots.iter().all(|&z| horner(&monic, z).norm() <= 1e-10 * scale * z.norm().max(1.0).powi(degree as i32)) {
        Ok(roots)
    } else {
        Err(MAX_ITERATIONS)
    }
}

/// Merges roots within `radius` of each other; returns centroids and counts.
fn cluster(roots: &[Complex64], radius: f64) -> Vec<(Complex64, usize)> {
    let mut used = vec![false; roots.len()];
    let mut out = Vec::new();
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let mut members = vec![roots[i]];
        // Grow the cluster transitively.
        let mut k = 0;
        while k < members.len() {
            let m = members[k];
            for j in 0..roots.len() {
                if !used[j] && (roots[j] - m).norm() <= radius {
                    used[j] = true;
                    members.push(roots[j]);
                }
            }
            k += 1;
        }
        let centroid = members.iter().sum::<Complex64>() / members.len() as f64;
        out.push((centroid, members.len()));
    }
    out
}

/// Complex roots of the amplitude polynomial at `theta`, clustered.
pub fn complex_roots(state: &StellarState, theta: QuadratureAngle) -> Result<Vec<ComplexRoot>> {
    let view = state.view(theta);
    let coeffs = view.monomial_coeffs();
    let roots = durand_kerner(&coeffs).map_err(|iterations| WitnessError::RootFindingDiverged {
        degree: coeffs.len() - 1,
        iterations,
        theta: theta.radians(),
    })?;
    let scale = std::f64::consts::SQRT_2 * view.sigma;
    Ok(cluster(&roots, CLUSTER_RADIUS)
        .into_iter()
        .map(|(u, multiplicity)| ComplexRoot {
            q: u * scale + view.mu,
            u,
            multiplicity,
        })
        .collect())
}

/// Real zeros of the quadrature distribution at `theta`.
pub fn find_real_zeros(state: &StellarState, theta: QuadratureAngle, tol_imag: f64) -> Result<ZeroSet> {
    if !(tol_imag > 0.0) {
        return Err(WitnessError::InvalidArgument(format!(
            "tol_imag must be positive, got {tol_imag}"
        )));
    }
    let mut real: Vec<(f64, usize, f64)> = complex_roots(state, theta)?
        .into_iter()
        .filter(|r| r.q.im.abs() <= tol_imag)
        .map(|r| (r.q.re, r.multiplicity, r.q.im.abs()))
        .collect();
    real.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(ZeroSet {
        theta,
        zeros: real.iter().map(|r| r.0).collect(),
        multiplicities: real.iter().map(|r| r.1).collect(),
        residual_imag: real.iter().map(|r| r.2).collect(),
    })
}

/// Zero sets on the uniform grid `theta_k = k pi / n_angles`.
///
/// Half a turn is enough: the other half follows from [`ZeroSet::reflected`].
pub fn scan_angles(state: &StellarState, n_angles: usize, tol_imag: f64) -> Result<Vec<ZeroSet>> {
    if n_angles == 0 {
        return Err(WitnessError::InvalidArgument("n_angles must be at least 1".into()));
    }
    par::map_indexed(n_angles, |k| {
        find_real_zeros(state, QuadratureAngle::new(k as f64 * PI / n_angles as f64), tol_imag)
    })
    .into_iter()
    .collect()
}

/// Every quadrature in `[0, pi)` whose distribution has a real zero.
///
/// Scans the uniform grid, then follows each complex root between adjacent
/// grid angles. When its imaginary part changes sign, the angle at which it
/// crosses the real axis is pinned down by bisection. That catches isolated
/// zero-bearing quadratures that no finite grid would hit.
pub fn locate_zero_angles(state: &StellarState, n_angles: usize, tol_imag: f64) -> Result<Vec<ZeroSet>> {
    if n_angles == 0 {
        return Err(WitnessError::InvalidArgument("n_angles must be at least 1".into()));
    }
    if state.rank() == 0 {
        return Ok(Vec::new());
    }
    let step = PI / n_angles as f64;
    // Grid includes pi so the last interval is examined too.
    let grid: Vec<Result<Vec<Complex64>>> = par::map_indexed(n_angles + 1, |k| {
        let theta = QuadratureAngle::new(k as f64 * step);
        Ok(expand_multiplicities(&complex_roots(state, theta)?))
    });
    let grid: Vec<Vec<Complex64>> = grid.into_iter().collect::<Result<_>>()?;

    let mut found: Vec<ZeroSet> = Vec::new();
    for k in 0..n_angles {
        let zs = find_real_zeros(state, QuadratureAngle::new(k as f64 * step), tol_imag)?;
        if !zs.is_empty() {
            found.push(zs);
        }
    }

    let crossings: Vec<Result<Vec<f64>>> = par::map_indexed(n_angles, |k| {
        let (a, b) = (k as f64 * step, (k + 1) as f64 * step);
        let mut angles = Vec::new();
        for (start, end) in match_roots(&grid[k], &grid[k + 1]) {
            let (ia, ib) = (start.im, end.im);
            if ia.abs() <= tol_imag || ib.abs() <= tol_imag || ia.signum() == ib.signum() {
                continue;
            }
            angles.push(bisect_crossing(state, a, b, start)?);
        }
        Ok(angles)
    });
    for angles in crossings {
        for t in angles? {
            let theta = QuadratureAngle::new(t);
            if theta.radians() >= PI - 1e-12 {
                // Crossing exactly at pi belongs to theta = 0 by reflection.
                continue;
            }
            let zs = find_real_zeros(state, theta, tol_imag.max(1e-7))?;
            if !zs.is_empty() {
                found.push(zs);
            }
        }
    }

    found.sort_by(|a, b| a.theta.radians().total_cmp(&b.theta.radians()));
    found.dedup_by(|b, a| (a.theta.radians() - b.theta.radians()).abs() < 1e-9);
    Ok(found)
}

/// Zero-bearing quadratures over the full circle `[0, 2 pi)`.
pub fn locate_zero_angles_full(state: &StellarState, n_angles: usize, tol_imag: f64) -> Result<Vec<ZeroSet>> {
    let half = locate_zero_angles(state, n_angles, tol_imag)?;
    let mut all: Vec<ZeroSet> = half.iter().cloned().chain(half.iter().map(ZeroSet::reflected)).collect();
    all.sort_by(|a, b| a.theta.radians().total_cmp(&b.theta.radians()));
    Ok(all)
}

fn expand_multiplicities(roots: &[ComplexRoot]) -> Vec<Complex64> {
    roots
        .iter()
        .flat_map(|r| std::iter::repeat_n(r.q, r.multiplicity))
        .collect()
}

/// Greedy nearest-neighbour pairing of two root lists of equal length.
fn match_roots(from: &[Complex64], to: &[Complex64]) -> Vec<(Complex64, Complex64)> {
    let mut taken = vec![false; to.len()];
    let mut pairs = Vec::with_capacity(from.len());
    for &z in from {
        let best = to
            .iter()
            .enumerate()
            .filter(|(j, _)| !taken[*j])
            .min_by(|(_, a), (_, b)| (**a - z).norm().total_cmp(&(**b - z).norm()));
        if let Some((j, &w)) = best {
            taken[j] = true;
            pairs.push((z, w));
        }
    }
    pairs
}

/// Finds the angle in `[a, b]` where the root that starts at `start` becomes real.
fn bisect_crossing(state: &StellarState, mut a: f64, mut b: f64, start: Complex64) -> Result<f64> {
    let roots_at = |t: f64| -> Result<Vec<Complex64>> {
        Ok(expand_multiplicities(&complex_roots(state, QuadratureAngle::new(t))?))
    };
    let nearest = |roots: &[Complex64], z: Complex64| -> Complex64 {
        *roots
            .iter()
            .min_by(|x, y| (**x - z).norm().total_cmp(&(**y - z).norm()))
            .expect("nonempty")
    };
    let mut tracked_a = start;
    let sign_a = start.im.signum();
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let z = nearest(&roots_at(mid)?, tracked_a);
        if z.im == 0.0 {
            return Ok(mid);
        }
        if z.im.signum() == sign_a {
            a = mid;
            tracked_a = z;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::hermite_monomial_coeffs;
    use crate::states::psi_t;

    /// Real roots of `H_n` from sign changes on a fine grid plus bisection.
    fn hermite_roots_by_sign_change(n: usize) -> Vec<f64> {
        let coeffs: Vec<f64> = hermite_monomial_coeffs(n).into_iter().map(|c| c as f64).collect();
        let h = |x: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
        let mut roots = Vec::new();
        let mut x = -6.0;
        let dx = 1e-3;
        while x < 6.0 {
            let (mut a, mut b) = (x, x + dx);
            if h(a).signum() != h(b).signum() {
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if h(a).signum() == h(m).signum() {
                        a = m
                    } else {
                        b = m
                    }
                }
                roots.push(0.5 * (a + b));
            }
            x += dx;
        }
        roots
    }

    #[test]
    fn fock_two_zeros() {
        let zs = find_real_zeros(&StellarState::fock(2), 0.0.into(), DEFAULT_TOL_IMAG).unwrap();
        let r = 0.5f64.sqrt();
        assert_eq!(zs.multiplicities, vec![1, 1]);
        assert!((zs.zeros[0] + r).abs() < 1e-12 && (zs.zeros[1] - r).abs() < 1e-12);
    }

    #[test]
    fn vacuum_has_no_zeros() {
        for t in [0.0, 1.0, 2.5] {
            assert!(find_real_zeros(&StellarState::vacuum(), t.into(), DEFAULT_TOL_IMAG)
                .unwrap()
                .is_empty());
        }
    }

    #[test]
    fn fock_zeros_are_hermite_roots() {
        for n in 1..=8 {
            let want = hermite_roots_by_sign_change(n);
            assert_eq!(want.len(), n);
            for t in [0.0, 0.9, 2.2] {
                let zs = find_real_zeros(&StellarState::fock(n), t.into(), DEFAULT_TOL_IMAG).unwrap();
                assert_eq!(zs.zeros.len(), n, "n={n}");
                for (a, b) in zs.zeros.iter().zip(&want) {
                    assert!((a - b).abs() < 1e-9, "n={n}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn root_count_and_residual() {
        let s = StellarState::from_unnormalized(
            Complex64::new(0.5, -1.0),
            0.7,
            1.2,
            vec![
                Complex64::new(0.3, 0.2),
                Complex64::new(-0.1, 0.5),
                Complex64::new(0.4, 0.0),
                Complex64::new(0.0, -0.6),
                Complex64::new(0.2, 0.1),
            ],
        )
        .unwrap();
        for t in [0.0, 0.5, 1.7, 3.0] {
            let theta = QuadratureAngle::new(t);
            let roots = complex_roots(&s, theta).unwrap();
            assert_eq!(roots.iter().map(|r| r.multiplicity).sum::<usize>(), 4);
            let coeffs = s.wavefunction_polynomial(theta);
            let lead = coeffs.last().unwrap().norm();
            for r in roots {
                assert!(horner(&coeffs, r.u).norm() <= 1e-8 * lead.max(1.0));
            }
        }
    }

    #[test]
    fn double_root_is_merged() {
        // (z - 1)^2 (z + 2)
        let coeffs = [2.0, -3.0, 0.0, 1.0].map(|c| Complex64::new(c, 0.0));
        let roots = durand_kerner(&coeffs).unwrap();
        let clusters = cluster(&roots, CLUSTER_RADIUS);
        assert_eq!(clusters.len(), 2);
        let double = clusters.iter().find(|c| c.1 == 2).unwrap();
        assert!((double.0 - Complex64::new(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn reflection_negates_zeros() {
        let s = psi_t();
        let half = locate_zero_angles(&s, 90, DEFAULT_TOL_IMAG).unwrap();
        for zs in &half {
            let other = find_real_zeros(&s, zs.theta.reflected(), 1e-7).unwrap();
            let refl = zs.reflected();
            assert_eq!(other.zeros.len(), refl.zeros.len());
            for (a, b) in other.zeros.iter().zip(&refl.zeros) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn psi_t_zero_layout() {
        let full = locate_zero_angles_full(&psi_t(), 720, DEFAULT_TOL_IMAG).unwrap();
        assert_eq!(full.len(), 6);
        assert_eq!(full.iter().map(|z| z.zeros.len()).sum::<usize>(), 8);
        for zs in &full {
            for &q in &zs.zeros {
                assert!(psi_t().quadrature_pdf(zs.theta, q) <= 1e-14);
            }
        }
    }

    #[test]
    fn fock_one_every_angle() {
        let sets = scan_angles(&StellarState::fock(1), 12, DEFAULT_TOL_IMAG).unwrap();
        assert_eq!(sets.len(), 12);
        for zs in sets {
            assert_eq!(zs.zeros.len(), 1);
            assert!(zs.zeros[0].abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_scan_is_empty() {
        let g = StellarState::gaussian(Complex64::new(0.3, 0.8), 0.5, 1.0).unwrap();
        assert!(scan_angles(&g, 16, DEFAULT_TOL_IMAG).unwrap().iter().all(ZeroSet::is_empty));
        assert!(scan_angles(&g, 0, DEFAULT_TOL_IMAG).is_err());
    }
}
