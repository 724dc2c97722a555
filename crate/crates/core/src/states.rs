//! Displaced, squeezed states of finite stellar rank and their quadrature
//! statistics.
//!
//! A pure state of stellar rank `r` is written `D(alpha) S(chi) sum_n c_n |n>`
//! with `chi = |chi| e^{i phi}`. Quadratures follow `sqrt(2) a = x + i p` and
//! `q_theta = cos(theta) x + sin(theta) p`, so the vacuum has variance 1/2.
//!
//! At angle `theta` the amplitude is a Gaussian times a degree-`r` polynomial
//! in `u = (q - mu) / (sqrt(2) sigma)`:
//!
//! ```text
//! <q_theta|psi> ~ sum_n c_n e^{-i n theta} / sqrt(2^n n!) H_n(u) beta^n
//! beta = (cosh|chi| - e^{-i(phi - 2 theta)} sinh|chi|) / (sqrt(2) sigma)
//! ```
//!
//! `|beta| = 1`, so the polynomial only carries phases on top of the Hermite
//! structure.

use std::f64::consts::{PI, SQRT_2, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WitnessError};
use crate::special::{hermite_monomial_coeffs, MAX_HERMITE_DEGREE};

pub type ComplexScalar = Complex64;

/// Squeezing magnitudes above this overflow `cosh` in downstream formulas.
pub const MAX_SQUEEZING: f64 = 10.0;

const NORM_TOL: f64 = 1e-12;

/// A quadrature angle reduced to `[0, 2 pi)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct QuadratureAngle(f64);

impl QuadratureAngle {
    pub fn new(theta: f64) -> Self {
        let mut t = theta.rem_euclid(TAU);
        // rem_euclid can round up to exactly TAU for tiny negative inputs.
        if t >= TAU {
            t = 0.0;
        }
        QuadratureAngle(t)
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    /// The opposite quadrature, `q_{theta + pi} = -q_theta`.
    pub fn reflected(self) -> Self {
        QuadratureAngle::new(self.0 + PI)
    }
}

impl From<f64> for QuadratureAngle {
    fn from(theta: f64) -> Self {
        QuadratureAngle::new(theta)
    }
}

impl From<QuadratureAngle> for f64 {
    fn from(a: QuadratureAngle) -> f64 {
        a.0
    }
}

/// Pure state `D(alpha) S(chi) sum_{n<=r} c_n |n>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStellarState", into = "RawStellarState")]
pub struct StellarState {
    alpha: Complex64,
    chi_mag: f64,
    chi_phase: f64,
    core: Vec<Complex64>,
}

impl StellarState {
    /// Validating constructor. The core must already be normalized and its
    /// last coefficient must be nonzero.
    pub fn new(alpha: Complex64, chi_mag: f64, chi_phase: f64, core: Vec<Complex64>) -> Result<Self> {
        check_finite_complex(alpha, "alpha")?;
        if !chi_mag.is_finite() || !chi_phase.is_finite() {
            return Err(WitnessError::InvalidState("squeezing must be finite".into()));
        }
        if !(0.0..=MAX_SQUEEZING).contains(&chi_mag) {
            return Err(WitnessError::InvalidState(format!(
                "squeezing magnitude {chi_mag} outside [0, {MAX_SQUEEZING}]"
            )));
        }
        if core.is_empty() {
            return Err(WitnessError::InvalidState("core must hold at least c_0".into()));
        }
        if core.len() - 1 > MAX_HERMITE_DEGREE {
            return Err(WitnessError::InvalidState(format!(
                "stellar rank {} exceeds {MAX_HERMITE_DEGREE}",
                core.len() - 1
            )));
        }
        for c in &core {
            check_finite_complex(*c, "core coefficient")?;
        }
        let norm: f64 = core.iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(WitnessError::InvalidState(format!(
                "core norm^2 is {norm}, expected 1"
            )));
        }
        if core.len() > 1 && core[core.len() - 1] == Complex64::new(0.0, 0.0) {
            return Err(WitnessError::InvalidState(
                "trailing core coefficient is zero; declared rank is not exact".into(),
            ));
        }
        Ok(StellarState {
            alpha,
            chi_mag,
            chi_phase: QuadratureAngle::new(chi_phase).radians(),
            core,
        })
    }

    /// Normalizes the core and drops exactly-zero trailing coefficients.
    pub fn from_unnormalized(
        alpha: Complex64,
        chi_mag: f64,
        chi_phase: f64,
        mut core: Vec<Complex64>,
    ) -> Result<Self> {
        while core.len() > 1 && core[core.len() - 1] == Complex64::new(0.0, 0.0) {
            core.pop();
        }
        let norm = core.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(WitnessError::InvalidState("core has zero or non-finite norm".into()));
        }
        for c in core.iter_mut() {
            *c /= norm;
        }
        StellarState::new(alpha, chi_mag, chi_phase, core)
    }

    pub fn vacuum() -> Self {
        StellarState::fock(0)
    }

    pub fn fock(n: usize) -> Self {
        let mut core = vec![Complex64::new(0.0, 0.0); n + 1];
        core[n] = Complex64::new(1.0, 0.0);
        StellarState::new(Complex64::new(0.0, 0.0), 0.0, 0.0, core).expect("Fock state is valid")
    }

    /// Gaussian state `D(alpha) S(chi) |0>`.
    pub fn gaussian(alpha: Complex64, chi_mag: f64, chi_phase: f64) -> Result<Self> {
        StellarState::new(alpha, chi_mag, chi_phase, vec![Complex64::new(1.0, 0.0)])
    }

    /// Undisplaced, unsqueezed superposition of Fock states.
    pub fn from_core(core: Vec<Complex64>) -> Result<Self> {
        StellarState::from_unnormalized(Complex64::new(0.0, 0.0), 0.0, 0.0, core)
    }

    pub fn alpha(&self) -> Complex64 {
        self.alpha
    }

    pub fn chi_mag(&self) -> f64 {
        self.chi_mag
    }

    pub fn chi_phase(&self) -> f64 {
        self.chi_phase
    }

    pub fn core(&self) -> &[Complex64] {
        &self.core
    }

    /// Declared stellar rank `r`.
    pub fn rank(&self) -> usize {
        self.core.len() - 1
    }

    /// Mean and standard deviation of the Gaussian envelope at `theta`.
    pub fn gaussian_moments(&self, theta: QuadratureAngle) -> (f64, f64) {
        let t = theta.radians();
        let mu = SQRT_2 * (self.alpha * Complex64::from_polar(1.0, -t)).re;
        let two_r = 2.0 * self.chi_mag;
        let var = 0.5 * (two_r.cosh() - (self.chi_phase - 2.0 * t).cos() * two_r.sinh());
        (mu, var.sqrt())
    }

    /// Precomputes everything needed to evaluate the distribution at `theta`.
    pub fn view(&self, theta: QuadratureAngle) -> QuadratureView {
        let t = theta.radians();
        let (mu, sigma) = self.gaussian_moments(theta);
        let (ch, sh) = (self.chi_mag.cosh(), self.chi_mag.sinh());
        let beta = (Complex64::new(ch, 0.0) - Complex64::from_polar(sh, -(self.chi_phase - 2.0 * t)))
            / (SQRT_2 * sigma);
        let mut hermite_coeffs = Vec::with_capacity(self.core.len());
        let mut beta_pow = Complex64::new(1.0, 0.0);
        let mut scale = 1.0f64; // 1 / sqrt(2^n n!)
        for (n, c) in self.core.iter().enumerate() {
            if n > 0 {
                beta_pow *= beta;
                scale /= (2.0 * n as f64).sqrt();
            }
            hermite_coeffs.push(c * Complex64::from_polar(1.0, -(n as f64) * t) * beta_pow * scale);
        }
        QuadratureView {
            theta,
            mu,
            sigma,
            hermite_coeffs,
        }
    }

    pub fn quadrature_pdf(&self, theta: QuadratureAngle, q: f64) -> f64 {
        self.view(theta).pdf(q)
    }

    /// Monomial coefficients (lowest degree first) of the amplitude polynomial
    /// in `u = (q - mu) / (sqrt(2) sigma)`.
    pub fn wavefunction_polynomial(&self, theta: QuadratureAngle) -> Vec<Complex64> {
        self.view(theta).monomial_coeffs()
    }

    /// `<n>` in closed form.
    pub fn mean_energy(&self) -> f64 {
        let c = &self.core;
        let (ch, sh) = (self.chi_mag.cosh(), self.chi_mag.sinh());
        let cosh2 = (2.0 * self.chi_mag).cosh();
        let phase = Complex64::from_polar(1.0, -self.chi_phase);
        let alpha = self.alpha;

        let number: f64 = c.iter().enumerate().map(|(n, cn)| n as f64 * cn.norm_sqr()).sum();
        // <a> and <a^2> on the core.
        let mut a1 = Complex64::new(0.0, 0.0);
        for n in 0..c.len().saturating_sub(1) {
            a1 += ((n + 1) as f64).sqrt() * c[n].conj() * c[n + 1];
        }
        let mut a2 = Complex64::new(0.0, 0.0);
        for n in 0..c.len().saturating_sub(2) {
            a2 += (((n + 1) * (n + 2)) as f64).sqrt() * c[n].conj() * c[n + 2];
        }

        let energy = alpha.norm_sqr() + sh * sh + cosh2 * number - 2.0 * sh * ch * (phase * a2).re
            + 2.0 * ch * (alpha.conj() * a1).re
            - 2.0 * sh * (alpha * phase * a1).re;
        energy.max(0.0)
    }
}

/// The distribution of one quadrature of one pure state.
#[derive(Debug, Clone)]
pub struct QuadratureView {
    pub theta: QuadratureAngle,
    pub mu: f64,
    pub sigma: f64,
    /// Coefficients `d_n` of `P(u) = sum_n d_n H_n(u)`.
    pub hermite_coeffs: Vec<Complex64>,
}

impl QuadratureView {
    pub fn rank(&self) -> usize {
        self.hermite_coeffs.len() - 1
    }

    pub fn to_u(&self, q: f64) -> f64 {
        (q - self.mu) / (SQRT_2 * self.sigma)
    }

    pub fn to_q(&self, u: f64) -> f64 {
        SQRT_2 * self.sigma * u + self.mu
    }

    /// `P(u)` through the Hermite recurrence.
    pub fn amplitude_poly(&self, u: f64) -> Complex64 {
        let d = &self.hermite_coeffs;
        let mut acc = d[0];
        if d.len() == 1 {
            return acc;
        }
        let (mut h_prev, mut h) = (1.0, 2.0 * u);
        acc += d[1] * h;
        for (k, dk) in d.iter().enumerate().skip(2) {
            let next = 2.0 * u * h - 2.0 * (k - 1) as f64 * h_prev;
            h_prev = h;
            h = next;
            acc += dk * h;
        }
        acc
    }

    pub fn gaussian_density(&self, q: f64) -> f64 {
        let u = self.to_u(q);
        (-u * u).exp() / (self.sigma * (2.0 * PI).sqrt())
    }

    pub fn pdf(&self, q: f64) -> f64 {
        self.amplitude_poly(self.to_u(q)).norm_sqr() * self.gaussian_density(q)
    }

    /// Monomial coefficients of `P(u)`, lowest degree first.
    pub fn monomial_coeffs(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.hermite_coeffs.len()];
        for (n, d) in self.hermite_coeffs.iter().enumerate() {
            for (k, h) in hermite_monomial_coeffs(n).into_iter().enumerate() {
                out[k] += d * h as f64;
            }
        }
        out
    }
}

/// Finite convex combination of pure states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixedState", into = "RawMixedState")]
pub struct MixedState {
    components: Vec<(f64, StellarState)>,
}

impl MixedState {
    pub fn new(components: Vec<(f64, StellarState)>) -> Result<Self> {
        if components.is_empty() {
            return Err(WitnessError::InvalidState("mixture has no components".into()));
        }
        for (w, _) in &components {
            if !(w.is_finite() && *w > 0.0 && *w <= 1.0) {
                return Err(WitnessError::InvalidState(format!("mixture weight {w} outside (0, 1]")));
            }
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(WitnessError::InvalidState(format!("mixture weights sum to {total}")));
        }
        Ok(MixedState { components })
    }

    pub fn pure(state: StellarState) -> Self {
        MixedState {
            components: vec![(1.0, state)],
        }
    }

    pub fn components(&self) -> &[(f64, StellarState)] {
        &self.components
    }

    pub fn quadrature_pdf(&self, theta: QuadratureAngle, q: f64) -> f64 {
        self.components
            .iter()
            .map(|(w, s)| w * s.quadrature_pdf(theta, q))
            .sum()
    }

    pub fn mean_energy(&self) -> f64 {
        self.components.iter().map(|(w, s)| w * s.mean_energy()).sum()
    }

    pub fn max_rank(&self) -> usize {
        self.components.iter().map(|(_, s)| s.rank()).max().unwrap_or(0)
    }
}

/// Either kind of state; serialized untagged so both JSON shapes are accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum State {
    Mixed(MixedState),
    Pure(StellarState),
}

impl State {
    pub fn quadrature_pdf(&self, theta: QuadratureAngle, q: f64) -> f64 {
        match self {
            State::Pure(s) => s.quadrature_pdf(theta, q),
            State::Mixed(m) => m.quadrature_pdf(theta, q),
        }
    }

    pub fn mean_energy(&self) -> f64 {
        match self {
            State::Pure(s) => s.mean_energy(),
            State::Mixed(m) => m.mean_energy(),
        }
    }

    /// Weighted pure components; a pure state is a single component of weight 1.
    pub fn components(&self) -> Vec<(f64, &StellarState)> {
        match self {
            State::Pure(s) => vec![(1.0, s)],
            State::Mixed(m) => m.components.iter().map(|(w, s)| (*w, s)).collect(),
        }
    }

    pub fn max_rank(&self) -> usize {
        match self {
            State::Pure(s) => s.rank(),
            State::Mixed(m) => m.max_rank(),
        }
    }
}

impl From<StellarState> for State {
    fn from(s: StellarState) -> Self {
        State::Pure(s)
    }
}

impl From<MixedState> for State {
    fn from(m: MixedState) -> Self {
        State::Mixed(m)
    }
}

fn check_finite_complex(z: Complex64, what: &str) -> Result<()> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(WitnessError::InvalidState(format!("{what} is not finite")))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStellarState {
    alpha: [f64; 2],
    chi: [f64; 2],
    core: Vec<[f64; 2]>,
}

impl TryFrom<RawStellarState> for StellarState {
    type Error = WitnessError;

    fn try_from(raw: RawStellarState) -> Result<Self> {
        StellarState::new(
            Complex64::new(raw.alpha[0], raw.alpha[1]),
            raw.chi[0],
            raw.chi[1],
            raw.core.iter().map(|c| Complex64::new(c[0], c[1])).collect(),
        )
    }
}

impl From<StellarState> for RawStellarState {
    fn from(s: StellarState) -> Self {
        RawStellarState {
            alpha: [s.alpha.re, s.alpha.im],
            chi: [s.chi_mag, s.chi_phase],
            core: s.core.iter().map(|c| [c.re, c.im]).collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawComponent {
    weight: f64,
    state: StellarState,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMixedState {
    components: Vec<RawComponent>,
}

impl TryFrom<RawMixedState> for MixedState {
    type Error = WitnessError;

    fn try_from(raw: RawMixedState) -> Result<Self> {
        MixedState::new(raw.components.into_iter().map(|c| (c.weight, c.state)).collect())
    }
}

impl From<MixedState> for RawMixedState {
    fn from(m: MixedState) -> Self {
        RawMixedState {
            components: m
                .components
                .into_iter()
                .map(|(weight, state)| RawComponent { weight, state })
                .collect(),
        }
    }
}

/// `sqrt(1/10)|0> + i sqrt(3/5)|1> + sqrt(3/10)|2>`: rank 2, energy 6/5,
/// real zeros on several isolated quadratures.
pub fn psi_t() -> StellarState {
    StellarState::new(
        Complex64::new(0.0, 0.0),
        0.0,
        0.0,
        vec![
            Complex64::new(0.1f64.sqrt(), 0.0),
            Complex64::new(0.0, 0.6f64.sqrt()),
            Complex64::new(0.3f64.sqrt(), 0.0),
        ],
    )
    .expect("psi_T is normalized")
}

/// `p |0><0| + (1 - p) |1><1|`, dropping a component whose weight is zero.
pub fn lossy_single_photon(p: f64) -> Result<MixedState> {
    if !(0.0..=1.0).contains(&p) {
        return Err(WitnessError::InvalidArgument(format!("loss {p} outside [0, 1]")));
    }
    let mut components = Vec::with_capacity(2);
    if p > 0.0 {
        components.push((p, StellarState::vacuum()));
    }
    if p < 1.0 {
        components.push((1.0 - p, StellarState::fock(1)));
    }
    MixedState::new(components)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn gaussian_moment_examples() {
        let (mu, sigma) = StellarState::vacuum().gaussian_moments(0.0.into());
        assert_eq!(mu, 0.0);
        assert!((sigma - 0.5f64.sqrt()).abs() < 1e-15);

        let coh = StellarState::gaussian(Complex64::new(1.0, 0.0), 0.0, 0.0).unwrap();
        let (mu, sigma) = coh.gaussian_moments(0.0.into());
        assert!((mu - SQRT_2).abs() < 1e-15);
        assert!((sigma - 0.5f64.sqrt()).abs() < 1e-15);

        let sq = StellarState::gaussian(Complex64::new(0.0, 0.0), 0.5, 0.0).unwrap();
        let (_, sigma) = sq.gaussian_moments(0.0.into());
        let want = (0.5 * (1.0f64.cosh() - 1.0f64.sinh())).sqrt();
        assert!((sigma - want).abs() < 1e-15);
        assert!((sigma - 0.42888).abs() < 1e-5);
    }

    #[test]
    fn pdf_examples() {
        let vac = StellarState::vacuum();
        assert!((vac.quadrature_pdf(0.0.into(), 0.0) - FRAC_1_SQRT_PI).abs() < 1e-15);
        let one = StellarState::fock(1);
        for t in [0.0, 0.4, 2.0, 5.0] {
            assert_eq!(one.quadrature_pdf(t.into(), 0.0), 0.0);
        }
        let want = 2.0 * FRAC_1_SQRT_PI * (-1.0f64).exp();
        assert!((one.quadrature_pdf(0.0.into(), 1.0) - want).abs() < 1e-15);
        assert!((want - 0.41511).abs() < 1e-5);
        let two = StellarState::fock(2);
        assert!(two.quadrature_pdf(0.0.into(), 0.5f64.sqrt()) < 1e-30);
    }

    #[test]
    fn mixed_pdf_examples() {
        let th = QuadratureAngle::new(0.0);
        let r0 = lossy_single_photon(0.0).unwrap();
        let r1 = lossy_single_photon(1.0).unwrap();
        for q in [-1.0, 0.3, 2.0] {
            assert_eq!(r0.quadrature_pdf(th, q), StellarState::fock(1).quadrature_pdf(th, q));
            assert_eq!(r1.quadrature_pdf(th, q), StellarState::vacuum().quadrature_pdf(th, q));
        }
        let half = lossy_single_photon(0.5).unwrap();
        assert!((half.quadrature_pdf(th, 0.0) - 0.5 * FRAC_1_SQRT_PI).abs() < 1e-15);
    }

    #[test]
    fn energy_examples() {
        assert_eq!(StellarState::vacuum().mean_energy(), 0.0);
        assert!((psi_t().mean_energy() - 1.2).abs() < 1e-14);
        let coh = StellarState::gaussian(Complex64::new(1.0, 0.0), 0.0, 0.0).unwrap();
        assert!((coh.mean_energy() - 1.0).abs() < 1e-15);
        for p in [0.0, 0.25, 0.5, 1.0] {
            let m = lossy_single_photon(p).unwrap();
            assert!((m.mean_energy() - (1.0 - p)).abs() < 1e-15);
        }
        let eq = MixedState::new(vec![(0.5, StellarState::vacuum()), (0.5, StellarState::fock(2))]).unwrap();
        assert!((eq.mean_energy() - 1.0).abs() < 1e-15);
        let single = MixedState::pure(psi_t());
        assert_eq!(single.mean_energy(), psi_t().mean_energy());
    }

    #[test]
    fn polynomial_examples() {
        let p1 = StellarState::fock(1).wavefunction_polynomial(0.0.into());
        assert_eq!(p1.len(), 2);
        assert!(p1[0].norm() < 1e-15);
        assert!((p1[1] - Complex64::new(SQRT_2, 0.0)).norm() < 1e-15);

        assert_eq!(StellarState::vacuum().wavefunction_polynomial(1.0.into()).len(), 1);

        let p2 = StellarState::fock(2).wavefunction_polynomial(0.0.into());
        // (4u^2 - 2) / sqrt(8) with sqrt(2) sigma = 1, so u = q = +-1/sqrt(2).
        for u in [0.5f64.sqrt(), -(0.5f64.sqrt())] {
            let v = p2[0] + p2[1] * u + p2[2] * u * u;
            assert!(v.norm() < 1e-14);
        }
    }

    #[test]
    fn constructor_validation() {
        let z = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        assert!(StellarState::new(z, 0.0, 0.0, vec![one, z]).is_err());
        assert!(StellarState::new(z, 0.0, 0.0, vec![one * 0.5]).is_err());
        assert!(StellarState::new(Complex64::new(f64::NAN, 0.0), 0.0, 0.0, vec![one]).is_err());
        assert!(StellarState::new(z, 11.0, 0.0, vec![one]).is_err());
        assert!(StellarState::new(z, 0.0, 0.0, vec![]).is_err());
        let s = StellarState::from_unnormalized(z, 0.0, 7.0, vec![one, one, z]).unwrap();
        assert_eq!(s.rank(), 1);
        assert!(s.chi_phase() < TAU);
        assert!(MixedState::new(vec![(0.6, StellarState::vacuum())]).is_err());
        assert!(lossy_single_photon(1.5).is_err());
    }

    #[test]
    fn angle_reduction() {
        assert!((QuadratureAngle::new(-0.5).radians() - (TAU - 0.5)).abs() < 1e-15);
        assert!((QuadratureAngle::new(7.0).radians() - (7.0 - TAU)).abs() < 1e-15);
        assert!(QuadratureAngle::new(-1e-300).radians() < TAU);
    }

    #[test]
    fn json_round_trip() {
        let s = StellarState::new(
            Complex64::new(0.3, -0.2),
            0.4,
            1.0,
            vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)],
        )
        .unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(text, r#"{"alpha":[0.3,-0.2],"chi":[0.4,1.0],"core":[[0.6,0.0],[0.0,0.8]]}"#);
        let back: State = serde_json::from_str(&text).unwrap();
        assert_eq!(back, State::Pure(s));

        let m = lossy_single_photon(0.3).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.starts_with(r#"{"components":[{"weight":0.3,"state":"#));
        let back: State = serde_json::from_str(&text).unwrap();
        assert_eq!(back, State::Mixed(m));

        assert!(serde_json::from_str::<State>(r#"{"alpha":[0,0],"chi":[0,0],"core":[[0.5,0]]}"#).is_err());
    }

    #[test]
    fn normalization_on_random_states() {
        let states = [
            psi_t(),
            StellarState::from_unnormalized(
                Complex64::new(1.2, -0.7),
                0.8,
                2.1,
                vec![
                    Complex64::new(0.3, 0.1),
                    Complex64::new(-0.5, 0.2),
                    Complex64::new(0.1, 0.4),
                    Complex64::new(0.2, -0.3),
                ],
            )
            .unwrap(),
        ];
        for s in &states {
            for t in [0.0, 0.7, 1.9, 3.3] {
                let th = QuadratureAngle::new(t);
                let (mu, sigma) = s.gaussian_moments(th);
                let l = 8.0f64.max(mu.abs() + 10.0 * sigma) + 3.0;
                let mass = simpson(|q| s.quadrature_pdf(th, q), -l, l, 40_000);
                assert!((mass - 1.0).abs() < 1e-8, "mass {mass}");
            }
        }
    }

    #[test]
    fn fock_pdf_is_rotation_invariant() {
        for n in 0..6 {
            let s = StellarState::fock(n);
            for q in [-2.0, -0.3, 0.0, 1.1] {
                let base = s.quadrature_pdf(0.0.into(), q);
                for k in 1..24 {
                    let th = QuadratureAngle::new(k as f64 * TAU / 24.0);
                    assert!((s.quadrature_pdf(th, q) - base).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn pdf_factorizes_through_monomials() {
        let s = StellarState::from_unnormalized(
            Complex64::new(-0.4, 0.9),
            0.6,
            0.3,
            vec![Complex64::new(0.2, 0.0), Complex64::new(0.1, -0.7), Complex64::new(0.5, 0.3)],
        )
        .unwrap();
        let th = QuadratureAngle::new(1.3);
        let view = s.view(th);
        let mono = view.monomial_coeffs();
        for i in -30..=30 {
            let q = view.mu + 0.1 * i as f64;
            let u = view.to_u(q);
            let p = mono.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * u + c);
            let factored = p.norm_sqr() * view.gaussian_density(q);
            let direct = s.quadrature_pdf(th, q);
            assert!((factored - direct).abs() <= 1e-10 * direct.max(1e-300), "q={q}");
        }
    }

    #[test]
    fn gaussian_pdf_positive() {
        let s = StellarState::gaussian(Complex64::new(1.5, -0.5), 1.0, 0.4).unwrap();
        for i in -200..=200 {
            assert!(s.quadrature_pdf(0.9.into(), 0.05 * i as f64) > 0.0);
        }
    }
}
