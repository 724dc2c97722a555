//! Witness windows and their expectation values.
//!
//! A window `(theta, x, eta)` is the projector onto `q_theta` outcomes in
//! `[x - eta/2, x + eta/2]`. Its expectation on a state is the probability
//! mass the quadrature distribution puts in that interval. A [`WindowSet`] sums
//! several windows without normalizing, so its value lies in `[0, len]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WitnessError};
use crate::quadrature::{gauss_legendre, integrate};
use crate::special::erf_diff;
use crate::states::{MixedState, QuadratureAngle, QuadratureView, State, StellarState};
use crate::zeros::locate_zero_angles;

/// Absolute tolerance for adaptive integration of general-rank windows.
pub const QUADRATURE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWindow")]
pub struct Window {
    pub theta: QuadratureAngle,
    pub x: f64,
    pub eta: f64,
}

#[derive(Deserialize)]
struct RawWindow {
    theta: f64,
    x: f64,
    eta: f64,
}

impl TryFrom<RawWindow> for Window {
    type Error = WitnessError;

    fn try_from(raw: RawWindow) -> Result<Self> {
        Window::new(raw.theta, raw.x, raw.eta)
    }
}

impl Window {
    pub fn new(theta: f64, x: f64, eta: f64) -> Result<Self> {
        if !theta.is_finite() || !x.is_finite() {
            return Err(WitnessError::InvalidWindow("theta and x must be finite".into()));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(WitnessError::InvalidWindow(format!("width must be positive, got {eta}")));
        }
        Ok(Window {
            theta: QuadratureAngle::new(theta),
            x,
            eta,
        })
    }

    pub fn lower(&self) -> f64 {
        self.x - 0.5 * self.eta
    }

    pub fn upper(&self) -> f64 {
        self.x + 0.5 * self.eta
    }

    pub fn contains(&self, q: f64) -> bool {
        q >= self.lower() && q <= self.upper()
    }

    /// Same window with a different width.
    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        Window::new(self.theta.radians(), self.x, eta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Window>", into = "Vec<Window>")]
pub struct WindowSet {
    windows: Vec<Window>,
}

impl WindowSet {
    pub fn new(windows: Vec<Window>) -> Result<Self> {
        if windows.is_empty() {
            return Err(WitnessError::InvalidWindow("window set is empty".into()));
        }
        Ok(WindowSet { windows })
    }

    pub fn single(w: Window) -> Self {
        WindowSet { windows: vec![w] }
    }

    /// `n` windows at `theta = k pi / n`, all centred on `x` with width `eta`.
    pub fn equiangular(n: usize, x: f64, eta: f64) -> Result<Self> {
        WindowSet::new(
            (0..n)
                .map(|k| Window::new(k as f64 * PI / n as f64, x, eta))
                .collect::<Result<_>>()?,
        )
    }

    pub fn windows(&self) -> &[Window] {
        &self.windows
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Every window resized to width `eta`.
    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        WindowSet::new(self.windows.iter().map(|w| w.with_eta(eta)).collect::<Result<_>>()?)
    }

    /// Distinct angles in first-seen order.
    pub fn angles(&self) -> Vec<QuadratureAngle> {
        let mut out: Vec<QuadratureAngle> = Vec::new();
        for w in &self.windows {
            if !out.iter().any(|a| same_angle(*a, w.theta)) {
                out.push(w.theta);
            }
        }
        out
    }
}

impl TryFrom<Vec<Window>> for WindowSet {
    type Error = WitnessError;

    fn try_from(v: Vec<Window>) -> Result<Self> {
        WindowSet::new(v)
    }
}

impl From<WindowSet> for Vec<Window> {
    fn from(ws: WindowSet) -> Self {
        ws.windows
    }
}

pub(crate) fn same_angle(a: QuadratureAngle, b: QuadratureAngle) -> bool {
    let d = (a.radians() - b.radians()).abs();
    d < 1e-12 || (std::f64::consts::TAU - d) < 1e-12
}

/// `Tr(psi W)` for a pure state.
pub fn expectation_pure(state: &StellarState, w: &Window) -> Result<f64> {
    let view = state.view(w.theta);
    expectation_view(&view, w)
}

/// Expectation on a precomputed quadrature view (the hot path of the optimizer).
pub fn expectation_view(view: &QuadratureView, w: &Window) -> Result<f64> {
    let value = if view.rank() <= 1 {
        closed_form_rank1(view, w)
    } else {
        integrate(|q| view.pdf(q), w.lower(), w.upper(), QUADRATURE_TOL)?
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Same quantity by adaptive quadrature regardless of rank.
pub fn expectation_numeric(state: &StellarState, w: &Window) -> Result<f64> {
    let view = state.view(w.theta);
    Ok(integrate(|q| view.pdf(q), w.lower(), w.upper(), QUADRATURE_TOL)?.clamp(0.0, 1.0))
}

/// Gaussian moments `int_a^b u^m e^{-u^2} du / sqrt(pi)` for `m = 0, 1, 2`.
fn gaussian_moments_012(ua: f64, ub: f64) -> [f64; 3] {
    if ub - ua < 0.5 {
        // Short intervals: the erf/exp combination for m = 2 cancels badly,
        // while 16-point Gauss-Legendre is exact to rounding here.
        thread_local! {
            static RULE: (Vec<f64>, Vec<f64>) = gauss_legendre(16);
        }
        return RULE.with(|(x, wts)| {
            let (c, h) = (0.5 * (ua + ub), 0.5 * (ub - ua));
            let mut m = [0.0; 3];
            for (xi, wi) in x.iter().zip(wts) {
                let u = c + h * xi;
                let g = wi * (-u * u).exp();
                m[0] += g;
                m[1] += g * u;
                m[2] += g * u * u;
            }
            m.map(|v| v * h / PI.sqrt())
        });
    }
    let (ea, eb) = ((-ua * ua).exp(), (-ub * ub).exp());
    let i0 = 0.5 * erf_diff(ua, ub);
    let i1 = (ea - eb) / (2.0 * PI.sqrt());
    let i2 = 0.5 * i0 + (ua * ea - ub * eb) / (2.0 * PI.sqrt());
    [i0, i1, i2]
}

/// `int |p0 + p1 u|^2 e^{-u^2} du / sqrt(pi)` over the window in `u`.
fn closed_form_rank1(view: &QuadratureView, w: &Window) -> f64 {
    let ua = view.to_u(w.lower());
    let ub = view.to_u(w.upper());
    let [i0, i1, i2] = gaussian_moments_012(ua, ub);
    let p0 = view.hermite_coeffs[0];
    if view.rank() == 0 {
        return p0.norm_sqr() * i0;
    }
    // H_1(u) = 2u.
    let p1 = view.hermite_coeffs[1] * 2.0;
    p0.norm_sqr() * i0 + 2.0 * (p0.conj() * p1).re * i1 + p1.norm_sqr() * i2
}

pub fn expectation_mixed(state: &MixedState, w: &Window) -> Result<f64> {
    let mut total = 0.0;
    for (weight, s) in state.components() {
        total += weight * expectation_pure(s, w)?;
    }
    Ok(total.clamp(0.0, 1.0))
}

pub fn expectation(state: &State, w: &Window) -> Result<f64> {
    match state {
        State::Pure(s) => expectation_pure(s, w),
        State::Mixed(m) => expectation_mixed(m, w),
    }
}

/// Unnormalized sum of window expectations.
pub fn expectation_set(state: &State, ws: &WindowSet) -> Result<f64> {
    ws.windows().iter().map(|w| expectation(state, w)).sum()
}

/// Sum over windows for a pure state, sharing one view per distinct angle.
pub fn expectation_set_pure(state: &StellarState, ws: &WindowSet) -> Result<f64> {
    let mut total = 0.0;
    let mut cached: Option<QuadratureView> = None;
    for w in ws.windows() {
        let reuse = matches!(&cached, Some(v) if same_angle(v.theta, w.theta));
        if !reuse {
            cached = Some(state.view(w.theta));
        }
        total += expectation_view(cached.as_ref().expect("set above"), w)?;
    }
    Ok(total)
}

/// Options for centring windows on the zeros of a target state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutoZeros {
    pub eta: f64,
    /// Grid size for the zero-angle search over half a turn.
    pub n_angles: usize,
    pub tol_imag: f64,
    /// Include the reflected copies `(theta + pi, -x)`, covering `[0, 2 pi)`.
    pub full_circle: bool,
}

impl Default for AutoZeros {
    fn default() -> Self {
        AutoZeros {
            eta: 0.5,
            n_angles: 720,
            tol_imag: crate::zeros::DEFAULT_TOL_IMAG,
            full_circle: true,
        }
    }
}

/// One window of width `eta` on every real zero of the target's quadratures.
pub fn auto_zero_windows(target: &StellarState, opts: &AutoZeros) -> Result<WindowSet> {
    let half = locate_zero_angles(target, opts.n_angles, opts.tol_imag)?;
    let mut windows = Vec::new();
    for zs in &half {
        for &q in &zs.zeros {
            windows.push(Window::new(zs.theta.radians(), q, opts.eta)?);
        }
    }
    if opts.full_circle {
        for zs in &half {
            let r = zs.reflected();
            for &q in &r.zeros {
                windows.push(Window::new(r.theta.radians(), q, opts.eta)?);
            }
        }
    }
    if windows.is_empty() {
        return Err(WitnessError::InvalidWindow(
            "target has no real zeros on any quadrature".into(),
        ));
    }
    WindowSet::new(windows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{lossy_single_photon, psi_t};
    use num_complex::Complex64;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    fn fock1_closed(eta: f64) -> f64 {
        libm::erf(eta / 2.0) - eta / PI.sqrt() * (-(eta / 2.0) * (eta / 2.0)).exp()
    }

    #[test]
    fn fock1_window_value() {
        let one = StellarState::fock(1);
        for eta in [0.01, 0.3, 1.0, 2.5] {
            let v = expectation_pure(&one, &Window::new(0.0, 0.0, eta).unwrap()).unwrap();
            assert!((v - fock1_closed(eta)).abs() < 1e-14, "eta={eta}");
        }
        // Independent check by integrating 2/sqrt(pi) q^2 e^{-q^2}.
        let oracle = simpson(|q| 2.0 / PI.sqrt() * q * q * (-q * q).exp(), -0.5, 0.5, 2000);
        let v = expectation_pure(&one, &Window::new(0.0, 0.0, 1.0).unwrap()).unwrap();
        assert!((v - oracle).abs() < 1e-12);
        assert!((v - 0.08111).abs() < 1e-5);
    }

    #[test]
    fn vacuum_window_values() {
        let vac = StellarState::vacuum();
        let v = expectation_pure(&vac, &Window::new(0.0, 0.0, 1.0).unwrap()).unwrap();
        assert!((v - libm::erf(0.5)).abs() < 1e-15);
        assert!((v - 0.52050).abs() < 1e-5);
        let far = expectation_pure(&vac, &Window::new(0.0, 10.0, 1.0).unwrap()).unwrap();
        assert!(far < 1e-30);
    }

    #[test]
    fn lossy_target_is_linear_in_loss() {
        let eta: f64 = 1.0;
        let w = Window::new(0.0, 0.0, eta).unwrap();
        let base = fock1_closed(eta);
        let slope = eta / PI.sqrt() * (-(eta / 2.0).powi(2)).exp();
        for p in [0.0, 0.3, 0.7] {
            let v = expectation_mixed(&lossy_single_photon(p).unwrap(), &w).unwrap();
            assert!((v - (base + p * slope)).abs() < 1e-14, "p={p}");
        }
        let v = expectation_mixed(&lossy_single_photon(1.0).unwrap(), &w).unwrap();
        assert!((v - libm::erf(0.5)).abs() < 1e-15);
    }

    #[test]
    fn set_additivity_and_rotation() {
        let one: State = StellarState::fock(1).into();
        let w = Window::new(0.0, 0.0, 0.7).unwrap();
        let single = expectation(&one, &w).unwrap();
        let copies = WindowSet::new(vec![w; 5]).unwrap();
        assert!((expectation_set(&one, &copies).unwrap() - 5.0 * single).abs() < 1e-14);
        let two = WindowSet::equiangular(2, 0.0, 0.7).unwrap();
        assert!((expectation_set(&one, &two).unwrap() - 2.0 * single).abs() < 1e-14);
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let states = [
            StellarState::gaussian(Complex64::new(0.4, -0.9), 0.7, 2.0).unwrap(),
            StellarState::from_unnormalized(
                Complex64::new(-0.6, 0.2),
                0.5,
                0.9,
                vec![Complex64::new(0.6, 0.1), Complex64::new(-0.3, 0.7)],
            )
            .unwrap(),
        ];
        for s in &states {
            for (t, x, eta) in [(0.0, 0.0, 0.5), (1.1, -0.7, 1.3), (2.8, 1.5, 0.05), (4.0, 0.3, 3.0)] {
                let w = Window::new(t, x, eta).unwrap();
                let a = expectation_pure(s, &w).unwrap();
                let b = expectation_numeric(s, &w).unwrap();
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn bounded_and_monotone_in_width() {
        let s = psi_t();
        let mut prev = 0.0;
        for k in 1..=40 {
            let eta = 0.15 * k as f64;
            let v = expectation_pure(&s, &Window::new(0.4, 0.2, eta).unwrap()).unwrap();
            assert!((0.0..=1.0).contains(&v));
            assert!(v + 1e-12 >= prev);
            prev = v;
        }
        assert!(prev > 0.99);
    }

    #[test]
    fn cubic_vanishing_at_simple_zero() {
        let two = StellarState::fock(2);
        let x = 0.5f64.sqrt();
        let etas = [1e-4, 1e-3, 1e-2];
        let vals: Vec<f64> = etas
            .iter()
            .map(|&e| expectation_pure(&two, &Window::new(0.0, x, e).unwrap()).unwrap())
            .collect();
        let slope = (vals[2].ln() - vals[0].ln()) / (etas[2].ln() - etas[0].ln());
        assert!((2.5..3.1).contains(&slope), "slope {slope}");
        // The looser c2 eta^2 bound holds with a fixed constant too.
        for (v, e) in vals.iter().zip(etas) {
            assert!(*v <= 1.0 * e * e);
        }
    }

    #[test]
    fn auto_zeros_on_psi_t() {
        let ws = auto_zero_windows(&psi_t(), &AutoZeros { eta: 0.83, ..Default::default() }).unwrap();
        assert_eq!(ws.len(), 8);
        assert_eq!(ws.angles().len(), 6);
        assert!(auto_zero_windows(&StellarState::vacuum(), &AutoZeros::default()).is_err());
    }

    #[test]
    fn window_validation_and_json() {
        assert!(Window::new(0.0, 0.0, 0.0).is_err());
        assert!(Window::new(0.0, f64::NAN, 1.0).is_err());
        assert!(WindowSet::new(vec![]).is_err());
        let ws: WindowSet = serde_json::from_str(r#"[{"theta":0.5,"x":-1.0,"eta":0.25}]"#).unwrap();
        assert_eq!(ws.windows()[0], Window::new(0.5, -1.0, 0.25).unwrap());
        assert_eq!(serde_json::to_string(&ws).unwrap(), r#"[{"theta":0.5,"x":-1.0,"eta":0.25}]"#);
        assert!(serde_json::from_str::<WindowSet>(r#"[{"theta":0.5,"x":-1.0,"eta":-1}]"#).is_err());
    }
}
