//! Experiment configuration shared by the command-line front end.
//!
//! A config is one JSON document whose keys mirror the command-line flags.
//! Flags override file values. Everything is validated before any
//! computation starts.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, WitnessError};
use crate::optimize::{FeasibleSetSpec, OptimizerOptions};
use crate::states::{psi_t, MixedState, State, StellarState};
use crate::witness::{Window, WindowSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

/// Where the witness windows come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WindowSpec {
    /// `"auto-zeros"`: one window on each real zero of the state.
    Named(String),
    Explicit(WindowSet),
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec::Named(AUTO_ZEROS.into())
    }
}

pub const AUTO_ZEROS: &str = "auto-zeros";

/// Every key is optional so that files and flags can be layered.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `vacuum`, `fock:N`, `psiT`, a JSON object, or a path to a JSON file.
    pub state: Option<serde_json::Value>,
    /// State to simulate when certifying; defaults to `state`.
    pub simulate: Option<serde_json::Value>,
    pub rank: Option<usize>,
    pub energy: Option<f64>,
    pub windows: Option<WindowSpec>,
    pub eta: Option<f64>,
    /// Restrict auto-zeros to these angles instead of searching all of them.
    pub theta: Option<Vec<f64>>,
    pub angles: Option<usize>,
    pub tol_imag: Option<f64>,
    pub eta_grid: Option<Vec<f64>>,
    pub p_grid: Option<Vec<f64>>,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub restarts: Option<usize>,
    pub max_iters: Option<usize>,
    pub ftol: Option<f64>,
    pub violation: Option<f64>,
    pub n_trunc: Option<usize>,
    pub out: Option<String>,
    pub format: Option<OutputFormat>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),* $(,)?) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| WitnessError::Config(format!("{}: {e}", path.display())))
    }

    /// Values set in `top` win.
    pub fn overlay(mut self, top: &ExperimentConfig) -> Self {
        overlay!(self, top; state, simulate, rank, energy, windows, eta, theta, angles, tol_imag,
            eta_grid, p_grid, samples, seed, epsilon, delta, restarts, max_iters, ftol, violation,
            n_trunc, out, format);
        self
    }

    /// Range checks on every field that is present.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(WitnessError::Config(m));
        if let Some(e) = self.energy {
            if !(e >= 0.0 && e.is_finite()) {
                return bad(format!("energy must be finite and >= 0, got {e}"));
            }
        }
        if let Some(e) = self.eta {
            if !(e > 0.0 && e.is_finite()) {
                return bad(format!("eta must be positive, got {e}"));
            }
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                return Err(WitnessError::InvalidEpsilon(e));
            }
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d < 1.0) {
                return bad(format!("delta must lie in (0, 1), got {d}"));
            }
        }
        if self.samples == Some(0) {
            return bad("samples must be at least 1".into());
        }
        if self.restarts == Some(0) {
            return bad("restarts must be at least 1".into());
        }
        if self.angles == Some(0) {
            return bad("angles must be at least 1".into());
        }
        if let Some(g) = &self.eta_grid {
            if g.is_empty() || g.iter().any(|e| !(*e > 0.0)) || g.windows(2).any(|w| w[1] <= w[0]) {
                return bad("eta_grid must be nonempty, positive and strictly increasing".into());
            }
        }
        if let Some(g) = &self.p_grid {
            if g.is_empty() || g.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return bad("p_grid entries must lie in [0, 1]".into());
            }
        }
        if let Some(s) = &self.state {
            parse_state(s)?;
        }
        if let Some(s) = &self.simulate {
            parse_state(s)?;
        }
        if let Some(WindowSpec::Named(n)) = &self.windows {
            if n != AUTO_ZEROS {
                return bad(format!("unknown window spec {n:?}; use \"{AUTO_ZEROS}\" or a list"));
            }
        }
        Ok(())
    }

    pub fn feasible_set(&self) -> Result<FeasibleSetSpec> {
        FeasibleSetSpec::new(self.rank.unwrap_or(0), self.energy.unwrap_or(1.0))
    }

    pub fn optimizer(&self) -> OptimizerOptions {
        let d = OptimizerOptions::default();
        OptimizerOptions {
            restarts: self.restarts.unwrap_or(d.restarts),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            ftol: self.ftol.unwrap_or(d.ftol),
            seed: self.seed.unwrap_or(d.seed),
            ..d
        }
    }

    pub fn target(&self) -> Result<State> {
        parse_state(
            self.state
                .as_ref()
                .ok_or_else(|| WitnessError::Config("no state given (use --state)".into()))?,
        )
    }

    /// Hex SHA-256 of the canonical JSON form, for provenance lines.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Parses a state given as a shorthand, inline JSON, or a JSON file path.
pub fn parse_state(v: &serde_json::Value) -> Result<State> {
    match v {
        serde_json::Value::String(s) => parse_state_str(s),
        other => serde_json::from_value(other.clone()).map_err(|e| WitnessError::InvalidState(e.to_string())),
    }
}

pub fn parse_state_str(s: &str) -> Result<State> {
    let t = s.trim();
    match t {
        "vacuum" => return Ok(StellarState::vacuum().into()),
        "psiT" | "psi_t" => return Ok(psi_t().into()),
        _ => {}
    }
    if let Some(n) = t.strip_prefix("fock:") {
        let n: usize = n
            .parse()
            .map_err(|_| WitnessError::InvalidState(format!("bad Fock index in {t:?}")))?;
        if n > crate::special::MAX_HERMITE_DEGREE {
            return Err(WitnessError::InvalidState(format!("Fock index {n} too large")));
        }
        return Ok(StellarState::fock(n).into());
    }
    if let Some(p) = t.strip_prefix("lossy:") {
        let p: f64 = p
            .parse()
            .map_err(|_| WitnessError::InvalidState(format!("bad loss in {t:?}")))?;
        return Ok(MixedState::into(crate::states::lossy_single_photon(p)?));
    }
    let text = if t.starts_with('{') {
        t.to_string()
    } else {
        std::fs::read_to_string(t).map_err(|e| WitnessError::InvalidState(format!("{t}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| WitnessError::InvalidState(e.to_string()))
}

/// Parses windows given as inline JSON or a file path.
pub fn parse_windows_str(s: &str) -> Result<WindowSpec> {
    let t = s.trim();
    if t == AUTO_ZEROS {
        return Ok(WindowSpec::Named(t.into()));
    }
    let text = if t.starts_with('[') {
        t.to_string()
    } else {
        std::fs::read_to_string(t).map_err(|e| WitnessError::Config(format!("{t}: {e}")))?
    };
    Ok(WindowSpec::Explicit(
        serde_json::from_str::<WindowSet>(&text).map_err(|e| WitnessError::InvalidWindow(e.to_string()))?,
    ))
}

/// `start:stop:count` (inclusive, evenly spaced) or a comma list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || WitnessError::Config(format!("cannot parse grid {s:?}"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if n == 0 {
            return Err(bad());
        }
        if n == 1 {
            return Ok(vec![a]);
        }
        return Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect());
    }
    s.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| bad())).collect()
}

/// Default width for auto-placed windows.
pub const DEFAULT_ETA: f64 = 0.5;
/// Default grid size for the zero-angle search over half a turn.
pub const DEFAULT_ANGLES: usize = 720;

/// Builds the window set a config describes for a given target.
///
/// Auto-zeros needs a pure target. With `theta` set, windows go on the real
/// zeros at exactly those angles, which is how states with zeros at every
/// angle (Fock states) are handled; otherwise every zero-bearing angle on the
/// full circle is used.
pub fn resolve_windows(cfg: &ExperimentConfig, target: &State) -> Result<WindowSet> {
    match cfg.windows.clone().unwrap_or_default() {
        WindowSpec::Explicit(ws) => Ok(ws),
        WindowSpec::Named(_) => {
            let pure = match target {
                State::Pure(s) => s,
                State::Mixed(m) if m.components().len() == 1 => &m.components()[0].1,
                State::Mixed(_) => {
                    return Err(WitnessError::Config(
                        "auto-zeros needs a pure target; pass explicit windows for mixtures".into(),
                    ))
                }
            };
            let eta = cfg.eta.unwrap_or(DEFAULT_ETA);
            let tol = cfg.tol_imag.unwrap_or(crate::zeros::DEFAULT_TOL_IMAG);
            match &cfg.theta {
                Some(angles) => {
                    let mut windows = Vec::new();
                    for &t in angles {
                        let zs = crate::zeros::find_real_zeros(pure, t.into(), tol)?;
                        for q in zs.zeros {
                            windows.push(Window::new(t, q, eta)?);
                        }
                    }
                    WindowSet::new(windows).map_err(|_| {
                        WitnessError::InvalidWindow("no real zeros at the requested angles".into())
                    })
                }
                None => crate::witness::auto_zero_windows(
                    pure,
                    &crate::witness::AutoZeros {
                        eta,
                        n_angles: cfg.angles.unwrap_or(DEFAULT_ANGLES),
                        tol_imag: tol,
                        full_circle: true,
                    },
                ),
            }
        }
    }
}
