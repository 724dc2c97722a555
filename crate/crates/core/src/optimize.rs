//! Threshold values: the smallest witness expectation over pure states of
//! bounded stellar rank and mean photon number.
//!
//! By linearity the infimum over mixtures equals the infimum over pure states,
//! so the search runs over `D(alpha) S(chi) sum_{n<=k} c_n |n>` with
//! `<n> <= E`. The search is multi-start Nelder-Mead on a smooth penalty,
//! followed by a feasibility polish, so every reported value is attained by
//! an explicit feasible state and is therefore an upper bound on the infimum.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WitnessError};
use crate::par;
use crate::states::{State, StellarState, MAX_SQUEEZING};
use crate::witness::{expectation_set, expectation_set_pure, WindowSet};

/// Ranks above this are accepted but flagged.
pub const MAX_RECOMMENDED_RANK: usize = 6;

const PENALTY_COARSE: f64 = 1e4;
const PENALTY_FINE: f64 = 1e8;

/// Stellar rank at most `max_rank`, mean photon number at most `max_energy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibleSetSpec {
    pub max_rank: usize,
    pub max_energy: f64,
}

impl FeasibleSetSpec {
    pub fn new(max_rank: usize, max_energy: f64) -> Result<Self> {
        if !(max_energy >= 0.0 && max_energy.is_finite()) {
            return Err(WitnessError::InvalidArgument(format!(
                "energy bound must be finite and nonnegative, got {max_energy}"
            )));
        }
        Ok(FeasibleSetSpec { max_rank, max_energy })
    }

    pub fn contains(&self, s: &StellarState) -> bool {
        s.rank() <= self.max_rank && s.mean_energy() <= self.max_energy + 1e-9
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerOptions {
    pub restarts: usize,
    pub max_iters: usize,
    pub ftol: f64,
    pub seed: u64,
    /// Half-width of the start box for each component of alpha. `None` means `2 sqrt(E) + 1`.
    pub alpha_box: Option<f64>,
    /// Upper end of the start range for `|chi|`. `None` means `asinh(sqrt(E)) + 0.5`.
    pub chi_box: Option<f64>,
    /// Run restarts on the calling thread even when the parallel backend is on.
    pub sequential: bool,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            restarts: 64,
            max_iters: 2000,
            ftol: 1e-12,
            seed: 0,
            alpha_box: None,
            chi_box: None,
            sequential: false,
        }
    }
}

impl OptimizerOptions {
    pub fn alpha_box_for(&self, energy: f64) -> f64 {
        self.alpha_box.unwrap_or(2.0 * energy.sqrt() + 1.0)
    }

    pub fn chi_box_for(&self, energy: f64) -> f64 {
        self.chi_box.unwrap_or(energy.sqrt().asinh() + 0.5)
    }

    fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(WitnessError::InvalidArgument("restarts must be at least 1".into()));
        }
        if self.max_iters == 0 || !(self.ftol > 0.0) {
            return Err(WitnessError::InvalidArgument(
                "max_iters must be positive and ftol must be > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    /// Best witness expectation found. An upper bound on the true threshold.
    pub value: f64,
    pub is_upper_bound: bool,
    pub argmin: StellarState,
    pub argmin_energy: f64,
    pub restarts_used: usize,
    pub converged: bool,
    pub restarts_converged: usize,
    pub best_per_restart: Vec<f64>,
    pub spec: FeasibleSetSpec,
    pub windows: usize,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

/// Parameter layout: `[Re alpha, Im alpha, |chi|, phi, s_1..s_k, t_1..t_k]`.
/// Core magnitudes come from hyperspherical angles `s`, phases from `t`,
/// and `c_0` is real.
#[derive(Debug, Clone, Copy)]
struct Layout {
    rank: usize,
}

impl Layout {
    fn dim(&self) -> usize {
        4 + 2 * self.rank
    }

    fn core(&self, p: &[f64]) -> Vec<Complex64> {
        let k = self.rank;
        let mut core = Vec::with_capacity(k + 1);
        let mut tail = 1.0;
        for j in 0..=k {
            let mag = if j < k { tail * p[4 + j].cos() } else { tail };
            if j < k {
                tail *= p[4 + j].sin();
            }
            let phase = if j == 0 { 0.0 } else { p[4 + k + j - 1] };
            core.push(Complex64::from_polar(mag, phase));
        }
        // Global phase: keep c_0 real and nonnegative.
        if core[0].re < 0.0 {
            for c in core.iter_mut() {
                *c = -*c;
            }
        }
        core
    }

    fn state(&self, p: &[f64]) -> Result<StellarState> {
        let r = p[2].abs().min(MAX_SQUEEZING);
        StellarState::from_unnormalized(Complex64::new(p[0], p[1]), r, p[3].rem_euclid(TAU), self.core(p))
    }

    /// Scales displacement and squeezing, and with `core` also the angles
    /// that move weight off `c_0`. At `lambda = 0` with `core` the state is vacuum.
    fn shrink(&self, p: &[f64], lambda: f64, core: bool) -> Vec<f64> {
        let mut q = p.to_vec();
        q[0] *= lambda;
        q[1] *= lambda;
        q[2] *= lambda;
        if core {
            q[4] *= lambda;
        }
        q
    }

    fn random_start(&self, u: &[f64], alpha_box: f64, chi_box: f64) -> Vec<f64> {
        let mut p = vec![0.0; self.dim()];
        p[0] = (2.0 * u[0] - 1.0) * alpha_box;
        p[1] = (2.0 * u[1] - 1.0) * alpha_box;
        p[2] = u[2] * chi_box;
        p[3] = u[3] * TAU;
        for j in 0..self.rank {
            p[4 + j] = u[4 + j] * PI / 2.0;
            p[4 + self.rank + j] = u[4 + self.rank + j] * TAU;
        }
        p
    }

    fn steps(&self, alpha_box: f64, chi_box: f64) -> Vec<f64> {
        let mut s = vec![0.0; self.dim()];
        s[0] = 0.2 * alpha_box;
        s[1] = 0.2 * alpha_box;
        s[2] = 0.2 * chi_box;
        s[3] = 0.6;
        for j in 0..2 * self.rank {
            s[4 + j] = 0.4;
        }
        s
    }
}

fn energy_of(layout: &Layout, p: &[f64]) -> f64 {
    layout.state(p).map(|s| s.mean_energy()).unwrap_or(f64::INFINITY)
}

/// Largest shrink factor keeping the state feasible.
fn polish(layout: &Layout, p: &[f64], e_max: f64) -> Vec<f64> {
    if energy_of(layout, p) <= e_max {
        return p.to_vec();
    }
    let core_only = layout.shrink(p, 0.0, false);
    let with_core = energy_of(layout, &core_only) > e_max;
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if energy_of(layout, &layout.shrink(p, mid, with_core)) <= e_max {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    layout.shrink(p, lo, with_core)
}

struct NmOutcome {
    x: Vec<f64>,
    converged: bool,
}

/// Nelder-Mead with standard coefficients. Converges when the spread of
/// simplex values is within `ftol` relative (with a rounding-level floor) or
/// the simplex has collapsed.
fn nelder_mead(f: &impl Fn(&[f64]) -> f64, x0: &[f64], steps: &[f64], max_iters: usize, ftol: f64) -> NmOutcome {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += steps[i];
        simplex.push(v);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut converged = false;
    for _ in 0..max_iters {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = (vals[n] - vals[0]).abs();
        let diameter = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let scale = simplex[0].iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if spread <= ftol * vals[0].abs() + 1e-16 || diameter <= 1e-11 * scale {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (w - c)).collect()
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[n] = xe;
                vals[n] = fe;
            } else {
                simplex[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            simplex[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let xc = along(-0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            if fc < vals[n].min(fr) {
                simplex[n] = xc;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    let shrunk: Vec<f64> =
                        simplex[i].iter().zip(&simplex[0]).map(|(x, b)| b + 0.5 * (x - b)).collect();
                    vals[i] = f(&shrunk);
                    simplex[i] = shrunk;
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).expect("nonempty simplex");
    NmOutcome {
        x: simplex[best].clone(),
        converged,
    }
}

const PRIMES: [u64; 20] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let (mut f, mut out) = (1.0, 0.0);
    while i > 0 {
        f /= base as f64;
        out += f * (i % base) as f64;
        i /= base;
    }
    out
}

/// Halton points with a seed-dependent Cranley-Patterson rotation.
fn halton_point(index: usize, shift: &[f64]) -> Vec<f64> {
    shift
        .iter()
        .enumerate()
        .map(|(d, s)| {
            let base = PRIMES.get(d).copied().unwrap_or(2 + 2 * d as u64 + 1);
            (radical_inverse(index as u64 + 1, base) + s).fract()
        })
        .collect()
}

fn restart_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct RestartOutcome {
    value: f64,
    energy: f64,
    state: StellarState,
    converged: bool,
}

fn objective<'a>(layout: &Layout, ws: &'a WindowSet, e_max: f64, lambda: f64) -> impl Fn(&[f64]) -> f64 + 'a {
    let layout = *layout;
    move |p: &[f64]| match layout.state(p) {
        Ok(s) => {
            let excess = (s.mean_energy() - e_max).max(0.0);
            match expectation_set_pure(&s, ws) {
                Ok(v) => v + lambda * excess * excess,
                Err(_) => f64::INFINITY,
            }
        }
        Err(_) => f64::INFINITY,
    }
}

fn run_restart(
    index: usize,
    ws: &WindowSet,
    spec: &FeasibleSetSpec,
    opts: &OptimizerOptions,
    layout: &Layout,
    shift: &[f64],
) -> Result<RestartOutcome> {
    let e = spec.max_energy;
    let (abox, cbox) = (opts.alpha_box_for(e), opts.chi_box_for(e));
    let mut rng = restart_rng(opts.seed, index as u64 + 1);
    let u = halton_point(index, shift);
    let start = polish(layout, &layout.random_start(&u, abox, cbox), e);
    let steps: Vec<f64> = layout
        .steps(abox, cbox)
        .into_iter()
        .map(|s| if rng.random::<bool>() { s } else { -s } * rng.random_range(0.5..1.0))
        .collect();

    let coarse = nelder_mead(&objective(layout, ws, e, PENALTY_COARSE), &start, &steps, opts.max_iters, opts.ftol);
    let fine_steps: Vec<f64> = steps.iter().map(|s| s * 0.05).collect();
    let fine = nelder_mead(&objective(layout, ws, e, PENALTY_FINE), &coarse.x, &fine_steps, opts.max_iters, opts.ftol);
    let p = polish(layout, &fine.x, e);
    let state = layout.state(&p)?;
    let value = expectation_set_pure(&state, ws)?;
    Ok(RestartOutcome {
        value,
        energy: state.mean_energy(),
        state,
        converged: coarse.converged || fine.converged,
    })
}

/// Smallest witness expectation over the feasible set.
pub fn threshold(ws: &WindowSet, spec: &FeasibleSetSpec, opts: &OptimizerOptions) -> Result<ThresholdResult> {
    opts.validate()?;
    FeasibleSetSpec::new(spec.max_rank, spec.max_energy)?;
    let layout = Layout { rank: spec.max_rank };
    let mut warnings = Vec::new();
    if spec.max_rank > MAX_RECOMMENDED_RANK {
        warnings.push(format!(
            "rank {} exceeds {MAX_RECOMMENDED_RANK}; restarts may miss the global minimum",
            spec.max_rank
        ));
    }
    let mut shift_rng = restart_rng(opts.seed, 0);
    let shift: Vec<f64> = (0..layout.dim()).map(|_| shift_rng.random::<f64>()).collect();

    let job = |i: usize| run_restart(i, ws, spec, opts, &layout, &shift);
    let outcomes: Vec<RestartOutcome> = if opts.sequential {
        par::map_indexed_seq(opts.restarts, job)
    } else {
        par::map_indexed(opts.restarts, job)
    }
    .into_iter()
    .collect::<Result<_>>()?;

    let restarts_converged = outcomes.iter().filter(|o| o.converged).count();
    if restarts_converged == 0 {
        return Err(WitnessError::OptimizerFailed(format!(
            "none of {} restarts converged within {} iterations",
            opts.restarts, opts.max_iters
        )));
    }
    let best_value = outcomes.iter().map(|o| o.value).fold(f64::INFINITY, f64::min);
    // Ties: lowest energy, then least squeezing, then earliest restart.
    let best = outcomes
        .iter()
        .filter(|o| o.value <= best_value + 1e-12)
        .min_by(|a, b| {
            a.energy
                .total_cmp(&b.energy)
                .then(a.state.chi_mag().total_cmp(&b.state.chi_mag()))
        })
        .expect("at least one restart");
    Ok(ThresholdResult {
        value: best.value,
        is_upper_bound: true,
        argmin: best.state.clone(),
        argmin_energy: best.energy,
        restarts_used: opts.restarts,
        converged: true,
        restarts_converged,
        best_per_restart: outcomes.iter().map(|o| o.value).collect(),
        spec: *spec,
        windows: ws.len(),
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub threshold: ThresholdResult,
    pub target_expectation: f64,
    /// `threshold - target_expectation`. Negative means no certificate.
    pub violation: f64,
}

pub fn violation(target: &State, ws: &WindowSet, spec: &FeasibleSetSpec, opts: &OptimizerOptions) -> Result<Violation> {
    let threshold = threshold(ws, spec, opts)?;
    let target_expectation = expectation_set(target, ws)?;
    Ok(Violation {
        violation: threshold.value - target_expectation,
        target_expectation,
        threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub eta: f64,
    pub threshold: f64,
    pub target_expectation: f64,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaScan {
    pub points: Vec<ScanPoint>,
}

impl EtaScan {
    /// Smallest and largest grid widths with a positive violation.
    pub fn positive_range(&self) -> Option<(f64, f64)> {
        let pos: Vec<f64> = self.points.iter().filter(|p| p.violation > 0.0).map(|p| p.eta).collect();
        Some((*pos.first()?, *pos.last()?))
    }

    pub fn max_violation(&self) -> Option<ScanPoint> {
        self.points.iter().copied().max_by(|a, b| a.violation.total_cmp(&b.violation))
    }
}

/// Violation at each width, every window of `template` resized to `eta`.
pub fn scan_eta(
    target: &State,
    template: &WindowSet,
    spec: &FeasibleSetSpec,
    eta_grid: &[f64],
    opts: &OptimizerOptions,
) -> Result<EtaScan> {
    if eta_grid.is_empty() || eta_grid.iter().any(|e| !(*e > 0.0)) || eta_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(WitnessError::InvalidArgument(
            "eta grid must be nonempty, positive and strictly increasing".into(),
        ));
    }
    let mut points = Vec::with_capacity(eta_grid.len());
    for &eta in eta_grid {
        let ws = template.with_eta(eta)?;
        let v = violation(target, &ws, spec, opts)?;
        points.push(ScanPoint {
            eta,
            threshold: v.threshold.value,
            target_expectation: v.target_expectation,
            violation: v.violation,
        });
    }
    Ok(EtaScan { points })
}

/// Bisects a sign change of the violation between `lo` (positive) and `hi`
/// (nonpositive) down to width `tol`, returning the last positive width.
pub fn refine_sign_change(
    target: &State,
    template: &WindowSet,
    spec: &FeasibleSetSpec,
    (mut lo, mut hi): (f64, f64),
    tol: f64,
    opts: &OptimizerOptions,
) -> Result<f64> {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if violation(target, &template.with_eta(mid)?, spec, opts)?.violation > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// A random feasible state drawn from the optimizer's start boxes, pulled
/// into the feasible set by the same shrink used for polishing.
pub fn random_feasible_state(spec: &FeasibleSetSpec, opts: &OptimizerOptions, rng: &mut impl Rng) -> Result<StellarState> {
    let layout = Layout { rank: spec.max_rank };
    let u: Vec<f64> = (0..layout.dim()).map(|_| rng.random::<f64>()).collect();
    let e = spec.max_energy;
    let p = layout.random_start(&u, opts.alpha_box_for(e), opts.chi_box_for(e));
    layout.state(&polish(&layout, &p, e))
}

/// Reference minimum over Gaussian states by grid search with zooming.
///
/// Each level evaluates a `grid^4` lattice over `(Re alpha, Im alpha, |chi|, phi)`,
/// skipping infeasible points, then re-centres a lattice of a third the
/// previous span on each of the best `keep` points.
pub fn brute_force_gaussian(ws: &WindowSet, max_energy: f64, grid: usize, levels: usize, keep: usize) -> Result<(f64, StellarState)> {
    let a_max = max_energy.sqrt();
    let r_max = a_max.asinh();
    let eval = |p: [f64; 4]| -> Option<f64> {
        let s = StellarState::gaussian(Complex64::new(p[0], p[1]), p[2], p[3]).ok()?;
        if s.mean_energy() > max_energy {
            return None;
        }
        expectation_set_pure(&s, ws).ok()
    };
    let lower = [-a_max, -a_max, 0.0, 0.0];
    let upper = [a_max, a_max, r_max, TAU];

    let mut centres: Vec<[f64; 4]> = vec![[0.0, 0.0, 0.5 * r_max, PI]];
    let mut half: [f64; 4] = [a_max, a_max, 0.5 * r_max, PI];
    let mut best: (f64, [f64; 4]) = (eval([0.0; 4]).expect("vacuum is feasible"), [0.0; 4]);
    for _ in 0..levels {
        let mut found: Vec<(f64, [f64; 4])> = Vec::new();
        for c in &centres {
            let axis = |d: usize, i: usize| -> f64 {
                let t = if grid == 1 { 0.5 } else { i as f64 / (grid - 1) as f64 };
                let v = c[d] - half[d] + 2.0 * half[d] * t;
                if d == 3 { v } else { v.clamp(lower[d], upper[d]) }
            };
            let rows = par::map_indexed(grid, |i| {
                let mut local = Vec::new();
                for j in 0..grid {
                    for k in 0..grid {
                        for l in 0..grid {
                            let p = [axis(0, i), axis(1, j), axis(2, k), axis(3, l)];
                            if let Some(v) = eval(p) {
                                local.push((v, p));
                            }
                        }
                    }
                }
                local
            });
            found.extend(rows.into_iter().flatten());
        }
        found.sort_by(|a, b| a.0.total_cmp(&b.0));
        found.dedup_by(|a, b| a.1 == b.1);
        if let Some(&first) = found.first() {
            if first.0 < best.0 {
                best = first;
            }
        }
        centres = found.iter().take(keep).map(|f| f.1).collect();
        if centres.is_empty() {
            break;
        }
        for h in half.iter_mut() {
            *h /= 3.0;
        }
    }
    let state = StellarState::gaussian(Complex64::new(best.1[0], best.1[1]), best.1[2], best.1[3])?;
    Ok((best.0, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::psi_t;
    use crate::witness::{auto_zero_windows, expectation_pure, AutoZeros, Window};

    fn quick() -> OptimizerOptions {
        OptimizerOptions {
            restarts: 12,
            ..Default::default()
        }
    }

    #[test]
    fn layout_core_is_normalized_and_real_leading() {
        let layout = Layout { rank: 3 };
        let p = [0.1, 0.2, 0.3, 0.4, 2.0, -0.7, 1.1, 0.3, 2.0, -1.0];
        let core = layout.core(&p);
        let norm: f64 = core.iter().map(|c| c.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-14);
        assert!(core[0].im == 0.0 && core[0].re >= 0.0);
    }

    #[test]
    fn halton_is_deterministic_and_in_unit_cube() {
        let a = halton_point(5, &[0.3, 0.9, 0.1]);
        assert_eq!(a, halton_point(5, &[0.3, 0.9, 0.1]));
        assert!(a.iter().all(|v| (0.0..1.0).contains(v)));
        assert!((radical_inverse(1, 2) - 0.5).abs() < 1e-15);
        assert!((radical_inverse(3, 3) - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let out = nelder_mead(&f, &[-1.2, 1.0], &[0.1, 0.1], 5000, 1e-14);
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-5 && (out.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn zero_energy_gives_vacuum() {
        let ws = WindowSet::single(Window::new(0.3, 0.2, 0.7).unwrap());
        let spec = FeasibleSetSpec::new(0, 0.0).unwrap();
        let r = threshold(&ws, &spec, &quick()).unwrap();
        let vac = expectation_pure(&StellarState::vacuum(), &ws.windows()[0]).unwrap();
        assert!((r.value - vac).abs() < 1e-12);
        assert!(r.argmin_energy <= 1e-9);
    }

    #[test]
    fn result_is_feasible_and_reproducible() {
        let ws = auto_zero_windows(&psi_t(), &AutoZeros { eta: 0.83, ..Default::default() }).unwrap();
        let spec = FeasibleSetSpec::new(1, 1.2).unwrap();
        let a = threshold(&ws, &spec, &quick()).unwrap();
        assert!(a.argmin_energy <= 1.2 + 1e-9 && a.argmin.rank() <= 1);
        assert!(a.value >= 0.0 && a.value <= ws.len() as f64);
        let b = threshold(&ws, &spec, &quick()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let seq = threshold(&ws, &spec, &OptimizerOptions { sequential: true, ..quick() }).unwrap();
        assert_eq!(a.value.to_bits(), seq.value.to_bits());
    }

    #[test]
    fn below_random_feasible_probes() {
        let ws = WindowSet::equiangular(2, 0.0, 0.8).unwrap();
        let spec = FeasibleSetSpec::new(0, 1.0).unwrap();
        let opts = quick();
        let r = threshold(&ws, &spec, &opts).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let s = random_feasible_state(&spec, &opts, &mut rng).unwrap();
            assert!(spec.contains(&s));
            assert!(r.value <= expectation_set_pure(&s, &ws).unwrap() + 1e-12);
        }
    }

    #[test]
    fn monotone_in_energy_and_rank() {
        let ws = WindowSet::single(Window::new(0.0, 0.0, 0.6).unwrap());
        let opts = quick();
        let t = |k, e| threshold(&ws, &FeasibleSetSpec::new(k, e).unwrap(), &opts).unwrap().value;
        let (e05, e1, e2) = (t(0, 0.5), t(0, 1.0), t(0, 2.0));
        assert!(e1 <= e05 + 1e-9 && e2 <= e1 + 1e-9);
        assert!(t(1, 1.0) <= e1 + 1e-9);
        assert!(e2 > 0.0);
    }

    #[test]
    fn agrees_with_brute_force_small_case() {
        let ws = WindowSet::single(Window::new(0.0, 0.0, 0.5).unwrap());
        let r = threshold(&ws, &FeasibleSetSpec::new(0, 0.5).unwrap(), &quick()).unwrap();
        let (bf, _) = brute_force_gaussian(&ws, 0.5, 13, 6, 4).unwrap();
        assert!(r.value <= bf + 1e-9, "{} vs {bf}", r.value);
        assert!((r.value - bf).abs() < 1e-4, "{} vs {bf}", r.value);
    }

    #[test]
    fn rejects_bad_inputs() {
        let ws = WindowSet::single(Window::new(0.0, 0.0, 0.5).unwrap());
        assert!(FeasibleSetSpec::new(0, -1.0).is_err());
        let spec = FeasibleSetSpec::new(0, 1.0).unwrap();
        assert!(threshold(&ws, &spec, &OptimizerOptions { restarts: 0, ..quick() }).is_err());
        let target: State = StellarState::fock(1).into();
        assert!(scan_eta(&target, &ws, &spec, &[0.5, 0.4], &quick()).is_err());
    }
}
