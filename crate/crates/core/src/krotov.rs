//! Krotov optimization of the field-minimum position `d(t)` and strength
//! `C(t)`.
//!
//! One iteration:
//! 1. the current pulse has already produced `psi(T)`;
//! 2. the co-state `chi(T) = |target><target|psi(T)>` is propagated back to
//!    `t = 0` under the current pulse and stored on every grid point;
//! 3. the initial state is propagated forward again, and before each step the
//!    controls are corrected by `step_weight * Im <chi|dH/du|psi>` using the
//!    freshly propagated state (the strength update is further scaled by
//!    `strength_gain`);
//! 4. the fidelity of the new `psi(T)` decides whether to stop.
//!
//! With `adaptive_backoff` an iteration that would raise the infidelity is
//! discarded and the step weight halved, so the recorded history never
//! increases.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::model::{inner, static_hamiltonian, ChainConfig, ControlPulse, QuantumState};
use crate::propagator::{evolve, infidelity, CnStepper};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct KrotovSettings<T> {
    /// Update gain `1/lambda`.
    pub step_weight: T,
    /// Extra factor on the gain of the strength `C`. Its gradient grows with
    /// the squared distance from the minimum, the position gradient only
    /// linearly, so a shared gain leaves `d` nearly frozen on longer chains.
    pub strength_gain: T,
    /// Upper bound on the number of iterations, counting the evaluation of
    /// the initial pulse as the first one.
    pub max_iterations: usize,
    /// Stop once the infidelity falls below this value.
    pub infidelity_threshold: T,
    /// Halve the step weight and discard the sweep whenever the infidelity
    /// would increase.
    pub adaptive_backoff: bool,
}

impl<T: Real> Default for KrotovSettings<T> {
    fn default() -> Self {
        Self {
            step_weight: lit(DEFAULT_STEP_WEIGHT),
            strength_gain: lit(DEFAULT_STRENGTH_GAIN),
            max_iterations: 1000,
            infidelity_threshold: lit(1e-3),
            adaptive_backoff: true,
        }
    }
}

/// Default update gain.
pub const DEFAULT_STEP_WEIGHT: f64 = 2.0;

/// Default relative gain of the strength control.
pub const DEFAULT_STRENGTH_GAIN: f64 = 0.1;

impl<T: Real> KrotovSettings<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_weight >= T::zero()) || !self.step_weight.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "step weight must be finite and non-negative, got {}",
                self.step_weight
            )));
        }
        if !(self.strength_gain >= T::zero()) || !self.strength_gain.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "strength gain must be finite and non-negative, got {}",
                self.strength_gain
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        if !(self.infidelity_threshold > T::zero() && self.infidelity_threshold < T::one()) {
            return Err(Error::InvalidArgument(format!(
                "infidelity threshold must lie in (0, 1), got {}",
                self.infidelity_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult<T> {
    pub final_pulse: ControlPulse<T>,
    /// Infidelity of the pulse held at the start of each iteration; the last
    /// entry belongs to `final_pulse`.
    pub infidelity_history: Vec<T>,
    pub iterations_run: usize,
    pub converged: bool,
    pub final_fidelity: T,
    pub final_state: QuantumState<T>,
    /// Number of strength samples that were clamped at zero.
    pub clamp_events: usize,
    pub final_step_weight: T,
}

/// Terminal co-state `|target><target|final_state>`.
pub fn terminal_costate<T: Real>(final_state: &QuantumState<T>, target: &QuantumState<T>) -> QuantumState<T> {
    let overlap = target.inner(final_state);
    QuantumState::new(target.amplitudes.iter().map(|a| a * overlap).collect())
}

/// `(Im <chi|dH/dd|psi>, Im <chi|dH/dC|psi>)`.
///
/// The derivatives are those of the re-referenced Hamiltonian the propagator
/// integrates: `dH/dd = -2 C (x_n - d)` and `dH/dC = (x_n - d)^2`, each minus
/// its value at the site holding the lowest on-site energy.
#[inline]
fn gradient_kernel<T: Real>(
    chi: &[Complex<T>],
    psi: &[Complex<T>],
    geometry: &Geometry<T>,
    strength: T,
    minimum: T,
) -> (T, T) {
    let two = lit::<T>(2.0);
    let mut sum_d = T::zero();
    let mut sum_c = T::zero();
    let mut overlap = T::zero();
    let mut floor = T::infinity();
    let mut floor_r = T::zero();
    for (((a, b), &x), &h0) in chi.iter().zip(psi).zip(&geometry.positions).zip(&geometry.static_diag) {
        let r = x - minimum;
        let h = h0 + strength * r * r;
        if h < floor {
            floor = h;
            floor_r = r;
        }
        // Im(conj(a) * b)
        let m = a.re * b.im - a.im * b.re;
        sum_d += r * m;
        sum_c += r * r * m;
        overlap += m;
    }
    (
        -two * strength * (sum_d - floor_r * overlap),
        sum_c - floor_r * floor_r * overlap,
    )
}

/// Site data the gradient needs.
struct Geometry<T> {
    positions: Vec<T>,
    static_diag: Vec<T>,
}

impl<T: Real> Geometry<T> {
    fn new(cfg: &ChainConfig<T>) -> Self {
        Self {
            positions: cfg.positions().to_vec(),
            static_diag: static_hamiltonian(cfg).diag,
        }
    }
}

/// Matrix elements `Im <costate|dH/du|state>` for `u = d` and `u = C`, with
/// the controls at `(strength, minimum)`. Returns `(g_d, g_C)`.
pub fn control_gradients<T: Real>(
    costate: &QuantumState<T>,
    state: &QuantumState<T>,
    cfg: &ChainConfig<T>,
    strength: T,
    minimum: T,
) -> Result<(T, T)> {
    if costate.len() != cfg.n_sites() || state.len() != cfg.n_sites() {
        return Err(Error::InvalidArgument(format!(
            "gradient needs {} amplitudes, got co-state {} and state {}",
            cfg.n_sites(),
            costate.len(),
            state.len()
        )));
    }
    Ok(gradient_kernel(
        &costate.amplitudes,
        &state.amplitudes,
        &Geometry::new(cfg),
        strength,
        minimum,
    ))
}

/// Co-state stored on every grid point, `0..=n_steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostateTrajectory<T> {
    n_sites: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CostateTrajectory<T> {
    pub fn n_points(&self) -> usize {
        self.data.len() / self.n_sites
    }

    pub fn at(&self, k: usize) -> &[Complex<T>] {
        &self.data[k * self.n_sites..(k + 1) * self.n_sites]
    }
}

/// Propagates `terminal` from `t = T` back to `t = 0` under `pulse`, keeping
/// every grid point.
pub fn costate_trajectory<T: Real>(
    cfg: &ChainConfig<T>,
    pulse: &ControlPulse<T>,
    terminal: &QuantumState<T>,
) -> Result<CostateTrajectory<T>> {
    pulse.check_grid(cfg)?;
    let n = cfg.n_sites();
    if terminal.len() != n {
        return Err(Error::InvalidArgument("co-state length differs from chain".into()));
    }
    let steps = cfg.n_steps();
    let mut data = vec![Complex::new(T::zero(), T::zero()); (steps + 1) * n];
    data[steps * n..].copy_from_slice(&terminal.amplitudes);
    let mut stepper = CnStepper::new(cfg);
    let mut chi = terminal.amplitudes.clone();
    for k in (0..steps).rev() {
        let (c, d) = pulse.midpoint(k);
        stepper.step(c, d, &mut chi, -cfg.dt())?;
        data[k * n..(k + 1) * n].copy_from_slice(&chi);
    }
    Ok(CostateTrajectory { n_sites: n, data })
}

/// Every grid point of a forward propagation, as a co-state-shaped store.
fn forward_trajectory<T: Real>(
    cfg: &ChainConfig<T>,
    pulse: &ControlPulse<T>,
    initial: &QuantumState<T>,
) -> Result<CostateTrajectory<T>> {
    let n = cfg.n_sites();
    let steps = cfg.n_steps();
    let mut data = Vec::with_capacity((steps + 1) * n);
    data.extend_from_slice(&initial.amplitudes);
    let mut stepper = CnStepper::new(cfg);
    let mut psi = initial.amplitudes.clone();
    for k in 0..steps {
        let (c, d) = pulse.midpoint(k);
        stepper.step(c, d, &mut psi, cfg.dt())?;
        data.extend_from_slice(&psi);
    }
    Ok(CostateTrajectory { n_sites: n, data })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome<T> {
    pub pulse: ControlPulse<T>,
    /// `psi(T)` under the updated pulse.
    pub final_state: QuantumState<T>,
    pub clamp_events: usize,
}

/// Forward sweep with immediate control feedback.
///
/// Before stepping from grid point `k` to `k + 1`, sample `k + 1` of both
/// controls moves by `gain * Im <chi_k|dH/du|psi_k>`, where `psi_k` is
/// the state just produced by the sweep and `chi_k` the stored co-state.
/// Sample 0 is corrected the same way before the first step. Every step is
/// taken with final sample values, so `final_state` is exactly the evolution
/// under the returned pulse. The gain is `step_weight` for `d` and
/// `step_weight * strength_gain` for `C`. Strength samples are clamped at zero.
pub fn krotov_sweep<T: Real>(
    cfg: &ChainConfig<T>,
    pulse: &ControlPulse<T>,
    initial: &QuantumState<T>,
    costates: &CostateTrajectory<T>,
    step_weight: T,
    strength_gain: T,
) -> Result<SweepOutcome<T>> {
    pulse.check_grid(cfg)?;
    let n_steps = cfg.n_steps();
    if costates.n_sites != cfg.n_sites() || costates.n_points() != n_steps + 1 {
        return Err(Error::InvalidArgument(format!(
            "co-state trajectory has {} points, chain grid has {}",
            costates.n_points(),
            n_steps + 1
        )));
    }
    if initial.len() != cfg.n_sites() {
        return Err(Error::InvalidArgument("initial state length differs from chain".into()));
    }
    let geometry = Geometry::new(cfg);
    let mut new_pulse = pulse.clone();
    let mut stepper = CnStepper::new(cfg);
    let mut psi = initial.amplitudes.clone();
    let mut clamp_events = 0usize;
    let half = lit::<T>(0.5);
    let weight_c = step_weight * strength_gain;
    {
        let (d, c) = new_pulse.parts_mut();
        let mut apply = |j: usize, (gd, gc): (T, T), d: &mut [T], c: &mut [T]| {
            d[j] += step_weight * gd;
            let updated = c[j] + weight_c * gc;
            if updated < T::zero() {
                clamp_events += 1;
                c[j] = T::zero();
            } else {
                c[j] = updated;
            }
        };
        let g0 = gradient_kernel(costates.at(0), &psi, &geometry, c[0], d[0]);
        apply(0, g0, d, c);
        for k in 0..n_steps {
            let g = gradient_kernel(costates.at(k), &psi, &geometry, c[k], d[k]);
            apply(k + 1, g, d, c);
            let strength = half * (c[k] + c[k + 1]);
            let minimum = half * (d[k] + d[k + 1]);
            stepper.step(strength, minimum, &mut psi, cfg.dt())?;
        }
    }
    if clamp_events > 0 {
        log::debug!("krotov sweep clamped {clamp_events} strength samples at zero");
    }
    Ok(SweepOutcome {
        pulse: new_pulse,
        final_state: QuantumState::new(psi),
        clamp_events,
    })
}

/// Runs Krotov iterations until the infidelity drops below the threshold or
/// the iteration budget is spent.
pub fn optimize<T: Real>(
    cfg: &ChainConfig<T>,
    initial_pulse: &ControlPulse<T>,
    initial_state: &QuantumState<T>,
    target: &QuantumState<T>,
    settings: &KrotovSettings<T>,
) -> Result<OptimizationResult<T>> {
    settings.validate()?;
    if target.len() != cfg.n_sites() {
        return Err(Error::InvalidArgument("target length differs from chain".into()));
    }
    let mut pulse = initial_pulse.clone();
    let mut psi_t = evolve(cfg, &pulse, initial_state)?;
    let mut current = infidelity(&psi_t, target)?;
    if !current.is_finite() {
        return Err(Error::Diverged { iteration: 1 });
    }
    let mut weight = settings.step_weight;
    let mut history = Vec::new();
    let mut clamp_events = 0;
    let mut converged = false;
    let mut costates: Option<CostateTrajectory<T>> = None;

    for iteration in 1..=settings.max_iterations {
        history.push(current);
        if current < settings.infidelity_threshold {
            converged = true;
            break;
        }
        if iteration == settings.max_iterations {
            break;
        }
        if costates.is_none() {
            let chi_t = terminal_costate(&psi_t, target);
            costates = Some(costate_trajectory(cfg, &pulse, &chi_t)?);
        }
        let sweep = krotov_sweep(cfg, &pulse, initial_state, costates.as_ref().unwrap(), weight, settings.strength_gain)?;
        let candidate = infidelity(&sweep.final_state, target)?;
        if !candidate.is_finite() {
            return Err(Error::Diverged { iteration });
        }
        if settings.adaptive_backoff && candidate > current {
            weight = weight * lit(0.5);
            log::debug!("iteration {iteration}: infidelity would rise to {candidate:e}, step weight now {weight:e}");
            continue;
        }
        clamp_events += sweep.clamp_events;
        pulse = sweep.pulse;
        psi_t = sweep.final_state;
        current = candidate;
        costates = None;
    }

    let iterations_run = history.len();
    Ok(OptimizationResult {
        final_pulse: pulse,
        infidelity_history: history,
        iterations_run,
        converged,
        final_fidelity: T::one() - current,
        final_state: psi_t,
        clamp_events,
        final_step_weight: weight,
    })
}

/// Exact derivative of the discrete fidelity with respect to every pulse
/// sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseGradient<T> {
    pub fidelity: T,
    pub d: Vec<T>,
    pub c: Vec<T>,
}

/// Gradient of `|<target|psi(T)>|^2` with respect to each sample of `d` and
/// `C`.
///
/// For one Crank-Nicolson step the derivative with respect to the midpoint
/// control is `2 dt Im <chi_bar|dH/du|psi_bar>`, where the bars average the
/// state and co-state over the two ends of the step. A sample enters the two
/// adjacent midpoints with weight one half each.
pub fn fidelity_gradient<T: Real>(
    cfg: &ChainConfig<T>,
    pulse: &ControlPulse<T>,
    initial: &QuantumState<T>,
    target: &QuantumState<T>,
) -> Result<PulseGradient<T>> {
    pulse.check_grid(cfg)?;
    let states = forward_trajectory(cfg, pulse, initial)?;
    let steps = cfg.n_steps();
    let psi_t = QuantumState::new(states.at(steps).to_vec());
    let fidelity = inner(&target.amplitudes, &psi_t.amplitudes).norm_sqr();
    let costates = costate_trajectory(cfg, pulse, &terminal_costate(&psi_t, target))?;
    let half = lit::<T>(0.5);
    let scale = lit::<T>(2.0) * cfg.dt();
    let n = cfg.n_sites();
    let mut d_grad = vec![T::zero(); steps + 1];
    let mut c_grad = vec![T::zero(); steps + 1];
    let geometry = Geometry::new(cfg);
    let mut chi_bar = vec![Complex::new(T::zero(), T::zero()); n];
    let mut psi_bar = chi_bar.clone();
    for k in 0..steps {
        for i in 0..n {
            chi_bar[i] = (costates.at(k)[i] + costates.at(k + 1)[i]) * half;
            psi_bar[i] = (states.at(k)[i] + states.at(k + 1)[i]) * half;
        }
        let (c, d) = pulse.midpoint(k);
        let (gd, gc) = gradient_kernel(&chi_bar, &psi_bar, &geometry, c, d);
        for j in [k, k + 1] {
            d_grad[j] += half * scale * gd;
            c_grad[j] += half * scale * gc;
        }
    }
    Ok(PulseGradient {
        fidelity,
        d: d_grad,
        c: c_grad,
    })
}
