//! Wave velocity, pulse bandwidth limiting and speed-limit estimators.

use std::collections::BTreeMap;

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::model::ControlPulse;
use crate::propagator::Trajectory;
use crate::scalar::{from_usize, lit, Real};

/// Speed of a field minimum that crosses the chain in `total_time`.
pub fn nominal_velocity<T: Real>(n_sites: usize, total_time: T) -> Result<T> {
    if !(total_time > T::zero()) || n_sites == 0 {
        return Err(Error::InvalidArgument(format!(
            "nominal velocity needs N >= 1 and T > 0, got N = {n_sites}, T = {total_time}"
        )));
    }
    Ok(from_usize::<T>(n_sites - 1) / total_time)
}

/// Wave velocity `(4/T^2) * integral of <x> over [T/4, 3T/4]`.
pub fn average_velocity<T: Real>(trajectory: &Trajectory<T>) -> Result<T> {
    if trajectory.position_expectation.len() != trajectory.times.len() {
        return Err(Error::InvalidArgument(
            "trajectory has no position expectation series".into(),
        ));
    }
    average_velocity_series(&trajectory.times, &trajectory.position_expectation)
}

/// Same as [`average_velocity`] on bare series, `times` starting at 0.
pub fn average_velocity_series<T: Real>(times: &[T], x: &[T]) -> Result<T> {
    if times.len() != x.len() || times.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "velocity needs at least two matching samples, got {} times and {} values",
            times.len(),
            x.len()
        )));
    }
    let total = times[times.len() - 1] - times[0];
    if !(total > T::zero()) {
        return Err(Error::InvalidArgument("trajectory spans no time".into()));
    }
    let lo = times[0] + total * lit(0.25);
    let hi = times[0] + total * lit(0.75);
    let integral = window_integral(times, x, lo, hi);
    Ok(integral * lit(4.0) / (total * total))
}

fn interpolate<T: Real>(t0: T, t1: T, x0: T, x1: T, t: T) -> T {
    if t1 == t0 {
        return x0;
    }
    x0 + (x1 - x0) * (t - t0) / (t1 - t0)
}

/// Trapezoidal integral over `[lo, hi]`, linearly interpolating the ends.
fn window_integral<T: Real>(times: &[T], x: &[T], lo: T, hi: T) -> T {
    let half = lit::<T>(0.5);
    let mut sum = T::zero();
    for i in 0..times.len() - 1 {
        let (a, b) = (times[i], times[i + 1]);
        let s = a.max(lo);
        let e = b.min(hi);
        if e <= s {
            continue;
        }
        let xs = interpolate(a, b, x[i], x[i + 1], s);
        let xe = interpolate(a, b, x[i], x[i + 1], e);
        sum += half * (xs + xe) * (e - s);
    }
    sum
}

fn trapezoid_mean<T: Real>(times: &[T], y: &[T]) -> Result<T> {
    if times.len() != y.len() || times.is_empty() {
        return Err(Error::InvalidArgument("series lengths disagree or are empty".into()));
    }
    let total = times[times.len() - 1] - times[0];
    if !(total > T::zero()) {
        return Err(Error::InvalidArgument("series spans no time".into()));
    }
    Ok(window_integral(times, y, times[0], times[times.len() - 1]) / total)
}

/// Angular frequency of FFT bin `k` for a series of length `len`.
fn bin_frequency<T: Real>(k: usize, len: usize, dt: T) -> T {
    let folded = k.min(len - k);
    from_usize::<T>(folded) / (from_usize::<T>(len) * dt)
}

fn mirrored<T: Real>(values: &[T]) -> Vec<Complex<T>> {
    let m = values.len();
    let mut ext: Vec<Complex<T>> = values.iter().map(|&v| Complex::new(v, T::zero())).collect();
    ext.extend(values[1..m - 1].iter().rev().map(|&v| Complex::new(v, T::zero())));
    ext
}

/// Hard low-pass of one uniformly sampled series.
///
/// The series is extended by its mirror image (length `2(M - 1)`) so the
/// periodic continuation has no jump at the ends, transformed, every bin with
/// frequency (cycles per unit time) above `nu_max` is zeroed, and the result transformed
/// back. The pass band is a projection, so the operation is idempotent, and
/// the zero bin (the trapezoidal time average) is untouched.
pub fn lowpass_series<T: Real>(values: &[T], dt: T, nu_max: T) -> Result<Vec<T>> {
    if !(nu_max >= T::zero()) {
        return Err(Error::InvalidArgument(format!("cutoff must be non-negative, got {nu_max}")));
    }
    if !(dt > T::zero()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if values.len() < 3 {
        return Ok(values.to_vec());
    }
    let mut buf = mirrored(values);
    let len = buf.len();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for (k, z) in buf.iter_mut().enumerate() {
        if bin_frequency::<T>(k, len, dt) > nu_max {
            *z = Complex::new(T::zero(), T::zero());
        }
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let scale = T::one() / from_usize::<T>(len);
    Ok(buf[..values.len()].iter().map(|z| z.re * scale).collect())
}

/// Filters both controls of `pulse` with [`lowpass_series`].
///
/// Ringing can push the strength slightly below zero where the input touched
/// zero; those samples are set back to zero and counted.
pub fn lowpass_filter<T: Real>(pulse: &ControlPulse<T>, nu_max: T) -> Result<FilteredPulse<T>> {
    let d = lowpass_series(pulse.minimum(), pulse.dt(), nu_max)?;
    let mut c = lowpass_series(pulse.strength(), pulse.dt(), nu_max)?;
    let mut clamped = 0;
    for v in c.iter_mut() {
        if *v < T::zero() {
            *v = T::zero();
            clamped += 1;
        }
    }
    if clamped > 0 {
        log::debug!("low-pass filter clamped {clamped} strength samples at zero");
    }
    Ok(FilteredPulse {
        pulse: ControlPulse::new(d, c, pulse.dt())?,
        clamped_samples: clamped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilteredPulse<T> {
    pub pulse: ControlPulse<T>,
    pub clamped_samples: usize,
}

/// One-sided amplitude spectrum `(frequency, |X|/L)` of the mirrored
/// series used by the filter.
pub fn amplitude_spectrum<T: Real>(values: &[T], dt: T) -> Result<Vec<(T, T)>> {
    if values.len() < 3 {
        return Err(Error::InvalidArgument("spectrum needs at least three samples".into()));
    }
    if !(dt > T::zero()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let mut buf = mirrored(values);
    let len = buf.len();
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let scale = T::one() / from_usize::<T>(len);
    Ok((0..=len / 2)
        .map(|k| (bin_frequency::<T>(k, len, dt), buf[k].norm() * scale))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QslBranch {
    /// `pi/(2J)` is the larger argument.
    Coupling,
    /// `pi/(2 mean spread)` is the larger argument.
    Spread,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QslEstimate<T> {
    pub tau_per_site: T,
    pub mean_energy_spread: T,
    pub dominant_branch: QslBranch,
}

/// Speed-limit time per bond from the time-averaged energy spread.
pub fn tau_qsl<T: Real>(trajectory: &Trajectory<T>, coupling: T) -> Result<QslEstimate<T>> {
    if trajectory.energy_spread.len() != trajectory.times.len() || trajectory.times.len() < 2 {
        return Err(Error::InvalidArgument(
            "speed limit needs an energy spread series over a non-empty interval".into(),
        ));
    }
    let mean = trapezoid_mean(&trajectory.times, &trajectory.energy_spread)?;
    tau_from_spread(mean, coupling)
}

/// `max(pi/(2J), pi/(2 mean_spread))` with the active branch.
pub fn tau_from_spread<T: Real>(mean_spread: T, coupling: T) -> Result<QslEstimate<T>> {
    if !(coupling > T::zero()) || !(mean_spread >= T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "need J > 0 and a non-negative spread, got J = {coupling}, spread = {mean_spread}"
        )));
    }
    let swap = T::FRAC_PI_2() / coupling;
    let spread = if mean_spread > T::zero() {
        T::FRAC_PI_2() / mean_spread
    } else {
        T::infinity()
    };
    let (tau, branch) = if spread > swap {
        (spread, QslBranch::Spread)
    } else {
        (swap, QslBranch::Coupling)
    };
    Ok(QslEstimate {
        tau_per_site: tau,
        mean_energy_spread: mean_spread,
        dominant_branch: branch,
    })
}

/// Transfer time of a cascade of `N - 1` effective swaps.
pub fn qsl_time<T: Real>(n_sites: usize, gamma: T, tau_per_site: T) -> Result<T> {
    if n_sites < 2 || !(gamma > T::zero()) || !(tau_per_site > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "qsl_time needs N >= 2 and positive gamma, tau; got {n_sites}, {gamma}, {tau_per_site}"
        )));
    }
    Ok(gamma * from_usize::<T>(n_sites - 1) * tau_per_site)
}

/// One `(N, T)` cell of a speed-limit scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRecord<T> {
    pub n_sites: usize,
    pub total_time: T,
    pub final_infidelity: T,
    pub iterations_run: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TqslStar<T> {
    /// Smallest scanned time reaching the threshold, per chain length.
    pub per_n: BTreeMap<usize, T>,
    /// Chain lengths for which no scanned time reached the threshold.
    pub missing: Vec<usize>,
}

/// Smallest scanned `T` per `N` whose final infidelity is below `threshold`.
pub fn find_tqsl_star<T: Real>(records: &[ScanRecord<T>], threshold: T) -> Result<TqslStar<T>> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no scan records".into()));
    }
    let mut best: BTreeMap<usize, Option<T>> = BTreeMap::new();
    for r in records {
        let slot = best.entry(r.n_sites).or_insert(None);
        if r.final_infidelity < threshold {
            *slot = Some(match *slot {
                Some(t) if t <= r.total_time => t,
                _ => r.total_time,
            });
        }
    }
    let mut out = TqslStar::default();
    for (n, t) in best {
        match t {
            Some(t) => {
                out.per_n.insert(n, t);
            }
            None => out.missing.push(n),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QslFit<T> {
    pub slope_a: T,
    pub intercept_b: T,
    /// `slope_a / (pi/(2J))`.
    pub gamma: T,
    pub r_squared: T,
    pub per_n_tqsl_star: BTreeMap<usize, T>,
}

/// Least-squares line `T* = a (N - 1) + b`.
pub fn fit_line<T: Real>(points: &BTreeMap<usize, T>, coupling: T) -> Result<QslFit<T>> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "a line fit needs at least two chain lengths, got {}",
            points.len()
        )));
    }
    if !(coupling > T::zero()) {
        return Err(Error::InvalidArgument(format!("coupling must be positive, got {coupling}")));
    }
    let count = from_usize::<T>(points.len());
    let xs: Vec<T> = points.keys().map(|&n| from_usize::<T>(n.saturating_sub(1))).collect();
    let ys: Vec<T> = points.values().copied().collect();
    let mx = xs.iter().fold(T::zero(), |a, &v| a + v) / count;
    let my = ys.iter().fold(T::zero(), |a, &v| a + v) / count;
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| {
            let r = y - slope * x - intercept;
            r * r
        })
        .fold(T::zero(), |a, v| a + v);
    let r_squared = if syy > T::zero() { T::one() - residual / syy } else { T::one() };
    Ok(QslFit {
        slope_a: slope,
        intercept_b: intercept,
        gamma: slope * coupling / T::FRAC_PI_2(),
        r_squared,
        per_n_tqsl_star: points.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn nominal_velocity_examples() {
        assert_eq!(nominal_velocity(101, 200.0).unwrap(), 0.5);
        assert_eq!(nominal_velocity(2, 1.0).unwrap(), 1.0);
        assert!((nominal_velocity::<f64>(101, 56.5).unwrap() - 1.77).abs() < 0.01);
        assert!(nominal_velocity(5, 0.0).is_err());
    }

    #[test]
    fn linear_motion_gives_its_speed() {
        let times: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.013).collect();
        let x: Vec<f64> = times.iter().map(|t| 0.7 * t).collect();
        assert!((average_velocity_series(&times, &x).unwrap() - 0.7).abs() < 1e-12);
        let zero = vec![0.0; times.len()];
        assert_eq!(average_velocity_series(&times, &zero).unwrap(), 0.0);
    }

    #[test]
    fn window_ends_between_samples_are_interpolated() {
        let times = [0.0f64, 1.0, 3.0, 4.0];
        let x = [0.0, 2.0, 6.0, 8.0];
        assert!((average_velocity_series(&times, &x).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn tau_branches() {
        let a = tau_from_spread(2.0, 1.0).unwrap();
        assert_eq!(a.dominant_branch, QslBranch::Coupling);
        assert!((a.tau_per_site - FRAC_PI_2).abs() < 1e-15);
        let b = tau_from_spread(0.5, 1.0).unwrap();
        assert_eq!(b.dominant_branch, QslBranch::Spread);
        assert!((b.tau_per_site - PI).abs() < 1e-15);
        assert_eq!(tau_from_spread(0.0, 1.0).unwrap().dominant_branch, QslBranch::Spread);
    }

    #[test]
    fn qsl_time_examples() {
        assert!((qsl_time(2, 1.0, FRAC_PI_2).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!((qsl_time(101, 1.0, FRAC_PI_2).unwrap() - 157.08).abs() < 0.01);
        assert!((qsl_time(101, 0.34, FRAC_PI_2).unwrap() - 53.4).abs() < 0.05);
    }

    fn rec(n: usize, t: f64, i: f64) -> ScanRecord<f64> {
        ScanRecord { n_sites: n, total_time: t, final_infidelity: i, iterations_run: 10 }
    }

    #[test]
    fn tqsl_star_picks_smallest_passing_time() {
        let records = [rec(11, 12.0, 1e-4), rec(11, 10.0, 5e-4), rec(11, 9.0, 0.2), rec(21, 9.0, 0.5)];
        let star = find_tqsl_star(&records, 1e-3).unwrap();
        assert_eq!(star.per_n.get(&11), Some(&10.0));
        assert_eq!(star.missing, vec![21]);
        assert!(find_tqsl_star::<f64>(&[], 1e-3).is_err());
    }

    #[test]
    fn exact_line_is_recovered() {
        let points: BTreeMap<usize, f64> =
            [21usize, 61, 101].iter().map(|&n| (n, 0.534 * (n - 1) as f64 + 3.65)).collect();
        let fit = fit_line(&points, 1.0).unwrap();
        assert!((fit.slope_a - 0.534).abs() < 1e-9);
        assert!((fit.intercept_b - 3.65).abs() < 1e-9);
        assert!((fit.gamma - 0.534 / FRAC_PI_2).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        let single: BTreeMap<usize, f64> = [(21usize, 14.0)].into_iter().collect();
        assert!(fit_line(&single, 1.0).is_err());
    }

    #[test]
    fn filter_limits() {
        let dt = 0.01;
        let x: Vec<f64> = (0..501).map(|k| (k as f64 * dt * 3.0).sin() + 0.2 * (k as f64 * dt * 40.0).cos()).collect();
        let nyquist = 0.5 / dt;
        let same = lowpass_series(&x, dt, nyquist).unwrap();
        assert!(x.iter().zip(&same).all(|(a, b)| (a - b).abs() < 1e-10));
        let flat = lowpass_series(&x, dt, 0.0).unwrap();
        let spread = flat.iter().fold(0.0f64, |m, v| m.max((v - flat[0]).abs()));
        assert!(spread < 1e-12);
        let times: Vec<f64> = (0..501).map(|k| k as f64 * dt).collect();
        let mean = trapezoid_mean(&times, &x).unwrap();
        assert!((flat[0] - mean).abs() < 1e-12);
        assert!(lowpass_series(&x, dt, -1.0).is_err());
    }

    #[test]
    fn spectrum_peaks_at_tone() {
        let dt = 0.01;
        let x: Vec<f64> = (0..1001).map(|k| (k as f64 * dt * 5.0 * PI).cos()).collect();
        let spec = amplitude_spectrum(&x, dt).unwrap();
        let peak = spec.iter().cloned().fold((0.0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        assert!((peak.0 - 2.5).abs() < 0.1);
    }
}
