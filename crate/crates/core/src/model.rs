//! Chain geometry, the parabolic control field and the single-excitation
//! Hamiltonian.
//!
//! The reduced Hamiltonian acts on the `N` states with exactly one spin up.
//! It splits into a static tridiagonal part (nearest-neighbour exchange,
//! with the boundary sites lifted by `J`) and a diagonal control part
//! `C(t) (x_n - d(t))^2` set by the position `d` and strength `C` of the
//! field minimum.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, Real};

/// Static description of the chain and its uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig<T> {
    n_sites: usize,
    coupling: T,
    positions: Vec<T>,
    dt: T,
    n_steps: usize,
}

impl<T: Real> ChainConfig<T> {
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Exchange coupling `J`.
    pub fn coupling(&self) -> T {
        self.coupling
    }

    /// Site coordinates `x_1 .. x_N`.
    pub fn positions(&self) -> &[T] {
        &self.positions
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// Number of integration steps; the grid has `n_steps + 1` points.
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn total_time(&self) -> T {
        from_usize::<T>(self.n_steps) * self.dt
    }

    /// Time of grid point `k`.
    pub fn time(&self, k: usize) -> T {
        from_usize::<T>(k) * self.dt
    }

    /// Replaces the default unit spacing with explicit site coordinates.
    pub fn with_positions(mut self, positions: Vec<T>) -> Result<Self> {
        if positions.len() != self.n_sites {
            return Err(Error::InvalidConfig(format!(
                "expected {} positions, got {}",
                self.n_sites,
                positions.len()
            )));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("positions must be finite".into()));
        }
        if positions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig(
                "positions must be strictly increasing".into(),
            ));
        }
        self.positions = positions;
        Ok(self)
    }

    /// Same chain with a different duration (rounded onto the `dt` grid).
    pub fn with_total_time(&self, total_time: T) -> Result<Self> {
        let mut cfg = self.clone();
        cfg.n_steps = steps_for(total_time, self.dt)?;
        Ok(cfg)
    }
}

fn steps_for<T: Real>(total_time: T, dt: T) -> Result<usize> {
    if !(total_time >= T::zero()) || !total_time.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "total time must be finite and non-negative, got {total_time}"
        )));
    }
    // Whole steps within rounding noise are kept, anything else rounds up so
    // the grid step never exceeds the requested one.
    let ratio = total_time / dt;
    let tol = lit::<T>(1e-9).max(T::epsilon() * lit(1024.0)) * ratio.max(T::one());
    let steps = if (ratio - ratio.round()).abs() <= tol {
        ratio.round()
    } else {
        ratio.ceil()
    };
    steps
        .to_usize()
        .ok_or_else(|| Error::InvalidConfig("total time / dt does not fit a step count".into()))
}

/// Builds a chain of `n_sites` sites at unit spacing `x_n = n - 1`.
///
/// The grid ends exactly at `total_time`: when it is not a whole number of
/// `dt` steps, the step is shrunk to `total_time / ceil(total_time / dt)`. A
/// zero duration is accepted and yields an empty grid with a single point.
pub fn make_chain<T: Real>(n_sites: usize, coupling: T, dt: T, total_time: T) -> Result<ChainConfig<T>> {
    if n_sites < 2 {
        return Err(Error::InvalidConfig(format!(
            "a chain needs at least 2 sites, got {n_sites}"
        )));
    }
    if !(coupling > T::zero()) || !coupling.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "coupling must be positive, got {coupling}"
        )));
    }
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::InvalidConfig(format!("dt must be positive, got {dt}")));
    }
    let n_steps = steps_for(total_time, dt)?;
    let dt = if n_steps > 0 { total_time / from_usize::<T>(n_steps) } else { dt };
    Ok(ChainConfig {
        n_sites,
        coupling,
        positions: (0..n_sites).map(from_usize).collect(),
        dt,
        n_steps,
    })
}

/// Field strength at `position`: `strength * (position - minimum)^2`.
#[inline]
pub fn control_field<T: Real>(strength: T, minimum: T, position: T) -> T {
    let r = position - minimum;
    strength * r * r
}

/// Real symmetric tridiagonal matrix stored by diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal<T> {
    pub diag: Vec<T>,
    pub off: Vec<T>,
}

impl<T: Real> SymTridiagonal<T> {
    pub fn order(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let n = self.order();
        let mut m = vec![vec![T::zero(); n]; n];
        for i in 0..n {
            m[i][i] = self.diag[i];
        }
        for (i, &b) in self.off.iter().enumerate() {
            m[i][i + 1] = b;
            m[i + 1][i] = b;
        }
        m
    }

    /// `H psi`.
    pub fn apply(&self, psi: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.order();
        let mut out: Vec<Complex<T>> = psi.iter().zip(&self.diag).map(|(p, &h)| p * h).collect();
        for i in 0..n.saturating_sub(1) {
            let b = self.off[i];
            out[i] += psi[i + 1] * b;
            out[i + 1] += psi[i] * b;
        }
        out
    }

    /// Adds a diagonal.
    pub fn plus_diagonal(mut self, extra: &[T]) -> Self {
        for (h, &e) in self.diag.iter_mut().zip(extra) {
            *h += e;
        }
        self
    }
}

/// Static and control pieces of the reduced Hamiltonian at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianParts<T> {
    pub static_part: SymTridiagonal<T>,
    pub control_diagonal: Vec<T>,
}

impl<T: Real> HamiltonianParts<T> {
    pub fn new(cfg: &ChainConfig<T>, strength: T, minimum: T) -> Self {
        Self {
            static_part: static_hamiltonian(cfg),
            control_diagonal: control_hamiltonian(cfg, strength, minimum),
        }
    }

    pub fn total(&self) -> SymTridiagonal<T> {
        self.static_part.clone().plus_diagonal(&self.control_diagonal)
    }
}

/// Exchange part: `-2J` on the diagonal, `-J` at the two end sites, `J` on
/// both off-diagonals.
pub fn static_hamiltonian<T: Real>(cfg: &ChainConfig<T>) -> SymTridiagonal<T> {
    let n = cfg.n_sites;
    let j = cfg.coupling;
    let mut diag = vec![lit::<T>(-2.0) * j; n];
    diag[0] += j;
    diag[n - 1] += j;
    SymTridiagonal {
        diag,
        off: vec![j; n - 1],
    }
}

/// Diagonal of the control Hamiltonian, `strength * (x_n - minimum)^2`.
pub fn control_hamiltonian<T: Real>(cfg: &ChainConfig<T>, strength: T, minimum: T) -> Vec<T> {
    cfg.positions
        .iter()
        .map(|&x| control_field(strength, minimum, x))
        .collect()
}

/// Full reduced Hamiltonian at the given control values.
pub fn hamiltonian_at<T: Real>(cfg: &ChainConfig<T>, strength: T, minimum: T) -> SymTridiagonal<T> {
    HamiltonianParts::new(cfg, strength, minimum).total()
}

/// Complex amplitudes over the single-excitation basis `|phi_1> .. |phi_N>`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState<T> {
    pub amplitudes: Vec<Complex<T>>,
}

impl<T: Real> QuantumState<T> {
    pub fn new(amplitudes: Vec<Complex<T>>) -> Self {
        Self { amplitudes }
    }

    /// Builds a state and rescales it to unit norm.
    pub fn normalized(amplitudes: Vec<Complex<T>>) -> Result<Self> {
        let mut s = Self { amplitudes };
        let norm = s.norm_sqr().sqrt();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(Error::InvalidArgument("cannot normalize a zero state".into()));
        }
        for a in &mut s.amplitudes {
            *a = *a / norm;
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm_sqr(&self) -> T {
        self.amplitudes.iter().map(|a| a.norm_sqr()).fold(T::zero(), |s, x| s + x)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        inner(&self.amplitudes, &other.amplitudes)
    }

    pub fn probabilities(&self) -> Vec<T> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// `<a|b>` on raw amplitude slices.
#[inline]
pub(crate) fn inner<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter()
        .zip(b)
        .fold(Complex::new(T::zero(), T::zero()), |s, (x, y)| s + x.conj() * y)
}

/// Basis state `|phi_site>` (1-based): the excitation sits on `site`.
pub fn basis_state<T: Real>(cfg: &ChainConfig<T>, site: usize) -> Result<QuantumState<T>> {
    let n = cfg.n_sites;
    if site == 0 || site > n {
        return Err(Error::SiteOutOfRange { site, n_sites: n });
    }
    let mut amplitudes = vec![Complex::new(T::zero(), T::zero()); n];
    amplitudes[site - 1] = Complex::new(T::one(), T::zero());
    Ok(QuantumState { amplitudes })
}

/// Sampled controls `d(t)` and `C(t)` on the `n_steps + 1` grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPulse<T> {
    d: Vec<T>,
    c: Vec<T>,
    dt: T,
}

impl<T: Real> ControlPulse<T> {
    pub fn new(d: Vec<T>, c: Vec<T>, dt: T) -> Result<Self> {
        if d.len() != c.len() {
            return Err(Error::InvalidArgument(format!(
                "control series differ in length: d has {}, C has {}",
                d.len(),
                c.len()
            )));
        }
        if d.is_empty() {
            return Err(Error::InvalidArgument("a pulse needs at least one sample".into()));
        }
        if !(dt > T::zero()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if d.iter().chain(&c).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("pulse samples must be finite".into()));
        }
        if let Some(k) = c.iter().position(|&v| v < T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "field strength must be non-negative, sample {k} is {}",
                c[k]
            )));
        }
        Ok(Self { d, c, dt })
    }

    /// Seed used throughout: `d(t) = speed * t`, `C(t) = strength`.
    pub fn linear_ramp(cfg: &ChainConfig<T>, speed: T, strength: T) -> Result<Self> {
        Self::from_fn(cfg, |t| (speed * t, strength))
    }

    /// Samples `f(t) -> (d, C)` on the grid of `cfg`.
    pub fn from_fn(cfg: &ChainConfig<T>, f: impl Fn(T) -> (T, T)) -> Result<Self> {
        let (d, c) = (0..=cfg.n_steps).map(|k| f(cfg.time(k))).unzip();
        Self::new(d, c, cfg.dt)
    }

    pub fn minimum(&self) -> &[T] {
        &self.d
    }

    pub fn strength(&self) -> &[T] {
        &self.c
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn n_samples(&self) -> usize {
        self.d.len()
    }

    pub fn n_steps(&self) -> usize {
        self.d.len() - 1
    }

    /// `(strength, minimum)` at grid point `k`.
    #[inline]
    pub fn sample(&self, k: usize) -> (T, T) {
        (self.c[k], self.d[k])
    }

    /// `(strength, minimum)` at the midpoint of step `k`, i.e. between grid
    /// points `k` and `k + 1`.
    #[inline]
    pub fn midpoint(&self, k: usize) -> (T, T) {
        let half = lit::<T>(0.5);
        (
            half * (self.c[k] + self.c[k + 1]),
            half * (self.d[k] + self.d[k + 1]),
        )
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut [T], &mut [T]) {
        (&mut self.d, &mut self.c)
    }

    /// Fails unless the pulse lives on the grid of `cfg`.
    pub fn check_grid(&self, cfg: &ChainConfig<T>) -> Result<()> {
        if self.n_samples() != cfg.n_steps + 1 {
            return Err(Error::InvalidArgument(format!(
                "pulse has {} samples, chain grid needs {}",
                self.n_samples(),
                cfg.n_steps + 1
            )));
        }
        let tol = lit::<T>(1e-9) * cfg.dt;
        if (self.dt - cfg.dt).abs() > tol {
            return Err(Error::InvalidArgument(format!(
                "pulse dt {} does not match chain dt {}",
                self.dt, cfg.dt
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> ChainConfig<f64> {
        make_chain::<f64>(n, 1.0, 0.01, 1.0).unwrap()
    }

    #[test]
    fn default_positions_start_at_zero() {
        let cfg = make_chain::<f64>(2, 1.0, 0.01, 2.0).unwrap();
        assert_eq!(cfg.positions(), &[0.0, 1.0]);
        assert_eq!(cfg.n_steps(), 200);
    }

    #[test]
    fn reference_geometries() {
        let fig3 = make_chain::<f64>(101, 1.0, 0.01, 200.0).unwrap();
        assert_eq!(fig3.n_steps(), 20_000);
        assert_eq!(fig3.positions()[100], 100.0);
        let qsl = make_chain::<f64>(101, 1.0, 0.01, 56.50).unwrap();
        assert_eq!(qsl.n_steps(), 5650);
        assert!((qsl.total_time() - 56.5).abs() < 1e-9);
    }

    #[test]
    fn grid_ends_at_total_time() {
        let cfg = make_chain::<f64>(3, 1.0, 0.1, 1.04).unwrap();
        assert_eq!(cfg.n_steps(), 11);
        assert!(cfg.dt() <= 0.1);
        assert!((cfg.total_time() - 1.04).abs() < 1e-12);
        let cfg = make_chain::<f64>(3, 1.0, 0.1, 1.0).unwrap();
        assert_eq!(cfg.n_steps(), 10);
        assert!((cfg.dt() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(make_chain::<f64>(1, 1.0, 0.01, 1.0), Err(Error::InvalidConfig(_))));
        assert!(matches!(make_chain::<f64>(3, 0.0, 0.01, 1.0), Err(Error::InvalidConfig(_))));
        assert!(matches!(make_chain::<f64>(3, 1.0, -0.01, 1.0), Err(Error::InvalidConfig(_))));
        assert!(matches!(make_chain::<f64>(3, 1.0, 0.01, -1.0), Err(Error::InvalidConfig(_))));
        assert!(matches!(make_chain::<f64>(3, 1.0, 0.01, f64::NAN), Err(Error::InvalidConfig(_))));
        assert!(chain(3).with_positions(vec![0.0, 2.0, 1.0]).is_err());
        assert!(chain(3).with_positions(vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn control_field_values() {
        assert_eq!(control_field(1.0, 0.0, 0.0), 0.0);
        assert_eq!(control_field(1.0, 3.0, 1.0), 4.0);
        assert!((control_field::<f64>(0.1, 2.0, 0.0) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn static_part_matches_printed_matrix() {
        let h = static_hamiltonian(&chain(2)).to_dense();
        assert_eq!(h, vec![vec![-1.0, 1.0], vec![1.0, -1.0]]);
        let h3 = static_hamiltonian(&chain(3)).to_dense();
        assert_eq!(
            h3,
            vec![vec![-1.0, 1.0, 0.0], vec![1.0, -2.0, 1.0], vec![0.0, 1.0, -1.0]]
        );
        let cfg2 = make_chain::<f64>(3, 2.0, 0.01, 1.0).unwrap();
        let h32 = static_hamiltonian(&cfg2).to_dense();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(h32[i][j], 2.0 * h3[i][j]);
            }
        }
    }

    #[test]
    fn static_part_is_symmetric_tridiagonal() {
        for n in [2usize, 3, 17, 128, 512] {
            let h = static_hamiltonian(&chain(n)).to_dense();
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(h[i][j], h[j][i]);
                    if i.abs_diff(j) > 1 {
                        assert_eq!(h[i][j], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn control_diagonal_values() {
        assert_eq!(control_hamiltonian(&chain(3), 0.0, 1.3), vec![0.0; 3]);
        assert_eq!(control_hamiltonian(&chain(3), 1.0, 0.0), vec![0.0, 1.0, 4.0]);
        let v = control_hamiltonian(&chain(2), 0.1, 0.5);
        assert!((v[0] - 0.025).abs() < 1e-15 && (v[1] - 0.025).abs() < 1e-15);
    }

    #[test]
    fn control_diagonal_is_smallest_near_minimum() {
        let cfg = chain(11);
        for &m in &[0.0, 2.3, 5.5001, 9.9, 10.0] {
            let v = control_hamiltonian(&cfg, 0.7, m);
            let argmin = (0..11)
                .min_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap())
                .unwrap();
            let nearest = (m.round() as usize).min(10);
            assert_eq!(argmin, nearest, "minimum {m}");
        }
    }

    #[test]
    fn basis_states() {
        let cfg = chain(3);
        let one = Complex::new(1.0, 0.0);
        let zero = Complex::new(0.0, 0.0);
        assert_eq!(basis_state(&cfg, 1).unwrap().amplitudes, vec![one, zero, zero]);
        assert_eq!(basis_state(&cfg, 3).unwrap().amplitudes, vec![zero, zero, one]);
        assert_eq!(
            basis_state(&cfg, 4),
            Err(Error::SiteOutOfRange { site: 4, n_sites: 3 })
        );
        assert!(basis_state(&cfg, 0).is_err());
    }

    #[test]
    fn pulse_validation() {
        let cfg = chain(3);
        let p = ControlPulse::linear_ramp(&cfg, 0.5, 1.0).unwrap();
        assert_eq!(p.n_samples(), 101);
        assert!(p.check_grid(&cfg).is_ok());
        assert!(p.check_grid(&cfg.with_total_time(2.0).unwrap()).is_err());
        assert!(ControlPulse::new(vec![0.0, 1.0], vec![1.0, -0.1], 0.1).is_err());
        assert!(ControlPulse::new(vec![0.0, 1.0], vec![1.0], 0.1).is_err());
        let (c, d) = p.midpoint(10);
        assert!((c - 1.0).abs() < 1e-15 && (d - 0.5 * 0.105).abs() < 1e-12);
    }
}
