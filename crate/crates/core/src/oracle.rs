//! Brute-force propagation in the full `2^N` spin space, used to check the
//! single-excitation reduction on short chains.
//!
//! Basis index bits are site occupations read left to right: site 1 is the
//! most significant bit, so site `n` up sets bit `1 << (N - n)`.
//!
//! The operator is `(J/2) sum sigma_n . sigma_{n+1} + (1/2) sum B_n sigma^z_n`.
//! Restricted to one up-spin it equals the reduced Hamiltonian plus the
//! c-number `(J/2)(N - 1) - (1/2) sum B_n`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::model::{control_field, ChainConfig, ControlPulse, QuantumState};
use crate::scalar::{from_usize, lit, Real};

/// Largest chain the oracle accepts.
pub const MAX_ORACLE_SITES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct FullState<T> {
    pub n_sites: usize,
    pub amplitudes: Vec<Complex<T>>,
}

impl<T: Real> FullState<T> {
    pub fn norm_sqr(&self) -> T {
        self.amplitudes.iter().fold(T::zero(), |a, z| a + z.norm_sqr())
    }

    /// Expected number of up spins.
    pub fn excitation_number(&self) -> T {
        self.amplitudes
            .iter()
            .enumerate()
            .fold(T::zero(), |a, (i, z)| a + from_usize::<T>(i.count_ones() as usize) * z.norm_sqr())
    }
}

fn guard(n_sites: usize) -> Result<()> {
    if n_sites > MAX_ORACLE_SITES {
        return Err(Error::ResourceLimit(format!(
            "full-space oracle is limited to {MAX_ORACLE_SITES} sites, got {n_sites}"
        )));
    }
    Ok(())
}

/// Basis index of the configuration with a single up spin at `site` (1-based).
pub fn single_excitation_index(n_sites: usize, site: usize) -> usize {
    1 << (n_sites - site)
}

/// Diagonal and hopping data of the full operator for fixed controls.
struct FullOperator<T> {
    n: usize,
    coupling: T,
    fields: Vec<T>,
}

impl<T: Real> FullOperator<T> {
    fn new(cfg: &ChainConfig<T>, strength: T, minimum: T) -> Self {
        Self {
            n: cfg.n_sites(),
            coupling: cfg.coupling(),
            fields: cfg.positions().iter().map(|&x| control_field(strength, minimum, x)).collect(),
        }
    }

    fn bit(&self, site: usize) -> usize {
        1 << (self.n - 1 - site)
    }

    fn diagonal(&self, index: usize) -> T {
        let half = lit::<T>(0.5);
        let spin = |site: usize| if index & self.bit(site) != 0 { T::one() } else { -T::one() };
        let mut e = T::zero();
        for s in 0..self.n.saturating_sub(1) {
            e += half * self.coupling * spin(s) * spin(s + 1);
        }
        for s in 0..self.n {
            e += half * self.fields[s] * spin(s);
        }
        e
    }

    /// `out = (H - shift) v`.
    fn apply(&self, v: &[Complex<T>], shift: T, out: &mut [Complex<T>]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = v[i] * (self.diagonal(i) - shift);
        }
        for s in 0..self.n.saturating_sub(1) {
            let mask = self.bit(s) | self.bit(s + 1);
            for i in 0..v.len() {
                let occ = i & mask;
                if occ != 0 && occ != mask {
                    // sigma^x sigma^x + sigma^y sigma^y flips an antiparallel pair with amplitude 2.
                    out[i ^ mask] += v[i] * self.coupling;
                }
            }
        }
    }

    /// Smallest diagonal entry over single-excitation configurations.
    fn sector_floor(&self) -> T {
        (0..self.n)
            .map(|s| self.diagonal(self.bit(s)))
            .fold(T::infinity(), T::min)
    }
}

/// Applies the full Hamiltonian at the given controls.
pub fn full_hamiltonian_apply<T: Real>(
    cfg: &ChainConfig<T>,
    strength: T,
    minimum: T,
    state: &FullState<T>,
) -> Result<FullState<T>> {
    guard(cfg.n_sites())?;
    check_len(cfg, state)?;
    let op = FullOperator::new(cfg, strength, minimum);
    let mut out = vec![Complex::new(T::zero(), T::zero()); state.amplitudes.len()];
    op.apply(&state.amplitudes, T::zero(), &mut out);
    Ok(FullState { n_sites: state.n_sites, amplitudes: out })
}

fn check_len<T: Real>(cfg: &ChainConfig<T>, state: &FullState<T>) -> Result<()> {
    if state.n_sites != cfg.n_sites() || state.amplitudes.len() != 1 << cfg.n_sites() {
        return Err(Error::InvalidArgument(format!(
            "full state has {} amplitudes, chain of {} sites needs {}",
            state.amplitudes.len(),
            cfg.n_sites(),
            1usize << cfg.n_sites()
        )));
    }
    Ok(())
}

/// Places a reduced state in the full space.
pub fn embed<T: Real>(state: &QuantumState<T>, cfg: &ChainConfig<T>) -> Result<FullState<T>> {
    let n = cfg.n_sites();
    guard(n)?;
    if state.len() != n {
        return Err(Error::InvalidArgument("reduced state length differs from chain".into()));
    }
    let mut amplitudes = vec![Complex::new(T::zero(), T::zero()); 1 << n];
    for (site, &a) in state.amplitudes.iter().enumerate() {
        amplitudes[single_excitation_index(n, site + 1)] = a;
    }
    Ok(FullState { n_sites: n, amplitudes })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection<T> {
    pub state: QuantumState<T>,
    /// Squared norm outside the single-excitation sector.
    pub leaked_weight: T,
}

/// Extracts the single-excitation components of a full state.
pub fn project<T: Real>(state: &FullState<T>, cfg: &ChainConfig<T>) -> Result<Projection<T>> {
    guard(cfg.n_sites())?;
    check_len(cfg, state)?;
    let n = cfg.n_sites();
    let amplitudes: Vec<Complex<T>> =
        (1..=n).map(|site| state.amplitudes[single_excitation_index(n, site)]).collect();
    let inside = amplitudes.iter().fold(T::zero(), |a, z| a + z.norm_sqr());
    if !(inside > T::zero()) {
        return Err(Error::DegenerateProjection);
    }
    Ok(Projection {
        state: QuantumState::new(amplitudes),
        leaked_weight: (state.norm_sqr() - inside).max(T::zero()),
    })
}

fn dot<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter().zip(b).fold(Complex::new(T::zero(), T::zero()), |s, (x, y)| s + x.conj() * y)
}

/// Crank-Nicolson evolution in the full space under `pulse`.
///
/// Each step solves `(1 + iK) y = psi` with `K = (H - s) dt / 2` by conjugate
/// gradients on `(1 + K^2) y = (1 - iK) psi` and sets `psi' = 2y - psi`. The
/// reference `s` is the smallest diagonal entry of the one-excitation sector
/// so that, restricted to that sector, each step is the reduced step.
pub fn full_propagate<T: Real>(
    cfg: &ChainConfig<T>,
    pulse: &ControlPulse<T>,
    initial: &FullState<T>,
) -> Result<FullState<T>> {
    guard(cfg.n_sites())?;
    check_len(cfg, initial)?;
    pulse.check_grid(cfg)?;
    let dim = initial.amplitudes.len();
    let zero = Complex::new(T::zero(), T::zero());
    let i = Complex::new(T::zero(), T::one());
    let half_dt = cfg.dt() * lit(0.5);
    let tol = lit::<T>(1e-28).max(T::epsilon() * T::epsilon());
    let mut psi = initial.amplitudes.clone();
    let (mut rhs, mut y, mut r, mut p, mut kp, mut ap) =
        (vec![zero; dim], vec![zero; dim], vec![zero; dim], vec![zero; dim], vec![zero; dim], vec![zero; dim]);

    for k in 0..cfg.n_steps() {
        let (strength, minimum) = pulse.midpoint(k);
        let op = FullOperator::new(cfg, strength, minimum);
        let shift = op.sector_floor();
        let apply_k = |v: &[Complex<T>], out: &mut [Complex<T>]| {
            op.apply(v, shift, out);
            for o in out.iter_mut() {
                *o = *o * half_dt;
            }
        };
        apply_k(&psi, &mut kp);
        for j in 0..dim {
            rhs[j] = psi[j] - i * kp[j];
        }
        let b_norm = dot(&rhs, &rhs).re;
        y.copy_from_slice(&psi);
        // residual r = rhs - (1 + K^2) y
        apply_k(&y, &mut kp);
        apply_k(&kp, &mut ap);
        for j in 0..dim {
            r[j] = rhs[j] - y[j] - ap[j];
        }
        p.copy_from_slice(&r);
        let mut rr = dot(&r, &r).re;
        let mut iterations = 0;
        while rr > tol * b_norm {
            iterations += 1;
            if iterations > 10 * dim + 100 {
                return Err(Error::SolverFailure(format!(
                    "conjugate gradients did not converge in step {k}"
                )));
            }
            apply_k(&p, &mut kp);
            apply_k(&kp, &mut ap);
            for j in 0..dim {
                ap[j] += p[j];
            }
            let alpha = rr / dot(&p, &ap).re;
            for j in 0..dim {
                y[j] += p[j] * alpha;
                r[j] -= ap[j] * alpha;
            }
            let next = dot(&r, &r).re;
            let beta = next / rr;
            rr = next;
            for j in 0..dim {
                p[j] = r[j] + p[j] * beta;
            }
        }
        for j in 0..dim {
            psi[j] = y[j] * lit::<T>(2.0) - psi[j];
        }
    }
    Ok(FullState { n_sites: initial.n_sites, amplitudes: psi })
}
