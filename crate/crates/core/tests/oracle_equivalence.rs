use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinchain::model::{basis_state, make_chain, ChainConfig, ControlPulse, QuantumState};
use spinchain::oracle::{embed, full_propagate, project};
use spinchain::propagator::evolve;

fn smooth_pulse(cfg: &ChainConfig<f64>, rng: &mut ChaCha8Rng) -> ControlPulse<f64> {
    let total = cfg.total_time();
    let span = (cfg.n_sites() - 1) as f64;
    let (a, w, phase) = (rng.gen_range(0.0..0.8), rng.gen_range(0.5..3.0), rng.gen_range(0.0..6.0));
    let (c0, c1) = (rng.gen_range(0.05..1.5), rng.gen_range(0.0..0.5));
    ControlPulse::from_fn(cfg, |t| {
        (span * t / total + a * (w * t + phase).sin(), c0 + c1 * (0.5 * w * t).cos().powi(2))
    })
    .unwrap()
}

/// Largest amplitude difference after removing the global phase.
fn aligned_error(a: &QuantumState<f64>, b: &QuantumState<f64>) -> f64 {
    let k = (0..a.len())
        .max_by(|&i, &j| a.amplitudes[i].norm().partial_cmp(&a.amplitudes[j].norm()).unwrap())
        .unwrap();
    let phase = a.amplitudes[k] / b.amplitudes[k];
    let phase = phase / phase.norm();
    a.amplitudes
        .iter()
        .zip(&b.amplitudes)
        .fold(0.0, |m, (x, y)| m.max((x - y * phase).norm()))
}

#[test]
fn reduced_and_full_space_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for n in [2usize, 4, 6, 8] {
        let cfg = make_chain(n, 1.0, 0.01, 3.0).unwrap();
        let pulse = smooth_pulse(&cfg, &mut rng);
        let start = basis_state(&cfg, 1).unwrap();
        let reduced = evolve(&cfg, &pulse, &start).unwrap();
        let full = full_propagate(&cfg, &pulse, &embed(&start, &cfg).unwrap()).unwrap();
        let proj = project(&full, &cfg).unwrap();
        let err = aligned_error(&reduced, &proj.state);
        assert!(err < 1e-8, "N={n}: {err}");
        assert!(proj.leaked_weight < 1e-12, "N={n}: leak {}", proj.leaked_weight);
        assert!((full.excitation_number() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn superposition_over_sectors_keeps_excitation_number() {
    let cfg = make_chain(5, 1.0f64, 0.01, 2.0).unwrap();
    let pulse = ControlPulse::linear_ramp(&cfg, 2.0, 0.6).unwrap();
    let dim = 1 << 5;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let raw: Vec<Complex<f64>> = (0..dim).map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let norm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let start = spinchain::oracle::FullState { n_sites: 5, amplitudes: raw.iter().map(|z| z / norm).collect() };
    let out = full_propagate(&cfg, &pulse, &start).unwrap();
    assert!((out.norm_sqr() - 1.0).abs() < 1e-9);
    assert!((out.excitation_number() - start.excitation_number()).abs() < 1e-10);
}
