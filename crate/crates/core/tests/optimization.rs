use spinchain::krotov::{costate_trajectory, krotov_sweep, optimize, terminal_costate, KrotovSettings};
use spinchain::model::{basis_state, make_chain, ControlPulse};
use spinchain::propagator::{evolve, infidelity};

#[test]
fn one_sweep_improves_the_baseline() {
    let cfg = make_chain(101, 1.0f64, 0.01, 200.0).unwrap();
    let pulse = ControlPulse::linear_ramp(&cfg, 0.5, 1.0).unwrap();
    let init = basis_state(&cfg, 1).unwrap();
    let target = basis_state(&cfg, 101).unwrap();
    let psi_t = evolve(&cfg, &pulse, &init).unwrap();
    let before = infidelity(&psi_t, &target).unwrap();
    let chi = costate_trajectory(&cfg, &pulse, &terminal_costate(&psi_t, &target)).unwrap();
    let settings = KrotovSettings::<f64>::default();
    let out = krotov_sweep(&cfg, &pulse, &init, &chi, settings.step_weight, settings.strength_gain).unwrap();
    let after = infidelity(&out.final_state, &target).unwrap();
    assert!(after < before, "{after} !< {before}");
    let replay = evolve(&cfg, &out.pulse, &init).unwrap();
    assert!((infidelity(&replay, &target).unwrap() - after).abs() < 1e-12);
}

#[test]
fn converged_pulse_is_a_fixed_point() {
    let cfg = make_chain(9, 1.0f64, 0.01, 12.0).unwrap();
    let init = basis_state(&cfg, 1).unwrap();
    let target = basis_state(&cfg, 9).unwrap();
    let seed = ControlPulse::linear_ramp(&cfg, 8.0 / 12.0, 1.0).unwrap();
    let settings = KrotovSettings { infidelity_threshold: 1e-4, max_iterations: 3000, ..Default::default() };
    let first = optimize(&cfg, &seed, &init, &target, &settings).unwrap();
    assert!(first.converged);
    let again = optimize(&cfg, &first.final_pulse, &init, &target, &settings).unwrap();
    assert_eq!(again.iterations_run, 1);
    assert_eq!(again.final_pulse, first.final_pulse);
}

#[test]
fn history_never_increases_near_the_limit() {
    let cfg = make_chain(21, 1.0f64, 0.01, 14.0).unwrap();
    let init = basis_state(&cfg, 1).unwrap();
    let target = basis_state(&cfg, 21).unwrap();
    let seed = ControlPulse::linear_ramp(&cfg, 20.0 / 14.0, 1.0).unwrap();
    let settings = KrotovSettings { max_iterations: 300, ..Default::default() };
    let out = optimize(&cfg, &seed, &init, &target, &settings).unwrap();
    assert_eq!(out.infidelity_history.len(), out.iterations_run);
    assert!(out.infidelity_history.windows(2).all(|w| w[1] <= w[0] + 1e-10));
    assert!(out.infidelity_history.iter().all(|&v| (0.0..=1.0).contains(&v)));
    assert!(out.infidelity_history.last().unwrap() < &out.infidelity_history[0]);
    assert!(out.final_pulse.strength().iter().all(|&c| c >= 0.0));
}
