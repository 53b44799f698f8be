import numpy as np
import pytest

from freqdiv.algebra import DensityMatrix, HilbertSpace, Operator, embed, local_annihilator, zero
from freqdiv.dynamics import (
    DegenerateSteadyStateError, IntegrationDivergedError, IntegratorConfig, SteadyEstimate, TimeSeries,
    _DiagonalGenerator, integrate, integrate_lab_frame, integrate_until_stable, lab_frame_derivative, lindblad_rhs,
    liouvillian, observables, stability_window, steady_state_direct, steady_state_from_trajectory,
)
from freqdiv.model import (
    DividerParams, DriveSchedule, LindbladTerm, build_collapse_terms, build_lab_hamiltonian,
    build_rotating_hamiltonian,
)
from freqdiv.oracle import decoupled_cavity_exact, exact_propagate
from freqdiv.units import mhz, ns

from conftest import random_density

NAMES = ("n_a", "n_b", "n_c", "P_1", "P_2")
FAST = IntegratorConfig(method="rk4", dt=1e-10, sample_interval=ns(5.0))


def test_vacuum_is_dark():
    p = DividerParams.standard(n_tr=3)
    rho = DensityMatrix.ground(p.space)
    d = lindblad_rhs(rho, build_rotating_hamiltonian(p, amp=0.0), build_collapse_terms(p))
    assert np.abs(d).max() == 0.0


def test_single_mode_decay_rate():
    space = HilbertSpace((2,))
    a = embed(space, 0, local_annihilator(2))
    gamma = 2.5e6
    rho = DensityMatrix.basis_state(space, (1,))
    d = lindblad_rhs(rho, zero(space), [LindbladTerm(a, gamma)])
    np.testing.assert_allclose(d, np.diag([gamma, -gamma]), atol=1e-9)


def test_rhs_trace_free_and_hermitian(rng):
    p = DividerParams.standard(n_tr=2, omega_q_ghz=4.093)
    H, terms = build_rotating_hamiltonian(p), build_collapse_terms(p)
    scale = np.abs(H.to_dense()).max()
    for _ in range(100):
        rho = DensityMatrix(p.space, random_density(rng, p.space.dim))
        d = lindblad_rhs(rho, H, terms)
        assert abs(np.trace(d)) <= 1e-12 * scale
        assert np.abs(d - d.conj().T).max() <= 1e-12 * scale


def test_compiled_rhs_matches_reference(rng):
    p = DividerParams.standard(n_tr=3, omega_q_ghz=4.096, g_e_mhz=0.7).replace(lambda2=mhz(3.0))
    H, terms = build_rotating_hamiltonian(p), build_collapse_terms(p)
    static, _ = __import__("freqdiv.model", fromlist=["x"]).rotating_hamiltonian_parts(p)
    gen = _DiagonalGenerator(static, [H - static], terms)
    vals = gen.values([1.0])
    for _ in range(3):
        rho = DensityMatrix(p.space, random_density(rng, p.space.dim))
        ref = lindblad_rhs(rho, H, terms)
        assert np.abs(gen(rho.data, vals) - ref).max() <= 1e-12 * np.abs(ref).max()


def test_liouvillian_matches_rhs(rng):
    p = DividerParams.standard(n_tr=2)
    H, terms = build_rotating_hamiltonian(p), build_collapse_terms(p)
    lv = liouvillian(H, terms)
    rho = DensityMatrix(p.space, random_density(rng, p.space.dim))
    np.testing.assert_allclose((lv @ rho.data.reshape(-1)).reshape(rho.data.shape), lindblad_rhs(rho, H, terms),
                               atol=1e-6)


def test_closed_system_without_hamiltonian_is_frozen(rng):
    p = DividerParams.standard(n_tr=2, g3_mhz=0, lambda_mhz=0, amp_mhz=0, gamma_a_mhz=0, gamma_bc_mhz=0, kappa_mhz=0)
    p = p.replace(omega_a=2 * p.omega_b)
    rho0 = DensityMatrix(p.space, random_density(rng, p.space.dim))
    ts = integrate(rho0, p, DriveSchedule.continuous(0.0), ns(20.0), FAST)
    np.testing.assert_allclose(ts.final_state.data, rho0.data, atol=1e-14)


def test_sample_grid_and_initial_row():
    p = DividerParams.standard(n_tr=2)
    ts = integrate(None, p, DriveSchedule.continuous(p.drive_amp), ns(20.0), FAST)
    np.testing.assert_allclose(ts.times * 1e9, [0, 5, 10, 15, 20], atol=1e-9)
    assert [ts[k][0] for k in NAMES] == [0.0] * 5
    assert ts["trace"][0] == 1.0 and ts["purity"][0] == 1.0
    assert np.all(np.diff(ts.times) > 0)


def test_rk4_matches_exact_exponential():
    p = DividerParams.standard(n_tr=2)
    s = DriveSchedule.continuous(p.drive_amp)
    ts = integrate(None, p, s, ns(100.0), IntegratorConfig(method="rk4", sample_interval=ns(25.0)))
    ex = integrate(None, p, s, ns(100.0), IntegratorConfig(method="expm", sample_interval=ns(25.0)))
    gen = liouvillian(build_rotating_hamiltonian(p), build_collapse_terms(p))
    direct = observables(exact_propagate(DensityMatrix.ground(p.space), gen, ns(100.0)))
    for k in NAMES:
        assert np.abs(ts[k] - ex[k]).max() < 1e-7
        assert abs(ex[k][-1] - direct[k]) < 1e-10


def test_rk45_matches_rk4():
    p = DividerParams.standard(n_tr=3)
    s = DriveSchedule.square(p.drive_amp, ns(30.0), ns(10.0), 2)
    a = integrate(None, p, s, ns(100.0), FAST)
    b = integrate(None, p, s, ns(100.0), IntegratorConfig(method="rk45", sample_interval=ns(5.0)))
    for k in NAMES:
        assert np.abs(a[k] - b[k]).max() < 1e-6


def test_expm_guard():
    p = DividerParams.standard(n_tr=4)
    with pytest.raises(ValueError):
        integrate(None, p, DriveSchedule.continuous(p.drive_amp), ns(1.0), IntegratorConfig(method="expm"))


def test_decoupled_cavity_closed_form():
    p = DividerParams.standard(n_tr=2, n_tr_a=14, g3_mhz=0, lambda_mhz=0)
    ts = integrate(None, p, DriveSchedule.continuous(p.drive_amp), ns(150.0), FAST)
    assert np.abs(ts["n_a"] - decoupled_cavity_exact(p, None, ts.times)).max() < 1e-6


@pytest.mark.parametrize("omega_q_ghz", [4.100, 4.093])
def test_lab_frame_agrees_with_rotating_frame(omega_q_ghz):
    p = DividerParams.standard(n_tr=2, omega_q_ghz=omega_q_ghz).replace(omega_c=2 * np.pi * 4.104e9)
    s = DriveSchedule.square(p.drive_amp, ns(20.0), ns(5.0), 2)
    rot = integrate(None, p, s, ns(60.0), FAST)
    lab = integrate_lab_frame(None, p, s, ns(60.0), FAST)
    for k in NAMES:
        assert np.abs(rot[k] - lab[k]).max() < 1e-8


def test_lab_frame_without_drive():
    p = DividerParams.standard(n_tr=2, amp_mhz=0)
    rho0 = DensityMatrix.basis_state(p.space, (1, 0, 1, 1, 0))
    rot = integrate(rho0, p, DriveSchedule.continuous(0.0), ns(40.0), FAST)
    lab = integrate_lab_frame(rho0, p, DriveSchedule.continuous(0.0), ns(40.0), FAST)
    for k in NAMES:
        assert np.abs(rot[k] - lab[k]).max() < 1e-9


def test_lab_derivative_at_zero(rng):
    p = DividerParams.standard(n_tr=2)
    s = DriveSchedule.continuous(p.drive_amp)
    rho = DensityMatrix(p.space, random_density(rng, p.space.dim))
    ref = lindblad_rhs(rho, build_lab_hamiltonian(p, 0.0), build_collapse_terms(p))
    assert np.abs(lab_frame_derivative(rho, p, s, 0.0) - ref).max() <= 1e-12 * np.abs(ref).max()


def test_lab_frame_dimension_guard():
    p = DividerParams.standard(n_tr=4)
    with pytest.raises(ValueError):
        integrate_lab_frame(None, p, DriveSchedule.continuous(p.drive_amp), ns(1.0), FAST, max_dim=128)


def test_trace_drift_is_reported():
    p = DividerParams.standard(n_tr=2)
    bad = DensityMatrix(p.space, 1.01 * DensityMatrix.ground(p.space).data)
    with pytest.raises(IntegrationDivergedError):
        integrate(bad, p, DriveSchedule.continuous(p.drive_amp), ns(1.0), FAST)


def test_physicality_and_symmetry_along_trajectory():
    p = DividerParams.standard(n_tr=3, omega_q_ghz=4.096)
    cfg = IntegratorConfig(method="rk4", sample_interval=ns(2.0), diagnostics=True)
    ts = integrate(None, p, DriveSchedule.continuous(p.drive_amp), ns(200.0), cfg)
    assert np.abs(ts["trace"] - 1).max() < 1e-10
    assert ts.diagnostics["min_eig"].min() > -1e-10
    assert ts.diagnostics["herm_err"].max() < 1e-12
    assert np.abs(ts["n_b"] - ts["n_c"]).max() <= 1e-9
    assert np.abs(ts["P_1"] - ts["P_2"]).max() <= 1e-9
    assert ts["P_1"].max() <= 1 + 1e-9


def test_square_train_switches_exactly_at_boundaries():
    p = DividerParams.standard(n_tr=2, g3_mhz=0, lambda_mhz=0)
    s = DriveSchedule.square(p.drive_amp, ns(30.0), ns(10.0), 1)
    ts = integrate(None, p, s, ns(40.0), IntegratorConfig(sample_interval=ns(10.0)))
    assert ts["n_a"][1] == 0.0  # nothing before the window opens at 10 ns
    assert ts["n_a"][-1] > 0.1


def test_stability_window():
    p = DividerParams.standard()
    assert stability_window(p) == pytest.approx(10 / p.gamma_b)


def _series(times, values):
    return TimeSeries(np.asarray(times), {k: np.asarray(values, dtype=float) for k in NAMES})


def test_trajectory_steady_state_examples():
    t = np.linspace(0, 1e-6, 1001)
    est = steady_state_from_trajectory(_series(t, np.full_like(t, 0.25)), 2e-7)
    assert est.converged and est.n_b == 0.25
    gamma = 2e7
    est = steady_state_from_trajectory(_series(t, 1 - np.exp(-gamma * t)), 1e-6 - 8 / gamma)
    assert abs(est.n_a - 1) < np.exp(-8)
    osc = 0.4 + 1e-5 * np.cos(2 * np.pi * 5e8 * t)
    est = steady_state_from_trajectory(_series(t, osc), 5e-7)
    assert est.converged and abs(est.P_1 - 0.4) < 1e-6
    with pytest.raises(ValueError):
        steady_state_from_trajectory(_series(t, osc), 2e-6)
    grow = steady_state_from_trajectory(_series(t, t * 1e6), 5e-7)
    assert not grow.converged and isinstance(grow, SteadyEstimate)


def test_direct_steady_state_without_drive_is_ground():
    p = DividerParams.standard(n_tr=3, amp_mhz=0)
    rho = steady_state_direct(p)
    assert abs(rho.data[0, 0] - 1) < 1e-12


def test_direct_steady_state_of_decoupled_cavity():
    p = DividerParams.standard(n_tr=2, n_tr_a=16, g3_mhz=0, lambda_mhz=0)
    n = observables(steady_state_direct(p))["n_a"]
    assert n == pytest.approx(4 * p.drive_amp ** 2 / p.gamma_a ** 2, abs=1e-6)


def test_direct_steady_state_matches_long_trajectory():
    p = DividerParams.standard(n_tr=3)
    direct = observables(steady_state_direct(p))
    ts = integrate(None, p, DriveSchedule.continuous(p.drive_amp), 10 / p.gamma_b,
                   IntegratorConfig(method="rk45", sample_interval=ns(20.0)))
    assert abs(ts["n_b"][-1] - direct["n_b"]) < 1e-4


def test_direct_steady_state_detects_degeneracy():
    p = DividerParams.standard(n_tr=2, gamma_a_mhz=0, gamma_bc_mhz=0, kappa_mhz=0)
    p = p.replace(gamma_a=0.0)
    with pytest.raises(DegenerateSteadyStateError):
        steady_state_direct(p)


def test_integrate_until_stable_reaches_plateau():
    p = DividerParams.standard(n_tr=2)
    ts, est = integrate_until_stable(p, cfg=IntegratorConfig(method="rk45", sample_interval=ns(5.0)))
    direct = observables(steady_state_direct(p))
    assert est.converged
    assert abs(est.n_b - direct["n_b"]) < 1e-4
