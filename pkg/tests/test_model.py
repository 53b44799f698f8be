import numpy as np
import pytest

from freqdiv.algebra import DensityMatrix, HilbertSpace, Operator
from freqdiv.model import (
    DividerParams, DriveSchedule, InvalidParamsError, LindbladTerm, build_collapse_terms, build_lab_hamiltonian,
    build_rotating_hamiltonian, divider_operators, drive_amplitude, frame_unitary, to_rotating_frame,
)
from freqdiv.units import ghz, mhz, ns, to_mhz

G, E = 0, 1


def small(**kw):
    return DividerParams.standard(n_tr=3, **kw)


def test_standard_defaults():
    p = DividerParams.standard()
    assert p.omega_a == pytest.approx(ghz(8.2))
    assert to_mhz(p.g3) == pytest.approx(10.0)
    assert p.delta2 == pytest.approx(0.0, abs=1e-3)
    assert p.is_symmetric()


@pytest.mark.parametrize("field,value", [("gamma_a", -1.0), ("omega_b", 0.0), ("n_tr", 1), ("g3", float("nan"))])
def test_params_validation(field, value):
    with pytest.raises(InvalidParamsError):
        DividerParams.standard(**{field: value})


def test_detunings_of_shifted_divider():
    p = DividerParams.standard(omega_q_ghz=4.096)
    assert to_mhz(p.delta_ba) == pytest.approx(-4.0, abs=1e-9)
    assert to_mhz(p.delta_qa[0]) == pytest.approx(-4.0, abs=1e-9)
    assert to_mhz(p.delta2) == pytest.approx(8.0, abs=1e-9)


def test_rotating_hamiltonian_vanishes_when_everything_is_off():
    p = small(g3_mhz=0, lambda_mhz=0, omega_q_ghz=4.1)
    h = build_rotating_hamiltonian(p, amp=0.0)
    assert np.abs(h.to_dense()).max() < 1e-3  # exact zero up to rounding of 8.2/2 vs 4.1 in rad/s
    p = p.replace(omega_a=2 * p.omega_b)
    assert np.abs(build_rotating_hamiltonian(p, amp=0.0).to_dense()).max() == 0.0


def test_three_body_matrix_element():
    p = small()
    h = build_rotating_hamiltonian(p)
    assert h.element((E, E, 0, 0, 0), (G, G, 1, 0, 0)) == pytest.approx(p.g3)
    assert h.element((G, G, 1, 0, 0), (E, E, 0, 0, 0)) == pytest.approx(p.g3)


def test_three_body_couples_only_the_pair():
    p = small(lambda_mhz=0)
    h = build_rotating_hamiltonian(p, amp=0.0)
    space = p.space
    for nb in range(3):
        for nc in range(3):
            src = space.index((G, G, 1, nb, nc))
            row = h.to_dense()[:, src]
            nz = [space.labels(i) for i in np.flatnonzero(np.abs(row) > 0) if i != src]
            assert nz == [(E, E, 0, nb, nc)]


def test_hamiltonians_are_hermitian(rng):
    p = small(g_e_mhz=0.3, omega_q_ghz=4.09).replace(lambda2=mhz(3.0))
    assert build_rotating_hamiltonian(p).is_hermitian(1e-6)
    for t in rng.uniform(0, 1e-6, size=5):
        h = build_lab_hamiltonian(p, t)
        assert h.hermiticity_error() <= 1e-12 * np.abs(h.to_dense()).max()


def test_lab_ground_energy():
    p = small(g_e_mhz=0.5)
    h = build_lab_hamiltonian(p, 0.0, amp=0.0)
    e = h.element((G, G, 0, 0, 0), (G, G, 0, 0, 0))
    assert e.real == pytest.approx(-(p.omega_q1 + p.omega_q2) / 2 + p.g_e, rel=1e-14)


def test_lab_drive_element(rng):
    p = small()
    for t in rng.uniform(0, 1e-7, size=3):
        h = build_lab_hamiltonian(p, t)
        val = h.element((G, G, 1, 0, 0), (G, G, 0, 0, 0))
        assert val == pytest.approx(p.drive_amp * np.exp(-1j * p.omega_a * t), rel=1e-12)


def test_frame_identity_at_random_times(rng):
    p = small(g_e_mhz=0.2, omega_q_ghz=4.093).replace(omega_c=ghz(4.105), lambda2=mhz(4.0))
    h_r = build_rotating_hamiltonian(p).to_dense()
    scale = np.abs(build_lab_hamiltonian(p, 0.0).to_dense()).max()
    for t in rng.uniform(0, 2e-6, size=10):
        h = to_rotating_frame(p, build_lab_hamiltonian(p, t), t).to_dense()
        assert np.abs(h - h_r).max() / scale < 1e-10


def test_frame_unitary_phase_rules(rng):
    p = small()
    ops = divider_operators(p.space)
    t = 3.7e-9
    u = frame_unitary(p, t)
    lhs = u.dag() @ ops.a.dag() @ u
    assert lhs.allclose(ops.a.dag() * np.exp(1j * p.omega_a * t), atol=1e-12)
    lhs = u.dag() @ ops.sm1 @ u
    assert lhs.allclose(ops.sm1 * np.exp(-0.5j * p.omega_a * t), atol=1e-12)


def _swap_permutation(space: HilbertSpace):
    perm = np.empty(space.dim, dtype=int)
    for i in range(space.dim):
        q1, q2, a, b, c = space.labels(i)
        perm[i] = space.index((q2, q1, a, c, b))
    return perm


def test_symmetric_hamiltonian_commutes_with_swap():
    p = small(omega_q_ghz=4.097, g_e_mhz=0.4)
    perm = _swap_permutation(p.space)
    s = np.eye(p.space.dim)[perm]
    h = build_rotating_hamiltonian(p).to_dense()
    assert np.abs(s @ h - h @ s).max() == pytest.approx(0.0, abs=1e-6)
    asym = p.replace(lambda2=mhz(3.0))
    h = build_rotating_hamiltonian(asym).to_dense()
    assert np.abs(s @ h - h @ s).max() > 1e6


def test_collapse_terms():
    p = DividerParams.standard(n_tr=2)
    terms = build_collapse_terms(p)
    rates = [to_mhz(t.rate) for t in terms]
    assert rates == pytest.approx([6, 1, 1, 3, 3])
    ground = DensityMatrix.ground(p.space).data
    for t in terms:
        assert np.abs(t.jump.to_dense() @ ground).max() == 0.0
    with pytest.raises(InvalidParamsError):
        LindbladTerm(terms[0].jump, -1.0)


def test_drive_windows_of_three_pulse_train():
    s = DriveSchedule.square(mhz(7.0), ns(50.0), ns(30.0), 3)
    windows = [(round(lo * 1e9, 9), round(hi * 1e9, 9)) for lo, hi in s.windows()]
    assert windows == [(30, 80), (110, 160), (190, 240)]
    on = [30, 55, 80, 110, 240]
    off = [0, 29.9, 80.1, 100, 170, 240.1, 500]
    for t in on:
        assert drive_amplitude(s, ns(t)) == s.amp
    for t in off:
        assert drive_amplitude(s, ns(t)) == 0.0


def test_zero_interval_is_continuous_until_train_ends():
    s = DriveSchedule.square(1.0, ns(50.0), 0.0, 2)
    assert all(drive_amplitude(s, ns(t)) == 1.0 for t in (0, 25, 50, 75, 100))
    assert drive_amplitude(s, ns(101)) == 0.0
    assert drive_amplitude(DriveSchedule.continuous(2.0), 1.0) == 2.0


@pytest.mark.parametrize("kw", [dict(t_w=0.0), dict(t_w=1e-9, tau=-1e-9), dict(t_w=1e-9, n_pulses=0)])
def test_schedule_validation(kw):
    with pytest.raises(InvalidParamsError):
        DriveSchedule(kind="square", amp=1.0, **kw)


def test_per_mode_truncation():
    p = DividerParams.standard(n_tr=2, n_tr_a=5)
    assert p.space.dims == (2, 2, 5, 2, 2)
    assert isinstance(build_rotating_hamiltonian(p), Operator)
