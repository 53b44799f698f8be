"""Hamiltonians, dissipators and drive envelopes of the two-qubit frequency divider.

All physical quantities are in SI angular units (rad/s, seconds) with
hbar = 1, so a Hamiltonian ``H`` here means ``H/hbar``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from functools import lru_cache
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .algebra import HilbertSpace, Operator, embed, local_annihilator
from .units import ghz, mhz

Q1, Q2, MODE_A, MODE_B, MODE_C = range(5)

_FREQUENCIES = ("omega_a", "omega_b", "omega_c", "omega_q1", "omega_q2")
_RATES = ("g3", "g_e", "lambda1", "lambda2", "gamma_a", "gamma_b", "gamma_c",
          "kappa1", "kappa2", "drive_amp")


class InvalidParamsError(ValueError):
    pass


@dataclass(frozen=True)
class DividerParams:
    """Physical parameters in rad/s.

    ``n_tr`` is the number of Fock levels kept per resonator (occupations
    ``0 .. n_tr-1``).  ``n_tr_a``/``n_tr_b``/``n_tr_c`` override it per mode.
    """

    omega_a: float
    omega_b: float
    omega_c: float
    omega_q1: float
    omega_q2: float
    g3: float
    lambda1: float
    lambda2: float
    gamma_a: float
    gamma_b: float
    gamma_c: float
    kappa1: float
    kappa2: float
    drive_amp: float
    g_e: float = 0.0
    n_tr: int = 6
    n_tr_a: int | None = None
    n_tr_b: int | None = None
    n_tr_c: int | None = None

    def __post_init__(self):
        for name in _FREQUENCIES:
            if not getattr(self, name) > 0:
                raise InvalidParamsError(f"{name} must be positive, got {getattr(self, name)}")
        for name in _RATES:
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise InvalidParamsError(f"{name} must be non-negative, got {value}")
        for name in ("n_tr", "n_tr_a", "n_tr_b", "n_tr_c"):
            value = getattr(self, name)
            if value is not None and (int(value) != value or value < 2):
                raise InvalidParamsError(f"{name} must be an integer >= 2, got {value}")

    @classmethod
    def standard(cls, *, omega_a_ghz=8.2, omega_q_ghz=4.10, g3_mhz=10.0, lambda_mhz=5.0,
                gamma_a_mhz=6.0, gamma_bc_mhz=1.0, kappa_mhz=3.0, amp_mhz=4.0,
                g_e_mhz=0.0, n_tr=4, **overrides) -> "DividerParams":
        """Symmetric divider in engineering units; defaults are the reference operating point.

        ``omega_q_ghz`` sets both qubits and both low-frequency resonators.
        """
        p = cls(
            omega_a=ghz(omega_a_ghz),
            omega_b=ghz(omega_q_ghz), omega_c=ghz(omega_q_ghz),
            omega_q1=ghz(omega_q_ghz), omega_q2=ghz(omega_q_ghz),
            g3=mhz(g3_mhz), lambda1=mhz(lambda_mhz), lambda2=mhz(lambda_mhz),
            gamma_a=mhz(gamma_a_mhz), gamma_b=mhz(gamma_bc_mhz), gamma_c=mhz(gamma_bc_mhz),
            kappa1=mhz(kappa_mhz), kappa2=mhz(kappa_mhz),
            drive_amp=mhz(amp_mhz), g_e=mhz(g_e_mhz), n_tr=n_tr,
        )
        return replace(p, **overrides) if overrides else p

    def replace(self, **changes) -> "DividerParams":
        return replace(self, **changes)

    @property
    def space(self) -> HilbertSpace:
        return HilbertSpace.divider(self.n_tr_a or self.n_tr, self.n_tr_b or self.n_tr,
                                    self.n_tr_c or self.n_tr)

    @property
    def delta_ba(self) -> float:
        return self.omega_b - self.omega_a / 2

    @property
    def delta_ca(self) -> float:
        return self.omega_c - self.omega_a / 2

    @property
    def delta_qa(self) -> tuple[float, float]:
        return self.omega_q1 - self.omega_a / 2, self.omega_q2 - self.omega_a / 2

    @property
    def delta2(self) -> float:
        """Two-qubit detuning ``omega_a - (omega_1 + omega_2)``."""
        return self.omega_a - (self.omega_q1 + self.omega_q2)

    def is_symmetric(self) -> bool:
        space = self.space
        return (self.lambda1 == self.lambda2 and self.gamma_b == self.gamma_c
                and self.kappa1 == self.kappa2 and self.omega_q1 == self.omega_q2
                and self.omega_b == self.omega_c and space.dims[MODE_B] == space.dims[MODE_C])

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class DriveSchedule:
    """Real drive envelope ``|Omega|(t)`` seen in the rotating frame.

    ``kind`` is ``"continuous"`` or ``"square"``.  A square train has
    ``n_pulses`` windows ``[(k-1) t_p + tau, k t_p]`` with ``t_p = t_w + tau``.
    """

    kind: str = "continuous"
    amp: float = 0.0
    t_w: float = 0.0
    tau: float = 0.0
    n_pulses: int = 1

    def __post_init__(self):
        if self.kind not in ("continuous", "square"):
            raise InvalidParamsError(f"unknown schedule kind {self.kind!r}")
        if self.amp < 0:
            raise InvalidParamsError("drive amplitude must be non-negative")
        if self.kind == "square":
            if not self.t_w > 0:
                raise InvalidParamsError("square pulses need t_w > 0")
            if self.tau < 0:
                raise InvalidParamsError("pulse interval tau must be >= 0")
            if int(self.n_pulses) != self.n_pulses or self.n_pulses < 1:
                raise InvalidParamsError("n_pulses must be an integer >= 1")

    @classmethod
    def continuous(cls, amp: float) -> "DriveSchedule":
        return cls("continuous", amp)

    @classmethod
    def square(cls, amp: float, t_w: float, tau: float = 0.0, n_pulses: int = 1) -> "DriveSchedule":
        return cls("square", amp, t_w, tau, n_pulses)

    @property
    def period(self) -> float:
        return self.t_w + self.tau

    def windows(self) -> list[tuple[float, float]]:
        if self.kind == "continuous":
            return [(0.0, math.inf)]
        tp = self.period
        return [((k - 1) * tp + self.tau, k * tp) for k in range(1, self.n_pulses + 1)]

    def breakpoints(self, t_end: float) -> list[float]:
        """Times in ``(0, t_end)`` where the envelope switches."""
        if self.kind == "continuous":
            return []
        pts = {t for w in self.windows() for t in w if 0.0 < t < t_end}
        return sorted(pts)


def drive_amplitude(s: DriveSchedule, t: float) -> float:
    if s.kind == "continuous":
        return s.amp
    eps = 1e-9 * s.period
    for lo, hi in s.windows():
        if lo - eps <= t <= hi + eps:
            return s.amp
    return 0.0


class DividerOperators(NamedTuple):
    sm1: Operator
    sm2: Operator
    a: Operator
    b: Operator
    c: Operator
    sz1: Operator
    sz2: Operator
    n_a: Operator
    n_b: Operator
    n_c: Operator
    p1: Operator
    p2: Operator


@lru_cache(maxsize=32)
def divider_operators(space: HilbertSpace) -> DividerOperators:
    """Embedded ladder, number and Pauli-Z operators for ``space``."""
    if len(space.dims) != 5 or space.dims[Q1] != 2 or space.dims[Q2] != 2:
        raise InvalidParamsError(f"not a divider space: {space.dims}")
    lowers = [embed(space, i, local_annihilator(d)) for i, d in enumerate(space.dims)]
    sm1, sm2, a, b, c = lowers
    n = [op.dag() @ op for op in lowers]
    sz = [2.0 * n[i] - embed(space, i, np.eye(2)) for i in (Q1, Q2)]
    return DividerOperators(sm1, sm2, a, b, c, sz[0], sz[1], n[2], n[3], n[4], n[0], n[1])


def _interaction(p: DividerParams, ops: DividerOperators) -> Operator:
    sm1, sm2, a, b, c = ops.sm1, ops.sm2, ops.a, ops.b, ops.c
    three_body = p.g3 * (sm1 @ sm2 @ a.dag() + a @ sm1.dag() @ sm2.dag())
    exchange = p.lambda1 * (b @ sm1.dag()) + p.lambda2 * (c @ sm2.dag())
    return three_body + exchange + exchange.dag() + p.g_e * (ops.sz1 @ ops.sz2)


def rotating_hamiltonian_parts(p: DividerParams) -> tuple[Operator, Operator]:
    """``(H_static, H_drive)`` with ``H_r = H_static + amp * H_drive``."""
    ops = divider_operators(p.space)
    dq1, dq2 = p.delta_qa
    static = (p.delta_ba * ops.n_b + p.delta_ca * ops.n_c
              + 0.5 * dq1 * ops.sz1 + 0.5 * dq2 * ops.sz2 + _interaction(p, ops))
    return static, ops.a + ops.a.dag()


def build_rotating_hamiltonian(p: DividerParams, amp: float | None = None) -> Operator:
    """Time-independent rotating-frame Hamiltonian for a constant drive ``amp``."""
    amp = p.drive_amp if amp is None else amp
    static, drive = rotating_hamiltonian_parts(p)
    return static + amp * drive


def lab_hamiltonian_parts(p: DividerParams) -> tuple[Operator, Operator, Operator]:
    """``(H_static, a, a^dag)``; the lab drive is ``Omega(t)[a e^{i w_a t} + a^dag e^{-i w_a t}]``."""
    ops = divider_operators(p.space)
    static = (p.omega_a * ops.n_a + p.omega_b * ops.n_b + p.omega_c * ops.n_c
              + 0.5 * p.omega_q1 * ops.sz1 + 0.5 * p.omega_q2 * ops.sz2 + _interaction(p, ops))
    return static, ops.a, ops.a.dag()


def build_lab_hamiltonian(p: DividerParams, t: float, amp: float | None = None) -> Operator:
    amp = p.drive_amp if amp is None else amp
    static, a, adag = lab_hamiltonian_parts(p)
    phase = np.exp(1j * p.omega_a * t)
    return static + (amp * phase) * a + (amp * np.conj(phase)) * adag


def frame_generator(p: DividerParams) -> Operator:
    """``N = a^dag a + (b^dag b + c^dag c)/2 + (sz1 + sz2)/4``."""
    ops = divider_operators(p.space)
    return ops.n_a + 0.5 * (ops.n_b + ops.n_c) + 0.25 * (ops.sz1 + ops.sz2)


def frame_unitary(p: DividerParams, t: float) -> Operator:
    """Diagonal ``U(t) = exp(-i w_a t N)``.

    With this sign ``U^dag a^dag U = a^dag e^{i w_a t}`` and
    ``U^dag H_lab U - i U^dag dU/dt = H_r``.
    """
    n = frame_generator(p).data.diagonal().real
    return Operator(p.space, sp.diags(np.exp(-1j * p.omega_a * t * n), format="csr"))


def to_rotating_frame(p: DividerParams, h_lab: Operator, t: float) -> Operator:
    """Apply ``U^dag H U - i U^dag dU/dt`` with ``dU/dt = -i w_a N U``."""
    u = frame_unitary(p, t)
    return u.dag() @ h_lab @ u - p.omega_a * frame_generator(p)


@dataclass(frozen=True, eq=False)
class LindbladTerm:
    """Dissipator ``rate * (L rho L^dag - {L^dag L, rho}/2)``; ``jump`` is not pre-scaled."""

    jump: Operator
    rate: float
    name: str = field(default="")

    def __post_init__(self):
        if self.rate < 0:
            raise InvalidParamsError(f"negative damping rate {self.rate} for {self.name or 'jump'}")


def build_collapse_terms(p: DividerParams) -> list[LindbladTerm]:
    ops = divider_operators(p.space)
    return [
        LindbladTerm(ops.a, p.gamma_a, "a"),
        LindbladTerm(ops.b, p.gamma_b, "b"),
        LindbladTerm(ops.c, p.gamma_c, "c"),
        LindbladTerm(ops.sm1, p.kappa1, "sigma1"),
        LindbladTerm(ops.sm2, p.kappa2, "sigma2"),
    ]
