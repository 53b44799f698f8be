"""Independent reference solutions used to validate the integrators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .algebra import DensityMatrix
from .model import DividerParams

EXACT_MAX_DIM = 64


def exact_propagate(rho0: DensityMatrix, generator, t: float, max_dim: int = EXACT_MAX_DIM) -> DensityMatrix:
    """``unvec(expm(t L) vec(rho0))`` for a row-major vectorised generator ``L``.

    ``generator`` is the matrix returned by :func:`freqdiv.dynamics.liouvillian`
    (sparse or dense).
    """
    n = rho0.space.dim
    if n > max_dim:
        raise ValueError(f"exact propagation limited to dimension {max_dim}, got {n}")
    lv = generator.toarray() if sp.issparse(generator) else np.asarray(generator)
    if lv.shape != (n * n, n * n):
        raise ValueError(f"generator shape {lv.shape} does not match state dimension {n}")
    vec = la.expm(t * lv) @ rho0.data.reshape(-1)
    return DensityMatrix(rho0.space, vec.reshape(n, n))


def linear_saturation_reference(gamma_a: float, amp: float, t):
    """Saturation curve ``(amp/gamma_a)(1 - exp(-gamma_a t))``, as quoted for the pump-mode photon number.

    Shipped as a labelled reference only: it is linear in the drive, whereas
    the master equation implemented here gives :func:`decoupled_cavity_exact`.
    """
    if not gamma_a > 0:
        raise ValueError("gamma_a must be positive")
    t = np.asarray(t, dtype=float)
    return (amp / gamma_a) * (1.0 - np.exp(-gamma_a * t))


def decoupled_cavity_exact(p: DividerParams, amp: float | None, t):
    """Photon number of the resonantly driven, damped pump mode with the qubits switched off.

    The field amplitude relaxes at ``gamma_a/2`` towards ``-2i amp/gamma_a``
    and the state stays coherent, so ``n(t) = (4 amp^2/gamma_a^2)(1 - exp(-gamma_a t/2))^2``.
    """
    amp = p.drive_amp if amp is None else amp
    if not p.gamma_a > 0:
        raise ValueError("gamma_a must be positive")
    t = np.asarray(t, dtype=float)
    alpha = (-2j * amp / p.gamma_a) * (1.0 - np.exp(-0.5 * p.gamma_a * t))
    return np.abs(alpha) ** 2


@dataclass(frozen=True)
class AnalyticCavityModel:
    gamma: float
    amp: float
    convention: str = "standard-halved"

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.convention not in ("standard-halved", "linear-saturation"):
            raise ValueError(f"unknown convention {self.convention!r}")

    def photon_number(self, t):
        t = np.asarray(t, dtype=float)
        if self.convention == "linear-saturation":
            return linear_saturation_reference(self.gamma, self.amp, t)
        return (2.0 * self.amp / self.gamma) ** 2 * (1.0 - np.exp(-0.5 * self.gamma * t)) ** 2

    @property
    def steady_value(self) -> float:
        if self.convention == "linear-saturation":
            return self.amp / self.gamma
        return (2.0 * self.amp / self.gamma) ** 2


def validation_suite() -> list[tuple[str, bool, str]]:
    """Quick cross-checks of the integrators against independent references.

    Returns ``(name, passed, detail)`` per check; each runs in seconds.
    """
    from .dynamics import IntegratorConfig, integrate, integrate_lab_frame, liouvillian, observables
    from .model import DriveSchedule, build_collapse_terms, build_rotating_hamiltonian

    results = []
    cfg = IntegratorConfig(method="rk4", dt=1e-10, sample_interval=1e-8)
    names = ("n_a", "n_b", "n_c", "P_1", "P_2")

    p = DividerParams.standard(n_tr=2)
    s = DriveSchedule.continuous(p.drive_amp)
    t_end = 100e-9
    ts = integrate(None, p, s, t_end, cfg)
    gen = liouvillian(build_rotating_hamiltonian(p), build_collapse_terms(p))
    ref = observables(exact_propagate(DensityMatrix.ground(p.space), gen, t_end))
    err = max(abs(ts[k][-1] - ref[k]) for k in names)
    results.append(("rk4 vs exact exponential", bool(err <= 1e-7), f"max deviation {err:.2e}"))

    p = DividerParams.standard(n_tr=2, n_tr_a=12, g3=0.0, lambda1=0.0, lambda2=0.0)
    ts = integrate(None, p, DriveSchedule.continuous(p.drive_amp), 100e-9, cfg)
    err = float(np.abs(ts["n_a"] - decoupled_cavity_exact(p, None, ts.times)).max())
    results.append(("decoupled cavity closed form", bool(err <= 1e-4), f"max deviation {err:.2e}"))

    p = DividerParams.standard(n_tr=3, omega_q_ghz=4.096)
    s = DriveSchedule.continuous(p.drive_amp)
    rot = integrate(None, p, s, 50e-9, cfg)
    lab = integrate_lab_frame(None, p, s, 50e-9, cfg)
    err = max(float(np.abs(rot[k] - lab[k]).max()) for k in names)
    results.append(("rotating vs lab frame", bool(err <= 1e-4), f"max deviation {err:.2e}"))
    return results
