"""Density-matrix time evolution, observable recording and steady states."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse import csgraph

from ._kernels import lindblad_diag_rhs
from .algebra import DensityMatrix, Operator, SpaceMismatchError
from .model import (
    DividerParams, DriveSchedule, LindbladTerm, build_collapse_terms, build_rotating_hamiltonian,
    divider_operators, drive_amplitude, lab_hamiltonian_parts, rotating_hamiltonian_parts,
)

OBSERVABLES = ("n_a", "n_b", "n_c", "P_1", "P_2", "trace", "purity")
METHODS = ("rk4", "rk45", "expm")
EXPM_MAX_DIM = 128
DENSE_EXPM_MAX_DIM = 64


class IntegrationDivergedError(RuntimeError):
    pass


class PositivityViolationError(RuntimeError):
    pass


class DegenerateSteadyStateError(RuntimeError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk4"
    dt: float = 1e-10
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    sample_interval: float = 1e-9
    trace_tol: float = 1e-5
    positivity_tol: float = 1e-6
    # record min eigenvalue and pre-symmetrisation Hermiticity error per sample
    diagnostics: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown integration method {self.method!r}; choose from {METHODS}")
        for name in ("dt", "abs_tol", "rel_tol", "sample_interval", "trace_tol", "positivity_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class TimeSeries:
    """Observables sampled on a strictly increasing time grid (seconds)."""

    times: np.ndarray
    records: dict[str, np.ndarray]
    diagnostics: dict[str, np.ndarray] = field(default_factory=dict)
    final_state: DensityMatrix | None = None

    def __getitem__(self, name: str) -> np.ndarray:
        return self.records[name]

    def __len__(self):
        return len(self.times)

    @classmethod
    def empty(cls) -> "TimeSeries":
        return cls(np.zeros(0), {k: np.zeros(0) for k in OBSERVABLES})

    def window(self, t_start: float) -> "TimeSeries":
        mask = self.times >= t_start
        return TimeSeries(self.times[mask], {k: v[mask] for k, v in self.records.items()})


@dataclass(frozen=True)
class SteadyEstimate:
    n_a: float
    n_b: float
    n_c: float
    P_1: float
    P_2: float
    converged: bool
    spread: float

    def as_dict(self) -> dict:
        return {"n_a": self.n_a, "n_b": self.n_b, "n_c": self.n_c, "P_1": self.P_1, "P_2": self.P_2}


def lindblad_rhs(rho: DensityMatrix, H: Operator, terms: Sequence[LindbladTerm]) -> np.ndarray:
    """Reference generator ``-i[H, rho] + sum rate (L rho L^dag - {L^dag L, rho}/2)``.

    Plain sparse arithmetic; the integrators use a compiled equivalent.
    """
    if rho.space != H.space:
        raise SpaceMismatchError("rho and H act on different spaces")
    r = rho.data
    out = -1j * (np.asarray(H.data @ r) - np.asarray(r @ H.data))
    for term in terms:
        if term.jump.space != rho.space:
            raise SpaceMismatchError("jump operator acts on a different space")
        if term.rate == 0:
            continue
        L = term.jump.data
        Ld = L.conj().T
        ldl = Ld @ L
        out += term.rate * (np.asarray(L @ r @ Ld) - 0.5 * np.asarray(ldl @ r) - 0.5 * np.asarray(r @ ldl))
    return out


def liouvillian(H: Operator, terms: Sequence[LindbladTerm]) -> sp.csr_matrix:
    """Sparse superoperator acting on row-major ``vec(rho)``: ``vec(A rho B) = (A kron B^T) vec(rho)``."""
    n = H.space.dim
    eye = sp.identity(n, dtype=complex, format="csr")
    h = H.data if sp.issparse(H.data) else sp.csr_matrix(H.data)
    out = -1j * (sp.kron(h, eye) - sp.kron(eye, h.T))
    for term in terms:
        if term.rate == 0:
            continue
        L = sp.csr_matrix(term.jump.data)
        ldl = L.conj().T @ L
        out = out + term.rate * (sp.kron(L, L.conj()) - 0.5 * sp.kron(ldl, eye) - 0.5 * sp.kron(eye, ldl.T))
    return sp.csr_matrix(out)


def _to_diagonals(mats: Sequence[sp.spmatrix], n: int):
    coos = [sp.coo_matrix(m) for m in mats]
    offsets = sorted({int(k) for m in coos for k in (m.col - m.row)})
    index = {k: i for i, k in enumerate(offsets)}
    out = []
    for m in coos:
        vals = np.zeros((max(len(offsets), 1), n), dtype=complex)
        for r, c, v in zip(m.row, m.col, m.data):
            vals[index[int(c - r)], r] += v
        out.append(vals)
    offs = np.array(offsets if offsets else [0], dtype=np.int64)
    return offs, out


class _DiagonalGenerator:
    """Master-equation generator ``H(coeffs) = H_static + sum_k coeffs[k] H_k`` in diagonal storage."""

    def __init__(self, h_static: Operator, drives: Sequence[Operator], terms: Sequence[LindbladTerm]):
        n = h_static.space.dim
        anti = sp.csr_matrix((n, n), dtype=complex)
        for t in terms:
            if t.rate:
                L = sp.csr_matrix(t.jump.data)
                anti = anti + t.rate * (L.conj().T @ L)
        heff = sp.csr_matrix(h_static.data) - 0.5j * anti
        self.offs, vals = _to_diagonals([heff] + [sp.csr_matrix(d.data) for d in drives], n)
        self.static, self.drives = vals[0], vals[1:]
        joffs, jvals, jgroup, jrate = [], [], [], []
        for g, t in enumerate(terms):
            if not t.rate:
                continue
            o, (v,) = _to_diagonals([sp.csr_matrix(t.jump.data)], n)
            joffs.extend(o.tolist())
            jvals.extend(list(v))
            jgroup.extend([g] * len(o))
            jrate.extend([t.rate] * len(o))
        self.joffs = np.array(joffs, dtype=np.int64)
        self.jvals = np.array(jvals, dtype=complex).reshape(len(joffs), n)
        self.jgroup = np.array(jgroup, dtype=np.int64)
        self.jrate = np.array(jrate, dtype=complex)

    def values(self, coeffs: Sequence[complex] = ()) -> np.ndarray:
        v = self.static.copy()
        for c, d in zip(coeffs, self.drives):
            if c != 0:
                v += c * d
        return v

    def __call__(self, rho: np.ndarray, vals: np.ndarray) -> np.ndarray:
        out = np.empty_like(rho)
        return lindblad_diag_rhs(rho, self.offs, vals, self.joffs, self.jvals, self.jgroup, self.jrate, out)


# Dormand-Prince 5(4) tableau
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_E = (35 / 384 - 5179 / 57600, 0.0, 500 / 1113 - 7571 / 16695, 125 / 192 - 393 / 640,
         -2187 / 6784 + 92097 / 339200, 11 / 84 - 187 / 2100, -1 / 40)


def _hermitize(y: np.ndarray) -> np.ndarray:
    return 0.5 * (y + y.conj().T)


class _Evolution:
    """Stateful propagator: advances rho and records samples at multiples of ``sample_interval``.

    Within each interval between samples and drive switch points the envelope
    is constant, and steps never straddle such a point.
    """

    def __init__(self, rho0: DensityMatrix, p: DividerParams, schedule: DriveSchedule,
                 cfg: IntegratorConfig, frame: str = "rotating"):
        if rho0.space != p.space:
            raise SpaceMismatchError(f"initial state space {rho0.space.dims} != model space {p.space.dims}")
        self.p, self.schedule, self.cfg, self.frame = p, schedule, cfg, frame
        self.space = p.space
        self.terms = build_collapse_terms(p)
        ops = divider_operators(self.space)
        self._obs_diag = np.array([op.data.diagonal().real for op in (ops.n_a, ops.n_b, ops.n_c, ops.p1, ops.p2)])
        if frame == "rotating":
            static, drive = rotating_hamiltonian_parts(p)
            self._gen = _DiagonalGenerator(static, [drive], self.terms)
            self._phase = None
        elif frame == "lab":
            if cfg.method == "expm":
                raise ValueError("the lab-frame Hamiltonian is time dependent; expm is not available")
            static, a, adag = lab_hamiltonian_parts(p)
            diag = static.data.diagonal().real
            off = Operator(self.space, static.data - sp.diags(diag, format="csr"))
            self._gen = _DiagonalGenerator(off, [a, adag], self.terms)
            self._phase = diag
        else:
            raise ValueError(f"unknown frame {frame!r}")
        if cfg.method == "expm" and self.space.dim > EXPM_MAX_DIM:
            raise ValueError(f"expm propagation needs total dimension <= {EXPM_MAX_DIM}, got {self.space.dim}")
        self._propagators: dict = {}
        self.t = 0.0
        self.y = rho0.data.astype(complex, copy=True)
        self._h = cfg.dt
        self._herm = 0.0
        self._k = 0
        self._rows: list[tuple] = []
        self._diag: list[tuple] = []
        self._record()
        self._k = 1

    # derivative ----------------------------------------------------------
    def _rhs(self, amp: float) -> Callable[[float, np.ndarray], np.ndarray]:
        gen = self._gen
        if self._phase is None:
            vals = gen.values([amp])
            return lambda t, y: gen(y, vals)
        d, w = self._phase, self.p.omega_a

        def f(t, y):
            ph = np.exp(1j * d * t)
            pm = np.outer(ph, ph.conj())
            rho = y * pm.conj()
            e = np.exp(1j * w * t)
            return gen(rho, gen.values([amp * e, amp * np.conj(e)])) * pm
        return f

    # steppers ------------------------------------------------------------
    def _rk4(self, f, a: float, b: float):
        n = max(1, math.ceil((b - a) / self.cfg.dt - 1e-9))
        h = (b - a) / n
        y = self.y
        for i in range(n):
            t = a + i * h
            k1 = f(t, y)
            k2 = f(t + h / 2, y + (h / 2) * k1)
            k3 = f(t + h / 2, y + (h / 2) * k2)
            k4 = f(t + h, y + h * k3)
            y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            if self.cfg.diagnostics and i == n - 1:
                self._herm = float(np.abs(y - y.conj().T).max())
            y = _hermitize(y)
        self.y = y

    def _rk45(self, f, a: float, b: float):
        cfg = self.cfg
        t, y, h = a, self.y, min(self._h, b - a)
        k_first = f(t, y)
        while t < b - 1e-15 * max(1.0, abs(b)):
            h = min(h, b - t)
            ks = [k_first]
            for s in range(1, 7):
                ys = y + h * sum(c * k for c, k in zip(_DP_A[s], ks) if c)
                ks.append(f(t + _DP_C[s] * h, ys))
            y_new = ys  # stage 7 is evaluated at the 5th-order solution
            err = h * sum(e * k for e, k in zip(_DP_E, ks) if e)
            scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            err_norm = float(np.max(np.abs(err) / scale))
            if not math.isfinite(err_norm):
                raise IntegrationDivergedError(f"non-finite state at t = {t:.6g} s")
            if err_norm <= 1.0:
                t = t + h
                if cfg.diagnostics:
                    self._herm = float(np.abs(y_new - y_new.conj().T).max())
                y = _hermitize(y_new)
                k_first = ks[6]
                factor = 5.0 if err_norm == 0 else min(5.0, 0.9 * err_norm ** -0.2)
            else:
                factor = max(0.2, 0.9 * err_norm ** -0.2)
            h_next = h * factor
            if h_next < 1e-22:
                raise IntegrationDivergedError(f"step size underflow at t = {t:.6g} s")
            h = h_next
        self._h = h
        self.y = y

    def _expm(self, amp: float, a: float, b: float):
        span = b - a
        key = (amp, round(span * 1e18))
        prop = self._propagators.get(key)
        n = self.space.dim
        if prop is None:
            lv = liouvillian(build_rotating_hamiltonian(self.p, amp), self.terms)
            if n <= DENSE_EXPM_MAX_DIM:
                mat = la.expm(span * lv.toarray())
                prop = lambda v: mat @ v
            else:
                op = (span * lv).tocsc()
                prop = lambda v: spla.expm_multiply(op, v)
            self._propagators[key] = prop
        self.y = _hermitize(prop(self.y.reshape(-1)).reshape(n, n))

    # driver --------------------------------------------------------------
    def _record(self):
        y, cfg = self.y, self.cfg
        d = y.diagonal().real
        tr = float(d.sum())
        if not np.all(np.isfinite(d)) or abs(tr - 1.0) > cfg.trace_tol:
            raise IntegrationDivergedError(f"trace drifted to {tr!r} at t = {self.t:.6g} s")
        n = y.shape[0]
        try:
            np.linalg.cholesky(y + cfg.positivity_tol * np.eye(n))
        except np.linalg.LinAlgError:
            lam = float(np.linalg.eigvalsh(y)[0])
            raise PositivityViolationError(f"eigenvalue {lam:.3e} below -{cfg.positivity_tol:g} at t = {self.t:.6g} s")
        obs = self._obs_diag @ d
        purity = float(np.vdot(y, y).real)
        self._rows.append((self.t, *obs.tolist(), tr, purity))
        if cfg.diagnostics:
            self._diag.append((float(np.linalg.eigvalsh(y)[0]), self._herm))

    def advance_to(self, t_end: float):
        cfg, s = self.cfg, self.schedule
        dt_s = cfg.sample_interval
        tol = 1e-9 * min(dt_s, cfg.dt)
        if t_end <= self.t + tol:
            return
        events = []
        k = self._k
        while k * dt_s <= t_end + tol:
            events.append((k * dt_s, True))
            k += 1
        events += [(b, False) for b in s.breakpoints(t_end) if b > self.t + tol]
        events.append((t_end, True))
        events.sort()
        merged: list[list] = []
        for t, is_sample in events:
            if merged and t - merged[-1][0] <= tol:
                merged[-1][1] = merged[-1][1] or is_sample
            else:
                merged.append([t, is_sample])
        for t_next, is_sample in merged:
            if t_next <= self.t + tol:
                continue
            amp = drive_amplitude(s, 0.5 * (self.t + t_next))
            if cfg.method == "expm":
                self._expm(amp, self.t, t_next)
            elif cfg.method == "rk4":
                self._rk4(self._rhs(amp), self.t, t_next)
            else:
                self._rk45(self._rhs(amp), self.t, t_next)
            self.t = t_next
            if abs(self.t - self._k * dt_s) <= tol:
                self.t = self._k * dt_s
                self._k += 1
            if is_sample:
                self._record()

    def state(self) -> DensityMatrix:
        y = self.y
        if self._phase is not None:
            ph = np.exp(-1j * self._phase * self.t)
            y = y * np.outer(ph, ph.conj())
        return DensityMatrix(self.space, y)

    def series(self) -> TimeSeries:
        arr = np.array(self._rows, dtype=float).reshape(-1, 1 + len(OBSERVABLES))
        records = {name: arr[:, i + 1] for i, name in enumerate(OBSERVABLES)}
        diag = {}
        if self._diag:
            d = np.array(self._diag)
            diag = {"min_eig": d[:, 0], "herm_err": d[:, 1]}
        return TimeSeries(arr[:, 0], records, diag, self.state())


def integrate(rho0: DensityMatrix | None, p: DividerParams, s: DriveSchedule, t_end: float,
              cfg: IntegratorConfig = IntegratorConfig()) -> TimeSeries:
    """Evolve in the rotating frame from ``rho0`` (ground state if None) up to ``t_end``."""
    rho0 = DensityMatrix.ground(p.space) if rho0 is None else rho0
    ev = _Evolution(rho0, p, s, cfg, "rotating")
    ev.advance_to(t_end)
    return ev.series()


def integrate_lab_frame(rho0: DensityMatrix | None, p: DividerParams, s: DriveSchedule, t_end: float,
                        cfg: IntegratorConfig = IntegratorConfig(), max_dim: int = 256) -> TimeSeries:
    """Evolve under the lab-frame Hamiltonian with its explicit ``exp(+-i w_a t)`` drive.

    The large diagonal part of ``H_lab`` is integrated exactly (integrating
    factor); everything else, including the oscillating drive, goes through
    the Runge-Kutta stepper.  Recorded observables are diagonal, hence
    insensitive to the choice of frame.
    """
    if p.space.dim > max_dim:
        raise ValueError(f"lab-frame integration is limited to dimension {max_dim}, got {p.space.dim}")
    rho0 = DensityMatrix.ground(p.space) if rho0 is None else rho0
    ev = _Evolution(rho0, p, s, cfg, "lab")
    ev.advance_to(t_end)
    return ev.series()


def lab_frame_derivative(rho: DensityMatrix, p: DividerParams, s: DriveSchedule, t: float) -> np.ndarray:
    """``d rho/dt`` in the lab frame as evaluated by the lab-frame integrator at time ``t``."""
    ev = _Evolution(DensityMatrix.ground(p.space), p, s, IntegratorConfig(), "lab")
    d = ev._phase
    ph = np.exp(1j * d * t)
    sigma = rho.data * np.outer(ph, ph.conj())
    dsigma = ev._rhs(drive_amplitude(s, t))(t, sigma)
    # undo the integrating factor: rho = e^{-iDt} sigma e^{iDt}
    back = np.outer(ph.conj(), ph)
    return dsigma * back - 1j * (d[:, None] - d[None, :]) * rho.data


def stability_window(p: DividerParams) -> float:
    """Averaging window for plateau detection: ten lifetimes of the slowest of resonator-b and qubit-1."""
    rates = [r for r in (p.gamma_b, p.kappa1) if r > 0]
    if not rates:
        raise ValueError("stability window undefined without damping")
    return 10.0 / min(rates)


def steady_state_from_trajectory(ts: TimeSeries, window: float, tol: float = 1e-4) -> SteadyEstimate:
    """Average the last ``window`` seconds; converged when every observable's max-min spread is below ``tol``."""
    if len(ts) == 0 or window > ts.times[-1] - ts.times[0] + 1e-15:
        raise ValueError("averaging window is longer than the trajectory")
    tail = ts.times >= ts.times[-1] - window - 1e-15
    means, spread = {}, 0.0
    for name in ("n_a", "n_b", "n_c", "P_1", "P_2"):
        v = ts[name][tail]
        means[name] = float(v.mean())
        spread = max(spread, float(v.max() - v.min()))
    return SteadyEstimate(**means, converged=spread < tol, spread=spread)


def integrate_until_stable(p: DividerParams, s: DriveSchedule | None = None,
                           cfg: IntegratorConfig = IntegratorConfig(), window: float | None = None,
                           tol: float = 1e-4, t_max: float = 20e-6,
                           rho0: DensityMatrix | None = None) -> tuple[TimeSeries, SteadyEstimate]:
    """Run a constant drive until the plateau detector fires or ``t_max`` is reached."""
    s = DriveSchedule.continuous(p.drive_amp) if s is None else s
    window = stability_window(p) if window is None else window
    rho0 = DensityMatrix.ground(p.space) if rho0 is None else rho0
    ev = _Evolution(rho0, p, s, cfg, "rotating")
    chunk = max(cfg.sample_interval, cfg.sample_interval * round(0.25 * window / cfg.sample_interval))
    t = cfg.sample_interval * math.ceil(window / cfg.sample_interval)
    while True:
        ev.advance_to(min(t, t_max))
        ts = ev.series()
        est = steady_state_from_trajectory(ts, window, tol)
        if est.converged or t >= t_max:
            return ts, est
        t += chunk


LU_MAX_UNKNOWNS = 4000


def steady_state_direct(p: DividerParams, amp: float | None = None, max_dim: int = 1024) -> DensityMatrix:
    """Null vector of the vectorised generator, normalised to unit trace.

    The dynamics started from the global ground state only ever touch the
    matrix elements reachable from it in the sparsity graph of the generator,
    so the solve is restricted to those; every other element is exactly zero
    (for instance all of resonator b when it is decoupled).  Within that block one
    population equation is replaced by the trace condition; the linear system
    is solved by sparse LU when small and by LGMRES otherwise.  Repeating the
    solve with the equation of the most populated other level replaced must
    give the same answer, otherwise the null space is degenerate.
    """
    n = p.space.dim
    if n > max_dim:
        raise ValueError(f"direct steady state limited to dimension {max_dim}, got {n}")
    lv = liouvillian(build_rotating_hamiltonian(p, amp), build_collapse_terms(p))
    scale = float(np.abs(lv.data).max())
    # edge j -> i whenever element j feeds d/dt of element i
    keep = np.sort(csgraph.breadth_first_order(abs(lv).T.tocsr(), 0, directed=True, return_predecessors=False))
    block = (lv[keep][:, keep] / scale).tocsr()
    diag_idx = np.arange(n) * (n + 1)
    pos = np.searchsorted(keep, diag_idx[np.isin(diag_idx, keep)])
    trace_row = sp.csr_matrix((np.ones(len(pos), dtype=complex), (np.zeros(len(pos), dtype=int), pos)),
                              shape=(1, len(keep)))

    def solve(row: int) -> np.ndarray:
        m = block.copy()
        m.data[m.indptr[row]:m.indptr[row + 1]] = 0
        m.eliminate_zeros()
        m = (m + sp.csr_matrix(([1.0], ([row], [0])), shape=(len(keep), 1)) @ trace_row).tocsc()
        rhs = np.zeros(len(keep), dtype=complex)
        rhs[row] = 1.0
        if len(keep) <= LU_MAX_UNKNOWNS:
            try:
                x = spla.splu(m).solve(rhs)
            except RuntimeError as exc:
                raise DegenerateSteadyStateError(f"generator has a degenerate null space: {exc}") from exc
        else:
            x, info = spla.lgmres(m, rhs, rtol=1e-13, atol=0.0, maxiter=2000)
            if info != 0:
                raise DegenerateSteadyStateError(f"iterative steady-state solve did not converge (info={info})")
        if not np.all(np.isfinite(x)):
            raise DegenerateSteadyStateError("generator has a degenerate null space")
        return x

    x1 = solve(int(pos[0]))
    pops = np.abs(x1[pos])
    pops[0] = -1.0
    x2 = solve(int(pos[int(np.argmax(pops))]))
    if np.abs(x1 - x2).max() > 1e-7:
        raise DegenerateSteadyStateError("steady state is not unique")
    vec = np.zeros(n * n, dtype=complex)
    vec[keep] = x1
    rho = _hermitize(vec.reshape(n, n))
    rho /= np.trace(rho).real
    residual = float(np.abs(lv @ rho.reshape(-1)).max()) / scale
    if residual > 1e-9:
        raise DegenerateSteadyStateError(f"steady-state residual {residual:.2e} exceeds 1e-9")
    return DensityMatrix(p.space, rho)


def observables(rho: DensityMatrix) -> dict[str, float]:
    ops = divider_operators(rho.space)
    d = rho.data.diagonal().real
    out = {name: float(op.data.diagonal().real @ d)
           for name, op in (("n_a", ops.n_a), ("n_b", ops.n_b), ("n_c", ops.n_c), ("P_1", ops.p1), ("P_2", ops.p2))}
    out["trace"] = float(d.sum())
    out["purity"] = rho.purity()
    return out
