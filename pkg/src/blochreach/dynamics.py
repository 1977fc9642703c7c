"""Time propagation: closed-form linear flow and fixed-step RK4 for the mean-field model.

The RK4 core works on batches. A batch is a complex array of shape
``(n_runs, n_components)`` where consecutive pairs of components are
(excited, ground) amplitudes of one state; the controlled system carries
two states per run. All runs in a batch share the time grid and therefore
the exact same step sequence, which keeps sweep results independent of how
runs are grouped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .qcore import (
    BlochVector,
    HamiltonianParams,
    QubitState,
    _check_state,
    bloch_arrays,
)

DEGENERATE_OMEGA = 1e-300
# Relative slack when deciding whether a time span is an integer number of steps.
_STEP_SLACK = 1e-9

Rhs = Callable[[np.ndarray], np.ndarray]


class IntegrationError(RuntimeError):
    """The integrator produced an unusable state."""


class NormDriftError(IntegrationError):
    """Norm drifted past the configured tolerance (dt too large for the dynamics)."""


class NonFiniteStateError(IntegrationError):
    """A NaN or infinity appeared in the state."""


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    renormalize_every_step: bool = True
    norm_drift_tolerance: float = 1e-6

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if not (self.norm_drift_tolerance > 0):
            raise ValueError("norm_drift_tolerance must be positive")


@dataclass(frozen=True)
class Sample:
    t: float
    state: QubitState
    bloch: BlochVector


@dataclass
class Trajectory:
    samples: List[Sample] = field(default_factory=list)
    max_norm_drift: float = 0.0

    def __len__(self):
        return len(self.samples)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    @property
    def bloch(self) -> np.ndarray:
        """``(n, 3)`` array of Bloch vectors."""
        return np.array([s.bloch.as_tuple() for s in self.samples])

    @property
    def amplitudes(self) -> np.ndarray:
        """``(n, 2)`` complex array of (a, b)."""
        return np.array([[s.state.a, s.state.b] for s in self.samples])

    @classmethod
    def from_arrays(cls, times: Sequence[float], amps: np.ndarray, max_norm_drift: float = 0.0) -> "Trajectory":
        amps = np.asarray(amps)
        px, py, pz = bloch_arrays(amps[:, 0], amps[:, 1])
        samples = [
            Sample(float(t), QubitState(complex(a), complex(b)), BlochVector(float(x), float(y), float(z)))
            for t, a, b, x, y, z in zip(times, amps[:, 0], amps[:, 1], px, py, pz)
        ]
        return cls(samples, max_norm_drift)


# -- linear closed form -----------------------------------------------------------


def linear_propagator_arrays(R, v, t):
    """Entries (u00, u01, u10, u11) of exp(-i H t) for H = R/2 sz + v/2 sx.

    Broadcasts over ``R``, ``v`` and ``t``. Uses
    U = cos(w t) I - i sin(w t) (R sz + v sx) / sqrt(R^2 + v^2),  w = sqrt(R^2 + v^2) / 2.
    """
    R = np.asarray(R, dtype=float)
    v = np.asarray(v, dtype=float)
    t = np.asarray(t, dtype=float)
    norm = np.sqrt(R * R + v * v)
    degenerate = norm < DEGENERATE_OMEGA
    safe = np.where(degenerate, 1.0, norm)
    nz = np.where(degenerate, 0.0, R / safe)
    nx = np.where(degenerate, 0.0, v / safe)
    angle = 0.5 * norm * t
    c = np.cos(angle)
    s = np.sin(angle)
    u00 = c - 1j * s * nz
    u11 = c + 1j * s * nz
    u01 = -1j * s * nx
    return u00, u01, u01, u11


def propagate_linear(params: HamiltonianParams, s0: QubitState, t: float) -> QubitState:
    """Exact evolution of ``s0`` under the linear Hamiltonian for time ``t >= 0``."""
    _check_state(s0)
    if t < 0:
        raise ValueError("t must be non-negative; negate R and v to run backwards")
    u00, u01, u10, u11 = (complex(x) for x in linear_propagator_arrays(params.R, params.v, t))
    return QubitState(u00 * s0.a + u01 * s0.b, u10 * s0.a + u11 * s0.b)


# -- nonlinear RK4 ----------------------------------------------------------------


def nonlinear_rhs_arrays(R, v, C, a, b):
    """-i H_nl(psi) psi with <sigma_z> taken from the (possibly unnormalized) stage vector."""
    m = (a.real * a.real + a.imag * a.imag) - (b.real * b.real + b.imag * b.imag)
    z = 0.5 * (R - C * m)
    x = 0.5 * v
    da = -1j * (z * a + x * b)
    db = -1j * (x * a - z * b)
    return da, db


def nonlinear_rhs(params: HamiltonianParams, s) -> np.ndarray:
    """Time derivative of the state under the mean-field Hamiltonian.

    ``s`` may be a :class:`QubitState` or any length-2 complex vector; it is
    not normalized first.
    """
    vec = s.to_array() if isinstance(s, QubitState) else np.asarray(s, dtype=complex).reshape(2)
    da, db = nonlinear_rhs_arrays(params.R, params.v, params.C, vec[0:1], vec[1:2])
    return np.array([da[0], db[0]])


def nonlinear_batch_rhs(R, v, C) -> Rhs:
    """RHS over a ``(n, 2)`` batch with per-run parameter arrays."""
    R = np.asarray(R, dtype=float)
    v = np.asarray(v, dtype=float)
    C = np.asarray(C, dtype=float)

    def rhs(y):
        da, db = nonlinear_rhs_arrays(R, v, C, y[:, 0], y[:, 1])
        return np.stack([da, db], axis=1)

    return rhs


def _pair_norms(y: np.ndarray) -> np.ndarray:
    n, k = y.shape
    sq = y.real * y.real + y.imag * y.imag
    return np.sqrt(sq.reshape(n, k // 2, 2).sum(axis=2))


def _rk4_step(rhs: Rhs, y: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(y)
    k2 = rhs(y + (0.5 * h) * k1)
    k3 = rhs(y + (0.5 * h) * k2)
    k4 = rhs(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_sizes(span: float, dt: float) -> List[float]:
    """Steps of ``dt`` covering ``span`` with the last one shortened to land exactly."""
    if span <= 0:
        return []
    n = max(1, math.ceil(span / dt - _STEP_SLACK))
    last = span - (n - 1) * dt
    return [dt] * (n - 1) + [last]


def check_time_grid(t_grid: Sequence[float]) -> np.ndarray:
    grid = np.asarray(t_grid, dtype=float).ravel()
    if grid.size == 0:
        raise ValueError("time grid is empty")
    if not np.all(np.isfinite(grid)):
        raise ValueError("time grid contains non-finite values")
    if grid[0] < 0:
        raise ValueError("time grid must start at t >= 0")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("time grid must be strictly increasing")
    return grid


def integrate_batch(
    rhs: Rhs,
    y0: np.ndarray,
    t_grid: Sequence[float],
    cfg: IntegratorConfig,
    on_step: Optional[Callable[[np.ndarray, np.ndarray, float], None]] = None,
) -> Tuple[np.ndarray, float]:
    """Integrate a batch from t=0 and return its states on ``t_grid``.

    Returns ``(samples, max_norm_drift)`` where ``samples`` has shape
    ``(len(t_grid), n_runs, n_components)`` and ``max_norm_drift`` is the
    largest |norm - 1| seen after any step (before renormalization).
    ``on_step(y_before, y_after, h)`` is called after every step.
    """
    grid = check_time_grid(t_grid)
    y = np.array(y0, dtype=complex, copy=True)
    if y.ndim != 2 or y.shape[1] % 2:
        raise ValueError("batch must have shape (n_runs, 2 * n_states)")
    out = np.empty((grid.size,) + y.shape, dtype=complex)
    t_now = 0.0
    drift = 0.0
    for k, t_target in enumerate(grid):
        for h in step_sizes(t_target - t_now, cfg.dt):
            with np.errstate(over="ignore", invalid="ignore"):
                y_new = _rk4_step(rhs, y, h)
                norms = _pair_norms(y_new)
            if not np.all(np.isfinite(norms)):
                raise NonFiniteStateError(f"non-finite state near t={t_now + h:.6g}")
            dev = float(np.max(np.abs(norms - 1.0)))
            drift = max(drift, dev)
            if cfg.renormalize_every_step:
                n, kk = y_new.shape
                y_new = (y_new.reshape(n, kk // 2, 2) / norms[:, :, None]).reshape(n, kk)
            elif dev > cfg.norm_drift_tolerance:
                raise NormDriftError(
                    f"norm drift {dev:.3e} exceeds tolerance {cfg.norm_drift_tolerance:.3e} "
                    f"near t={t_now + h:.6g}; reduce dt"
                )
            if on_step is not None:
                on_step(y, y_new, h)
            y = y_new
            t_now += h
        t_now = float(t_target)
        out[k] = y
    return out, drift


def propagate_nonlinear(
    params: HamiltonianParams,
    s0: QubitState,
    t_final: float,
    cfg: IntegratorConfig = IntegratorConfig(),
) -> QubitState:
    """RK4 evolution of ``s0`` under the mean-field Hamiltonian up to ``t_final``."""
    _check_state(s0)
    if t_final < 0:
        raise ValueError("t_final must be non-negative")
    if t_final == 0:
        return s0
    rhs = nonlinear_batch_rhs(params.R, params.v, params.C)
    samples, _ = integrate_batch(rhs, s0.to_array()[None, :], [t_final], cfg)
    a, b = samples[-1, 0]
    return QubitState(complex(a), complex(b))


def sample_trajectory(
    params: HamiltonianParams,
    s0: QubitState,
    t_grid: Sequence[float],
    cfg: IntegratorConfig = IntegratorConfig(),
) -> Trajectory:
    """Single integration through ``t_grid`` recording the state at each grid time."""
    _check_state(s0)
    rhs = nonlinear_batch_rhs(params.R, params.v, params.C)
    grid = check_time_grid(t_grid)
    samples, drift = integrate_batch(rhs, s0.to_array()[None, :], grid, cfg)
    return Trajectory.from_arrays(grid, samples[:, 0, :], drift)


def sample_linear_trajectory(params: HamiltonianParams, s0: QubitState, t_grid: Sequence[float]) -> Trajectory:
    """Closed-form counterpart of :func:`sample_trajectory` (``C`` ignored)."""
    _check_state(s0)
    grid = check_time_grid(t_grid)
    u00, u01, u10, u11 = linear_propagator_arrays(params.R, params.v, grid)
    amps = np.stack([u00 * s0.a + u01 * s0.b, u10 * s0.a + u11 * s0.b], axis=1)
    return Trajectory.from_arrays(grid, amps)
