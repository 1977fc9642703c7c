"""Lyapunov tracking control of a qubit towards a freely evolving target.

The distance V = 1 - |<psi_d|psi>|^2 decreases along the controlled flow
when the field is f = kappa Im(<psi_d|H1|psi><psi|psi_d>) and the system is
driven by H0 + f H1, with the *same* H1 in both places. ``SignConvention``
only chooses whether the base operator or its negative plays the role of
H1; the closed loop is identical, only the reported sign of f flips.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .dynamics import IntegratorConfig, Trajectory, check_time_grid, integrate_batch
from .qcore import (
    SIGMA_Z,
    HamiltonianParams,
    Operator2,
    QubitState,
    _check_state,
    linear_hamiltonian,
)


class H1Choice(str, enum.Enum):
    SIGMA_Z_HALF = "sigma_z_half"
    STATE_DEPENDENT_SIGMA_Z = "state_dependent_sigma_z"


class SignConvention(str, enum.Enum):
    PLUS_F = "plus"
    MINUS_F = "minus"

    @property
    def factor(self) -> float:
        return 1.0 if self is SignConvention.PLUS_F else -1.0


@dataclass(frozen=True)
class TargetConfig:
    """Reference trajectory setup.

    ``initial_state=None`` starts the target on the system's initial state.
    ``fixed_hamiltonian=None`` evolves it with the system's own (R, v);
    otherwise with the given ``(R0, v0)``. ``perturbation_angle`` rotates the
    target's initial state about the Bloch y axis before the run.
    """

    initial_state: Optional[QubitState] = None
    fixed_hamiltonian: Optional[Tuple[float, float]] = None
    perturbation_angle: float = 0.0

    def __post_init__(self):
        if self.perturbation_angle < 0 or not math.isfinite(self.perturbation_angle):
            raise ValueError("perturbation_angle must be finite and >= 0")
        if self.initial_state is not None:
            _check_state(self.initial_state)

    def resolve_initial(self, s0: QubitState) -> QubitState:
        base = s0 if self.initial_state is None else self.initial_state
        return rotate_about_y(base, self.perturbation_angle)

    def resolve_hamiltonian(self, params: HamiltonianParams) -> Tuple[float, float]:
        if self.fixed_hamiltonian is None:
            return float(params.R), float(params.v)
        r0, v0 = self.fixed_hamiltonian
        return float(r0), float(v0)


@dataclass(frozen=True)
class ControlLawConfig:
    kappa: float = 0.0
    h1_choice: H1Choice = H1Choice.STATE_DEPENDENT_SIGMA_Z
    sign_convention: SignConvention = SignConvention.MINUS_F
    target: TargetConfig = field(default_factory=TargetConfig)

    def __post_init__(self):
        if not math.isfinite(self.kappa) or self.kappa < 0:
            raise ValueError(f"kappa must be finite and >= 0, got {self.kappa!r}")
        object.__setattr__(self, "h1_choice", H1Choice(self.h1_choice))
        object.__setattr__(self, "sign_convention", SignConvention(self.sign_convention))


@dataclass
class ControlledRun:
    trajectory: Trajectory
    target_trajectory: Trajectory
    f_series: List[Tuple[float, float]]
    v_series: List[Tuple[float, float]]
    # largest per-step increase of V divided by the step length
    max_v_increase_rate: float = 0.0

    @property
    def f(self) -> np.ndarray:
        return np.array([f for _, f in self.f_series])

    @property
    def V(self) -> np.ndarray:
        return np.array([v for _, v in self.v_series])


def rotate_about_y(s: QubitState, angle: float) -> QubitState:
    """exp(-i angle sigma_y / 2) applied to ``s``."""
    if angle == 0.0:
        return s
    c, sn = math.cos(angle / 2), math.sin(angle / 2)
    return QubitState.normalized(c * s.a - sn * s.b, sn * s.a + c * s.b)


def distance_v(psi_d: QubitState, psi: QubitState) -> float:
    """1 - |<psi_d|psi>|^2, clipped into [0, 1]."""
    _check_state(psi_d)
    _check_state(psi)
    return min(1.0, max(0.0, 1.0 - abs(psi_d.overlap(psi)) ** 2))


def control_operator(psi: QubitState, cfg: ControlLawConfig) -> Operator2:
    """The signed H1 used both in the law and in the driven Hamiltonian."""
    if cfg.h1_choice is H1Choice.SIGMA_Z_HALF:
        scale = 0.5
    else:
        scale = 0.5 * (abs(psi.a) ** 2 - abs(psi.b) ** 2)
    return Operator2(cfg.sign_convention.factor * scale * SIGMA_Z)


def control_f_general(psi_d: QubitState, psi: QubitState, cfg: ControlLawConfig) -> float:
    """kappa Im(<psi_d|H1|psi><psi|psi_d>) by direct matrix algebra."""
    _check_state(psi_d)
    _check_state(psi)
    h1 = control_operator(psi, cfg).matrix
    vd, v = psi_d.to_array(), psi.to_array()
    return cfg.kappa * (np.vdot(vd, h1 @ v) * np.vdot(v, vd)).imag


def control_f_closed(a: complex, b: complex, c: complex, d: complex, kappa: float) -> float:
    """Closed-form field for the state-dependent sigma_z control operator.

    -kappa m Im[(a c* + b d*)(a* c - b* d)] with m = |a|^2 - |b|^2, where
    (a, b) is the system state and (c, d) the target.
    """
    m = abs(a) ** 2 - abs(b) ** 2
    bracket = (a * c.conjugate() + b * d.conjugate()) * (a.conjugate() * c - b.conjugate() * d)
    return -kappa * m * bracket.imag


def assemble_controlled_hamiltonian(
    params: HamiltonianParams, psi: QubitState, f: float, cfg: ControlLawConfig
) -> Operator2:
    """H0 + f H1 with H0 the linear Hamiltonian and H1 the signed control operator."""
    h0 = linear_hamiltonian(params).matrix
    return Operator2(h0 + f * control_operator(psi, cfg).matrix)


def controlled_batch_rhs(R, v, R0, v0, cfg: ControlLawConfig):
    """RHS for a ``(n, 4)`` batch of (a, b, c, d); f re-evaluated at every call."""
    R = np.asarray(R, dtype=float)
    v = np.asarray(v, dtype=float)
    R0 = np.asarray(R0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    kappa = float(cfg.kappa)
    sign = cfg.sign_convention.factor
    state_dependent = cfg.h1_choice is H1Choice.STATE_DEPENDENT_SIGMA_Z

    def rhs(y):
        a, b, c, d = y[:, 0], y[:, 1], y[:, 2], y[:, 3]
        h, f = _signed_scale_and_field(a, b, c, d, kappa, sign, state_dependent)
        z = 0.5 * R + f * h
        x = 0.5 * v
        zd = 0.5 * R0
        xd = 0.5 * v0
        return np.stack(
            [
                -1j * (z * a + x * b),
                -1j * (x * a - z * b),
                -1j * (zd * c + xd * d),
                -1j * (xd * c - zd * d),
            ],
            axis=1,
        )

    return rhs


def _signed_scale_and_field(a, b, c, d, kappa, sign, state_dependent):
    # H1 = h sigma_z; <psi_d|H1|psi> = h (c* a - d* b), <psi|psi_d> = a* c + b* d
    if state_dependent:
        h = sign * 0.5 * ((a.real * a.real + a.imag * a.imag) - (b.real * b.real + b.imag * b.imag))
    else:
        h = sign * 0.5 * np.ones_like(a.real)
    prod = (c.conj() * a - d.conj() * b) * (a.conj() * c + b.conj() * d)
    return h, kappa * h * prod.imag


def field_and_distance_arrays(y: np.ndarray, cfg: ControlLawConfig) -> Tuple[np.ndarray, np.ndarray]:
    """f and V over a ``(..., 4)`` array of (a, b, c, d)."""
    a, b, c, d = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
    _, f = _signed_scale_and_field(
        a, b, c, d, float(cfg.kappa), cfg.sign_convention.factor,
        cfg.h1_choice is H1Choice.STATE_DEPENDENT_SIGMA_Z,
    )
    ov = c.conj() * a + d.conj() * b
    V = np.clip(1.0 - (ov.real * ov.real + ov.imag * ov.imag), 0.0, 1.0)
    return f, V


def _distance_unclipped(y: np.ndarray) -> np.ndarray:
    ov = y[:, 2].conj() * y[:, 0] + y[:, 3].conj() * y[:, 1]
    return 1.0 - (ov.real * ov.real + ov.imag * ov.imag)


def integrate_controlled_batch(
    R,
    v,
    s0: QubitState,
    cfg: ControlLawConfig,
    t_grid: Sequence[float],
    icfg: IntegratorConfig = IntegratorConfig(),
) -> Tuple[np.ndarray, np.ndarray, float]:
    """Controlled runs for arrays of (R, v) sharing ``s0`` and ``cfg``.

    Returns ``(samples, v_increase_rates, max_norm_drift)``: samples of shape
    ``(n_t, n_runs, 4)`` holding (a, b, c, d), and for every run the largest
    per-step increase of V divided by the step length.
    """
    _check_state(s0)
    if cfg.kappa < 0:
        raise ValueError("kappa must be >= 0")
    R = np.atleast_1d(np.asarray(R, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    target0 = cfg.target.resolve_initial(s0)
    if cfg.target.fixed_hamiltonian is None:
        R0, v0 = R, v
    else:
        R0 = np.full_like(R, cfg.target.fixed_hamiltonian[0])
        v0 = np.full_like(v, cfg.target.fixed_hamiltonian[1])
    rhs = controlled_batch_rhs(R, v, R0, v0, cfg)
    y0 = np.tile(np.array([s0.a, s0.b, target0.a, target0.b], dtype=complex), (len(R), 1))
    rates = np.zeros(len(R))

    def watch(y_old, y_new, h):
        np.maximum(rates, (_distance_unclipped(y_new) - _distance_unclipped(y_old)) / h, out=rates)

    samples, drift = integrate_batch(rhs, y0, t_grid, icfg, on_step=watch)
    return samples, rates, drift


def run_controlled(
    params: HamiltonianParams,
    s0: QubitState,
    cfg: ControlLawConfig,
    t_grid: Sequence[float],
    icfg: IntegratorConfig = IntegratorConfig(),
) -> ControlledRun:
    """Integrate system and target together with one RK4 scheme.

    ``params.C`` is not used: the feedback term replaces the fixed
    nonlinearity. The per-step growth of V (``max_v_increase_rate``) is
    tracked so callers can check monotonicity at step resolution.
    """
    grid = check_time_grid(t_grid)
    samples, rates, drift = integrate_controlled_batch(params.R, params.v, s0, cfg, grid, icfg)
    run = samples[:, 0, :]
    f, V = field_and_distance_arrays(run, cfg)
    return ControlledRun(
        trajectory=Trajectory.from_arrays(grid, run[:, 0:2], drift),
        target_trajectory=Trajectory.from_arrays(grid, run[:, 2:4], drift),
        f_series=[(float(t), float(x)) for t, x in zip(grid, f)],
        v_series=[(float(t), float(x)) for t, x in zip(grid, V)],
        max_v_increase_rate=float(max(rates[0], 0.0)),
    )
