"""Reachable-set sweeps over (R, v) grids and equal-area coverage statistics."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .dynamics import (
    IntegrationError,
    IntegratorConfig,
    integrate_batch,
    linear_propagator_arrays,
    nonlinear_batch_rhs,
)
from .lyapunov import ControlLawConfig, integrate_controlled_batch
from .qcore import (
    ACCEPT_NORM_TOL,
    BlochVector,
    NormalizationError,
    QubitState,
    TransformParams,
    _check_state,
    bloch_arrays,
    transformed_initial_state,
)

log = logging.getLogger(__name__)

MODES = ("linear", "nonlinear", "controlled")
DEFAULT_CHUNK_SIZE = 1024


class SweepError(RuntimeError):
    """Integration failed at a grid node; carries its coordinates."""

    def __init__(self, R: float, v: float, cause: Exception):
        super().__init__(f"integration failed at R={R!r}, v={v!r}: {cause}")
        self.R = R
        self.v = v
        self.cause = cause


@dataclass(frozen=True)
class SweepConfig:
    """Everything that determines a sweep's point cloud.

    ``r_range``/``v_range`` are ``(min, max, count)`` handed to linspace;
    ``t_window = (t_max, n)`` samples at ``t_max * k / n`` for k = 1..n.
    ``initial`` is either explicit or selected by frame angles, in which case
    the run starts from F(theta, phi)|e>.
    """

    mode: str = "linear"
    C: float = 0.0
    control: ControlLawConfig = field(default_factory=ControlLawConfig)
    r_range: Tuple[float, float, int] = (0.0, 7.0, 71)
    v_range: Tuple[float, float, int] = (0.0, 7.0, 71)
    t_window: Tuple[float, int] = (4.0, 201)
    initial: Union[TransformParams, QubitState] = field(default_factory=TransformParams)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    on_error: str = "abort"
    chunk_size: int = DEFAULT_CHUNK_SIZE

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ("r_range", "v_range"):
            lo, hi, n = getattr(self, name)
            if int(n) != n or n < 1:
                raise ValueError(f"{name} count must be an integer >= 1")
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ValueError(f"{name} bounds must be finite")
            object.__setattr__(self, name, (float(lo), float(hi), int(n)))
        t_max, n_t = self.t_window
        if not (t_max > 0) or int(n_t) != n_t or n_t < 1:
            raise ValueError("t_window needs t_max > 0 and sample_count >= 1")
        object.__setattr__(self, "t_window", (float(t_max), int(n_t)))
        if not math.isfinite(self.C):
            raise ValueError("C must be finite")
        if self.on_error not in ("abort", "skip"):
            raise ValueError("on_error must be 'abort' or 'skip'")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")

    @property
    def r_values(self) -> np.ndarray:
        lo, hi, n = self.r_range
        return np.linspace(lo, hi, n)

    @property
    def v_values(self) -> np.ndarray:
        lo, hi, n = self.v_range
        return np.linspace(lo, hi, n)

    @property
    def t_values(self) -> np.ndarray:
        t_max, n = self.t_window
        return t_max * np.arange(1, n + 1) / n

    def initial_state(self) -> QubitState:
        if isinstance(self.initial, QubitState):
            _check_state(self.initial)
            return self.initial
        return transformed_initial_state(self.initial)

    def grid_nodes(self) -> Tuple[np.ndarray, np.ndarray]:
        """Flattened (R, v) of every node, R-major."""
        R, v = np.meshgrid(self.r_values, self.v_values, indexing="ij")
        return R.ravel(), v.ravel()


@dataclass
class PointCloud:
    """Reached Bloch points in (R-index, v-index, t-index) order."""

    R: np.ndarray
    v: np.ndarray
    t: np.ndarray
    p: np.ndarray  # (n, 3)
    config: Optional[SweepConfig] = None
    skipped: List[Tuple[float, float]] = field(default_factory=list)

    def __len__(self):
        return len(self.t)

    @classmethod
    def from_points(cls, p, config=None) -> "PointCloud":
        p = np.asarray(p, dtype=float).reshape(-1, 3)
        z = np.zeros(len(p))
        return cls(z, z.copy(), z.copy(), p, config)

    def subset(self, mask) -> "PointCloud":
        return PointCloud(self.R[mask], self.v[mask], self.t[mask], self.p[mask], self.config)

    def records(self):
        for i in range(len(self)):
            yield (self.R[i], self.v[i], self.t[i], *self.p[i])


@dataclass(frozen=True)
class SpherePartition:
    """n_z equal-height bands in p_z times n_phi equal azimuth sectors.

    Archimedes: equal height in z means equal area, so every cell has area
    4 pi / (n_z n_phi).
    """

    n_z: int = 16
    n_phi: int = 18

    def __post_init__(self):
        if int(self.n_z) != self.n_z or int(self.n_phi) != self.n_phi or self.n_z < 1 or self.n_phi < 1:
            raise ValueError("partition sizes must be integers >= 1")

    @property
    def total_cells(self) -> int:
        return self.n_z * self.n_phi


@dataclass
class CoverageReport:
    occupied_cells: int
    total_cells: int
    coverage: float
    per_cell_counts: Dict[int, int]


def cell_indices(p: np.ndarray, part: SpherePartition, tol: float = ACCEPT_NORM_TOL) -> np.ndarray:
    """Vectorized cell lookup for an ``(n, 3)`` array of unit vectors."""
    p = np.asarray(p, dtype=float).reshape(-1, 3)
    norms = np.sqrt(np.sum(p * p, axis=1))
    if np.any(~np.isfinite(norms)) or np.any(np.abs(norms - 1.0) > tol):
        raise NormalizationError("cell lookup requires unit Bloch vectors")
    z_slice = np.floor((p[:, 2] + 1.0) / 2.0 * part.n_z).astype(np.int64)
    z_slice = np.clip(z_slice, 0, part.n_z - 1)
    az = np.mod(np.arctan2(p[:, 1], p[:, 0]), 2 * np.pi)
    phi_slice = np.floor(az / (2 * np.pi) * part.n_phi).astype(np.int64)
    phi_slice = np.clip(phi_slice, 0, part.n_phi - 1)
    return z_slice * part.n_phi + phi_slice


def cell_index(p: BlochVector, part: SpherePartition) -> int:
    return int(cell_indices(p.to_array(), part)[0])


def coverage(cloud: PointCloud, part: SpherePartition = SpherePartition()) -> CoverageReport:
    total = part.total_cells
    if len(cloud) == 0:
        return CoverageReport(0, total, 0.0, {})
    idx, counts = np.unique(cell_indices(cloud.p, part), return_counts=True)
    per_cell = {int(i): int(c) for i, c in zip(idx, counts)}
    return CoverageReport(len(per_cell), total, len(per_cell) / total, per_cell)


@dataclass
class CoverageRow:
    label: str
    coverage: float
    delta_vs_first: float
    delta_vs_previous: float


@dataclass
class CoverageTable:
    rows: List[CoverageRow]
    # pairwise[i][j] = coverage_j - coverage_i
    pairwise: List[List[float]]

    def format(self) -> str:
        width = max([len("label")] + [len(r.label) for r in self.rows])
        lines = [f"{'label':<{width}}  {'coverage':>10}  {'delta':>10}"]
        for r in self.rows:
            lines.append(f"{r.label:<{width}}  {r.coverage:>10.6f}  {r.delta_vs_first:>+10.6f}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "rows": [
                {
                    "label": r.label,
                    "coverage": r.coverage,
                    "delta_vs_first": r.delta_vs_first,
                    "delta_vs_previous": r.delta_vs_previous,
                }
                for r in self.rows
            ],
            "pairwise": self.pairwise,
        }


def coverage_table(labeled: Sequence[Tuple[str, float]]) -> CoverageTable:
    """Table of coverages in input order with deltas."""
    values = [float(c) for _, c in labeled]
    rows = []
    for i, (label, c) in enumerate(labeled):
        rows.append(
            CoverageRow(
                str(label),
                values[i],
                values[i] - values[0],
                0.0 if i == 0 else values[i] - values[i - 1],
            )
        )
    pairwise = [[cj - ci for cj in values] for ci in values]
    return CoverageTable(rows, pairwise)


def compare_coverage(
    clouds: Sequence[Tuple[str, PointCloud]], part: SpherePartition = SpherePartition()
) -> CoverageTable:
    if any(len(c) == 0 for _, c in clouds):
        raise ValueError("compare_coverage needs non-empty clouds")
    return coverage_table([(label, coverage(c, part).coverage) for label, c in clouds])


# -- sweep engine -----------------------------------------------------------------


def _integrate_nodes(cfg: SweepConfig, R: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Bloch samples of shape ``(n_nodes, n_t, 3)`` for the given nodes."""
    s0 = cfg.initial_state()
    t = cfg.t_values
    if cfg.mode == "linear":
        u00, u01, u10, u11 = linear_propagator_arrays(R[:, None], v[:, None], t[None, :])
        a = u00 * s0.a + u01 * s0.b
        b = u10 * s0.a + u11 * s0.b
    elif cfg.mode == "nonlinear":
        rhs = nonlinear_batch_rhs(R, v, np.full_like(R, cfg.C))
        y0 = np.tile(s0.to_array(), (len(R), 1))
        out, _ = integrate_batch(rhs, y0, t, cfg.integrator)
        a, b = out[:, :, 0].T, out[:, :, 1].T
    else:
        out, _, _ = integrate_controlled_batch(R, v, s0, cfg.control, t, cfg.integrator)
        a, b = out[:, :, 0].T, out[:, :, 1].T
    px, py, pz = bloch_arrays(a, b)
    return np.stack([px, py, pz], axis=-1)


def _run_chunk(cfg: SweepConfig, lo: int, hi: int):
    """Returns ``(lo, points, ok_mask, failures)`` for nodes ``lo:hi``."""
    R_all, v_all = cfg.grid_nodes()
    R, v = R_all[lo:hi], v_all[lo:hi]
    try:
        return lo, _integrate_nodes(cfg, R, v), np.ones(hi - lo, dtype=bool), []
    except IntegrationError:
        pass
    # Locate the failing node(s) one at a time.
    n_t = cfg.t_window[1]
    pts = np.full((hi - lo, n_t, 3), np.nan)
    ok = np.ones(hi - lo, dtype=bool)
    failures = []
    for i in range(hi - lo):
        try:
            pts[i] = _integrate_nodes(cfg, R[i : i + 1], v[i : i + 1])[0]
        except IntegrationError as exc:
            if cfg.on_error == "abort":
                raise SweepError(float(R[i]), float(v[i]), exc) from exc
            ok[i] = False
            failures.append((float(R[i]), float(v[i]), str(exc)))
    return lo, pts, ok, failures


def run_sweep(cfg: SweepConfig, workers: int = 1) -> PointCloud:
    """Integrate every grid node and collect the Bloch samples.

    Nodes are split into fixed-size chunks (``cfg.chunk_size``) regardless of
    ``workers``; chunk results land in pre-indexed slots, so the cloud is
    bitwise identical for any worker count.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    R_all, v_all = cfg.grid_nodes()
    n_nodes = len(R_all)
    n_t = cfg.t_window[1]
    bounds = [(lo, min(lo + cfg.chunk_size, n_nodes)) for lo in range(0, n_nodes, cfg.chunk_size)]
    pts = np.empty((n_nodes, n_t, 3))
    ok = np.ones(n_nodes, dtype=bool)
    failures = []

    if workers == 1 or len(bounds) == 1:
        results = (_run_chunk(cfg, lo, hi) for lo, hi in bounds)
        for lo, chunk_pts, chunk_ok, chunk_fail in results:
            pts[lo : lo + len(chunk_ok)] = chunk_pts
            ok[lo : lo + len(chunk_ok)] = chunk_ok
            failures.extend(chunk_fail)
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(bounds))) as pool:
            futures = [pool.submit(_run_chunk, cfg, lo, hi) for lo, hi in bounds]
            for fut in futures:
                lo, chunk_pts, chunk_ok, chunk_fail = fut.result()
                pts[lo : lo + len(chunk_ok)] = chunk_pts
                ok[lo : lo + len(chunk_ok)] = chunk_ok
                failures.extend(chunk_fail)

    for R, v, msg in failures:
        log.warning("skipped node R=%r v=%r: %s", R, v, msg)

    t = cfg.t_values
    node_R = np.repeat(R_all[ok], n_t)
    node_v = np.repeat(v_all[ok], n_t)
    times = np.tile(t, int(ok.sum()))
    return PointCloud(
        R=node_R,
        v=node_v,
        t=times,
        p=pts[ok].reshape(-1, 3),
        config=cfg,
        skipped=[(R, v) for R, v, _ in failures],
    )
