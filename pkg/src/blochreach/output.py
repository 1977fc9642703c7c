"""CSV/JSON writers.

CSV contract: ``,`` separator, LF line endings, floats printed with 17
significant digits (``repr``-exact round trip, locale independent).
"""

from __future__ import annotations

import json
import os
import tempfile
from typing import Iterable, Sequence

import numpy as np

from .dynamics import Trajectory
from .lyapunov import ControlledRun
from .reach import CoverageReport, PointCloud, SpherePartition, SweepConfig
from .qcore import QubitState

TRAJECTORY_HEADER = ["t", "re_a", "im_a", "re_b", "im_b", "px", "py", "pz"]
CONTROL_COLUMNS = ["f", "V"]
CLOUD_HEADER = ["R", "v", "t", "px", "py", "pz"]


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _umask() -> int:
    # mkstemp creates 0600 files; restore the usual umask-derived mode
    mask = os.umask(0)
    os.umask(mask)
    return mask


def atomic_write(path: str, data: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(data)
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _rows_to_text(header: Sequence[str], rows: Iterable[Sequence[float]]) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(x) for x in row) for row in rows)
    return "\n".join(lines) + "\n"


def trajectory_csv(traj: Trajectory, run: ControlledRun = None) -> str:
    header = list(TRAJECTORY_HEADER)
    extra = None
    if run is not None:
        header += CONTROL_COLUMNS
        extra = list(zip(run.f, run.V))
    rows = []
    for i, s in enumerate(traj.samples):
        row = [s.t, s.state.a.real, s.state.a.imag, s.state.b.real, s.state.b.imag, *s.bloch.as_tuple()]
        if extra is not None:
            row += list(extra[i])
        rows.append(row)
    return _rows_to_text(header, rows)


def cloud_csv(cloud: PointCloud) -> str:
    cols = np.column_stack([cloud.R, cloud.v, cloud.t, cloud.p]) if len(cloud) else np.empty((0, 6))
    lines = [",".join(CLOUD_HEADER)]
    lines.extend(",".join(fmt(x) for x in row) for row in cols.tolist())
    return "\n".join(lines) + "\n"


def read_cloud_csv(path: str) -> PointCloud:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        return PointCloud(np.empty(0), np.empty(0), np.empty(0), np.empty((0, 3)))
    return PointCloud(data[:, 0], data[:, 1], data[:, 2], data[:, 3:6])


def _initial_summary(cfg: SweepConfig) -> dict:
    if isinstance(cfg.initial, QubitState):
        s = cfg.initial
        return {"state": [[s.a.real, s.a.imag], [s.b.real, s.b.imag]]}
    return {"theta": cfg.initial.theta, "phi": cfg.initial.phi}


def sweep_params(cfg: SweepConfig) -> dict:
    if cfg.mode == "linear":
        return {}
    if cfg.mode == "nonlinear":
        return {"C": cfg.C}
    ctl = cfg.control
    return {
        "kappa": ctl.kappa,
        "h1": ctl.h1_choice.value,
        "sign": ctl.sign_convention.value,
        "perturbation_angle": ctl.target.perturbation_angle,
        "target_hamiltonian": "same" if ctl.target.fixed_hamiltonian is None else list(ctl.target.fixed_hamiltonian),
    }


def coverage_summary(report: CoverageReport, part: SpherePartition, cfg: SweepConfig, label: str = "") -> dict:
    return {
        "label": label,
        "coverage": report.coverage,
        "occupied_cells": report.occupied_cells,
        "total_cells": report.total_cells,
        "partition": {"n_z": part.n_z, "n_phi": part.n_phi},
        "mode": cfg.mode,
        "params": sweep_params(cfg),
        "grid": {"R": list(cfg.r_range), "v": list(cfg.v_range)},
        "t_window": {"t_max": cfg.t_window[0], "sample_count": cfg.t_window[1]},
        "initial": _initial_summary(cfg),
        "integrator": {
            "dt": cfg.integrator.dt,
            "renormalize_every_step": cfg.integrator.renormalize_every_step,
            "norm_drift_tolerance": cfg.integrator.norm_drift_tolerance,
        },
    }


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"
