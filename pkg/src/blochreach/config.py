"""INI-style run configuration and the named presets.

Sections: ``[system]``, ``[sweep]``, ``[control]``, ``[integrator]``,
``[output]``. Every key has a default (see :data:`DEFAULTS`); a config file
only needs the keys it changes. Unknown sections/keys are errors.
"""

from __future__ import annotations

import configparser
import io
import math
from typing import Dict, Mapping, Optional

from .dynamics import IntegratorConfig
from .lyapunov import ControlLawConfig, H1Choice, SignConvention, TargetConfig
from .qcore import HamiltonianParams, TransformParams
from .reach import DEFAULT_CHUNK_SIZE, MODES, SpherePartition, SweepConfig


class ConfigError(ValueError):
    """Bad configuration; the message names the offending key."""


DEFAULTS: Dict[str, Dict[str, str]] = {
    "system": {
        "mode": "linear",
        "R": "0.0",
        "v": "3.141592653589793",
        "C": "0.0",
        "theta": "0.0",
        "phi": "0.0",
        "t_start": "0.0",
        "t_stop": "1.0",
        "t_step": "0.5",
    },
    "sweep": {
        "r_min": "0.0",
        "r_max": "7.0",
        "r_count": "71",
        "v_min": "0.0",
        "v_max": "7.0",
        "v_count": "71",
        "t_max": "4.0",
        "t_samples": "201",
        "n_z": "16",
        "n_phi": "18",
        "on_error": "abort",
        "chunk_size": str(DEFAULT_CHUNK_SIZE),
    },
    "control": {
        "kappa": "0.0",
        "h1": H1Choice.STATE_DEPENDENT_SIGMA_Z.value,
        "sign": SignConvention.MINUS_F.value,
        "perturbation_angle": "0.0",
        "target_R0": "",
        "target_v0": "",
    },
    "integrator": {
        "dt": "0.001",
        "renormalize": "true",
        "norm_drift_tolerance": "1e-6",
    },
    "output": {
        "dir": "out",
        "svg": "false",
        "label": "",
    },
}

# Caption parameter sets; missing keys fall back to DEFAULTS.
PRESETS: Dict[str, Dict[str, Dict[str, str]]] = {
    "fig1": {
        "system": {"mode": "linear", "theta": "0.0", "phi": "0.0"},
        "sweep": {"r_min": "0.0", "r_max": "7.0", "v_min": "0.0", "v_max": "7.0", "t_max": "4.0"},
    },
    "fig2": {
        "system": {"mode": "nonlinear", "C": "2.0", "theta": "0.0", "phi": "0.0"},
        "sweep": {"r_min": "0.0", "r_max": "7.0", "v_min": "0.0", "v_max": "7.0", "t_max": "4.0"},
    },
    "fig3": {
        "system": {"mode": "nonlinear", "C": "20.0", "theta": repr(math.pi / 4), "phi": "0.0"},
        "sweep": {"r_min": "0.0", "r_max": "7.0", "v_min": "0.0", "v_max": "7.0", "t_max": "4.0"},
    },
    "fig4": {
        "system": {"mode": "controlled", "theta": "0.0", "phi": "0.0"},
        "sweep": {"r_min": "0.0", "r_max": "0.5", "v_min": "0.0", "v_max": "0.5", "t_max": "4.0"},
        "control": {"kappa": "0.0"},
    },
    "fig5": {
        "system": {"mode": "controlled", "theta": "0.0", "phi": "0.0"},
        "sweep": {"r_min": "0.0", "r_max": "7.0", "v_min": "0.0", "v_max": "7.0", "t_max": "0.3"},
        "control": {"kappa": "0.0"},
    },
}


def new_parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # R and r are different keys
    cp.read_dict(DEFAULTS)
    return cp


def merge(cp: configparser.ConfigParser, data: Mapping[str, Mapping[str, str]], origin: str) -> None:
    for section, items in data.items():
        if section not in DEFAULTS:
            raise ConfigError(f"{origin}: unknown section [{section}]")
        for key, value in items.items():
            if key not in DEFAULTS[section]:
                raise ConfigError(f"{origin}: unknown key {section}.{key}")
            cp.set(section, key, str(value))


def load(
    path: Optional[str] = None,
    preset: Optional[str] = None,
    text: Optional[str] = None,
    overrides: Optional[Mapping[str, Mapping[str, str]]] = None,
) -> configparser.ConfigParser:
    """Layer defaults < preset < file < overrides."""
    cp = new_parser()
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"preset: unknown preset {preset!r} (choose from {', '.join(PRESETS)})")
        merge(cp, PRESETS[preset], f"preset {preset}")
    sources = []
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                sources.append((fh.read(), path))
        except OSError as exc:
            raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    if text is not None:
        sources.append((text, "<text>"))
    for body, origin in sources:
        raw = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
        raw.optionxform = str
        try:
            raw.read_string(body, source=origin)
        except configparser.Error as exc:
            raise ConfigError(f"{origin}: {exc}") from exc
        merge(cp, {s: dict(raw.items(s)) for s in raw.sections()}, origin)
    if overrides:
        merge(cp, overrides, "override")
    return cp


def parse_assignment(item: str) -> tuple:
    """``section.key=value`` -> (section, key, value)."""
    if "=" not in item or "." not in item.split("=", 1)[0]:
        raise ConfigError(f"--set: expected section.key=value, got {item!r}")
    lhs, value = item.split("=", 1)
    section, key = lhs.split(".", 1)
    return section.strip(), key.strip(), value.strip()


def dumps(cp: configparser.ConfigParser) -> str:
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def as_dict(cp: configparser.ConfigParser) -> Dict[str, Dict[str, str]]:
    return {s: dict(cp.items(s)) for s in DEFAULTS}


# -- typed getters ----------------------------------------------------------------


def _get(cp, section, key, conv, what):
    raw = cp.get(section, key)
    try:
        value = conv(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}.{key}: expected {what}, got {raw!r}") from exc
    if isinstance(value, float) and not math.isfinite(value):
        raise ConfigError(f"{section}.{key}: must be finite, got {raw!r}")
    return value


def _float(cp, section, key):
    return _get(cp, section, key, float, "a number")


def _int(cp, section, key):
    return _get(cp, section, key, int, "an integer")


def _bool(cp, section, key):
    try:
        return cp.getboolean(section, key)
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}: expected true/false, got {cp.get(section, key)!r}") from exc


def _optional_float(cp, section, key):
    raw = cp.get(section, key).strip()
    return None if raw == "" else _float(cp, section, key)


def mode(cp) -> str:
    m = cp.get("system", "mode").strip().lower()
    if m not in MODES:
        raise ConfigError(f"system.mode: expected one of {MODES}, got {m!r}")
    return m


def hamiltonian_params(cp) -> HamiltonianParams:
    return HamiltonianParams(_float(cp, "system", "R"), _float(cp, "system", "v"), _float(cp, "system", "C"))


def transform_params(cp) -> TransformParams:
    theta, phi = _float(cp, "system", "theta"), _float(cp, "system", "phi")
    try:
        return TransformParams(theta, phi)
    except ValueError as exc:
        key = "system.theta" if not 0 <= theta <= math.pi else "system.phi"
        raise ConfigError(f"{key}: {exc}") from exc


def integrator_config(cp) -> IntegratorConfig:
    try:
        return IntegratorConfig(
            dt=_float(cp, "integrator", "dt"),
            renormalize_every_step=_bool(cp, "integrator", "renormalize"),
            norm_drift_tolerance=_float(cp, "integrator", "norm_drift_tolerance"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        key = "integrator.dt" if "dt" in str(exc) else "integrator.norm_drift_tolerance"
        raise ConfigError(f"{key}: {exc}") from exc


def control_config(cp) -> ControlLawConfig:
    kappa = _float(cp, "control", "kappa")
    if kappa < 0:
        raise ConfigError(f"control.kappa: must be >= 0, got {kappa!r}")
    angle = _float(cp, "control", "perturbation_angle")
    if angle < 0:
        raise ConfigError(f"control.perturbation_angle: must be >= 0, got {angle!r}")
    try:
        h1 = H1Choice(cp.get("control", "h1").strip())
    except ValueError as exc:
        raise ConfigError(f"control.h1: expected one of {[c.value for c in H1Choice]}") from exc
    try:
        sign = SignConvention(cp.get("control", "sign").strip())
    except ValueError as exc:
        raise ConfigError(f"control.sign: expected one of {[c.value for c in SignConvention]}") from exc
    r0 = _optional_float(cp, "control", "target_R0")
    v0 = _optional_float(cp, "control", "target_v0")
    if (r0 is None) != (v0 is None):
        raise ConfigError("control.target_R0: target_R0 and target_v0 must be given together")
    fixed = None if r0 is None else (r0, v0)
    target = TargetConfig(fixed_hamiltonian=fixed, perturbation_angle=angle)
    return ControlLawConfig(kappa=kappa, h1_choice=h1, sign_convention=sign, target=target)


def partition(cp) -> SpherePartition:
    n_z, n_phi = _int(cp, "sweep", "n_z"), _int(cp, "sweep", "n_phi")
    if n_z < 1:
        raise ConfigError("sweep.n_z: must be >= 1")
    if n_phi < 1:
        raise ConfigError("sweep.n_phi: must be >= 1")
    return SpherePartition(n_z, n_phi)


def trajectory_grid(cp):
    start = _float(cp, "system", "t_start")
    stop = _float(cp, "system", "t_stop")
    step = _float(cp, "system", "t_step")
    if start < 0:
        raise ConfigError("system.t_start: must be >= 0")
    if step <= 0:
        raise ConfigError("system.t_step: must be > 0")
    if stop < start:
        raise ConfigError("system.t_stop: must be >= t_start")
    n = int(math.floor((stop - start) / step + 1e-9))
    return [start + k * step for k in range(n + 1)]


def sweep_config(cp) -> SweepConfig:
    counts = {}
    for key in ("r_count", "v_count", "t_samples", "chunk_size"):
        counts[key] = _int(cp, "sweep", key)
        if counts[key] < 1:
            raise ConfigError(f"sweep.{key}: must be >= 1")
    t_max = _float(cp, "sweep", "t_max")
    if t_max <= 0:
        raise ConfigError("sweep.t_max: must be > 0")
    on_error = cp.get("sweep", "on_error").strip()
    if on_error not in ("abort", "skip"):
        raise ConfigError(f"sweep.on_error: expected abort or skip, got {on_error!r}")
    return SweepConfig(
        mode=mode(cp),
        C=_float(cp, "system", "C"),
        control=control_config(cp),
        r_range=(_float(cp, "sweep", "r_min"), _float(cp, "sweep", "r_max"), counts["r_count"]),
        v_range=(_float(cp, "sweep", "v_min"), _float(cp, "sweep", "v_max"), counts["v_count"]),
        t_window=(t_max, counts["t_samples"]),
        initial=transform_params(cp),
        integrator=integrator_config(cp),
        on_error=on_error,
        chunk_size=counts["chunk_size"],
    )


def validate(cp) -> None:
    """Parse everything once so errors surface before any work starts."""
    mode(cp)
    hamiltonian_params(cp)
    transform_params(cp)
    integrator_config(cp)
    control_config(cp)
    partition(cp)
    trajectory_grid(cp)
    sweep_config(cp)
    _bool(cp, "output", "svg")
