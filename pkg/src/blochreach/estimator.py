"""scikit-learn style front end to the sweep engine.

``X`` is an ``(n_samples, 2)`` array of control settings (R, v). ``fit``
integrates every row and records the reached Bloch points and their
coverage; ``transform`` maps rows to the flattened Bloch samples along the
time window. Hyper-parameters are plain constructor arguments, so
``get_params``/``set_params``/``clone`` work as usual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .dynamics import IntegratorConfig
from .lyapunov import ControlLawConfig, TargetConfig
from .qcore import TransformParams
from .reach import MODES, PointCloud, SpherePartition, SweepConfig, _integrate_nodes, coverage


def parameter_grid(r_range=(0.0, 7.0, 71), v_range=(0.0, 7.0, 71)) -> np.ndarray:
    """Rows (R, v) of a full grid in the sweep engine's R-major order."""
    R, v = np.meshgrid(np.linspace(*r_range), np.linspace(*v_range), indexing="ij")
    return np.column_stack([R.ravel(), v.ravel()])


class ReachableSet(TransformerMixin, BaseEstimator):
    """Reachable Bloch points over a set of (R, v) control settings.

    Parameters
    ----------
    mode : {"linear", "nonlinear", "controlled"}
    C : float
        Mean-field strength (``mode="nonlinear"``).
    kappa, h1_choice, sign_convention, perturbation_angle :
        Lyapunov controller settings (``mode="controlled"``).
    t_max, n_times : float, int
        Samples are taken at ``t_max * k / n_times``, k = 1..n_times.
    theta, phi : float
        Frame angles selecting the initial state F(theta, phi)|e>.
    dt, renormalize : float, bool
        RK4 settings.
    n_z, n_phi : int
        Equal-area partition used for ``coverage_`` and :meth:`score`.

    Attributes
    ----------
    cloud_ : PointCloud
    coverage_ : CoverageReport
    n_features_in_ : int
    """

    def __init__(
        self,
        mode="linear",
        C=0.0,
        kappa=0.0,
        h1_choice="state_dependent_sigma_z",
        sign_convention="minus",
        perturbation_angle=0.0,
        t_max=4.0,
        n_times=201,
        theta=0.0,
        phi=0.0,
        dt=1e-3,
        renormalize=True,
        n_z=16,
        n_phi=18,
    ):
        self.mode = mode
        self.C = C
        self.kappa = kappa
        self.h1_choice = h1_choice
        self.sign_convention = sign_convention
        self.perturbation_angle = perturbation_angle
        self.t_max = t_max
        self.n_times = n_times
        self.theta = theta
        self.phi = phi
        self.dt = dt
        self.renormalize = renormalize
        self.n_z = n_z
        self.n_phi = n_phi

    def _sweep_config(self) -> SweepConfig:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        control = ControlLawConfig(
            kappa=float(self.kappa),
            h1_choice=self.h1_choice,
            sign_convention=self.sign_convention,
            target=TargetConfig(perturbation_angle=float(self.perturbation_angle)),
        )
        return SweepConfig(
            mode=self.mode,
            C=float(self.C),
            control=control,
            t_window=(float(self.t_max), int(self.n_times)),
            initial=TransformParams(float(self.theta), float(self.phi)),
            integrator=IntegratorConfig(dt=float(self.dt), renormalize_every_step=bool(self.renormalize)),
        )

    def _validate(self, X, reset):
        X = check_array(X, dtype=np.float64, ensure_all_finite=True)
        if X.shape[1] != 2:
            raise ValueError(f"X must have two columns (R, v), got {X.shape[1]}")
        if reset:
            self.n_features_in_ = X.shape[1]
        return X

    def _bloch(self, X) -> np.ndarray:
        return _integrate_nodes(self._sweep_config(), X[:, 0].copy(), X[:, 1].copy())

    def fit(self, X, y=None):
        X = self._validate(X, reset=True)
        cfg = self._sweep_config()
        pts = self._bloch(X)
        n_t = cfg.t_window[1]
        self.cloud_ = PointCloud(
            R=np.repeat(X[:, 0], n_t),
            v=np.repeat(X[:, 1], n_t),
            t=np.tile(cfg.t_values, len(X)),
            p=pts.reshape(-1, 3),
            config=cfg,
        )
        self.partition_ = SpherePartition(int(self.n_z), int(self.n_phi))
        self.coverage_ = coverage(self.cloud_, self.partition_)
        return self

    def transform(self, X):
        """Bloch samples per row, shape ``(n_samples, 3 * n_times)`` as (px, py, pz) triples."""
        check_is_fitted(self, "cloud_")
        X = self._validate(X, reset=False)
        return self._bloch(X).reshape(len(X), -1)

    def score(self, X, y=None) -> float:
        """Coverage of the points reached from the rows of ``X``."""
        check_is_fitted(self, "cloud_")
        X = self._validate(X, reset=False)
        pts = self._bloch(X).reshape(-1, 3)
        return coverage(PointCloud.from_points(pts), self.partition_).coverage
