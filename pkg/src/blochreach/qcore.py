"""Two-level states, Bloch vectors, 2x2 operators and the unitary frame change.

Conventions: hbar = 1, basis ordering (|e>, |g>), so a state is the column
vector (a, b) with a the excited-state amplitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

ACCEPT_NORM_TOL = 1e-6

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)


class NormalizationError(ValueError):
    """Raised when a state or Bloch vector is not unit length."""


@dataclass(frozen=True)
class QubitState:
    """Pure qubit state a|e> + b|g>.

    Construct through :meth:`from_amplitudes` (or :meth:`excited`,
    :meth:`ground`) to get the normalization check; the raw constructor
    stores whatever it is given.
    """

    a: complex
    b: complex

    @classmethod
    def from_amplitudes(cls, a: complex, b: complex, tol: float = ACCEPT_NORM_TOL) -> "QubitState":
        a, b = complex(a), complex(b)
        norm = math.sqrt(abs(a) ** 2 + abs(b) ** 2)
        if not math.isfinite(norm) or abs(norm - 1.0) > tol:
            raise NormalizationError(f"state norm {norm!r} deviates from 1 by more than {tol}")
        return cls(a / norm, b / norm)

    @classmethod
    def normalized(cls, a: complex, b: complex) -> "QubitState":
        """Rescale arbitrary non-zero amplitudes to unit norm."""
        a, b = complex(a), complex(b)
        norm = math.sqrt(abs(a) ** 2 + abs(b) ** 2)
        if norm == 0.0 or not math.isfinite(norm):
            raise NormalizationError("cannot normalize a zero or non-finite vector")
        return cls(a / norm, b / norm)

    @classmethod
    def excited(cls) -> "QubitState":
        return cls(1.0 + 0j, 0j)

    @classmethod
    def ground(cls) -> "QubitState":
        return cls(0j, 1.0 + 0j)

    @classmethod
    def from_array(cls, vec, tol: float = ACCEPT_NORM_TOL) -> "QubitState":
        vec = np.asarray(vec, dtype=complex).reshape(2)
        return cls.from_amplitudes(vec[0], vec[1], tol=tol)

    def to_array(self) -> np.ndarray:
        return np.array([self.a, self.b], dtype=complex)

    @property
    def norm(self) -> float:
        return math.sqrt(abs(self.a) ** 2 + abs(self.b) ** 2)

    def overlap(self, other: "QubitState") -> complex:
        """<self|other>."""
        return self.a.conjugate() * other.a + self.b.conjugate() * other.b

    def fidelity(self, other: "QubitState") -> float:
        """|<self|other>|^2, insensitive to global phase."""
        return abs(self.overlap(other)) ** 2

    def with_phase(self, alpha: float) -> "QubitState":
        ph = complex(math.cos(alpha), math.sin(alpha))
        return QubitState(ph * self.a, ph * self.b)


@dataclass(frozen=True)
class BlochVector:
    p_x: float
    p_y: float
    p_z: float

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.p_x, self.p_y, self.p_z)

    def to_array(self) -> np.ndarray:
        return np.array(self.as_tuple())

    @property
    def norm(self) -> float:
        return math.sqrt(self.p_x ** 2 + self.p_y ** 2 + self.p_z ** 2)


@dataclass(frozen=True)
class HamiltonianParams:
    """Level splitting ``R``, tunnelling coupling ``v`` and nonlinearity ``C``."""

    R: float
    v: float
    C: float = 0.0

    def __post_init__(self):
        for name in ("R", "v", "C"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"HamiltonianParams.{name} must be finite")


@dataclass(frozen=True)
class TransformParams:
    """Angles of the frame change, theta in [0, pi] and phi in [0, 2 pi]."""

    theta: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.theta <= math.pi):
            raise ValueError(f"theta={self.theta!r} outside [0, pi]")
        if not (0.0 <= self.phi <= 2 * math.pi):
            raise ValueError(f"phi={self.phi!r} outside [0, 2 pi]")


class Operator2:
    """Immutable 2x2 complex matrix."""

    __slots__ = ("_m",)

    def __init__(self, matrix):
        m = np.array(matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
        m.setflags(write=False)
        self._m = m

    @property
    def matrix(self) -> np.ndarray:
        return self._m

    def __array__(self, dtype=None, copy=None):
        return self._m if dtype is None else self._m.astype(dtype)

    def __matmul__(self, other):
        if isinstance(other, Operator2):
            return Operator2(self._m @ other._m)
        return self._m @ np.asarray(other)

    def __repr__(self):
        return f"Operator2({self._m.tolist()!r})"

    def dagger(self) -> "Operator2":
        return Operator2(self._m.conj().T)

    def trace(self) -> complex:
        return complex(np.trace(self._m))

    def det(self) -> complex:
        m = self._m
        return complex(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self._m - self._m.conj().T)) <= tol)

    def is_unitary(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self._m.conj().T @ self._m - IDENTITY)) <= tol)

    def allclose(self, other, atol: float = 1e-12) -> bool:
        return bool(np.allclose(self._m, np.asarray(other), rtol=0.0, atol=atol))

    def pauli_coefficients(self) -> Tuple[float, float, float, float]:
        """Real coefficients (c0, cx, cy, cz) with M = c0 I + cx sx + cy sy + cz sz.

        Only meaningful for Hermitian matrices.
        """
        m = self._m
        c0 = 0.5 * (m[0, 0] + m[1, 1]).real
        cz = 0.5 * (m[0, 0] - m[1, 1]).real
        cx = m[1, 0].real
        cy = m[1, 0].imag
        return (c0, cx, cy, cz)

    def apply(self, s: QubitState) -> QubitState:
        out = self._m @ s.to_array()
        return QubitState(complex(out[0]), complex(out[1]))


def _check_state(s: QubitState) -> None:
    n = s.norm
    if not math.isfinite(n) or abs(n - 1.0) > ACCEPT_NORM_TOL:
        raise NormalizationError(f"state norm {n!r} deviates from 1 by more than {ACCEPT_NORM_TOL}")


def bloch_from_state(s: QubitState) -> BlochVector:
    """Bloch vector of a pure state.

    p_z = 2|a|^2 - 1, p_x = a* b + b* a, p_y = i (a b* - b a*).
    """
    _check_state(s)
    a, b = s.a, s.b
    p_z = 2.0 * abs(a) ** 2 - 1.0
    p_x = (a.conjugate() * b + b.conjugate() * a).real
    p_y = (1j * (a * b.conjugate() - b * a.conjugate())).real
    return BlochVector(p_x, p_y, p_z)


def bloch_arrays(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized :func:`bloch_from_state` over amplitude arrays (no norm check)."""
    ab = a.conj() * b
    p_x = 2.0 * ab.real
    # i (a b* - b a*) = i (2i Im(a b*)) = -2 Im(a b*) = 2 Im(a* b)
    p_y = 2.0 * ab.imag
    p_z = 2.0 * (a.real ** 2 + a.imag ** 2) - 1.0
    return p_x, p_y, p_z


def state_from_bloch(p: BlochVector) -> QubitState:
    """Inverse of :func:`bloch_from_state`, gauge fixed with ``a`` real and >= 0."""
    n = p.norm
    if not math.isfinite(n) or abs(n - 1.0) > ACCEPT_NORM_TOL:
        raise NormalizationError(f"Bloch vector norm {n!r} is not 1")
    px, py, pz = p.p_x / n, p.p_y / n, p.p_z / n
    # take the larger amplitude from p_z and the smaller one from p_x + i p_y = 2 a* b,
    # which avoids the cancellation in 1 - p_z near the poles
    rho = math.hypot(px, py)
    if pz >= 0.0:
        a = math.sqrt((1.0 + pz) / 2.0)
        b = complex(px, py) / (2.0 * a)
    else:
        mag_b = math.sqrt((1.0 - pz) / 2.0)
        a = rho / (2.0 * mag_b)
        b = mag_b if rho == 0.0 else mag_b * complex(px / rho, py / rho)
    return QubitState.normalized(a, b)


def expectation_sz(s: QubitState) -> float:
    """<psi|sigma_z|psi> = |a|^2 - |b|^2."""
    _check_state(s)
    return abs(s.a) ** 2 - abs(s.b) ** 2


def linear_hamiltonian(params: HamiltonianParams) -> Operator2:
    """H = R/2 sigma_z + v/2 sigma_x (``C`` is ignored)."""
    R, v = float(params.R), float(params.v)
    return Operator2([[R / 2, v / 2], [v / 2, -R / 2]])


def nonlinear_hamiltonian(params: HamiltonianParams, s: QubitState) -> Operator2:
    """Mean-field Hamiltonian with the -C/2 <sigma_z> sigma_z term evaluated on ``s``."""
    m = abs(s.a) ** 2 - abs(s.b) ** 2
    r_eff = params.R - params.C * m
    return Operator2([[r_eff / 2, params.v / 2], [params.v / 2, -r_eff / 2]])


def transform_f(t: TransformParams) -> Operator2:
    c, s = math.cos(t.theta), math.sin(t.theta)
    e = complex(math.cos(t.phi), math.sin(t.phi))
    return Operator2([[c, s * e.conjugate()], [-s * e, c]])


def conjugate_hamiltonian(h: Operator2, t: TransformParams) -> Operator2:
    """F^dagger h F, Hermitized to strip round-off."""
    f = transform_f(t).matrix
    m = f.conj().T @ h.matrix @ f
    return Operator2(0.5 * (m + m.conj().T))


def transformed_initial_state(t: TransformParams) -> QubitState:
    """F(theta, phi)|e>: the lab-frame state corresponding to |e> in the rotated frame."""
    col = transform_f(t).matrix[:, 0]
    return QubitState.normalized(col[0], col[1])


def expand_transformed_coefficients(R_nl: float, v: float, t: TransformParams) -> Tuple[float, float, float]:
    """Pauli coefficients (c_z, c_x, c_y) of the rotated Hamiltonian as a closed-form expansion.

    This is the printed expansion kept verbatim for cross-checking
    :func:`conjugate_hamiltonian`; it is not used by the integrators.
    """
    th, ph = t.theta, t.phi
    c, s = math.cos(th), math.sin(th)
    c_z = R_nl / 2 * c ** 2 - v * c * s * math.cos(ph) - R_nl / 2 * s ** 2
    c_x = v / 2 * c ** 2 + R_nl * c * s * math.cos(ph) - v / 2 * s ** 2 * math.cos(2 * ph)
    c_y = R_nl * c * s * math.sin(ph) - v / 2 * s ** 2 * math.sin(2 * ph)
    return (c_z, c_x, c_y)


def global_phase_distance(s1: QubitState, s2: QubitState) -> float:
    """1 - |<s1|s2>|^2; zero iff the states agree up to a global phase."""
    return max(0.0, 1.0 - s1.fidelity(s2))
