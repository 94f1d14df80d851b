"""Two-mode Gaussian states: constructors, normal-mode transforms, entanglement.

Conventions: hbar = m = omega = 1, phase-space ordering ``(Q1, Q2, P1, P2)``
and covariance ``sigma_ij = <{xi_i, xi_j}>/2 - <xi_i><xi_j>`` so that the
vacuum is ``I/2``. The normal modes are ``x_{+/-} = (Q1 +/- Q2)/sqrt(2)``
(same for momenta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError

SYMMETRY_RTOL = 1e-12
PHYSICAL_ATOL = 1e-9

_H = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)
# orthogonal, symmetric and involutive: lab <-> (x+, x-, p+, p-)
NORMAL_ROTATION = np.block([[_H, np.zeros((2, 2))], [np.zeros((2, 2)), _H]])


def symplectic_form(n_modes: int = 2) -> np.ndarray:
    """Return Sigma = [[0, 1], [-1, 0]] in block form for ``(q..., p...)`` ordering."""
    eye = np.eye(n_modes)
    zero = np.zeros((n_modes, n_modes))
    return np.block([[zero, eye], [-eye, zero]])


@dataclass(frozen=True)
class ModeCovariance:
    """Second moments of a single normal mode."""

    sxx: float
    sxp: float
    spp: float
    label: str = "+"

    @property
    def det(self) -> float:
        return self.sxx * self.spp - self.sxp * self.sxp

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.sxx, self.sxp], [self.sxp, self.spp]])

    @classmethod
    def from_matrix(cls, m, label="+") -> "ModeCovariance":
        m = np.asarray(m, dtype=float)
        return cls(float(m[0, 0]), float(0.5 * (m[0, 1] + m[1, 0])), float(m[1, 1]), label)

    def is_physical(self, atol: float = PHYSICAL_ATOL) -> bool:
        return self.sxx > 0 and self.spp > 0 and self.det >= 0.25 - atol

    def ellipse(self):
        """Principal variances (ascending) and the orientation of the minor axis.

        The angle is measured in the (x, p) plane from the x axis, in (-pi/2, pi/2].
        """
        w, v = np.linalg.eigh(self.as_matrix())
        angle = math.atan2(v[1, 0], v[0, 0])
        if angle <= -math.pi / 2:
            angle += math.pi
        elif angle > math.pi / 2:
            angle -= math.pi
        return (float(w[0]), float(w[1])), angle


@dataclass(frozen=True)
class MomentVector:
    mean_x: float = 0.0
    mean_p: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.mean_x, self.mean_p])


@dataclass(frozen=True)
class EntanglementResult:
    log_negativity: float
    symplectic_spectrum: tuple
    """Partial-transpose symplectic spectrum as ``(-nu2, -nu1, nu1, nu2)``."""

    @property
    def min_eigenvalue(self) -> float:
        return self.symplectic_spectrum[2]


def as_covariance(cov, check_symmetry: bool = True) -> np.ndarray:
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (4, 4):
        raise DomainError(f"covariance must be 4x4, got shape {cov.shape}")
    if not np.all(np.isfinite(cov)):
        raise DomainError("covariance has non-finite entries")
    if check_symmetry:
        scale = max(np.max(np.abs(cov)), 1e-300)
        if np.max(np.abs(cov - cov.T)) > SYMMETRY_RTOL * scale:
            raise DomainError("covariance is not symmetric")
    return 0.5 * (cov + cov.T)


# -- constructors --------------------------------------------------------------


def thermal_variance(theta: float, frequency: float = 1.0) -> float:
    """Position variance ``coth(w/2theta)/(2w)`` of a thermal oscillator."""
    if theta < 0:
        raise DomainError(f"theta must be >= 0, got {theta}")
    if theta == 0:
        return 0.5 / frequency
    return 0.5 / (frequency * math.tanh(frequency / (2.0 * theta)))


def make_vacuum() -> np.ndarray:
    return 0.5 * np.eye(4)


def make_thermal_product(theta: float) -> np.ndarray:
    """Product of two thermal states at dimensionless temperature ``theta``."""
    if theta < 0 or not math.isfinite(theta):
        raise DomainError(f"theta must be finite and >= 0, got {theta}")
    return thermal_variance(theta) * np.eye(4)


def make_two_mode_squeezed(r: float) -> np.ndarray:
    """Two-mode squeezed vacuum with squeezing parameter ``r``."""
    c = 0.5 * math.cosh(2.0 * r)
    s = 0.5 * math.sinh(2.0 * r)
    return np.array([
        [c, s, 0.0, 0.0],
        [s, c, 0.0, 0.0],
        [0.0, 0.0, c, -s],
        [0.0, 0.0, -s, c],
    ])


def gibbs_covariance(kappa0: float, theta: float) -> np.ndarray:
    """Thermal state of the statically coupled pair, built from its normal modes.

    Requires ``|kappa0| < 1`` so that both normal-mode frequencies are real.
    """
    if not abs(kappa0) < 1:
        raise DomainError(f"kappa0 must satisfy |kappa0| < 1, got {kappa0}")
    modes = []
    for sign, label in ((1.0, "+"), (-1.0, "-")):
        w = math.sqrt(1.0 + sign * kappa0)
        vx = thermal_variance(theta, w)
        modes.append(ModeCovariance(vx, 0.0, vx * w * w, label))
    return normal_to_lab(*modes)


# -- normal modes --------------------------------------------------------------


def lab_to_normal(cov):
    """Split a lab covariance into the two normal-mode blocks.

    Returns ``(plus, minus, cross)`` where ``cross`` is the 2x2 correlation
    block between ``(x+, p+)`` (rows) and ``(x-, p-)`` (columns).
    """
    n = NORMAL_ROTATION @ as_covariance(cov) @ NORMAL_ROTATION.T
    plus = ModeCovariance(n[0, 0], n[0, 2], n[2, 2], "+")
    minus = ModeCovariance(n[1, 1], n[1, 3], n[3, 3], "-")
    cross = np.array([[n[0, 1], n[0, 3]], [n[2, 1], n[2, 3]]])
    return plus, minus, cross


def normal_to_lab(plus: ModeCovariance, minus: ModeCovariance, cross=None) -> np.ndarray:
    n = np.zeros((4, 4))
    n[0, 0], n[0, 2], n[2, 2] = plus.sxx, plus.sxp, plus.spp
    n[1, 1], n[1, 3], n[3, 3] = minus.sxx, minus.sxp, minus.spp
    n[2, 0] = n[0, 2]
    n[3, 1] = n[1, 3]
    if cross is not None:
        c = np.asarray(cross, dtype=float)
        n[0, 1], n[0, 3], n[2, 1], n[2, 3] = c[0, 0], c[0, 1], c[1, 0], c[1, 1]
        n[1, 0], n[3, 0], n[1, 2], n[3, 2] = c[0, 0], c[0, 1], c[1, 0], c[1, 1]
    return NORMAL_ROTATION @ n @ NORMAL_ROTATION.T


def moments_to_lab(plus: MomentVector, minus: MomentVector) -> np.ndarray:
    v = np.array([plus.mean_x, minus.mean_x, plus.mean_p, minus.mean_p])
    return NORMAL_ROTATION @ v


# -- symplectic invariants -----------------------------------------------------


def _two_mode_invariants(cov: np.ndarray):
    a = cov[np.ix_([0, 2], [0, 2])]
    b = cov[np.ix_([1, 3], [1, 3])]
    c = cov[np.ix_([0, 2], [1, 3])]
    return np.linalg.det(a), np.linalg.det(b), np.linalg.det(c), np.linalg.det(cov)


def _symplectic_pair(delta: float, det: float):
    # nu_-^2 via the product form avoids cancellation when nu_+ >> nu_-
    disc = math.sqrt(max(delta * delta - 4.0 * det, 0.0))
    big = 0.5 * (delta + disc)
    small = det / big if big > 0 else 0.0
    return math.sqrt(max(small, 0.0)), math.sqrt(max(big, 0.0))


def symplectic_eigenvalues(cov) -> np.ndarray:
    """Symplectic eigenvalues ``(nu_1 <= nu_2)`` of a two-mode covariance."""
    cov = as_covariance(cov)
    da, db, dc, det = _two_mode_invariants(cov)
    return np.array(_symplectic_pair(da + db + 2.0 * dc, det))


def symplectic_spectrum_eig(cov) -> np.ndarray:
    """Eigenvalues of ``-i Sigma sigma`` (sorted real parts); a direct check."""
    cov = as_covariance(cov)
    ev = np.linalg.eigvals(-1j * symplectic_form(2) @ cov)
    return np.sort(ev.real)


def heisenberg_margin(cov) -> float:
    """Smallest symplectic eigenvalue minus the vacuum value 1/2."""
    return float(symplectic_eigenvalues(cov)[0] - 0.5)


def purity(cov) -> float:
    return float(1.0 / (4.0 * math.sqrt(np.linalg.det(as_covariance(cov)))))


def partial_transpose(cov) -> np.ndarray:
    """Time reversal of the second oscillator: flip the sign of P2."""
    flip = np.diag([1.0, 1.0, 1.0, -1.0])
    return flip @ as_covariance(cov) @ flip


def log_negativity(cov, atol: float = PHYSICAL_ATOL) -> EntanglementResult:
    """Logarithmic negativity of a two-mode Gaussian state.

    Raises
    ------
    DomainError
        If the covariance violates the uncertainty relation
        ``nu_min >= 1/2`` by more than ``atol``.
    """
    cov = as_covariance(cov)
    da, db, dc, det = _two_mode_invariants(cov)
    nu_min, _ = _symplectic_pair(da + db + 2.0 * dc, det)
    if nu_min < 0.5 - atol:
        # the closed form loses half the digits for near-degenerate pure states
        nu_min = float(np.min(np.abs(symplectic_spectrum_eig(cov))))
    if nu_min < 0.5 - atol:
        raise DomainError(
            f"covariance is unphysical: smallest symplectic eigenvalue {nu_min:.12g} < 1/2"
        )
    delta_pt = da + db - 2.0 * dc
    t1, t2 = _symplectic_pair(delta_pt, det)
    if (t2 - t1) < 1e-4 * (t1 + t2):
        # near-degenerate pair: the discriminant cancels, use the direct spectrum
        spec = np.sort(np.abs(symplectic_spectrum_eig(partial_transpose(cov))))
        t1, t2 = float(spec[0]), float(spec[-1])
    en = 0.0
    for nu in (t1, t2):
        # values within rounding of 1/2 count as separable
        if 2.0 * nu < 1.0 - 1e-12:
            en -= math.log2(2.0 * nu)
    return EntanglementResult(en, (-t2, -t1, t1, t2))


# -- local operations (test support) -------------------------------------------


def local_symplectic(r1: float, phi1: float, r2: float, phi2: float) -> np.ndarray:
    """Product of single-mode rotation-squeeze-rotation maps on each oscillator."""
    def single(r, phi):
        rot = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
        sq = np.diag([math.exp(-r), math.exp(r)])
        return rot @ sq @ rot.T

    s1, s2 = single(r1, phi1), single(r2, phi2)
    out = np.zeros((4, 4))
    out[np.ix_([0, 2], [0, 2])] = s1
    out[np.ix_([1, 3], [1, 3])] = s2
    return out


def transform(cov, s: Optional[np.ndarray]) -> np.ndarray:
    return s @ np.asarray(cov, dtype=float) @ s.T
