"""
Fixed points, ordered spectra and normalized oscillatory modes.

Conventions:
- Eigenvalues are ordered by descending real part; real parts equal within
  ``tie_tol = 1e-9·max(1, ‖A‖)`` are tie-broken by ascending imaginary part.
- Right eigenvectors have unit 2-norm. Left eigenvectors are the rows of V⁻¹,
  so w_j^H v_k = δ_jk.
- An oscillatory mode is rotated so its anchor entry e_jᵀv is a negative real
  number (arg = -π). The anchor defaults to the largest-magnitude entry.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg
from scipy.optimize import root

from .core.base import DynamicalSystem, check_state_input
from .core.errors import (
    ContractViolationError,
    InvalidModeError,
    NoConvergenceError,
    RepeatedEigenvalueError,
    StabilityError,
)

logger = logging.getLogger(__name__)

SIMPLICITY_TOL = 1e-8


@dataclass(frozen=True)
class Spectrum:
    """Ordered eigen-decomposition of a fixed-point Jacobian."""
    matrix: np.ndarray
    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray

    @property
    def scale(self) -> float:
        return max(1.0, float(np.linalg.norm(self.matrix, 2)))

    @property
    def hurwitz(self) -> bool:
        return bool(np.all(self.eigenvalues.real < 0))

    @property
    def oscillatory_indices(self) -> List[int]:
        """Positions of eigenvalues with positive imaginary part, in spectrum order."""
        tol = SIMPLICITY_TOL * self.scale
        return [i for i, lam in enumerate(self.eigenvalues) if lam.imag > tol]

    def gap(self, index: int) -> float:
        others = np.delete(self.eigenvalues, index)
        if others.size == 0:
            return np.inf
        return float(np.min(np.abs(others - self.eigenvalues[index])))

    def is_simple(self, index: int) -> bool:
        return self.gap(index) >= SIMPLICITY_TOL * self.scale


@dataclass(frozen=True)
class SpectralMode:
    """
    Normalized complex eigenpair (λ, v, w) with Imag(λ) > 0.

    ``w`` satisfies w^H v = 1; ``w_row = conj(w)`` is the plain-transpose
    dual used by the reduction (w_rowᵀ v = 1).
    """
    eigenvalue: complex
    v: np.ndarray
    w: np.ndarray
    anchor_index: int
    mode_index: int
    eigen_index: int

    @property
    def w_row(self) -> np.ndarray:
        return np.conj(self.w)

    @property
    def frequency(self) -> float:
        return float(self.eigenvalue.imag)

    @property
    def decay(self) -> float:
        return float(self.eigenvalue.real)


def _order(eigenvalues: np.ndarray, tie_tol: float) -> np.ndarray:
    by_real = sorted(range(eigenvalues.size), key=lambda i: (-eigenvalues[i].real, eigenvalues[i].imag))
    order: List[int] = []
    cluster = [by_real[0]]
    for i in by_real[1:]:
        if abs(eigenvalues[i].real - eigenvalues[cluster[-1]].real) <= tie_tol:
            cluster.append(i)
        else:
            order.extend(sorted(cluster, key=lambda k: eigenvalues[k].imag))
            cluster = [i]
    order.extend(sorted(cluster, key=lambda k: eigenvalues[k].imag))
    return np.asarray(order)


def compute_spectrum(A: np.ndarray) -> Spectrum:
    """Eigen-decomposition of ``A`` with the ordering and scaling conventions above."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractViolationError(f"Expected a square matrix, got shape {A.shape}")
    eigenvalues, right = scipy.linalg.eig(A)
    scale = max(1.0, float(np.linalg.norm(A, 2)))
    order = _order(eigenvalues, 1e-9 * scale)
    eigenvalues = eigenvalues[order].astype(complex)
    right = right[:, order].astype(complex)
    right = right / np.linalg.norm(right, axis=0)
    try:
        left = np.linalg.inv(right).conj().T
    except np.linalg.LinAlgError as exc:
        raise RepeatedEigenvalueError("Eigenvector matrix is singular (defective matrix)") from exc
    return Spectrum(matrix=A.copy(), eigenvalues=eigenvalues, right=right, left=left)


def find_fixed_point(
    system: DynamicalSystem,
    guess=None,
    tol: float = 1e-10,
    max_iter: int = 50,
) -> np.ndarray:
    """
    Solve F(x, 0) = 0 near ``guess`` and check that the root is stable.

    Uses ``scipy.optimize.root`` (hybrid Powell with the analytic Jacobian)
    followed by plain Newton polishing down to ``tol``.

    Raises:
        NoConvergenceError: residual above ``tol`` after ``max_iter`` steps
        StabilityError: Jacobian at the root has an eigenvalue with Re ≥ 0
    """
    u0 = system.zero_input()
    x0, _ = check_state_input(system, system.default_guess() if guess is None else guess, u0)

    history: List[float] = [float(np.linalg.norm(system.rhs(x0, u0)))]
    sol = root(
        lambda x: system.rhs(x, u0),
        x0,
        jac=lambda x: system.jac_state(x, u0),
        method="hybr",
        options={"xtol": 1e-14, "maxfev": 200 * (system.dim_state + 1)},
    )
    x = np.asarray(sol.x, dtype=float)
    residual = float(np.linalg.norm(system.rhs(x, u0)))
    history.append(residual)

    for _ in range(max_iter):
        if residual <= tol:
            break
        try:
            step = np.linalg.solve(system.jac_state(x, u0), system.rhs(x, u0))
        except np.linalg.LinAlgError as exc:
            raise NoConvergenceError("Singular Jacobian during fixed-point Newton", history) from exc
        x = x - step
        residual = float(np.linalg.norm(system.rhs(x, u0)))
        history.append(residual)
        if not np.isfinite(residual):
            break

    if not residual <= tol:
        raise NoConvergenceError(
            f"Fixed-point search for {system.name} stalled at |F| = {residual:.3e} (tol {tol:.1e})",
            history,
        )

    eigenvalues = np.linalg.eigvals(system.jac_state(x, u0))
    worst = float(np.max(eigenvalues.real))
    if worst >= 0:
        raise StabilityError(
            f"Fixed point of {system.name} is not stable: max Re(λ) = {worst:.4g}"
        )
    logger.debug("Fixed point found", extra={"stage": "spectrum", "model": system.name,
                                             "iteration": len(history) - 1})
    return x


def oscillatory_mode(
    spectrum: Spectrum,
    mode_index: int = 1,
    anchor_index: Optional[int] = None,
    eigen_index: Optional[int] = None,
) -> SpectralMode:
    """
    Select and normalize an oscillatory eigenpair.

    Args:
        spectrum: Ordered spectrum of the fixed-point Jacobian
        mode_index: 1-based index among eigenvalues with Imag > 0, spectrum order
        anchor_index: Entry fixed to a negative real value (default: largest |v_j|)
        eigen_index: 0-based position in the full spectrum; overrides mode_index

    Raises:
        InvalidModeError: real or negative-imaginary eigenvalue, index out of range
        RepeatedEigenvalueError: eigenvalue not simple
    """
    if eigen_index is None:
        candidates = spectrum.oscillatory_indices
        if not 1 <= mode_index <= len(candidates):
            raise InvalidModeError(
                f"mode_index={mode_index} out of range: spectrum has {len(candidates)} oscillatory mode(s)"
            )
        index = candidates[mode_index - 1]
    else:
        if not 0 <= eigen_index < spectrum.eigenvalues.size:
            raise InvalidModeError(f"eigen_index={eigen_index} out of range")
        index = int(eigen_index)
        if index not in spectrum.oscillatory_indices:
            raise InvalidModeError(
                f"Eigenvalue {spectrum.eigenvalues[index]:.6g} is not oscillatory with positive frequency"
            )
        mode_index = spectrum.oscillatory_indices.index(index) + 1

    if not spectrum.is_simple(index):
        raise RepeatedEigenvalueError(
            f"Eigenvalue {spectrum.eigenvalues[index]:.6g} is repeated (gap {spectrum.gap(index):.2e})"
        )

    v = spectrum.right[:, index].copy()
    w = spectrum.left[:, index].copy()
    anchor = int(np.argmax(np.abs(v))) if anchor_index is None else int(anchor_index)
    if not 0 <= anchor < v.size or abs(v[anchor]) < 1e-12:
        raise InvalidModeError(f"Anchor index {anchor} does not address a nonzero eigenvector entry")

    rotation = np.exp(1j * (-np.pi - np.angle(v[anchor])))
    v = v * rotation
    w = w * rotation
    v[anchor] = -abs(v[anchor])

    return SpectralMode(
        eigenvalue=complex(spectrum.eigenvalues[index]),
        v=v,
        w=w,
        anchor_index=anchor,
        mode_index=int(mode_index),
        eigen_index=index,
    )


def perturb_eigenpair(A: np.ndarray, dA: np.ndarray, mode: SpectralMode) -> Tuple[complex, np.ndarray]:
    """
    First-order change of a simple eigenpair under A → A + dA.

        dλ = w^H dA v
        dv = (A - λI)⁺ (dλ v - dA v) + a v

    with the free constant a chosen so that ‖v + dv‖ = 1 and the anchor
    entry stays real to first order.
    """
    A = np.asarray(A)
    dA = np.asarray(dA)
    if dA.shape != A.shape:
        raise ContractViolationError(f"dA has shape {dA.shape}, expected {A.shape}")

    lam, v, w = mode.eigenvalue, mode.v, mode.w
    scale = max(1.0, float(np.linalg.norm(A, 2)))
    if np.linalg.norm(A @ v - lam * v) > 1e-8 * scale:
        raise ContractViolationError("mode is not an eigenpair of A")
    gaps = np.abs(np.linalg.eigvals(A) - lam)
    if np.sort(gaps)[1] < SIMPLICITY_TOL * scale:
        raise RepeatedEigenvalueError(f"Eigenvalue {lam:.6g} is repeated; first-order formula invalid")

    dA_v = dA @ v
    dlam = complex(np.vdot(w, dA_v))
    shifted = A - lam * np.eye(A.shape[0])
    correction = np.linalg.pinv(shifted) @ (dlam * v - dA_v)

    j = mode.anchor_index
    free = -np.vdot(v, correction).real - 1j * (correction[j] / v[j]).imag
    return dlam, correction + free * v
