"""Symmetric positive (semi)definite linear algebra.

Generalized eigendecomposition of a pencil (H, Gamma) by Cholesky whitening,
construction of Gamma-orthogonal low-rank projectors, reconstruction errors,
and the minimal-rank rule used by the error certificates.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

__all__ = [
    "SpdMatrix",
    "GeneralizedSpectrum",
    "RankRProjector",
    "generalized_eigendecomposition",
    "build_projector",
    "reconstruction_error",
    "reconstruction_error_matrix",
    "minimal_rank",
    "prior_based_projector",
]

_SYM_RTOL = 1e-12
_EIG_CLAMP_RTOL = 1e-12
_PSD_RTOL = 1e-10
_MAX_CONDITION = 1e12


class SpdMatrix:
    """Dense symmetric matrix, positive definite or semidefinite by use.

    The Cholesky factor is computed lazily and only required when the matrix
    is used as a covariance/precision. Diagnostic matrices only need to be
    positive semidefinite.
    """

    def __init__(self, entries: np.ndarray):
        a = np.asarray(entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        scale = np.abs(a).max() if a.size else 0.0
        if scale > 0 and np.abs(a - a.T).max() > _SYM_RTOL * max(scale, 1.0) * 100:
            raise ValueError("matrix is not symmetric")
        self.entries = 0.5 * (a + a.T)
        self._chol: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, d: int) -> "SpdMatrix":
        return cls(np.eye(d))

    @classmethod
    def diagonal(cls, diag) -> "SpdMatrix":
        return cls(np.diag(np.asarray(diag, dtype=float)))

    def cholesky(self) -> np.ndarray:
        """Lower-triangular factor L with L L^T = entries; strict PD only."""
        if self._chol is None:
            try:
                self._chol = cholesky(self.entries, lower=True)
            except np.linalg.LinAlgError as exc:  # pragma: no cover - scipy raises its own
                raise ValueError("matrix not positive definite") from exc
            except Exception as exc:
                raise ValueError("matrix not positive definite") from exc
        return self._chol

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve entries @ x = b via the Cholesky factorization."""
        return cho_solve((self.cholesky(), True), b)

    def require_psd(self, rtol: float = _PSD_RTOL) -> None:
        """Raise unless all eigenvalues are >= -rtol * ||entries||."""
        w = np.linalg.eigvalsh(self.entries)
        norm = max(abs(w[0]), abs(w[-1]), 1e-300)
        if w[0] < -rtol * norm:
            raise ValueError("matrix is not positive semidefinite")

    def spectral_norm(self) -> float:
        w = np.linalg.eigvalsh(self.entries)
        return float(max(abs(w[0]), abs(w[-1])))

    def condition_number(self) -> float:
        w = np.linalg.eigvalsh(self.entries)
        if w[0] <= 0:
            return np.inf
        return float(w[-1] / w[0])

    def __repr__(self) -> str:
        return f"SpdMatrix(dim={self.dim})"


@dataclass(frozen=True)
class GeneralizedSpectrum:
    """All eigenpairs of a pencil (H, Gamma), eigenvalues descending.

    Columns of ``basis`` are Gamma-orthonormal: basis^T Gamma basis = I.
    """

    eigenvalues: np.ndarray
    basis: np.ndarray
    gamma: SpdMatrix

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def tail_sum(self, r: int) -> float:
        """Sum of eigenvalues strictly beyond rank r."""
        if not 0 <= r <= self.dim:
            raise ValueError(f"rank {r} out of range [0, {self.dim}]")
        return float(np.sum(self.eigenvalues[r:]))

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "rank": self.dim,
            "eigenvalues": self.eigenvalues.tolist(),
            "basis": self.basis.tolist(),
        }

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)

    def save_eigenvalues_csv(self, path) -> None:
        write_eigenvalues_csv(path, self.eigenvalues)


def write_eigenvalues_csv(path, eigenvalues) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "lambda"])
        for i, lam in enumerate(np.asarray(eigenvalues, dtype=float)):
            writer.writerow([i, repr(float(lam))])


@dataclass(frozen=True)
class RankRProjector:
    """Projector P = V V^T Gamma stored by its Gamma-orthonormal basis V."""

    informed_basis: np.ndarray  # (d, r)
    gamma: SpdMatrix
    _gamma_basis: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.asarray(self.informed_basis, dtype=float)
        if v.ndim != 2:
            raise ValueError("informed_basis must be a (d, r) array")
        object.__setattr__(self, "informed_basis", v)
        object.__setattr__(self, "_gamma_basis", self.gamma.entries @ v)

    @property
    def dim(self) -> int:
        return self.informed_basis.shape[0]

    @property
    def rank(self) -> int:
        return self.informed_basis.shape[1]

    def apply(self, x: np.ndarray) -> np.ndarray:
        """P x, vectorized over leading axes of x (shape (..., d))."""
        x = np.asarray(x, dtype=float)
        return (x @ self._gamma_basis) @ self.informed_basis.T

    def apply_complement(self, x: np.ndarray) -> np.ndarray:
        """(I - P) x."""
        x = np.asarray(x, dtype=float)
        return x - self.apply(x)

    def matrix(self) -> np.ndarray:
        return self.informed_basis @ self._gamma_basis.T

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "rank": self.rank,
            "eigenvalues": [],
            "basis": self.informed_basis.tolist(),
        }

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)


def generalized_eigendecomposition(h: SpdMatrix, gamma: SpdMatrix) -> GeneralizedSpectrum:
    """All eigenpairs of the pencil (H, Gamma) via Cholesky whitening.

    With Gamma = L L^T, the symmetric eigenproblem of L^-1 H L^-T is solved
    and eigenvectors are mapped back through L^-T, which yields
    Gamma-orthonormal vectors by construction.
    """
    if h.dim != gamma.dim:
        raise ValueError(f"dimension mismatch: H is {h.dim}, reference is {gamma.dim}")
    try:
        ell = gamma.cholesky()
    except ValueError as exc:
        raise ValueError("reference matrix not positive definite") from exc
    if gamma.condition_number() > _MAX_CONDITION:
        raise ValueError("reference matrix is numerically singular (condition > 1e12)")
    # Whitened matrix L^-1 H L^-T, symmetrized against rounding.
    tmp = solve_triangular(ell, h.entries, lower=True)
    white = solve_triangular(ell, tmp.T, lower=True)
    white = 0.5 * (white + white.T)
    w, u = np.linalg.eigh(white)
    w = w[::-1].copy()
    u = u[:, ::-1]
    lam1 = max(w[0], 0.0)
    w[w < _EIG_CLAMP_RTOL * lam1] = 0.0
    basis = solve_triangular(ell, u, lower=True, trans="T")
    return GeneralizedSpectrum(eigenvalues=w, basis=basis, gamma=gamma)


def build_projector(spectrum: GeneralizedSpectrum, r: int) -> RankRProjector:
    """Gamma-orthogonal projector onto the span of the r leading eigenvectors."""
    if not 0 <= r <= spectrum.dim:
        raise ValueError(f"rank {r} out of range [0, {spectrum.dim}]")
    return RankRProjector(spectrum.basis[:, :r].copy(), spectrum.gamma)


def reconstruction_error_matrix(p: np.ndarray, h: SpdMatrix, gamma: SpdMatrix) -> float:
    """trace(Gamma^-1 (I - P^T) H (I - P)) for an arbitrary projector matrix."""
    p = np.asarray(p, dtype=float)
    d = h.dim
    if p.shape != (d, d) or gamma.dim != d:
        raise ValueError("dimension mismatch in reconstruction error")
    residual = np.eye(d) - p
    inner = residual.T @ h.entries @ residual
    return float(np.trace(gamma.solve(inner)))


def reconstruction_error(p: RankRProjector, h: SpdMatrix, gamma: SpdMatrix) -> float:
    """Reconstruction error of a stored rank-r projector against (H, Gamma)."""
    if p.dim != h.dim:
        raise ValueError("dimension mismatch in reconstruction error")
    return reconstruction_error_matrix(p.matrix(), h, gamma)


def minimal_rank(spectrum: GeneralizedSpectrum, kappa: float, epsilon: float) -> int:
    """Smallest r with (kappa/2) * sum_{i>r} lambda_i <= epsilon."""
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    lam = spectrum.eigenvalues
    # tails[r] = sum of eigenvalues strictly beyond rank r
    tails = np.concatenate([np.cumsum(lam[::-1])[::-1], [0.0]])
    ok = 0.5 * kappa * tails <= epsilon
    return int(np.argmax(ok))


def prior_based_projector(gamma: SpdMatrix, r: int) -> RankRProjector:
    """Euclidean-orthogonal projector onto the leading eigenspace of Gamma^-1.

    Ties between repeated eigenvalues are broken by the eigensolver's
    deterministic ordering.
    """
    if not 0 <= r <= gamma.dim:
        raise ValueError(f"rank {r} out of range [0, {gamma.dim}]")
    w, u = np.linalg.eigh(gamma.entries)
    # smallest eigenvalues of Gamma are the largest of Gamma^-1
    basis = u[:, :r].copy()
    return RankRProjector(basis, SpdMatrix.identity(gamma.dim))
