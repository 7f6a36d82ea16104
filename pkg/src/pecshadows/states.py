"""Planted instances rho = (1 - eta) phi + eta sigma and bounded observables."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import null_space

from .errors import InfeasibleError, InvalidDeviationError, SpectrumOrderError
from .tensor import haar_unitary

HERMITIAN_TOL = 1e-10
GAP_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SpectralState:
    """Density matrix stored through its eigendecomposition.

    ``eigenvalues`` are sorted non-increasing and ``eigenvectors[:, i]`` is the
    eigenvector for ``eigenvalues[i]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        vecs = np.asarray(self.eigenvectors, dtype=complex)
        d = lam.size
        if vecs.shape != (d, d):
            raise ValueError(f"eigenvector matrix must be {d}x{d}, got {vecs.shape}")
        if np.any(lam < 0) or abs(lam.sum() - 1) > 1e-12:
            raise ValueError("eigenvalues must be non-negative and sum to 1")
        if np.any(np.diff(lam) > 0):
            raise ValueError("eigenvalues must be sorted non-increasing")
        if np.max(np.abs(vecs.conj().T @ vecs - np.eye(d))) > 1e-10:
            raise ValueError("eigenvectors are not orthonormal")
        lam.setflags(write=False)
        vecs.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "eigenvectors", vecs)

    @property
    def d(self) -> int:
        return self.eigenvalues.size

    @property
    def eta(self) -> float:
        return float(1.0 - self.eigenvalues[0])

    @property
    def lambda1(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def principal(self) -> np.ndarray:
        return self.eigenvectors[:, 0]

    @cached_property
    def matrix(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    def projector(self, i: int) -> np.ndarray:
        v = self.eigenvectors[:, i]
        return np.outer(v, v.conj())

    @property
    def principal_projector(self) -> np.ndarray:
        return self.projector(0)

    @property
    def tail_state(self) -> np.ndarray | None:
        """sigma, the normalised part of rho orthogonal to phi (None when pure)."""
        tail = self.eigenvalues[1:]
        weight = tail.sum()
        if self.eta <= 0 or weight <= 0:
            return None
        v = self.eigenvectors[:, 1:]
        return (v * (tail / weight)) @ v.conj().T

    @property
    def is_depolarized(self) -> bool:
        tail = self.eigenvalues[1:]
        return bool(tail.size == 0 or np.ptp(tail) <= 1e-12)

    def require_protocol_valid(self) -> None:
        """Raise unless lambda_1 > 1/2 with a strict gap to lambda_2."""
        if not self.eta < 0.5:
            raise InvalidDeviationError(f"principal deviation {self.eta} must be < 1/2")
        if self.d > 1 and self.eigenvalues[0] - self.eigenvalues[1] <= GAP_TOL:
            raise SpectrumOrderError("top eigenvalue is degenerate")

    # serialisation ------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "eta": self.eta,
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "eigenvectors": [
                [[float(z.real), float(z.imag)] for z in self.eigenvectors[:, i]]
                for i in range(self.d)
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SpectralState":
        lam = np.asarray(doc["eigenvalues"], dtype=float)
        cols = [np.array([complex(re, im) for re, im in vec]) for vec in doc["eigenvectors"]]
        state = cls(lam, np.column_stack(cols))
        if state.d != doc.get("d", state.d):
            raise ValueError("d does not match the number of eigenvalues")
        return state


@dataclass(frozen=True, eq=False)
class Observable:
    matrix: np.ndarray
    infinity_norm: float = field(init=False)
    frobenius_sq: float = field(init=False)

    def __post_init__(self):
        o = np.asarray(self.matrix, dtype=complex)
        if o.ndim != 2 or o.shape[0] != o.shape[1]:
            raise ValueError("observable must be a square matrix")
        if np.max(np.abs(o - o.conj().T)) > HERMITIAN_TOL:
            raise ValueError("observable must be Hermitian")
        o = (o + o.conj().T) / 2
        o.setflags(write=False)
        eig = np.linalg.eigvalsh(o)
        norm = float(np.max(np.abs(eig)))
        if norm > 1 + 1e-10:
            raise ValueError(f"observable has operator norm {norm} > 1")
        object.__setattr__(self, "matrix", o)
        object.__setattr__(self, "infinity_norm", norm)
        object.__setattr__(self, "frobenius_sq", float(np.sum(eig**2)))

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    def expectation(self, a: np.ndarray) -> float:
        """Tr(O A), real part."""
        return float(np.real(np.sum(self.matrix.T * a)))


def _complement_basis(principal: np.ndarray, rng: np.random.Generator | None) -> np.ndarray:
    basis = null_space(principal.conj()[None, :])
    if rng is not None and basis.shape[1] > 1:
        basis = basis @ haar_unitary(basis.shape[1], rng)
    return basis


def planted_instance(
    d: int,
    eta: float,
    principal: np.ndarray | None = None,
    tail_spectrum=None,
    rng: np.random.Generator | None = None,
) -> SpectralState:
    """Build rho = (1 - eta) phi + eta sigma with sigma supported orthogonally to phi.

    ``principal`` defaults to |0> and ``tail_spectrum`` to uniform (depolarised
    noise).  With an ``rng`` the eigenbasis of sigma is rotated at random inside
    the complement of phi.
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    if not 0 <= eta < 0.5:
        raise InvalidDeviationError(f"eta must lie in [0, 1/2), got {eta}")
    if principal is None:
        principal = np.zeros(d, dtype=complex)
        principal[0] = 1
    principal = np.asarray(principal, dtype=complex)
    if principal.shape != (d,) or abs(np.linalg.norm(principal) - 1) > 1e-10:
        raise ValueError("principal must be a unit vector of length d")
    principal = principal / np.linalg.norm(principal)

    tail = np.full(d - 1, 1 / (d - 1)) if tail_spectrum is None else np.asarray(tail_spectrum, float)
    if tail.shape != (d - 1,) or np.any(tail < 0) or abs(tail.sum() - 1) > 1e-10:
        raise ValueError("tail_spectrum must be a probability vector with d-1 entries")
    tail = tail / tail.sum()
    order = np.argsort(-tail, kind="stable")
    tail = tail[order]
    if eta * tail[0] >= 1 - eta:
        raise SpectrumOrderError("a tail eigenvalue reaches the principal eigenvalue")

    comp = _complement_basis(principal, rng)[:, order]
    lam = np.concatenate([[1 - eta], eta * tail])
    lam = lam / lam.sum()
    return SpectralState(lam, np.column_stack([principal, comp]))


def spectral_decompose(m: np.ndarray) -> SpectralState:
    """Eigendecompose a density matrix, eigenvalues sorted descending."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix")
    if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
        raise ValueError("matrix is not Hermitian")
    if abs(np.trace(m).real - 1) > HERMITIAN_TOL:
        raise ValueError("density matrix must have unit trace")
    lam, vecs = np.linalg.eigh((m + m.conj().T) / 2)
    if lam[0] < -HERMITIAN_TOL:
        raise ValueError(f"matrix has negative eigenvalue {lam[0]}")
    lam = np.clip(lam[::-1], 0, None)
    return SpectralState(lam / lam.sum(), vecs[:, ::-1])


def random_density_matrix(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Hilbert-Schmidt random density matrix (optionally of given rank)."""
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_spectral_state(
    d: int, rng: np.random.Generator, lambda1_range: tuple[float, float] | None = None
) -> SpectralState:
    """Random eigenbasis with a random spectrum.

    With ``lambda1_range`` the top eigenvalue is drawn uniformly from it and the
    rest of the weight is split by a flat Dirichlet draw, capped below lambda_1.
    """
    vecs = haar_unitary(d, rng)
    if lambda1_range is None:
        lam = np.sort(rng.dirichlet(np.ones(d)))[::-1]
        return SpectralState(lam / lam.sum(), vecs)
    while True:
        l1 = rng.uniform(*lambda1_range)
        tail = (1 - l1) * rng.dirichlet(np.ones(d - 1))
        if tail.max() < l1 - GAP_TOL:
            lam = np.concatenate([[l1], np.sort(tail)[::-1]])
            return SpectralState(lam / lam.sum(), vecs)


def random_observable(d: int, target_B: float, rng: np.random.Generator) -> Observable:
    """Random Hermitian O with ||O|| <= 1 and Tr(O^2) = target_B.

    Eigenvalues start uniform on [-1, 1]; a common scale factor (with clipping
    at +-1) is tuned by bisection to hit target_B.
    """
    if target_B > d:
        raise InfeasibleError(f"target_B={target_B} exceeds d={d}; not reachable with ||O|| <= 1")
    if target_B <= 0:
        raise ValueError("target_B must be positive")
    u = rng.uniform(-1, 1, size=d)
    u[u == 0] = 1e-3

    def frob(t):
        return float(np.sum(np.clip(t * np.abs(u), 0, 1) ** 2))

    if target_B >= d - 1e-12:
        mu = np.sign(u)
    else:
        lo, hi = 0.0, 1.0
        while frob(hi) < target_B:
            hi *= 2
        for _ in range(200):
            mid = (lo + hi) / 2
            lo, hi = (mid, hi) if frob(mid) < target_B else (lo, mid)
        mu = np.sign(u) * np.clip(hi * np.abs(u), 0, 1)
    v = haar_unitary(d, rng)
    return Observable((v * mu) @ v.conj().T)
