"""Dense multi-qudit linear algebra.

Permutations are tuples of 0-based images, ``pi[i] = pi(i)``.  Qudit positions
are 0-based as well.  Every routine works on dense ``complex128`` arrays and
refuses to build anything larger than ``MAX_DIM`` x ``MAX_DIM``.
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionOverflowError

MAX_DIM = 4096
DEFAULT_MAX_N = 6

Permutation = tuple


def check_dim(d: int, n: int) -> int:
    """Return d**n, raising if the dense cap is exceeded."""
    if d < 1 or n < 0:
        raise ValueError(f"need d >= 1 and n >= 0, got d={d}, n={n}")
    dim = d**n
    if dim > MAX_DIM:
        raise DimensionOverflowError(f"d^n = {d}^{n} = {dim} exceeds dense cap {MAX_DIM}")
    return dim


def kron(*mats) -> np.ndarray:
    """Kronecker product of any number of matrices (left to right)."""
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, np.asarray(m))
    return out


def kron_power(a: np.ndarray, n: int) -> np.ndarray:
    a = np.asarray(a)
    check_dim(a.shape[0], n)
    return kron(*([a] * n))


# ---------------------------------------------------------------- permutations

def inverse(pi: Sequence[int]) -> Permutation:
    inv = [0] * len(pi)
    for i, p in enumerate(pi):
        inv[p] = i
    return tuple(inv)


def compose(pi: Sequence[int], sigma: Sequence[int]) -> Permutation:
    """(pi o sigma)(i) = pi(sigma(i))."""
    return tuple(pi[s] for s in sigma)


def _validate_perm(pi: Sequence[int]) -> None:
    if sorted(pi) != list(range(len(pi))):
        raise ValueError(f"not a permutation of 0..{len(pi) - 1}: {pi}")


def permutation_index(pi: Sequence[int], d: int) -> np.ndarray:
    """Index map of W_pi: W_pi e_j = e_{...}; row j of W_pi holds its 1 in column idx[j].

    Basis state |x_0 ... x_{n-1}> is sent to the state whose position pi(i)
    carries x_i.
    """
    _validate_perm(pi)
    n = len(pi)
    check_dim(d, n)
    grid = np.arange(d**n).reshape((d,) * n) if n else np.arange(1)
    if n == 0:
        return grid
    return grid.transpose(inverse(pi)).ravel()


def permutation_operator(pi: Sequence[int], d: int) -> np.ndarray:
    idx = permutation_index(pi, d)
    return np.eye(idx.size, dtype=complex)[idx]


def conjugate_by_permutation(a: np.ndarray, pi: Sequence[int], d: int) -> np.ndarray:
    """W_pi A W_pi^dagger without forming W_pi."""
    idx = permutation_index(pi, d)
    return a[np.ix_(idx, idx)]


# ---------------------------------------------------------- symmetric subspace

def sym_dim(d: int, n: int) -> int:
    """Dimension of the symmetric subspace of (C^d)^(x n)."""
    if d < 1 or n < 0:
        raise ValueError(f"need d >= 1 and n >= 0, got d={d}, n={n}")
    return math.comb(n + d - 1, d - 1)


@lru_cache(maxsize=32)
def _sym_projector_cached(d: int, n: int) -> np.ndarray:
    dim = d**n
    proj = np.zeros((dim, dim))
    rows = np.arange(dim)
    for pi in itertools.permutations(range(n)):
        proj[rows, permutation_index(pi, d)] += 1.0
    proj /= math.factorial(n)
    proj = proj.astype(complex)
    proj.setflags(write=False)
    return proj


def sym_projector(d: int, n: int, max_n: int = DEFAULT_MAX_N) -> np.ndarray:
    """Average of all n! permutation operators (read-only, cached)."""
    if d < 2 or n < 0:
        raise ValueError(f"need d >= 2 and n >= 0, got d={d}, n={n}")
    if n > max_n:
        raise DimensionOverflowError(f"n={n} exceeds symmetric projector cap {max_n}")
    check_dim(d, n)
    return _sym_projector_cached(d, n)


def twirl(a: np.ndarray, n: int, d: int) -> np.ndarray:
    """Average of W_pi A W_pi^dagger over S_n; the result is exchangeable."""
    out = np.zeros_like(a, dtype=complex)
    for pi in itertools.permutations(range(n)):
        out += conjugate_by_permutation(a, pi, d)
    return out / math.factorial(n)


def exchangeability_defect(a: np.ndarray, n: int, d: int) -> float:
    """Largest |W A - A W| entry over adjacent transpositions (they generate S_n)."""
    worst = 0.0
    for i in range(n - 1):
        pi = list(range(n))
        pi[i], pi[i + 1] = pi[i + 1], pi[i]
        worst = max(worst, float(np.max(np.abs(conjugate_by_permutation(a, pi, d) - a))))
    return worst


# ------------------------------------------------------------- partial traces

def partial_trace(a: np.ndarray, traced: Iterable[int], d: int) -> np.ndarray:
    """Trace out the (0-based) qudit positions in ``traced``.

    Tracing every position returns a 1x1 matrix.
    """
    a = np.asarray(a)
    dim = a.shape[0]
    n = round(math.log(dim, d)) if dim > 1 else 0
    if d**n != dim or a.shape != (dim, dim):
        raise ValueError(f"matrix of shape {a.shape} is not an operator on qudits of dimension {d}")
    traced = sorted(set(traced))
    for t in traced:
        if not 0 <= t < n:
            raise IndexError(f"position {t} out of range for {n} qudits")
    kept = [i for i in range(n) if i not in traced]
    tensor = a.reshape((d,) * (2 * n))
    row = list(range(n))
    col = [n + i if i in kept else i for i in range(n)]
    out = [row[i] for i in kept] + [col[i] for i in kept]
    res = np.einsum(tensor, row + col, out)
    m = d ** len(kept)
    return np.asarray(res).reshape(m, m)


def sym_partial_trace(a: np.ndarray, n: int, k: int, d: int) -> np.ndarray:
    """Tr_{n->k}(A): trace the first n-k qudits of Pi_sym A."""
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
    return partial_trace(sym_projector(d, n) @ a, range(n - k), d)


# ----------------------------------------------------------------------- Haar

def haar_states(d: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` Haar-random unit vectors in C^d, one per row."""
    if d < 2:
        raise ValueError("d must be >= 2")
    z = rng.standard_normal((size, d)) + 1j * rng.standard_normal((size, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def haar_state(d: int, rng: np.random.Generator) -> np.ndarray:
    return haar_states(d, 1, rng)[0]


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar unitary via QR of a Ginibre matrix with phase correction."""
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph
