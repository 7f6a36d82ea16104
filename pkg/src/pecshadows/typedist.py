"""Type vectors, their symmetrised states, and the success-conditioned type law.

A type vector ``e`` counts how many tensor factors of a term in the expansion
of rho^(x n) sit in each eigenstate.  Conditioned on a successful joint
measurement the type follows the exact law D with mass lambda^e / Z.  D is
compared against the product-of-geometrics law D', whose only defect is that
it can put mass on e_1 < 0.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import tensor
from .errors import ContractViolation, DimensionOverflowError, InvalidDeviationError, SpectrumOrderError

ENUM_CAP = 10**6
GEOM_COORD_TOL = 1e-14
GAP_TOL = 1e-12


# ------------------------------------------------------------ type vectors

def enumerate_types(d: int, n: int, cap: int = ENUM_CAP) -> np.ndarray:
    """All compositions of n into d non-negative parts, one per row.

    Rows run from (n, 0, ..., 0) down to (0, ..., 0, n).
    """
    count = tensor.sym_dim(d, n)
    if count > cap:
        raise DimensionOverflowError(f"{count} type vectors for d={d}, n={n} exceeds cap {cap}")
    rows = []
    for bars in itertools.combinations(range(n + d - 1), d - 1):
        edges = (-1,) + bars + (n + d - 1,)
        rows.append([edges[i + 1] - edges[i] - 1 for i in range(d)])
    return np.array(rows[::-1], dtype=int).reshape(count, d)


def multinomial(e) -> int:
    out = math.factorial(int(sum(e)))
    for x in e:
        out //= math.factorial(int(x))
    return out


def z_of_type(e) -> float:
    """Success probability of sigma(e): e! / n!."""
    return 1.0 / multinomial(e)


def _arrangement(e) -> list[int]:
    return [i for i, c in enumerate(e) for _ in range(int(c))]


def sigma_state(e, basis: np.ndarray) -> np.ndarray:
    """Permutation-symmetrised product of eigenprojectors with occupation e."""
    basis = np.asarray(basis)
    d = basis.shape[0]
    seq = _arrangement(e)
    tensor.check_dim(d, len(seq))
    projs = [np.outer(basis[:, i], basis[:, i].conj()) for i in range(d)]
    prod = tensor.kron(*[projs[i] for i in seq])
    return tensor.twirl(prod, len(seq), d)


def m1_of_type(e, basis: np.ndarray) -> np.ndarray:
    e = np.asarray(e, dtype=float)
    basis = np.asarray(basis)
    return (basis * (e / e.sum())) @ basis.conj().T


def _swap_perm(d: int) -> np.ndarray:
    return tensor.permutation_index((1, 0), d)


def m2_from_weights(weights: np.ndarray, basis: np.ndarray, n: int) -> np.ndarray:
    """2 Pi_sym (sum_ij W_ij Phi_i (x) Phi_j) / (n(n-1)) for a symmetric weight matrix W."""
    basis = np.asarray(basis)
    d = basis.shape[0]
    diag = np.diag(np.asarray(weights, dtype=complex).ravel())
    sym = diag + diag[_swap_perm(d)]  # (I + SWAP) X = 2 Pi_sym X
    vv = np.kron(basis, basis)
    return vv @ sym @ vv.conj().T / (n * (n - 1))


def pair_weights(e) -> np.ndarray:
    """e_i e_j off the diagonal, binom(e_k, 2) on it."""
    e = np.asarray(e, dtype=float)
    w = np.outer(e, e)
    np.fill_diagonal(w, e * (e - 1) / 2)
    return w


def m2_of_type(e, basis: np.ndarray) -> np.ndarray:
    """Closed-form two-copy marginal of sigma(e), normalised to unit trace."""
    n = int(np.sum(e))
    if n < 2:
        raise ContractViolation("m2_of_type needs n >= 2")
    return m2_from_weights(pair_weights(e), basis, n)


def observable_overlaps(o: np.ndarray, basis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """O_i = Tr(O Phi_i) and O_ij = Tr(O Phi_i O Phi_j) = |<i|O|j>|^2."""
    in_basis = np.asarray(basis).conj().T @ np.asarray(o) @ np.asarray(basis)
    return np.real(np.diag(in_basis)).copy(), np.abs(in_basis) ** 2


# ------------------------------------------------------------ distributions

@dataclass(frozen=True, eq=False)
class TypeDistribution:
    """Tabulated law over type vectors.

    For the geometric kind the table is truncated per coordinate and
    ``truncation_error`` is the total missing mass.
    """

    kind: str
    spectrum: np.ndarray
    n: int
    types: np.ndarray
    masses: np.ndarray
    truncation_error: float = 0.0

    def mean(self) -> np.ndarray:
        return self.masses @ self.types

    def covariance(self) -> np.ndarray:
        centred = self.types - self.mean()
        return (centred.T * self.masses) @ centred

    def prob_e1_negative(self) -> float:
        return float(self.masses[self.types[:, 0] < 0].sum())

    def lookup(self) -> dict[tuple, float]:
        return {tuple(int(x) for x in t): float(m) for t, m in zip(self.types, self.masses)}

    def conditioned_on_support(self) -> "TypeDistribution":
        """Restrict to e_1 >= 0 and renormalise."""
        keep = self.types[:, 0] >= 0
        m = self.masses[keep]
        return TypeDistribution(self.kind, self.spectrum, self.n, self.types[keep], m / m.sum(),
                                self.truncation_error)


def type_weights(lam, types: np.ndarray) -> np.ndarray:
    """lambda^e for every row of ``types`` (0^0 = 1)."""
    lam = np.asarray(lam, dtype=float)
    return np.prod(lam[None, :] ** types, axis=1)


def exact_dist(lam, n: int, cap: int = ENUM_CAP) -> TypeDistribution:
    lam = np.asarray(lam, dtype=float)
    types = enumerate_types(lam.size, n, cap)
    w = type_weights(lam, types)
    return TypeDistribution("exact", lam, n, types, w / w.sum())


def _check_gap(lam: np.ndarray) -> None:
    if lam.size > 1 and np.any(lam[0] - lam[1:] <= GAP_TOL):
        raise SpectrumOrderError("geometric approximation needs lambda_1 > lambda_i for all i >= 2")


def _coord_cutoff(q: float, tol: float) -> int:
    """Largest value kept for a geometric coordinate with ratio q."""
    if q <= 0:
        return 0
    m = max(0, math.ceil(math.log(tol) / math.log(q)) - 1)
    while q ** (m + 1) >= tol:
        m += 1
    return m


def geom_dist(lam, n: int, tol: float = GEOM_COORD_TOL, cap: int = ENUM_CAP) -> TypeDistribution:
    lam = np.asarray(lam, dtype=float)
    _check_gap(lam)
    q = lam[1:] / lam[0]
    cuts = [_coord_cutoff(float(x), tol) for x in q]
    count = math.prod(c + 1 for c in cuts)
    if count > cap:
        raise DimensionOverflowError(f"geometric table of {count} entries exceeds cap {cap}")
    grids = np.array(list(itertools.product(*[range(c + 1) for c in cuts])), dtype=int)
    grids = grids.reshape(count, lam.size - 1)
    masses = np.prod(q[None, :] ** grids * (1 - q)[None, :], axis=1)
    types = np.column_stack([n - grids.sum(axis=1), grids])
    kept = np.array([q_i ** (c + 1) if q_i > 0 else 0.0 for q_i, c in zip(q, cuts)])
    trunc = float(-np.expm1(np.sum(np.log1p(-kept)))) if kept.size else 0.0
    return TypeDistribution("geometric", lam, n, types, masses, trunc)


def geometric_moments(lam, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form mean and covariance of the full vector e under D'."""
    lam = np.asarray(lam, dtype=float)
    _check_gap(lam)
    l1, tail = lam[0], lam[1:]
    mean_t = tail / (l1 - tail)
    var_t = tail * l1 / (l1 - tail) ** 2
    mean = np.concatenate([[n - mean_t.sum()], mean_t])
    cov = np.zeros((lam.size, lam.size))
    cov[1:, 1:] = np.diag(var_t)
    cov[0, 1:] = cov[1:, 0] = -var_t
    cov[0, 0] = var_t.sum()
    return mean, cov


def tail_count_pmf(lam, upto: int) -> np.ndarray:
    """pmf of S = e_2 + ... + e_d under D' on 0..upto (all-positive convolution)."""
    lam = np.asarray(lam, dtype=float)
    _check_gap(lam)
    pmf = np.zeros(upto + 1)
    pmf[0] = 1.0
    m = np.arange(upto + 1)
    for q in lam[1:] / lam[0]:
        coord = (1 - q) * q**m if q > 0 else (m == 0).astype(float)
        pmf = np.convolve(pmf, coord)[: upto + 1]
    return pmf


def prob_e1_negative(lam, n: int) -> float:
    """Pr_{D'}[e_1 < 0] = Pr[S > n], summed term by term to avoid cancellation."""
    lam = np.asarray(lam, dtype=float)
    _check_gap(lam)
    r = (1 - lam[0]) / lam[0]
    if r <= 0:
        return 0.0
    # Pr[S = j] <= r^j, so terms past n + extra are below 1e-17 relative to r^(n+1)
    extra = math.ceil(math.log(1e-17 * (1 - r)) / math.log(r)) + 1
    pmf = tail_count_pmf(lam, n + extra)
    return float(pmf[n + 1:].sum())


def tv_distance(a: TypeDistribution, b: TypeDistribution) -> float:
    """Total variation distance over the union of both tables."""
    pa, pb = a.lookup(), b.lookup()
    keys = pa.keys() | pb.keys()
    return 0.5 * math.fsum(abs(pa.get(k, 0.0) - pb.get(k, 0.0)) for k in keys)


# ------------------------------------------------------------------ bounds

def delta_bound(lambda1: float, n: int) -> float:
    """Upper bound on Pr_{D'}[e_1 < 0], hence on TV(D, D')."""
    if not lambda1 > 0.5:
        raise InvalidDeviationError(f"lambda_1 = {lambda1} must exceed 1/2")
    return ((1 - lambda1) / lambda1) ** (n + 1) * lambda1 / (2 * lambda1 - 1)


def mean_gap_bound(lam, n: int) -> float:
    """Bound on the l1 mean gap; infinite (vacuous) once Delta >= 1."""
    l1 = float(np.asarray(lam)[0])
    delta = delta_bound(l1, n)
    if delta >= 1:
        return math.inf
    return 2 * delta / (1 - delta) * (n + 1 / (2 * l1 - 1))


def mean_gap(lam, n: int) -> float:
    """Exact ||E_D[e] - E_D'[e]||_1 (D enumerated, D' in closed form)."""
    mean_geo, _ = geometric_moments(lam, n)
    return float(np.abs(exact_dist(lam, n).mean() - mean_geo).sum())


@dataclass(frozen=True, eq=False)
class CovarianceCheck:
    ok: bool
    min_eigenvalue: float
    cov_exact: np.ndarray
    cov_geometric: np.ndarray


def covariance_check(lam, n: int, tol: float = 1e-9) -> CovarianceCheck:
    """Is Cov_D' - (1 - Delta)^2 Cov_D positive semidefinite?"""
    lam = np.asarray(lam, dtype=float)
    cov_d = exact_dist(lam, n).covariance()
    _, cov_g = geometric_moments(lam, n)
    delta = delta_bound(lam[0], n)
    gap = cov_g - (1 - delta) ** 2 * cov_d
    min_eig = float(np.linalg.eigvalsh((gap + gap.T) / 2).min())
    return CovarianceCheck(min_eig >= -tol, min_eig, cov_d, cov_g)


def mixture_variance(lam, basis, o: np.ndarray, n: int) -> float:
    """Var_D[Tr(O M1^e)], enumerated."""
    dist = exact_dist(lam, n)
    o_i, _ = observable_overlaps(o, basis)
    vals = dist.types @ o_i / n
    mu = dist.masses @ vals
    return float(dist.masses @ (vals - mu) ** 2)


def mixture_variance_bound(lambda1: float, o_norm: float, n: int) -> float:
    delta = delta_bound(lambda1, n)
    return 4 * o_norm**2 / (n**2 * (1 - delta) ** 2) * lambda1 * (1 - lambda1) / (2 * lambda1 - 1) ** 2


def cross_term(lam, basis, o: np.ndarray, n: int) -> float:
    """E_D[sum_{i != j} e_i e_j O_ij] / n^2, enumerated."""
    dist = exact_dist(lam, n)
    _, o_ij = observable_overlaps(o, basis)
    off = o_ij - np.diag(np.diag(o_ij))
    vals = np.einsum("ti,ij,tj->t", dist.types, off, dist.types)
    return float(dist.masses @ vals) / n**2


def cross_term_bound(lambda1: float, o_norm: float, n: int, c_delta: float = 1.0) -> float:
    return 2 / n * (1 - lambda1) / (2 * lambda1 - 1) * o_norm**2 + c_delta * delta_bound(lambda1, n)


# ---------------------------------------------------------------- export

def write_distribution_csv(path, exact: TypeDistribution, geometric: TypeDistribution) -> None:
    """Union of both tables: e_1..e_d, mass_exact, mass_geometric (0 where absent)."""
    pe, pg = exact.lookup(), geometric.lookup()
    keys = sorted(pe.keys() | pg.keys(), key=lambda t: (-t[0], t))
    d = exact.types.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"e_{i + 1}" for i in range(d)] + ["mass_exact", "mass_geometric"])
        for k in keys:
            w.writerow(list(k) + [repr(pe.get(k, 0.0)), repr(pg.get(k, 0.0))])


def delta_curve(etas, n_rule: str = "inverse", n_fixed: int = 10, d: int = 2) -> list[dict]:
    """Rows (eta, n, Delta, exact Pr_D'[e_1 < 0]) for depolarised d-level spectra.

    ``n_rule='inverse'`` uses n = ceil(1/eta); ``'fixed'`` uses ``n_fixed``.
    """
    if n_rule not in ("inverse", "fixed"):
        raise ValueError(f"n_rule must be inverse or fixed, got {n_rule!r}")
    rows = []
    for eta in etas:
        if not 0 < eta < 0.5:
            raise InvalidDeviationError(f"eta must lie in (0, 1/2), got {eta}")
        n = math.ceil(1 / eta - 1e-12) if n_rule == "inverse" else n_fixed
        lam = np.concatenate([[1 - eta], np.full(d - 1, eta / (d - 1))])
        rows.append({"eta": float(eta), "n": n, "delta": delta_bound(1 - eta, n),
                     "prob_e1_negative": prob_e1_negative(lam, n)})
    return rows
