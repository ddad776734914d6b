"""Design-matrix functionals: coherence, capacity, weighted norms, augmentation.

The error-bound constants consume a handful of quantities derived from the
design: mutual coherence mu(X), the support capacity it induces, per-column
norms of several orders, and the 0/1 -> +-1 recoding that absorbs an
intercept column.  They live here together with a thin validated wrapper
that caches column norms between calls.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "DesignMatrix",
    "SparseParam",
    "coherence",
    "capacity",
    "weighted_l1_norm",
    "separability_lower_bound",
    "condition_ratio",
    "binary_augment",
    "load_matrix_csv",
    "load_vector_csv",
]

# relative slack used when clamping coherence into [0, 1]
_MU_CLAMP_TOL = 1e-12


class DesignMatrix:
    """Validated n x p design with cached per-column norms.

    Rejects non-finite entries and all-zero columns (a zero column makes
    coherence and every norm ratio meaningless).  Norms of any positive
    order, plus the sup norm, are computed once and cached; the series
    bounds repeatedly ask for orders 2k with k up to ~60.
    """

    def __init__(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.ndim != 2:
            raise ValueError("design must be a 2-d array")
        n, p = X.shape
        if n < 1 or p < 1:
            raise ValueError("design must have at least one row and one column")
        if not np.all(np.isfinite(X)):
            raise ValueError("design contains non-finite entries")
        sup = np.max(np.abs(X), axis=0)
        if np.any(sup == 0.0):
            j = int(np.argmin(sup > 0.0))
            raise ValueError(f"zero column in design (column {j})")
        self.X = X
        self.n = n
        self.p = p
        self._norms = {math.inf: sup}

    def column_norms(self, s) -> np.ndarray:
        """Per-column ell_s norms ||V_j||_s (s = inf gives the sup norm)."""
        key = float(s)
        cached = self._norms.get(key)
        if cached is not None:
            return cached
        if key == math.inf:
            out = np.max(np.abs(self.X), axis=0)
        elif key > 0:
            out = np.sum(np.abs(self.X) ** key, axis=0) ** (1.0 / key)
        else:
            raise ValueError("norm order must be positive")
        self._norms[key] = out
        return out

    def max_norm(self, s) -> float:
        return float(np.max(self.column_norms(s)))

    def min_norm(self, s) -> float:
        return float(np.min(self.column_norms(s)))

    def __repr__(self):  # pragma: no cover - debugging aid
        return f"DesignMatrix(n={self.n}, p={self.p})"


class SparseParam:
    """A parameter vector whose support is always recomputed from the entries.

    Keeping the support derived (rather than stored) means a coordinate that
    an optimizer drives exactly to zero leaves the support, which is what the
    penalty term counts.
    """

    def __init__(self, values):
        v = np.asarray(values, dtype=float).ravel()
        if not np.all(np.isfinite(v)):
            raise ValueError("parameter contains non-finite entries")
        self.values = v

    @property
    def support(self) -> tuple:
        return tuple(int(j) for j in np.nonzero(self.values)[0])

    @property
    def sparsity(self) -> int:
        return int(np.count_nonzero(self.values))

    def __len__(self):
        return self.values.size

    def __repr__(self):  # pragma: no cover
        return f"SparseParam(sparsity={self.sparsity}, p={len(self)})"


def _as_design(X) -> DesignMatrix:
    return X if isinstance(X, DesignMatrix) else DesignMatrix(X)


def coherence(X) -> float:
    """Mutual coherence mu(X) = max_{i<j} |V_i' V_j| / (||V_i|| ||V_j||).

    Parameters
    ----------
    X : array_like or DesignMatrix
        Design with at least two columns.

    Returns
    -------
    float in [0, 1].  Floating-point excess above 1 within 1e-12 is clamped.
    """
    dm = _as_design(X)
    if dm.p < 2:
        raise ValueError("coherence undefined for single column")
    V = dm.X / dm.column_norms(2)
    G = np.abs(V.T @ V)
    np.fill_diagonal(G, 0.0)
    mu = float(G.max())
    if mu > 1.0:
        if mu > 1.0 + _MU_CLAMP_TOL:
            raise ValueError("coherence exceeded 1 beyond rounding tolerance")
        mu = 1.0
    return mu


def capacity(X, nu: float) -> float:
    """Support budget n(nu) = (1 - nu) (1 + 1/mu); +inf for orthogonal designs."""
    if not 0.0 <= nu <= 1.0:
        raise ValueError("nu must lie in [0, 1]")
    mu = coherence(X)
    if mu == 0.0:
        return math.inf
    return (1.0 - nu) * (1.0 + 1.0 / mu)


def weighted_l1_norm(u, X) -> float:
    """||u||_{1,inf} = sum_j |u_j| * ||V_j||_inf."""
    dm = _as_design(X)
    u = np.asarray(u, dtype=float).ravel()
    if u.size != dm.p:
        raise ValueError("parameter length does not match design width")
    return float(np.abs(u) @ dm.column_norms(math.inf))


def separability_lower_bound(u, X, nu: float):
    """Check ||X u||_2^2 >= nu (1 + mu) sum_j u_j^2 ||V_j||_2^2.

    Valid whenever |spt(u)| <= capacity(X, nu); raises if the support is too
    large for the inequality to be claimed.

    Returns
    -------
    (lhs, rhs, holds) : the two sides and whether lhs >= rhs - 1e-9 |rhs|.
    """
    dm = _as_design(X)
    u = np.asarray(u, dtype=float).ravel()
    spt = int(np.count_nonzero(u))
    if spt > capacity(dm, nu):
        raise ValueError("support exceeds capacity")
    mu = coherence(dm)
    xu = dm.X @ u
    lhs = float(xu @ xu)
    rhs = float(nu * (1.0 + mu) * np.sum(u**2 * dm.column_norms(2) ** 2))
    holds = lhs >= rhs - 1e-9 * abs(rhs)
    return lhs, rhs, holds


def condition_ratio(X) -> float:
    """R(X) = sqrt(n) max_j ||V_j||_2 / min_j ||V_j||_2^2.

    Equals 1 for any matrix with +-1 entries, and scales like 1/t when the
    design is multiplied by t.
    """
    dm = _as_design(X)
    return math.sqrt(dm.n) * dm.max_norm(2) / dm.min_norm(2) ** 2


def binary_augment(X, beta=None):
    """Recode a 0/1 design as a +-1 design with an appended constant column.

    X~ = [2X - 1, 1] and beta~ = (beta/2, sum(beta)/2) keep every row product
    unchanged: X_i' beta = X~_i' beta~.  All augmented columns have
    ||V~_j||_2 = sqrt(n).

    Returns
    -------
    (Xt, bt) : augmented design (n x (p+1)) and augmented parameter, or
        (Xt, None) when no parameter is supplied.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if not np.all((X == 0.0) | (X == 1.0)):
        raise ValueError("augmentation requires 0/1 entries")
    n, p = X.shape
    Xt = np.hstack([2.0 * X - 1.0, np.ones((n, 1))])
    if beta is None:
        return Xt, None
    beta = np.asarray(beta, dtype=float).ravel()
    if beta.size != p:
        raise ValueError("parameter length does not match design width")
    bt = np.append(beta / 2.0, beta.sum() / 2.0)
    return Xt, bt


def load_matrix_csv(path) -> np.ndarray:
    """Read a headerless comma-separated matrix, one row per line."""
    return np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)


def load_vector_csv(path) -> np.ndarray:
    """Read a headerless single-column (or single-row) CSV vector."""
    return np.loadtxt(path, delimiter=",", dtype=float).ravel()
