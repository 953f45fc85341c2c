"""Point observations to the truncated Gaussian sequence model.

Observations ``Y_i = Af(x_i) + xi_i`` on an equispaced design are projected
on the conjugate basis with the empirical inner product

    <g, h>_d = (1/n) sum_i g(x_i) h(x_i),

giving ``U_k = a_k f_k + R_k + zeta_k / sqrt(n)`` for ``k = 1..n-1``. The
remainder ``R_k`` collects the coefficients ``j >= n`` that alias onto ``k``.

The sine basis is discretely orthonormal on ``x_i = i/n``; the Volterra
conjugate basis ``sqrt(2) sin((k - 1/2) pi x)`` on ``x_i = (i - 1/2)/n``.
Both projections are real-to-real trigonometric transforms (DST-I and DST-IV
respectively), which is what the fast path uses.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import fft, special

from .svd_operators import (
    DomainError,
    OperatorSpec,
    Regime,
    SignalCoefficients,
)


class GridFamily(str, enum.Enum):
    INTEGER = "IntegerGrid"
    HALF_INTEGER = "HalfIntegerGrid"


class PairingError(ValueError):
    """Design grid family does not match the operator's conjugate basis."""


class ConstraintError(ValueError):
    """A smoothness constraint required by the theory is violated."""


@dataclass(frozen=True)
class DesignGrid:
    n: int
    family: GridFamily = GridFamily.INTEGER

    def __post_init__(self):
        object.__setattr__(self, "family", GridFamily(self.family))
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"a design grid needs n >= 2 points, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def points(self) -> np.ndarray:
        i = np.arange(1, self.n + 1, dtype=float)
        if self.family is GridFamily.INTEGER:
            return i / self.n
        return (i - 0.5) / self.n


def make_grid(n: int, family=GridFamily.INTEGER) -> DesignGrid:
    """Design points ``i/n`` (integer grid) or ``(i - 1/2)/n``, ``i = 1..n``."""
    return DesignGrid(n, family)


def paired_family(op: OperatorSpec) -> GridFamily:
    """The grid family on which ``op``'s conjugate basis is discretely orthogonal."""
    return GridFamily.INTEGER if op.uses_sine_basis else GridFamily.HALF_INTEGER


def check_pairing(op: OperatorSpec, grid: DesignGrid) -> None:
    expected = paired_family(op)
    if grid.family is not expected:
        raise PairingError(
            f"{op.kind.value} operator requires {expected.value}, got {grid.family.value}"
        )


def grid_for(op: OperatorSpec, n: int) -> DesignGrid:
    return DesignGrid(n, paired_family(op))


@dataclass(frozen=True)
class Observations:
    grid: DesignGrid
    y: np.ndarray
    noise_sd: float = 1.0
    # Standardised noise xi, kept when the data are synthetic.
    xi: np.ndarray | None = None

    def __post_init__(self):
        y = np.array(self.y, dtype=float).ravel()
        if y.size != self.grid.n:
            raise DomainError(f"expected {self.grid.n} observations, got {y.size}")
        if self.noise_sd < 0:
            raise DomainError("noise_sd must be nonnegative")
        object.__setattr__(self, "y", y)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y"])
            for x, y in zip(self.grid.points, self.y):
                w.writerow([repr(float(x)), repr(float(y))])

    @classmethod
    def from_csv(cls, path, family=None, noise_sd: float = 1.0) -> "Observations":
        """Read an ``x,y`` file; the grid family is inferred unless given."""
        x, y = [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if [h.strip() for h in header] != ["x", "y"]:
                raise ValueError(f"{path}: expected header 'x,y', got {header!r}")
            for row in reader:
                x.append(float(row[0]))
                y.append(float(row[1]))
        n = len(x)
        candidates = [GridFamily(family)] if family is not None else list(GridFamily)
        for fam in candidates:
            grid = DesignGrid(n, fam)
            if np.allclose(grid.points, x, rtol=0, atol=1e-12):
                return cls(grid, np.array(y), noise_sd)
        raise ValueError(f"{path}: x column is not an equispaced design grid")


@dataclass(frozen=True)
class SequenceData:
    """Transformed observations ``U_1..U_{n-1}``; the noise scale is ``1/sqrt(n)``."""

    u: np.ndarray
    n: int

    def __post_init__(self):
        u = np.array(self.u, dtype=float).ravel()
        if u.size != self.n - 1:
            raise DomainError(f"expected {self.n - 1} coordinates, got {u.size}")
        object.__setattr__(self, "u", u)


def discrete_inner(op: OperatorSpec, grid: DesignGrid, j: int, k: int) -> float:
    """``<psi_j, psi_k>_d = (1/n) sum_i psi_j(x_i) psi_k(x_i)``."""
    x = grid.points
    return float(np.mean(op.conjugate_basis(j, x) * op.conjugate_basis(k, x)))


def discrete_gram(op: OperatorSpec, grid: DesignGrid, js, ks) -> np.ndarray:
    """Matrix of ``<psi_j, psi_k>_d`` for ``j`` in ``js`` (rows), ``k`` in ``ks``."""
    x = grid.points
    pj = op.conjugate_basis(np.asarray(js)[:, None], x[None, :])
    pk = op.conjugate_basis(np.asarray(ks)[:, None], x[None, :])
    return pj @ pk.T / grid.n


def orthogonality_defect(op: OperatorSpec, grid: DesignGrid) -> float:
    """``max_{j,k < n} |<psi_j, psi_k>_d - delta_jk|``."""
    idx = np.arange(1, grid.n)
    gram = discrete_gram(op, grid, idx, idx)
    return float(np.max(np.abs(gram - np.eye(grid.n - 1))))


def aliasing_constant(op: OperatorSpec, grid: DesignGrid, blocks: int = 3) -> float:
    """Largest ``|<psi_j, psi_k>_d|`` over ``k < n`` and ``n <= j < (blocks+1) n``.

    For the trigonometric bases implemented here this equals 1.
    """
    ks = np.arange(1, grid.n)
    js = np.arange(grid.n, (blocks + 1) * grid.n)
    return float(np.max(np.abs(discrete_gram(op, grid, js, ks))))


# -- folding ----------------------------------------------------------------
#
# psi_j restricted to the paired grid coincides, up to sign, with one of the
# first n basis functions. fold_coefficients maps a coefficient vector indexed
# by j = 1..K onto that reduced index set.


def alias_of(op: OperatorSpec, n: int, j) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(index, sign)`` with ``psi_j = sign * psi_index`` on the paired grid.

    ``index`` is 1-based and lies in ``1..n``; ``sign`` is 0 where ``psi_j``
    vanishes identically on the grid.
    """
    j = np.asarray(j, dtype=np.int64)
    if op.uses_sine_basis:
        r = j % (2 * n)
        index = np.where(r <= n, r, 2 * n - r)
        sign = np.where(r < n, 1.0, -1.0)
        sign = np.where((r == 0) | (r == n), 0.0, sign)
        index = np.where(sign == 0, n, index)
        return index, sign
    t = (j - 1) % (4 * n)
    zero_based = np.select(
        [t < n, t < 2 * n, t < 3 * n],
        [t, 2 * n - t - 1, t - 2 * n],
        4 * n - t - 1,
    )
    sign = np.where(t < 2 * n, 1.0, -1.0)
    return zero_based + 1, sign


def fold_coefficients(op: OperatorSpec, n: int, c) -> np.ndarray:
    """Fold ``c_1..c_K`` onto ``n`` slots so that sum c_j psi_j = sum g_m psi_m on the grid."""
    c = np.asarray(c, dtype=float)
    index, sign = alias_of(op, n, np.arange(1, c.size + 1))
    return np.bincount(index - 1, weights=sign * c, minlength=n)


def _synthesis(op: OperatorSpec, g: np.ndarray) -> np.ndarray:
    # sum_m g_m psi_m(x_i), i = 1..n, for folded g of length n.
    n = g.size
    if op.uses_sine_basis:
        out = np.zeros(n)
        if n > 1:
            out[:-1] = fft.dst(g[:-1], type=1) * (math.sqrt(2.0) / 2.0)
        return out
    return fft.dst(g, type=4) * (math.sqrt(2.0) / 2.0)


def signal_on_grid(op: OperatorSpec, coeffs, grid: DesignGrid, method: str = "naive") -> np.ndarray:
    """``sum_j coeffs_j psi_j(x_i)`` at every design point.

    ``method="fast"`` folds the coefficients and applies one trigonometric
    transform; it requires the paired grid. ``"naive"`` sums directly.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if method == "fast":
        check_pairing(op, grid)
        return _synthesis(op, fold_coefficients(op, grid.n, coeffs))
    if method != "naive":
        raise ValueError(f"unknown method {method!r}")
    x = grid.points
    out = np.zeros(grid.n)
    chunk = max(1, 2_000_000 // grid.n)
    for start in range(0, coeffs.size, chunk):
        k = np.arange(start + 1, min(start + chunk, coeffs.size) + 1)
        out += op.conjugate_basis(k[None, :], x[:, None]) @ coeffs[start : start + k.size]
    return out


def analysis(op: OperatorSpec, grid: DesignGrid, values, method: str = "naive") -> np.ndarray:
    """``(1/n) sum_i values_i psi_k(x_i)`` for ``k = 1..n-1``."""
    values = np.asarray(values, dtype=float)
    n = grid.n
    if method == "fast":
        check_pairing(op, grid)
        if op.uses_sine_basis:
            out = fft.dst(values[:-1], type=1)
        else:
            out = fft.dst(values, type=4)[:-1]
        return out * (math.sqrt(2.0) / 2.0) / n
    if method != "naive":
        raise ValueError(f"unknown method {method!r}")
    x = grid.points
    out = np.empty(n - 1)
    chunk = max(1, 2_000_000 // n)
    for start in range(0, n - 1, chunk):
        k = np.arange(start + 1, min(start + chunk, n - 1) + 1)
        out[start : start + k.size] = op.conjugate_basis(k[:, None], x[None, :]) @ values / n
    return out


def project(op: OperatorSpec, obs: Observations, method: str = "naive") -> SequenceData:
    """Sequence-model data ``U_k = (1/n) sum_i Y_i psi_k(x_i)``, ``k < n``."""
    check_pairing(op, obs.grid)
    return SequenceData(analysis(op, obs.grid, obs.y, method), obs.grid.n)


def noise_coordinates(op: OperatorSpec, grid: DesignGrid, xi, method: str = "naive") -> np.ndarray:
    """``zeta_k = n^(-1/2) sum_i xi_i psi_k(x_i)``, recomputed from stored noise."""
    return analysis(op, grid, xi, method) * math.sqrt(grid.n)


def measured_remainder(op: OperatorSpec, f: SignalCoefficients, grid: DesignGrid, k, method: str = "naive"):
    """Aliasing remainder ``R_k = <A f^r, psi_k>_d`` with ``f^r`` the coefficients ``j >= n``.

    ``k`` may be a scalar or an array of indices in ``1..n-1``.
    """
    n = grid.n
    kk = np.atleast_1d(np.asarray(k))
    if np.any(kk < 1) or np.any(kk >= n):
        raise DomainError(f"remainder index must satisfy 1 <= k < n = {n}")
    tail = f.padded(max(f.K, n))
    tail[: n - 1] = 0.0
    c = op.singular_values(np.arange(1, tail.size + 1)) * tail
    r = analysis(op, grid, signal_on_grid(op, c, grid, method), method)[kk - 1]
    return float(r[0]) if np.ndim(k) == 0 else r


def remainder_bound(op: OperatorSpec, beta: float, K_norm: float, n: int) -> float:
    """Explicit upper bound on ``sup_{k<n} R_k^2`` over ``{f : ||f||_beta <= K_norm}``.

    Mild operators (``a_j <= j^-p``): ``K_norm^2 n^(-2(beta+p)) zeta(2(beta+p))``,
    which needs ``beta + p > 1/2``. Extreme operators (``a_j <= exp(-p j)``):
    ``K_norm^2 exp(-2pn) / (1 - exp(-2p))``.
    """
    if op.regime is Regime.MILD:
        q = 2.0 * (beta + op.p)
        if q <= 1.0:
            raise ConstraintError(
                f"beta + p = {beta + op.p:g} must exceed 1/2 to control the aliasing remainder"
            )
        return K_norm**2 * n ** (-q) * float(special.zeta(q, 1))
    return K_norm**2 * math.exp(-2.0 * op.p * n) / -math.expm1(-2.0 * op.p)
