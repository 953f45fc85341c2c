"""Forward operators with a closed-form singular value decomposition.

Every operator acts on ``L^2[0, 1]`` and is described by its singular values
``a_k``, its eigenbasis ``phi_k`` (the basis in which the signal is expanded)
and its conjugate basis ``psi_k = A phi_k / a_k`` (the basis of the range).

Four kinds are supported:

- ``Volterra``: ``Af(x) = int_0^x f``; ``a_k = 1 / ((k - 1/2) pi)``,
  ``phi_k = sqrt(2) cos((k - 1/2) pi x)``, ``psi_k = sqrt(2) sin((k - 1/2) pi x)``.
- ``Heat``: solution map of the Dirichlet heat equation at time ``T``;
  ``a_k = exp(-k^2 pi^2 T)`` and ``phi_k = psi_k = sqrt(2) sin(k pi x)``.
- ``SyntheticMild``: ``a_k = k^-p`` on the sine basis.
- ``SyntheticExtreme``: ``a_k = exp(-p k^s)`` on the sine basis.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

SQRT2 = math.sqrt(2.0)

#: Default diffusion time for the heat operator.
DEFAULT_HEAT_TIME = 0.02


class OperatorKind(str, enum.Enum):
    VOLTERRA = "Volterra"
    HEAT = "Heat"
    SYNTHETIC_MILD = "SyntheticMild"
    SYNTHETIC_EXTREME = "SyntheticExtreme"


class Regime(str, enum.Enum):
    MILD = "Mild"
    EXTREME = "Extreme"


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


@dataclass(frozen=True)
class OperatorSpec:
    """A forward operator given through its SVD.

    Use the constructors :meth:`volterra`, :meth:`heat`, :meth:`mild` and
    :meth:`extreme` rather than instantiating directly; they fill in the
    ill-posedness descriptor ``(p, s)`` consistently with ``kind``.
    """

    kind: OperatorKind
    p: float
    s: float = 1.0
    heat_time: float = DEFAULT_HEAT_TIME

    def __post_init__(self):
        object.__setattr__(self, "kind", OperatorKind(self.kind))
        if not self.p > 0:
            raise DomainError(f"ill-posedness exponent p must be positive, got {self.p}")
        if self.s < 1:
            raise DomainError(f"shape s must be >= 1, got {self.s}")
        if not self.heat_time > 0:
            raise DomainError(f"heat_time must be positive, got {self.heat_time}")
        if self.kind is OperatorKind.VOLTERRA and self.p != 1.0:
            raise DomainError("the Volterra operator has p = 1")
        if self.kind is OperatorKind.HEAT and (
            not math.isclose(self.p, math.pi**2 * self.heat_time) or self.s != 2.0
        ):
            raise DomainError("the heat operator has p = pi^2 T and s = 2")

    @classmethod
    def volterra(cls) -> "OperatorSpec":
        return cls(OperatorKind.VOLTERRA, p=1.0, s=1.0)

    @classmethod
    def heat(cls, heat_time: float = DEFAULT_HEAT_TIME) -> "OperatorSpec":
        return cls(OperatorKind.HEAT, p=math.pi**2 * heat_time, s=2.0, heat_time=heat_time)

    @classmethod
    def mild(cls, p: float) -> "OperatorSpec":
        return cls(OperatorKind.SYNTHETIC_MILD, p=p, s=1.0)

    @classmethod
    def extreme(cls, p: float, s: float = 1.0) -> "OperatorSpec":
        return cls(OperatorKind.SYNTHETIC_EXTREME, p=p, s=s)

    @property
    def regime(self) -> Regime:
        if self.kind in (OperatorKind.VOLTERRA, OperatorKind.SYNTHETIC_MILD):
            return Regime.MILD
        return Regime.EXTREME

    @property
    def uses_sine_basis(self) -> bool:
        """True when ``psi_k = sqrt(2) sin(k pi x)``."""
        return self.kind is not OperatorKind.VOLTERRA

    def singular_values(self, k) -> np.ndarray:
        """Vectorised :func:`singular_value` over an integer array ``k``."""
        k = _check_index(k)
        kf = k.astype(float)
        if self.kind is OperatorKind.VOLTERRA:
            return 1.0 / ((kf - 0.5) * math.pi)
        if self.kind is OperatorKind.HEAT:
            # Underflows to 0 for k >~ 60 at the default T; this is intended.
            return np.exp(-(kf**2) * math.pi**2 * self.heat_time)
        if self.kind is OperatorKind.SYNTHETIC_MILD:
            return kf ** (-self.p)
        return np.exp(-self.p * kf**self.s)

    def eigenbasis(self, k, x) -> np.ndarray:
        """``phi_k(x)``, broadcasting ``k`` against ``x``."""
        k = _check_index(k)
        x = _check_unit(x)
        if self.kind is OperatorKind.VOLTERRA:
            return SQRT2 * np.cos((k - 0.5) * math.pi * x)
        return SQRT2 * np.sin(k * math.pi * x)

    def conjugate_basis(self, k, x) -> np.ndarray:
        """``psi_k(x)``, broadcasting ``k`` against ``x``."""
        k = _check_index(k)
        x = _check_unit(x)
        if self.kind is OperatorKind.VOLTERRA:
            return SQRT2 * np.sin((k - 0.5) * math.pi * x)
        return SQRT2 * np.sin(k * math.pi * x)


def _check_index(k) -> np.ndarray:
    k = np.asarray(k)
    if not np.issubdtype(k.dtype, np.integer):
        if not np.all(np.mod(k, 1) == 0):
            raise DomainError("basis index k must be an integer")
        k = k.astype(np.int64)
    if np.any(k < 1):
        raise DomainError("basis index k must be >= 1")
    return k


def _check_unit(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(x > 1.0) or np.any(np.isnan(x)):
        raise DomainError("x must lie in [0, 1]")
    return x


def singular_value(op: OperatorSpec, k: int) -> float:
    """Return the k-th singular value ``a_k`` of ``op``."""
    return float(op.singular_values(k))


def eigenbasis_eval(op: OperatorSpec, k: int, x: float) -> float:
    return float(op.eigenbasis(k, x))


def conjugate_basis_eval(op: OperatorSpec, k: int, x: float) -> float:
    return float(op.conjugate_basis(k, x))


@dataclass(frozen=True)
class SignalCoefficients:
    """Coefficients ``f_1..f_K`` of a signal in an operator's eigenbasis.

    ``beta`` is the Sobolev smoothness the signal is claimed to have; it is
    used by rate predictions, never by the estimators themselves.
    """

    coeffs: np.ndarray
    beta: float = 0.0
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).ravel()
        if c.size == 0:
            raise DomainError("a signal needs at least one coefficient")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        if self.beta < 0:
            raise DomainError("beta must be nonnegative")

    @property
    def K(self) -> int:
        return self.coeffs.size

    @classmethod
    def unit(cls, k: int, K: int | None = None, beta: float = 0.0) -> "SignalCoefficients":
        """The basis vector ``e_k`` stored to length ``K`` (default ``k``)."""
        K = k if K is None else K
        c = np.zeros(K)
        c[k - 1] = 1.0
        return cls(c, beta, name=f"e{k}")

    def padded(self, length: int) -> np.ndarray:
        """Coefficients zero-padded (or cut) to ``length``."""
        out = np.zeros(length)
        m = min(length, self.K)
        out[:m] = self.coeffs[:m]
        return out

    def evaluate(self, op: OperatorSpec, x) -> np.ndarray:
        """Partial sum ``sum_k f_k phi_k(x)`` over the stored range."""
        return _series(op.eigenbasis, self.coeffs, x)


def sobolev_norm(f: SignalCoefficients, beta: float) -> float:
    """Sobolev norm ``(sum_k f_k^2 k^(2 beta))^(1/2)`` over the stored range."""
    if beta < 0:
        raise DomainError("beta must be nonnegative")
    k = np.arange(1, f.K + 1, dtype=float)
    return float(np.sqrt(np.sum(f.coeffs**2 * k ** (2.0 * beta))))


def _series(basis, coeffs: np.ndarray, x, chunk: int = 4096) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros(x.shape)
    for start in range(0, coeffs.size, chunk):
        k = np.arange(start + 1, min(start + chunk, coeffs.size) + 1)
        out += basis(k[None, :], x[:, None]) @ coeffs[start : start + k.size]
    return out


def forward_apply(op: OperatorSpec, f: SignalCoefficients, x):
    """Evaluate ``Af(x) = sum_{k <= K} a_k f_k psi_k(x)``.

    The series is truncated at the stored length; see :func:`tail_negligible`
    for the check that the truncation is harmless. Scalars in, scalar out.
    """
    c = op.singular_values(np.arange(1, f.K + 1)) * f.coeffs
    out = _series(op.conjugate_basis, c, x)
    return float(out[0]) if np.ndim(x) == 0 else out


def tail_negligible(op: OperatorSpec, f: SignalCoefficients, tol: float = 1e-12) -> bool:
    """True if the last stored term satisfies ``a_K |f_K| sqrt(2) < tol``."""
    return bool(singular_value(op, f.K) * abs(f.coeffs[-1]) * SQRT2 < tol)


class CatalogSignal(str, enum.Enum):
    VOLTERRA_TRUTH = "VolterraTruth"
    HEAT_TRUTH = "HeatTruth"


#: Smoothness tags of the catalog signals. HeatTruth lies in S^beta for every
#: beta < 5/2; 2.49 is the fixed representative.
CATALOG_BETA = {CatalogSignal.VOLTERRA_TRUTH: 1.0, CatalogSignal.HEAT_TRUTH: 2.49}


def catalog_signal(name, K: int, beta: float | None = None) -> SignalCoefficients:
    """First ``K`` coefficients of a named true signal.

    ``VolterraTruth`` has ``f_k = k^(-3/2) sin(k)``. ``HeatTruth`` is the
    sine expansion of ``4x(x - 1)(8x - 5)``, whose coefficients are
    ``8 sqrt(2) (13 + 11 (-1)^k) / (pi^3 k^3)``.
    """
    name = CatalogSignal(name)
    if K < 1:
        raise DomainError("K must be >= 1")
    k = np.arange(1, K + 1, dtype=float)
    if name is CatalogSignal.VOLTERRA_TRUTH:
        c = k**-1.5 * np.sin(k)
    else:
        sign = np.where(np.arange(1, K + 1) % 2 == 0, 1.0, -1.0)
        c = 8.0 * SQRT2 * (13.0 + 11.0 * sign) / (math.pi**3 * k**3)
    beta = CATALOG_BETA[name] if beta is None else beta
    return SignalCoefficients(c, beta, name=name.value)


def heat_truth_function(x):
    """The HeatTruth signal in closed form, ``4x(x - 1)(8x - 5)``."""
    x = np.asarray(x, dtype=float)
    return 4.0 * x * (x - 1.0) * (8.0 * x - 5.0)
