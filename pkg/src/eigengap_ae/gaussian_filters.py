"""Discrete Gaussian filters over iteration counts and their periodic transforms.

Two objects live here:

* :class:`TruncatedGaussianSampler` -- a tabulated, symmetric distribution over
  integers ``m`` in ``[-M, M]`` with standard deviation ``T``.  The ``ODD_ONLY``
  kind keeps only odd ``m`` (plus the residual mass at zero) and is what the
  dual-measurement estimator draws from.
* :class:`PeriodicGaussian` -- the cosine transform of the (untruncated)
  discrete Gaussian, ``Phi_T``, and its alternating-sign cousin ``Psi_T``
  obtained from the odd-only distribution.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Kind",
    "Variant",
    "TruncatedGaussianSampler",
    "PeriodicGaussian",
    "build_sampler",
    "sample_iteration",
    "phi",
    "psi",
    "second_derivative",
    "analytic_second_derivative",
    "cosine_transform",
    "discrete_gaussian_weights",
    "odd_zero_mass",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


class Kind(str, enum.Enum):
    ALL_INTEGERS = "all"
    ODD_ONLY = "odd"


class Variant(str, enum.Enum):
    PHI = "phi"
    PSI = "psi"


def discrete_gaussian_weights(T: float, m) -> np.ndarray:
    """Unnormalised weights ``exp(-m^2 / 2T^2) / (sqrt(2 pi) T)``."""
    m = np.asarray(m, dtype=float)
    return np.exp(-(m * m) / (2.0 * T * T)) / (_SQRT_2PI * T)


@dataclass(frozen=True)
class TruncatedGaussianSampler:
    """Tabulated truncated discrete Gaussian.

    ``support`` is ``arange(-M, M + 1)`` and ``pmf`` holds the matching
    probabilities.  Instances are immutable; build them with
    :func:`build_sampler`.
    """

    T: float
    sigma: float
    rho: float
    kind: Kind
    M: int
    z_tilde: float
    support: np.ndarray = field(repr=False)
    pmf: np.ndarray = field(repr=False)
    _cdf: np.ndarray = field(repr=False, compare=False)

    def prob(self, m: int) -> float:
        if abs(m) > self.M:
            return 0.0
        return float(self.pmf[m + self.M])

    def as_dict(self) -> dict[int, float]:
        return {int(m): float(p) for m, p in zip(self.support, self.pmf)}

    def sample(self, rng: np.random.Generator, size: int | None = None):
        """Inverse-CDF draws; returns an int for ``size=None`` else an int64 array."""
        u = rng.random(size)
        idx = np.searchsorted(self._cdf, u, side="right")
        idx = np.minimum(idx, len(self.support) - 1)
        out = self.support[idx]
        if size is None:
            return int(out)
        return out.astype(np.int64)

    def mean(self) -> float:
        return float(np.dot(self.support, self.pmf))

    def variance(self) -> float:
        mu = self.mean()
        return float(np.dot((self.support - mu) ** 2, self.pmf))

    def expected_queries(self, weight: int = 1) -> float:
        """Mean of ``weight * max(|m|, 1)`` under the table."""
        cost = np.maximum(np.abs(self.support), 1)
        return float(weight * np.dot(cost, self.pmf))


def build_sampler(
    T: float,
    sigma: float = 4.0,
    rho: float = 6.0,
    kind: Kind | str = Kind.ALL_INTEGERS,
) -> TruncatedGaussianSampler:
    """Tabulate the truncated discrete Gaussian with cutoff ``M = floor(sigma*T)``.

    The normaliser ``z_tilde`` sums the unnormalised weights over
    ``|m| <= rho*T``.  For ``ODD_ONLY`` the odd entries carry twice the weight
    and the *same* ``z_tilde`` is used; renormalising over odd entries alone is
    numerically fragile at small ``T``.  Whatever mass is left goes to ``m=0``.
    """
    kind = Kind(kind)
    if not (T > 0 and math.isfinite(T)):
        raise ValueError(f"T must be positive and finite, got {T!r}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    if rho < sigma:
        raise ValueError(f"rho must be >= sigma (rho={rho!r}, sigma={sigma!r})")

    M = int(math.floor(sigma * T))
    norm_cut = int(math.floor(rho * T))
    z_tilde = float(discrete_gaussian_weights(T, np.arange(-norm_cut, norm_cut + 1)).sum())

    support = np.arange(-M, M + 1, dtype=np.int64)
    pmf = discrete_gaussian_weights(T, support) / z_tilde
    if kind is Kind.ODD_ONLY:
        pmf = np.where(support % 2 != 0, 2.0 * pmf, 0.0)
    pmf[M] = 0.0
    residual = 1.0 - pmf.sum()
    if residual < -1e-12:
        raise RuntimeError(
            f"negative residual mass {residual:.3e} at m=0 (T={T}, sigma={sigma}, rho={rho}, kind={kind.value})"
        )
    pmf[M] = max(residual, 0.0)
    pmf.setflags(write=False)

    cdf = np.cumsum(pmf)
    cdf[-1] = 1.0
    cdf.setflags(write=False)
    support.setflags(write=False)
    return TruncatedGaussianSampler(
        T=float(T), sigma=float(sigma), rho=float(rho), kind=kind, M=M,
        z_tilde=z_tilde, support=support, pmf=pmf, _cdf=cdf,
    )


def sample_iteration(sampler: TruncatedGaussianSampler, rng: np.random.Generator) -> int:
    """Draw one iteration count ``m``."""
    return sampler.sample(rng)


def cosine_transform(support, weights, x):
    """``sum_m w(m) cos(x m)`` evaluated at each ``x``."""
    x = np.asarray(x, dtype=float)
    support = np.asarray(support, dtype=float)
    weights = np.asarray(weights, dtype=float)
    return np.cos(np.multiply.outer(x, support)) @ weights


def odd_zero_mass(T: float) -> float:
    """Mass left at ``m=0`` by the untruncated odd-only distribution, ``1 - 2W/Z``.

    Both sums are taken in the integer domain with a cutoff of ``12T`` which
    leaves a tail below ``exp(-72)``.
    """
    cut = int(math.ceil(12.0 * T)) + 1
    m = np.arange(-cut, cut + 1)
    w = discrete_gaussian_weights(T, m)
    z = w.sum()
    odd = w[m % 2 != 0].sum()
    return float(1.0 - 2.0 * odd / z)


@dataclass(frozen=True)
class PeriodicGaussian:
    """Periodic Gaussian ``Phi_T`` or the alternating-sign ``Psi_T``.

    ``series_cutoff`` is the number of image terms summed on each side of the
    origin; the default 10 leaves an error below ``exp(-2 pi^2 T^2 J^2)``.
    """

    T: float
    series_cutoff: int = 10
    variant: Variant = Variant.PHI
    _z: float = field(init=False, repr=False, compare=False)
    _q0: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T!r}")
        if self.series_cutoff < 1:
            raise ValueError("series_cutoff must be >= 1")
        object.__setattr__(self, "variant", Variant(self.variant))
        j = np.arange(-self.series_cutoff, self.series_cutoff + 1)
        z = float(np.exp(-((2.0 * np.pi * j) ** 2) * self.T**2 / 2.0).sum())
        object.__setattr__(self, "_z", z)
        q0 = odd_zero_mass(self.T) if self.variant is Variant.PSI else 0.0
        object.__setattr__(self, "_q0", q0)

    @property
    def normalization(self) -> float:
        return self._z

    @property
    def zero_mass(self) -> float:
        """``q_T(0)``, the constant offset of ``Psi_T``."""
        return self._q0

    def _images(self, x):
        j = np.arange(-self.series_cutoff, self.series_cutoff + 1)
        return np.add.outer(np.asarray(x, dtype=float), 2.0 * np.pi * j)

    def _phi(self, x):
        y = self._images(x)
        return np.exp(-(y * y) * self.T**2 / 2.0).sum(axis=-1) / self._z

    def _phi2(self, x):
        y = self._images(x)
        T2 = self.T**2
        return ((T2 * T2 * y * y - T2) * np.exp(-(y * y) * T2 / 2.0)).sum(axis=-1) / self._z

    def __call__(self, x):
        if self.variant is Variant.PHI:
            return self._phi(x)
        x = np.asarray(x, dtype=float)
        return self._phi(x) - self._phi(x + np.pi) + self._q0


def phi(pg: PeriodicGaussian, x):
    """``Phi_T(x)``; scalar in, scalar out, arrays broadcast."""
    if pg.variant is not Variant.PHI:
        raise ValueError("phi() needs a PHI-variant PeriodicGaussian")
    out = pg._phi(x)
    return float(out) if np.ndim(out) == 0 else out


def psi(pg: PeriodicGaussian, x):
    """``Psi_T(x) = Phi_T(x) - Phi_T(x + pi) + q_T(0)``."""
    if pg.variant is not Variant.PSI:
        raise ValueError("psi() needs a PSI-variant PeriodicGaussian")
    out = pg(x)
    return float(out) if np.ndim(out) == 0 else out


def second_derivative(pg: PeriodicGaussian, x, h: float = 1e-4):
    """Central difference ``(f(x+h) - 2 f(x) + f(x-h)) / h^2``.

    Truncation error is about ``h^2/12 * max|f''''|``, i.e. ``O(h^2 T^4)``;
    round-off adds roughly ``1e-16 / h^2``.
    """
    if not 1e-6 <= h <= 1e-3:
        raise ValueError(f"step h must lie in [1e-6, 1e-3], got {h!r}")
    x = np.asarray(x, dtype=float)
    out = (pg(x + h) - 2.0 * pg(x) + pg(x - h)) / (h * h)
    return float(out) if np.ndim(out) == 0 else out


def analytic_second_derivative(pg: PeriodicGaussian, x):
    """Term-wise differentiated image series (independent of the finite difference)."""
    x = np.asarray(x, dtype=float)
    if pg.variant is Variant.PHI:
        out = pg._phi2(x)
    else:
        out = pg._phi2(x) - pg._phi2(x + np.pi)
    return float(out) if np.ndim(out) == 0 else out
