"""Jump-size distributions for compound Poisson and fixed-time atom kernels."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import special, stats

from .errors import ConfigurationError
from .quadrature import gauss_legendre

# half-width (in std units) of the central 1 - 1e-10 probability range
CENTRAL_Z = float(special.ndtri(1.0 - 0.5e-10))
GL_ORDER = 256


def _region_pieces(a: float, b: float, lo: float, hi: float) -> list[tuple[float, float]]:
    """Intersect ``[a, b]`` with ``{lo < |x| <= hi}``."""
    pieces = []
    for p, q in ((-hi, -lo), (lo, hi)):
        left, right = max(a, p), min(b, q)
        if right > left:
            pieces.append((left, right))
    return pieces


@dataclass(frozen=True)
class Normal:
    mean: float
    std: float

    def __post_init__(self):
        if not np.isfinite(self.mean) or not self.std > 0 or not np.isfinite(self.std):
            raise ConfigurationError(f"Normal law needs finite mean and std > 0, got {self}")

    dimension = 1

    def cf(self, z):
        z = np.asarray(z, dtype=float)
        return np.exp(1j * self.mean * z - 0.5 * (self.std * z) ** 2)

    def first_moment(self) -> float:
        return float(self.mean)

    def second_moment(self) -> float:
        return float(self.mean ** 2 + self.std ** 2)

    def log_mgf(self, theta):
        return self.mean * theta + 0.5 * (self.std * theta) ** 2

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.mean + self.std * rng.standard_normal(n)

    def central_range(self) -> tuple[float, float]:
        return self.mean - CENTRAL_Z * self.std, self.mean + CENTRAL_Z * self.std

    def nodes(self, lo: float = 0.0, hi: float = np.inf) -> tuple[np.ndarray, np.ndarray]:
        a, b = self.central_range()
        xs, ws = [], []
        for p, q in _region_pieces(a, b, lo, hi):
            x, w = gauss_legendre(p, q, GL_ORDER)
            xs.append(x)
            ws.append(w * stats.norm.pdf(x, self.mean, self.std))
        if not xs:
            return np.empty(0), np.empty(0)
        return np.concatenate(xs), np.concatenate(ws)

    def mass_outside(self, a: float, b: float) -> float:
        return float(stats.norm.cdf(a, self.mean, self.std) + stats.norm.sf(b, self.mean, self.std))

    def to_dict(self) -> dict[str, Any]:
        return {"type": "normal", "mean": float(self.mean), "std": float(self.std)}


@dataclass(frozen=True)
class PointMass:
    value: float

    dimension = 1

    def cf(self, z):
        return np.exp(1j * self.value * np.asarray(z, dtype=float))

    def first_moment(self) -> float:
        return float(self.value)

    def second_moment(self) -> float:
        return float(self.value ** 2)

    def log_mgf(self, theta):
        return self.value * theta

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.full(n, float(self.value))

    def central_range(self) -> tuple[float, float]:
        return float(self.value), float(self.value)

    def nodes(self, lo: float = 0.0, hi: float = np.inf) -> tuple[np.ndarray, np.ndarray]:
        if lo < abs(self.value) <= hi:
            return np.array([float(self.value)]), np.array([1.0])
        return np.empty(0), np.empty(0)

    def mass_outside(self, a: float, b: float) -> float:
        return 0.0 if a <= self.value <= b else 1.0

    def to_dict(self) -> dict[str, Any]:
        return {"type": "point", "value": float(self.value)}


@dataclass(frozen=True)
class Discrete:
    values: tuple[float, ...]
    probs: tuple[float, ...]

    dimension = 1

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if v.shape != p.shape or v.ndim != 1 or v.size == 0:
            raise ConfigurationError("Discrete law needs matching non-empty values/probs")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ConfigurationError(f"Discrete probabilities must be >= 0 and sum to 1, got {p.sum()}")

    def cf(self, z):
        z = np.asarray(z, dtype=float)
        return np.exp(1j * np.multiply.outer(z, self.values)) @ np.asarray(self.probs)

    def first_moment(self) -> float:
        return float(np.dot(self.values, self.probs))

    def second_moment(self) -> float:
        return float(np.dot(np.square(self.values), self.probs))

    def log_mgf(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.log(np.exp(np.multiply.outer(theta, self.values)) @ np.asarray(self.probs))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        cum = np.cumsum(self.probs)
        idx = np.searchsorted(cum, rng.random(n) * cum[-1], side="right")
        return np.asarray(self.values, dtype=float)[np.minimum(idx, len(cum) - 1)]

    def central_range(self) -> tuple[float, float]:
        return float(min(self.values)), float(max(self.values))

    def nodes(self, lo: float = 0.0, hi: float = np.inf) -> tuple[np.ndarray, np.ndarray]:
        v = np.asarray(self.values, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        keep = (np.abs(v) > lo) & (np.abs(v) <= hi) & (p > 0)
        return v[keep], p[keep]

    def mass_outside(self, a: float, b: float) -> float:
        v = np.asarray(self.values)
        return float(np.sum(np.asarray(self.probs)[(v < a) | (v > b)]))

    def to_dict(self) -> dict[str, Any]:
        return {"type": "discrete", "values": [float(x) for x in self.values],
                "probs": [float(x) for x in self.probs]}


@dataclass(frozen=True)
class MultiNormal:
    """d-dimensional Gaussian jump law (d >= 2); integrated by Gauss-Hermite."""

    mean: tuple[float, ...]
    cov: tuple[tuple[float, ...], ...]
    _chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        m = np.asarray(self.mean, dtype=float)
        c = np.asarray(self.cov, dtype=float)
        if c.shape != (m.size, m.size) or not np.allclose(c, c.T):
            raise ConfigurationError("MultiNormal covariance must be symmetric d x d")
        try:
            chol = np.linalg.cholesky(c)
        except np.linalg.LinAlgError as exc:
            raise ConfigurationError("MultiNormal covariance must be positive definite") from exc
        object.__setattr__(self, "_chol", chol)

    @property
    def dimension(self) -> int:
        return len(self.mean)

    def cf(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        m = np.asarray(self.mean)
        c = np.asarray(self.cov)
        return np.exp(1j * z @ m - 0.5 * np.einsum("ni,ij,nj->n", z, c, z))

    def first_moment(self) -> np.ndarray:
        return np.asarray(self.mean, dtype=float)

    def second_moment(self) -> np.ndarray:
        m = np.asarray(self.mean)
        return np.asarray(self.cov) + np.outer(m, m)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.asarray(self.mean) + rng.standard_normal((n, self.dimension)) @ self._chol.T

    def nodes(self, lo: float = 0.0, hi: float = np.inf, order: int = 20):
        x, w = np.polynomial.hermite_e.hermegauss(order)
        w = w / np.sqrt(2 * np.pi)
        grids = np.meshgrid(*([x] * self.dimension), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        wts = np.prod(np.stack(np.meshgrid(*([w] * self.dimension), indexing="ij")), axis=0).ravel()
        return np.asarray(self.mean) + pts @ self._chol.T, wts

    def to_dict(self) -> dict[str, Any]:
        return {"type": "multinormal", "mean": [float(v) for v in self.mean],
                "cov": [[float(v) for v in row] for row in self.cov]}


def law_from_dict(spec: dict[str, Any]):
    kind = spec.get("type")
    if kind == "normal":
        return Normal(float(spec["mean"]), float(spec["std"]))
    if kind == "point":
        return PointMass(float(spec["value"]))
    if kind == "discrete":
        return Discrete(tuple(float(v) for v in spec["values"]), tuple(float(p) for p in spec["probs"]))
    if kind == "multinormal":
        return MultiNormal(tuple(float(v) for v in spec["mean"]),
                           tuple(tuple(float(v) for v in row) for row in spec["cov"]))
    raise ConfigurationError(f"unknown jump law type {kind!r}")
