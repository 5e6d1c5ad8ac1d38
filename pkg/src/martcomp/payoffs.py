"""Terminal payoffs with optional analytic derivatives and class tags."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy import stats

from .errors import ConfigurationError, DataError

CLASS_TAGS = {"cx", "dcx", "icx", "idcx", "increasing", "smooth"}
TAG_TOL = 1e-9


def _as_points(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x.reshape(-1, d)


@dataclass(frozen=True)
class Payoff:
    """``fn`` maps states of shape ``(n, d)`` to values ``(n,)``.

    ``grad`` returns ``(n, d)`` and ``hess`` ``(n, d, d)``; both optional.
    ``gaussian(mean, var)`` (d = 1 only, optional) returns
    ``(E f, E f', E f'')`` for a normal argument and powers the series field.
    """

    name: str
    fn: Callable
    grad: Callable | None = None
    hess: Callable | None = None
    class_tags: frozenset = frozenset()
    growth: str = "polynomial(2)"
    dimension: int = 1
    gaussian: Callable | None = None
    params: dict = field(default_factory=dict)
    kinks: tuple = ()

    def __post_init__(self):
        bad = set(self.class_tags) - CLASS_TAGS
        if bad:
            raise ConfigurationError(f"unknown class tags {sorted(bad)}")
        object.__setattr__(self, "class_tags", frozenset(self.class_tags))

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.fn(_as_points(x, self.dimension)), dtype=float)

    def gradient(self, x) -> np.ndarray:
        pts = _as_points(x, self.dimension)
        if self.grad is not None:
            return np.asarray(self.grad(pts), dtype=float).reshape(pts.shape)
        return _fd_gradient(self, pts)

    def hessian(self, x) -> np.ndarray:
        pts = _as_points(x, self.dimension)
        d = self.dimension
        if self.hess is not None:
            return np.asarray(self.hess(pts), dtype=float).reshape(len(pts), d, d)
        return _fd_hessian(self, pts)

    @property
    def has_derivatives(self) -> bool:
        return self.grad is not None and self.hess is not None

    @property
    def is_bounded(self) -> bool:
        return self.growth == "bounded"

    def check_tags(self, n: int = 1000, seed: int = 0, spread: float = 3.0) -> dict[str, bool]:
        """Numeric verification of each class tag at ``n`` random points."""
        rng = np.random.default_rng(seed)
        d = self.dimension
        pts = rng.normal(0.0, spread, (n, d))
        out = {}
        for tag in sorted(self.class_tags):
            if tag == "smooth":
                out[tag] = self.has_derivatives
            elif tag in ("increasing",):
                out[tag] = _increasing_ok(self, pts)
            elif tag == "cx":
                out[tag] = _convex_ok(self, pts, rng)
            elif tag == "icx":
                out[tag] = _convex_ok(self, pts, rng) and _increasing_ok(self, pts)
            elif tag == "dcx":
                out[tag] = _dcx_ok(self, pts)
            elif tag == "idcx":
                out[tag] = _dcx_ok(self, pts) and _increasing_ok(self, pts)
        return out

    def validate(self, **kw) -> None:
        failed = [t for t, ok in self.check_tags(**kw).items() if not ok]
        if failed:
            raise DataError(f"payoff {self.name} fails its class tags {failed}")

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "tags": sorted(self.class_tags), "growth": self.growth,
                "dimension": self.dimension, **self.params}


def _fd_gradient(f: Payoff, pts: np.ndarray, h: float = 1e-5) -> np.ndarray:
    d = pts.shape[1]
    out = np.empty_like(pts)
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        out[:, i] = (f(pts + e) - f(pts - e)) / (2 * h)
    return out


def _fd_hessian(f: Payoff, pts: np.ndarray, h: float = 1e-4) -> np.ndarray:
    d = pts.shape[1]
    out = np.empty((len(pts), d, d))
    f0 = f(pts)
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h
        out[:, i, i] = (f(pts + ei) - 2 * f0 + f(pts - ei)) / h ** 2
        for j in range(i + 1, d):
            ej = np.zeros(d)
            ej[j] = h
            v = (f(pts + ei + ej) - f(pts + ei - ej) - f(pts - ei + ej) + f(pts - ei - ej)) / (4 * h * h)
            out[:, i, j] = out[:, j, i] = v
    return out


def _scale(f: Payoff, pts: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(f(pts)))))


def _increasing_ok(f: Payoff, pts: np.ndarray) -> bool:
    if f.grad is not None:
        return bool(np.all(f.gradient(pts) >= -TAG_TOL))
    h = 1e-3
    d = pts.shape[1]
    tol = TAG_TOL * _scale(f, pts)
    return all(np.all(f(pts + h * np.eye(d)[i]) - f(pts) >= -tol) for i in range(d))


def _convex_ok(f: Payoff, pts: np.ndarray, rng: np.random.Generator) -> bool:
    if f.hess is not None:
        eig = np.linalg.eigvalsh(f.hessian(pts))
        return bool(np.min(eig) >= -TAG_TOL * max(1.0, float(np.max(np.abs(eig)))))
    # midpoint convexity along random chords
    other = pts + rng.normal(0.0, 1.0, pts.shape)
    tol = TAG_TOL * _scale(f, pts)
    return bool(np.all(0.5 * (f(pts) + f(other)) - f(0.5 * (pts + other)) >= -tol))


def _dcx_ok(f: Payoff, pts: np.ndarray) -> bool:
    if f.hess is not None:
        return bool(np.all(f.hessian(pts) >= -TAG_TOL))
    h = 1e-2
    d = pts.shape[1]
    tol = TAG_TOL * _scale(f, pts)
    for i in range(d):
        for j in range(d):
            ei = h * np.eye(d)[i]
            ej = h * np.eye(d)[j]
            diff = f(pts + ei + ej) - f(pts + ei) - f(pts + ej) + f(pts)
            if np.any(diff < -tol):
                return False
    return True


# --------------------------------------------------------------------------
# one-dimensional payoffs with normal expectations


def _col(x):
    return x[:, 0]


def call(strike: float = 0.0) -> Payoff:
    k = float(strike)

    def gaussian(m, v):
        m, v = np.broadcast_arrays(np.asarray(m, float), np.asarray(v, float))
        s = np.sqrt(np.maximum(v, 0.0))
        pos = s > 0
        safe = np.where(pos, s, 1.0)
        d = (m - k) / safe
        ef = np.where(pos, (m - k) * stats.norm.cdf(d) + safe * stats.norm.pdf(d), np.maximum(m - k, 0.0))
        e1 = np.where(pos, stats.norm.cdf(d), (m > k).astype(float))
        e2 = np.where(pos, stats.norm.pdf(d) / safe, 0.0)
        return ef, e1, e2

    return Payoff(f"call(K={k})", lambda x: np.maximum(_col(x) - k, 0.0),
                  lambda x: (_col(x) > k).astype(float)[:, None],
                  lambda x: np.zeros((len(x), 1, 1)),
                  {"cx", "icx", "increasing", "dcx", "idcx"}, "linear", 1, gaussian,
                  {"type": "call", "strike": k}, ((k, 1.0),))


def put(strike: float = 0.0) -> Payoff:
    k = float(strike)
    c = call(k)

    def gaussian(m, v):
        ef, e1, e2 = c.gaussian(m, v)
        return ef - (np.asarray(m) - k), e1 - 1.0, e2

    return Payoff(f"put(K={k})", lambda x: np.maximum(k - _col(x), 0.0),
                  lambda x: -(_col(x) < k).astype(float)[:, None],
                  lambda x: np.zeros((len(x), 1, 1)),
                  {"cx", "dcx"}, "linear", 1, gaussian, {"type": "put", "strike": k}, ((k, 1.0),))


def quadratic(a: float = 1.0, center: float = 0.0) -> Payoff:
    a, c0 = float(a), float(center)
    if a < 0:
        raise ConfigurationError("quadratic payoff needs a >= 0")

    def gaussian(m, v):
        m = np.asarray(m, float)
        return a * ((m - c0) ** 2 + v), 2 * a * (m - c0), np.full(np.shape(m), 2 * a)

    return Payoff(f"quadratic(a={a}, c={c0})", lambda x: a * (_col(x) - c0) ** 2,
                  lambda x: (2 * a * (_col(x) - c0))[:, None],
                  lambda x: np.full((len(x), 1, 1), 2 * a),
                  {"cx", "dcx", "smooth"}, "polynomial(2)", 1, gaussian,
                  {"type": "quadratic", "a": a, "center": c0})


def exponential(rate: float = 1.0, weight: float = 1.0) -> Payoff:
    r, w = float(rate), float(weight)
    if w < 0:
        raise ConfigurationError("exponential payoff needs weight >= 0")
    tags = {"cx", "dcx", "smooth"} | ({"increasing", "icx", "idcx"} if r >= 0 else set())

    def gaussian(m, v):
        e = w * np.exp(r * np.asarray(m, float) + 0.5 * r * r * np.asarray(v, float))
        return e, r * e, r * r * e

    return Payoff(f"exponential(r={r}, w={w})", lambda x: w * np.exp(r * _col(x)),
                  lambda x: (w * r * np.exp(r * _col(x)))[:, None],
                  lambda x: (w * r * r * np.exp(r * _col(x)))[:, None, None],
                  tags, "exponential", 1, gaussian, {"type": "exponential", "rate": r, "weight": w})


def affine(slope: float = 1.0, intercept: float = 0.0) -> Payoff:
    a, b = float(slope), float(intercept)
    tags = {"cx", "dcx", "smooth"} | ({"increasing", "icx", "idcx"} if a >= 0 else set())

    def gaussian(m, v):
        m = np.asarray(m, float)
        return a * m + b, np.full(m.shape, a), np.zeros(m.shape)

    return Payoff(f"affine({a}, {b})", lambda x: a * _col(x) + b,
                  lambda x: np.full((len(x), 1), a), lambda x: np.zeros((len(x), 1, 1)),
                  tags, "linear", 1, gaussian, {"type": "affine", "slope": a, "intercept": b})


def constant(value: float = 1.0) -> Payoff:
    c = float(value)

    def gaussian(m, v):
        m = np.asarray(m, float)
        return np.full(m.shape, c), np.zeros(m.shape), np.zeros(m.shape)

    return Payoff(f"constant({c})", lambda x: np.full(len(x), c),
                  lambda x: np.zeros_like(x), lambda x: np.zeros((len(x), x.shape[1], x.shape[1])),
                  {"cx", "dcx", "icx", "idcx", "increasing", "smooth"}, "bounded", 1, gaussian,
                  {"type": "constant", "value": c})


# --------------------------------------------------------------------------
# multivariate generators


def hinge(direction, threshold: float) -> Payoff:
    """``(<u, y> - k)_+``; convex, and increasing when ``u >= 0``."""
    u = np.atleast_1d(np.asarray(direction, dtype=float))
    k = float(threshold)
    tags = {"cx"} | ({"icx", "increasing"} if np.all(u >= 0) else set())
    kinks = ((k / u[0], abs(u[0])),) if u.size == 1 and u[0] != 0 else ()
    return Payoff(f"hinge(u={u.tolist()}, k={k:.6g})", lambda x: np.maximum(x @ u - k, 0.0),
                  lambda x: (x @ u > k).astype(float)[:, None] * u[None, :],
                  lambda x: np.zeros((len(x), u.size, u.size)),
                  tags, "linear", u.size, params={"type": "hinge", "direction": u.tolist(), "threshold": k},
                  kinks=kinks)


def product_hinge(anchor) -> Payoff:
    """``prod_i (y_i - a_i)_+``; directionally convex and increasing."""
    a = np.atleast_1d(np.asarray(anchor, dtype=float))
    return Payoff(f"product_hinge(a={a.tolist()})", lambda x: np.prod(np.maximum(x - a, 0.0), axis=1),
                  class_tags={"dcx", "idcx", "increasing"}, growth=f"polynomial({a.size})",
                  dimension=a.size, params={"type": "product_hinge", "anchor": a.tolist()})


def payoff_from_dict(spec: dict[str, Any]) -> Payoff:
    kind = spec.get("type")
    if kind == "call":
        return call(float(spec.get("strike", 0.0)))
    if kind == "put":
        return put(float(spec.get("strike", 0.0)))
    if kind == "quadratic":
        return quadratic(float(spec.get("a", 1.0)), float(spec.get("center", 0.0)))
    if kind == "exponential":
        return exponential(float(spec.get("rate", 1.0)), float(spec.get("weight", 1.0)))
    if kind == "affine":
        return affine(float(spec.get("slope", 1.0)), float(spec.get("intercept", 0.0)))
    if kind == "constant":
        return constant(float(spec.get("value", 1.0)))
    if kind == "hinge":
        return hinge(spec["direction"], float(spec["threshold"]))
    if kind == "product_hinge":
        return product_hinge(spec["anchor"])
    raise ConfigurationError(f"unknown payoff type {kind!r}")
