"""Fixed quadrature rules used against jump measures.

Everything here is deterministic: the same interval always yields the same
nodes, so scans are reproducible bit for bit.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=32)
def _leggauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(a: float, b: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = _leggauss(order)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def panel_rule(edges: np.ndarray, order: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on consecutive panels ``edges[i]..edges[i+1]``."""
    edges = np.asarray(edges, dtype=float)
    x, w = _leggauss(order)
    lo = edges[:-1, None]
    half = 0.5 * np.diff(edges)[:, None]
    nodes = lo + half * (x[None, :] + 1.0)
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def log_panel_rule(a: float, b: float, panels_per_decade: int = 8,
                   order: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Log-spaced panels on ``[a, b]`` with ``0 < a < b < inf``.

    Integrable power singularities at 0 are handled well because each panel
    sees a bounded ratio b_i / a_i.
    """
    if not (0.0 < a < b < np.inf):
        raise ValueError(f"log_panel_rule needs 0 < a < b < inf, got [{a}, {b}]")
    decades = np.log10(b / a)
    n = max(1, int(np.ceil(decades * panels_per_decade)))
    edges = np.geomspace(a, b, n + 1)
    return panel_rule(edges, order)


def log_spaced_sum(fn, a: float, b: float, points: int = 64) -> float:
    """Integral of ``fn`` on ``[a, b]`` with ``points`` log-spaced nodes.

    Gauss-Legendre in u = log y (weights times y), which is spectrally
    accurate for power-law integrands; used for small-jump second moments.
    """
    if b <= a:
        return 0.0
    if a <= 0.0:
        a = b * 1e-12
    u, w = gauss_legendre(np.log(a), np.log(b), points)
    x = np.exp(u)
    return float(np.sum(w * x * fn(x)))


def dyadic_log_slope(values: np.ndarray, steps: np.ndarray) -> float:
    """Least-squares slope of ``log(values)`` against ``steps * log 2``.

    Used as the numeric divergence proxy: an integral along a dyadic
    refinement that keeps growing has a clearly positive slope, a convergent
    one flattens to zero.
    """
    values = np.asarray(values, dtype=float)
    steps = np.asarray(steps, dtype=float)
    keep = values > 0
    if keep.sum() < 2:
        return 0.0
    return float(np.polyfit(steps[keep] * np.log(2.0), np.log(values[keep]), 1)[0])
