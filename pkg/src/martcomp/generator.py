"""Kolmogorov-backward residuals U and U-bar of a propagation field.

For a field g of a process with characteristics (b, c, K) the residual

    U g = g_t + 1/2 c g_xx + int (g(t, x + y) - g(t, x) - g_x y) K(dy)

vanishes when g(t, X_t) is a local martingale; U-bar adds b g_x.  At an
integrator atom theta the Lebesgue part carries no mass and the residual
is the jump of g across theta plus the atom's jump integral.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .char_model import DiffChar, JumpKernel
from .errors import DomainError
from .propagation import EXCLUDE_FRACTION, PropagationField
from .quadrature import log_spaced_sum

ESCAPE_TOL = 1e-6


def small_jump_variance(kernel: JumpKernel, eps: float) -> float:
    """int_{|y| <= eps} y^2 K(dy); 64 log-spaced points per side for densities."""
    if kernel.is_zero or eps <= 0:
        return 0.0
    if kernel.variant == "levy_density":
        lo = max(kernel.support[0], 0.0)
        hi = min(eps, kernel.support[1])
        if hi <= lo:
            return 0.0
        a = lo if lo > 0 else hi * 1e-12
        pos = log_spaced_sum(lambda y: y * y * kernel.density(y), a, hi)
        neg = log_spaced_sum(lambda y: y * y * kernel.density(-y), a, hi)
        # power-law remainder below the quadrature floor
        rem = 0.0
        if lo == 0.0:
            alpha = kernel.small_jump_exponent
            k_a = 0.5 * (kernel.density(np.array([a]))[0] + kernel.density(np.array([-a]))[0]) * a ** (1 + alpha)
            rem = 2.0 * k_a * a ** (2 - alpha) / (2 - alpha)
        return float(pos + neg + rem)
    return float(kernel.integrate(lambda y: y * y, 0.0, eps))


def kernel_reach(kernel: JumpKernel) -> float:
    """Largest jump size the quadrature of ``kernel`` reaches (escaping mass below ESCAPE_TOL)."""
    if kernel.is_zero:
        return 0.0
    if kernel.variant == "atom_kernel":
        return max([kernel_reach(kernel.measure_at(t)) for t in kernel.atom_times()] + [0.0])
    if kernel.variant == "compound_poisson":
        if kernel.dimension != 1:
            return 0.0
        a, b = kernel.law.central_range()
        return float(max(abs(a), abs(b)))
    if np.isfinite(kernel.support[1]):
        return float(kernel.support[1])
    r = 1.0
    while kernel.mass_outside(-r, r) > 0.1 * ESCAPE_TOL and r < 1e6:
        r *= 2.0
    return r


def jump_integral(fld: PropagationField, kernel: JumpKernel, t: float, x, left: bool = False,
                  eps: float | None = None) -> np.ndarray:
    """int H_g(t, x, y) K(dy) for each state in ``x``.

    Jumps with |y| <= eps (default: the grid spacing) enter through
    1/2 g_xx(t, x) int_{|y| <= eps} y^2 K(dy).  Kernel mass that would leave
    the field domain is dropped if it is below 1e-6, otherwise a DomainError
    is raised.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if kernel.is_zero:
        return np.zeros(x.shape)
    eps = fld.h if eps is None else eps
    g0, gx, gxx, _ = fld.evaluate(t, x, left)
    out = 0.5 * gxx * small_jump_variance(kernel, eps)
    y, w = kernel.nodes(eps, np.inf)
    if w.size == 0:
        return out
    lo, hi = fld.domain
    targets = x[:, None] + y[None, :]
    outside = (targets < lo) | (targets > hi)
    escaped = outside.astype(float) @ w
    escaped = escaped + _tail_beyond_nodes(kernel, x, lo, hi)
    if np.any(escaped > ESCAPE_TOL):
        i = int(np.argmax(escaped))
        raise DomainError(f"kernel mass {escaped[i]:.3g} escapes the field domain from x={x[i]:.4g}")
    vals = fld.value(t, np.clip(targets, lo, hi), left)
    H = vals - g0[:, None] - gx[:, None] * y[None, :]
    H = np.where(outside, 0.0, H)
    return out + H @ w


def _tail_beyond_nodes(kernel: JumpKernel, x, lo, hi) -> np.ndarray:
    """Kernel mass the quadrature nodes do not see (law tails beyond the central range)."""
    if kernel.variant != "compound_poisson" or not hasattr(kernel.law, "mass_outside"):
        return np.zeros(np.shape(x))
    a, b = kernel.law.central_range()
    # mass outside the node range counts as escaping only where it could land outside
    base = kernel.intensity * kernel.law.mass_outside(a, b)
    reach = (x + a < lo) | (x + b > hi)
    return np.where(reach, base, 0.0)


def U_op(fld: PropagationField, chars: DiffChar, t: float, x, left: bool = False) -> np.ndarray:
    """Backward residual without the spatial drift term."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if chars.is_atom(t) and not left:
        return atom_residual(fld, chars, t, x, use_drift=False)
    g0, gx, gxx, gt = fld.evaluate(t, x, left)
    c = chars.diffusion_at(t, x)[:, 0, 0]
    scale = chars.kernel_scale(t, x)
    jumps = jump_integral(fld, chars.kernel, t, x, left)
    return gt + 0.5 * c * gxx + scale * jumps


def Ubar_op(fld: PropagationField, chars: DiffChar, t: float, x, left: bool = False) -> np.ndarray:
    """U plus <b, grad g>: the backward residual for special semimartingales."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if chars.is_atom(t) and not left:
        return atom_residual(fld, chars, t, x, use_drift=True)
    gx = fld.evaluate(t, x, left)[1]
    b = chars.drift_at(t, x)[:, 0]
    return U_op(fld, chars, t, x, left) + b * gx


def atom_residual(fld: PropagationField, chars: DiffChar, t: float, x, use_drift: bool = True) -> np.ndarray:
    """Residual carried by the integrator atom at ``t``.

    g(t, x) - g(t-, x) + int H_g(t, x, y) K_t(dy) [+ b_t g_x(t, x)]; with the
    drift term this equals int g(t, x + y) K_t(dy) + (1 - m) g(t, x) - g(t-, x)
    for a jump measure of mass m.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    g_right, gx = fld.evaluate(t, x)[:2]
    g_left = fld.value(t, x, left=fld._atom_key(t) is not None)
    k = chars.atom_measure(t)
    out = g_right - g_left + jump_integral(fld, k, t, x, eps=0.0)
    if use_drift:
        out = out + chars.atom_drift(t)[0] * gx
    return out


@dataclass
class ResidualScan:
    times: np.ndarray
    states: np.ndarray
    residuals: np.ndarray
    max_abs: float
    excluded_margin: dict
    atom_residuals: dict = field(default_factory=dict)
    use_drift: bool = False

    @property
    def argmax(self) -> tuple[float, float]:
        k, j = np.unravel_index(int(np.argmax(np.abs(self.residuals))), self.residuals.shape)
        return float(self.times[k]), float(self.states[j])

    def summary(self) -> dict:
        t, x = self.argmax if self.residuals.size else (None, None)
        return {"max_abs": float(self.max_abs), "n_t": int(len(self.times)), "n_x": int(len(self.states)),
                "worst_node": {"t": t, "x": x}, "excluded_margin": self.excluded_margin,
                "atom_max_abs": {repr(float(a)): float(np.max(np.abs(v))) for a, v in self.atom_residuals.items()},
                "operator": "Ubar" if self.use_drift else "U"}

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "residual"])
            for k, t in enumerate(self.times):
                for j, x in enumerate(self.states):
                    w.writerow([repr(float(t)), repr(float(x)), repr(float(self.residuals[k, j]))])
        return path


def backward_residual_scan(fld: PropagationField, chars: DiffChar, grid=None, use_drift: bool = False,
                           fraction: float = EXCLUDE_FRACTION) -> ResidualScan:
    """U (or U-bar) on the interior of the field grid.

    The spatial band of width L/8 next to each domain edge and the final
    T/8 of the time axis (where payoff kinks make g_xx singular) are skipped.
    Atom times are evaluated with the atom residual.
    """
    if grid is None:
        times = fld.times[fld.interior_times(fraction)]
        states = fld.states[fld.interior_states(fraction)]
    else:
        times, states = (np.asarray(a, dtype=float) for a in grid)
    op = Ubar_op if use_drift else U_op
    res = np.empty((len(times), len(states)))
    atom_res = {}
    for k, t in enumerate(times):
        if chars.is_atom(t):
            atom_res[float(t)] = atom_residual(fld, chars, float(t), states, use_drift)
            res[k] = atom_res[float(t)]
        else:
            res[k] = op(fld, chars, float(t), states)
    max_abs = float(np.max(np.abs(res))) if res.size else 0.0
    margin = {"space_band": fld.interior_band(fraction), "time_band": fraction * fld.horizon}
    return ResidualScan(times, states, res, max_abs, margin, atom_res, use_drift)
