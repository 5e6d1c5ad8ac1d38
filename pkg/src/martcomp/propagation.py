"""The propagation operator G_f(t, x) = E[f(X_T) | X_t = x] and its derivatives.

Fields are one-dimensional in space.  Three construction routes exist:
convolution with an FFT transition density, a Poisson-mixture series for
Gaussian jump-diffusions, and closed-form fields supplied by the caller.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import signal, stats

from .char_model import ATOM_TOL, ProcessModel
from .errors import ConfigurationError, DensityUnavailableError, DomainError
from .laws import Normal, PointMass
from .levy_analytics import (MASS_EPS, MIN_FFT_POINTS, T_MIN, CharFunction, SpatialGrid,
                             char_function, invert_cf, smoothness_order, tail_halfwidth)
from .payoffs import Payoff

EXCLUDE_FRACTION = 1.0 / 8.0
SERIES_TAIL = 1e-14


# --------------------------------------------------------------------------
# small numeric helpers


def fd_weights(nodes: np.ndarray, x0: float, order: int = 1) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative at ``x0``."""
    nodes = np.asarray(nodes, dtype=float)
    m = len(nodes)
    scale = max(np.max(np.abs(nodes - x0)), 1e-300)
    u = (nodes - x0) / scale
    A = np.vander(u, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[order] = float(np.prod(np.arange(1, order + 1)))
    return np.linalg.solve(A, rhs) / scale ** order


def time_derivative(times: np.ndarray, values: np.ndarray, stencil: int = 5) -> np.ndarray:
    """d/dt of ``values`` (rows indexed by ``times``) with 5-point stencils.

    Central where possible, one-sided near the ends; exact for quartics.
    """
    n = len(times)
    k = min(stencil, n)
    out = np.empty_like(values)
    if n == 1:
        out[:] = 0.0
        return out
    for i in range(n):
        lo = min(max(i - k // 2, 0), n - k)
        w = fd_weights(times[lo:lo + k], times[i])
        out[i] = np.tensordot(w, values[lo:lo + k], axes=(0, 0))
    return out


def _hermite(s: np.ndarray, h: float, y0, y1, m0, m1):
    s2 = s * s
    s3 = s2 * s
    return ((2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * m0
            + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * m1)


# --------------------------------------------------------------------------
# the field


@dataclass
class PropagationField:
    """G_f on a time x space grid.

    ``times`` includes every integrator atom; the row at an atom time holds
    the right limit G(theta, .) and ``left[theta]`` the left limit
    G(theta-, .) as a dict of arrays keyed like the main rows.
    """

    times: np.ndarray
    states: np.ndarray
    g: np.ndarray
    g_t: np.ndarray
    g_x: np.ndarray
    g_xx: np.ndarray
    source: str
    horizon: float
    left: dict = field(default_factory=dict)
    payoff: Payoff | None = None
    valid: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.valid is None:
            self.valid = np.ones(len(self.times), dtype=bool)

    # ---- geometry --------------------------------------------------------

    @property
    def h(self) -> float:
        return float(self.states[1] - self.states[0])

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.states[0]), float(self.states[-1])

    @property
    def half_width(self) -> float:
        lo, hi = self.domain
        return 0.5 * (hi - lo)

    @property
    def scale(self) -> float:
        return max(float(np.max(np.abs(self.g))), 1e-300)

    def interior_band(self, fraction: float = EXCLUDE_FRACTION) -> float:
        """Width of the excluded edge band: L * fraction, or the jump reach if larger."""
        return max(fraction * self.half_width, float(self.extras.get("jump_reach", 0.0)))

    def interior_states(self, fraction: float = EXCLUDE_FRACTION) -> np.ndarray:
        lo, hi = self.domain
        band = self.interior_band(fraction)
        return (self.states >= lo + band - 1e-12) & (self.states <= hi - band + 1e-12)

    def interior_times(self, fraction: float = EXCLUDE_FRACTION) -> np.ndarray:
        return (self.times <= self.horizon * (1.0 - fraction) + 1e-12) & self.valid

    def atoms(self) -> list[float]:
        return sorted(self.left)

    # ---- evaluation ------------------------------------------------------

    def _rows(self, t: float, left: bool):
        """(g, g_x, g_xx, g_t) rows at time t by linear interpolation."""
        times = self.times
        if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
            raise DomainError(f"time {t} outside field range [{times[0]}, {times[-1]}]")
        if left:
            for a, rows in self.left.items():
                if abs(a - t) <= ATOM_TOL:
                    return rows["g"], rows["g_x"], rows["g_xx"], rows["g_t"]
        k = int(np.searchsorted(times, t, side="right")) - 1
        k = min(max(k, 0), len(times) - 1)
        if abs(times[k] - t) <= 1e-13 or k == len(times) - 1:
            return self.g[k], self.g_x[k], self.g_xx[k], self.g_t[k]
        t1 = times[k + 1]
        w = (t - times[k]) / (t1 - times[k])
        right = self.left.get(self._atom_key(t1))
        if right is None:
            r = (self.g[k + 1], self.g_x[k + 1], self.g_xx[k + 1], self.g_t[k + 1])
        else:
            r = (right["g"], right["g_x"], right["g_xx"], right["g_t"])
        l = (self.g[k], self.g_x[k], self.g_xx[k], self.g_t[k])
        return tuple((1 - w) * a + w * b for a, b in zip(l, r))

    def _atom_key(self, t: float):
        for a in self.left:
            if abs(a - t) <= ATOM_TOL:
                return a
        return None

    def _locate(self, x, clip: bool = False):
        x = np.asarray(x, dtype=float)
        lo, hi = self.domain
        if clip:
            x = np.clip(x, lo, hi)
        elif np.any(x < lo - 1e-12) or np.any(x > hi + 1e-12):
            bad = x[(x < lo - 1e-12) | (x > hi + 1e-12)]
            raise DomainError(f"state {bad.flat[0]:.6g} outside field domain [{lo}, {hi}]")
        h = self.h
        u = (np.clip(x, lo, hi) - lo) / h
        i = np.minimum(np.floor(u).astype(int), len(self.states) - 2)
        return i, u - i

    def evaluate(self, t: float, x, left: bool = False, clip: bool = False):
        """(g, g_x, g_xx, g_t) at (t, x); cubic Hermite in x, linear in t."""
        g, gx, gxx, gt = self._rows(t, left)
        i, s = self._locate(x, clip)
        h = self.h
        val = _hermite(s, h, g[i], g[i + 1], gx[i], gx[i + 1])
        der = _hermite(s, h, gx[i], gx[i + 1], gxx[i], gxx[i + 1])
        sec = (1 - s) * gxx[i] + s * gxx[i + 1]
        tim = (1 - s) * gt[i] + s * gt[i + 1]
        return val, der, sec, tim

    def value(self, t: float, x, left: bool = False) -> np.ndarray:
        g, gx, _, _ = self._rows(t, left)
        i, s = self._locate(x)
        return _hermite(s, self.h, g[i], g[i + 1], gx[i], gx[i + 1])

    def gradient(self, t: float, x, left: bool = False) -> np.ndarray:
        return self.evaluate(t, x, left)[1]

    def hessian(self, t: float, x, left: bool = False) -> np.ndarray:
        return self.evaluate(t, x, left)[2]

    def time_derivative(self, t: float, x, left: bool = False) -> np.ndarray:
        return self.evaluate(t, x, left)[3]

    # ---- export ----------------------------------------------------------

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "g", "g_t", "g_x", "g_xx"])
            for k, t in enumerate(self.times):
                for j, x in enumerate(self.states):
                    w.writerow([repr(float(v)) for v in (t, x, self.g[k, j], self.g_t[k, j],
                                                          self.g_x[k, j], self.g_xx[k, j])])
        return path

    def summary(self) -> dict:
        return {"source": self.source, "n_t": int(len(self.times)), "n_x": int(len(self.states)),
                "h": self.h, "domain": list(self.domain), "horizon": self.horizon,
                "atoms": [float(a) for a in self.atoms()], "invalid_slices": int(np.sum(~self.valid))}


def time_grid(horizon: float, time_step: float, atoms=()) -> np.ndarray:
    n = max(int(round(horizon / time_step)), 1)
    base = np.linspace(0.0, horizon, n + 1)
    extra = [a for a in atoms if np.min(np.abs(base - a)) > ATOM_TOL]
    return np.union1d(base, np.asarray(extra, dtype=float))


def space_grid(half_width: float, space_step: float, center: float = 0.0) -> np.ndarray:
    n = int(round(half_width / space_step))
    return center + space_step * np.arange(-n, n + 1)


def _segments(times: np.ndarray, atoms) -> list[tuple[int, int]]:
    """Index ranges [i0, i1] between consecutive atoms (inclusive ends)."""
    cuts = [0] + [int(np.argmin(np.abs(times - a))) for a in atoms] + [len(times) - 1]
    cuts = sorted(set(cuts))
    return list(zip(cuts[:-1], cuts[1:]))


def _finish_time_derivatives(times, g, left: dict, atoms) -> np.ndarray:
    """g_t per segment; segment ends at an atom use the left-limit row."""
    g_t = np.zeros_like(g)
    for i0, i1 in _segments(times, atoms):
        rows = g[i0:i1 + 1].copy()
        key = next((a for a in left if abs(a - times[i1]) <= ATOM_TOL), None)
        if key is not None:
            rows[-1] = left[key]["g"]
        d = time_derivative(times[i0:i1 + 1], rows)
        g_t[i0:i1] = d[:-1]
        if key is not None:
            left[key]["g_t"] = d[-1]
        else:
            g_t[i1] = d[-1]
    return g_t


# --------------------------------------------------------------------------
# construction routes


def _terminal_rows(f: Payoff, states: np.ndarray):
    return f(states), f.gradient(states)[:, 0], f.hessian(states)[:, 0, 0]


def _phi(cf: CharFunction, t: float, horizon: float, z: np.ndarray, include_start: bool) -> np.ndarray:
    tau = horizon - t
    val = np.exp(tau * cf.psi(z))
    start = t - 2 * ATOM_TOL if include_start else t
    return val * cf.atom_factor(start, horizon, z)


def _convolve_slice(cf, f, states, t, horizon, include_start, grad_oracle):
    h = float(states[1] - states[0])
    tau = horizon - t
    t0 = t - 2 * ATOM_TOL if include_start else t
    a = tail_halfwidth(cf, tau, 1e-10, t0) + abs(cf.mean(tau, t0))
    n = MIN_FFT_POINTS
    while n * h < 2 * a + 4 * h:
        n *= 2
    grid = SpatialGrid(h, n)
    phi = _phi(cf, t, horizon, grid.frequencies, include_start)
    p, p1, p2 = invert_cf(phi, grid, (0, 1, 2))
    if np.min(p) < -1e-8 * max(1.0, float(np.max(p))):
        raise DensityUnavailableError(f"negative FFT density at tau={tau:.4g}")
    p = np.where(p < 0, 0.0, p)
    mass = float(np.sum(p) * h)
    if abs(mass - 1.0) > MASS_EPS:
        raise DensityUnavailableError(f"FFT density mass {mass:.6g} at tau={tau:.4g}")
    # keep the density only where it carries mass: a wide payoff grid would
    # let round-off of large payoff values swamp the convolution
    y = grid.states
    keep = np.abs(y) <= a + 2 * h
    y, p, p1, p2 = y[keep], p[keep], p1[keep], p2[keep]
    ext = states[0] + y[0] + h * np.arange(len(states) + len(y) - 1)
    fe = f(ext)
    g = signal.correlate(fe, p, mode="valid", method="fft") * h
    gx = -signal.correlate(fe, p1, mode="valid", method="fft") * h
    gxx = signal.correlate(fe, p2, mode="valid", method="fft") * h
    oracle = None
    if grad_oracle and f.grad is not None:
        oracle = signal.correlate(f.gradient(ext)[:, 0], p, mode="valid", method="fft") * h
    # slope kinks of f break the spectral accuracy of the lattice sum; the
    # leading Euler-Maclaurin term is -D h^2 B2(theta) / 2 * p(kappa - x)
    for kappa, jump in f.kinks:
        theta = ((kappa - ext[0]) / h) % 1.0
        if theta > 1 - 1e-9:
            theta = 0.0
        r = kappa - states
        c = jump * h * h * (theta * theta - theta + 1.0 / 6.0) / 2.0
        g = g + c * np.interp(r, y, p, left=0.0, right=0.0)
        gx = gx - c * np.interp(r, y, p1, left=0.0, right=0.0)
        gxx = gxx + c * np.interp(r, y, p2, left=0.0, right=0.0)
        if oracle is not None:
            lo_v, mid, hi_v = f.gradient(np.array([kappa - 1e-9, kappa, kappa + 1e-9]))[:, 0]
            err = (mid - 0.5 * (lo_v + hi_v)) if theta == 0.0 else (theta - 0.5) * (hi_v - lo_v)
            oracle = oracle - err * h * np.interp(r, y, p, left=0.0, right=0.0)
    return g, gx, gxx, oracle


def compute_G_convolution(model: ProcessModel, f: Payoff, time_step: float = 1 / 256,
                          space_step: float = 1 / 128, half_width: float = 8.0,
                          center: float | None = None, grad_oracle: bool = True) -> PropagationField:
    """G_f by convolving f with the FFT transition density of X.

    Works for Levy models and for constant characteristics with fixed-time
    jump laws.  The payoff is evaluated on a grid extended by the density's
    support, so the convolution is linear (no wrap-around and no damping
    window is needed for linearly growing payoffs).
    """
    if f.dimension != 1 or model.dimension != 1:
        raise ConfigurationError("convolution fields are one-dimensional")
    cf = char_function(model)
    T = model.horizon
    if not smoothness_order(cf, min(time_step, T), 0):
        raise DensityUnavailableError("transition density unavailable; use compute_G_mc")
    atoms = [a for a, m, _ in cf.atoms]
    center = float(model.x0[0]) if center is None else center
    times = time_grid(T, time_step, model.chars.integrator.atoms)
    states = space_grid(half_width, space_step, center)
    nt, nx = len(times), len(states)
    g = np.empty((nt, nx))
    gx = np.empty((nt, nx))
    gxx = np.empty((nt, nx))
    oracle = np.full((nt, nx), np.nan)
    valid = np.ones(nt, dtype=bool)
    left = {}
    fT = _terminal_rows(f, states)
    for k, t in enumerate(times):
        if T - t < T_MIN:
            g[k], gx[k], gxx[k] = fT
            oracle[k] = fT[1]
            valid[k] = T - t <= 1e-15
            continue
        try:
            g[k], gx[k], gxx[k], o = _convolve_slice(cf, f, states, t, T, False, grad_oracle)
        except DensityUnavailableError:
            g[k], gx[k], gxx[k] = fT
            o = None
            valid[k] = False
        if o is not None:
            oracle[k] = o
    for a in atoms:
        rows = _convolve_slice(cf, f, states, a, T, True, False)
        left[a] = {"g": rows[0], "g_x": rows[1], "g_xx": rows[2]}
    g_t = _finish_time_derivatives(times, g, left, atoms)
    extras = {"grad_oracle": oracle} if grad_oracle and f.grad is not None else {}
    return PropagationField(times, states, g, g_t, gx, gxx, "convolution", T, left, f, valid, extras)


# ---- Poisson mixture series ------------------------------------------------


def _gaussian_mixture_terms(model: ProcessModel, tau: float):
    """Weights, means and variances of X_tau - x as a Poisson mixture of normals."""
    chars = model.chars
    if not chars.is_constant or chars.dimension != 1:
        raise ConfigurationError("series field needs constant one-dimensional characteristics")
    if chars.atom_kernel is not None and not chars.atom_kernel.is_zero:
        raise ConfigurationError("series field does not handle fixed-time atoms")
    b, c = float(chars.constant_bc[0][0]), float(chars.constant_bc[1][0, 0])
    k = chars.kernel
    if k.is_zero:
        return np.array([1.0]), np.array([b * tau]), np.array([c * tau])
    if k.variant != "compound_poisson" or not isinstance(k.law, (Normal, PointMass)):
        raise ConfigurationError("series field needs normal or point jump laws")
    mu = k.law.first_moment()
    var = k.law.second_moment() - mu ** 2
    lam = k.intensity * tau
    n_max = int(stats.poisson.isf(SERIES_TAIL, lam)) + 5 if lam > 0 else 0
    n = np.arange(n_max + 1)
    w = stats.poisson.pmf(n, lam)
    drift = (b - k.intensity * mu) * tau
    return w, drift + n * mu, c * tau + n * var


def expectation_series(model: ProcessModel, f: Payoff, x, tau: float):
    """E[f(x + X_tau - X_0)] and its first two x-derivatives by Poisson series.

    Terms are summed until the Poisson tail mass is below 1e-14; with payoff
    moments of order one the truncation error is far below 1e-6.
    """
    if f.gaussian is None:
        raise ConfigurationError(f"payoff {f.name} has no normal expectation formula")
    x = np.asarray(x, dtype=float)
    w, m, v = _gaussian_mixture_terms(model, tau)
    e0, e1, e2 = f.gaussian(x[..., None] + m, np.broadcast_to(v, x.shape + v.shape))
    return e0 @ w, e1 @ w, e2 @ w


def compute_G_series(model: ProcessModel, f: Payoff, time_step: float = 1 / 256,
                     space_step: float = 1 / 128, half_width: float = 8.0,
                     center: float | None = None) -> PropagationField:
    """G_f for Gaussian jump-diffusions through the Poisson mixture representation."""
    T = model.horizon
    center = float(model.x0[0]) if center is None else center
    times = time_grid(T, time_step)
    states = space_grid(half_width, space_step, center)
    g = np.empty((len(times), len(states)))
    gx = np.empty_like(g)
    gxx = np.empty_like(g)
    fT = _terminal_rows(f, states)
    for k, t in enumerate(times):
        if T - t <= 1e-15:
            g[k], gx[k], gxx[k] = fT
        else:
            g[k], gx[k], gxx[k] = expectation_series(model, f, states, T - t)
    g_t = time_derivative(times, g)
    return PropagationField(times, states, g, g_t, gx, gxx, "analytic", T, {}, f)


def field_from_functions(fn: Callable, grad: Callable, hess: Callable, dt: Callable | None,
                         horizon: float, time_step: float, space_step: float,
                         half_width: float, center: float = 0.0, payoff: Payoff | None = None,
                         source: str = "analytic") -> PropagationField:
    """Tabulate a closed-form field; ``dt=None`` falls back to finite differences in t."""
    times = time_grid(horizon, time_step)
    states = space_grid(half_width, space_step, center)
    tt, xx = np.meshgrid(times, states, indexing="ij")
    g = np.asarray(fn(tt, xx), dtype=float) + np.zeros_like(tt)
    gx = np.asarray(grad(tt, xx), dtype=float) + np.zeros_like(tt)
    gxx = np.asarray(hess(tt, xx), dtype=float) + np.zeros_like(tt)
    g_t = (np.asarray(dt(tt, xx), dtype=float) + np.zeros_like(tt)) if dt is not None \
        else time_derivative(times, g)
    return PropagationField(times, states, g, g_t, gx, gxx, source, horizon, {}, payoff)


def compute_G(model: ProcessModel, f: Payoff, time_step: float = 1 / 256, space_step: float = 1 / 128,
              half_width: float = 8.0) -> PropagationField:
    """Convolution when a density exists, otherwise the series route."""
    try:
        return compute_G_convolution(model, f, time_step, space_step, half_width)
    except DensityUnavailableError:
        if f.gaussian is None:
            raise
        return compute_G_series(model, f, time_step, space_step, half_width)


def compute_G_mc(model: ProcessModel, f: Payoff, t: float, x, n_paths: int, seed: int,
                 n_steps: int = 64) -> tuple[float, float]:
    """Monte Carlo estimate of E[f(X_T) | X_t = x] with its standard error."""
    from .mc_engine import estimate_terminal, simulate_paths

    if n_paths < 100:
        raise ConfigurationError("compute_G_mc needs at least 100 paths")
    bundle = simulate_paths(model, n_paths, n_steps, seed, t0=t, x0=x, record="terminal")
    est = estimate_terminal(f, bundle)
    return est.mean, est.stderr


# --------------------------------------------------------------------------
# H and derivative diagnostics


def H_f(obj, t: float, x, y, left: bool = False) -> np.ndarray:
    """f(t, x + y) - f(t, x) - <grad f(t, x), y> for a field or a static payoff."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if isinstance(obj, PropagationField):
        g0, gx, _, _ = obj.evaluate(t, x, left)
        return obj.value(t, x + y, left) - g0 - gx * y
    if isinstance(obj, Payoff):
        if obj.dimension == 1:
            xs = np.broadcast_to(x, np.broadcast(x, y).shape).reshape(-1)
            ys = np.broadcast_to(y, xs.shape).reshape(-1)
            out = obj(xs + ys) - obj(xs) - obj.gradient(xs)[:, 0] * ys
            return out.reshape(np.broadcast(x, y).shape)
        xs = np.atleast_2d(x)
        ys = np.atleast_2d(y)
        return obj(xs + ys) - obj(xs) - np.sum(obj.gradient(xs) * ys, axis=1)
    raise ConfigurationError("H_f needs a PropagationField or a Payoff")


def derivative_check(fld: PropagationField, oracle_grad: Callable | None = None,
                     interior_only: bool = True) -> dict:
    """Gradient against an E[f'] oracle plus central-difference consistency."""
    rows = fld.interior_times() if interior_only else fld.valid.copy()
    cols = fld.interior_states() if interior_only else np.ones(len(fld.states), bool)
    h = fld.h
    if oracle_grad is not None:
        tt, xx = np.meshgrid(fld.times, fld.states, indexing="ij")
        oracle = np.asarray(oracle_grad(tt, xx), dtype=float) + np.zeros_like(tt)
    else:
        oracle = fld.extras.get("grad_oracle")
    report = {}
    if oracle is not None:
        err = np.abs(fld.g_x - oracle)[np.ix_(rows, cols)]
        ref = np.maximum(np.abs(oracle)[np.ix_(rows, cols)], 1.0)
        report["max_grad_error"] = float(np.nanmax(err)) if err.size else 0.0
        report["max_grad_rel_error"] = float(np.nanmax(err / ref)) if err.size else 0.0
    cd_x = (fld.g[:, 2:] - fld.g[:, :-2]) / (2 * h)
    cd_xx = (fld.g_x[:, 2:] - fld.g_x[:, :-2]) / (2 * h)
    inner = cols[1:-1]
    gap_x = np.abs(cd_x - fld.g_x[:, 1:-1])[np.ix_(rows, inner)]
    gap_xx = np.abs(cd_xx - fld.g_xx[:, 1:-1])[np.ix_(rows, inner)]
    report["max_fd_gap_x"] = float(np.max(gap_x)) if gap_x.size else 0.0
    report["max_fd_gap_xx"] = float(np.max(gap_xx)) if gap_xx.size else 0.0
    report["has_oracle"] = oracle is not None
    return report


def convexity_margin(fld: PropagationField, interior_only: bool = True) -> float:
    """Smallest second difference of g across x, relative to max |g|."""
    rows = fld.interior_times() if interior_only else fld.valid
    cols = fld.interior_states()[1:-1] if interior_only else np.ones(len(fld.states) - 2, bool)
    d2 = (fld.g[:, 2:] - 2 * fld.g[:, 1:-1] + fld.g[:, :-2])[np.ix_(rows, cols)]
    return float(np.min(d2)) / fld.scale


def monotonicity_margin(fld: PropagationField, interior_only: bool = True) -> float:
    rows = fld.interior_times() if interior_only else fld.valid
    cols = fld.interior_states()[1:] if interior_only else np.ones(len(fld.states) - 1, bool)
    d1 = np.diff(fld.g, axis=1)[np.ix_(rows, cols)]
    return float(np.min(d1)) / fld.scale
