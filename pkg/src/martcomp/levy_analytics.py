"""Characteristic exponents, FFT transition densities and regularity classifiers.

Only models with deterministic characteristics are handled here: Levy
processes and their additive extension with jump laws at fixed atom times.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize

from .char_model import ATOM_TOL, DiffChar, JumpKernel, ProcessModel
from .errors import ConfigurationError, DensityUnavailableError, IntegrabilityError
from .quadrature import dyadic_log_slope, log_panel_rule

T_MIN = 1e-4
MASS_EPS = 1e-4
TAIL_Z = 2.0 ** 10
MIN_FFT_POINTS = 2 ** 12


@dataclass(frozen=True)
class CharFunction:
    """Levy-Khintchine exponent psi plus optional fixed-time jump laws.

    ``phi(t0, t1, z)`` is the characteristic function of ``X_t1 - X_t0``;
    atoms in ``(t0, t1]`` contribute ``1 - m + m * cf_law(z)``.
    """

    exponent: object
    triplet_ref: DiffChar
    atoms: tuple = ()
    drift: float = 0.0
    diffusion: float = 0.0

    def psi(self, z) -> np.ndarray:
        return self.exponent(z)

    def atom_factor(self, t0: float, t1: float, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        out = np.ones(z.shape, dtype=complex)
        for time, mass, law in self.atoms:
            if t0 + ATOM_TOL < time <= t1 + ATOM_TOL and mass > 0:
                out = out * (1.0 - mass + mass * law.cf(z))
        return out

    def phi(self, tau: float, z, t0: float | None = None) -> np.ndarray:
        """cf of the increment over ``tau``; atoms counted on ``(t0, t0 + tau]`` when t0 is given."""
        val = np.exp(tau * self.exponent(z))
        if t0 is not None and self.atoms:
            val = val * self.atom_factor(t0, t0 + tau, z)
        return val

    def log_mgf(self, theta: float, tau: float, t0: float | None = None) -> float:
        """log E exp(theta X_tau); ``inf`` when not available in closed form."""
        k = self.triplet_ref.kernel
        val = tau * (self.drift * theta + 0.5 * self.diffusion * theta ** 2)
        if not k.is_zero:
            if k.variant == "compound_poisson" and hasattr(k.law, "log_mgf"):
                m1 = k.law.first_moment()
                val += tau * k.intensity * (np.exp(k.law.log_mgf(theta)) - 1.0 - theta * m1)
            elif k.variant == "levy_density" and np.isfinite(k.support[1]):
                val += tau * float(k.integrate(lambda x: np.expm1(theta * x) - theta * x))
            else:
                return np.inf
        if t0 is not None:
            for time, mass, law in self.atoms:
                if t0 + ATOM_TOL < time <= t0 + tau + ATOM_TOL and mass > 0:
                    if not hasattr(law, "log_mgf"):
                        return np.inf
                    val += np.log(1.0 - mass + mass * np.exp(law.log_mgf(theta)))
        return float(val)

    def mean(self, tau: float, t0: float | None = None) -> float:
        m = self.drift * tau
        if t0 is not None:
            for time, mass, law in self.atoms:
                if t0 + ATOM_TOL < time <= t0 + tau + ATOM_TOL:
                    m += mass * law.first_moment()
        return float(m)

    def variance(self, tau: float, t0: float | None = None) -> float:
        k = self.triplet_ref.kernel
        v = tau * (self.diffusion + (float(k.second_moment()) if not k.is_zero else 0.0))
        if t0 is not None:
            for time, mass, law in self.atoms:
                if t0 + ATOM_TOL < time <= t0 + tau + ATOM_TOL and mass > 0:
                    m1 = law.first_moment()
                    v += mass * law.second_moment() - (mass * m1) ** 2
        return float(v)


def _levy_triplet(chars: DiffChar) -> tuple[float, float, JumpKernel]:
    if chars.dimension != 1:
        raise ConfigurationError("transition densities are implemented for d = 1")
    if not chars.is_constant:
        raise ConfigurationError("characteristic functions need constant (b, c, K)")
    b, c = chars.constant_bc
    return float(b[0]), float(c[0, 0]), chars.kernel


def char_exponent(triplet: DiffChar, z):
    """i b z - c z^2 / 2 + int (e^{izx} - 1 - izx) K(dx), identity truncation."""
    b, c, kernel = _levy_triplet(triplet)
    if not is_special(kernel):
        raise IntegrabilityError("kernel is not special: int_{|x|>1} |x| K(dx) diverges")
    z = np.asarray(z, dtype=float)
    out = 1j * b * z - 0.5 * c * z * z
    if not kernel.is_zero:
        out = out + kernel.exponent(z)
    return out


def char_function(source) -> CharFunction:
    """CharFunction for a Levy or Grigelionis model (or a constant DiffChar)."""
    chars = source.chars if isinstance(source, ProcessModel) else source
    b, c, kernel = _levy_triplet(chars)
    if not is_special(kernel):
        raise IntegrabilityError("kernel is not special: int_{|x|>1} |x| K(dx) diverges")
    atoms = chars.atom_kernel.atoms if chars.atom_kernel is not None else ()

    def exponent(z, chars=chars):
        return char_exponent(chars, z)

    return CharFunction(exponent, chars, tuple(a for a in atoms if a[1] > 0), b, c)


# --------------------------------------------------------------------------
# densities


@dataclass
class DensityGrid:
    times: np.ndarray
    states: np.ndarray
    values: np.ndarray
    derivatives: dict = field(default_factory=dict)

    @property
    def spacing(self) -> float:
        return float(self.states[1] - self.states[0])

    def mass(self) -> np.ndarray:
        return np.atleast_2d(self.values).sum(axis=-1) * self.spacing

    def to_csv(self, path) -> Path:
        path = Path(path)
        vals = np.atleast_2d(self.values)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "p"])
            for t, row in zip(np.atleast_1d(self.times), vals):
                for x, p in zip(self.states, row):
                    w.writerow([repr(float(t)), repr(float(x)), repr(float(p))])
        return path


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform FFT grid ``x_k = -L + k h``, ``k = 0..n-1``, ``n h = 2 L``."""

    h: float
    n: int

    def __post_init__(self):
        if self.n < 4 or self.n % 4:
            raise ConfigurationError("FFT grids need a point count divisible by 4")

    @classmethod
    def from_extent(cls, half_width: float, h: float) -> "SpatialGrid":
        n = int(round(2 * half_width / h))
        return cls(float(h), n + (-n) % 4)

    @property
    def half_width(self) -> float:
        return 0.5 * self.n * self.h

    @property
    def states(self) -> np.ndarray:
        return -self.half_width + self.h * np.arange(self.n)

    @property
    def frequencies(self) -> np.ndarray:
        dz = 2 * np.pi / (self.n * self.h)
        return (np.arange(self.n) - self.n // 2) * dz


def invert_cf(phi_values: np.ndarray, grid: SpatialGrid, orders=(0,)) -> list[np.ndarray]:
    """Inverse Fourier transform of cf samples on ``grid.frequencies``.

    ``orders`` selects spatial derivatives of the density (0, 1, 2), obtained
    by multiplying with (-iz)^k before inversion.
    """
    z = grid.frequencies
    n = grid.n
    alt = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    dz = z[1] - z[0]
    out = []
    for k in orders:
        spec = phi_values * (-1j * z) ** k
        vals = (dz / (2 * np.pi)) * alt * np.fft.fft(alt * spec)
        out.append(vals.real)
    return out


def tail_halfwidth(cf: CharFunction, tau: float, mass_tol: float = 1e-8, t0: float | None = None) -> float:
    """Half-width a with P(|X_tau - mean| > a) < mass_tol.

    Uses the Chernoff bound when exponential moments exist and Chebyshev
    (from the variance) otherwise.
    """
    var = cf.variance(tau, t0)
    sd = np.sqrt(max(var, 0.0))
    if sd == 0.0:
        return 0.0
    mu = cf.mean(tau, t0)
    thetas = np.geomspace(1e-2, 1e3, 200) / sd

    if not np.isfinite(cf.log_mgf(thetas[0], tau, t0)):
        return float(sd / np.sqrt(mass_tol))
    sides = []
    with np.errstate(over="ignore", invalid="ignore"):
        for sgn in (1.0, -1.0):
            exps = []
            for th in thetas:
                lm = cf.log_mgf(sgn * th, tau, t0)
                if np.isfinite(lm):
                    exps.append((th, lm - sgn * th * mu))
            sides.append(exps)

    def bound(a):
        # one Chernoff bound per tail
        return sum(np.exp(min(lm - th * a for th, lm in exps)) for exps in sides)

    a = sd
    while bound(a) > mass_tol:
        a *= 1.1
        if a > 1e4 * sd:
            return float(sd / np.sqrt(mass_tol))
    return float(a)


def auto_grid(cf: CharFunction, t: float, h: float | None = None, mass_tol: float = 1e-8,
              t0: float | None = None) -> SpatialGrid:
    """FFT grid whose extent leaves less than ``mass_tol`` outside, at least 2^12 points."""
    a = tail_halfwidth(cf, t, mass_tol, t0) + abs(cf.mean(t, t0))
    if h is None:
        h = max(np.sqrt(max(cf.variance(t, t0), 1e-300)) / 32.0, 1e-6)
    n = MIN_FFT_POINTS
    while n * h < 2 * a:
        n *= 2
    return SpatialGrid(float(h), n)


def density_fft(cf: CharFunction, t: float, grid: SpatialGrid | None = None, derivatives=(),
                t0: float | None = None) -> DensityGrid:
    """Transition density of X_t on a uniform grid by FFT inversion of exp(t psi)."""
    if t < T_MIN:
        raise DensityUnavailableError(f"density requested at t={t} < t_min={T_MIN}", fallback="terminal")
    if not smoothness_order(cf, t, 0):
        raise DensityUnavailableError("characteristic function is not integrable; use Monte Carlo")
    grid = grid or auto_grid(cf, t, t0=t0)
    phi = cf.phi(t, grid.frequencies, t0)
    orders = (0,) + tuple(derivatives)
    inv = invert_cf(phi, grid, orders)
    p = inv[0]
    if np.min(p) < -1e-8 * max(1.0, np.max(p)):
        raise DensityUnavailableError(f"FFT density has negative values down to {np.min(p):.3g}; grid too coarse")
    p = np.where(p < 0, 0.0, p)
    dens = DensityGrid(np.array([t]), grid.states, p, dict(zip(derivatives, inv[1:])))
    mass = float(dens.mass()[0])
    if abs(mass - 1.0) > MASS_EPS:
        raise DensityUnavailableError(f"FFT density mass {mass} outside 1 +- {MASS_EPS}")
    return dens


# --------------------------------------------------------------------------
# classifiers


def smoothness_order(cf: CharFunction, t: float, n: int) -> bool:
    """Numeric test of int |z|^n |exp(t psi(z))| dz < inf.

    log|exp(t psi)| is sampled on |z| in [Z/2, Z], Z = 2^10; the upper
    envelope is fitted against log|z| and the decay must beat
    |z|^-(n + 1.1).  Inconclusive decay counts as False.
    """
    if n < 0 or n > 4:
        raise ConfigurationError("smoothness_order supports 0 <= n <= 4")
    z = np.geomspace(TAIL_Z / 2, TAIL_Z, 64)
    logmod = t * np.real(cf.psi(z))
    for _, mass, law in cf.atoms:
        with np.errstate(divide="ignore"):
            logmod = logmod + np.log(np.abs(1.0 - mass + mass * law.cf(z)))
    if not np.all(np.isfinite(logmod)):
        logmod = np.where(np.isfinite(logmod), logmod, -np.inf)
    envelope = np.maximum.accumulate(logmod[::-1])[::-1]
    if np.all(envelope == -np.inf):
        return True
    envelope = np.maximum(envelope, -1e300)
    slope = np.polyfit(np.log(z), envelope, 1)[0]
    return bool(-slope > n + 1.1)


def _require_1d(kernel: JumpKernel):
    if kernel.dimension != 1:
        raise ConfigurationError("regularity classifiers are defined for d = 1")


def is_type_C(triplet: DiffChar) -> bool:
    """c > 0 or int_{|x|<=1} |x| K(dx) = inf."""
    _require_1d(triplet.kernel)
    if triplet.dimension != 1:
        raise ConfigurationError("is_type_C needs d = 1")
    c = triplet.diffusion_at(0.0, np.zeros(1))[0, 0, 0]
    if c > 0:
        return True
    k = triplet.kernel
    if k.is_zero or k.finite_activity:
        return False
    return k.diverges(np.abs, at="zero")


def is_special(kernel: JumpKernel) -> bool:
    """int_{|x|>1} |x| K(dx) < inf."""
    if kernel.is_zero or kernel.variant in ("compound_poisson", "atom_kernel"):
        return True
    return not kernel.diverges(np.abs, at="infinity")


def small_jump_activity(kernel: JumpKernel, c_exp: float) -> bool:
    """liminf eps^-c int_{-eps}^{eps} x^2 K(dx) > 0 along eps = 2^-k, k = 4..20."""
    _require_1d(kernel)
    if not (0.0 < c_exp < 2.0):
        raise ConfigurationError("exponent must lie in (0, 2)")
    if kernel.is_zero or kernel.variant == "atom_kernel":
        return False
    ks = np.arange(4, 21)
    eps = 2.0 ** -ks
    v = np.array([float(kernel.integrate(lambda x: x * x, 0.0, e)) for e in eps])
    if np.any(v <= 0):
        return False
    ratio = v * eps ** -c_exp
    return dyadic_log_slope(ratio[-6:], ks[-6:]) >= -0.05


def second_moment_from_exponent(cf: CharFunction, t: float = 1.0, h: float = 1e-3) -> float:
    """E[X_t^2] = -phi''(0), by a central second difference of exp(t psi)."""
    phi = cf.phi(t, np.array([-h, 0.0, h]))
    return float(-np.real(phi[0] - 2.0 * phi[1] + phi[2]) / h ** 2)


def cumulative_mass(kernel: JumpKernel, lo: float, hi: float, n: int = 400):
    """Tabulated K-mass of ``lo < x <= r`` for r on a log grid (one side, x > 0)."""
    r = np.geomspace(lo, hi, n)
    xs, ws = log_panel_rule(lo, hi)
    dens = ws * kernel.density(xs)
    cum = np.concatenate([[0.0], np.cumsum(dens)])
    idx = np.searchsorted(xs, r, side="right")
    return r, cum[idx]


def find_truncation(kernel: JumpKernel, rel: float = 1e-4) -> float:
    """Cutoff eps with int_{|x|<=eps} x^2 K < rel * total kernel variance."""
    total = float(kernel.integrate(lambda x: np.minimum(x * x, 1.0))) \
        if kernel.diverges(lambda x: x * x, at="infinity") else float(kernel.second_moment())
    target = rel * total

    def excess(log_eps):
        return float(kernel.integrate(lambda x: x * x, 0.0, np.exp(log_eps))) - target

    hi = np.log(max(kernel.support[1] if np.isfinite(kernel.support[1]) else 1.0, 1e-12))
    lo = np.log(1e-30)
    if excess(hi) <= 0:
        return float(np.exp(hi))
    return float(np.exp(optimize.brentq(excess, lo, hi, xtol=1e-10)))
