"""Differential characteristics (b, c, K) of semimartingales and their integrators.

Characteristics are always expressed with the identity as truncation function,
so every model here has to be a special semimartingale.  A characteristic
triple is stored as densities against an :class:`IntegratorSpec`, which is
Lebesgue measure on ``[0, T]`` plus unit masses at fixed atom times.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Callable

import numpy as np

from .errors import ConfigurationError, DataError, IntegrabilityError
from .laws import PointMass
from .quadrature import dyadic_log_slope, gauss_legendre, log_panel_rule, panel_rule

ATOM_TOL = 1e-12
DENSITY_FLOOR = 1e-40
DENSITY_CAP = 1e12
DIVERGENCE_SLOPE = 0.05


# --------------------------------------------------------------------------
# integrators


@dataclass(frozen=True)
class IntegratorSpec:
    horizon: float
    atoms: tuple[float, ...] = ()
    kind: str = "lebesgue"

    def __post_init__(self):
        if not self.horizon > 0:
            raise ConfigurationError(f"horizon must be positive, got {self.horizon}")
        atoms = tuple(float(a) for a in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if self.kind not in ("lebesgue", "lebesgue_plus_atoms"):
            raise ConfigurationError(f"unknown integrator kind {self.kind!r}")
        if self.kind == "lebesgue" and atoms:
            raise ConfigurationError("a pure Lebesgue integrator cannot carry atoms")
        if any(b <= a for a, b in zip(atoms, atoms[1:])):
            raise ConfigurationError(f"atoms must be strictly increasing, got {atoms}")
        if atoms and (atoms[0] <= 0.0 or atoms[-1] > self.horizon):
            raise ConfigurationError(f"atoms must lie in (0, {self.horizon}], got {atoms}")

    @classmethod
    def lebesgue(cls, horizon: float) -> "IntegratorSpec":
        return cls(float(horizon))

    @classmethod
    def with_atoms(cls, horizon: float, atoms) -> "IntegratorSpec":
        atoms = tuple(sorted(float(a) for a in atoms))
        return cls(float(horizon), atoms, "lebesgue_plus_atoms" if atoms else "lebesgue")

    def has_atom(self, t: float) -> bool:
        return any(abs(t - a) <= ATOM_TOL for a in self.atoms)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "horizon": self.horizon, "atoms": list(self.atoms)}


def merge_integrators(a1: IntegratorSpec, a2: IntegratorSpec) -> IntegratorSpec:
    """Joint integrator ``t + sum of unit masses`` over the union of atom sets."""
    if abs(a1.horizon - a2.horizon) > ATOM_TOL:
        raise ConfigurationError(f"cannot merge integrators with horizons {a1.horizon} and {a2.horizon}")
    merged: list[float] = []
    for a in sorted(a1.atoms + a2.atoms):
        if not merged or a - merged[-1] > ATOM_TOL:
            merged.append(a)
    return IntegratorSpec.with_atoms(a1.horizon, merged)


# --------------------------------------------------------------------------
# jump kernels


def _u_minus_linear(u: np.ndarray) -> np.ndarray:
    """exp(iu) - 1 - iu without cancellation for small |u|."""
    re = -2.0 * np.sin(0.5 * u) ** 2
    small = np.abs(u) < 1e-2
    u2 = u * u
    im = np.where(small, -u * u2 / 6.0 * (1.0 - u2 / 20.0 * (1.0 - u2 / 42.0)), np.sin(u) - u)
    return re + 1j * im


@dataclass(frozen=True)
class JumpKernel:
    """A jump measure K on R^d minus the origin.

    ``variant`` is one of ``none``, ``compound_poisson``, ``levy_density`` or
    ``atom_kernel``.  State dependence is a scalar ``modulation(t, x) >= 0``
    multiplying the base measure; ``modulation_bound`` caps it (thinning in
    the simulator relies on it).
    """

    variant: str
    dimension: int = 1
    intensity: float = 0.0
    law: Any = None
    density: Callable[[np.ndarray], np.ndarray] | None = None
    small_jump_exponent: float = 0.0
    support: tuple[float, float] = (0.0, np.inf)
    atoms: tuple[tuple[float, float, Any], ...] = ()
    modulation: Callable | None = None
    modulation_bound: float = 1.0
    label: str = ""
    params: dict = field(default_factory=dict, compare=False)

    # ---- construction ---------------------------------------------------

    def __post_init__(self):
        if self.variant not in ("none", "compound_poisson", "levy_density", "atom_kernel"):
            raise ConfigurationError(f"unknown kernel variant {self.variant!r}")
        if self.variant == "compound_poisson":
            if self.intensity < 0 or not np.isfinite(self.intensity):
                raise ConfigurationError(f"intensity must be finite and >= 0, got {self.intensity}")
            if self.law is None:
                raise ConfigurationError("compound Poisson kernel needs a jump law")
            if getattr(self.law, "dimension", 1) != self.dimension:
                raise ConfigurationError("jump law dimension does not match kernel dimension")
        if self.variant == "levy_density":
            if self.dimension != 1:
                raise ConfigurationError("Levy densities are supported for d = 1 only")
            lo, hi = self.support
            if not (0.0 <= lo < hi):
                raise ConfigurationError(f"bad support {self.support}")
            self._check_levy_integrability()
        if self.variant == "atom_kernel":
            times = [a[0] for a in self.atoms]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ConfigurationError("atom kernel times must be strictly increasing")
            for t, mass, law in self.atoms:
                if not (0.0 <= mass <= 1.0):
                    raise ConfigurationError(f"atom mass at t={t} must lie in [0, 1], got {mass}")
                if mass > 0 and law is None:
                    raise ConfigurationError(f"atom at t={t} has mass but no law")

    @classmethod
    def none(cls, dimension: int = 1) -> "JumpKernel":
        return cls("none", dimension, label="none")

    @classmethod
    def compound_poisson(cls, intensity: float, law, modulation=None,
                         modulation_bound: float = 1.0) -> "JumpKernel":
        d = getattr(law, "dimension", 1)
        return cls("compound_poisson", d, float(intensity), law, modulation=modulation,
                   modulation_bound=float(modulation_bound),
                   label=f"compound_poisson({intensity}, {law.to_dict()})")

    @classmethod
    def levy_density(cls, density, small_jump_exponent: float, support=(0.0, np.inf),
                     modulation=None, modulation_bound: float = 1.0, label: str = "levy_density",
                     params: dict | None = None) -> "JumpKernel":
        return cls("levy_density", 1, density=density, small_jump_exponent=float(small_jump_exponent),
                   support=(float(support[0]), float(support[1])), modulation=modulation,
                   modulation_bound=float(modulation_bound), label=label, params=params or {})

    @classmethod
    def power_law(cls, alpha: float, scale: float = 1.0, r_lo: float = 0.0,
                  r_hi: float = 1.0) -> "JumpKernel":
        """Symmetric density ``scale * |x|^(-1-alpha)`` on ``r_lo < |x| <= r_hi``."""
        def density(x, alpha=alpha, scale=scale, r_lo=r_lo, r_hi=r_hi):
            ax = np.abs(x)
            inside = (ax > r_lo) & (ax <= r_hi)
            with np.errstate(divide="ignore", over="ignore"):
                return np.where(inside, scale * ax ** (-1.0 - alpha), 0.0)

        params = {"type": "power_law", "alpha": alpha, "scale": scale, "r_lo": r_lo, "r_hi": r_hi}
        return cls.levy_density(density, alpha, (r_lo, r_hi),
                                label=f"power_law(alpha={alpha}, scale={scale}, r=({r_lo},{r_hi}))",
                                params=params)

    @classmethod
    def atom_kernel(cls, atoms: dict) -> "JumpKernel":
        """``atoms`` maps time -> (mass, law) with mass in [0, 1]."""
        items = tuple((float(t), float(m), law) for t, (m, law) in sorted(atoms.items()))
        d = next((getattr(law, "dimension", 1) for _, m, law in items if law is not None), 1)
        return cls("atom_kernel", d, atoms=items,
                   label="atom_kernel(" + ", ".join(f"{t}:{m}" for t, m, _ in items) + ")")

    def scaled(self, factor: float) -> "JumpKernel":
        """Same kernel with total mass multiplied by ``factor``."""
        if self.variant == "compound_poisson":
            return replace(self, intensity=self.intensity * factor)
        if self.variant == "levy_density":
            base = self.density
            return replace(self, density=lambda x: factor * base(x), label=f"{factor}*{self.label}")
        if self.variant == "none":
            return self
        raise ConfigurationError("atom kernels are scaled per atom")

    def with_modulation(self, modulation, bound: float) -> "JumpKernel":
        return replace(self, modulation=modulation, modulation_bound=float(bound))

    # ---- basic queries --------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return (self.variant == "none"
                or (self.variant == "compound_poisson" and self.intensity == 0.0)
                or (self.variant == "atom_kernel" and all(m == 0 for _, m, _ in self.atoms)))

    @property
    def finite_activity(self) -> bool:
        return self.variant != "levy_density"

    def atom_times(self) -> tuple[float, ...]:
        return tuple(t for t, _, _ in self.atoms)

    def measure_at(self, t: float) -> "JumpKernel":
        """The finite measure sitting on atom time ``t`` (zero if none)."""
        for time, mass, law in self.atoms:
            if abs(time - t) <= ATOM_TOL:
                if mass == 0.0:
                    return JumpKernel.none(self.dimension)
                return JumpKernel.compound_poisson(mass, law)
        return JumpKernel.none(self.dimension)

    def modulation_at(self, t: float, x) -> np.ndarray:
        """Per-state multiplier, shape ``(n,)`` for ``x`` of shape ``(n,)`` or ``(n, d)``."""
        x = np.asarray(x, dtype=float)
        n = x.shape[0] if x.ndim else 1
        if self.modulation is None:
            return np.ones(n)
        m = np.broadcast_to(np.asarray(self.modulation(t, x), dtype=float), (n,)).copy()
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise DataError(f"kernel modulation must be finite and >= 0 at t={t}")
        return m

    # ---- quadrature -----------------------------------------------------

    def _density_side_rule(self, lo: float, hi: float):
        """Nodes/weights on ``lo < x <= hi`` (x > 0) already multiplied by K(x)."""
        a = max(lo, self.support[0], DENSITY_FLOOR)
        b = min(hi, self.support[1], DENSITY_CAP)
        if b <= a:
            return np.empty(0), np.empty(0)
        x, w = log_panel_rule(a, b)
        return x, w

    def nodes(self, lo: float = 0.0, hi: float = np.inf) -> tuple[np.ndarray, np.ndarray]:
        """Quadrature nodes and weights of K restricted to ``lo < |x| <= hi``."""
        if self.variant in ("none", "atom_kernel") or self.is_zero:
            return np.empty((0,) if self.dimension == 1 else (0, self.dimension)), np.empty(0)
        if self.variant == "compound_poisson":
            x, w = self.law.nodes(lo, hi)
            return x, self.intensity * w
        xp, wp = self._density_side_rule(lo, hi)
        x = np.concatenate([-xp[::-1], xp])
        w = np.concatenate([wp[::-1], wp]) * self.density(x)
        return x, w

    def integrate(self, g: Callable, lo: float = 0.0, hi: float = np.inf):
        """Integral of ``g`` against K on ``lo < |x| <= hi``.

        ``g`` maps an array of jump sizes (shape ``(m,)``, or ``(m, d)``) to
        values of shape ``(m,)`` or ``(m, k)``; the result has shape ``()`` or
        ``(k,)`` accordingly.
        """
        x, w = self.nodes(lo, hi)
        if w.size == 0:
            probe = np.asarray(g(np.zeros((1,) + x.shape[1:])))
            return np.zeros(probe.shape[1:]) if probe.ndim > 1 else 0.0
        vals = np.asarray(g(x), dtype=float)
        return np.tensordot(w, vals, axes=(0, 0))

    def mass_outside(self, a: float, b: float) -> float:
        """K-mass of jumps landing outside ``[a, b]`` (d = 1)."""
        if self.is_zero or self.variant == "atom_kernel":
            return 0.0
        if self.variant == "compound_poisson":
            return self.intensity * self.law.mass_outside(a, b)
        total = 0.0
        if b < self.support[1]:
            total += float(np.sum(self._side_mass(max(b, 0.0), np.inf, +1)))
        if a > -self.support[1]:
            total += float(np.sum(self._side_mass(max(-a, 0.0), np.inf, -1)))
        return total

    def _side_mass(self, lo: float, hi: float, sign: int) -> float:
        x, w = self._density_side_rule(lo, hi)
        return float(np.sum(w * self.density(sign * x))) if w.size else 0.0

    def shell_integral(self, g: Callable, lo: float, hi: float) -> float:
        """Integral over the shell ``lo < |x| <= hi`` with a scalar-valued g (d = 1)."""
        return float(self.integrate(g, lo, hi))

    def diverges(self, g: Callable, at: str = "zero") -> bool:
        """Dyadic-refinement divergence proxy for ``int g dK`` near 0 or infinity.

        The shell integral is recomputed on ``2^-k < |x| <= 1`` (or
        ``1 < |x| <= 2^k``) for k = 4..20; a log-log slope above 0.05 over the
        last levels means the integral keeps growing.
        """
        if self.is_zero or self.variant != "levy_density":
            return False
        ks = np.arange(4, 21)
        if at == "zero":
            vals = np.array([abs(self.shell_integral(g, 2.0 ** -k, 1.0)) for k in ks])
        else:
            vals = np.array([abs(self.shell_integral(g, 1.0, 2.0 ** k)) for k in ks])
        return dyadic_log_slope(vals[-6:], ks[-6:]) > DIVERGENCE_SLOPE

    def _check_levy_integrability(self):
        small = self.diverges(lambda x: x * x, at="zero")
        large = self.diverges(lambda x: np.ones_like(x), at="infinity")
        if small or large:
            raise IntegrabilityError(f"{self.label}: integral of min(|x|^2, 1) against K diverges")

    # ---- moments and exponent -------------------------------------------

    def first_moment(self):
        """int x K(dx) (finite only for special kernels)."""
        if self.is_zero:
            return 0.0 if self.dimension == 1 else np.zeros(self.dimension)
        if self.variant == "compound_poisson":
            return self.intensity * self.law.first_moment()
        if self.variant == "levy_density":
            return float(self.integrate(lambda x: x))
        raise ConfigurationError("first moment of an atom kernel is taken per atom")

    def second_moment(self):
        if self.is_zero:
            return 0.0 if self.dimension == 1 else np.zeros((self.dimension, self.dimension))
        if self.variant == "compound_poisson":
            return self.intensity * self.law.second_moment()
        if self.variant == "levy_density":
            return float(self.integrate(lambda x: x * x))
        raise ConfigurationError("second moment of an atom kernel is taken per atom")

    def total_mass(self, lo: float = 0.0) -> float:
        if self.is_zero:
            return 0.0
        if self.variant == "compound_poisson":
            return self.intensity if lo == 0.0 else float(self.integrate(lambda x: np.ones(len(x)), lo))
        return float(self.integrate(lambda x: np.ones_like(x), lo))

    def exponent(self, z) -> np.ndarray:
        """int (e^{i<z,x>} - 1 - i<z,x>) K(dx) for an array of frequencies."""
        if self.is_zero:
            return np.zeros(np.shape(z)[0] if np.ndim(z) else 1, dtype=complex) \
                if np.ndim(z) else np.complex128(0.0)
        if self.variant == "compound_poisson":
            z = np.asarray(z, dtype=float)
            m = self.law.first_moment()
            if self.dimension == 1:
                return self.intensity * (self.law.cf(z) - 1.0 - 1j * z * m)
            z2 = np.atleast_2d(z)
            return self.intensity * (self.law.cf(z2) - 1.0 - 1j * z2 @ np.asarray(m))
        if self.variant == "levy_density":
            return self._levy_exponent(np.asarray(z, dtype=float))
        raise ConfigurationError("atom kernels have no Levy exponent")

    def _levy_exponent(self, z: np.ndarray) -> np.ndarray:
        scalar = z.ndim == 0
        z = np.atleast_1d(z)
        zmax = max(float(np.max(np.abs(z))), 1.0)
        lo, hi = self.support
        a = max(lo, DENSITY_FLOOR)
        b = min(hi, DENSITY_CAP)
        if hi > DENSITY_CAP / 10:
            b = self._effective_upper(a)
        # |zx| <= 1e-2 below ``near``: Taylor series through 5th order in zx
        near = min(max(1e-2 / zmax, a), b)
        split = min(max(1.0 / zmax, near), b)
        parts = []
        if split > near:
            parts.append(log_panel_rule(near, split))
        if b > split:
            n = max(1, int(np.ceil((b - split) * zmax / (2 * np.pi))))
            if n > 200000:
                raise IntegrabilityError(f"{self.label}: support too wide for the exponent quadrature")
            parts.append(panel_rule(np.linspace(split, b, n + 1), 16))
        out = np.zeros(z.shape, dtype=complex)
        if near > a:
            xn, wn = log_panel_rule(a, near)
            for sign in (1.0, -1.0):
                x = sign * xn
                wk = wn * self.density(x)
                for k, fact in ((2, 2.0), (3, 6.0), (4, 24.0), (5, 120.0)):
                    out += (1j * z) ** k / fact * float(np.sum(wk * x ** k))
        if parts:
            xp = np.concatenate([p[0] for p in parts])
            wp = np.concatenate([p[1] for p in parts])
            for sign in (1.0, -1.0):
                x = sign * xp
                wk = wp * self.density(x)
                for start in range(0, z.size, 256):
                    zz = z[start:start + 256]
                    out[start:start + 256] += _u_minus_linear(np.multiply.outer(zz, x)) @ wk
        if lo == 0.0:
            # power-law remainder below the floor: -z^2/2 * int_0^a x^2 K(x) dx per side
            alpha = min(self.small_jump_exponent, 1.999)
            for sign in (1.0, -1.0):
                k_a = float(self.density(np.array([sign * a]))[0])
                out += -0.5 * z ** 2 * k_a * a ** 3 / (2.0 - alpha)
        return out[0] if scalar else out

    def _effective_upper(self, a: float) -> float:
        """Truncation radius beyond which the tail of int |x| K is below 1e-13."""
        r = max(1.0, a * 2)
        while r < DENSITY_CAP:
            tail = self.shell_integral(np.abs, r, min(self.support[1], r * 1e3))
            if tail < 1e-13:
                return min(r, self.support[1])
            r *= 2.0
        raise IntegrabilityError(f"{self.label}: heavy tail, first moment not integrable")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"variant": self.variant, "label": self.label}
        if self.variant == "compound_poisson":
            out.update(intensity=self.intensity, law=self.law.to_dict())
        elif self.variant == "levy_density":
            out.update(small_jump_exponent=self.small_jump_exponent,
                       support=[self.support[0], self.support[1] if np.isfinite(self.support[1]) else None],
                       params=self.params)
        elif self.variant == "atom_kernel":
            out["atoms"] = [{"time": t, "mass": m, "law": law.to_dict() if law is not None else None}
                            for t, m, law in self.atoms]
        out["modulated"] = self.modulation is not None
        return out


# --------------------------------------------------------------------------
# differential characteristics


def _as_states(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if d == 1:
        return x.reshape(-1, 1)
    return x.reshape(-1, d)


@dataclass(frozen=True)
class DiffChar:
    """Differential characteristics (b, c, K) of a d-dimensional process.

    ``drift(t, x)`` and ``diffusion(t, x)`` receive ``x`` of shape ``(n, d)``
    and return ``(n, d)`` and ``(n, d, d)``.  ``kernel`` is the jump kernel
    per unit Lebesgue time; ``atom_kernel`` (optional) carries the jump laws
    at the integrator atoms.  The drift at an atom time is the mean of the
    atom's jump measure (identity truncation makes that predictable jump part
    of the drift).
    """

    drift: Callable
    diffusion: Callable
    kernel: JumpKernel
    integrator: IntegratorSpec
    measure_label: str = "P"
    dimension: int = 1
    atom_kernel: JumpKernel | None = None
    constant_bc: tuple[np.ndarray, np.ndarray] | None = field(default=None, compare=False)
    description: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kernel.dimension != self.dimension:
            raise ConfigurationError("kernel dimension does not match characteristics dimension")
        if self.kernel.variant == "atom_kernel":
            raise ConfigurationError("atom kernels belong in DiffChar.atom_kernel")
        if self.atom_kernel is not None:
            own = set(self.integrator.atoms)
            for t in self.atom_kernel.atom_times():
                if not any(abs(t - a) <= ATOM_TOL for a in own):
                    raise ConfigurationError(f"atom kernel time {t} is not an integrator atom")

    @classmethod
    def constant(cls, b, c, kernel: JumpKernel | None = None, integrator: IntegratorSpec | None = None,
                 measure_label: str = "P", atom_kernel: JumpKernel | None = None,
                 horizon: float = 1.0) -> "DiffChar":
        b = np.atleast_1d(np.asarray(b, dtype=float))
        d = b.size
        c = np.asarray(c, dtype=float).reshape(d, d) if np.ndim(c) else np.full((1, 1), float(c))
        if c.shape != (d, d):
            raise ConfigurationError(f"diffusion must be {d}x{d}")
        _check_psd(c[None], "constant diffusion")
        kernel = kernel if kernel is not None else JumpKernel.none(d)
        if integrator is None:
            atoms = atom_kernel.atom_times() if atom_kernel is not None else ()
            integrator = IntegratorSpec.with_atoms(horizon, atoms)
        b_ro, c_ro = b.copy(), c.copy()
        b_ro.setflags(write=False)
        c_ro.setflags(write=False)

        def drift(t, x, b=b_ro):
            return np.broadcast_to(b, (np.shape(x)[0], b.size)).copy()

        def diffusion(t, x, c=c_ro):
            return np.broadcast_to(c, (np.shape(x)[0],) + c.shape).copy()

        return cls(drift, diffusion, kernel, integrator, measure_label, d, atom_kernel, (b_ro, c_ro),
                   {"drift": b.tolist(), "diffusion": c.tolist()})

    # ---- evaluation ------------------------------------------------------

    def drift_at(self, t: float, x) -> np.ndarray:
        xs = _as_states(x, self.dimension)
        return np.asarray(self.drift(t, xs), dtype=float).reshape(xs.shape[0], self.dimension)

    def diffusion_at(self, t: float, x) -> np.ndarray:
        xs = _as_states(x, self.dimension)
        d = self.dimension
        return np.asarray(self.diffusion(t, xs), dtype=float).reshape(xs.shape[0], d, d)

    def kernel_scale(self, t: float, x) -> np.ndarray:
        return self.kernel.modulation_at(t, _as_states(x, self.dimension) if self.dimension > 1
                                         else np.asarray(x, dtype=float).reshape(-1))

    def is_atom(self, t: float) -> bool:
        return self.integrator.has_atom(t)

    def atom_measure(self, t: float) -> JumpKernel:
        if self.atom_kernel is None:
            return JumpKernel.none(self.dimension)
        return self.atom_kernel.measure_at(t)

    def atom_drift(self, t: float) -> np.ndarray:
        k = self.atom_measure(t)
        return np.atleast_1d(np.asarray(k.first_moment(), dtype=float))

    @property
    def is_constant(self) -> bool:
        return self.constant_bc is not None and self.kernel.modulation is None

    def validate(self, points=None, rng: np.random.Generator | None = None, n: int = 1000):
        """Symmetry/PSD of c at sampled (t, x); raises DataError on failure."""
        rng = rng or np.random.default_rng(0)
        T = self.integrator.horizon
        if points is None:
            ts = rng.uniform(0, T, n)
            xs = rng.normal(0, 2, (n, self.dimension))
        else:
            ts, xs = points
        for t, x in zip(ts, xs):
            c = self.diffusion_at(float(t), x[None])
            _check_psd(c, f"diffusion at t={t:.4g}")
        return True

    def to_dict(self) -> dict[str, Any]:
        return {
            "measure": self.measure_label,
            "dimension": self.dimension,
            "integrator": self.integrator.to_dict(),
            "kernel": self.kernel.to_dict(),
            "atom_kernel": self.atom_kernel.to_dict() if self.atom_kernel is not None else None,
            **self.description,
        }


def _check_psd(c: np.ndarray, what: str):
    scale = float(np.max(np.abs(c))) if c.size else 0.0
    tol = 1e-10 * max(scale, 1e-300)
    if np.max(np.abs(c - np.swapaxes(c, -1, -2))) > tol:
        raise DataError(f"{what} is not symmetric")
    eig = np.linalg.eigvalsh(0.5 * (c + np.swapaxes(c, -1, -2)))
    if np.min(eig) < -tol:
        raise DataError(f"{what} is not positive semidefinite (min eigenvalue {np.min(eig):.3g})")


def rebase_characteristics(chars: DiffChar, merged: IntegratorSpec) -> DiffChar:
    """Re-express ``chars`` against a finer integrator.

    The Lebesgue densities are unchanged; atoms of ``merged`` that ``chars``
    does not own receive zero drift and zero kernel mass.
    """
    for a in chars.integrator.atoms:
        if not merged.has_atom(a):
            raise ConfigurationError(f"atom {a} is not contained in the merged integrator")
    if abs(chars.integrator.horizon - merged.horizon) > ATOM_TOL:
        raise ConfigurationError("horizon mismatch in rebase")
    own = {t: (m, law) for t, m, law in (chars.atom_kernel.atoms if chars.atom_kernel else ())}
    atoms = {}
    for a in merged.atoms:
        hit = next((v for t, v in own.items() if abs(t - a) <= ATOM_TOL), None)
        atoms[a] = hit if hit is not None else (0.0, None)
    atom_kernel = JumpKernel.atom_kernel(atoms) if atoms else None
    return replace(chars, integrator=merged, atom_kernel=atom_kernel)


def characteristic_integrals(chars: DiffChar, times, test_fns=(), state=None, order: int = 32):
    """Lebesgue-Stieltjes integrals B_t, C_t and int g d(nu) along a frozen state.

    Used to validate a rebase: integrating the rebased characteristics against
    the merged integrator must reproduce the originals.
    """
    d = chars.dimension
    x = np.zeros((1, d)) if state is None else _as_states(state, d)[:1]
    out_b, out_c, out_nu = [], [], []
    for t in np.atleast_1d(times):
        t = float(t)
        s, w = gauss_legendre(0.0, t, order) if t > 0 else (np.empty(0), np.empty(0))
        B = np.zeros(d)
        C = np.zeros((d, d))
        nu = np.zeros(len(test_fns))
        for si, wi in zip(s, w):
            B += wi * chars.drift_at(si, x)[0]
            C += wi * chars.diffusion_at(si, x)[0]
            if test_fns:
                scale = chars.kernel_scale(si, x)[0]
                nu += wi * scale * np.array([float(chars.kernel.integrate(g)) for g in test_fns])
        for a in chars.integrator.atoms:
            if a <= t + ATOM_TOL:
                B += chars.atom_drift(a)
                if test_fns:
                    k = chars.atom_measure(a)
                    nu += np.array([float(k.integrate(g)) for g in test_fns])
        out_b.append(B)
        out_c.append(C)
        out_nu.append(nu)
    return {"B": np.array(out_b), "C": np.array(out_c), "nu": np.array(out_nu)}


# --------------------------------------------------------------------------
# process models


@dataclass(frozen=True)
class ProcessModel:
    family: str
    chars: DiffChar
    x0: np.ndarray
    is_martingale_model: bool = False
    name: str = ""

    def __post_init__(self):
        if self.family not in ("levy", "ito", "grigelionis"):
            raise ConfigurationError(f"unknown process family {self.family!r}")
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if x0.size != self.chars.dimension:
            raise ConfigurationError("x0 dimension does not match characteristics")
        object.__setattr__(self, "x0", x0)
        kind = self.chars.integrator.kind
        if self.family == "grigelionis" and kind != "lebesgue_plus_atoms":
            raise ConfigurationError("grigelionis models need an integrator with atoms")
        if self.family in ("levy", "ito") and kind != "lebesgue":
            raise ConfigurationError(f"{self.family} models use the Lebesgue integrator")
        if self.family == "levy":
            check_constant(self.chars)

    @property
    def horizon(self) -> float:
        return self.chars.integrator.horizon

    @property
    def dimension(self) -> int:
        return self.chars.dimension

    @property
    def has_deterministic_chars(self) -> bool:
        """True when (b, c, K) do not depend on state or time between atoms."""
        return self.chars.is_constant

    def with_chars(self, chars: DiffChar) -> "ProcessModel":
        return replace(self, chars=chars)

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, "x0": self.x0.tolist(),
                "martingale": self.is_martingale_model, "chars": self.chars.to_dict()}


def check_constant(chars: DiffChar, n: int = 1000, seed: int = 0) -> None:
    """Levy characteristics must evaluate identically at random (t, x)."""
    rng = np.random.default_rng(seed)
    T = chars.integrator.horizon
    ts = rng.uniform(0, T, n)
    xs = rng.normal(0, 3, (n, chars.dimension))
    b0 = chars.drift_at(0.0, np.zeros((1, chars.dimension)))[0]
    c0 = chars.diffusion_at(0.0, np.zeros((1, chars.dimension)))[0]
    m0 = chars.kernel_scale(0.0, np.zeros((1, chars.dimension)))[0]
    for t, x in zip(ts, xs):
        if not (np.array_equal(chars.drift_at(t, x[None])[0], b0)
                and np.array_equal(chars.diffusion_at(t, x[None])[0], c0)
                and chars.kernel_scale(t, x[None])[0] == m0):
            raise ConfigurationError("levy family requires characteristics constant in (t, x)")


def brownian(c: float = 1.0, b: float = 0.0, horizon: float = 1.0, x0: float = 0.0,
             measure_label: str = "P") -> ProcessModel:
    chars = DiffChar.constant(b, c, horizon=horizon, measure_label=measure_label)
    return ProcessModel("levy", chars, np.array([x0]), b == 0.0, name=f"BM(c={c}, b={b})")


def levy_model(b: float = 0.0, c: float = 0.0, kernel: JumpKernel | None = None,
               horizon: float = 1.0, x0: float = 0.0, measure_label: str = "P") -> ProcessModel:
    chars = DiffChar.constant(b, c, kernel, horizon=horizon, measure_label=measure_label)
    return ProcessModel("levy", chars, np.array([x0]), b == 0.0,
                        name=f"Levy(b={b}, c={c}, K={chars.kernel.label})")


def point_jumps(intensity: float, size: float) -> JumpKernel:
    return JumpKernel.compound_poisson(intensity, PointMass(size))
