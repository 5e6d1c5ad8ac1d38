"""Path simulation for Levy, Ito and Grigelionis models.

Each path draws from its own Philox stream keyed by ``seed * 2**64 + i``,
so path i is the same whatever the number of paths or the block size.
All random numbers of a path are drawn up front in a fixed order; the
vectorised Euler loop then only consumes them.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize

from .char_model import ATOM_TOL, JumpKernel, ProcessModel
from .errors import ConfigurationError, DataError
from .levy_analytics import find_truncation, is_special
from .quadrature import log_panel_rule

BLOCK = 4096
Z99 = 2.5758293035489004


def path_rng(seed: int, index: int) -> np.random.Generator:
    if not (0 <= seed < 2 ** 64):
        raise ConfigurationError("seed must lie in [0, 2^64)")
    return np.random.Generator(np.random.Philox(key=int(seed) * 2 ** 64 + int(index)))


@dataclass
class MCEstimate:
    mean: float
    stderr: float
    n: int

    def __post_init__(self):
        if self.stderr < 0:
            raise ValueError("stderr must be >= 0")

    @property
    def ci99(self) -> tuple[float, float]:
        return self.mean - Z99 * self.stderr, self.mean + Z99 * self.stderr

    def to_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "n": self.n, "ci99": list(self.ci99)}


@dataclass
class PathBundle:
    grid: np.ndarray
    states: np.ndarray
    terminal: np.ndarray
    jump_ptr: np.ndarray
    jump_time: np.ndarray
    jump_size: np.ndarray
    jump_kind: np.ndarray
    continuous: np.ndarray
    x0: np.ndarray
    seed: int
    scheme_meta: dict = field(default_factory=dict)
    pre_atom: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return int(self.terminal.shape[0])

    def jumps_of(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        s, e = self.jump_ptr[i], self.jump_ptr[i + 1]
        return self.jump_time[s:e], self.jump_size[s:e]

    def jump_counts(self) -> np.ndarray:
        return np.diff(self.jump_ptr)

    def to_npz(self, path) -> Path:
        path = Path(path)
        extra = {f"pre_atom_{k}": v for k, v in self.pre_atom.items()}
        np.savez(path, grid=self.grid, states=self.states, terminal=self.terminal, jump_ptr=self.jump_ptr,
                 jump_time=self.jump_time, jump_size=self.jump_size, jump_kind=self.jump_kind,
                 continuous=self.continuous, x0=self.x0, seed=np.array(self.seed, dtype=np.uint64), **extra)
        return path

    def sample_csv(self, path, n: int = 100) -> Path:
        path = Path(path)
        d = self.terminal.shape[1]
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["path", "t"] + [f"x{i + 1}" for i in range(d)])
            for p in range(min(n, self.n_paths)):
                if self.states.ndim == 3:
                    for k, t in enumerate(self.grid):
                        w.writerow([p, repr(float(t))] + [repr(float(v)) for v in self.states[p, k]])
                else:
                    w.writerow([p, repr(float(self.grid[-1]))] + [repr(float(v)) for v in self.terminal[p]])
        return path


# --------------------------------------------------------------------------
# jump schemes


@dataclass
class _JumpScheme:
    rate: float = 0.0
    bound: float = 1.0
    sampler: object = None
    comp_mean: np.ndarray | None = None
    small_var: float = 0.0
    eps: float = 0.0
    modulated: bool = False


def _radial_sampler(kernel: JumpKernel, eps: float):
    """Inverse-CDF sampler of K restricted to |x| > eps (d = 1)."""
    hi = min(kernel.support[1], kernel._effective_upper(max(eps, 1e-12)) * 4)
    lo = max(eps, kernel.support[0])
    xs, ws = log_panel_rule(lo, hi, panels_per_decade=32, order=8)
    sides = []
    for sign in (1.0, -1.0):
        m = ws * kernel.density(sign * xs)
        cum = np.concatenate([[0.0], np.cumsum(m)])
        edges = np.concatenate([[lo], 0.5 * (xs[1:] + xs[:-1]), [hi]])
        sides.append((sign, cum, edges))
    masses = np.array([s[1][-1] for s in sides])

    def sample(rng: np.random.Generator, n: int) -> np.ndarray:
        side = rng.random(n) * masses.sum() >= masses[0]
        u = rng.random(n)
        out = np.empty(n)
        for k, (sign, cum, edges) in enumerate(sides):
            sel = side == bool(k)
            if np.any(sel):
                out[sel] = sign * np.interp(u[sel] * cum[-1], cum, edges)
        return out

    pos = float(masses.sum())
    mean = float(np.sum(ws * xs * (kernel.density(xs) - kernel.density(-xs))))
    return sample, pos, mean


def _jump_scheme(kernel: JumpKernel, rel_var: float = 1e-4, max_rate: float = 256.0) -> _JumpScheme:
    if kernel.is_zero:
        return _JumpScheme(comp_mean=np.zeros(kernel.dimension))
    mod = kernel.modulation is not None
    if kernel.variant == "compound_poisson":
        return _JumpScheme(kernel.intensity, kernel.modulation_bound if mod else 1.0,
                           lambda rng, n: kernel.law.sample(rng, n),
                           np.atleast_1d(np.asarray(kernel.law.first_moment(), dtype=float)),
                           modulated=mod)
    eps = find_truncation(kernel, rel_var)
    if kernel.total_mass(eps) > max_rate:
        # the variance rule alone can ask for ~1e12 jumps per unit time
        # (alpha near 2); cap the large-jump rate and let the matched
        # Gaussian carry the rest
        lo, hi = np.log(eps), np.log(max(kernel._effective_upper(eps), 1.0))
        eps = float(np.exp(optimize.brentq(lambda le: kernel.total_mass(np.exp(le)) - max_rate,
                                           lo, hi, xtol=1e-8)))
    sample, rate, mean = _radial_sampler(kernel, eps)
    small = float(kernel.integrate(lambda x: x * x, 0.0, eps))
    return _JumpScheme(rate, kernel.modulation_bound if mod else 1.0, sample, np.array([mean]), small, eps, mod)


# --------------------------------------------------------------------------
# simulation


def _path_draws(rng, n_int, d, scheme, dt, atoms, need_small):
    z = rng.standard_normal((n_int, d))
    z2 = rng.standard_normal((n_int, d)) if need_small else None
    if scheme.rate > 0:
        counts = rng.poisson(scheme.rate * scheme.bound * dt)
        m = int(counts.sum())
        u_time = rng.random(m)
        u_acc = rng.random(m)
        sizes = np.asarray(scheme.sampler(rng, m), dtype=float).reshape(m, d)
    else:
        counts = np.zeros(n_int, dtype=np.int64)
        u_time = u_acc = np.empty(0)
        sizes = np.empty((0, d))
    atom_draws = []
    for mass, law in atoms:
        hit = rng.random() < mass
        size = np.asarray(law.sample(rng, 1), dtype=float).reshape(d) if (law is not None and mass > 0) \
            else np.zeros(d)
        atom_draws.append((hit, size))
    return z, z2, counts, u_time, u_acc, sizes, atom_draws


def simulate_paths(model: ProcessModel, n_paths: int, n_steps: int, seed: int, t0: float = 0.0,
                   x0=None, record: str = "full", require_special: bool = False,
                   block: int = BLOCK) -> PathBundle:
    """Euler scheme with exact compound-Poisson jumps and exact atom jumps.

    Infinite-activity kernels are cut at eps with truncated variance below
    1e-4 of the kernel variance; the cut part becomes a matched Gaussian.
    Jumps are compensated by their mean rate (identity truncation), so b is
    the drift of the special semimartingale.
    """
    if n_steps < 16:
        raise ConfigurationError("simulate_paths needs n_steps >= 16")
    if n_paths < 1:
        raise ConfigurationError("n_paths must be positive")
    if record not in ("full", "terminal"):
        raise ConfigurationError("record must be 'full' or 'terminal'")
    chars = model.chars
    d = chars.dimension
    if require_special and d == 1 and not is_special(chars.kernel):
        raise ConfigurationError("kernel is not special but the theorem requires a special semimartingale")
    T = model.horizon
    if not (0.0 <= t0 < T):
        raise ConfigurationError(f"start time {t0} outside [0, {T})")
    start = model.x0 if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float))
    if start.size != d:
        raise ConfigurationError("x0 dimension mismatch")
    base = np.linspace(t0, T, n_steps + 1)
    atoms_all = [a for a in chars.integrator.atoms if a > t0 + ATOM_TOL]
    grid = np.union1d(base, [a for a in atoms_all if np.min(np.abs(base - a)) > ATOM_TOL])
    atom_idx = {int(np.argmin(np.abs(grid - a))): a for a in atoms_all}
    atom_laws = [(chars.atom_measure(a).intensity if not chars.atom_measure(a).is_zero else 0.0,
                  chars.atom_measure(a).law) for a in sorted(atom_idx.values())]
    atom_order = {k: i for i, k in enumerate(sorted(atom_idx))}
    dt = np.diff(grid)
    n_int = len(dt)
    scheme = _jump_scheme(chars.kernel)
    need_small = scheme.small_var > 0
    const_c = chars.constant_bc[1] if chars.constant_bc is not None else None
    const_root = _psd_root(const_c[None])[0] if const_c is not None else None

    states = np.empty((n_paths, len(grid), d)) if record == "full" else np.empty((0,))
    terminal = np.empty((n_paths, d))
    continuous = np.zeros((n_paths, d))
    pre_atom = {k: np.empty((n_paths, d)) for k in atom_idx}
    jt_all, js_all, jk_all, counts_all = [], [], [], np.zeros(n_paths, dtype=np.int64)

    for b0 in range(0, n_paths, block):
        b1 = min(b0 + block, n_paths)
        nb = b1 - b0
        draws = [_path_draws(path_rng(seed, i), n_int, d, scheme, dt, atom_laws, need_small)
                 for i in range(b0, b1)]
        Z = np.stack([dr[0] for dr in draws])
        Z2 = np.stack([dr[1] for dr in draws]) if need_small else None
        # candidate jumps, grouped by step
        cand_path = np.concatenate([np.repeat(p, dr[2].sum()) for p, dr in enumerate(draws)]).astype(np.int64)
        cand_step = np.concatenate([np.repeat(np.arange(n_int), dr[2]) for dr in draws]).astype(np.int64)
        cand_ut = np.concatenate([dr[3] for dr in draws]) if draws else np.empty(0)
        cand_ua = np.concatenate([dr[4] for dr in draws]) if draws else np.empty(0)
        cand_sz = np.concatenate([dr[5] for dr in draws]).reshape(-1, d) if draws else np.empty((0, d))
        order = np.argsort(cand_step, kind="stable")
        cand_path, cand_step = cand_path[order], cand_step[order]
        cand_ut, cand_ua, cand_sz = cand_ut[order], cand_ua[order], cand_sz[order]
        bounds = np.searchsorted(cand_step, np.arange(n_int + 1))

        x = np.broadcast_to(start, (nb, d)).copy()
        cont = np.zeros((nb, d))
        if record == "full":
            states[b0:b1, 0] = x
        rec_p, rec_t, rec_s, rec_k = [], [], [], []
        for j in range(n_int):
            t = grid[j]
            h = dt[j]
            if j in atom_idx:
                pre_atom[j][b0:b1] = x
                a = atom_order[j]
                hits = np.array([dr[6][a][0] for dr in draws])
                sizes = np.stack([dr[6][a][1] for dr in draws])
                jumpers = np.nonzero(hits)[0]
                x[jumpers] += sizes[jumpers]
                rec_p.append(jumpers)
                rec_t.append(np.full(jumpers.size, t))
                rec_s.append(sizes[jumpers])
                rec_k.append(np.ones(jumpers.size, dtype=np.int8))
                if record == "full":
                    states[b0:b1, j] = x
            xs = x
            b = chars.drift_at(t, xs)
            inc = b * h
            if const_root is not None:
                inc = inc + np.sqrt(h) * Z[:, j] @ const_root.T
            else:
                root = _psd_root(chars.diffusion_at(t, xs))
                inc = inc + np.sqrt(h) * np.einsum("nij,nj->ni", root, Z[:, j])
            if scheme.rate > 0 or need_small:
                m = chars.kernel_scale(t, xs) if scheme.modulated else np.ones(nb)
                if scheme.modulated and np.any(m > scheme.bound * (1 + 1e-12)):
                    raise DataError(f"kernel modulation exceeds its declared bound {scheme.bound}")
                inc = inc - (scheme.rate * m * h)[:, None] * scheme.comp_mean[None, :]
                if need_small:
                    inc = inc + np.sqrt(scheme.small_var * m * h)[:, None] * Z2[:, j]
            cont += inc
            x_new = x + inc
            s, e = bounds[j], bounds[j + 1]
            if e > s:
                p = cand_path[s:e]
                acc = np.ones(e - s, dtype=bool)
                if scheme.modulated:
                    acc = cand_ua[s:e] * scheme.bound < m[p]
                p = p[acc]
                sz = cand_sz[s:e][acc]
                np.add.at(x_new, p, sz)
                rec_p.append(p)
                rec_t.append(t + cand_ut[s:e][acc] * h)
                rec_s.append(sz)
                rec_k.append(np.zeros(p.size, dtype=np.int8))
            x = x_new
            if record == "full":
                states[b0:b1, j + 1] = x
        terminal[b0:b1] = x
        continuous[b0:b1] = cont
        if rec_p:
            rp = np.concatenate(rec_p)
            rt = np.concatenate(rec_t)
            o = np.lexsort((rt, rp))
            jt_all.append(rt[o])
            js_all.append(np.concatenate(rec_s).reshape(-1, d)[o])
            jk_all.append(np.concatenate(rec_k)[o])
            counts_all[b0:b1] = np.bincount(rp, minlength=nb)
    ptr = np.concatenate([[0], np.cumsum(counts_all)]).astype(np.int64)
    # blocks are stored in path order, each sorted by (path, time)
    jt = np.concatenate(jt_all) if jt_all else np.empty(0)
    js = np.concatenate(js_all) if js_all else np.empty((0, d))
    jk = np.concatenate(jk_all) if jk_all else np.empty(0, dtype=np.int8)
    meta = {"n_steps": int(n_steps), "dt": float((T - t0) / n_steps), "t0": float(t0),
            "small_jump_cutoff": float(scheme.eps), "small_jump_variance": float(scheme.small_var),
            "jump_rate": float(scheme.rate * scheme.bound), "rng": "philox(key=seed*2^64+path)",
            "model": model.name}
    return PathBundle(grid, states, terminal, ptr, jt, js, jk, continuous, start.copy(), int(seed), meta,
                      pre_atom)


def _psd_root(c: np.ndarray) -> np.ndarray:
    """Symmetric square roots of a stack of PSD matrices."""
    if c.shape[-1] == 1:
        return np.sqrt(np.maximum(c, 0.0))
    w, v = np.linalg.eigh(0.5 * (c + np.swapaxes(c, -1, -2)))
    return np.einsum("nij,nj,nkj->nik", v, np.sqrt(np.maximum(w, 0.0)), v)


# --------------------------------------------------------------------------
# estimators


def estimate_terminal(f, paths: PathBundle) -> MCEstimate:
    """Sample mean and standard error of f over terminal states."""
    if paths.n_paths == 0:
        raise DataError("empty path bundle")
    vals = np.asarray(f(paths.terminal), dtype=float)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise DataError(f"payoff not finite on path {i} (terminal state {paths.terminal[i].tolist()})")
    n = vals.size
    mean = float(np.sum(vals) / n)
    stderr = float(np.std(vals, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return MCEstimate(mean, stderr, n)


def bias_check(model: ProcessModel, f, oracle: float, n_paths: int = 20000, seed: int = 0,
               steps=(64, 256, 1024)) -> dict:
    """Estimates at several step counts against an oracle value.

    The bias is extrapolated linearly in 1/n_steps; the check fails when
    the bias at the finest step count exceeds three standard errors.
    """
    rows = []
    for n in steps:
        est = estimate_terminal(f, simulate_paths(model, n_paths, n, seed, record="terminal"))
        rows.append({"n_steps": int(n), "mean": est.mean, "stderr": est.stderr, "bias": est.mean - oracle})
    inv = np.array([1.0 / r["n_steps"] for r in rows])
    bias = np.array([r["bias"] for r in rows])
    slope, intercept = np.polyfit(inv, bias, 1) if len(rows) > 1 else (0.0, bias[0])
    fine = rows[-1]
    return {"oracle": float(oracle), "rows": rows, "extrapolated_bias": float(intercept),
            "bias_slope": float(slope), "passed": bool(abs(fine["bias"]) <= 3 * fine["stderr"] + 1e-15)}
