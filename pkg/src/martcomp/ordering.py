"""Ordering hypotheses of the comparison theorems and the linking-drift scan.

Every comparator returns an OrderVerdict for the relation "Y below X":
``ordered`` when the Y-side never exceeds the X-side beyond a tolerance of
1e-9 times the compared magnitude, ``reversed`` for the opposite relation,
``violated`` when both fail, ``inconclusive`` when nothing could be compared.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .char_model import (ATOM_TOL, DiffChar, JumpKernel, ProcessModel, _check_psd,
                         merge_integrators, rebase_characteristics)
from .errors import DataError, DomainError, MartcompError
from .generator import ResidualScan, jump_integral
from .propagation import EXCLUDE_FRACTION, PropagationField, derivative_check

TOL_ORD = 1e-9
MAX_WITNESSES = 10
CLIP_LIMIT = 0.05
ACTIVE_REL = 1e-6

_tol_factor = [1.0]


def ord_tolerance(scale: float) -> float:
    """Ordering slack for a compared quantity of magnitude ``scale``."""
    return TOL_ORD * _tol_factor[0] * scale


@contextmanager
def tolerance_scale(factor: float):
    """Temporarily multiply every ordering tolerance by ``factor``."""
    if not factor > 0:
        raise ValueError("tolerance scale must be positive")
    old = _tol_factor[0]
    _tol_factor[0] = float(factor)
    try:
        yield
    finally:
        _tol_factor[0] = old


@dataclass
class OrderVerdict:
    status: str
    witnesses: list = field(default_factory=list)
    margin_min: float = 0.0
    tolerance: float = 0.0
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status not in ("ordered", "reversed", "violated", "inconclusive"):
            raise ValueError(f"bad verdict status {self.status!r}")
        if self.status == "violated" and not self.witnesses:
            raise ValueError("violated verdicts need witnesses")

    @property
    def equal(self) -> bool:
        """Both sides agree within tolerance everywhere."""
        return bool(self.details.get("equal", False))

    def supports(self, direction: str) -> bool:
        if direction == "ordered":
            return self.status == "ordered"
        if direction == "reversed":
            return (self.status == "reversed" or (self.status == "ordered" and self.equal)
                    or bool(self.details.get("reversed_holds", False)))
        return False

    def to_dict(self) -> dict[str, Any]:
        return {"status": self.status, "margin_min": float(self.margin_min), "tolerance": float(self.tolerance),
                "witnesses": self.witnesses, **{k: v for k, v in self.details.items() if k != "equal"},
                "equal": self.equal}


def _verdict_from_gaps(gap: np.ndarray, labels: Callable[[tuple], dict], scale: float,
                       details: dict | None = None, two_sided: bool = True) -> OrderVerdict:
    """``gap`` = X-side minus Y-side; non-negative everywhere means ordered.

    One-sided verdicts (kernel tests) never report ``reversed``: a failed
    ordering is ``violated`` with witnesses, and ``details['reversed_holds']``
    records whether the opposite relation holds throughout.
    """
    gap = np.asarray(gap, dtype=float)
    details = dict(details or {})
    if gap.size == 0:
        return OrderVerdict("inconclusive", details=details)
    tol = ord_tolerance(scale)
    lo, hi = float(np.min(gap)), float(np.max(gap))
    ordered = lo >= -tol
    reversed_ = hi <= tol
    details["equal"] = bool(ordered and reversed_)
    details["margin_max"] = hi
    if not two_sided:
        details["reversed_holds"] = bool(reversed_)
    if ordered:
        return OrderVerdict("ordered", [], lo, tol, details)
    if reversed_ and two_sided:
        return OrderVerdict("reversed", [], lo, tol, details)
    flat = np.argsort(gap, axis=None)[:MAX_WITNESSES]
    wit = []
    for f in flat:
        idx = np.unravel_index(int(f), gap.shape)
        if gap[idx] >= -tol:
            break
        wit.append({"margin": float(gap[idx]), **labels(idx)})
    return OrderVerdict("violated", wit, lo, tol, details)


def _scale(*arrays) -> float:
    return max([float(np.max(np.abs(a))) if np.size(a) else 0.0 for a in arrays] + [1e-300])


# --------------------------------------------------------------------------
# drift and diffusion


def compare_drift(bY, bX) -> OrderVerdict:
    """Componentwise bY <= bX at every scan point."""
    bY = np.atleast_2d(np.asarray(bY, dtype=float))
    bX = np.atleast_2d(np.asarray(bX, dtype=float))
    if bY.shape != bX.shape:
        raise DataError(f"drift shapes differ: {bY.shape} vs {bX.shape}")
    return _verdict_from_gaps(bX - bY, lambda i: {"point": int(i[0]), "component": int(i[1]) + 1},
                              _scale(bY, bX), {"kind": "drift"})


def _as_mats(c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.ndim == 0:
        return c.reshape(1, 1, 1)
    if c.ndim == 1:
        return c.reshape(-1, 1, 1)
    if c.ndim == 2:
        return c[None]
    return c


def compare_diffusion(cY, cX, mode: str = "psd") -> OrderVerdict:
    """cY <= cX entrywise (``componentwise``) or in the Loewner order (``psd``)."""
    cY, cX = _as_mats(cY), _as_mats(cX)
    if cY.shape != cX.shape:
        raise DataError(f"diffusion shapes differ: {cY.shape} vs {cX.shape}")
    for c, name in ((cY, "cY"), (cX, "cX")):
        s = _scale(c)
        if np.max(np.abs(c - np.swapaxes(c, -1, -2))) > 1e-10 * s:
            raise DataError(f"{name} is not symmetric")
    scale = _scale(cY, cX)
    if mode == "componentwise":
        return _verdict_from_gaps(cX - cY, lambda i: {"point": int(i[0]), "entry": [int(i[1]) + 1, int(i[2]) + 1]},
                                  scale, {"kind": "diffusion", "mode": mode})
    if mode != "psd":
        raise ValueError(f"unknown diffusion comparison mode {mode!r}")
    diff = cX - cY
    eig = np.linalg.eigvalsh(0.5 * (diff + np.swapaxes(diff, -1, -2)))
    lo, hi = eig[:, 0], eig[:, -1]
    tol = ord_tolerance(scale)
    details = {"kind": "diffusion", "mode": mode, "equal": bool(np.all(lo >= -tol) and np.all(hi <= tol)),
               "margin_max": float(np.max(hi))}
    if np.all(lo >= -tol):
        return OrderVerdict("ordered", [], float(np.min(lo)), tol, details)
    if np.all(hi <= tol):
        return OrderVerdict("reversed", [], float(np.min(lo)), tol, details)
    order = np.argsort(lo)[:MAX_WITNESSES]
    wit = [{"point": int(i), "min_eigenvalue": float(lo[i]), "max_eigenvalue": float(hi[i]),
            "margin": float(lo[i])} for i in order if lo[i] < -tol]
    return OrderVerdict("violated", wit, float(np.min(lo)), tol, details)


# --------------------------------------------------------------------------
# test-function families and kernels


@dataclass(frozen=True)
class TestFunctionFamily:
    """Generators ``(id, g)`` of an integral order; g maps (m,) or (m, d) jump sizes to (m,)."""

    __test__ = False

    class_tag: str
    generators: tuple
    includes_H_field: bool = False
    dimension: int = 1

    def ids(self) -> list[str]:
        return [gid for gid, _ in self.generators]


def _directions(d: int, n: int = 32, positive: bool = False) -> np.ndarray:
    if d == 1:
        return np.array([[1.0]]) if positive else np.array([[1.0], [-1.0]])
    if d == 2:
        ang = 2 * np.pi * np.arange(n) / n
        u = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    else:
        u = np.random.default_rng(0).normal(size=(n, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
    if positive:
        u = np.abs(u)
        u = np.unique(np.round(u, 12), axis=0)
    return u


def make_family(class_tag: str, dimension: int = 1, spread: float = 1.0, center=None,
                includes_H_field: bool = False, thresholds: int = 16) -> TestFunctionFamily:
    """Hinge/product generators for cx, icx, dcx and idcx.

    cx: hinges (<u, y> - k)_+ over 32 directions and 16 thresholds within
    +-3 spread, plus +-linear and the quadratic; icx: hinges with u >= 0 and
    the increasing linear map; dcx/idcx: products of coordinate hinges on
    an anchor lattice (for d = 1 they reduce to the cx/icx families).
    """
    d = dimension
    c0 = np.zeros(d) if center is None else np.atleast_1d(np.asarray(center, dtype=float))
    ks = np.linspace(-3 * spread, 3 * spread, thresholds)
    gens: list[tuple[str, Callable]] = []

    def pts(y):
        return np.asarray(y, dtype=float).reshape(len(y), d)

    def add_hinges(dirs):
        for u in dirs:
            for k in ks:
                kk = float(k + u @ c0)
                gens.append((f"hinge(u={np.round(u, 6).tolist()}, k={kk:.6g})",
                             lambda y, u=u, kk=kk: np.maximum(pts(y) @ u - kk, 0.0)))

    def add_linear(signs):
        for i in range(d):
            for s in signs:
                gens.append((f"linear({'+' if s > 0 else '-'}y{i + 1})", lambda y, i=i, s=s: s * pts(y)[:, i]))

    tag = class_tag
    if d == 1 and tag == "dcx":
        tag = "cx"
    if d == 1 and tag == "idcx":
        tag = "icx"
    if tag == "cx":
        add_hinges(_directions(d))
        add_linear((1.0, -1.0))
        gens.append(("quadratic(|y|^2)", lambda y: np.sum(pts(y) ** 2, axis=1)))
    elif tag == "icx":
        add_hinges(_directions(d, positive=True))
        add_linear((1.0,))
    elif tag in ("dcx", "idcx"):
        lattice = np.stack(np.meshgrid(*([np.linspace(-2 * spread, 2 * spread, 5)] * d), indexing="ij"),
                           axis=-1).reshape(-1, d) + c0
        for a in lattice:
            gens.append((f"product_hinge(a={np.round(a, 6).tolist()})",
                         lambda y, a=a: np.prod(np.maximum(pts(y) - a, 0.0), axis=1)))
        add_linear((1.0,) if tag == "idcx" else (1.0, -1.0))
        if tag == "dcx":
            for i in range(d):
                gens.append((f"square(y{i + 1})", lambda y, i=i: pts(y)[:, i] ** 2))
    else:
        raise ValueError(f"unknown class tag {class_tag!r}")
    return TestFunctionFamily(class_tag, tuple(gens), includes_H_field, d)


def family_check(family: TestFunctionFamily, n: int = 1000, seed: int = 0, spread: float = 3.0) -> dict:
    """Numeric class membership of each generator at ``n`` random points."""
    rng = np.random.default_rng(seed)
    d = family.dimension
    x = rng.normal(0, spread, (n, d))
    z = rng.normal(0, spread, (n, d))
    h = 1e-2
    out = {}
    for gid, g in family.generators:
        ok = bool(np.all(0.5 * (g(x) + g(z)) - g(0.5 * (x + z)) >= -1e-9 * _scale(g(x), g(z)))) \
            if family.class_tag in ("cx", "icx") else True
        if family.class_tag in ("dcx", "idcx"):
            for i in range(d):
                for j in range(d):
                    ei, ej = h * np.eye(d)[i], h * np.eye(d)[j]
                    ok &= bool(np.all(g(x + ei + ej) - g(x + ei) - g(x + ej) + g(x) >= -1e-9))
        if family.class_tag in ("icx", "idcx"):
            for i in range(d):
                ok &= bool(np.all(g(x + h * np.eye(d)[i]) - g(x) >= -1e-12))
        out[gid] = ok
    return out


def _integral_finite(kernel: JumpKernel, g: Callable) -> bool:
    if kernel.variant != "levy_density" or kernel.is_zero:
        return True
    return not (kernel.diverges(lambda y: np.abs(g(y)), at="zero")
                or kernel.diverges(lambda y: np.abs(g(y)), at="infinity"))


def kernel_spread(*kernels: JumpKernel) -> float:
    vals = []
    for k in kernels:
        if k.is_zero or k.dimension != 1:
            continue
        if k.variant == "compound_poisson":
            vals.append(np.sqrt(k.law.second_moment()) if k.law.dimension == 1 else 1.0)
        else:
            vals.append(max(k.support[0], min(k.support[1], 1.0)))
    return float(max(vals)) if vals else 1.0


def compare_kernels(KY: JumpKernel, KX: JumpKernel, family: TestFunctionFamily | None = None,
                    fld: PropagationField | None = None, t: float | None = None, y_state=None,
                    scale_Y=1.0, scale_X=1.0, left: bool = False, eps: float | None = None) -> OrderVerdict:
    """int g dKY <= int g dKX for every generator (and the H_G field test).

    ``details['generators']`` and ``details['H']`` hold the two parts
    separately; the H test is the one the comparison argument needs.
    """
    details: dict[str, Any] = {"kind": "kernel"}
    gaps, labels, mags = [], [], []
    skipped = []
    if family is not None:
        rows = []
        for gid, g in family.generators:
            if not (_integral_finite(KY, g) and _integral_finite(KX, g)):
                skipped.append(gid)
                continue
            iy = float(np.atleast_1d(KY.integrate(g))[0]) * float(np.mean(scale_Y))
            ix = float(np.atleast_1d(KX.integrate(g))[0]) * float(np.mean(scale_X))
            rows.append((gid, iy, ix))
        if rows:
            iy = np.array([r[1] for r in rows])
            ix = np.array([r[2] for r in rows])
            v = _verdict_from_gaps(ix - iy, lambda i: {"generator": rows[i[0]][0]}, _scale(iy, ix),
                                   two_sided=False)
            details["generators"] = {"status": v.status, "margin_min": v.margin_min, "n": len(rows),
                                     "witnesses": v.witnesses, "reversed_holds": v.details["reversed_holds"]}
            gaps.append(ix - iy)
            labels.extend({"generator": r[0], "margin": r[2] - r[1]} for r in rows)
            mags.append(_scale(iy, ix))
        details["skipped"] = skipped
    if fld is not None and family is not None and family.includes_H_field or (fld is not None and family is None):
        ys = np.atleast_1d(np.asarray(y_state, dtype=float))
        hy = np.broadcast_to(scale_Y, ys.shape) * jump_integral(fld, KY, t, ys, left, eps)
        hx = np.broadcast_to(scale_X, ys.shape) * jump_integral(fld, KX, t, ys, left, eps)
        v = _verdict_from_gaps(hx - hy, lambda i: {"t": float(t), "y": float(ys[i[0]])}, _scale(hy, hx),
                               two_sided=False)
        details["H"] = {"status": v.status, "margin_min": v.margin_min, "n": int(ys.size),
                        "witnesses": v.witnesses, "equal": v.equal, "reversed_holds": v.details["reversed_holds"]}
        gaps.append(hx - hy)
        labels.extend({"generator": "H_G", "t": float(t), "y": float(y), "margin": float(g)}
                      for y, g in zip(ys, hx - hy))
        mags.append(_scale(hy, hx))
    if not gaps:
        return OrderVerdict("inconclusive", details=details)
    # each block is judged on its own magnitude, then the verdicts are combined
    tol_gaps = np.concatenate([g / m for g, m in zip(gaps, mags)])
    return _verdict_from_gaps(tol_gaps, lambda i: labels[i[0]], 1.0, details, two_sided=False)


def h_field_test(fld: PropagationField, KY: JumpKernel, KX: JumpKernel, points, scale_fn=None,
                 left: bool = False) -> OrderVerdict:
    """H_G kernel test over a set of (t, y) points (grouped by time)."""
    points = list(points)
    gaps, labels, mags = [], [], []
    for t, ys in points:
        ys = np.atleast_1d(np.asarray(ys, dtype=float))
        sy, sx = scale_fn(t, ys) if scale_fn is not None else (1.0, 1.0)
        hy = sy * jump_integral(fld, KY, t, ys, left)
        hx = sx * jump_integral(fld, KX, t, ys, left)
        gaps.append(hx - hy)
        mags.append(np.maximum(np.abs(hx), np.abs(hy)))
        labels.extend({"t": float(t), "y": float(y)} for y in ys)
    if not gaps:
        return OrderVerdict("inconclusive", details={"kind": "H_G"})
    gap = np.concatenate(gaps)
    scale = _scale(np.concatenate(mags))
    return _verdict_from_gaps(gap, lambda i: labels[i[0]], scale, {"kind": "H_G", "n": int(gap.size)},
                              two_sided=False)


# --------------------------------------------------------------------------
# key inequality and linking process


def key_inequality(fld: PropagationField, charsY: DiffChar, charsX: DiffChar, t: float, y_state,
                   with_drift: bool = False, left: bool = False) -> np.ndarray:
    """Drift of G(t, Y_t) under Y's law, per unit of the Lebesgue integrator.

    1/2 g_xx (cY - cX) + int H dKY - int H dKX [+ g_x (bY - bX)]; a
    non-positive value everywhere makes G(t, Y_t) a supermartingale.
    """
    y = np.atleast_1d(np.asarray(y_state, dtype=float))
    _, gx, gxx, _ = fld.evaluate(t, y, left)
    cY = charsY.diffusion_at(t, y)[:, 0, 0]
    cX = charsX.diffusion_at(t, y)[:, 0, 0]
    out = 0.5 * gxx * (cY - cX)
    if charsY.kernel is not charsX.kernel or charsY.kernel.modulation is not None \
            or charsX.kernel.modulation is not None:
        out = out + charsY.kernel_scale(t, y) * jump_integral(fld, charsY.kernel, t, y, left)
        out = out - charsX.kernel_scale(t, y) * jump_integral(fld, charsX.kernel, t, y, left)
    if with_drift:
        out = out + gx * (charsY.drift_at(t, y)[:, 0] - charsX.drift_at(t, y)[:, 0])
    return out


def key_inequality_atom(fld: PropagationField, charsY: DiffChar, charsX: DiffChar, t: float, y_state,
                        with_drift: bool = False) -> np.ndarray:
    """Atom part of the linking drift at an integrator atom ``t`` (field at t, not t-)."""
    y = np.atleast_1d(np.asarray(y_state, dtype=float))
    kY, kX = charsY.atom_measure(t), charsX.atom_measure(t)
    out = jump_integral(fld, kY, t, y, eps=0.0) - jump_integral(fld, kX, t, y, eps=0.0)
    if with_drift:
        gx = fld.evaluate(t, y)[1]
        out = out + gx * (charsY.atom_drift(t)[0] - charsX.atom_drift(t)[0])
    return out


@dataclass
class LinkingReport:
    direction: str
    n_points: int
    n_clipped: int
    violation_fraction: float
    n_interior: int
    interior_violation_fraction: float
    tolerance: float
    max_value: float
    min_value: float
    worst: dict | None
    atom_points: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def linking_drift_scan(paths, fld: PropagationField, charsY: DiffChar, charsX: DiffChar,
                       with_drift: bool = False, direction: str = "ordered",
                       fraction: float = EXCLUDE_FRACTION, max_paths: int | None = None) -> LinkingReport:
    """Evaluate the key-inequality integrand along simulated Y paths.

    A point violates ``ordered`` when its value exceeds the tolerance (and
    ``reversed`` when it falls below minus the tolerance).  Interior points
    exclude the final T/8, the spatial edge bands, and states where
    |g_xx| is below 1e-6 of its maximum along the same time slice, so that
    round-off in flat regions of G is not counted as evidence.
    """
    if direction not in ("ordered", "reversed"):
        raise ValueError("direction must be 'ordered' or 'reversed'")
    states = paths.states if paths.states.ndim == 3 else None
    if states is None:
        raise DomainError("linking scan needs full path records")
    grid = paths.grid
    n_paths = states.shape[0] if max_paths is None else min(max_paths, states.shape[0])
    lo, hi = fld.domain
    band = fld.interior_band(fraction)
    inner_lo, inner_hi = lo + band, hi - band
    T = fld.horizon
    all_vals, interior_flags, meta = [], [], []
    n_total = n_clipped = n_atom = 0
    for k in range(len(grid) - 1):
        t = float(grid[k])
        ys = states[:n_paths, k, 0]
        pre = paths.pre_atom.get(k) if hasattr(paths, "pre_atom") else None
        inside = (ys >= inner_lo) & (ys <= inner_hi)
        n_total += ys.size
        n_clipped += int(np.sum(~inside))
        idx = np.nonzero(inside)[0]
        if idx.size == 0:
            continue
        is_atom = charsY.is_atom(t) or charsX.is_atom(t)
        if is_atom and pre is not None:
            yp = pre[:n_paths, 0]
            ok = (yp >= inner_lo) & (yp <= inner_hi)
            pidx = np.nonzero(ok)[0]
            va = key_inequality_atom(fld, charsY, charsX, t, yp[pidx], with_drift)
            all_vals.append(va)
            interior_flags.append(np.full(va.shape, t <= T * (1 - fraction)))
            meta.extend((t, int(p), float(yp[p]), "atom") for p in pidx)
            n_atom += va.size
        v = key_inequality(fld, charsY, charsX, t, ys[idx], with_drift)
        gxx = np.abs(fld.evaluate(t, ys[idx])[2])
        active = gxx >= ACTIVE_REL * max(float(np.max(np.abs(fld._rows(t, False)[2]))), 1e-300)
        all_vals.append(v)
        interior_flags.append(active & (t <= T * (1 - fraction)))
        meta.extend((t, int(p), float(ys[p]), "lebesgue") for p in idx)
    if n_total and n_clipped / n_total > CLIP_LIMIT:
        raise DomainError(f"{n_clipped / n_total:.1%} of path points lie outside the field interior")
    vals = np.concatenate(all_vals) if all_vals else np.empty(0)
    interior = np.concatenate(interior_flags) if interior_flags else np.empty(0, bool)
    tol = ord_tolerance(_scale(vals))
    bad = vals > tol if direction == "ordered" else vals < -tol
    worst = None
    if vals.size:
        i = int(np.argmax(vals) if direction == "ordered" else np.argmin(vals))
        t, p, y, kind = meta[i]
        worst = {"t": t, "path": p, "y": y, "value": float(vals[i]), "kind": kind}
    n_int = int(np.sum(interior))
    return LinkingReport(direction, int(vals.size), n_clipped,
                         float(np.mean(bad)) if vals.size else 0.0, n_int,
                         float(np.mean(bad[interior])) if n_int else 0.0, float(tol),
                         float(np.max(vals)) if vals.size else 0.0, float(np.min(vals)) if vals.size else 0.0,
                         worst, n_atom)


# --------------------------------------------------------------------------
# theorem hypotheses


THEOREMS = {
    "dcx_emm": {"measure": "emm", "tag": "dcx", "diffusion": "componentwise", "family": "dcx", "drift": False},
    "cx_emm": {"measure": "emm", "tag": "cx", "diffusion": "psd", "family": "cx", "drift": False},
    "general_emm": {"measure": "emm", "tag": None, "diffusion": None, "family": None, "drift": False},
    "girsanov_emm": {"measure": "emm", "tag": None, "diffusion": "skip", "family": "cx", "drift": False},
    "idcx_p": {"measure": "P", "tag": "idcx", "diffusion": "componentwise", "family": "idcx", "drift": True},
    "icx_p": {"measure": "P", "tag": "icx", "diffusion": "psd", "family": "icx", "drift": True},
    "general_p": {"measure": "P", "tag": None, "diffusion": None, "family": None, "drift": True},
}


def _entry(cid: str, condition: str, status: str, **detail) -> dict:
    return {"id": cid, "condition": condition, "status": status, "detail": detail}


@dataclass
class HypothesisInput:
    theorem: str
    model_X: ProcessModel
    model_Y: ProcessModel
    payoff: Any
    fld: PropagationField | None
    residual: ResidualScan | None
    paths_Y: Any = None
    assertions: dict = field(default_factory=dict)
    residual_tol: float = 5e-3
    grid_stride: tuple = (8, 16)
    path_points: int = 2000


def _scan_points(fld: PropagationField, stride: tuple, paths, n_path_points: int):
    """(t, ys) groups: tensor-grid interior nodes plus a subsample of Y path states."""
    times = fld.times[fld.interior_times()][::stride[0]]
    states = fld.states[fld.interior_states()][::stride[1]]
    groups = [(float(t), states) for t in times]
    if paths is not None and paths.states.ndim == 3:
        lo, hi = fld.domain
        band = fld.interior_band()
        n_steps = len(paths.grid) - 1
        per = max(1, n_path_points // max(n_steps, 1))
        T = fld.horizon
        for k in range(n_steps):
            t = float(paths.grid[k])
            if t > T * (1 - EXCLUDE_FRACTION):
                continue
            ys = paths.states[:per, k, 0]
            ys = ys[(ys >= lo + band) & (ys <= hi - band)]
            if ys.size:
                groups.append((t, ys))
    return groups


def _support_status(model_X: ProcessModel, assertions: dict, theorem: str = "") -> tuple[str, str]:
    if theorem == "girsanov_emm":
        return "checked_ok", "one process under two equivalent measures: identical null sets"
    chars = model_X.chars
    from .levy_analytics import is_type_C
    try:
        if chars.is_constant and chars.dimension == 1 and is_type_C(chars):
            return "checked_ok", "X has a type-C Levy part (full support)"
    except MartcompError:
        pass
    if assertions.get("support_inclusion"):
        return "assumed", "support inclusion asserted in the scenario"
    return "checked_fail", "support inclusion neither certified nor asserted"


def _direction(verdicts: list[OrderVerdict]) -> str | None:
    live = [v for v in verdicts if v.status != "inconclusive"]
    if not live:
        return None
    if all(v.supports("ordered") for v in live):
        return "ordered"
    if all(v.supports("reversed") for v in live):
        return "reversed"
    return None


def check_theorem_hypotheses(inp: HypothesisInput) -> tuple[list[dict], dict, str | None]:
    """Checklist entries, verdicts and the ordering direction (or None).

    Entries carry status checked_ok / checked_fail / assumed /
    not_applicable.  Integrability or domain failures inside a check mark
    that entry checked_fail with the error text.
    """
    from .levy_analytics import is_special

    spec = THEOREMS[inp.theorem]
    X, Y, f, fld = inp.model_X, inp.model_Y, inp.payoff, inp.fld
    checklist: list[dict] = []
    verdicts: dict[str, OrderVerdict] = {}

    # (i) regularity and payoff class
    need = spec["tag"]
    tags_ok = f.check_tags() if f is not None else {}
    tag_status = "checked_ok" if (need is None or (need in f.class_tags and tags_ok.get(need, False))) \
        else "checked_fail"
    if spec["measure"] == "P" and not ("increasing" in f.class_tags and tags_ok.get("increasing", False)) \
            and need is not None:
        tag_status = "checked_fail"
    deriv = derivative_check(fld) if fld is not None else {}
    finite = fld is not None and all(np.all(np.isfinite(a)) for a in (fld.g, fld.g_x, fld.g_xx, fld.g_t))
    status = "checked_ok" if tag_status == "checked_ok" and finite else "checked_fail"
    checklist.append(_entry("i_regularity", "payoff class and C^{1,2} regularity of G_f", status,
                            required_tag=need, tags=tags_ok, derivative_check=deriv, field_finite=finite))

    # specialness of both jump kernels
    special = {}
    for name, m in (("X", X), ("Y", Y)):
        try:
            special[name] = bool(is_special(m.chars.kernel)) if m.dimension == 1 else True
        except MartcompError as exc:
            special[name] = False
            special[f"{name}_error"] = str(exc)
    checklist.append(_entry("special", "both processes are special semimartingales",
                            "checked_ok" if special["X"] and special["Y"] else "checked_fail", **special))

    # martingale property under the e.m.m. theorems
    if spec["measure"] == "emm":
        drift_ok = True
        info = {}
        for name, m in (("X", X), ("Y", Y)):
            pts = _probe_points(m, fld)
            b = np.concatenate([m.chars.drift_at(t, ys)[:, 0] for t, ys in pts])
            atom_b = [float(m.chars.atom_drift(a)[0]) for a in m.chars.integrator.atoms]
            ok = bool(np.all(np.abs(b) <= 1e-12) and all(abs(v) <= 1e-12 for v in atom_b))
            info[name] = {"max_abs_drift": float(np.max(np.abs(b))) if b.size else 0.0,
                          "atom_drifts": atom_b, "ok": ok}
            drift_ok &= ok
        checklist.append(_entry("martingale", "X under Q1 and Y under Q2 are local martingales",
                                "checked_ok" if drift_ok else "checked_fail", **info))
    else:
        checklist.append(_entry("martingale", "local martingale property", "not_applicable"))

    # (ii) backward equation
    if inp.residual is not None:
        ok = inp.residual.max_abs <= inp.residual_tol
        checklist.append(_entry("ii_backward_equation", "Kolmogorov backward residual of G_f vanishes",
                                "checked_ok" if ok else "checked_fail", tolerance=inp.residual_tol,
                                **inp.residual.summary()))
    else:
        checklist.append(_entry("ii_backward_equation", "Kolmogorov backward residual of G_f vanishes",
                                "assumed", reason="no propagation field for X"))

    # (v) common integrator
    try:
        merged = merge_integrators(X.chars.integrator, Y.chars.integrator)
        cX = rebase_characteristics(X.chars, merged)
        cY = rebase_characteristics(Y.chars, merged)
        checklist.append(_entry("v_integrator", "joint integrator for both characteristics", "checked_ok",
                                merged=merged.to_dict()))
    except MartcompError as exc:
        checklist.append(_entry("v_integrator", "joint integrator for both characteristics", "checked_fail",
                                error=str(exc)))
        return checklist, {}, None

    status, note = _support_status(X, inp.assertions, inp.theorem)
    checklist.append(_entry("support", "support of Y_{t-} within support of X_{t-}", status, note=note))

    # (iii) integrability of H_G against Y's kernel along the scan set
    groups = _scan_points(fld, inp.grid_stride, inp.paths_Y, inp.path_points) if fld is not None else []
    try:
        worst = 0.0
        for t, ys in groups:
            val = cY.kernel_scale(t, ys) * jump_integral(fld, cY.kernel, t, ys)
            if not np.all(np.isfinite(val)):
                raise DomainError(f"non-finite H integral at t={t}")
            worst = max(worst, float(np.max(np.abs(val))) if val.size else 0.0)
        checklist.append(_entry("iii_jump_integrability", "int |H_G| dK^Y finite along Y",
                                "checked_ok" if groups else "assumed", max_abs_integral=worst,
                                n_groups=len(groups)))
    except MartcompError as exc:
        checklist.append(_entry("iii_jump_integrability", "int |H_G| dK^Y finite along Y", "checked_fail",
                                error=str(exc)))

    # (iv) class (DL): numeric boundedness proxy only
    proxy = None
    if fld is not None and inp.paths_Y is not None and inp.paths_Y.states.ndim == 3:
        st = inp.paths_Y.states[:, :, 0]
        lo, hi = fld.domain
        proxy = 0.0
        for k, t in enumerate(inp.paths_Y.grid):
            v = fld.value(float(t), np.clip(st[:, k], lo, hi))
            proxy = max(proxy, float(np.max(np.abs(v))))
    checklist.append(_entry("iv_class_DL", "negative part of G_f(t, Y_t) of class (DL)", "assumed",
                            max_abs_G_along_paths=proxy))

    # (vi) ordering
    decisive: list[OrderVerdict] = []
    try:
        decisive = _ordering_verdicts(inp, spec, cX, cY, merged, groups, verdicts)
        direction = _direction(decisive)
        status = "checked_ok" if direction is not None else "checked_fail"
        witnesses = [w for v in decisive for w in v.witnesses][:MAX_WITNESSES]
        checklist.append(_entry("vi_ordering", "ordering of characteristics", status, direction=direction,
                                verdicts={k: v.status for k, v in verdicts.items()}, witnesses=witnesses))
    except MartcompError as exc:
        direction = None
        checklist.append(_entry("vi_ordering", "ordering of characteristics", "checked_fail", error=str(exc)))
    return checklist, verdicts, direction


def _probe_points(model: ProcessModel, fld: PropagationField | None):
    T = model.horizon
    ts = np.linspace(0, T, 9)[:-1]
    if fld is not None:
        ys = fld.states[fld.interior_states()][::32]
    else:
        ys = model.x0[0] + np.linspace(-3, 3, 13)
    return [(float(t), ys) for t in ts]


def _ordering_verdicts(inp: HypothesisInput, spec: dict, cX: DiffChar, cY: DiffChar, merged,
                       groups, verdicts: dict) -> list[OrderVerdict]:
    fld = inp.fld
    decisive = []
    pts = groups if groups else _probe_points(inp.model_X, fld)
    if spec["diffusion"] is None:
        # general corollaries: the key inequality itself on the scan set
        vals, labels = [], []
        for t, ys in pts:
            v = key_inequality(fld, cY, cX, t, ys, spec["drift"])
            vals.append(-v)
            labels.extend({"t": t, "y": float(y)} for y in ys)
        for a in merged.atoms:
            if a <= fld.horizon * (1 - EXCLUDE_FRACTION):
                ys = fld.states[fld.interior_states()][::inp.grid_stride[1]]
                v = key_inequality_atom(fld, cY, cX, a, ys, spec["drift"])
                vals.append(-v)
                labels.extend({"t": a, "y": float(y), "atom": True} for y in ys)
        gap = np.concatenate(vals)
        v = _verdict_from_gaps(gap, lambda i: labels[i[0]], _scale(gap), {"kind": "key_inequality"})
        verdicts["key_inequality"] = v
        return [v]
    if spec["drift"]:
        bY = np.concatenate([cY.drift_at(t, ys) for t, ys in pts])
        bX = np.concatenate([cX.drift_at(t, ys) for t, ys in pts])
        verdicts["drift"] = compare_drift(bY, bX)
        decisive.append(verdicts["drift"])
        atomY = np.array([cY.atom_drift(a) for a in merged.atoms]).reshape(-1, cY.dimension)
        atomX = np.array([cX.atom_drift(a) for a in merged.atoms]).reshape(-1, cX.dimension)
        if atomY.size:
            verdicts["atom_drift"] = compare_drift(atomY, atomX)
            decisive.append(verdicts["atom_drift"])
    if spec["diffusion"] != "skip":
        cYs = np.concatenate([cY.diffusion_at(t, ys) for t, ys in pts])
        cXs = np.concatenate([cX.diffusion_at(t, ys) for t, ys in pts])
        verdicts["diffusion"] = compare_diffusion(cYs, cXs, spec["diffusion"])
        decisive.append(verdicts["diffusion"])
    fam = make_family(spec["family"], cY.dimension, kernel_spread(cY.kernel, cX.kernel), includes_H_field=True)

    def scales(t, ys):
        return cY.kernel_scale(t, ys), cX.kernel_scale(t, ys)

    if not (cY.kernel.is_zero and cX.kernel.is_zero):
        if cY.kernel.dimension == 1:
            verdicts["kernel_generators"] = compare_kernels(cY.kernel, cX.kernel, fam)
        verdicts["kernel_H"] = h_field_test(fld, cY.kernel, cX.kernel, pts, scales)
        decisive.append(verdicts["kernel_H"])
    for a in merged.atoms:
        kY, kX = cY.atom_measure(a), cX.atom_measure(a)
        if kY.is_zero and kX.is_zero:
            continue
        ys = fld.states[fld.interior_states()][::inp.grid_stride[1]]
        gaps_fam = compare_kernels(kY, kX, fam)
        verdicts[f"atom_kernel_generators@{a:g}"] = gaps_fam
        hy = jump_integral(fld, kY, a, ys, eps=0.0)
        hx = jump_integral(fld, kX, a, ys, eps=0.0)
        v = _verdict_from_gaps(hx - hy, lambda i: {"t": a, "y": float(ys[i[0]])}, _scale(hx, hy),
                               {"kind": "atom_H_G"}, two_sided=False)
        verdicts[f"atom_kernel_H@{a:g}"] = v
        decisive.append(v)
    return decisive
