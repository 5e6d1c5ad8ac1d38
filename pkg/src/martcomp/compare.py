"""Scenario files, the comparison pipeline and report emission.

A scenario names a theorem, two process models (X under Q1 or P, Y under
Q2 or P), a payoff and numerical settings.  ``run_scenario`` classifies
both models, builds X's propagation field, scans its backward residual,
checks the ordering hypotheses, simulates both models and draws a
conclusion about E f(Y_T) <= E f(X_T).
"""

from __future__ import annotations

import ast
import csv
import json
import math
import platform
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np
import scipy
import yaml

from . import __version__
from .char_model import DiffChar, IntegratorSpec, JumpKernel, ProcessModel, merge_integrators
from .errors import ConfigurationError, DataError, MartcompError
from .laws import law_from_dict
from .levy_analytics import char_function, is_special, is_type_C, small_jump_activity, smoothness_order
from .mc_engine import MCEstimate, PathBundle, estimate_terminal, simulate_paths
from .ordering import THEOREMS, HypothesisInput, check_theorem_hypotheses, linking_drift_scan, tolerance_scale
from .payoffs import Payoff, payoff_from_dict
from .propagation import PropagationField, compute_G
from .generator import ResidualScan, backward_residual_scan, kernel_reach

SPEC_VERSIONS = (1,)
CONCLUSIONS = ("ordering_confirmed", "ordering_contradicted", "inconclusive")
SIGMA_RULE = 3.0
DEFAULT_GRIDS = {"time_step": 1 / 256, "space_step": 1 / 128, "half_width": 8.0, "residual_stride": [4, 4]}
DEFAULT_MC = {"n_paths": 20000, "n_steps": 64, "seed": 0, "linking_paths": 1000}
DEFAULT_TOLERANCES = {"residual": 5e-3, "scale": 1.0}


# --------------------------------------------------------------------------
# expressions for Ito coefficients


_FUNCS = {"exp": np.exp, "log": np.log, "sqrt": np.sqrt, "sin": np.sin, "cos": np.cos, "tanh": np.tanh,
          "abs": np.abs, "minimum": np.minimum, "maximum": np.maximum, "where": np.where}
_CONSTS = {"pi": math.pi, "e": math.e}
_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant, ast.Compare,
          ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd, ast.Mod,
          ast.Lt, ast.LtE, ast.Gt, ast.GtE)


def compile_expression(src: str, names=("t", "x")):
    """Vectorized function of ``names`` from an arithmetic expression.

    Only numbers, the listed variables, + - * / ** %, comparisons and a
    small set of numpy functions are accepted.
    """
    try:
        tree = ast.parse(str(src), mode="eval")
    except SyntaxError as exc:
        raise ConfigurationError(f"cannot parse expression {src!r}: {exc.msg}") from None
    allowed = set(names) | set(_FUNCS) | set(_CONSTS)
    for node in ast.walk(tree):
        if not isinstance(node, _NODES):
            raise ConfigurationError(f"expression {src!r} uses unsupported syntax {type(node).__name__}")
        if isinstance(node, ast.Name) and node.id not in allowed:
            raise ConfigurationError(f"expression {src!r} uses unknown name {node.id!r}")
        if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name) and node.func.id in _FUNCS):
            raise ConfigurationError(f"expression {src!r} calls an unsupported function")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ConfigurationError(f"expression {src!r} has a non-numeric constant")
    code = compile(tree, "<scenario>", "eval")

    def fn(*args):
        env = {"__builtins__": {}, **_FUNCS, **_CONSTS, **dict(zip(names, args))}
        with np.errstate(all="ignore"):
            return eval(code, env)  # noqa: S307 - validated AST above

    fn.source = str(src)
    return fn


# --------------------------------------------------------------------------
# scenario model


def parse_number(v) -> float:
    """Floats, ints and fraction strings such as '1/256'."""
    if isinstance(v, str):
        try:
            return float(Fraction(v.strip()))
        except (ValueError, ZeroDivisionError):
            raise ConfigurationError(f"not a number: {v!r}") from None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigurationError(f"not a number: {v!r}")
    return float(v)


def kernel_from_dict(spec: dict | None) -> JumpKernel:
    if spec is None:
        return JumpKernel.none()
    kind = spec.get("type", "none")
    if kind == "none":
        k = JumpKernel.none()
    elif kind == "compound_poisson":
        k = JumpKernel.compound_poisson(parse_number(spec["intensity"]), law_from_dict(spec["law"]))
    elif kind == "power_law":
        k = JumpKernel.power_law(parse_number(spec["alpha"]), parse_number(spec.get("scale", 1.0)),
                                 parse_number(spec.get("r_lo", 0.0)), parse_number(spec.get("r_hi", 1.0)))
    elif kind == "levy_density":
        dens = compile_expression(spec["density"], ("x",))
        lo, hi = (parse_number(v) for v in spec.get("support", [0.0, 1.0]))
        k = JumpKernel.levy_density(lambda x: np.asarray(dens(np.asarray(x, dtype=float)), dtype=float)
                                    * np.ones(np.shape(x)),
                                    parse_number(spec["small_jump_exponent"]), (lo, hi),
                                    label=f"levy_density({spec['density']})", params=dict(spec))
    else:
        raise ConfigurationError(f"unknown kernel type {kind!r}")
    mod = spec.get("modulation")
    if mod is not None:
        fn = compile_expression(mod["expr"])
        k = k.with_modulation(lambda t, x: fn(t, np.asarray(x, dtype=float).reshape(len(x), -1)[:, 0]),
                              parse_number(mod.get("bound", 1.0)))
    return k


def _coefficient(v, shape: tuple[int, ...]):
    """Constant array or (t, x)-expression for a drift or diffusion entry."""
    if isinstance(v, str):
        try:
            return np.full(shape, parse_number(v))
        except ConfigurationError:
            return compile_expression(v)
    arr = np.asarray(v, dtype=float)
    return arr.reshape(shape) if arr.size == int(np.prod(shape)) else arr


def model_from_dict(spec: dict, horizon: float, measure: str | None = None) -> ProcessModel:
    """A ProcessModel from its scenario entry (families levy, ito, grigelionis)."""
    if not isinstance(spec, dict):
        raise ConfigurationError("model entries must be mappings")
    family = spec.get("family", "levy")
    label = spec.get("measure", measure or "P")
    x0 = np.atleast_1d(np.asarray(spec.get("x0", 0.0), dtype=float))
    d = x0.size
    kernel = kernel_from_dict(spec.get("kernel"))
    atoms = {}
    for a in spec.get("atoms", []) or []:
        atoms[parse_number(a["time"])] = (parse_number(a.get("mass", 1.0)), law_from_dict(a["law"]))
    atom_kernel = JumpKernel.atom_kernel(atoms) if atoms else None
    integrator = IntegratorSpec.with_atoms(horizon, atoms.keys())
    b = _coefficient(spec.get("drift", 0.0), (d,))
    c = _coefficient(spec.get("diffusion", 0.0), (d, d))
    if callable(b) or callable(c):
        if d != 1:
            raise ConfigurationError("expression coefficients are supported for d = 1")
        bf = b if callable(b) else (lambda t, x, v=float(b[0]): np.full(np.shape(x), v))
        cf = c if callable(c) else (lambda t, x, v=float(c[0, 0]): np.full(np.shape(x), v))

        def drift(t, x, bf=bf):
            xs = np.asarray(x, dtype=float)[:, 0]
            return np.broadcast_to(np.asarray(bf(t, xs), dtype=float), xs.shape).reshape(-1, 1).copy()

        def diffusion(t, x, cf=cf):
            xs = np.asarray(x, dtype=float)[:, 0]
            return np.broadcast_to(np.asarray(cf(t, xs), dtype=float), xs.shape).reshape(-1, 1, 1).copy()

        desc = {"drift": getattr(b, "source", b.tolist() if not callable(b) else None),
                "diffusion": getattr(c, "source", c.tolist() if not callable(c) else None)}
        chars = DiffChar(drift, diffusion, kernel, integrator, label, d, atom_kernel, None, desc)
    else:
        chars = DiffChar.constant(b, c, kernel, integrator, label, atom_kernel)
    martingale = spec.get("martingale")
    if martingale is None:
        martingale = not callable(b) and bool(np.all(b == 0))
    return ProcessModel(family, chars, x0, bool(martingale), spec.get("name", family))


@dataclass
class Scenario:
    name: str
    theorem: str
    model_X: ProcessModel
    model_Y: ProcessModel
    payoff: Payoff
    grids: dict
    mc: dict
    tolerances: dict
    assertions: dict
    reversed: bool = False
    spec_version: int = 1
    source: dict = field(default_factory=dict)

    @property
    def horizon(self) -> float:
        return self.model_X.horizon


def scenario_from_dict(raw: dict, overrides: dict | None = None) -> Scenario:
    """Validate a parsed scenario tree; ``overrides`` patch grids/mc/tolerances."""
    if not isinstance(raw, dict):
        raise ConfigurationError("scenario must be a mapping")
    version = raw.get("spec_version")
    if version not in SPEC_VERSIONS:
        raise ConfigurationError(f"unsupported spec_version {version!r} (supported: {list(SPEC_VERSIONS)})")
    theorem = raw.get("theorem")
    if theorem not in THEOREMS:
        raise ConfigurationError(f"unknown theorem {theorem!r}")
    horizon = parse_number(raw.get("horizon", 1.0))
    emm = THEOREMS[theorem]["measure"] == "emm"
    if theorem == "girsanov_emm":
        if "base_model" not in raw or "kernel_1" not in raw or "kernel_2" not in raw:
            raise ConfigurationError("girsanov_emm needs base_model, kernel_1 and kernel_2")
        base = dict(raw["base_model"])
        model_X = model_from_dict({**base, "kernel": raw["kernel_1"]}, horizon, "Q1")
        model_Y = model_from_dict({**base, "kernel": raw["kernel_2"]}, horizon, "Q2")
    else:
        for key in ("model_X", "model_Y"):
            if key not in raw:
                raise ConfigurationError(f"scenario is missing {key}")
        model_X = model_from_dict(raw["model_X"], horizon, "Q1" if emm else "P")
        model_Y = model_from_dict(raw["model_Y"], horizon, "Q2" if emm else "P")
    if "payoff" not in raw:
        raise ConfigurationError("scenario is missing payoff")
    payoff = payoff_from_dict(raw["payoff"])
    need = THEOREMS[theorem]["tag"]
    if need is not None and need not in payoff.class_tags:
        raise ConfigurationError(f"theorem {theorem} needs a {need} payoff; {payoff.name} is tagged "
                                 f"{sorted(payoff.class_tags)}")
    overrides = overrides or {}
    grids = {**DEFAULT_GRIDS, **(raw.get("grids") or {}), **overrides.get("grids", {})}
    for k in ("time_step", "space_step", "half_width"):
        grids[k] = parse_number(grids[k])
    grids["residual_stride"] = [int(v) for v in grids["residual_stride"]]
    mc = {**DEFAULT_MC, **(raw.get("mc") or {}), **overrides.get("mc", {})}
    for k in ("n_paths", "n_steps", "seed", "linking_paths"):
        mc[k] = int(mc[k])
    tol = {**DEFAULT_TOLERANCES, **(raw.get("tolerances") or {}), **overrides.get("tolerances", {})}
    tol = {k: parse_number(v) for k, v in tol.items()}
    return Scenario(str(raw.get("name", "scenario")), theorem, model_X, model_Y, payoff, grids, mc, tol,
                    dict(raw.get("assertions") or {}), bool(raw.get("reversed", False)), int(version),
                    dict(raw))


def load_scenario(path, overrides: dict | None = None) -> Scenario:
    """Read a YAML (or JSON) scenario file."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    return scenario_from_dict(raw, overrides)


# --------------------------------------------------------------------------
# report


@dataclass
class ComparisonReport:
    scenario: dict
    checklist: list
    verdicts: dict
    residual: dict | None
    linking: dict | None
    estimates: dict
    conclusion: str
    provenance: dict
    artifacts: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return _clean({"scenario": self.scenario, "checklist": self.checklist, "verdicts": self.verdicts,
                       "residual": self.residual, "linking": self.linking, "estimates": self.estimates,
                       "conclusion": self.conclusion, "provenance": self.provenance})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @property
    def error(self) -> dict | None:
        return self.provenance.get("error")

    @classmethod
    def from_dict(cls, data: dict) -> "ComparisonReport":
        return cls(data["scenario"], data["checklist"], data["verdicts"], data["residual"], data["linking"],
                   data["estimates"], data["conclusion"], data["provenance"])


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if obj is None or isinstance(obj, str):
        return obj
    return repr(obj)


def _provenance(sc: Scenario) -> dict:
    return {"seed": sc.mc["seed"], "mc": dict(sc.mc), "grids": dict(sc.grids), "tolerances": dict(sc.tolerances),
            "spec_version": sc.spec_version,
            "versions": {"martcomp": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                         "python": platform.python_version()}}


def _regularity(model: ProcessModel) -> dict:
    chars = model.chars
    if not chars.is_constant or model.dimension != 1:
        return {"family": model.family, "classified": False}
    out = {"family": model.family, "classified": True, "special": bool(is_special(chars.kernel)),
           "type_C": bool(is_type_C(chars))}
    cf = char_function(model)
    out["smooth_density_C2"] = bool(smoothness_order(cf, model.horizon, 2))
    if chars.kernel.variant == "levy_density":
        out["infinite_small_jump_activity"] = bool(small_jump_activity(chars.kernel, 1.0))
    return out


def _field_extent(sc: Scenario) -> tuple[float, float]:
    """Jump reach of both models and a half-width that keeps Y's paths inside the scanned band."""
    reach = 0.0
    sd = 0.0
    for m in (sc.model_X, sc.model_Y):
        ch = m.chars
        reach = max(reach, kernel_reach(ch.kernel) * ch.kernel.modulation_bound
                    if ch.kernel.modulation is not None else kernel_reach(ch.kernel))
        if ch.atom_kernel is not None:
            reach = max(reach, kernel_reach(ch.atom_kernel))
        if ch.is_constant and m.dimension == 1:
            sd = max(sd, math.sqrt(max(char_function(m).variance(m.horizon), 0.0)))
    half_width = max(sc.grids["half_width"], reach + 6.0 * sd)
    return reach, float(math.ceil(half_width))


def _hypotheses_ok(checklist: list) -> bool:
    return bool(checklist) and all(e["status"] in ("checked_ok", "assumed", "not_applicable") for e in checklist)


def decide(direction: str | None, hyp_ok: bool, est_X: MCEstimate | None, est_Y: MCEstimate | None,
           linking_violation: float | None) -> tuple[str, dict]:
    """Conclusion from the hypothesis direction, the Monte Carlo estimates and the linking scan.

    ``direction`` is the relation the evidence is tested for: ``ordered``
    (E f(Y) <= E f(X)) or ``reversed``.  A contradiction needs a Monte Carlo
    reversal beyond three combined standard errors, or a positive linking
    violation fraction while the hypotheses hold; failed hypotheses alone
    only make the outcome inconclusive.
    """
    info: dict[str, Any] = {"direction": direction, "hypotheses_ok": hyp_ok}
    if direction is None or est_X is None or est_Y is None:
        return "inconclusive", info
    sigma = math.sqrt(est_X.stderr ** 2 + est_Y.stderr ** 2)
    diff = est_X.mean - est_Y.mean if direction == "ordered" else est_Y.mean - est_X.mean
    info.update({"combined_stderr": sigma, "signed_gap": diff,
                 "separation_sigma": diff / sigma if sigma > 0 else (0.0 if diff == 0 else math.copysign(1e300, diff))})
    mc_reversal = diff < -SIGMA_RULE * sigma
    mc_ok = diff >= -SIGMA_RULE * sigma
    link_bad = linking_violation is not None and linking_violation > 0
    info["mc_consistent"] = bool(mc_ok)
    if mc_reversal or (hyp_ok and link_bad):
        return "ordering_contradicted", info
    if hyp_ok and mc_ok and not link_bad:
        return "ordering_confirmed", info
    return "inconclusive", info


def run_scenario(sc: Scenario) -> ComparisonReport:
    """The full pipeline; module errors yield a partial, inconclusive report."""
    with tolerance_scale(sc.tolerances.get("scale", 1.0)):
        return _run(sc)


def _run(sc: Scenario) -> ComparisonReport:
    prov = _provenance(sc)
    spec = THEOREMS[sc.theorem]
    g = sc.grids
    state: dict[str, Any] = {"checklist": [], "verdicts": {}, "residual": None, "linking": None, "estimates": {}}
    artifacts: dict[str, Any] = {}
    scen = {"name": sc.name, "theorem": sc.theorem, "reversed_flag": sc.reversed, "source": sc.source}
    stage = "levy_analytics"
    direction = None
    hyp_ok = False
    est_X = est_Y = None
    try:
        regularity = {"X": _regularity(sc.model_X), "Y": _regularity(sc.model_Y)}
        state["checklist"].append({"id": "regularity_classification", "condition": "type-C, specialness and "
                                   "density smoothness of both models", "status": "checked_ok",
                                   "detail": regularity})

        stage = "char_model"
        merge_integrators(sc.model_X.chars.integrator, sc.model_Y.chars.integrator)

        stage = "propagation"
        reach, half_width = _field_extent(sc)
        fld: PropagationField = compute_G(sc.model_X, sc.payoff, g["time_step"], g["space_step"], half_width)
        fld.extras["jump_reach"] = reach
        prov["field"] = {"half_width": fld.half_width, "jump_reach": reach, "source": fld.source,
                         "n_t": int(len(fld.times)), "n_x": int(len(fld.states))}
        artifacts["field"] = fld

        stage = "generator"
        st, sx = g["residual_stride"]
        times = fld.times[fld.interior_times()][::st]
        states = fld.states[fld.interior_states()][::sx]
        scan: ResidualScan = backward_residual_scan(fld, sc.model_X.chars, (times, states),
                                                    use_drift=spec["measure"] == "P")
        artifacts["residual"] = scan
        state["residual"] = scan.summary()

        stage = "mc_engine"
        n_link = min(sc.mc["linking_paths"], sc.mc["n_paths"])
        paths_Y: PathBundle = simulate_paths(sc.model_Y, n_link, sc.mc["n_steps"], sc.mc["seed"],
                                             require_special=True)
        artifacts["paths_Y"] = paths_Y

        stage = "ordering"
        inp = HypothesisInput(sc.theorem, sc.model_X, sc.model_Y, sc.payoff, fld, scan, paths_Y,
                              sc.assertions, residual_tol=sc.tolerances["residual"])
        checklist, verdicts, direction = check_theorem_hypotheses(inp)
        state["checklist"].extend(checklist)
        state["verdicts"] = {k: v.to_dict() for k, v in verdicts.items()}
        hyp_ok = _hypotheses_ok(state["checklist"]) and direction is not None
        tested = direction or ("reversed" if sc.reversed else "ordered")
        link = linking_drift_scan(paths_Y, fld, sc.model_Y.chars, sc.model_X.chars, with_drift=spec["drift"],
                                  direction=tested)
        state["linking"] = link.to_dict()

        stage = "mc_engine"
        n, m, seed = sc.mc["n_paths"], sc.mc["n_steps"], sc.mc["seed"]
        est_X = estimate_terminal(sc.payoff, simulate_paths(sc.model_X, n, m, seed, record="terminal",
                                                            require_special=True))
        est_Y = estimate_terminal(sc.payoff, simulate_paths(sc.model_Y, n, m, seed, record="terminal",
                                                            require_special=True))
        state["estimates"] = {"X": est_X.to_dict(), "Y": est_Y.to_dict()}
        conclusion, info = decide(tested, hyp_ok, est_X, est_Y, link.interior_violation_fraction)
        info["branch"] = tested
        info["direction_source"] = "hypotheses" if direction is not None else "scenario_flag"
        state["estimates"]["decision"] = info
    except MartcompError as exc:
        prov["error"] = {"stage": exc.stage or stage, "type": type(exc).__name__, "message": str(exc)}
        conclusion = "inconclusive"
    return ComparisonReport(scen, state["checklist"], state["verdicts"], state["residual"], state["linking"],
                            state["estimates"], conclusion, prov, artifacts)


# --------------------------------------------------------------------------
# emission


def report_text(rep: ComparisonReport | dict) -> str:
    d = rep.to_dict() if isinstance(rep, ComparisonReport) else rep
    lines = [f"scenario: {d['scenario']['name']} ({d['scenario']['theorem']})",
             f"verdict: {d['conclusion']}"]
    dec = d["estimates"].get("decision", {})
    if dec:
        lines.append(f"branch: {dec.get('branch')} (from {dec.get('direction_source')})")
    for key in ("X", "Y"):
        e = d["estimates"].get(key)
        if e:
            lines.append(f"E f({key}_T) = {e['mean']:.7g} +- {e['stderr']:.3g} (n={e['n']})")
    if "signed_gap" in dec:
        lines.append(f"margin: gap {dec['signed_gap']:.6g}, {dec['separation_sigma']:.3g} combined stderr")
    for entry in d["checklist"]:
        lines.append(f"  [{entry['status']}] {entry['id']}: {entry['condition']}")
    for name, v in sorted(d["verdicts"].items()):
        lines.append(f"  verdict {name}: {v['status']} (margin_min {v['margin_min']:.4g})")
    if d["residual"]:
        lines.append(f"residual max |U|: {d['residual']['max_abs']:.3g}")
    if d["linking"]:
        lk = d["linking"]
        lines.append(f"linking scan ({lk['direction']}): violation fraction {lk['violation_fraction']:.4g}, "
                     f"interior {lk['interior_violation_fraction']:.4g}")
    err = d["provenance"].get("error")
    if err:
        lines.append(f"error in stage {err['stage']}: {err['type']}: {err['message']}")
    return "\n".join(lines) + "\n"


def emit_report(rep: ComparisonReport | dict, fmt: str, out) -> list[Path]:
    """Write ``rep`` as json, text or a csv_bundle directory; returns the files written."""
    out = Path(out)
    if fmt == "json":
        data = rep.to_json() if isinstance(rep, ComparisonReport) else \
            json.dumps(rep, sort_keys=True, indent=2) + "\n"
        out.write_text(data)
        return [out]
    if fmt == "text":
        out.write_text(report_text(rep))
        return [out]
    if fmt == "csv_bundle":
        if not isinstance(rep, ComparisonReport) or not rep.artifacts:
            raise DataError("csv bundles need the artifacts of a live run")
        out.mkdir(parents=True, exist_ok=True)
        files = []
        if "field" in rep.artifacts:
            files.append(rep.artifacts["field"].to_csv(out / "field.csv"))
        if "residual" in rep.artifacts:
            files.append(rep.artifacts["residual"].to_csv(out / "residual.csv"))
        if "paths_Y" in rep.artifacts:
            files.append(rep.artifacts["paths_Y"].sample_csv(out / "paths_Y.csv"))
        summary = out / "checklist.csv"
        with summary.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "status"])
            for e in rep.checklist:
                w.writerow([e["id"], e["status"]])
        files.append(summary)
        return files
    raise ConfigurationError(f"unknown report format {fmt!r}")


def exit_code(rep: ComparisonReport | dict) -> int:
    d = rep.to_dict() if isinstance(rep, ComparisonReport) else rep
    if d["provenance"].get("error"):
        return 2
    return 1 if d["conclusion"] == "ordering_contradicted" else 0
