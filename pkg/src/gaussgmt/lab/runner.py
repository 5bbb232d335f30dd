"""Run experiment configurations and persist canonical result records."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .. import __version__
from ..boundary import (T_GRID, coordinate_frames, half_deviation_curve, hausdorff_sup,
                        make_time_sequence, reduced_boundary_defect, representation_check,
                        union_check)
from ..core import Frame, GaussianSpace, RngSeed, sample_normal
from ..errors import ConfigError, GaussGMTError
from ..mesh import LipschitzGraph
from ..perimeter import gaussian_perimeter, perimeter_closed_form, poincare_check
from ..quadrature import is_closed_form
from ..semigroup import EvalPolicy, T_BAR, graph_bound_check, mehler_batch
from ..sets import SetModel, reduce_to_support
from .config import ExperimentConfig, parse_config, serialize_config
from .grammar import parse_set

#: significant digits kept for floats in records; guards byte-identity against last-ulp noise
DIGITS = 12


@dataclass
class Outcome:
    items: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(item.get("pass", True) for item in self.items)


# ---------------------------------------------------------------------------
# canonical serialization


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return float(f"{v:.{DIGITS}g}")
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    return v


def canonical_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)  # RFC 4180 line endings by default
    w.writerow(header)
    for row in rows:
        w.writerow([_csv_cell(c) for c in row])
    return buf.getvalue()


def _csv_cell(c):
    c = _clean(c)
    return repr(c) if isinstance(c, float) else c


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# config helpers


def _set(cfg, key="set") -> SetModel:
    text = getattr(cfg, key)
    if text is None:
        raise ConfigError(f"experiment {cfg.experiment!r} needs '{key} = ...'")
    return parse_set(text)


def _space(cfg, E: SetModel | None = None) -> GaussianSpace:
    dim = cfg.dim if cfg.dim is not None else (E.dim if E is not None else 2)
    if E is not None and E.dim > dim:
        raise ConfigError(f"dim = {dim} is smaller than the set dimension {E.dim}")
    if cfg.spectrum is not None:
        if len(cfg.spectrum) != dim:
            raise ConfigError(f"spectrum has {len(cfg.spectrum)} entries, dim is {dim}")
        try:
            return GaussianSpace(dim, np.array(cfg.spectrum))
        except (ValueError, GaussGMTError) as exc:
            raise ConfigError(str(exc)) from exc
    return GaussianSpace(dim)


def _policy(cfg, default_mode="auto", default_samples=100_000) -> EvalPolicy:
    kw = {"mode": cfg.mode or default_mode,
          "mc_samples": cfg.mc_samples or default_samples}
    if cfg.gh_order is not None:
        kw["gh_order"] = cfg.gh_order
    if cfg.quad_max_dim is not None:
        kw["quad_max_dim"] = cfg.quad_max_dim
    return EvalPolicy(**kw)


def _frames(cfg, space, E):
    if cfg.frames is not None:
        try:
            return [Frame(f, space.dim) for f in cfg.frames]
        except ValueError as exc:
            raise ConfigError(f"frames: {exc}") from exc
    top = max(E.support()) + 1 if E.support() else 1
    return coordinate_frames(space, top)


def _est(e):
    return e.as_dict()


def _k(cfg):
    return cfg.tolerance if cfg.tolerance is not None else 4.0


# ---------------------------------------------------------------------------
# experiments


def run_semigroup(cfg, seed):
    E = _set(cfg)
    space = _space(cfg, E)
    pol = _policy(cfg, "monte_carlo", 1_000_000)
    ref_mode = "closed_form" if is_closed_form(E) else "quadrature"
    ref_pol = EvalPolicy(mode=ref_mode)
    X = sample_normal(space, cfg.points or 20, seed.child(1))
    out, rows = Outcome(), []
    k = _k(cfg)
    for i, t in enumerate(cfg.t_grid or (1.0, 0.1, 0.01)):
        v, e, mode, _ = mehler_batch(E, t, X, space, pol, seed.child(10 + i))
        r, re_, _, _ = mehler_batch(E, t, X, space, ref_pol)
        n = pol.mc_samples
        for j in range(len(X)):
            diff = abs(v[j] - r[j])
            # an all-0 or all-1 sample has zero sample stderr; fall back to the binomial one
            se = max(e[j], math.sqrt(max(r[j] * (1 - r[j]), 0.0) / n)) if mode == "monte_carlo" else e[j]
            tol = k * (se + re_[j]) + 1e-12
            out.items.append({"t": t, "point": j, "value": v[j], "error": e[j], "method": mode,
                              "samples": n if mode == "monte_carlo" else 0,
                              "reference": r[j], "reference_method": ref_mode,
                              "margin": tol - diff, "pass": diff <= tol})
            rows.append((t, j, v[j], e[j], r[j], re_[j]))
    out.tables["values"] = (("t", "point", "value", "error", "reference", "reference_error"), rows)
    return out


def run_perimeter(cfg, seed):
    E = _set(cfg)
    space = _space(cfg, E)
    res = cfg.resolution or 400
    ref = perimeter_closed_form(E)
    out, rows = Outcome(), []
    for r in (res // 2, res):
        pm = gaussian_perimeter(E, space, r)
        rows.append((r, pm.total, pm.tolerance))
    total, tol = rows[-1][1], rows[-1][2]
    item = {"resolution": res, "total": total, "mesh_tolerance": tol}
    if ref is not None:
        bound = cfg.tolerance if cfg.tolerance is not None else 1e-5
        item.update(reference=ref, difference=abs(total - ref), margin=bound - abs(total - ref),
                    **{"pass": abs(total - ref) <= bound})
    else:
        item.update(refinement=abs(rows[1][1] - rows[0][1]), **{"pass": True})
    out.items.append(item)
    out.tables["refinement"] = (("resolution", "total", "tolerance"), rows)
    return out


def _half_deviation_policy(cfg, E):
    R, sup = reduce_to_support(E)
    if cfg.mode is None and len(sup) >= 3 and not is_closed_form(E):
        # sectioned quadrature of a 3-d polytope per mesh point is too slow here
        return _policy(cfg, "monte_carlo", 1 << 14)
    return _policy(cfg)


def run_half_deviation(cfg, seed):
    E = _set(cfg)
    space = _space(cfg, E)
    grid = cfg.t_grid or T_GRID
    J = half_deviation_curve(E, grid, space, _half_deviation_policy(cfg, E), seed, cfg.resolution or 200)
    out = Outcome()
    for t, j in zip(grid, J):
        out.items.append({"t": t, "J": _est(j)})
    mono = [J[i + 1].value - J[i].value - 2 * (J[i].error + J[i + 1].error) for i in range(len(J) - 1)]
    ratio = J[-1].value / J[0].value if J[0].value > 0 else 0.0
    out.items.append({"check": "monotone", "margin": -max(mono) if mono else 0.0,
                      "pass": all(m <= 0 for m in mono)})
    out.items.append({"check": "decay", "ratio": ratio, "margin": 1 / 3 - ratio, "pass": ratio < 1 / 3})
    out.tables["J"] = (("t", "J", "error"), [(t, j.value, j.error) for t, j in zip(grid, J)])
    return out


def run_representation(cfg, seed):
    E = _set(cfg)
    space = _space(cfg, E)
    seq = make_time_sequence(cfg.t0 or 0.25, cfg.count or 20)
    tests = [None] + [parse_set(s) for s in (cfg.test_sets or ())]
    frames = _frames(cfg, space, E)
    rows = representation_check(E, seq, frames, tests, space, cfg.resolution or 400,
                                policy=_policy(cfg), seed=seed)
    names = ["everything"] + list(cfg.test_sets or ())
    out = Outcome()
    table = []
    for name, r in zip(names, rows):
        out.items.append({"test_set": name, "perimeter": _est(r.perimeter), "hausdorff": _est(r.hausdorff),
                          "margin": r.tolerance - r.difference, "pass": r.ok})
        table.append((name, r.perimeter.value, r.perimeter.error, r.hausdorff.value, r.hausdorff.error))
    out.tables["pairs"] = (("test_set", "perimeter", "perimeter_error", "hausdorff", "hausdorff_error"),
                           table)
    out.summary["sequence"] = seq.as_dict()
    return out


def run_union(cfg, seed):
    E, F = _set(cfg), _set(cfg, "other_set")
    space = _space(cfg, E if E.dim >= F.dim else F)
    seq = make_time_sequence(cfg.t0 or 0.25, cfg.count or 12)
    rep = union_check(E, F, space, seq, cfg.resolution or 200, policy=_policy(cfg), seed=seed)
    out = Outcome()
    out.items.append({"check": "triple_density_half", "count": rep.triple_points,
                      "pass": rep.triple_points == 0})
    out.items.append({"check": "normal_cancellation", "shared_points": rep.shared_points,
                      "max_residual": rep.normal_cancellation, "skipped": rep.skipped_normals,
                      "pass": rep.normal_cancellation <= 1e-9})
    out.items.append({"check": "additivity", "residual": rep.additivity_residual,
                      "margin": rep.additivity_tolerance - rep.additivity_residual,
                      "pass": rep.additivity_residual <= rep.additivity_tolerance})
    out.items.append({"check": "decomposition", "residual": rep.decomposition_residual,
                      "margin": rep.decomposition_tolerance - rep.decomposition_residual,
                      "pass": rep.decomposition_residual <= rep.decomposition_tolerance})
    out.summary.update(union_perimeter=rep.union_perimeter, **rep.details)
    return out


def run_poincare(cfg, seed):
    E = _set(cfg)
    space = _space(cfg, E)
    out, rows = Outcome(), []
    k = _k(cfg)
    for i, t in enumerate(cfg.t_grid or (0.01, 0.1, 1.0)):
        r = poincare_check(E, t, space, seed.child(i), n=cfg.points or 200_000,
                           policy=_policy(cfg), resolution=cfg.resolution or 400)
        margin = r.bound + k * r.lhs.error - r.lhs.value
        out.items.append({"t": t, "lhs": _est(r.lhs), "bound": r.bound, "c_t": r.c_t,
                          "perimeter": r.perimeter, "strengthened": _est(r.strengthened),
                          "margin": margin, "pass": r.holds(k)})
        rows.append((t, r.lhs.value, r.lhs.error, r.bound))
    out.tables["poincare"] = (("t", "lhs", "error", "bound"), rows)
    return out


def make_graph(name: str) -> LipschitzGraph:
    if name == "segment":
        return LipschitzGraph(lambda z: np.zeros_like(z), lambda z: np.zeros_like(z), -1.0, 1.0, 0.0, 2.0)
    return LipschitzGraph(lambda z: 0.3 * np.sin(z), lambda z: 0.3 * np.cos(z), -1.0, 1.0, 0.3, 2.0)


def run_graph_bound(cfg, seed):
    G = make_graph(cfg.graph or "segment")
    mesh = G.mesh()
    X = sample_normal(GaussianSpace(2), cfg.points or 100, seed.child(1))
    out, rows = Outcome(), []
    t_bar = cfg.t_bar if cfg.t_bar is not None else T_BAR
    for t in cfg.t_grid or (1e-2, 1e-3):
        r = graph_bound_check(mesh, t, X, t_bar)
        out.items.append({"t": t, "points": len(X), "min_margin": float(r.margins.min()),
                          "pass": r.all_ok})
        rows.extend((t, j, r.lhs[j], r.bound[j], r.distance[j]) for j in range(len(X)))
    out.tables["margins"] = (("t", "point", "lhs", "bound", "distance"), rows)
    return out


def run_reduced_boundary(cfg, seed):
    E = _set(cfg)
    space = _space(cfg, E)
    grid = cfg.t_grid or (0.1, 0.01)
    res = cfg.resolution or 100
    per = gaussian_perimeter(E, space, res).total
    vals = [reduced_boundary_defect(E, t, space, res) for t in grid]
    out = Outcome()
    for t, v in zip(grid, vals):
        out.items.append({"t": t, "defect": _est(v), "relative": v.value / per})
    steps = [vals[i + 1].value - vals[i].value - (vals[i].error + vals[i + 1].error)
             for i in range(len(vals) - 1)]
    out.items.append({"check": "nonincreasing", "margin": -max(steps) if steps else 0.0,
                      "pass": all(s <= 0 for s in steps)})
    out.tables["defect"] = (("t", "defect", "error", "relative"),
                            [(t, v.value, v.error, v.value / per) for t, v in zip(grid, vals)])
    out.summary["perimeter"] = per
    return out


def run_hausdorff_sup(cfg, seed):
    E = _set(cfg)
    space = _space(cfg, E)
    frames = _frames(cfg, space, E)
    r = hausdorff_sup(E, frames, space, policy=_policy(cfg), seed=seed)
    out = Outcome()
    for F, res in zip(frames, r.results):
        out.items.append({"frame": list(F.coords), "value": _est(res.value)})
    out.items.append({"check": "monotone", "pass": r.monotone})
    out.summary.update(supremum=_est(r.supremum), stabilization_index=r.stabilization_index)
    out.tables["frames"] = (("frame_size", "value", "error"),
                            [(F.dim, x.value.value, x.value.error) for F, x in zip(frames, r.results)])
    return out


EXPERIMENT_RUNNERS = {
    "semigroup": run_semigroup, "perimeter": run_perimeter, "theorem1": run_half_deviation,
    "representation": run_representation, "union": run_union, "poincare": run_poincare,
    "graph_bound": run_graph_bound, "reduced_boundary": run_reduced_boundary,
    "hausdorff_sup": run_hausdorff_sup,
}

EXAMPLE_CONFIGS = {
    "semigroup": "experiment = semigroup\nset = halfspace(dir=[1, 0], c=0.5)\n"
                 "t_grid = [1.0, 0.1, 0.01]\npoints = 20\nmode = monte_carlo\nmc_samples = 1000000\nseed = 42\n",
    "perimeter": "experiment = perimeter\nset = box([-1, 1] x [-1, 1])\nresolution = 400\nseed = 42\n",
    "theorem1": "experiment = theorem1\nset = box([-1, 1] x [-1, 1])\n"
                "t_grid = [0.2, 0.1, 0.05, 0.025, 0.0125]\nseed = 42\n",
    "representation": "experiment = representation\nset = ball(center=[0, 0], r=1)\n"
                      "test_sets = [halfspace(dir=[-1, 0], c=0), ball(center=[0.5, 0.5], r=0.8)]\n"
                      "t0 = 0.25\ncount = 20\nseed = 42\n",
    "union": "experiment = union\nset = halfspace(dir=[1, 0], c=0)\n"
             "other_set = complement(halfspace(dir=[1, 0], c=0))\ndim = 2\nseed = 42\n",
    "poincare": "experiment = poincare\nset = ball(center=[0.3, 0], r=1)\nt_grid = [0.01, 0.1, 1.0]\nseed = 42\n",
    "graph_bound": "experiment = graph_bound\ngraph = sine\nt_grid = [0.01, 0.001]\npoints = 100\nseed = 42\n",
    "reduced_boundary": "experiment = reduced_boundary\nset = box([-1, 1] x [-1, 1])\n"
                        "t_grid = [0.1, 0.01]\nseed = 42\n",
    "hausdorff_sup": "experiment = hausdorff_sup\nset = cylinder(base=box([-1, 1] x [-0.5, 0.5]), coords=[0, 1], dim=3)\n"
                     "frames = [[0], [0, 1], [0, 1, 2]]\nseed = 42\n",
}


def example_config(experiment: str) -> str:
    if experiment not in EXAMPLE_CONFIGS:
        raise ConfigError(f"unknown experiment {experiment!r}; expected one of {', '.join(EXAMPLE_CONFIGS)}")
    # normalize through the parser so printed examples are canonical
    return serialize_config(parse_config(EXAMPLE_CONFIGS[experiment]))


@dataclass
class RunResult:
    record: dict
    passed: bool
    files: list
    seconds: float


def execute(cfg: ExperimentConfig, seed: int | None = None) -> tuple[dict, Outcome]:
    """Run ``cfg`` in memory and return the canonical record and the raw outcome."""
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    s = cfg.seed if cfg.seed is not None else 0
    try:
        outcome = EXPERIMENT_RUNNERS[cfg.experiment](cfg, RngSeed(s))
    except (ValueError, GaussGMTError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{cfg.experiment}: {exc}") from exc
    record = {"artifact_version": __version__, "experiment": cfg.experiment, "seed": s,
              "config": serialize_config(cfg), "items": outcome.items, "summary": outcome.summary,
              "passed": outcome.passed}
    return record, outcome


def run(cfg: ExperimentConfig, out_dir=None, seed: int | None = None) -> RunResult:
    """Execute ``cfg``, write ``<experiment>.json`` plus CSV tables; timing goes to a sidecar."""
    out_dir = Path(out_dir or cfg.output or "results")
    start = time.perf_counter()
    record, outcome = execute(cfg, seed)
    elapsed = time.perf_counter() - start
    files = []
    path = out_dir / f"{cfg.experiment}.json"
    atomic_write(path, canonical_json(record))
    files.append(path)
    for name, (header, rows) in sorted(outcome.tables.items()):
        p = out_dir / f"{cfg.experiment}_{name}.csv"
        atomic_write(p, csv_text(header, rows))
        files.append(p)
    side = out_dir / f"{cfg.experiment}.time.json"
    atomic_write(side, canonical_json({"wall_clock_seconds": elapsed}))
    files.append(side)
    return RunResult(record, outcome.passed, files, elapsed)
