"""Command-line front end: configured experiments to CSV, manifest and figures.

``mcfusion run config.json`` executes one experiment described by a JSON
config and writes, into the output directory, a CSV of result rows (fixed
column order, 12 significant digits) and a JSON run-manifest echoing the
fully resolved config.  Re-running a manifest reproduces the CSV byte for
byte.  ``mcfusion report results.csv`` renders the matching figures next to
the delimited output; ``run --figures`` does both in one go.

Exit codes: 0 success, 2 malformed config, 3 infeasible calibration (partial
results are still written).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

from dataclasses import replace
from importlib.metadata import version as _pkg_version

import numpy as np

from . import analysis, asymptotics, montecarlo
from .channel import ChannelParams, DiffusionGeometry, default_k_max, hitting_probabilities
from .detectors import COUNT_KINDS, DetectorKind, DetectorSpec, per_sensor_llr
from .sensing import SensingModel, make_soft_model, sum_pmf

__all__ = ["main", "COLUMNS", "ConfigError", "load_config", "resolve_config",
           "run_experiment"]

THREADS_ENV = "MCFUSION_THREADS"

COLUMNS = [
    "run_id", "experiment", "detector", "scheme",
    "L", "b0", "b1", "p0", "p1",
    "A", "Amax", "J", "N", "M", "mode",
    "threshold", "gamma_local", "gamma_global", "target_pfa",
    "s", "s1", "ex0", "ex1",
    "pfa", "pd", "pm", "pfa_count", "pm_count", "ci_half_width",
    "trials", "seed", "method", "status",
]

EXPERIMENTS = ("roc", "sweep", "exponent", "bound-vs-m", "validate")
ALL_DETECTORS = [k.value for k in DetectorKind]
DEFAULT_TARGETS = [0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7]


class ConfigError(Exception):
    """Malformed or inconsistent experiment configuration."""


def _require_keys(block: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(block) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _get(block: dict, key: str, types, where: str, required: bool = True,
         default=None):
    if key not in block:
        if required:
            raise ConfigError(f"missing key '{key}' in {where}")
        return default
    value = block[key]
    if not isinstance(value, types) or isinstance(value, bool):
        raise ConfigError(f"'{key}' in {where} has the wrong type")
    return value


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if "config" in raw:  # a run-manifest: re-run its resolved config
        inner = raw["config"]
        if not isinstance(inner, dict):
            raise ConfigError("manifest 'config' must be a JSON object")
        return inner
    return raw


def _resolve_sensing(block) -> dict:
    if not isinstance(block, dict):
        raise ConfigError("'sensing' must be an object")
    forms = [k for k in ("L", "p0", "g0") if k in block]
    if "L" in block:
        _require_keys(block, {"L", "b0", "b1"}, "sensing")
        L = _get(block, "L", int, "sensing")
        b0 = float(_get(block, "b0", (int, float), "sensing"))
        b1 = float(_get(block, "b1", (int, float), "sensing"))
        if L < 2:
            raise ConfigError("sensing.L must be at least 2")
        return {"L": L, "b0": b0, "b1": b1}
    if "p0" in block or "p1" in block:
        _require_keys(block, {"p0", "p1"}, "sensing")
        p0 = float(_get(block, "p0", (int, float), "sensing"))
        p1 = float(_get(block, "p1", (int, float), "sensing"))
        return {"p0": p0, "p1": p1}
    if "g0" in block or "g1" in block:
        _require_keys(block, {"g0", "g1"}, "sensing")
        g0 = _get(block, "g0", list, "sensing")
        g1 = _get(block, "g1", list, "sensing")
        return {"g0": [float(v) for v in g0], "g1": [float(v) for v in g1]}
    raise ConfigError("sensing needs (L, b0, b1), (p0, p1) or (g0, g1)"
                      + ("" if not forms else f" (got {forms})"))


def _build_sensing(resolved: dict) -> SensingModel:
    try:
        if "L" in resolved:
            return make_soft_model(resolved["L"], resolved["b0"], resolved["b1"])
        if "p0" in resolved:
            return SensingModel.from_hard(resolved["p0"], resolved["p1"])
        return SensingModel(g0=np.array(resolved["g0"]),
                            g1=np.array(resolved["g1"]))
    except ValueError as exc:
        raise ConfigError(f"invalid sensing block: {exc}") from exc


def _resolve_channel(block) -> dict:
    if not isinstance(block, dict):
        raise ConfigError("'channel' must be an object")
    _require_keys(block, {"A", "Amax", "J", "N", "M", "mode", "geometry"},
                  "channel")
    out = {
        "J": float(_get(block, "J", (int, float), "channel")),
        "N": _get(block, "N", int, "channel"),
        "M": _get(block, "M", int, "channel"),
        "mode": _get(block, "mode", str, "channel", required=False,
                     default="steady"),
    }
    if out["mode"] not in ("steady", "transient"):
        raise ConfigError("channel.mode must be 'steady' or 'transient'")
    geom = block.get("geometry")
    if geom is not None:
        if "A" in block:
            raise ConfigError("give either channel.A or channel.geometry, not both")
        _require_keys(geom, {"r1", "r2", "D", "T", "k_max"}, "channel.geometry")
        g = {k: float(_get(geom, k, (int, float), "channel.geometry"))
             for k in ("r1", "r2", "D", "T")}
        g["k_max"] = _get(geom, "k_max", int, "channel.geometry", required=False,
                          default=None)
        if g["k_max"] is None:
            g["k_max"] = default_k_max(g["r1"], g["r2"], g["D"], g["T"])
        out["geometry"] = g
        out["Amax"] = float(_get(block, "Amax", (int, float), "channel"))
        return out
    out["A"] = float(_get(block, "A", (int, float), "channel"))
    if "Amax" in block:
        out["Amax"] = float(_get(block, "Amax", (int, float), "channel"))
    return out


def _build_channel(resolved: dict) -> ChannelParams:
    try:
        if "geometry" in resolved:
            geom = DiffusionGeometry(**resolved["geometry"])
            h = hitting_probabilities(geom)
            return ChannelParams(h=h, Amax=resolved["Amax"], J=resolved["J"],
                                 N=resolved["N"], M=resolved["M"],
                                 A=resolved["Amax"] * float(h.sum()))
        if "Amax" in resolved:
            amax, a = resolved["Amax"], resolved["A"]
            if amax <= 0.0:
                raise ConfigError("channel.Amax must be positive")
            return ChannelParams(h=np.array([a / amax]), Amax=amax,
                                 J=resolved["J"], N=resolved["N"],
                                 M=resolved["M"], A=a)
        return ChannelParams.from_gain(resolved["A"], resolved["J"],
                                       resolved["N"], resolved["M"])
    except ValueError as exc:
        raise ConfigError(f"invalid channel block: {exc}") from exc


def _resolve_detectors(raw, experiment: str) -> list[str]:
    if raw is None:
        if experiment in ("exponent", "bound-vs-m"):
            return [DetectorKind.MRC.value]
        return list(ALL_DETECTORS)
    if not isinstance(raw, list) or not raw:
        raise ConfigError("'detectors' must be a non-empty list of names")
    out = []
    for name in raw:
        try:
            out.append(DetectorKind(name).value)
        except ValueError:
            raise ConfigError(f"unknown detector {name!r} "
                              f"(expected one of {ALL_DETECTORS})") from None
    if len(set(out)) != len(out):
        raise ConfigError("'detectors' has duplicates")
    return out


def _resolve_targets(raw, where: str) -> list[float]:
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"'{where}' must be a non-empty list")
    out = []
    for v in raw:
        if not isinstance(v, (int, float)) or isinstance(v, bool) \
                or not 0.0 < float(v) <= 1.0:
            raise ConfigError(f"entries of '{where}' must lie in (0, 1]")
        out.append(float(v))
    return out


_TOP_KEYS = {"experiment", "id", "sensing", "channel", "detectors", "trials",
             "seed", "target_pfa", "target_pfas", "thresholds", "sweep",
             "exponent", "bound"}


def resolve_config(raw: dict) -> dict:
    """Validate a raw config and bake in every default.

    The result is self-contained: feeding it back through ``run`` reproduces
    the same rows exactly.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _require_keys(raw, _TOP_KEYS, "config")
    experiment = _get(raw, "experiment", str, "config")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}")
    out = {
        "experiment": experiment,
        "id": _get(raw, "id", str, "config", required=False, default=experiment),
        "sensing": _resolve_sensing(_get(raw, "sensing", dict, "config")),
        "channel": _resolve_channel(_get(raw, "channel", dict, "config")),
        "detectors": _resolve_detectors(raw.get("detectors"), experiment),
    }
    needs_mc = experiment in ("sweep", "bound-vs-m", "validate")
    if needs_mc:
        out["trials"] = _get(raw, "trials", int, "config", required=False,
                             default=montecarlo.DEFAULT_TRIALS)
        out["seed"] = _get(raw, "seed", int, "config")
        if out["trials"] < 1:
            raise ConfigError("trials must be positive")
        if out["seed"] < 0:
            raise ConfigError("seed must be nonnegative")
    elif "trials" in raw or "seed" in raw:
        raise ConfigError(f"'{experiment}' is analytic; it takes no trials/seed")

    if experiment == "validate":
        if out["channel"]["mode"] == "transient":
            raise ConfigError("validate compares against steady-state closed "
                              "forms; channel.mode must be 'steady'")
        out["target_pfas"] = _resolve_targets(
            raw.get("target_pfas", DEFAULT_TARGETS), "target_pfas")
    elif "target_pfas" in raw:
        raise ConfigError("'target_pfas' applies to the validate experiment")

    if experiment == "sweep":
        block = _get(raw, "sweep", dict, "config")
        _require_keys(block, {"axis", "values"}, "sweep")
        axis = _get(block, "axis", str, "sweep")
        if axis not in montecarlo.SWEEP_AXES:
            raise ConfigError(f"sweep.axis must be one of {montecarlo.SWEEP_AXES}")
        values = _get(block, "values", list, "sweep")
        if not values:
            raise ConfigError("sweep.values must be non-empty")
        out["sweep"] = {"axis": axis,
                        "values": [float(v) for v in values]}
        out["target_pfa"] = float(_get(raw, "target_pfa", (int, float), "config"))
        if not 0.0 < out["target_pfa"] <= 1.0:
            raise ConfigError("target_pfa must lie in (0, 1]")
        if axis == "L" and "L" not in out["sensing"]:
            raise ConfigError("sweeping L needs the (L, b0, b1) sensing form")
    elif "sweep" in raw or ("target_pfa" in raw and experiment != "sweep"):
        raise ConfigError("'sweep'/'target_pfa' apply to the sweep experiment")

    if experiment == "exponent":
        block = raw.get("exponent", {})
        if not isinstance(block, dict):
            raise ConfigError("'exponent' must be an object")
        _require_keys(block, {"a_values", "s_max", "s_points"}, "exponent")
        a_values = _get(block, "a_values", list, "exponent", required=False)
        if a_values is None:
            # Default to the configured channel gain, baked in so a re-run
            # of the manifest resolves identically.
            a_values = [_build_channel(out["channel"]).A]
        if not a_values:
            raise ConfigError("exponent.a_values must be non-empty")
        out["exponent"] = {
            "a_values": [float(v) for v in a_values],
            "s_max": float(_get(block, "s_max", (int, float), "exponent",
                                required=False, default=3.0)),
            "s_points": _get(block, "s_points", int, "exponent",
                             required=False, default=300),
        }
        if out["exponent"]["s_max"] <= 0 or out["exponent"]["s_points"] < 2:
            raise ConfigError("exponent needs s_max > 0 and s_points >= 2")
        _reject_detectors(out, "exponent")
    elif "exponent" in raw:
        raise ConfigError("'exponent' applies to the exponent experiment")

    if experiment == "bound-vs-m":
        block = _get(raw, "bound", dict, "config")
        _require_keys(block, {"m_values"}, "bound")
        m_values = _get(block, "m_values", list, "bound")
        if not m_values or any(not isinstance(v, int) or v < 1 for v in m_values):
            raise ConfigError("bound.m_values must be positive integers")
        out["bound"] = {"m_values": list(m_values)}
        _reject_detectors(out, "bound-vs-m")
    elif "bound" in raw:
        raise ConfigError("'bound' applies to the bound-vs-m experiment")

    if "thresholds" in raw:
        if experiment != "roc":
            raise ConfigError("'thresholds' applies to the roc experiment")
        out["thresholds"] = _resolve_thresholds(raw["thresholds"], out["detectors"])
    return out


def _reject_detectors(out: dict, experiment: str) -> None:
    bad = [d for d in out["detectors"]
           if DetectorKind(d) not in (DetectorKind.MRC, DetectorKind.OPT_DTM,
                                      DetectorKind.MAX_LOG, DetectorKind.CV)]
    if experiment == "bound-vs-m":
        bad = [d for d in out["detectors"] if DetectorKind(d) is not DetectorKind.MRC]
    if bad:
        raise ConfigError(f"{experiment} supports per-sensor-statistic detectors"
                          f" only (got {bad})")


def _resolve_thresholds(raw, detectors) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError("'thresholds' must map detector names to lists")
    _require_keys(raw, set(detectors), "thresholds")
    out = {}
    for name, values in raw.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"thresholds[{name!r}] must be a non-empty list")
        if DetectorKind(name) is DetectorKind.TWO_STAGE:
            pairs = []
            for v in values:
                if (not isinstance(v, list) or len(v) != 2
                        or not all(isinstance(u, int) for u in v)):
                    raise ConfigError("two-stage thresholds are [local, global] "
                                      "integer pairs")
                pairs.append([int(v[0]), int(v[1])])
            out[name] = pairs
        else:
            out[name] = [float(v) for v in values]
    return out


# ---------------------------------------------------------------------------
# experiment execution


class _Context:
    """Resolved config turned into model objects plus row scaffolding."""

    def __init__(self, resolved: dict, threads: int):
        self.resolved = resolved
        self.experiment = resolved["experiment"]
        self.run_id = resolved["id"]
        self.model = _build_sensing(resolved["sensing"])
        self.params = _build_channel(resolved["channel"])
        self.mode = resolved["channel"]["mode"]
        self.detectors = [DetectorKind(d) for d in resolved["detectors"]]
        self.threads = threads
        self.trials = resolved.get("trials")
        self.seed = resolved.get("seed")

    def sim_config(self, scheme: str, trials=None) -> montecarlo.SimConfig:
        return montecarlo.SimConfig(seed=self.seed,
                                    trials=trials or self.trials,
                                    mode=self.mode, scheme=scheme,
                                    threads=self.threads)

    def base_row(self) -> dict:
        sensing = self.resolved["sensing"]
        p = self.params
        row = dict.fromkeys(COLUMNS)
        row.update(run_id=self.run_id, experiment=self.experiment,
                   L=self.model.L, b0=sensing.get("b0"), b1=sensing.get("b1"),
                   p0=sensing.get("p0"), p1=sensing.get("p1"),
                   A=p.A, Amax=p.Amax, J=p.J, N=p.N, M=p.M, mode=self.mode,
                   status="ok")
        return row


def _spec_row(row: dict, spec: DetectorSpec) -> dict:
    row.update(detector=spec.kind.value, scheme=spec.scheme)
    if spec.kind is DetectorKind.TWO_STAGE:
        row.update(gamma_local=spec.gamma_local, gamma_global=spec.gamma_global)
    else:
        row.update(threshold=spec.threshold)
    return row


def _mc_row(row: dict, res: montecarlo.SimResult) -> dict:
    row.update(method="monte-carlo", pfa=res.pfa_hat, pd=res.pd_hat,
               pm=res.pm_hat, pfa_count=res.pfa_count, pm_count=res.pm_count,
               ci_half_width=max(res.pfa_ci, res.pm_ci), trials=res.trials,
               seed=res.seed)
    return row


def _analytic_row(row: dict, point: analysis.PerfPoint) -> dict:
    row.update(method="analytic", pfa=point.pfa, pd=point.pd, pm=point.pm)
    return row


def _exp_validate(ctx: _Context, quiet: bool):
    rows, checked, passed = [], 0, 0
    cells = []
    for kind in ctx.detectors:
        for target in ctx.resolved["target_pfas"]:
            threshold = analysis.calibrate_threshold(kind, ctx.model, ctx.params,
                                                     target)
            spec = montecarlo.spec_for_threshold(kind, threshold)
            point = montecarlo.analytic_point(kind, ctx.model, ctx.params,
                                              threshold)
            cells.append((kind, target, spec, point))
    by_scheme: dict[str, list[int]] = {}
    for i, (_, _, spec, _) in enumerate(cells):
        by_scheme.setdefault(spec.scheme, []).append(i)
    results: list[montecarlo.SimResult | None] = [None] * len(cells)
    for scheme, idxs in by_scheme.items():
        multi = montecarlo.estimate_perf_multi(
            [cells[i][2] for i in idxs], ctx.model, ctx.params,
            ctx.sim_config(scheme))
        for i, res in zip(idxs, multi):
            results[i] = res
    flagged = False
    for (kind, target, spec, point), res in zip(cells, results):
        status = "boundary" if point.pd <= point.uncertainty else "ok"
        flagged = flagged or status != "ok"
        arow = _analytic_row(_spec_row(ctx.base_row(), spec), point)
        arow.update(target_pfa=target, status=status)
        mrow = _mc_row(_spec_row(ctx.base_row(), spec), res)
        mrow.update(target_pfa=target, status=status)
        rows.extend([arow, mrow])
        ok = (abs(point.pfa - res.pfa_hat) <= res.pfa_ci + point.uncertainty
              and abs(point.pm - res.pm_hat) <= res.pm_ci + point.uncertainty)
        checked += 1
        passed += int(ok)
    verdict = "PASS" if passed == checked else "FAIL"
    summary = {"comparisons": checked, "within_ci": passed, "verdict": verdict}
    if not quiet:
        print(f"validate: {passed}/{checked} analytic-vs-simulation cells "
              f"within 3-sigma -> {verdict}")
    return rows, summary, flagged


def _exp_roc(ctx: _Context, quiet: bool):
    rows = []
    conf = ctx.resolved.get("thresholds", {})
    for kind in ctx.detectors:
        thresholds = conf.get(kind.value)
        if kind is DetectorKind.TWO_STAGE and thresholds is not None:
            thresholds = [tuple(t) for t in thresholds]
        points = analysis.roc_curve(kind, ctx.model, ctx.params,
                                    thresholds=thresholds)
        for point in points:
            spec = montecarlo.spec_for_threshold(kind, point.threshold)
            rows.append(_analytic_row(_spec_row(ctx.base_row(), spec), point))
    return rows, {"points": len(rows)}, False


def _exp_sweep(ctx: _Context, quiet: bool):
    block = ctx.resolved["sweep"]
    soft = ctx.resolved["sensing"]
    soft_shape = (soft["b0"], soft["b1"]) if "L" in soft else None
    entries = montecarlo.sweep(block["axis"], block["values"], ctx.model,
                               ctx.params, ctx.sim_config("dtm"),
                               ctx.detectors, ctx.resolved["target_pfa"],
                               soft_shape=soft_shape)
    rows, flagged = [], False
    for e in entries:
        row = _mc_row(_spec_row(ctx.base_row(), e.spec), e.result)
        row.update(target_pfa=ctx.resolved["target_pfa"], status=e.status)
        if e.axis in ("A", "J", "M", "N", "L"):  # trials is already in the row
            row[e.axis] = e.value
            if e.axis == "A":
                row["Amax"] = e.value / max(float(np.sum(ctx.params.h)), 1e-300)
        rows.append(row)
        flagged = flagged or e.status != "ok"
    return rows, {"rows": len(rows)}, flagged


def _exp_exponent(ctx: _Context, quiet: bool):
    block = ctx.resolved["exponent"]
    s_grid = np.linspace(block["s_max"] / block["s_points"], block["s_max"],
                         block["s_points"])
    rows = []
    for a_value in block["a_values"]:
        params = _rescale_gain(ctx.params, a_value)
        pmf0, pmf1 = analysis.count_pmf_pair(ctx.model, params)
        for kind in ctx.detectors:
            llr = per_sensor_llr(kind, ctx.model, params)
            curve = asymptotics.exponent_curve(pmf0, pmf1, llr, s_grid)
            for s, e0, e1 in zip(curve.s_grid, curve.ex0, curve.ex1):
                row = _spec_row(ctx.base_row(), DetectorSpec(kind=kind, threshold=0.0))
                row.update(method="exponent", threshold=None, s=float(s),
                           ex0=float(e0), ex1=float(e1), A=params.A,
                           Amax=params.Amax)
                rows.append(row)
            row = _spec_row(ctx.base_row(), DetectorSpec(kind=kind, threshold=0.0))
            row.update(method="exponent", threshold=None, status="optimum",
                       s=curve.s_star0, s1=curve.s_star1,
                       ex0=asymptotics.chernoff_exponent(curve.s_star0, pmf0, llr),
                       ex1=asymptotics.chernoff_exponent(curve.s_star1, pmf1, llr),
                       A=params.A, Amax=params.Amax)
            rows.append(row)
    return rows, {"rows": len(rows)}, False


def _exp_bound_vs_m(ctx: _Context, quiet: bool):
    rows = []
    for m in ctx.resolved["bound"]["m_values"]:
        params = replace(ctx.params, M=int(m))
        gamma = _equalizing_count_threshold(ctx.model, params)
        point = analysis.mrc_perf_closed_form(sum_pmf(ctx.model, params.M),
                                              params, gamma)
        spec = DetectorSpec(kind=DetectorKind.MRC, threshold=gamma)
        arow = _analytic_row(_spec_row(ctx.base_row(), spec), point)
        arow.update(M=m)
        rows.append(arow)

        res = montecarlo.estimate_perf(spec, ctx.model, params,
                                       ctx.sim_config("dtm"))
        mrow = _mc_row(_spec_row(ctx.base_row(), spec), res)
        mrow.update(M=m)
        rows.append(mrow)

        pmf0, pmf1 = analysis.count_pmf_pair(ctx.model, params)
        llr = per_sensor_llr(DetectorKind.MRC, ctx.model, params)
        gamma_llr = (-params.M * params.N * params.A
                     + gamma * math.log1p(params.A / params.J))
        tilt = asymptotics.optimize_s(pmf0, pmf1, llr, gamma_llr, params.M)
        upp = asymptotics.chernoff_bounds(tilt.s0, tilt.s1, gamma_llr, params.M,
                                          pmf0, pmf1, llr)
        brow = _spec_row(ctx.base_row(), spec)
        brow.update(method="chernoff-bound", M=m, s=tilt.s0, s1=tilt.s1,
                    pfa=upp[0], pm=upp[1], pd=1.0 - upp[1])
        rows.append(brow)
    return rows, {"rows": len(rows)}, False


def _rescale_gain(params: ChannelParams, a_value: float) -> ChannelParams:
    total_h = float(np.sum(params.h))
    if total_h == 0.0:
        return ChannelParams.from_gain(a_value, params.J, params.N, params.M)
    return replace(params, Amax=a_value / total_h, A=a_value)


def _equalizing_count_threshold(model: SensingModel, params: ChannelParams) -> int:
    """Integer total-count threshold balancing Pfa against Pm."""
    spmf = sum_pmf(model, params.M)
    best = None
    gamma = -1
    while True:
        point = analysis.mrc_perf_closed_form(spmf, params, gamma)
        gap = abs(point.pfa - point.pm)
        if best is None or gap < best[0]:
            best = (gap, gamma)
        if point.pfa <= point.pm or point.pfa == 0.0:
            return best[1]
        gamma += 1


_RUNNERS = {
    "validate": _exp_validate,
    "roc": _exp_roc,
    "sweep": _exp_sweep,
    "exponent": _exp_exponent,
    "bound-vs-m": _exp_bound_vs_m,
}


def run_experiment(resolved: dict, threads: int = 1, quiet: bool = True):
    """Execute a resolved config; returns (rows, summary, flagged)."""
    ctx = _Context(resolved, threads)
    return _RUNNERS[ctx.experiment](ctx, quiet)


# ---------------------------------------------------------------------------
# output


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    f = float(value)
    if math.isnan(f):
        return "nan"
    if math.isinf(f):
        return "inf" if f > 0 else "-inf"
    if f != 0.0 and abs(f) < 1e-300:
        return "<1e-300"
    return f"{f:.12g}"


def write_csv(path: str, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row.get(c)) for c in COLUMNS) + "\n")


def write_manifest(path: str, resolved: dict, csv_name: str, threads: int,
                   summary: dict, figures: list[str], elapsed: float) -> None:
    manifest = {
        "version": _pkg_version("mcfusion"),
        "run_id": resolved["id"],
        "experiment": resolved["experiment"],
        "config": resolved,
        "csv": csv_name,
        "figures": figures,
        "columns": COLUMNS,
        "threads": threads,
        "elapsed_seconds": round(elapsed, 3),
        "summary": summary,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=False)
        fh.write("\n")


def _resolve_threads(flag) -> int:
    if flag is not None:
        return max(1, int(flag))
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer") from None
    return 1


def _cmd_run(args) -> int:
    try:
        threads = _resolve_threads(args.threads)
        resolved = resolve_config(load_config(args.config))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    os.makedirs(args.output_dir, exist_ok=True)
    start = time.perf_counter()
    rows, summary, flagged = run_experiment(resolved, threads=threads,
                                            quiet=args.quiet)
    csv_name = f"{resolved['id']}.csv"
    csv_path = os.path.join(args.output_dir, csv_name)
    write_csv(csv_path, rows)
    figures: list[str] = []
    if args.figures:
        from . import report
        figures = [os.path.basename(p)
                   for p in report.render_report(csv_path, args.output_dir)]
    write_manifest(os.path.join(args.output_dir, f"{resolved['id']}.manifest.json"),
                   resolved, csv_name, threads, summary, figures,
                   time.perf_counter() - start)
    if not args.quiet:
        print(f"wrote {csv_path} ({len(rows)} rows)")
    if flagged:
        print("warning: some calibrations hit a degenerate operating point",
              file=sys.stderr)
        return 3
    return 0


def _cmd_report(args) -> int:
    from . import report
    out_dir = args.output_dir or os.path.dirname(os.path.abspath(args.csv))
    os.makedirs(out_dir, exist_ok=True)
    try:
        paths = report.render_report(args.csv, out_dir)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not args.quiet:
        for p in paths:
            print(f"wrote {p}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mcfusion",
        description="Cooperative abnormality detection experiments over "
                    "Poisson molecular reporting channels.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a JSON experiment config")
    p_run.add_argument("config", help="path to the config (or a run-manifest)")
    p_run.add_argument("--output-dir", default=".", help="where to write outputs")
    p_run.add_argument("--threads", type=int, default=None,
                       help=f"worker threads (default: ${THREADS_ENV} or 1)")
    p_run.add_argument("--quiet", action="store_true", help="suppress progress")
    p_run.add_argument("--figures", action="store_true",
                       help="render figures next to the CSV")
    p_run.set_defaults(func=_cmd_run)

    p_rep = sub.add_parser("report", help="render figures from a results CSV")
    p_rep.add_argument("csv", help="results CSV produced by 'run'")
    p_rep.add_argument("--output-dir", default=None,
                       help="figure directory (default: beside the CSV)")
    p_rep.add_argument("--quiet", action="store_true", help="suppress output")
    p_rep.set_defaults(func=_cmd_report)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
