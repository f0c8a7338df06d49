"""Config-driven experiment runner.

A config file is a flat list of ``dotted.key = value`` lines, values in JSON
(bare words are read as strings), ``#`` starts a comment::

    kind = "tails"
    seed = 7
    spec.kind = "laplace"
    spec.dimension = 200
    sizes.m = 20
    grids.t = [1, 2, 3]
    options.statistic = "projection_sup"

Every run writes ``manifest.json`` (the fully resolved config and the tool
version), result CSV/JSON files and, for curves, gnuplot-ready ``.dat``
files. Output bytes are a function of the config alone.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import bounds, metrics, recovery, tails
from .sampler import DistributionSpec, InvalidSpecError, RandomStream, sample_matrix, sample_vectors

__all__ = ["EXPERIMENTS", "ConfigError", "ExperimentConfig", "parse_config", "load_config", "run"]

VERSION = "0.1.0"
EXPERIMENTS = ("isotropy", "sigma", "paouris", "tails", "gamma", "rip", "recovery", "bounds")
STATISTICS = ("projection_sup", "order_stat", "gamma_km")


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""

    def __init__(self, field_name: str, problem: str):
        super().__init__(f"config field '{field_name}': {problem}")
        self.field = field_name


_DEFAULTS = {
    "isotropy": {"trials": 100_000},
    "sigma": {"trials": 100_000},
    "paouris": {"trials": 100_000},
    "tails": {"trials": 10_000},
    "gamma": {"trials": 1},
    "rip": {"trials": 20},
    "recovery": {"trials": 100},
    "bounds": {"trials": 0},
}


@dataclass
class ExperimentConfig:
    kind: str
    spec: Optional[DistributionSpec] = None
    sizes: dict = field(default_factory=dict)
    grids: dict = field(default_factory=dict)
    trials: Optional[int] = None
    seed: int = 0
    constants: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    out: Optional[str] = None
    workers: int = 1

    def to_flat(self) -> dict:
        flat = {"kind": self.kind, "seed": self.seed, "trials": self.trials, "workers": self.workers}
        if self.out is not None:
            flat["out"] = self.out
        if self.spec is not None:
            for k, v in self.spec.to_dict().items():
                flat[f"spec.{k}"] = v
        for section in ("sizes", "grids", "constants", "options"):
            for k, v in getattr(self, section).items():
                flat[f"{section}.{k}"] = v
        return flat

    def dumps(self) -> str:
        flat = self.to_flat()
        return "".join(f"{k} = {json.dumps(flat[k], sort_keys=True)}\n" for k in sorted(flat))

    def resolved(self) -> "ExperimentConfig":
        """Copy with every default filled in and validated."""
        if self.kind not in EXPERIMENTS:
            raise ConfigError("kind", f"must be one of {', '.join(EXPERIMENTS)}")
        cfg = ExperimentConfig(
            self.kind, self.spec, dict(self.sizes), dict(self.grids),
            self.trials, self.seed, dict(self.constants), dict(self.options), self.out, self.workers,
        )
        if cfg.trials is None:
            cfg.trials = _DEFAULTS[cfg.kind]["trials"]
        if not isinstance(cfg.seed, int) or not 0 <= cfg.seed < 2**64:
            raise ConfigError("seed", "must be an unsigned 64-bit integer")
        if not isinstance(cfg.workers, int) or cfg.workers < 1:
            raise ConfigError("workers", "must be a positive integer")
        if cfg.kind not in ("bounds", "gamma") or (cfg.kind == "gamma" and "matrix" not in cfg.options):
            if cfg.spec is None:
                raise ConfigError("spec.kind", "a distribution spec is required")
        _RESOLVERS[cfg.kind](cfg)
        return cfg


# ---------------------------------------------------------------------------
# parsing


def _parse_value(raw: str):
    raw = raw.strip()
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_config(text: str) -> ExperimentConfig:
    flat = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", "expected 'key = value'")
        key, raw = line.split("=", 1)
        flat[key.strip()] = _parse_value(raw)
    return from_flat(flat)


def from_flat(flat: dict) -> ExperimentConfig:
    sections = {"sizes": {}, "grids": {}, "constants": {}, "options": {}}
    spec_d = {}
    top = {}
    for key, value in flat.items():
        head, _, rest = key.partition(".")
        if head == "spec" and rest:
            spec_d[rest] = value
        elif head in sections and rest:
            sections[head][rest] = value
        elif not rest and key in ("kind", "seed", "trials", "workers", "out"):
            top[key] = value
        else:
            raise ConfigError(key, "unknown field")
    if "kind" not in top:
        raise ConfigError("kind", "missing")
    spec = None
    if spec_d:
        if "base" in spec_d and isinstance(spec_d["base"], str):
            spec_d["base"] = {"kind": spec_d["base"], "dimension": spec_d.get("dimension", 0)}
        try:
            spec = DistributionSpec.from_dict(spec_d)
        except (InvalidSpecError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError("spec", str(exc)) from None
    return ExperimentConfig(
        kind=top["kind"],
        spec=spec,
        trials=top.get("trials"),
        seed=top.get("seed", 0),
        workers=top.get("workers", 1),
        out=top.get("out"),
        **sections,
    )


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


# ---------------------------------------------------------------------------
# per-experiment defaults


def _int_size(cfg, name, default=None, lo=1, hi=None):
    v = cfg.sizes.get(name, default)
    if v is None:
        raise ConfigError(f"sizes.{name}", "required")
    if isinstance(v, bool) or not isinstance(v, int) or v < lo or (hi is not None and v > hi):
        rng = f"[{lo}, {hi}]" if hi is not None else f">= {lo}"
        raise ConfigError(f"sizes.{name}", f"must be an integer in {rng}, got {v!r}")
    cfg.sizes[name] = v
    return v


def _grid(cfg, name, default):
    g = cfg.grids.get(name, list(default))
    if not isinstance(g, list) or not g or any(not isinstance(x, (int, float)) for x in g):
        raise ConfigError(f"grids.{name}", "must be a non-empty list of numbers")
    if any(b <= a for a, b in zip(g, g[1:])):
        raise ConfigError(f"grids.{name}", "must be strictly increasing")
    cfg.grids[name] = [float(x) for x in g]
    return cfg.grids[name]


def _min_trials(cfg, lo):
    if not isinstance(cfg.trials, int) or cfg.trials < lo:
        raise ConfigError("trials", f"must be an integer >= {lo}")


def _resolve_isotropy(cfg):
    _min_trials(cfg, 2)


def _resolve_sigma(cfg):
    _min_trials(cfg, tails.MIN_SIGMA_TRIALS)
    p = _grid(cfg, "p", tails.DEFAULT_P_GRID)
    if p[0] < 1:
        raise ConfigError("grids.p", "entries must be >= 1")
    cfg.options.setdefault("search", "canonical_plus_random")
    if cfg.options["search"] not in ("canonical_plus_random", "sphere_ascent"):
        raise ConfigError("options.search", "must be canonical_plus_random or sphere_ascent")


def _resolve_paouris(cfg):
    _min_trials(cfg, tails.MIN_SIGMA_TRIALS)
    p = _grid(cfg, "p", (1.0, 2.0, 4.0, 8.0))
    if p[0] < 1:
        raise ConfigError("grids.p", "entries must be >= 1")


def _resolve_tails(cfg):
    _min_trials(cfg, tails.MIN_TAIL_TRIALS)
    _grid(cfg, "t", tails.DEFAULT_T_GRID)
    N = cfg.spec.dimension
    stat = cfg.options.setdefault("statistic", "projection_sup")
    if stat not in STATISTICS:
        raise ConfigError("options.statistic", f"must be one of {', '.join(STATISTICS)}")
    if stat == "projection_sup":
        _int_size(cfg, "m", None, 1, N)
    elif stat == "order_stat":
        _int_size(cfg, "ell", None, 1, N)
        _grid(cfg, "p", tails.DEFAULT_P_GRID)
        cfg.options.setdefault("sigma_trials", 100_000)
    else:
        n = _int_size(cfg, "n")
        _int_size(cfg, "k", None, 1, n)
        _int_size(cfg, "m", None, 1, N)
        if n > N:
            raise ConfigError("sizes.n", "must not exceed N")
        cfg.options.setdefault("method", "auto")
        cfg.options.setdefault("restarts", 10)
    cfg.options.setdefault("fit", True)


def _resolve_gamma(cfg):
    cfg.options.setdefault("method", "exact")
    cfg.options.setdefault("restarts", 20)
    if cfg.options["method"] not in ("exact", "heuristic"):
        raise ConfigError("options.method", "must be exact or heuristic")
    if "matrix" in cfg.options:
        return
    _min_trials(cfg, 1)
    n = _int_size(cfg, "n")
    _int_size(cfg, "k", None, 1, n)
    _int_size(cfg, "m", None, 1, cfg.spec.dimension)


def _resolve_rip(cfg):
    _min_trials(cfg, 1)
    if "n" in cfg.sizes and "n_list" not in cfg.options:
        cfg.options["n_list"] = [cfg.sizes.pop("n")]
    ns = cfg.options.get("n_list")
    if not isinstance(ns, list) or not ns or any(not isinstance(v, int) or v < 1 for v in ns):
        raise ConfigError("options.n_list", "must be a non-empty list of positive integers")
    _int_size(cfg, "m", None, 1, cfg.spec.dimension)
    cfg.options.setdefault("method", "exact")
    cfg.options.setdefault("n_supports", 100_000)
    if cfg.options["method"] not in ("exact", "support_sampled"):
        raise ConfigError("options.method", "must be exact or support_sampled")


def _resolve_recovery(cfg):
    _min_trials(cfg, 1)
    N = cfg.spec.dimension
    _int_size(cfg, "n", None, 1, N)
    if "m" in cfg.sizes and "m_list" not in cfg.options:
        cfg.options["m_list"] = [cfg.sizes.pop("m")]
    ms = cfg.options.get("m_list")
    if not isinstance(ms, list) or not ms or any(not isinstance(v, int) or not 1 <= v <= N for v in ms):
        raise ConfigError("options.m_list", "must be a non-empty list of integers in [1, N]")


def _resolve_bounds(cfg):
    bid = cfg.options.get("bound_id")
    if bid not in bounds.BOUND_IDS:
        raise ConfigError("options.bound_id", f"must be one of {', '.join(bounds.BOUND_IDS)}")
    if bid in ("thm4", "thm5"):
        cfg.options.setdefault("sigma_mode", "paper_upper" if cfg.spec is None else "profile")
        if cfg.options["sigma_mode"] == "profile":
            if cfg.spec is None:
                raise ConfigError("spec.kind", "profile mode needs a distribution spec")
            _grid(cfg, "p", tails.DEFAULT_P_GRID)
            cfg.options.setdefault("sigma_trials", 100_000)


_RESOLVERS = {
    "isotropy": _resolve_isotropy,
    "sigma": _resolve_sigma,
    "paouris": _resolve_paouris,
    "tails": _resolve_tails,
    "gamma": _resolve_gamma,
    "rip": _resolve_rip,
    "recovery": _resolve_recovery,
    "bounds": _resolve_bounds,
}


# ---------------------------------------------------------------------------
# output helpers


def _num(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _csv(header, rows) -> str:
    return ",".join(header) + "\n" + "".join(",".join(_num(x) if not isinstance(x, str) else x for x in r) + "\n" for r in rows)


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not serialisable: {type(o)}")


def _dat(curve: tails.TailCurve) -> str:
    lines = [f"# {curve.statistic} trials={curve.trials}", "# t threshold survival ci_low ci_high hits"]
    for row in zip(curve.t_grid, curve.thresholds, curve.survival, curve.ci_low, curve.ci_high, curve.hits):
        lines.append(" ".join(_num(v) for v in row))
    return "\n".join(lines) + "\n"


def _curve_csv(curve: tails.TailCurve) -> str:
    rows = zip(curve.t_grid, curve.survival_text(), curve.ci_low, curve.ci_high, [curve.trials] * len(curve.t_grid))
    return _csv(("t", "value", "ci_low", "ci_high", "trials"), rows)


# ---------------------------------------------------------------------------
# experiments; each returns (summary dict, {filename: text})


def _run_isotropy(cfg, stream):
    X = sample_vectors(cfg.spec, cfg.trials, stream.child(0))
    mean = X.mean(axis=0)
    cov = np.cov(X, rowvar=False, bias=False).reshape(cfg.spec.dimension, cfg.spec.dimension)
    dev = float(np.max(np.abs(cov - np.eye(cfg.spec.dimension))))
    summary = {"max_abs_cov_deviation": dev, "max_abs_mean": float(np.max(np.abs(mean))),
               "mean_norm_sq": float(np.mean(np.sum(X * X, axis=1)))}
    csv = _csv(("N", "trials", "max_abs_mean", "max_abs_cov_deviation"),
               [(cfg.spec.dimension, cfg.trials, summary["max_abs_mean"], dev)])
    return summary, {"results.csv": csv}


def _run_sigma(cfg, stream):
    prof = tails.sigma_profile(cfg.spec, cfg.grids["p"], cfg.trials, cfg.options["search"], stream)
    rows = [(p, v, v, p, cfg.trials, m) for p, v, m in prof.rows()]
    csv = _csv(("p", "value", "ci_low", "ci_high", "trials", "method"), rows)
    summary = {"p": prof.p_grid, "sigma": prof.values, "methods": list(prof.methods),
               "paper_upper": prof.paper_upper(), "isotonic_correction": prof.correction}
    return summary, {"results.csv": csv, "sigma.dat": "# p sigma paper_upper\n" + "".join(
        f"{_num(p)} {_num(v)} {_num(p)}\n" for p, v, _ in prof.rows())}


def _run_paouris(cfg, stream):
    rows, out = [], []
    for i, p in enumerate(cfg.grids["p"]):
        r = tails.paouris_ratio(cfg.spec, p, cfg.trials, stream.child(i))
        rows.append((p, r.ratio, r.norm_moment, r.second_moment_root, r.sigma, r.trials))
        out.append(r.ratio)
    csv = _csv(("p", "ratio", "norm_moment", "second_moment_root", "sigma_lower", "trials"), rows)
    return {"p": cfg.grids["p"], "ratio": out, "max_ratio": max(out)}, {"results.csv": csv}


def _statistic(cfg) -> tails.Statistic:
    s = cfg.options["statistic"]
    if s == "projection_sup":
        return tails.Statistic.projection_sup(cfg.sizes["m"])
    if s == "order_stat":
        return tails.Statistic.order_stat(cfg.sizes["ell"])
    return tails.Statistic.gamma_km(cfg.sizes["n"], cfg.sizes["k"], cfg.sizes["m"],
                                    cfg.options["method"], cfg.options["restarts"])


def _run_tails(cfg, stream):
    stat = _statistic(cfg)
    curve = tails.tail_curve(cfg.spec, stat, cfg.grids["t"], cfg.trials, stream.child(0), cfg.workers)
    N = cfg.spec.dimension
    summary = {"statistic": curve.statistic, "t": curve.t_grid, "survival": curve.survival,
               "survival_text": curve.survival_text(), "ci_low": curve.ci_low, "ci_high": curve.ci_high,
               "hits": curve.hits, "trials": curve.trials}
    if cfg.options["fit"]:
        if stat.kind == "projection_sup":
            fit = bounds.fit_constant(curve, "thm3", {"m": stat.m, "N": N})
            bid = "thm3"
        elif stat.kind == "gamma_km":
            fit = bounds.fit_constant(curve, "thm7", {"k": stat.k, "m": stat.m, "n": stat.n, "N": N})
            bid = "thm7"
        else:
            prof = tails.sigma_profile(cfg.spec, cfg.grids["p"], cfg.options["sigma_trials"],
                                       stream=stream.child(1))
            fit = bounds.fit_constant(curve, "thm5", {"ell": stat.ell, "N": N}, prof)
            bid = "thm5"
        summary["fitted_constant"] = {"bound_id": bid, "C": None if fit.infinite else fit.C,
                                      "infinite": fit.infinite, "points_used": fit.points_used}
    return summary, {"results.csv": _curve_csv(curve), "curve.dat": _dat(curve)}


def _run_gamma(cfg, stream):
    files = {}
    if "matrix" in cfg.options:
        A = metrics.read_matrix_csv(cfg.options["matrix"])
        mats = [A]
        k = cfg.sizes.get("k", A.shape[0])
        m = cfg.sizes.get("m", A.shape[1])
        for name, v, hi in (("k", k, A.shape[0]), ("m", m, A.shape[1])):
            if not isinstance(v, int) or not 1 <= v <= hi:
                raise ConfigError(f"sizes.{name}", f"must be an integer in [1, {hi}]")
    else:
        k, m = cfg.sizes["k"], cfg.sizes["m"]
        mats = [sample_matrix(cfg.spec, cfg.sizes["n"], stream.child(t, 0)) for t in range(cfg.trials)]
    certs = []
    for t, A in enumerate(mats):
        if cfg.options["method"] == "exact":
            c = metrics.gamma_km_exact(A, k, m, workers=cfg.workers)
        else:
            c = metrics.gamma_km_heuristic(A, k, m, cfg.options["restarts"], stream.child(t, 1))
        certs.append(c)
    lines = "".join(json.dumps(c.to_dict(), sort_keys=True) + "\n" for c in certs)
    files["certificates.jsonl"] = lines
    files["results.csv"] = _csv(("trial", "value", "method"), [(t, c.value, c.method) for t, c in enumerate(certs)])
    if "matrix" not in cfg.options and cfg.trials == 1:
        buf = "".join(",".join(format(float(v), ".17g") for v in row) + "\n" for row in mats[0])
        files["matrix.csv"] = buf
    summary = {"values": [c.value for c in certs], "certificate": certs[0].to_dict() if len(certs) == 1 else None}
    return summary, files


def _run_rip(cfg, stream):
    rows, summary = [], {"n": [], "median": [], "q90": []}
    per_trial = []
    m = cfg.sizes["m"]
    for i, n in enumerate(cfg.options["n_list"]):
        ens = recovery.delta_m_ensemble(cfg.spec, n, m, cfg.trials, cfg.options["method"], stream.child(i),
                                        cfg.options["n_supports"], workers=cfg.workers)
        rows.append((n, cfg.spec.dimension, m, cfg.trials, ens.median, ens.q90, cfg.options["method"]))
        summary["n"].append(n)
        summary["median"].append(ens.median)
        summary["q90"].append(ens.q90)
        for t, r in enumerate(ens.reports):
            per_trial.append(json.dumps({"n": n, "trial": t, **r.to_dict()}, sort_keys=True) + "\n")
    csv = _csv(("n", "N", "m", "trials", "median_delta", "q90_delta", "method"), rows)
    return summary, {"results.csv": csv, "trials.jsonl": "".join(per_trial)}


def _run_recovery(cfg, stream):
    rows, lines, rates = [], [], []
    n, N = cfg.sizes["n"], cfg.spec.dimension
    for i, m in enumerate(cfg.options["m_list"]):
        res = recovery.recovery_experiment(cfg.spec, n, N, m, cfg.trials, stream.child(i), cfg.workers)
        lo, hi = res.ci()
        rows.append((n, N, m, cfg.trials, res.success_rate, lo, hi))
        rates.append(res.success_rate)
        lines.extend(json.dumps(t.to_dict(), sort_keys=True) + "\n" for t in res.trials)
    csv = _csv(("n", "N", "m", "trials", "success_rate", "ci_low", "ci_high"), rows)
    return {"m": cfg.options["m_list"], "success_rate": rates}, {"results.csv": csv, "trials.jsonl": "".join(lines)}


def _run_bounds(cfg, stream):
    bid = cfg.options["bound_id"]
    params = {**cfg.sizes, **cfg.constants}
    for key in ("t", "x", "p"):
        if key in cfg.options:
            params[key] = cfg.options[key]
    profile = None
    if bid in ("thm4", "thm5") and cfg.options["sigma_mode"] == "profile":
        profile = tails.sigma_profile(cfg.spec, cfg.grids["p"], cfg.options["sigma_trials"], stream=stream)
    q = bounds.BoundQuery(bid, params, profile, cfg.options.get("sigma_mode", "profile"))
    res = bounds.evaluate_bound(q)
    csv = _csv(("bound_id", "value"), [(bid, res.value)])
    return res.to_dict(), {"results.csv": csv, "results.json": _json(res.to_dict())}


_RUNNERS = {
    "isotropy": _run_isotropy,
    "sigma": _run_sigma,
    "paouris": _run_paouris,
    "tails": _run_tails,
    "gamma": _run_gamma,
    "rip": _run_rip,
    "recovery": _run_recovery,
    "bounds": _run_bounds,
}


def run(config: ExperimentConfig) -> dict:
    """Run one experiment; returns the summary and writes artifacts if ``out`` is set.

    ``LCRIP_WORKERS`` and ``LCRIP_OUT`` override the worker count and output
    directory. The worker count never changes results and is left out of the
    manifest so that outputs are byte-identical across worker counts.
    """
    cfg = config
    if os.environ.get("LCRIP_WORKERS"):
        cfg = ExperimentConfig(**{**cfg.__dict__, "workers": int(os.environ["LCRIP_WORKERS"])})
    if os.environ.get("LCRIP_OUT"):
        cfg = ExperimentConfig(**{**cfg.__dict__, "out": os.environ["LCRIP_OUT"]})
    cfg = cfg.resolved()
    stream = RandomStream(cfg.seed, (EXPERIMENTS.index(cfg.kind),))
    manifest_flat = cfg.to_flat()
    manifest_flat.pop("workers")
    manifest_flat.pop("out", None)
    manifest = {"tool": "lcrip", "version": VERSION, "config": manifest_flat}

    out = Path(cfg.out) if cfg.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "manifest.json").write_text(_json(manifest))
    summary, files = _RUNNERS[cfg.kind](cfg, stream)
    if out is not None:
        for name, text in files.items():
            (out / name).write_text(text)
        (out / "summary.json").write_text(_json(summary))
    return {"summary": json.loads(_json(summary)), "manifest": manifest, "files": sorted(files)}
