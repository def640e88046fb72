"""Run configuration, suite execution and report writing.

Precedence for every setting: built-in default, then the config file, then
command-line flags.  Report files contain no timings, so a fixed config gives
byte-identical output; timings go to a separate ``timings.json``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import yaml

from . import fock
from .mayer_vietoris import CutElement, exactness_pipeline
from .generators import mv_scenario
from .suites import DEFAULT_DIMS, DEFAULT_TOL, DEFAULT_TRIALS, SUITES, trial_rng

log = logging.getLogger(__name__)

SCHEMA = 1
THREADS_ENV = "KKLAB_THREADS"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    seed: int = 0
    trials: Dict[str, int] = field(default_factory=dict)
    dims: Dict[str, int] = field(default_factory=lambda: dict(DEFAULT_DIMS))
    tolerances: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_TOL))
    suites: List[str] = field(default_factory=lambda: list(SUITES))
    out: str = "kklab-out"
    decay: Dict[str, Any] = field(default_factory=dict)
    scenarios: List[Dict[str, Any]] = field(default_factory=list)

    def trials_for(self, suite: str) -> int:
        return int(self.trials.get(suite, DEFAULT_TRIALS[suite]))

    def public(self) -> Dict[str, Any]:
        d = asdict(self)
        d.pop("out")
        d["trials"] = {s: self.trials_for(s) for s in self.suites}
        return d


def _merge_trials(cfg: RunConfig, value):
    if value is None:
        return
    if isinstance(value, Mapping):
        for k, v in value.items():
            if k not in SUITES:
                raise ConfigError(f"unknown suite {k!r} in trials")
            cfg.trials[k] = int(v)
    else:
        cfg.trials.update({s: int(value) for s in SUITES})


def _check_suites(names: Sequence[str]) -> List[str]:
    bad = [s for s in names if s not in SUITES]
    if bad:
        raise ConfigError(f"unknown suite(s): {', '.join(bad)}; choose from {', '.join(SUITES)}")
    return list(names)


def _check_dim(key: str):
    if key not in DEFAULT_DIMS:
        raise ConfigError(f"unknown dimension {key!r}; choose from {', '.join(DEFAULT_DIMS)}")


def parse_dims(text: str) -> Dict[str, int]:
    """``"n=6,N=2"`` to ``{"n": 6, "N": 2}``."""
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        key, sep, val = part.partition("=")
        if not sep:
            raise ConfigError(f"bad dims entry {part!r}; expected key=value")
        _check_dim(key.strip())
        try:
            out[key.strip()] = int(val)
        except ValueError as exc:
            raise ConfigError(f"bad dims value {val!r}") from exc
    return out


def load_config(path: Optional[str] = None, **overrides) -> RunConfig:
    """Defaults, then the YAML (or JSON) file at ``path``, then non-None overrides."""
    cfg = RunConfig()
    data: Dict[str, Any] = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a mapping")
        unknown = set(data) - {f for f in RunConfig.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for src in (data, {k: v for k, v in overrides.items() if v is not None}):
        if "seed" in src:
            cfg.seed = int(src["seed"])
        _merge_trials(cfg, src.get("trials"))
        if "dims" in src:
            for k in dict(src["dims"]):
                _check_dim(k)
            cfg.dims.update({k: int(v) for k, v in dict(src["dims"]).items()})
        if "tolerances" in src:
            for k, v in dict(src["tolerances"]).items():
                if k not in DEFAULT_TOL:
                    raise ConfigError(f"unknown tolerance {k!r}")
                cfg.tolerances[k] = float(v)
        if "suites" in src:
            s = src["suites"]
            cfg.suites = _check_suites([s] if isinstance(s, str) else list(s))
        if "out" in src:
            cfg.out = str(src["out"])
        if "decay" in src:
            cfg.decay.update(dict(src["decay"]))
        if "scenarios" in src:
            cfg.scenarios = list(src["scenarios"])
    if cfg.seed < 0 or cfg.seed >= 2 ** 64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    return cfg


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


# --------------------------------------------------------------------------- verify

def _run_trial(args) -> Tuple[str, int, List[Dict[str, Any]], float]:
    suite, trial, seed, dims, tol = args
    t0 = time.perf_counter()
    rows = []
    try:
        outcomes = SUITES[suite](trial_rng(seed, suite, trial), trial, dims, tol)
    except Exception as exc:  # a crash is a failed record, not a lost run
        outcomes = None
        rows.append({"suite": suite, "trial": trial, "tag": "trial-error",
                     "instance": f"{type(exc).__name__}: {exc}",
                     "bound": 0.0, "measured": 1.0, "pass": False})
    for o in outcomes or ():
        rows.append({"suite": suite, "trial": trial, "tag": o.tag, "instance": o.instance,
                     "bound": float(o.bound), "measured": float(o.measured), "pass": o.passed})
    return suite, trial, rows, time.perf_counter() - t0


def run_suites(cfg: RunConfig, workers: Optional[int] = None):
    """Records sorted by ``(suite order, trial)`` plus per-suite timings."""
    workers = worker_count() if workers is None else workers
    jobs = [(s, t, cfg.seed, dict(cfg.dims), dict(cfg.tolerances))
            for s in cfg.suites for t in range(cfg.trials_for(s))]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_trial, jobs, chunksize=8))
    else:
        results = [_run_trial(j) for j in jobs]
    order = {s: i for i, s in enumerate(SUITES)}
    results.sort(key=lambda r: (order[r[0]], r[1]))
    records = [row for r in results for row in r[2]]
    timings: Dict[str, float] = {}
    for suite, _, _, dt in results:
        timings[suite] = timings.get(suite, 0.0) + dt
    return records, timings


def summarize(records: Sequence[Mapping[str, Any]]) -> List[Dict[str, Any]]:
    """One row per ``(suite, tag)`` in first-seen order."""
    rows: Dict[Tuple[str, str], Dict[str, Any]] = {}
    for r in records:
        key = (r["suite"], r["tag"])
        row = rows.setdefault(key, {"suite": key[0], "tag": key[1], "records": 0,
                                    "failures": 0, "worst_margin": float("inf")})
        row["records"] += 1
        row["failures"] += 0 if r["pass"] else 1
        row["worst_margin"] = min(row["worst_margin"], r["bound"] - r["measured"])
    return list(rows.values())


def csv_text(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    """RFC-4180 text: CRLF line ends, minimal quoting."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def _dump(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def verify(cfg: RunConfig, workers: Optional[int] = None) -> Tuple[bool, Dict[str, Path]]:
    records, timings = run_suites(cfg, workers)
    summary = summarize(records)
    passed = all(r["pass"] for r in records)
    out = Path(cfg.out)
    doc = {"schema": SCHEMA, "command": "verify", "config": cfg.public(),
           "passed": passed, "summary": summary, "records": records}
    files = {"report": out / "report.json", "summary": out / "summary.csv",
             "timings": out / "timings.json"}
    _write(files["report"], _dump(doc))
    header = ["suite", "tag", "records", "failures", "worst_margin"]
    _write(files["summary"], csv_text(header, [[r[h] for h in header] for r in summary]))
    _write(files["timings"], _dump({"schema": SCHEMA, "seconds": timings}))
    for r in summary:
        if r["failures"]:
            log.warning("%s/%s: %d of %d records failed", r["suite"], r["tag"],
                        r["failures"], r["records"])
    return passed, files


# --------------------------------------------------------------------------- decay

DEPTH_RULE = "2k + ceil(k/2) + 2"


def decay(cfg: RunConfig, n: int, k_list: Sequence[int], sparse: bool = False,
          cap: int = fock.FOCK_DIM_CAP) -> Dict[str, Path]:
    """Decay table, manifest and plot data; raises ``DimensionCapError`` early."""
    k_list = [int(k) for k in k_list]
    if sparse:
        for k in k_list:
            fock.FockSpace(n, fock.min_depth(k), cap)   # raises before any work
    rows = fock.decay_experiment(n, k_list, sparse=sparse, cap=cap)
    out = Path(cfg.out)
    files = {"table": out / "decay.csv", "manifest": out / "decay_manifest.json",
             "plot": out / "decay_plot.csv"}
    _write(files["table"], csv_text(["n", "k", "L", "quantity", "value"],
                                    [[r.n, r.k, r.L, r.quantity, r.value] for r in rows]))
    plot = [[r.k, r.value] for r in rows if r.quantity == "k_comm_h0"]
    _write(files["plot"], csv_text(["x", "y"], plot))
    words = [fock.word_name(w) for w in fock.all_words(n, 2)]
    manifest = {"schema": SCHEMA, "command": "decay", "seed": cfg.seed, "n": n, "k": k_list,
                "depth_rule": DEPTH_RULE, "depths": [fock.min_depth(k) for k in k_list],
                "words": words, "route": "sparse" if sparse else "reduced", "cap": cap,
                "fitted_exponents": fock.fitted_exponents(rows)}
    _write(files["manifest"], _dump(manifest))
    return files


# --------------------------------------------------------------------------- boundary

DEFAULT_SCENARIOS = [
    {"name": "commuting", "n": 2, "N": 3, "eps": 0.0},
    {"name": "eps-1e-3", "n": 2, "N": 3, "eps": 1e-3},
    {"name": "eps-1e-2", "n": 2, "N": 3, "eps": 1e-2},
    {"name": "eps-1e-1", "n": 2, "N": 3, "eps": 1e-1},
]


def boundary(cfg: RunConfig) -> Tuple[bool, Dict[str, Path]]:
    """Exactness pipeline per scenario; margins checked against ``expected``."""
    scenarios = cfg.scenarios or DEFAULT_SCENARIOS
    tol = cfg.tolerances
    results = []
    passed = True
    for i, sc in enumerate(scenarios):
        seed = int(sc.get("seed", cfg.seed))
        rng = trial_rng(seed, "mv", 1_000_000 + i)
        s = mv_scenario(rng, n=int(sc.get("n", 2)), N=int(sc.get("N", 3)),
                        eps=float(sc.get("eps", 0.0)))
        rep = exactness_pipeline(s["p"], s["q"], CutElement(s["h"]), s["u_h"], s["u_1h"], s["X"])
        limit = tol["exact"] if float(sc.get("eps", 0.0)) == 0.0 else tol["slack"]
        checks = [{"name": f"identity:{k}", "bound": limit, "measured": v, "pass": v <= limit}
                  for k, v in sorted(rep.identities.items())]
        for k, bound in sorted(dict(sc.get("expected", {})).items()):
            v = rep.margins[k]
            checks.append({"name": f"margin:{k}", "bound": float(bound), "measured": v,
                           "pass": v <= float(bound)})
        checks += [{"name": f"combine:{c.name}", "bound": c.bound, "measured": c.measured,
                    "pass": c.passed} for c in rep.combine.checks]
        ok = all(c["pass"] for c in checks)
        passed &= ok
        results.append({"name": sc.get("name", f"scenario-{i}"), "seed": seed,
                        "n": int(sc.get("n", 2)), "N": int(sc.get("N", 3)),
                        "eps": float(sc.get("eps", 0.0)), "passed": ok, "nu": rep.nu,
                        "gamma": rep.gamma, "margins": rep.margins, "budgets": rep.budgets,
                        "certificate_samples": {k: len(c.samples)
                                                for k, c in sorted(rep.certificates.items())},
                        "checks": checks})
    out = Path(cfg.out)
    files = {"report": out / "boundary.json", "summary": out / "boundary.csv"}
    _write(files["report"], _dump({"schema": SCHEMA, "command": "boundary", "passed": passed,
                                   "scenarios": results}))
    header = ["scenario", "eps"] + sorted(results[0]["margins"]) + ["passed"]
    _write(files["summary"], csv_text(header, [
        [r["name"], r["eps"]] + [r["margins"][k] for k in sorted(r["margins"])] + [r["passed"]]
        for r in results]))
    return passed, files


__all__ = ["RunConfig", "ConfigError", "load_config", "parse_dims", "run_suites", "verify",
           "decay", "boundary", "summarize", "csv_text", "worker_count", "SCHEMA"]
