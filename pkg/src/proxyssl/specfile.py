"""Experiment spec files: flat key-value text with one section per study.

Example::

    [global]
    datasets = data/news.csv, data/sent.csv
    n_folds = 3
    n_seeds = 5
    base_seed = 7
    epochs = 60

    [study baselines]
    kind = baselines
    rates = 0.95, 0.90, 0.80
    algorithms = supervised, TBST, CBST, TT, TTWD, CT

    [study sampling]
    kind = sampling
    rates = 0.90
    algorithms = TT, TTWD
    modes = x:norepl, 2x:repl, x:repl, x_half:repl, x_third_disjoint:nointer

Study kinds: ``baselines`` (one row per algorithm), ``sampling`` (rows =
algorithm x bootstrap mode), ``fresh_model`` (rows = algorithm x fresh/warm),
``eval_mode`` (rows = algorithm x ensemble/single), ``thresholds`` (TBST
confidence bands), ``count_windows`` (CBST rank windows) and ``sweep``
(supervised accuracy vs labeled fraction). Every study implicitly includes
the Supervised baseline so significance can be marked.

An optional ``[reference]`` section supplies expected cell means
(``<dataset>@<rate>/<row> = <value>``) that the run report compares against
without gating anything.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field

from .classifier import TrainConfig
from .dataset import SamplingStrategy, load_csv
from .engine import SslConfig
from .errors import ConfigError
from .protocol import AlgorithmEntry, ExperimentGrid

STUDY_KINDS = ("baselines", "sampling", "fresh_model", "eval_mode",
               "thresholds", "count_windows", "sweep")
SSL_NAMES = ("TBST", "CBST", "CT", "TT", "TTWD")

_MODE_TOKENS = {"repl": True, "norepl": False, "nointer": False}


@dataclass
class ExperimentSpec:
    dataset_paths: list[str]
    grids: list[ExperimentGrid]
    out_dir: str | None = None
    alpha: float = 0.10
    reference: dict = field(default_factory=dict)  # (dataset, rate, row) -> value


def _split_list(raw):
    return [tok.strip() for tok in raw.split(",") if tok.strip()]


def _floats(raw, what):
    try:
        return [float(v) for v in _split_list(raw)]
    except ValueError:
        raise ConfigError(f"{what}: expected comma-separated numbers, got {raw!r}")


def parse_sampling_mode(token):
    """``<size_mode>:<repl|norepl|nointer>`` -> SamplingStrategy."""
    if ":" not in token:
        raise ConfigError(f"sampling mode {token!r} must look like 'x:norepl' or '2x:repl'")
    size, repl = token.split(":", 1)
    if repl not in _MODE_TOKENS:
        raise ConfigError(f"unknown replacement token {repl!r} in sampling mode {token!r}")
    return SamplingStrategy(size_mode=size.strip(), with_replacement=_MODE_TOKENS[repl])


def _base_ssl(sec, algorithm, **overrides):
    kwargs = dict(
        algorithm=algorithm,
        tau1=sec.getfloat("tau1", 0.9),
        tau2=sec.getfloat("tau2", 1.0),
        count_lo=sec.getint("count_lo", 0),
        count_hi=sec.getint("count_hi", 100),
        max_iterations=sec.getint("max_iterations", 20),
        fresh_model_each_iteration=sec.getboolean("fresh_model", False),
        sampling=parse_sampling_mode(sec.get("sampling", "x:norepl")),
        eval_mode=sec.get("eval", "ensemble"),
    )
    kwargs.update(overrides)
    return SslConfig(**kwargs)


def _study_entries(kind, sec, algorithms):
    """AlgorithmEntry rows for one study section."""
    entries = [AlgorithmEntry("supervised")]
    if kind == "baselines":
        for name in algorithms:
            if name == "supervised":
                continue
            entries.append(AlgorithmEntry(name, _base_ssl(sec, name)))
    elif kind == "sampling":
        modes = _split_list(sec.get("modes", "x:norepl, 2x:repl, x:repl, x_half:repl, x_third_disjoint:nointer"))
        for name in algorithms:
            if name not in ("TT", "TTWD"):
                raise ConfigError(f"sampling study supports TT/TTWD, got {name!r}")
            for mode in modes:
                strat = parse_sampling_mode(mode)
                entries.append(AlgorithmEntry(name, _base_ssl(sec, name, sampling=strat),
                                              detail=strat.label()))
    elif kind == "fresh_model":
        for name in algorithms:
            if name == "supervised":
                continue
            for fresh, detail in ((True, "fresh"), (False, "warm")):
                entries.append(AlgorithmEntry(
                    name, _base_ssl(sec, name, fresh_model_each_iteration=fresh), detail=detail))
    elif kind == "eval_mode":
        for name in algorithms:
            if name not in ("TT", "TTWD", "CT"):
                raise ConfigError(f"eval_mode study supports TT/TTWD/CT, got {name!r}")
            for mode, detail in (("ensemble", "ensemble"), ("best_single", "single")):
                entries.append(AlgorithmEntry(name, _base_ssl(sec, name, eval_mode=mode),
                                              detail=detail))
    elif kind == "thresholds":
        pairs = _split_list(sec.get("pairs", "0.7:1.0, 0.8:1.0, 0.9:1.0, 0.7:0.9, 0.7:0.8, 0.8:0.9"))
        for pair in pairs:
            try:
                t1, t2 = (float(v) for v in pair.split(":"))
            except ValueError:
                raise ConfigError(f"threshold pair {pair!r} must look like '0.7:0.9'")
            entries.append(AlgorithmEntry("TBST", _base_ssl(sec, "TBST", tau1=t1, tau2=t2),
                                          detail=f"t{t1:g}-{t2:g}"))
    elif kind == "count_windows":
        windows = _split_list(sec.get("windows", "0:300, 0:200, 0:100, 100:200, 100:300, 200:300"))
        for window in windows:
            try:
                lo, hi = (int(v) for v in window.split(":"))
            except ValueError:
                raise ConfigError(f"count window {window!r} must look like '100:300'")
            entries.append(AlgorithmEntry("CBST", _base_ssl(sec, "CBST", count_lo=lo, count_hi=hi),
                                          detail=f"c{lo}-{hi}"))
    elif kind == "sweep":
        pass  # supervised only; rates derive from the fractions
    else:
        raise ConfigError(f"unknown study kind {kind!r}, expected one of {STUDY_KINDS}")
    return entries


def parse_spec(path):
    """Parse and fully validate a spec file; loads every referenced dataset.

    All datasets must exist and all configs must pass their invariants
    before any training starts.
    """
    if not os.path.exists(path):
        raise ConfigError(f"spec file not found: {path}")
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keep key case for dataset names in [reference]
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}")
    if "global" not in cp:
        raise ConfigError(f"{path}: missing [global] section")
    g = cp["global"]
    paths = _split_list(g.get("datasets", ""))
    if not paths:
        raise ConfigError(f"{path}: [global] datasets must list at least one file")
    missing = [p for p in paths if not os.path.exists(p)]
    if missing:
        raise ConfigError(f"{path}: dataset file not found: {missing[0]}")
    datasets = [load_csv(p) for p in paths]

    train = TrainConfig(
        learning_rate=g.getfloat("learning_rate", 1e-3),
        batch_size=g.getint("batch_size", 32),
        epochs=g.getint("epochs", 100),
    )
    n_folds = g.getint("n_folds", 3)
    n_seeds = g.getint("n_seeds", 5)
    base_seed = g.getint("base_seed", 0)
    alpha = g.getfloat("alpha", 0.10)

    grids = []
    for section in cp.sections():
        if not section.startswith("study "):
            continue
        name = section.split(" ", 1)[1].strip()
        sec = cp[section]
        kind = sec.get("kind", "baselines")
        if kind == "sweep":
            fractions = _floats(sec.get("fractions", "0.05, 0.10, 0.20, 1.0"), f"[{section}] fractions")
            for f in fractions:
                if not 0.0 < f <= 1.0:
                    raise ConfigError(f"[{section}]: labeled fraction must lie in (0, 1], got {f}")
            rates = [round(1.0 - f, 9) for f in fractions]
            entries = [AlgorithmEntry("supervised")]
            include_oracle = sec.getboolean("include_oracle", False)
        else:
            algorithms = _split_list(sec.get("algorithms", ""))
            for a in algorithms:
                if a not in SSL_NAMES + ("supervised",):
                    raise ConfigError(f"[{section}]: unknown algorithm {a!r}")
            if not algorithms:
                raise ConfigError(f"[{section}]: empty algorithm list")
            rates = _floats(sec.get("rates", "0.95, 0.90, 0.80"), f"[{section}] rates")
            entries = _study_entries(kind, sec, algorithms)
            include_oracle = sec.getboolean("include_oracle", kind == "baselines")
        grids.append(ExperimentGrid(
            datasets=datasets,
            algorithms=entries,
            unlabeled_rates=rates,
            n_folds=n_folds,
            n_seeds=n_seeds,
            base_seed=base_seed,
            train=train,
            study=name,
            include_oracle=include_oracle,
        ))
    if not grids:
        raise ConfigError(f"{path}: no [study ...] sections")

    reference = {}
    if "reference" in cp:
        for key, raw in cp["reference"].items():
            try:
                where, row = key.split("/", 1)
                ds_name, rate = where.split("@", 1)
                reference[(ds_name.strip(), float(rate), row.strip())] = float(raw)
            except ValueError:
                raise ConfigError(f"{path}: [reference] key {key!r} must look like 'news@0.90/TTWD'")

    return ExperimentSpec(
        dataset_paths=paths,
        grids=grids,
        out_dir=g.get("out_dir", None),
        alpha=alpha,
        reference=reference,
    )
