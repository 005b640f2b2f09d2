"""Experiment configs, result records and their CSV / JSON-lines / plot-data writers."""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .stats import Estimate

__all__ = [
    "ConfigError",
    "Param",
    "SCHEMAS",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "ResultRecord",
    "write_jsonl",
    "write_csv",
    "emit_plotdata",
]


class ConfigError(ValueError):
    pass


def _floats(v: str) -> tuple:
    return tuple(float(x) for x in v.split(",") if x.strip())


def _ints(v: str) -> tuple:
    return tuple(int(x) for x in v.split(",") if x.strip())


@dataclass(frozen=True)
class Param:
    kind: type | object  # int, float, str, bool or a list parser
    default: object
    check: object = None  # callable -> bool
    semantic: bool = True  # False for output plumbing (not hashed)
    choices: tuple | None = None

    def parse(self, key: str, raw):
        try:
            if self.kind is bool:
                val = raw if isinstance(raw, bool) else str(raw).strip().lower() in ("1", "true", "yes", "on")
            elif self.kind in (_floats, _ints):
                val = self.kind(raw) if isinstance(raw, str) else tuple(raw)
            else:
                val = self.kind(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: cannot parse {raw!r} ({exc})") from None
        if self.choices is not None and val not in self.choices:
            raise ConfigError(f"{key}: {val!r} not in {self.choices}")
        if self.check is not None and not self.check(val):
            raise ConfigError(f"{key}: value {val!r} out of range")
        return val


_pos = lambda v: v > 0  # noqa: E731
_nonneg = lambda v: v >= 0  # noqa: E731

_COMMON = {
    "seed": Param(int, 0, _nonneg),
    "out": Param(str, "results", semantic=False),
    "id": Param(str, "", semantic=False),
}

_LATTICE = {
    "L": Param(int, 16, lambda v: v >= 2),
    "dim": Param(int, 1, lambda v: 1 <= v <= 3),
    "right": Param(float, 1.0, _nonneg),
    "left": Param(float, 1.0, _nonneg),
}

SCHEMAS = {
    "verify": {"reps": Param(int, 2000, _pos), "quick": Param(bool, True)},
    "contact": {
        **_LATTICE,
        "task": Param(str, "growth", choices=("growth", "duality", "char", "typical", "size")),
        "delta": Param(float, 1.0, _nonneg),
        "lam": Param(float, 0.3, _pos),
        "t_grid": Param(_floats, (5.0, 10.0, 15.0, 20.0), lambda v: len(v) >= 1 and min(v) > 0),
        "A": Param(_ints, (0,)),
        "Delta": Param(_ints, (-1, 0, 1)),
        "reps": Param(int, 500, _pos),
    },
    "braco": {
        **_LATTICE,
        "task": Param(str, "moments", choices=("moments", "maxbound", "homconv")),
        "b": Param(float, 1.0, _nonneg),
        "c": Param(float, 1.0, _nonneg),
        "d": Param(float, 1.0, _nonneg),
        "x0": Param(_ints, (1,), lambda v: min(v) >= 0),
        "t_grid": Param(_floats, (0.5, 1.0, 2.0), lambda v: len(v) >= 1 and min(v) > 0),
        "cap": Param(int, 1000, _pos),
        "reps": Param(int, 2000, _pos),
    },
    "resem": {
        **_LATTICE,
        "task": Param(str, "moments", choices=("moments", "trend")),
        "b": Param(float, 1.0, _nonneg),
        "c": Param(float, 1.0, _nonneg),
        "d": Param(float, 0.0, _nonneg),
        "phi0": Param(_floats, (0.5,), lambda v: min(v) >= 0 and max(v) <= 1),
        "t_grid": Param(_floats, (0.5, 1.0, 2.0), lambda v: len(v) >= 1 and min(v) > 0),
        "dt": Param(float, 1e-3, _pos),
        "reps": Param(int, 2000, _pos),
    },
    "dualitytest": {
        **_LATTICE,
        "which": Param(str, "a", choices=("a", "oracle", "selfdual", "poisson")),
        "b": Param(float, 1.0, _nonneg),
        "c": Param(float, 1.0, _nonneg),
        "d": Param(float, 0.5, _nonneg),
        "x": Param(_ints, (1,), lambda v: min(v) >= 0),
        "phi": Param(_floats, (0.5,), lambda v: min(v) >= 0 and max(v) <= 1),
        "psi": Param(_floats, (0.3,), lambda v: min(v) >= 0 and max(v) <= 1),
        "t": Param(float, 1.0, _pos),
        "dt": Param(float, 1e-3, _pos),
        "reps": Param(int, 10000, _pos),
    },
    "renorm": {
        "p0": Param(str, "x", choices=("x", "h00", "h01", "h11", "const")),
        "r": Param(float, 0.5, _nonneg),
        "gamma": Param(float, 1.0, _pos),
        "n": Param(int, 3, _pos),
        "mc": Param(int, 4000, _pos),
        "m": Param(int, 40, lambda v: v >= 2),
        "method": Param(str, "integral", choices=("integral", "weighted")),
    },
    "flow": {
        "case": Param(int, 1, choices=(1, 2, 4)),
        "m": Param(int, 40, lambda v: v >= 2),
        "t_end": Param(float, 15.0, _pos),
        "snapshots": Param(_floats, (), lambda v: all(t >= 0 for t in v)),
        "scale1": Param(float, 2.0, _pos),
        "scale2": Param(float, 0.5, _pos),
    },
    "pstar": {
        "alpha": Param(float, 1.0, _pos),
        "class": Param(str, "01", choices=("00", "01", "10", "11")),
        "m": Param(int, 40, lambda v: v >= 2),
    },
    "cauchy": {
        "alpha": Param(float, 1.0, _pos),
        "f": Param(str, "x", choices=("x", "1-x", "bump", "zero", "const", "x3", "corner0")),
        "r": Param(float, 0.5, _nonneg),
        "t_end": Param(float, 40.0, _pos),
        "m": Param(int, 40, lambda v: v >= 2),
        "snapshots": Param(_floats, (), lambda v: all(t >= 0 for t in v)),
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    subcommand: str
    params: dict

    def __getitem__(self, key):
        return self.params[key]

    def semantic_items(self) -> list[tuple[str, str]]:
        schema = {**_COMMON, **SCHEMAS[self.subcommand]}
        return sorted((k, repr(v)) for k, v in self.params.items() if schema[k].semantic)

    @property
    def hash(self) -> str:
        """sha1 over the subcommand and the semantic key/value pairs."""
        text = self.subcommand + "\n" + "\n".join(f"{k}={v}" for k, v in self.semantic_items())
        return hashlib.sha1(text.encode()).hexdigest()

    @property
    def experiment_id(self) -> str:
        return self.params.get("id") or f"{self.subcommand}-{self.hash[:10]}"


def parse_config(subcommand: str, pairs: dict | None = None) -> ExperimentConfig:
    """Validate key/value pairs against the subcommand's schema; unknown keys are errors."""
    if subcommand not in SCHEMAS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    schema = {**_COMMON, **SCHEMAS[subcommand]}
    pairs = dict(pairs or {})
    unknown = sorted(set(pairs) - set(schema))
    if unknown:
        raise ConfigError(f"unknown key(s) for {subcommand}: {', '.join(unknown)}")
    params = {}
    for key, spec in schema.items():
        params[key] = spec.parse(key, pairs[key]) if key in pairs else spec.default
    return ExperimentConfig(subcommand, params)


def read_pairs(text: str) -> dict:
    """key=value lines; '#' starts a comment; blank lines are skipped."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key=value, got {line!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        if not k:
            raise ConfigError(f"line {n}: empty key")
        if k in out:
            raise ConfigError(f"line {n}: duplicate key {k!r}")
        out[k] = v
    return out


def load_config(subcommand: str, path=None, overrides: dict | None = None) -> ExperimentConfig:
    pairs = read_pairs(Path(path).read_text()) if path else {}
    pairs.update(overrides or {})
    return parse_config(subcommand, pairs)


def _stat(v) -> dict:
    if isinstance(v, Estimate):
        return {"value": float(v.value), "se": "exact" if v.exact else float(v.se)}
    if isinstance(v, dict):
        return v
    return {"value": float(v), "se": "exact"}


@dataclass
class ResultRecord:
    """Named statistics (each with an SE or the tag "exact"), verdicts and optional grid data."""

    experiment_id: str
    config_hash: str
    stats: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    wall_time: float = 0.0
    grids: dict = field(default_factory=dict)  # name -> (column names, 2-D array)
    batch: int = 0

    def add(self, name: str, value) -> None:
        self.stats[name] = _stat(value)

    def verdict(self, name: str, ok) -> bool:
        self.verdicts[name] = bool(ok)
        return bool(ok)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def to_json(self) -> str:
        d = {"experiment_id": self.experiment_id, "config_hash": self.config_hash, "batch": self.batch,
             "stats": self.stats, "verdicts": self.verdicts, "passed": self.passed,
             "wall_time": round(self.wall_time, 3)}
        return json.dumps(d, sort_keys=True)


def write_jsonl(record: ResultRecord, path) -> None:
    """Append one record and flush, so an abort loses at most the batch in flight."""
    with open(path, "a") as fh:
        fh.write(record.to_json() + "\n")
        fh.flush()


def write_csv(records, path) -> None:
    """RFC-4180 CSV with header: experiment_id, config_hash, kind, name, value, se."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["experiment_id", "config_hash", "kind", "name", "value", "se"])
        for rec in records:
            for name, st in rec.stats.items():
                w.writerow([rec.experiment_id, rec.config_hash, "stat", name, repr(st["value"]), st["se"]
                            if st["se"] == "exact" else repr(st["se"])])
            for name, ok in rec.verdicts.items():
                w.writerow([rec.experiment_id, rec.config_hash, "verdict", name, "pass" if ok else "fail", ""])


def write_grid_csv(columns, data, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(columns)
        for row in np.asarray(data):
            w.writerow([repr(float(v)) for v in row])


def emit_plotdata(record: ResultRecord, kind: str, out_dir) -> list[Path]:
    """Whitespace-separated column files for plotting tools.

    ``kind="grid"`` writes every grid in the record (e.g. x p, or x y w11 w22);
    ``kind="duality"`` writes a (name lhs rhs z) table from stats named
    ``<name>.lhs``, ``<name>.rhs``, ``<name>.z``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    if kind == "grid":
        if not record.grids:
            raise ValueError("record carries no grid data")
        for name, (cols, data) in record.grids.items():
            p = out_dir / f"{record.experiment_id}.{name}.dat"
            np.savetxt(p, np.asarray(data, dtype=float), fmt="%.10g", header=" ".join(cols))
            paths.append(p)
        return paths
    if kind == "duality":
        names = sorted({k.rsplit(".", 1)[0] for k in record.stats if k.endswith(".lhs")})
        if not names:
            raise ValueError("record carries no duality statistics")
        p = out_dir / f"{record.experiment_id}.duality.dat"
        with open(p, "w") as fh:
            fh.write("# name lhs rhs z\n")
            for n in names:
                fh.write(f"{n} {record.stats[n + '.lhs']['value']:.10g} {record.stats[n + '.rhs']['value']:.10g} "
                         f"{record.stats[n + '.z']['value']:.6g}\n")
        return [p]
    raise ValueError(f"unknown plot-data kind {kind!r}")


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
