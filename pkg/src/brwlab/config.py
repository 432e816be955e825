"""Experiment configuration: a flat ``key = value`` text format.

Blank lines and lines starting with ``#`` are ignored.  Sites are written
``x,y``; lists of sites are separated by ``;``; an ordered pair of sites is
written ``x,y <= x',y'``.  Unknown keys are rejected.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace
from typing import Any

from .lattice import BoxGeometry, KernelKind
from .offspring import OffspringLaw, OffspringLawError


class ConfigError(ValueError):
    pass


Site = tuple[int, ...]


def parse_site(text: str) -> Site:
    try:
        return tuple(int(v) for v in text.strip().strip("()").split(","))
    except ValueError:
        raise ConfigError(f"bad site {text!r}") from None


def parse_sites(text: str) -> list[Site]:
    return [parse_site(p) for p in text.split(";") if p.strip()]


def parse_pairs(text: str) -> list[tuple[Site, Site]]:
    out = []
    for part in text.split(";"):
        if not part.strip():
            continue
        if "<=" not in part:
            raise ConfigError(f"pair {part!r} must be written 'x,y <= x2,y2'")
        lo, hi = part.split("<=")
        out.append((parse_site(lo), parse_site(hi)))
    return out


def parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad number list {text!r}") from None


def parse_ints(text: str) -> list[int]:
    return [int(v) for v in parse_floats(text)]


def _fmt_site(s: Site) -> str:
    return ",".join(str(v) for v in s)


@dataclass
class ExperimentConfig:
    law: list[float] = field(default_factory=lambda: [0.5, 0.0, 0.5])
    survival: float = 0.0
    kernel: str = "strict"
    d: int = 2
    n: int = 3
    horizon: int | None = None
    cap: int = 1_000_000
    replicas: int = 10_000
    seed: int = 20240601
    start: Site = (0, 0)
    kind: str = "axis1"
    mode: str = "hitting"
    steps: int = 50
    check_every: int = 1
    probes: list[Site] = field(default_factory=list)
    pairs: list[tuple[Site, Site]] = field(default_factory=list)
    t: float = 1.0
    lam: float = 0.2
    ladder: list[int] = field(default_factory=lambda: [20, 40, 80])
    gamma_replicas: int = 0
    cdf_times: list[int] = field(default_factory=lambda: [1, 5, 20])
    t_max: int = 200
    record_at: int = 3
    reruns: int = 1
    alpha: float = 0.01
    eps: float = 1e-12
    max_iter: int = 1_000_000
    tol: float = 1e-10
    workers: int = 0
    out_dir: str = "out"

    @property
    def resolved_horizon(self) -> int:
        return self.horizon if self.horizon is not None else 10 * self.n * self.n

    @property
    def resolved_workers(self) -> int:
        return self.workers if self.workers > 0 else (os.cpu_count() or 1)

    def offspring_law(self) -> OffspringLaw:
        try:
            return OffspringLaw(tuple(self.law), self.survival)
        except OffspringLawError as exc:
            raise ConfigError(str(exc)) from None

    def kernel_kind(self) -> KernelKind:
        try:
            return KernelKind(self.kernel)
        except ValueError:
            raise ConfigError(f"unknown kernel {self.kernel!r}") from None

    def box(self) -> BoxGeometry:
        try:
            return BoxGeometry(self.d, self.n)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def validate(self) -> "ExperimentConfig":
        self.offspring_law()
        self.kernel_kind()
        self.box()
        if self.replicas < 1:
            raise ConfigError("replicas must be >= 1")
        if self.reruns < 0:
            raise ConfigError("reruns must be >= 0")
        if self.cap < 1:
            raise ConfigError("cap must be >= 1")
        if self.mode not in ("hitting", "free", "marginal"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.kind not in ("axis1", "diag", "axis2"):
            raise ConfigError(f"unknown coupling kind {self.kind!r}")
        for s in [self.start, *self.probes, *(p for pair in self.pairs for p in pair)]:
            if len(s) != self.d:
                raise ConfigError(f"site {s} does not have dimension {self.d}")
        return self

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "start":
                v = _fmt_site(v)
            elif f.name == "probes":
                v = ";".join(_fmt_site(s) for s in v)
            elif f.name == "pairs":
                v = ";".join(f"{_fmt_site(a)}<={_fmt_site(b)}" for a, b in v)
            out[f.name] = v
        out["resolved_horizon"] = self.resolved_horizon
        return out

    def report_dict(self) -> dict[str, Any]:
        """Config as embedded in reports: execution-only settings are left out
        so that output bytes do not depend on the worker count or output path."""
        out = self.to_dict()
        del out["workers"], out["out_dir"]
        return out


_PARSERS = {
    "law": parse_floats,
    "survival": float,
    "kernel": str,
    "d": int,
    "n": int,
    "horizon": int,
    "cap": int,
    "replicas": int,
    "seed": int,
    "start": parse_site,
    "kind": str,
    "mode": str,
    "steps": int,
    "check_every": int,
    "probes": parse_sites,
    "pairs": parse_pairs,
    "t": float,
    "lam": float,
    "ladder": parse_ints,
    "gamma_replicas": int,
    "cdf_times": parse_ints,
    "t_max": int,
    "record_at": int,
    "reruns": int,
    "alpha": float,
    "eps": float,
    "max_iter": int,
    "tol": float,
    "workers": int,
    "out_dir": str,
}


def parse_value(key: str, raw: str):
    if key not in _PARSERS:
        raise ConfigError(f"unknown key {key!r}")
    try:
        return _PARSERS[key](raw.strip())
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def parse_text(text: str) -> dict[str, Any]:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line or line.index("=") == 0:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        # pair lists contain '<=', so only the first '=' separates the key
        key, raw = line.split("=", 1)
        key = key.strip()
        values[key] = parse_value(key, raw)
    return values


def load_config(path: str | None = None, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    values = {}
    if path:
        try:
            with open(path) as fh:
                values.update(parse_text(fh.read()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = v
    return replace(ExperimentConfig(), **values).validate()
