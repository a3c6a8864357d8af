"""Flat ``key = value`` experiment configs.

Grammar: one assignment per line, dotted keys, ``#`` starts a comment,
blank lines ignored.  Lists are comma separated.  Unknown keys and
duplicate keys are errors.  ``ExperimentConfig.to_text`` writes every key,
so parse(to_text(c)) == c.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .approx import KINDS as FAMILY_KINDS
from .space import SpaceParams


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _ints(text: str) -> tuple:
    return tuple(int(t) for t in text.split(",") if t.strip())


@dataclass(frozen=True)
class ExperimentConfig:
    alpha: float = 0.0
    symbol: str = "sector"
    n: int = 32
    fourier_cap: int | None = None  # default 2N
    radial_cap: int | None = None  # default N
    oversample: float = 1.0
    operator: str = "hankel"
    family_kind: str = "mollified-truncation"
    family_m: int = 6
    r0: float = 0.5
    ratio: float = 0.5
    eps_factor: float = 0.5
    mollifier_resolution: tuple = (12, 24)
    radii: tuple = (0.9, 0.95, 0.99, 0.995)
    caps: tuple = ()  # default N/4, N/2, 3N/4
    angles: int = 16
    sot_m: int = 8
    sweep_m: tuple = (2, 4, 6)
    sweep_n: tuple = ()  # default (N,)
    max_iters: int = 400
    tol: float = 1e-7
    output_dir: str = "runs"
    seed: int = 0

    # -- derived -------------------------------------------------------------

    def space(self, n: int | None = None) -> SpaceParams:
        n = self.n if n is None else n
        scale = n / self.n
        fc = 2 * n if self.fourier_cap is None else max(n, round(self.fourier_cap * scale))
        rc = n if self.radial_cap is None else max(1, round(self.radial_cap * scale))
        return SpaceParams(self.alpha, n, fc, rc)

    def estimator_caps(self, n: int | None = None) -> list:
        n = self.n if n is None else n
        if self.caps:
            return [k for k in self.caps if k < n]
        return sorted({max(n // 4, 1), max(n // 2, 1), max(3 * n // 4, 1)})

    def sweep_sizes(self) -> list:
        return list(self.sweep_n) if self.sweep_n else [self.n]

    def validate(self) -> "ExperimentConfig":
        err = []
        if not self.alpha > -1:
            err.append(f"alpha must exceed -1, got {self.alpha}")
        if self.n < 1:
            err.append("space.n must be positive")
        if self.fourier_cap is not None and self.fourier_cap < self.n:
            err.append("space.fourier_cap must be >= space.n")
        if self.radial_cap is not None and self.radial_cap < 1:
            err.append("space.radial_cap must be positive")
        if not self.oversample >= 1:
            err.append("quad.oversample must be >= 1")
        if self.operator not in ("hankel", "toeplitz"):
            err.append("operator.kind must be hankel or toeplitz")
        if self.family_kind not in FAMILY_KINDS:
            err.append(f"family.kind must be one of {FAMILY_KINDS}")
        if self.family_m < 1 or self.sot_m < 1:
            err.append("family sizes must be positive")
        if not 0 < self.r0 < 1:
            err.append("schedule.r0 must lie in (0, 1)")
        if not 0 < self.ratio < 1:
            err.append("schedule.ratio must lie in (0, 1)")
        if not 0 < self.eps_factor < 1:
            err.append("schedule.eps_factor must lie in (0, 1)")
        if any(k < 1 for k in self.mollifier_resolution) or len(self.mollifier_resolution) != 2:
            err.append("mollifier.resolution needs two positive integers")
        if not self.radii or any(not 0 <= r < 1 for r in self.radii) or list(self.radii) != sorted(self.radii):
            err.append("estimator.radii must be increasing in [0, 1)")
        if any(not 0 <= k < self.n for k in self.caps):
            err.append("estimator.caps must satisfy 0 <= K < N")
        if self.angles < 1:
            err.append("estimator.angles must be positive")
        if any(m < 1 or m > self.family_m for m in self.sweep_m):
            err.append("sweep.M entries must lie in [1, family.M]")
        if any(k < 1 for k in self.sweep_n):
            err.append("sweep.N entries must be positive")
        if self.max_iters < 1 or not self.tol > 0:
            err.append("search.max_iters and search.tol must be positive")
        if self.seed < 0 or self.seed >= 2**64:
            err.append("seed must be a 64-bit unsigned integer")
        if err:
            raise ConfigError("; ".join(err))
        return self

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw).validate()

    # -- text form -----------------------------------------------------------

    def to_text(self) -> str:
        lines = []
        for key, (attr, _, fmt) in KEYS.items():
            value = getattr(self, attr)
            if value is None:
                continue
            lines.append(f"{key} = {fmt(value)}")
        return "\n".join(lines) + "\n"


def _fmt_list(v) -> str:
    return ", ".join(repr(x) for x in v)


# key -> (attribute, parser, formatter)
KEYS = {
    "alpha": ("alpha", float, repr),
    "symbol": ("symbol", str.strip, str),
    "space.n": ("n", int, str),
    "space.fourier_cap": ("fourier_cap", int, str),
    "space.radial_cap": ("radial_cap", int, str),
    "quad.oversample": ("oversample", float, repr),
    "operator.kind": ("operator", str.strip, str),
    "family.kind": ("family_kind", str.strip, str),
    "family.M": ("family_m", int, str),
    "schedule.r0": ("r0", float, repr),
    "schedule.ratio": ("ratio", float, repr),
    "schedule.eps_factor": ("eps_factor", float, repr),
    "mollifier.resolution": ("mollifier_resolution", _ints, _fmt_list),
    "estimator.radii": ("radii", _floats, _fmt_list),
    "estimator.caps": ("caps", _ints, _fmt_list),
    "estimator.angles": ("angles", int, str),
    "sot.M": ("sot_m", int, str),
    "sweep.M": ("sweep_m", _ints, _fmt_list),
    "sweep.N": ("sweep_n", _ints, _fmt_list),
    "search.max_iters": ("max_iters", int, str),
    "search.tol": ("tol", float, repr),
    "output.dir": ("output_dir", str.strip, str),
    "seed": ("seed", int, str),
}


def parse_config(text: str) -> ExperimentConfig:
    values = {}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        attr, parser, _ = KEYS[key]
        try:
            values[attr] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return ExperimentConfig(**values).validate()


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text)
