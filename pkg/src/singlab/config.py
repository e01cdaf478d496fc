"""Strict JSON experiment configuration.

Unknown keys are rejected at every level; validation errors carry the line
of the offending key in the source document when one exists.
"""
import json
import re
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

EXPERIMENTS = ("norms", "kernel-check", "cz", "net", "apply", "probe", "params")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridSection(_Strict):
    d: Literal[2, 3] = 2
    N: int = Field(128, ge=2)
    L: float = Field(8.0, gt=0)

    @field_validator("N")
    @classmethod
    def _pow2(cls, v):
        if v & (v - 1):
            raise ValueError("N must be a power of two")
        return v


class KernelSection(_Strict):
    field: str = "sqrt1p"
    profile: Literal["cosh"] = "cosh"


class OperatorSection(_Strict):
    epsilon_cells: float = Field(1.0, gt=0)
    rule: Literal["plain", "antisymmetrized"] = "plain"
    j_min: int | None = None
    j_max: int | None = None


class NetSection(_Strict):
    n: int = Field(8, ge=2)
    gamma: float = Field(0.25, gt=0, lt=1)


class ProbeSection(_Strict):
    epsilons: list[float] = Field(default_factory=lambda: [0.25, 0.125, 0.0625, 0.03125])
    lambda_points: int = Field(32, ge=1)
    input: Literal["spike", "gaussian"] = "spike"
    cz_exclusion: bool = False


class ParamsSection(_Strict):
    d: int = Field(2, ge=1)
    delta: float = Field(1.0, gt=0, le=1)
    gamma: float = Field(0.0, ge=0)
    iota: float = Field(0.0, ge=0)
    eps0: float = Field(0.5, ge=0)
    mu: float = Field(0.0, ge=0)
    N1: int = Field(1, ge=1)


class CZSection(_Strict):
    level_factor: float = Field(4.0, gt=0)
    enlargement: float = Field(4.0, ge=1)


class CheckSection(_Strict):
    samples: int = Field(10000, ge=1)


class NormsSection(_Strict):
    resolution: int = Field(4096, ge=8)
    q: list[float] = Field(default_factory=list)

    @field_validator("q")
    @classmethod
    def _q(cls, v):
        if any(x <= 1 for x in v):
            raise ValueError("every q must exceed 1")
        return v


class ApplySection(_Strict):
    input: str = "gaussian"


class ConfigDocument(_Strict):
    experiment: Literal[EXPERIMENTS]
    seed: int = 0
    omega_key: str = "theta1"
    kernel_key: str = "power"
    kernel: KernelSection = Field(default_factory=KernelSection)
    grid: GridSection = Field(default_factory=GridSection)
    operator: OperatorSection = Field(default_factory=OperatorSection)
    net: NetSection = Field(default_factory=NetSection)
    probe: ProbeSection = Field(default_factory=ProbeSection)
    params: ParamsSection = Field(default_factory=ParamsSection)
    cz: CZSection = Field(default_factory=CZSection)
    check: CheckSection = Field(default_factory=CheckSection)
    norms: NormsSection = Field(default_factory=NormsSection)
    apply: ApplySection = Field(default_factory=ApplySection)


class ConfigError(Exception):
    pass


def _line_of(text, key):
    if not text:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(str(key)), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _describe(err, text, source):
    msgs = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"])
        line = None
        for part in reversed(e["loc"]):
            if isinstance(part, str):
                line = _line_of(text, part)
                if line:
                    break
        where = f"{source}:{line}" if line else source
        msgs.append(f"{where}: {loc}: {e['msg']}")
    return "\n".join(msgs)


def _merge(base, extra):
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path=None, overrides=None):
    """Parse a config file (optional), apply flag overrides, validate."""
    text, source, doc = "", "<flags>", {}
    if path is not None:
        source = str(path)
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"{source}: cannot read config: {exc.strerror}") from None
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}:{exc.lineno}: invalid JSON: {exc.msg}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{source}:1: top level must be an object")
    doc = _merge(doc, overrides or {})
    try:
        return ConfigDocument.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(_describe(exc, text, source)) from None
