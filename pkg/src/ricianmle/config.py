"""Run configuration: flat JSON files overridden by command-line flags."""

from __future__ import annotations

import json
import math
import os
import re
from dataclasses import asdict, dataclass, fields

from .model import CaseId, SystemParams

SEED_ENV = "RICIANMLE_SEED"


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def parse_omega(value) -> float:
    """Accept 'pi', '0.5pi', '0.5*pi', 'pi/4' or a number meaning a multiple of pi."""
    if isinstance(value, (int, float)):
        return float(value) * math.pi
    s = str(value).strip().lower().replace(" ", "").replace("π", "pi")
    m = re.fullmatch(r"([0-9]*\.?[0-9]*(?:e[+-]?[0-9]+)?)\*?pi(?:/([0-9]*\.?[0-9]+))?", s)
    if m:
        coef = float(m.group(1)) if m.group(1) else 1.0
        div = float(m.group(2)) if m.group(2) else 1.0
        return coef * math.pi / div
    try:
        return float(s) * math.pi
    except ValueError:
        raise ConfigError("Omega", f"cannot parse {value!r} as a multiple of pi") from None


@dataclass
class RunConfig:
    case: CaseId = CaseId.SYNC
    N: int = 1000
    M: int = 48
    L: int = 60
    D: int = 4
    Omega: float = math.pi
    Q: int = 128
    noise_var: float = 2.0
    active_prob: float = 0.08
    g: float = 1.0
    kappa_db: float | None = -10.0
    kappa_linear: float | None = None
    n_trials: int = 100
    master_seed: int = 0
    strategy: str = "auto"
    epsilon: float = 1e-7
    max_iters: int = 1000
    threads: int = 1
    csv_path: str | None = None
    json_path: str | None = None

    @property
    def kappa(self) -> float:
        if self.kappa_linear is not None:
            return float(self.kappa_linear)
        return 10.0 ** (self.kappa_db / 10.0)

    def system_params(self) -> SystemParams:
        return SystemParams(self.case, self.N, self.M, self.L, self.D, self.Omega, self.Q,
                            self.noise_var, self.active_prob)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["case"] = self.case.value
        d["Omega"] = f"{self.Omega / math.pi:.12g}pi"
        return d


_FIELDS = {f.name for f in fields(RunConfig)}
_INT = {"N", "M", "L", "D", "Q", "n_trials", "master_seed", "max_iters", "threads"}
_FLOAT = {"noise_var", "active_prob", "g", "kappa_db", "kappa_linear", "epsilon"}


def parse_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a validated config from an optional JSON file plus flag overrides.

    Keys left unset take the defaults of the evaluation protocol; D and Omega
    default to zero for cases without the corresponding offset.
    """
    raw: dict = {}
    if path is not None:
        with open(path) as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ConfigError("<file>", "config must be a flat JSON object")
        raw.update(loaded)
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    for key in raw:
        if key not in _FIELDS:
            raise ConfigError(key, "unknown key")

    try:
        case = CaseId.parse(raw.get("case", "sync"))
    except ValueError as exc:
        raise ConfigError("case", str(exc)) from None
    kw = {"case": case}
    for key, val in raw.items():
        if key == "case":
            continue
        try:
            if key in _INT:
                if isinstance(val, float) and not val.is_integer():
                    raise ValueError
                kw[key] = int(val)
            elif key in _FLOAT:
                kw[key] = float(val)
            elif key == "Omega":
                kw[key] = parse_omega(val)
            else:
                kw[key] = None if val is None else str(val)
        except (TypeError, ValueError):
            raise ConfigError(key, f"invalid value {val!r}") from None

    if "kappa_db" in raw and "kappa_linear" in raw:
        raise ConfigError("kappa_linear", "set only one of kappa_db and kappa_linear")
    if "kappa_linear" in raw:
        kw["kappa_db"] = None
    if "D" not in raw:
        kw["D"] = 4 if case.has_sto else 0
    if "Omega" not in raw:
        kw["Omega"] = math.pi if case.has_cfo else 0.0
    if "master_seed" not in raw and os.environ.get(SEED_ENV):
        try:
            kw["master_seed"] = int(os.environ[SEED_ENV])
        except ValueError:
            raise ConfigError("master_seed", f"{SEED_ENV} is not an integer") from None
    cfg = RunConfig(**kw)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    for name in ("N", "M", "L", "Q", "n_trials", "max_iters", "threads"):
        if getattr(cfg, name) < 1:
            raise ConfigError(name, "must be a positive integer")
    if cfg.D < 0:
        raise ConfigError("D", "must be non-negative")
    if cfg.master_seed < 0:
        raise ConfigError("master_seed", "must be non-negative")
    if not 0.0 <= cfg.Omega <= math.pi + 1e-12:
        raise ConfigError("Omega", "must lie in [0, pi]")
    if cfg.noise_var <= 0:
        raise ConfigError("noise_var", "must be positive")
    if not 0.0 < cfg.active_prob < 1.0:
        raise ConfigError("active_prob", "must lie in (0, 1)")
    if cfg.g <= 0:
        raise ConfigError("g", "must be positive")
    if cfg.kappa_linear is not None and cfg.kappa_linear < 0:
        raise ConfigError("kappa_linear", "must be non-negative")
    if cfg.epsilon <= 0:
        raise ConfigError("epsilon", "must be positive")
    if cfg.strategy not in ("direct", "fft", "auto"):
        raise ConfigError("strategy", "must be one of direct, fft, auto")
    if cfg.case.has_cfo and cfg.Omega <= 0:
        raise ConfigError("Omega", f"case {cfg.case.value} needs Omega > 0")
    if not cfg.case.has_cfo and cfg.Omega != 0:
        raise ConfigError("Omega", f"case {cfg.case.value} has no frequency offset")
    if not cfg.case.has_sto and cfg.D != 0:
        raise ConfigError("D", f"case {cfg.case.value} has no time offset")
    if cfg.case is CaseId.SYNC and cfg.strategy == "fft":
        raise ConfigError("strategy", "the FFT strategy needs an asynchronous case")
