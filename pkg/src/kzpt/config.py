"""Experiment configuration: dataclasses, JSON/TOML loading, dotted overrides."""
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ConfigError, InfeasibleParameters
from .schedules import RULES
from .sensing import BERNOULLI, GAUSSIAN, HADAMARD
from .solvers import SOLVERS, SolverParams, subgaussian_step_preset

__all__ = [
    "MatrixConfig",
    "SignalConfig",
    "NoiseConfig",
    "SolverConfig",
    "ExperimentConfig",
    "load_config_dict",
    "apply_overrides",
    "config_from_dict",
    "load_config",
    "resolve_steps",
]

MATRIX_KINDS = (HADAMARD, BERNOULLI, GAUSSIAN)


@dataclass
class MatrixConfig:
    kind: str = HADAMARD
    m: int = 256
    N: int = 1024


@dataclass
class SignalConfig:
    s: list = field(default_factory=lambda: [5])


@dataclass
class NoiseConfig:
    model: str = "none"
    sigma: float = 0.0


@dataclass
class SolverConfig:
    name: str = "kziht"
    # "auto" resolves per solver, see resolve_steps
    gamma: object = "auto"
    lam: float = 1.0
    period: int = None
    epochs: int = 200
    rule: str = "reshuffle"
    divergence_threshold: float = 1e6
    target_error: float = 0.0
    fast: bool = False
    # None or "subgaussian"
    preset: str = None
    K: float = 1.0


@dataclass
class ExperimentConfig:
    matrix: MatrixConfig = field(default_factory=MatrixConfig)
    signal: SignalConfig = field(default_factory=SignalConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    trials: int = 30
    base_seed: int = 0
    success_threshold: float = 0.1
    outputs: str = None
    workers: int = 1
    long_form: bool = False
    # phase transition
    m_values: list = None
    # period sweep
    p_list: list = None
    tolerance: float = 1e-6
    C_rip: float = 1.0
    # schedule ablation
    rules: list = None
    gammas: list = None

    def to_dict(self):
        return asdict(self)

    def validate(self):
        _validate(self)
        return self


_SECTIONS = {"matrix": MatrixConfig, "signal": SignalConfig, "noise": NoiseConfig,
             "solver": SolverConfig}


def load_config_dict(path):
    """Read a JSON or TOML file (chosen by suffix) into a plain dict."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc}") from None
    try:
        if path.suffix.lower() == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:
                import tomli as tomllib
            return tomllib.loads(text)
        return json.loads(text)
    except ValueError as exc:
        raise ConfigError("<file>", f"cannot parse {path}: {exc}") from None


def _parse_value(raw):
    try:
        return json.loads(raw)
    except ValueError:
        pass
    if raw.startswith("[") and raw.endswith("]"):
        inner = raw[1:-1].strip()
        return [_parse_value(part.strip()) for part in inner.split(",")] if inner else []
    if "," in raw:
        return [_parse_value(part.strip()) for part in raw.split(",")]
    return raw


def apply_overrides(d, overrides):
    """Apply ``section.key=value`` strings to a nested dict (values parsed as JSON when possible).

    ``"signal.s=5,10"`` and ``"rules=[cyclic,replacement]"`` give lists,
    ``"solver.gamma=auto"`` a string.
    """
    d = json.loads(json.dumps(d))
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(item, "override must look like key=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        node = d
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(key, "cannot descend into a non-table value")
        node[parts[-1]] = _parse_value(raw.strip())
    return d


def _build(cls, data, prefix):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(prefix, "expected a table")
    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"{prefix}.{key}" if prefix else key, "unknown field")
    kwargs = {}
    for key, val in data.items():
        path = f"{prefix}.{key}" if prefix else key
        if cls is ExperimentConfig and key in _SECTIONS:
            kwargs[key] = _build(_SECTIONS[key], val, path)
        else:
            kwargs[key] = val
    return cls(**kwargs)


def config_from_dict(d):
    return _build(ExperimentConfig, d, "").validate()


def load_config(path=None, overrides=None):
    d = load_config_dict(path) if path else {}
    return config_from_dict(apply_overrides(d, overrides))


def _int(val, path, minimum=1):
    if isinstance(val, bool) or not isinstance(val, (int, float)) or int(val) != val:
        raise ConfigError(path, f"expected an integer, got {val!r}")
    if val < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {val}")
    return int(val)


def _num(val, path, minimum=None, positive=False):
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        raise ConfigError(path, f"expected a finite number, got {val!r}")
    if positive and not val > 0:
        raise ConfigError(path, f"must be > 0, got {val}")
    if minimum is not None and val < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {val}")
    return float(val)


def _int_list(val, path):
    if isinstance(val, (int, float)) and not isinstance(val, bool):
        val = [val]
    if not isinstance(val, list) or not val:
        raise ConfigError(path, "expected a non-empty list of integers")
    return [_int(v, f"{path}[{i}]") for i, v in enumerate(val)]


def _validate(cfg):
    mx = cfg.matrix
    if mx.kind not in MATRIX_KINDS:
        raise ConfigError("matrix.kind", f"expected one of {', '.join(MATRIX_KINDS)}, got {mx.kind!r}")
    mx.m = _int(mx.m, "matrix.m")
    mx.N = _int(mx.N, "matrix.N")
    if mx.kind == HADAMARD and mx.N & (mx.N - 1):
        raise ConfigError("matrix.N", f"Hadamard operators need a power of two, got {mx.N}")
    cfg.signal.s = _int_list(cfg.signal.s, "signal.s")
    for i, s in enumerate(cfg.signal.s):
        if s > mx.N:
            raise ConfigError(f"signal.s[{i}]", f"sparsity {s} exceeds N={mx.N}")

    nz = cfg.noise
    if nz.model not in ("none", "gaussian"):
        raise ConfigError("noise.model", f"expected 'none' or 'gaussian', got {nz.model!r}")
    nz.sigma = _num(nz.sigma, "noise.sigma", minimum=0.0)

    sv = cfg.solver
    if sv.name not in SOLVERS:
        raise ConfigError("solver.name", f"expected one of {', '.join(SOLVERS)}, got {sv.name!r}")
    if sv.rule not in RULES:
        raise ConfigError("solver.rule", f"expected one of {', '.join(RULES)}, got {sv.rule!r}")
    if sv.gamma != "auto":
        sv.gamma = _num(sv.gamma, "solver.gamma", positive=True)
    sv.lam = _num(sv.lam, "solver.lam", positive=True)
    sv.epochs = _int(sv.epochs, "solver.epochs")
    sv.divergence_threshold = _num(sv.divergence_threshold, "solver.divergence_threshold",
                                   positive=True)
    sv.target_error = _num(sv.target_error, "solver.target_error", minimum=0.0)
    sv.K = _num(sv.K, "solver.K", positive=True)
    if sv.preset not in (None, "subgaussian"):
        raise ConfigError("solver.preset", f"expected null or 'subgaussian', got {sv.preset!r}")
    if not isinstance(sv.fast, bool):
        raise ConfigError("solver.fast", "expected a boolean")

    cfg.trials = _int(cfg.trials, "trials")
    cfg.base_seed = _int(cfg.base_seed, "base_seed", minimum=0)
    cfg.workers = _int(cfg.workers, "workers")
    cfg.success_threshold = _num(cfg.success_threshold, "success_threshold", positive=True)
    cfg.tolerance = _num(cfg.tolerance, "tolerance", positive=True)
    cfg.C_rip = _num(cfg.C_rip, "C_rip", positive=True)
    if cfg.outputs is not None and not isinstance(cfg.outputs, str):
        raise ConfigError("outputs", "expected a directory path")

    ms = [mx.m] if cfg.m_values is None else _int_list(cfg.m_values, "m_values")
    if cfg.m_values is not None:
        cfg.m_values = ms
    for i, m in enumerate(ms):
        where = "matrix.m" if cfg.m_values is None else f"m_values[{i}]"
        if mx.kind == HADAMARD and m > mx.N:
            raise ConfigError(where, f"cannot subsample {m} distinct rows from N={mx.N}")
        if sv.period is not None and _int(sv.period, "solver.period") > m:
            raise ConfigError("solver.period", f"period {sv.period} exceeds m={m}")
    if sv.period is not None:
        sv.period = _int(sv.period, "solver.period")
    if cfg.p_list is not None:
        cfg.p_list = _int_list(cfg.p_list, "p_list")
        for i, p in enumerate(cfg.p_list):
            if p > mx.m:
                raise ConfigError(f"p_list[{i}]", f"period {p} exceeds m={mx.m}")
    if cfg.rules is not None:
        if not isinstance(cfg.rules, list) or not cfg.rules:
            raise ConfigError("rules", "expected a non-empty list of rule names")
        for i, r in enumerate(cfg.rules):
            if r not in RULES:
                raise ConfigError(f"rules[{i}]", f"unknown rule {r!r}")
    if cfg.gammas is not None:
        if not isinstance(cfg.gammas, list) or not cfg.gammas:
            raise ConfigError("gammas", "expected a non-empty list")
        cfg.gammas = [g if g == "auto" else _num(g, f"gammas[{i}]", positive=True)
                      for i, g in enumerate(cfg.gammas)]


def resolve_steps(solver, kind, m, N, s, period=None):
    """Turn ``gamma="auto"`` into numbers; returns ``(gamma, lam)``.

    kz: 1 (plain projections). kziht: ``N/m``. kzpt on Hadamard: ``N/p``,
    otherwise ``N/m``. ``preset="subgaussian"`` on Bernoulli/Gaussian rows
    replaces both steps by the sub-Gaussian pair.
    """
    period = solver.period if period is None else period
    if solver.preset == "subgaussian" and kind in (BERNOULLI, GAUSSIAN) and solver.name != "iht":
        try:
            pre = subgaussian_step_preset(m, N, s, solver.K)
        except InfeasibleParameters as exc:
            raise ConfigError("solver.preset", str(exc)) from None
        return pre.gamma, pre.lam
    if solver.gamma != "auto":
        return float(solver.gamma), float(solver.lam)
    if solver.name == "kz":
        return 1.0, float(solver.lam)
    if solver.name == "kzpt" and kind == HADAMARD and period is not None:
        return N / period, float(solver.lam)
    return N / m, float(solver.lam)


def solver_params(solver, kind, m, N, s, period=None):
    gamma, lam = resolve_steps(solver, kind, m, N, s, period)
    return SolverParams(
        s=s,
        gamma=gamma,
        lam=lam,
        period=solver.period if period is None else period,
        epochs=solver.epochs,
        divergence_threshold=solver.divergence_threshold,
        target_error=solver.target_error,
    )
