"""Flat key = value run configuration.

The format is line oriented with dotted section prefixes, e.g.::

    problem.dimension = 1
    problem.extent = 0,1
    problem.p.kind = affine
    problem.p.params = 2,1
    problem.lambda = auto:0.5

Unknown keys are rejected with their line number, so typos fail loudly.
Serialization round-trips: parse(serialize(cfg)) == cfg.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .errors import ConfigError

_DEFAULT_SCAN_GRID = (
    1e-06, 3.1623e-06, 1e-05, 3.1623e-05, 1e-04, 3.1623e-04, 1e-03,
    3.1623e-03, 1e-02, 3.1623e-02, 1e-01, 3.1623e-01, 1.0, 3.1623, 10.0,
    31.623, 100.0,
)


@dataclass(frozen=True)
class FieldBlock:
    kind: str = "constant"
    params: tuple = (1.0,)


@dataclass(frozen=True)
class ProblemBlock:
    dimension: int = 1
    extent: tuple = (0.0, 1.0)
    resolution: int = 64
    p: FieldBlock = FieldBlock("constant", (2.0,))
    q: FieldBlock = FieldBlock("constant", (4.0,))
    delta: FieldBlock = FieldBlock("constant", (0.5,))
    a: FieldBlock = FieldBlock("bump", (0.25, 0.75, 1.0))
    b: FieldBlock = FieldBlock("bump", (0.25, 0.75, 1.0))
    lam: float | None = None        # explicit value, or None when auto
    lam_fraction: float = 0.5       # fraction of lambda0 in auto mode


@dataclass(frozen=True)
class SolverBlock:
    max_iters: int = 40000
    step0: float = 1.0
    armijo_c: float = 1e-4
    shrink: float = 0.5
    grad_floor: float = 1e-8
    energy_tol: float = 1e-12
    residual_tol: float = 1e-6
    seed: int = 0


@dataclass(frozen=True)
class ScanBlock:
    lambda_grid: tuple = _DEFAULT_SCAN_GRID
    directions: int = 32
    seed: int = 0


@dataclass(frozen=True)
class OutputBlock:
    dir: str = "out"
    formats: tuple = ("json", "csv")
    verbosity: int = 1


@dataclass(frozen=True)
class FiberBlock:
    t_min: float = 1e-3
    t_max: float = 1e3
    samples: int = 512
    direction: FieldBlock | None = None  # None -> sine surrogate


@dataclass(frozen=True)
class NormBlock:
    function: FieldBlock | None = None   # None -> sine surrogate


@dataclass(frozen=True)
class OracleBlock:
    cap: int = 33
    starts: int = 200


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemBlock = ProblemBlock()
    solver: SolverBlock = SolverBlock()
    scan: ScanBlock = ScanBlock()
    output: OutputBlock = OutputBlock()
    fiber: FiberBlock = FiberBlock()
    norm: NormBlock = NormBlock()
    oracle: OracleBlock = OracleBlock()


def _parse_floats(raw: str, where: str) -> tuple:
    try:
        return tuple(float(tok) for tok in raw.split(",") if tok.strip() != "")
    except ValueError:
        raise ConfigError(f"{where}: expected a comma-separated list of reals, got {raw!r}")


def _parse_int(raw: str, where: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{where}: expected an integer, got {raw!r}")


def _parse_float(raw: str, where: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{where}: expected a real number, got {raw!r}")


def parse_config(text: str) -> RunConfig:
    """Parse the flat config format into a RunConfig, reporting the offending
    line and key on failure."""
    entries: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = body.partition("=")
        key, value = key.strip(), value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = (value, lineno)

    def take(key: str):
        item = entries.pop(key, None)
        return None if item is None else item[0]

    def where(key: str) -> str:
        return key

    def field_block(prefix: str, default: FieldBlock | None) -> FieldBlock | None:
        kind = take(f"{prefix}.kind")
        params = take(f"{prefix}.params")
        if kind is None and params is None:
            return default
        if kind is None or params is None:
            raise ConfigError(f"{prefix}: both .kind and .params are required")
        return FieldBlock(kind, _parse_floats(params, f"{prefix}.params"))

    pb = ProblemBlock()
    kwargs = {}
    if (v := take("problem.dimension")) is not None:
        kwargs["dimension"] = _parse_int(v, "problem.dimension")
    if (v := take("problem.extent")) is not None:
        kwargs["extent"] = _parse_floats(v, "problem.extent")
    if (v := take("problem.resolution")) is not None:
        kwargs["resolution"] = _parse_int(v, "problem.resolution")
    lam_raw = take("problem.lambda")
    lam, lam_fraction = pb.lam, pb.lam_fraction
    if lam_raw is not None:
        if lam_raw == "auto":
            lam = None
        elif lam_raw.startswith("auto:"):
            lam = None
            lam_fraction = _parse_float(lam_raw[5:], "problem.lambda")
        else:
            lam = _parse_float(lam_raw, "problem.lambda")
    kwargs["lam"] = lam
    kwargs["lam_fraction"] = lam_fraction
    for name in ("p", "q", "delta", "a", "b"):
        kwargs[name] = field_block(f"problem.{name}", getattr(pb, name))
    problem = ProblemBlock(**kwargs)

    sb = {}
    for f in fields(SolverBlock):
        v = take(f"solver.{f.name}")
        if v is None:
            continue
        sb[f.name] = (_parse_int(v, f"solver.{f.name}")
                      if f.name in ("max_iters", "seed")
                      else _parse_float(v, f"solver.{f.name}"))
    solver = SolverBlock(**sb)

    sc = {}
    if (v := take("scan.lambda_grid")) is not None:
        sc["lambda_grid"] = _parse_floats(v, "scan.lambda_grid")
    if (v := take("scan.directions")) is not None:
        sc["directions"] = _parse_int(v, "scan.directions")
    if (v := take("scan.seed")) is not None:
        sc["seed"] = _parse_int(v, "scan.seed")
    scan = ScanBlock(**sc)

    ob = {}
    if (v := take("output.dir")) is not None:
        ob["dir"] = v
    if (v := take("output.formats")) is not None:
        fmts = tuple(tok.strip() for tok in v.split(",") if tok.strip())
        bad = [f for f in fmts if f not in ("json", "csv")]
        if bad:
            raise ConfigError(f"output.formats: unknown format {bad[0]!r}")
        ob["formats"] = fmts
    if (v := take("output.verbosity")) is not None:
        ob["verbosity"] = _parse_int(v, "output.verbosity")
    output = OutputBlock(**ob)

    fb = {}
    if (v := take("fiber.t_min")) is not None:
        fb["t_min"] = _parse_float(v, "fiber.t_min")
    if (v := take("fiber.t_max")) is not None:
        fb["t_max"] = _parse_float(v, "fiber.t_max")
    if (v := take("fiber.samples")) is not None:
        fb["samples"] = _parse_int(v, "fiber.samples")
    fb["direction"] = field_block("fiber.direction", None)
    fiber = FiberBlock(**fb)

    norm = NormBlock(function=field_block("norm.function", None))

    orc = {}
    if (v := take("oracle.cap")) is not None:
        orc["cap"] = _parse_int(v, "oracle.cap")
    if (v := take("oracle.starts")) is not None:
        orc["starts"] = _parse_int(v, "oracle.starts")
    oracle = OracleBlock(**orc)

    if entries:
        key, (_, lineno) = next(iter(entries.items()))
        raise ConfigError(f"line {lineno}: unknown key {key!r}")
    return RunConfig(problem, solver, scan, output, fiber, norm, oracle)


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(cfg: RunConfig) -> str:
    """Emit the flat text form; parse(serialize(cfg)) reproduces cfg."""
    p = cfg.problem
    lines = [
        f"problem.dimension = {p.dimension}",
        f"problem.extent = {_fmt(p.extent)}",
        f"problem.resolution = {p.resolution}",
        ("problem.lambda = " + (f"auto:{_fmt(p.lam_fraction)}" if p.lam is None
                                else _fmt(p.lam))),
    ]
    for name in ("p", "q", "delta", "a", "b"):
        blk = getattr(p, name)
        lines.append(f"problem.{name}.kind = {blk.kind}")
        lines.append(f"problem.{name}.params = {_fmt(blk.params)}")
    for f in fields(SolverBlock):
        lines.append(f"solver.{f.name} = {_fmt(getattr(cfg.solver, f.name))}")
    lines.append(f"scan.lambda_grid = {_fmt(cfg.scan.lambda_grid)}")
    lines.append(f"scan.directions = {cfg.scan.directions}")
    lines.append(f"scan.seed = {cfg.scan.seed}")
    lines.append(f"output.dir = {cfg.output.dir}")
    lines.append(f"output.formats = {_fmt(cfg.output.formats)}")
    lines.append(f"output.verbosity = {cfg.output.verbosity}")
    lines.append(f"fiber.t_min = {_fmt(cfg.fiber.t_min)}")
    lines.append(f"fiber.t_max = {_fmt(cfg.fiber.t_max)}")
    lines.append(f"fiber.samples = {cfg.fiber.samples}")
    if cfg.fiber.direction is not None:
        lines.append(f"fiber.direction.kind = {cfg.fiber.direction.kind}")
        lines.append(f"fiber.direction.params = {_fmt(cfg.fiber.direction.params)}")
    if cfg.norm.function is not None:
        lines.append(f"norm.function.kind = {cfg.norm.function.kind}")
        lines.append(f"norm.function.params = {_fmt(cfg.norm.function.params)}")
    lines.append(f"oracle.cap = {cfg.oracle.cap}")
    lines.append(f"oracle.starts = {cfg.oracle.starts}")
    return "\n".join(lines) + "\n"
