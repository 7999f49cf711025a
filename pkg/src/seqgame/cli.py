"""Command-line orchestration: config parsing, solving, sweeps, ingestion.

The configuration format is flat `key = value` lines with `#` comments and
comma-separated lists. Exit codes: 0 success, 2 malformed configuration,
3 infeasible or degenerate problem, 4 I/O or data-format failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .divopt import SolverOptions
from .equilibrium import EquilibriumSolution, GameSpec, solve_aware_equilibrium
from .errors import (
    ConfigError,
    ConstructionError,
    DegenerateGameError,
    DomainError,
    EmptyDataError,
    FormatError,
    InfeasibleError,
    SeqGameError,
    ShapeError,
)
from .prob import Channel, Distribution, DistortionMeasure
from .simharness import ScenarioConfig, monte_carlo

__all__ = [
    "RunConfig",
    "parse_run_config",
    "dump_run_config",
    "build_game_spec",
    "build_scenario",
    "ingest_histogram",
    "solution_csv",
    "main",
]

_MEASURES = {"tv_l1": DistortionMeasure.TV_L1, "kl": DistortionMeasure.KL}


@dataclass(frozen=True)
class RunConfig:
    """Parsed configuration; optional fields stay None until required."""

    hypotheses: tuple[tuple[float, ...], ...]
    delta: float
    measure: str
    weights: tuple[float, ...] | None = None
    support_floor: float = 1e-9
    zeta: float = 0.85
    alpha_grid: tuple[float, ...] | None = None
    replications: int | None = None
    seed: int | None = None
    cap: int = 1_000_000
    stride: int = 1
    true_hypothesis: int | None = None
    adversary: str = "equilibrium"
    channel: tuple[float, ...] | None = None
    channels: tuple[tuple[float, ...], ...] | None = None
    solver_tolerance: float | None = None
    solver_max_iterations: int | None = None


def _parse_float(key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"key {key!r}: expected a number, got {raw!r}") from None


def _parse_int(key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"key {key!r}: expected an integer, got {raw!r}") from None


def _parse_float_list(key: str, raw: str) -> tuple[float, ...]:
    parts = [p.strip() for p in raw.split(",")]
    if any(not p for p in parts):
        raise ConfigError(f"key {key!r}: empty entry in list {raw!r}")
    return tuple(_parse_float(key, p) for p in parts)


def _indexed_keys(pairs: dict[str, str], stem: str) -> list[str]:
    """Keys stem_0..stem_{m-1}; indices must start at 0 and be contiguous."""
    found = {}
    for key in pairs:
        if key.startswith(stem + "_"):
            suffix = key[len(stem) + 1:]
            if suffix.isdigit():
                found[int(suffix)] = key
    if not found:
        return []
    if sorted(found) != list(range(len(found))):
        raise ConfigError(f"{stem} indices must run 0..{len(found) - 1} without gaps")
    return [found[i] for i in range(len(found))]


def parse_run_config(text: str) -> RunConfig:
    pairs: dict[str, str] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw_line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value

    hyp_keys = _indexed_keys(pairs, "hypothesis")
    if len(hyp_keys) < 2:
        raise ConfigError("need hypothesis_0, hypothesis_1, ... (at least two)")
    chan_keys = _indexed_keys(pairs, "channel")
    known = set(hyp_keys) | set(chan_keys) | {
        "delta", "measure", "weights", "support_floor", "zeta", "alpha_grid",
        "replications", "seed", "cap", "stride", "true_hypothesis", "adversary",
        "channel", "solver_tolerance", "solver_max_iterations",
    }
    unknown = sorted(set(pairs) - known)
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")
    for required in ("delta", "measure"):
        if required not in pairs:
            raise ConfigError(f"missing required key {required!r}")

    measure = pairs["measure"]
    if measure not in _MEASURES:
        raise ConfigError(
            f"measure must be one of {sorted(_MEASURES)}, got {measure!r}"
        )
    adversary = pairs.get("adversary", "equilibrium")
    if adversary not in ("equilibrium", "channels"):
        raise ConfigError(f"adversary must be 'equilibrium' or 'channels', got {adversary!r}")
    has_common = "channel" in pairs
    if adversary == "channels":
        if has_common == bool(chan_keys):
            raise ConfigError(
                "adversary = channels needs either 'channel' or 'channel_<i>' keys, not both"
            )
    elif has_common or chan_keys:
        raise ConfigError("channel keys require adversary = channels")

    def opt(key, fn):
        return fn(key, pairs[key]) if key in pairs else None

    return RunConfig(
        hypotheses=tuple(_parse_float_list(k, pairs[k]) for k in hyp_keys),
        delta=_parse_float("delta", pairs["delta"]),
        measure=measure,
        weights=opt("weights", _parse_float_list),
        support_floor=_parse_float("support_floor", pairs["support_floor"])
        if "support_floor" in pairs else 1e-9,
        zeta=_parse_float("zeta", pairs["zeta"]) if "zeta" in pairs else 0.85,
        alpha_grid=opt("alpha_grid", _parse_float_list),
        replications=opt("replications", _parse_int),
        seed=opt("seed", _parse_int),
        cap=_parse_int("cap", pairs["cap"]) if "cap" in pairs else 1_000_000,
        stride=_parse_int("stride", pairs["stride"]) if "stride" in pairs else 1,
        true_hypothesis=opt("true_hypothesis", _parse_int),
        adversary=adversary,
        channel=opt("channel", _parse_float_list),
        channels=tuple(_parse_float_list(k, pairs[k]) for k in chan_keys) or None,
        solver_tolerance=opt("solver_tolerance", _parse_float),
        solver_max_iterations=opt("solver_max_iterations", _parse_int),
    )


def dump_run_config(config: RunConfig) -> str:
    """Canonical text form; parsing it back yields an identical RunConfig."""
    lines = ["# seqgame configuration"]

    def put(key: str, value) -> None:
        if value is None:
            return
        if isinstance(value, tuple):
            value = ", ".join(repr(v) for v in value)
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")

    for i, h in enumerate(config.hypotheses):
        put(f"hypothesis_{i}", h)
    put("delta", config.delta)
    put("measure", config.measure)
    put("weights", config.weights)
    put("support_floor", config.support_floor)
    put("zeta", config.zeta)
    put("alpha_grid", config.alpha_grid)
    put("replications", config.replications)
    put("seed", config.seed)
    put("cap", config.cap)
    put("stride", config.stride)
    put("true_hypothesis", config.true_hypothesis)
    put("adversary", config.adversary)
    put("channel", config.channel)
    if config.channels is not None:
        for i, rows in enumerate(config.channels):
            put(f"channel_{i}", rows)
    put("solver_tolerance", config.solver_tolerance)
    put("solver_max_iterations", config.solver_max_iterations)
    return "\n".join(lines) + "\n"


def _wrap_config(fn, *args):
    """Value and shape problems in config-built objects are config errors."""
    try:
        return fn(*args)
    except (ConstructionError, ShapeError, DomainError) as exc:
        raise ConfigError(str(exc)) from exc


def build_game_spec(config: RunConfig) -> GameSpec:
    hyps = tuple(_wrap_config(Distribution, h) for h in config.hypotheses)
    return _wrap_config(
        lambda: GameSpec(
            hypotheses=hyps,
            delta=config.delta,
            measure=_MEASURES[config.measure],
            weights=config.weights or (),
            support_floor=config.support_floor,
        )
    )


def _build_channel(flat: tuple[float, ...], size: int) -> Channel:
    if len(flat) != size * size:
        raise ConfigError(
            f"channel needs {size * size} row-major entries, got {len(flat)}"
        )
    return _wrap_config(Channel, np.array(flat).reshape(size, size))


def build_solver_options(config: RunConfig) -> SolverOptions | None:
    if config.solver_tolerance is None and config.solver_max_iterations is None:
        return None
    base = SolverOptions()
    return _wrap_config(
        lambda: SolverOptions(
            tolerance=config.solver_tolerance or base.tolerance,
            max_iterations=config.solver_max_iterations or base.max_iterations,
        )
    )


def build_scenario(config: RunConfig, seed_override: int | None = None) -> ScenarioConfig:
    for key in ("alpha_grid", "replications"):
        if getattr(config, key) is None:
            raise ConfigError(f"missing required key {key!r}")
    seed = seed_override if seed_override is not None else config.seed
    if seed is None:
        raise ConfigError("missing required key 'seed' (or pass --seed)")
    spec = build_game_spec(config)
    size = spec.alphabet_size
    adversary: str | Channel | tuple[Channel, ...]
    if config.adversary == "equilibrium":
        adversary = "equilibrium"
    elif config.channel is not None:
        adversary = _build_channel(config.channel, size)
    else:
        assert config.channels is not None
        adversary = tuple(_build_channel(c, size) for c in config.channels)
    return _wrap_config(
        lambda: ScenarioConfig(
            spec=spec,
            alpha_grid=config.alpha_grid,
            replications=config.replications,
            seed=seed,
            adversary=adversary,
            cap=config.cap,
            stride=config.stride,
            zeta=config.zeta,
            true_hypothesis=config.true_hypothesis,
        )
    )


def ingest_histogram(path: str | Path, binarize_threshold: int) -> Distribution:
    """Estimate the binarized pixel distribution of a plain-text intensity file.

    Values strictly greater than the threshold map to symbol 1; the result
    is (fraction low, fraction high).
    """
    tokens = Path(path).read_text().split()
    if not tokens:
        raise EmptyDataError(f"no values in {path}")
    values = np.empty(len(tokens), dtype=np.int64)
    for i, tok in enumerate(tokens):
        try:
            values[i] = int(tok)
        except ValueError:
            raise FormatError(f"non-integer value {tok!r} in {path}") from None
    if values.min() < 0 or values.max() > 255:
        raise FormatError(f"values in {path} must lie in [0, 255]")
    frac_high = float(np.mean(values > binarize_threshold))
    return Distribution([1.0 - frac_high, frac_high])


def solution_csv(solution: EquilibriumSolution) -> str:
    """One CSV row: payoff, per-hypothesis exponents, then the flattened
    worst-case laws as q_star_<hypothesis>_<symbol>."""
    m = len(solution.q_star)
    size = solution.q_star[0].size
    header = ["payoff"] + [f"exponent_{i}" for i in range(m)]
    cells = [format(solution.payoff, ".12g")]
    cells += [format(float(e), ".12g") for e in solution.exponents]
    for i in range(m):
        for s in range(size):
            header.append(f"q_star_{i}_{s}")
            cells.append(format(float(solution.q_star[i].probs[s]), ".12g"))
    return ",".join(header) + "\n" + ",".join(cells) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _cmd_solve(args) -> int:
    config = parse_run_config(Path(args.config).read_text())
    if args.dump_config:
        sys.stdout.write(dump_run_config(config))
        return 0
    spec = build_game_spec(config)
    solution = solve_aware_equilibrium(spec, build_solver_options(config))
    print(f"payoff {format(solution.payoff, '.12g')}")
    for i, q in enumerate(solution.q_star):
        exp = format(float(solution.exponents[i]), ".12g")
        law = ", ".join(format(float(v), ".12g") for v in q.probs)
        print(f"hypothesis {i}: exponent {exp}  worst-case law ({law})")
    print(f"converged {solution.converged}")
    _emit(solution_csv(solution), args.out)
    return 0


def _cmd_simulate(args) -> int:
    config = parse_run_config(Path(args.config).read_text())
    if args.dump_config:
        sys.stdout.write(dump_run_config(config))
        return 0
    scenario = build_scenario(config, args.seed)
    if len(scenario.alpha_grid) != 1:
        raise ConfigError("simulate expects exactly one alpha_grid entry; use sweep")
    _emit(monte_carlo(scenario).to_csv(), args.out)
    return 0


def _cmd_sweep(args) -> int:
    config = parse_run_config(Path(args.config).read_text())
    if args.dump_config:
        sys.stdout.write(dump_run_config(config))
        return 0
    scenario = build_scenario(config, args.seed)
    _emit(monte_carlo(scenario).to_csv(), args.out)
    return 0


def _cmd_ingest(args) -> int:
    dist = ingest_histogram(args.data, args.threshold)
    lines = ["symbol,probability"]
    for sym, p in enumerate(dist.probs):
        lines.append(f"{sym},{format(float(p), '.12g')}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqgame",
        description="Sequential hypothesis testing against adversarial perturbation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="solve the equilibrium and print exponents")
    solve.add_argument("--config", required=True)
    solve.add_argument("--out")
    solve.add_argument("--dump-config", action="store_true")
    solve.set_defaults(handler=_cmd_solve)

    for name, handler, blurb in (
        ("simulate", _cmd_simulate, "run a single-alpha Monte Carlo scenario"),
        ("sweep", _cmd_sweep, "run the full alpha grid and emit the report CSV"),
    ):
        cmd = sub.add_parser(name, help=blurb)
        cmd.add_argument("--config", required=True)
        cmd.add_argument("--out")
        cmd.add_argument("--seed", type=int, default=None)
        cmd.add_argument("--dump-config", action="store_true")
        cmd.set_defaults(handler=handler)

    ingest = sub.add_parser("ingest", help="binarize a pixel file into a distribution")
    ingest.add_argument("--data", required=True)
    ingest.add_argument("--threshold", type=int, required=True)
    ingest.add_argument("--out")
    ingest.set_defaults(handler=_cmd_ingest)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InfeasibleError, DegenerateGameError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (EmptyDataError, FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except SeqGameError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
