"""
Scenario files, trace persistence and the command implementations.

A scenario file is flat ``key = value`` text with dotted keys and ``#``
comments::

    physical.pmax = 100
    physical.freq_a = 300e6      # or physical.lambda_a, never both
    agents.a1.x = 0
    game.steps = 200

Every key is optional; omitted keys take the defaults below.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
import typing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import allocation as alloc_mod
from .allocation import AllocationProfile, SolverOptions, nash_solve, team_wise_lhs
from .channel import (
    AGENTS,
    D_MIN,
    MODULATION_SIZES,
    Agent,
    AgentLayout,
    PhysicalParams,
    link_gains,
    wavelength,
)
from .errors import ConfigError, DomainError, NashConvergenceError
from .game import MODES, GameOptions, Trace, hamiltonian, simulate
from .modulation import MqamScheme

EXIT_OK = 0
EXIT_NONCONVERGED = 1
EXIT_INPUT = 2

DEFAULT_FREQ_A = 300e6
DEFAULT_FREQ_B = 100e6


@dataclass(frozen=True)
class PhysicalConfig:
    pmax: float = 100.0
    energy: float = 1000.0
    sigma: float = 0.01
    alpha: float = 2.0
    gt: float = 1.0
    gr: float = 1.0
    freq_a: float | None = None
    freq_b: float | None = None
    lambda_a: float | None = None
    lambda_b: float | None = None
    modulation_size: int = 2

    def params(self) -> PhysicalParams:
        lam_a = self.lambda_a if self.lambda_a is not None else wavelength(self.freq_a or DEFAULT_FREQ_A)
        lam_b = self.lambda_b if self.lambda_b is not None else wavelength(self.freq_b or DEFAULT_FREQ_B)
        return PhysicalParams(pmax=self.pmax, energy=self.energy, sigma=self.sigma, alpha=self.alpha,
                              gt=self.gt, gr=self.gr, lambda_a=lam_a, lambda_b=lam_b,
                              modulation_size=self.modulation_size)


@dataclass(frozen=True)
class AgentConfig:
    x: float = 0.0
    y: float = 0.0
    heading: float | None = None  # None: toward (team A) / away from (team B) the other team
    speed: float = 1.0


def _default_agents() -> dict[str, AgentConfig]:
    return {
        "a1": AgentConfig(0.0, 0.0),
        "a2": AgentConfig(0.0, 40.0),
        "b1": AgentConfig(30.0, 0.0),
        "b2": AgentConfig(30.0, 40.0),
    }


@dataclass(frozen=True)
class GameConfig:
    steps: int = 200
    dt: float | None = None
    sweeps_max: int = 50
    control_relaxation: float = 0.5
    sweep_tol: float = 1e-6
    mode: str = "saddle"

    def options(self) -> GameOptions:
        return GameOptions(steps=self.steps, dt=self.dt, sweeps_max=self.sweeps_max,
                           control_relaxation=self.control_relaxation, sweep_tol=self.sweep_tol)


@dataclass(frozen=True)
class OutputConfig:
    trace: str = "trace.csv"
    summary: str = "summary.txt"


@dataclass(frozen=True)
class RngConfig:
    seed: int = 0


@dataclass(frozen=True)
class ScenarioConfig:
    physical: PhysicalConfig = field(default_factory=PhysicalConfig)
    agents: dict[str, AgentConfig] = field(default_factory=_default_agents)
    game: GameConfig = field(default_factory=GameConfig)
    solver: SolverOptions = field(default_factory=SolverOptions)
    output: OutputConfig = field(default_factory=OutputConfig)
    rng: RngConfig = field(default_factory=RngConfig)

    def params(self) -> PhysicalParams:
        return self.physical.params()

    def scheme(self) -> MqamScheme:
        return MqamScheme(self.physical.modulation_size)

    def layout(self) -> AgentLayout:
        cfgs = [self.agents[a.label] for a in AGENTS]
        pos = np.array([[c.x, c.y] for c in cfgs])
        centroid_a, centroid_b = pos[:2].mean(axis=0), pos[2:].mean(axis=0)
        headings = []
        for agent, c, p in zip(AGENTS, cfgs, pos):
            if c.heading is not None:
                headings.append(c.heading)
            elif agent.team == "a":
                v = centroid_b - p
                headings.append(math.atan2(v[1], v[0]))
            else:
                v = p - centroid_a
                headings.append(math.atan2(v[1], v[0]))
        return AgentLayout(pos, headings, [c.speed for c in cfgs])


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_SECTIONS = {
    "physical": PhysicalConfig,
    "game": GameConfig,
    "solver": SolverOptions,
    "output": OutputConfig,
    "rng": RngConfig,
}
_AGENT_LABELS = tuple(a.label for a in AGENTS)

_POSITIVE = {"physical.pmax", "physical.energy", "physical.sigma", "physical.alpha", "physical.gt",
             "physical.gr", "physical.freq_a", "physical.freq_b", "physical.lambda_a",
             "physical.lambda_b", "game.steps", "game.dt", "game.sweeps_max", "game.sweep_tol",
             "solver.tol", "solver.max_sweeps", "solver.bisect_tol", "solver.max_iter",
             "solver.newton_max_iter", "solver.pgd_max_iter"}


def _field_types(cls) -> dict[str, type]:
    hints = typing.get_type_hints(cls)
    out = {}
    for f in dataclasses.fields(cls):
        tp = hints[f.name]
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        out[f.name] = args[0] if args else tp
    return out


def _convert(raw: str, tp: type, key: str, line: int):
    try:
        if tp is bool:
            low = raw.lower()
            if low not in ("true", "false", "1", "0"):
                raise ValueError
            return low in ("true", "1")
        if tp is int:
            value = float(raw)
            if not value.is_integer():
                raise ValueError
            return int(value)
        if tp is float:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError
            return value
    except ValueError:
        raise ConfigError(f"cannot read {raw!r} as {tp.__name__}", key, line) from None
    return raw


def _validate(key: str, value, line: int) -> None:
    if key in _POSITIVE and value <= 0:
        raise ConfigError(f"{key.split('.')[-1]} must be positive", key, line)
    if key == "physical.modulation_size" and value not in MODULATION_SIZES:
        raise ConfigError("M must be in {2,4,16,64,256}", key, line)
    if key.endswith(".speed") and value < 0:
        raise ConfigError("speed must be nonnegative", key, line)
    if key == "game.mode" and value not in MODES:
        raise ConfigError(f"mode must be one of {MODES}", key, line)
    if key in ("game.control_relaxation", "solver.relaxation") and not 0 < value <= 1:
        raise ConfigError("relaxation must lie in (0, 1]", key, line)


def _lookup(key: str, line: int) -> tuple[str, str | None, str, type]:
    parts = key.split(".")
    if parts[0] == "agents" and len(parts) == 3 and parts[1] in _AGENT_LABELS:
        types = _field_types(AgentConfig)
        if parts[2] in types:
            return "agents", parts[1], parts[2], types[parts[2]]
    elif len(parts) == 2 and parts[0] in _SECTIONS:
        types = _field_types(_SECTIONS[parts[0]])
        if parts[1] in types:
            return parts[0], None, parts[1], types[parts[1]]
    raise ConfigError("unknown field", key, line)


def parse_config(text: str) -> ScenarioConfig:
    """Parse scenario text; raises :class:`ConfigError` naming the key and line."""
    sections: dict[str, dict] = {name: {} for name in _SECTIONS}
    agents: dict[str, dict] = {label: {} for label in _AGENT_LABELS}
    seen: dict[str, int] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", None, lineno)
        key, raw = (part.strip() for part in line.split("=", 1))
        if not raw:
            raise ConfigError("missing value", key, lineno)
        section, agent, name, tp = _lookup(key, lineno)
        if key in seen:
            raise ConfigError(f"duplicate key (first set on line {seen[key]})", key, lineno)
        seen[key] = lineno
        value = _convert(raw, tp, key, lineno)
        _validate(key, value, lineno)
        (agents[agent] if agent else sections[section])[name] = value

    for team in ("a", "b"):
        fkey, lkey = f"physical.freq_{team}", f"physical.lambda_{team}"
        if fkey in seen and lkey in seen:
            raise ConfigError(f"give either {fkey} or {lkey}, not both", lkey, max(seen[fkey], seen[lkey]))

    defaults = _default_agents()
    try:
        config = ScenarioConfig(
            physical=PhysicalConfig(**sections["physical"]),
            agents={label: dataclasses.replace(defaults[label], **agents[label]) for label in _AGENT_LABELS},
            game=GameConfig(**sections["game"]),
            solver=SolverOptions(**sections["solver"]),
            output=OutputConfig(**sections["output"]),
            rng=RngConfig(**sections["rng"]),
        )
        config.params()
        layout = config.layout()
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    if layout.min_distance() < D_MIN:
        raise ConfigError(f"initial agents must be at least {D_MIN} m apart", "agents")
    return config


def load_config(path) -> ScenarioConfig:
    return parse_config(Path(path).read_text())


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def serialize_config(config: ScenarioConfig) -> str:
    """Inverse of :func:`parse_config` (fields left at ``None`` are omitted)."""
    lines = []
    for name in ("physical",):
        lines += _section_lines(name, getattr(config, name))
    for label in _AGENT_LABELS:
        lines += _section_lines(f"agents.{label}", config.agents[label])
    for name in ("game", "solver", "output", "rng"):
        lines += _section_lines(name, getattr(config, name))
    return "\n".join(lines) + "\n"


def _section_lines(prefix, obj):
    out = []
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        if value is not None:
            out.append(f"{prefix}.{f.name} = {_format_value(value)}")
    return out


def with_override(config: ScenarioConfig, key: str, value) -> ScenarioConfig:
    """Copy of ``config`` with one dotted key replaced, re-validated by the parser."""
    lines = [ln for ln in serialize_config(config).splitlines() if ln.split("=", 1)[0].strip() != key]
    if key in ("physical.freq_a", "physical.freq_b", "physical.lambda_a", "physical.lambda_b"):
        team = key[-1]
        drop = {f"physical.freq_{team}", f"physical.lambda_{team}"}
        lines = [ln for ln in lines if ln.split("=", 1)[0].strip() not in drop]
    lines.append(f"{key} = {_format_value(value)}")
    return parse_config("\n".join(lines))


# ---------------------------------------------------------------------------
# trace output
# ---------------------------------------------------------------------------

def trace_columns() -> list[str]:
    cols = ["t"]
    for a in AGENTS:
        cols += [f"{a.label}_{c}" for c in ("x", "y", "heading", "comm", "jam1", "jam2")]
    cols += ["s_a1", "s_a2", "s_b1", "s_b2", "L"]
    for a in AGENTS:
        cols += [f"Jx_{a.label}", f"Jy_{a.label}"]
    cols += ["certified", "converged"]
    return cols


def _g(x: float) -> str:
    return "%.17g" % x


def trace_rows(trace: Trace):
    for r in trace.records:
        row = [_g(r.t)]
        for a in AGENTS:
            row += [_g(r.positions[a, 0]), _g(r.positions[a, 1]), _g(r.headings[a])]
            row += [_g(v) for v in r.allocation[a]]
        row += [_g(s) for s in r.sinr.as_tuple()]
        row.append(_g(r.payoff))
        for a in AGENTS:
            row += [_g(r.costate[a, 0]), _g(r.costate[a, 1])]
        row += [str(int(r.certified)), str(int(r.converged))]
        yield row


def write_trace(trace: Trace, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(trace_columns())
        writer.writerows(trace_rows(trace))


def read_trace(path) -> list[dict[str, float]]:
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def trace_summary(trace: Trace, params: PhysicalParams, scheme) -> dict[str, object]:
    h_values = [hamiltonian(AgentLayout(r.positions, r.headings, trace.speeds), r.allocation,
                            r.costate, r.headings, params, scheme) for r in trace.records]
    final = trace.records[-1]
    summary = {
        "mode": trace.mode,
        "converged": trace.converged,
        "sweeps": trace.sweeps,
        "heading_residual": trace.residual,
        "horizon": trace.horizon,
        "steps": len(trace.records) - 1,
        "payoff_integral": trace.payoff_integral(),
        "final_payoff": final.payoff,
        "certified_steps": trace.certified_count(),
        "rows": len(trace.records),
        "hamiltonian_max_abs": max(abs(h) for h in h_values),
        "hamiltonian_spread": max(h_values) - min(h_values),
    }
    for a in AGENTS:
        summary[f"energy_used.{a.label}"] = final.energy_used
    return summary


def write_summary(summary: dict[str, object], path) -> None:
    Path(path).write_text("".join(f"{k} = {_format_value(v)}\n" for k, v in summary.items()))


def read_summary(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_allocate(config: ScenarioConfig, out=None, stream=None) -> int:
    """Solve the static allocation game at the initial geometry and report it."""
    stream = stream or _stdout()
    params, scheme, layout = config.params(), config.scheme(), config.layout()
    try:
        profile, report = nash_solve(layout, params, scheme, AllocationProfile.uniform(), config.solver)
    except NashConvergenceError as exc:
        print(f"error: {exc}", file=stream)
        return EXIT_NONCONVERGED
    gains = link_gains(layout, params)
    rows = profile.vectors.tolist()
    lines = {}
    for a in AGENTS:
        coeffs = alloc_mod.coefficients_from_gains(a, gains, rows, params.sigma)
        lines[f"{a.label}.allocation"] = " ".join(repr(v) for v in rows[a])
        lines[f"{a.label}.objective"] = alloc_mod.focal_payoff(a, rows[a], coeffs, scheme)
        lines[f"{a.label}.hessian_ok"] = report.hessian_ok_per_player[a]
    lines["team_payoff"] = alloc_mod.team_payoff(layout, profile, params, scheme)
    lines["mqam_sufficient"] = report.mqam_sufficient
    lines["condition_lhs"] = report.condition_lhs
    lines["condition_rhs"] = report.condition_rhs
    lines["converged"] = report.converged
    lines["iterations"] = report.iterations
    for k, v in lines.items():
        print(f"{k} = {_format_value(v)}", file=stream)
    if not report.certified:
        print("warning: non-certified instance; the equilibrium found need not be unique", file=stream)
    if out is not None:
        write_summary(lines, out)
    return EXIT_OK


def run_simulation(config: ScenarioConfig, out_dir, mode: str | None = None) -> tuple[int, dict]:
    mode = mode or config.game.mode
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    params, scheme, layout = config.params(), config.scheme(), config.layout()
    try:
        trace = simulate(layout, params, scheme, config.game.options(), config.solver, mode)
    except NashConvergenceError as exc:
        summary = {"mode": mode, "converged": False, "failed_step": exc.step, "error": str(exc)}
        if getattr(exc, "partial", None) is not None:
            _write_partial(exc.partial, params, out_dir / config.output.trace)
        write_summary(summary, out_dir / config.output.summary)
        return EXIT_NONCONVERGED, summary
    summary = trace_summary(trace, params, scheme)
    write_trace(trace, out_dir / config.output.trace)
    write_summary(summary, out_dir / config.output.summary)
    return (EXIT_OK if trace.converged else EXIT_NONCONVERGED), summary


def _write_partial(partial, params, path) -> None:
    layouts, profiles, reports, headings, dt = partial
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(trace_columns())
        for k, (layout, profile, report) in enumerate(zip(layouts, profiles, reports)):
            s = alloc_mod.sinr_from_gains(link_gains(layout, params), profile.vectors.tolist(), params.sigma)
            scheme = MqamScheme(params.modulation_size)
            ber = [scheme.ber(v) for v in s]
            row = [_g(k * dt)]
            for a in AGENTS:
                row += [_g(layout.positions[a, 0]), _g(layout.positions[a, 1]), _g(layout.headings[a])]
                row += [_g(v) for v in profile[a]]
            row += [_g(v) for v in s] + [_g(ber[0] + ber[1] - ber[2] - ber[3])]
            row += ["0"] * 8 + [str(int(report.certified)), str(int(report.converged))]
            writer.writerow(row)


def cmd_simulate(config: ScenarioConfig, out_dir, mode: str | None = None, stream=None) -> int:
    stream = stream or _stdout()
    code, summary = run_simulation(config, out_dir, mode)
    for k, v in summary.items():
        print(f"{k} = {_format_value(v)}", file=stream)
    return code


def certification_report(config: ScenarioConfig) -> dict[str, object]:
    """The sufficient condition in its three equivalent forms plus per-player diagnostics."""
    params, scheme, layout = config.params(), config.scheme(), config.layout()
    beta, m = scheme.beta, params.modulation_size
    ok, lhs, rhs = alloc_mod.mqam_sufficient_condition(layout, params)
    lhs_for_a, lhs_for_b = team_wise_lhs(layout, params)
    # intra-team SNR at full communication power, team A's link then team B's
    snr_a = params.rho_a * params.pmax * layout.distance(Agent.A1, Agent.A2) ** (-params.alpha) / params.sigma
    snr_b = params.rho_b * params.pmax * layout.distance(Agent.B1, Agent.B2) ** (-params.alpha) / params.sigma
    rate_needed = math.log2(1.0 + max(snr_a, snr_b))
    out: dict[str, object] = {
        "condition_lhs": lhs,
        "condition_rhs": rhs,
        "lhs_team_a": lhs_for_a,
        "lhs_team_b": lhs_for_b,
        "condition_ok": ok,
        "rate": math.log2(m),
        "rate_required": rate_needed,
        "rate_ok": math.log2(m) > rate_needed,
        "snr_limit": 3.0 / beta,
        "snr_worst_a": snr_a,
        "snr_worst_b": snr_b,
        "snr_ok": max(snr_a, snr_b) < 3.0 / beta,
    }
    opts = dataclasses.replace(config.solver, raise_on_failure=False)
    profile, _ = nash_solve(layout, params, scheme, AllocationProfile.uniform(), opts)
    rows = profile.vectors.tolist()
    gains = link_gains(layout, params)
    for f in AGENTS:
        for r in f.opponents:
            # SNR of r's incoming link vs. the jamming SNR from f's team-mate on r
            snr_signal = gains[r.mate][r] * rows[r.mate][0] / params.sigma
            snr_mate_jam = gains[f.mate][r] * rows[f.mate][1 + r.slot] / params.sigma
            holds = snr_signal < 3.0 / beta * (snr_mate_jam + 1.0)
            out[f"{f.label}.snr_form.{r.label}"] = (
                f"{snr_signal!r} < {3.0 / beta!r} * ({snr_mate_jam!r} + 1) {'holds' if holds else 'fails'}")
    out["verdict"] = "PSNE certified" if ok else "not certified; MSNE guaranteed to exist"
    return out


def cmd_check(config: ScenarioConfig, stream=None) -> int:
    stream = stream or _stdout()
    for k, v in certification_report(config).items():
        print(f"{k} = {_format_value(v)}", file=stream)
    return EXIT_OK


def _sweep_job(args):
    text, out_dir, mode = args
    code, summary = run_simulation(parse_config(text), out_dir, mode)
    return code, summary


def cmd_sweep(config: ScenarioConfig, key: str, lo: float, hi: float, n: int, out_dir,
              mode: str | None = None, jobs: int = 1, stream=None) -> int:
    """Simulate ``n`` copies of ``config`` with ``key`` swept over ``linspace(lo, hi, n)``."""
    stream = stream or _stdout()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    values = np.linspace(lo, hi, n).tolist() if n > 1 else [lo]
    tasks = []
    for i, value in enumerate(values):
        cfg = with_override(config, key, value)
        tasks.append((serialize_config(cfg), str(out_dir / f"run_{i:03d}"), mode))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_job, tasks))
    else:
        results = [_sweep_job(t) for t in tasks]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["run", key, "exit", "converged", "payoff_integral", "certified_steps"])
    worst = EXIT_OK
    for i, (value, (code, summary)) in enumerate(zip(values, results)):
        writer.writerow([f"run_{i:03d}", _g(value), code, summary.get("converged"),
                         _g(summary["payoff_integral"]) if "payoff_integral" in summary else "",
                         summary.get("certified_steps", "")])
        worst = max(worst, code)
    (out_dir / "sweep.csv").write_text(buf.getvalue())
    print(buf.getvalue(), end="", file=stream)
    return worst


def _stdout():
    import sys
    return sys.stdout
