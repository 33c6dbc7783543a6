"""
The differential game over a fixed energy-limited horizon.

Agents move with unicycle kinematics at constant speed and choose their
headings.  Because every agent transmits at full power, the horizon is
always ``T = E / pmax``.  Headings come from the value gradient (costate),
which is integrated backward from zero at ``T``: since the velocity field
does not depend on position, the retrograde costate derivative is just the
position gradient of the instantaneous payoff ``L``.

``forward_backward_sweep`` alternates a forward pass (kinematics plus an
equilibrium allocation solve at every step), a backward costate pass and a
relaxed heading update until the headings stop changing.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .allocation import (
    AllocationProfile,
    PsneReport,
    SolverOptions,
    _checked_rows,
    nash_solve,
    team_payoff,
)
from .channel import (
    AGENTS,
    D_MIN,
    Agent,
    AgentLayout,
    DistanceClampWarning,
    PhysicalParams,
    SinrState,
    link_gains,
    sinr_from_gains,
)
from .errors import DomainError, NashConvergenceError

log = logging.getLogger(__name__)

MODES = ("saddle", "myopic")


@dataclass(frozen=True)
class GameOptions:
    steps: int = 200
    dt: float | None = None
    sweeps_max: int = 50
    control_relaxation: float = 0.5
    sweep_tol: float = 1e-6

    def __post_init__(self):
        if self.steps < 1:
            raise DomainError("steps must be at least 1")
        if self.dt is not None and self.dt <= 0:
            raise DomainError("dt must be positive")
        if not 0 < self.control_relaxation <= 1:
            raise DomainError("control_relaxation must lie in (0, 1]")
        if self.sweeps_max < 1 or self.sweep_tol <= 0:
            raise DomainError("sweeps_max must be >= 1 and sweep_tol positive")

    def resolve_steps(self, T: float) -> int:
        """Number of steps on ``[0, T]``; an explicit ``dt`` must divide ``T``."""
        if self.dt is None:
            return self.steps
        n = round(T / self.dt)
        if n < 1 or abs(n * self.dt - T) > 1e-9:
            raise DomainError(f"dt = {self.dt} does not divide the horizon T = {T}")
        return n


def horizon(params: PhysicalParams) -> float:
    """Fixed game duration: every agent burns ``pmax`` until its energy runs out."""
    if params.pmax <= 0:
        raise DomainError("pmax must be positive")
    return params.energy / params.pmax


# ---------------------------------------------------------------------------
# kinematics and costate
# ---------------------------------------------------------------------------

def _velocity(layout: AgentLayout) -> np.ndarray:
    u = layout.speeds
    th = layout.headings
    return np.column_stack((u * np.cos(th), u * np.sin(th)))


def step_kinematics(layout: AgentLayout, dt: float) -> AgentLayout:
    """Advance positions by one RK4 step; headings and speeds are unchanged."""
    if dt <= 0:
        raise DomainError("dt must be positive")
    # The velocity field is position-independent, so all four stages agree
    # and the step is exact straight-line motion.
    k1 = _velocity(layout)
    k2 = _velocity(layout.replace(positions=layout.positions + 0.5 * dt * k1))
    k3 = _velocity(layout.replace(positions=layout.positions + 0.5 * dt * k2))
    k4 = _velocity(layout.replace(positions=layout.positions + dt * k3))
    return layout.replace(positions=layout.positions + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))


def payoff_position_gradient(layout: AgentLayout, alloc, params: PhysicalParams, scheme) -> np.ndarray:
    """Gradient of ``L`` with respect to ``(x, y)`` of A1, A2, B1, B2 (8 entries).

    Derived by the chain rule through every ``d**-alpha`` term of the four
    SINRs, signal and jamming links alike.  Links at the clamp distance are
    flat and contribute nothing.
    """
    rows = _checked_rows(alloc)
    gains = link_gains(layout, params)
    pos = layout.positions
    sigma = params.sigma
    alpha = params.alpha
    grad = np.zeros((4, 2))
    clamped = False

    def push(i, j, dL_dlog_gain):
        nonlocal clamped
        diff = pos[i] - pos[j]
        d2 = float(diff @ diff)
        if d2 < D_MIN * D_MIN:
            clamped = True
            return
        # d(log G_ij)/d(p_i) = -alpha (p_i - p_j) / d**2
        v = -alpha * dL_dlog_gain * diff / d2
        grad[i] += v
        grad[j] -= v

    for r in AGENTS:
        m = r.mate
        k = 1 + r.slot
        o1, o2 = r.opponents
        signal = gains[m][r] * rows[m][0]
        if signal == 0:
            continue  # dead link: SINR stays zero under any motion
        jam1 = gains[o1][r] * rows[o1][k]
        jam2 = gains[o2][r] * rows[o2][k]
        denom = sigma + jam1 + jam2
        s = signal / denom
        w = (1.0 if r.team == "a" else -1.0) * scheme.ber_prime(s)
        push(m, r, w * s)
        push(o1, r, -w * s * jam1 / denom)
        push(o2, r, -w * s * jam2 / denom)
    if clamped:
        warnings.warn("gradient evaluated with clamped distances", DistanceClampWarning, stacklevel=2)
    return grad.reshape(8)


def costate_rpe_step(costate: np.ndarray, layout: AgentLayout, alloc, params: PhysicalParams,
                     scheme, dt: float) -> np.ndarray:
    """One explicit retrograde step ``J <- J + dt * dL/dx`` (shape ``(4, 2)``)."""
    grad = payoff_position_gradient(layout, alloc, params, scheme).reshape(4, 2)
    return np.asarray(costate, dtype=float).reshape(4, 2) + dt * grad


def optimal_heading(focal: int, costate_xy, previous: float | None = None) -> float:
    """Heading extremising ``J . f`` for one agent.

    Team A minimises, so it heads against its costate; team B maximises and
    heads along it.  With a zero costate the heading is indeterminate and
    ``previous`` is returned.
    """
    jx, jy = float(costate_xy[0]), float(costate_xy[1])
    if jx == 0.0 and jy == 0.0:
        if previous is None:
            raise DomainError("heading is undefined for a zero costate and no previous heading")
        return previous
    if Agent(focal).team == "a":
        return math.atan2(-jy, -jx)
    return math.atan2(jy, jx)


def hamiltonian(layout: AgentLayout, alloc, costate, headings, params: PhysicalParams, scheme) -> float:
    """``H = L + J . f`` with ``f`` the unicycle velocity field."""
    vel = _velocity(layout.replace(headings=headings))
    return team_payoff(layout, alloc, params, scheme) + float(np.sum(np.asarray(costate).reshape(4, 2) * vel))


def _wrap(angle):
    return (angle + np.pi) % (2.0 * np.pi) - np.pi


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TraceRecord:
    t: float
    positions: np.ndarray
    headings: np.ndarray
    allocation: AllocationProfile
    sinr: SinrState
    ber: tuple[float, float, float, float]
    payoff: float
    costate: np.ndarray
    report: PsneReport
    energy_used: float

    @property
    def certified(self) -> bool:
        return self.report.certified

    @property
    def converged(self) -> bool:
        return self.report.converged


@dataclass(eq=False)
class Trace:
    records: list[TraceRecord]
    mode: str
    converged: bool
    sweeps: int
    residual: float
    horizon: float
    residual_history: list[float] = field(default_factory=list)
    speeds: np.ndarray | None = None

    def payoff_integral(self) -> float:
        """Trapezoidal integral of ``L`` over the trace."""
        t = np.array([r.t for r in self.records])
        y = np.array([r.payoff for r in self.records])
        return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t)))

    def certified_count(self) -> int:
        return sum(r.certified for r in self.records)


# ---------------------------------------------------------------------------
# passes
# ---------------------------------------------------------------------------

def _forward(initial: AgentLayout, headings: np.ndarray, params, scheme, solver_opts, dt, n,
             warm: list[AllocationProfile] | None, myopic: bool):
    layouts, profiles, reports = [], [], []
    layout = initial
    prev = warm[0] if warm else AllocationProfile.uniform()
    headings = headings.copy()
    for k in range(n + 1):
        init = warm[k] if warm else prev
        try:
            profile, report = nash_solve(layout, params, scheme, init, solver_opts)
        except NashConvergenceError as exc:
            exc.step = k
            exc.partial = (layouts, profiles, reports, headings, dt)
            raise
        if myopic and k < n:
            grad = payoff_position_gradient(layout, profile, params, scheme).reshape(4, 2)
            headings[k] = _target_headings(grad, headings[k], layout.speeds)
        if k < n:
            layout = layout.replace(headings=headings[k])
        layouts.append(layout)
        profiles.append(profile)
        reports.append(report)
        prev = profile
        if k < n:
            layout = step_kinematics(layout, dt)
    return layouts, profiles, reports, headings


def _backward(layouts, profiles, params, scheme, dt) -> np.ndarray:
    n = len(layouts) - 1
    costates = np.zeros((n + 1, 4, 2))  # terminal condition: exactly zero
    for k in range(n - 1, -1, -1):
        costates[k] = costate_rpe_step(costates[k + 1], layouts[k + 1], profiles[k + 1], params, scheme, dt)
    return costates


def _target_headings(costate: np.ndarray, current: np.ndarray, speeds: np.ndarray) -> np.ndarray:
    out = current.copy()
    for i in AGENTS:
        if speeds[i] > 0:
            out[i] = optimal_heading(i, costate[i], current[i])
    return out


def _build_trace(layouts, profiles, reports, costates, headings, params, scheme, T, n, mode,
                 converged, sweeps, residual, history) -> Trace:
    records = []
    for k in range(n + 1):
        t = T * k / n
        layout = layouts[k]
        sinr = SinrState(*sinr_from_gains(link_gains(layout, params), profiles[k].vectors.tolist(), params.sigma))
        ber = tuple(scheme.ber(s) for s in sinr.as_tuple())
        records.append(TraceRecord(
            t=t,
            positions=layout.positions,
            headings=headings[min(k, n - 1)].copy(),
            allocation=profiles[k],
            sinr=sinr,
            ber=ber,
            payoff=ber[0] + ber[1] - ber[2] - ber[3],
            costate=costates[k],
            report=reports[k],
            energy_used=params.pmax * t,
        ))
    return Trace(records, mode, converged, sweeps, residual, T, history, layouts[0].speeds)


def forward_backward_sweep(initial_layout: AgentLayout, params: PhysicalParams, scheme,
                           game_opts: GameOptions | None = None,
                           solver_opts: SolverOptions | None = None) -> Trace:
    """Iterate forward pass, backward costate pass and relaxed heading update.

    Returns the trace of the last forward pass; ``Trace.converged`` is False
    when ``sweeps_max`` ran out before the heading residual fell below
    ``sweep_tol``.
    """
    game_opts = game_opts or GameOptions()
    solver_opts = solver_opts or SolverOptions()
    T = horizon(params)
    n = game_opts.resolve_steps(T)
    dt = T / n
    headings = np.tile(initial_layout.headings, (n, 1))
    relax = game_opts.control_relaxation
    warm = None
    history = []
    converged = False
    for sweep in range(1, game_opts.sweeps_max + 1):
        used = headings
        layouts, profiles, reports, _ = _forward(initial_layout, headings, params, scheme,
                                                 solver_opts, dt, n, warm, myopic=False)
        costates = _backward(layouts, profiles, params, scheme, dt)
        target = np.array([_target_headings(costates[k], headings[k], initial_layout.speeds)
                           for k in range(n)])
        delta = _wrap(target - headings)
        residual = float(np.max(np.abs(delta))) if delta.size else 0.0
        history.append(residual)
        log.debug("sweep %d: heading residual %.3e", sweep, residual)
        if residual < game_opts.sweep_tol:
            converged = True
            break
        headings = _wrap(headings + relax * delta)
        warm = profiles
    if not converged:
        log.warning("forward-backward sweep stopped after %d sweeps (residual %.3e)", sweep, residual)
    return _build_trace(layouts, profiles, reports, costates, used, params, scheme, T, n,
                        "saddle", converged, sweep, residual, history)


def simulate(initial_layout: AgentLayout, params: PhysicalParams, scheme,
             game_opts: GameOptions | None = None, solver_opts: SolverOptions | None = None,
             mode: str = "saddle") -> Trace:
    """Run the game to ``T = E / pmax``.

    ``"saddle"`` delegates to :func:`forward_backward_sweep`.  ``"myopic"``
    is a forward-only baseline steering each agent along the instantaneous
    payoff gradient; its costate columns come from one backward pass over
    the resulting trajectory.
    """
    if mode not in MODES:
        raise DomainError(f"mode must be one of {MODES}, got {mode!r}")
    if mode == "saddle":
        return forward_backward_sweep(initial_layout, params, scheme, game_opts, solver_opts)
    game_opts = game_opts or GameOptions()
    solver_opts = solver_opts or SolverOptions()
    T = horizon(params)
    n = game_opts.resolve_steps(T)
    dt = T / n
    headings = np.tile(initial_layout.headings, (n, 1))
    layouts, profiles, reports, headings = _forward(initial_layout, headings, params, scheme,
                                                    solver_opts, dt, n, None, myopic=True)
    costates = _backward(layouts, profiles, params, scheme, dt)
    return _build_trace(layouts, profiles, reports, costates, headings, params, scheme, T, n,
                        "myopic", True, 1, 0.0, [])
