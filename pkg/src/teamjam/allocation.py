"""
The instantaneous power-allocation game.

Every agent splits its full transmit power into a communication fraction
and two jamming fractions, one per opposing agent.  Holding the other
three agents fixed, each agent ``f`` faces the same normal-form problem

    minimise  g(a x0) - g(b / (c + x1)) - g(d / (e + x2))   over the simplex

where ``x0`` is its communication fraction, ``x1, x2`` its jamming
fractions, and ``(a, b, c, d, e)`` depend only on the other agents.  For
team A this is the agent's own minimand; for team B it is the negated
maximand, so one solver serves all four players.

The best response enumerates the seven KKT candidates of the simplex
(three vertices, three edges, the interior) and keeps the feasible one with
the smallest objective.  Equilibria are found by Gauss-Seidel sweeps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .channel import AGENTS, Agent, AgentLayout, PhysicalParams, link_gains, sinr_from_gains
from .errors import ConvergenceError, DomainError, NashConvergenceError, SingularityError
from .modulation import MqamScheme

SIMPLEX_TOL = 1e-12
_INF = math.inf


class AllocationProfile:
    """Four simplex vectors ``(comm, jam_opp1, jam_opp2)``, rows A1, A2, B1, B2.

    Row ``i`` component ``1 + k`` is the fraction agent ``i`` spends jamming
    the opposing team's agent ``k``.
    """

    __slots__ = ("vectors",)

    def __init__(self, vectors):
        arr = np.array(vectors, dtype=float).reshape(4, 3)
        if np.any(arr < 0) or np.any(np.abs(arr.sum(axis=1) - 1.0) > SIMPLEX_TOL):
            raise DomainError(f"every allocation row must lie on the simplex, got\n{arr}")
        arr.setflags(write=False)
        self.vectors = arr

    @classmethod
    def uniform(cls) -> "AllocationProfile":
        return cls(np.full((4, 3), 1.0 / 3.0))

    @classmethod
    def random(cls, rng: np.random.Generator) -> "AllocationProfile":
        return cls(_dirichlet_rows(rng, 4))

    def __getitem__(self, agent: int) -> np.ndarray:
        return self.vectors[int(agent)]

    def with_agent(self, agent: int, x: Sequence[float]) -> "AllocationProfile":
        arr = self.vectors.copy()
        arr[int(agent)] = x
        return AllocationProfile(arr)

    def distance(self, other: "AllocationProfile") -> float:
        """Infinity-norm distance between two profiles."""
        return float(np.max(np.abs(self.vectors - other.vectors)))

    def __eq__(self, other):
        return isinstance(other, AllocationProfile) and np.array_equal(self.vectors, other.vectors)

    def __repr__(self):
        return f"AllocationProfile({self.vectors.tolist()!r})"


def _dirichlet_rows(rng, n):
    rows = rng.dirichlet(np.ones(3), size=n)
    # renormalise so the simplex check holds to the last ulp
    rows[:, 2] = 1.0 - rows[:, 0] - rows[:, 1]
    return np.clip(rows, 0.0, None)


def check_simplex(x: Sequence[float]) -> None:
    if len(x) != 3 or min(x) < 0 or abs(sum(x) - 1.0) > SIMPLEX_TOL:
        raise DomainError(f"{tuple(x)} is not a point of the 3-simplex")


class FocalCoefficients(NamedTuple):
    """Normal-form coefficients of one agent's subproblem.

    The three SINRs the focal agent influences are ``a * x0`` (its mate),
    ``b / (c + x1)`` and ``d / (e + x2)`` (the two opposing receivers).
    """

    a: float
    b: float
    c: float
    d: float
    e: float


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-10
    max_sweeps: int = 500
    relaxation: float = 1.0
    bisect_tol: float = 1e-12
    max_iter: int = 200
    newton_max_iter: int = 100
    pgd_max_iter: int = 10_000
    raise_on_failure: bool = True

    def __post_init__(self):
        if not 0 < self.relaxation <= 1:
            raise DomainError(f"relaxation must lie in (0, 1], got {self.relaxation}")
        if self.tol <= 0 or self.bisect_tol <= 0:
            raise DomainError("tolerances must be positive")


@dataclass(frozen=True)
class BestResponse:
    x: tuple[float, float, float]
    value: float
    certified: bool
    case: str


@dataclass(frozen=True)
class PsneReport:
    hessian_ok_per_player: tuple[bool, bool, bool, bool]
    mqam_sufficient: bool
    condition_lhs: float
    condition_rhs: float
    converged: bool = True
    iterations: int = 0
    changes: tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if self.mqam_sufficient != (self.condition_lhs < self.condition_rhs):
            raise ValueError("mqam_sufficient must equal condition_lhs < condition_rhs")

    @property
    def certified(self) -> bool:
        """True when the sufficient condition guarantees a unique pure equilibrium."""
        return self.mqam_sufficient

    @property
    def hessian_ok(self) -> bool:
        return all(self.hessian_ok_per_player)


class CertificationCheck(NamedTuple):
    ok: bool
    lhs: float
    rhs: float


# ---------------------------------------------------------------------------
# payoff structure
# ---------------------------------------------------------------------------

def coefficients_from_gains(focal: int, gains, rows, sigma: float) -> FocalCoefficients:
    """Normal-form coefficients from a link-gain matrix (see :func:`channel.link_gains`)."""
    f = Agent(focal)
    m = f.mate
    o1, o2 = f.opponents
    k = 1 + m.slot
    a = gains[f][m] / (sigma + gains[o1][m] * rows[o1][k] + gains[o2][m] * rows[o2][k])
    out = [a]
    for r in (o1, o2):
        unit = gains[f][r]
        signal = gains[r.mate][r] * rows[r.mate][0]
        other_jam = gains[m][r] * rows[m][1 + r.slot]
        out.append(signal / unit)
        out.append((sigma + other_jam) / unit)
    return FocalCoefficients(*out)


def focal_coefficients(focal: int, layout: AgentLayout, others: AllocationProfile,
                       params: PhysicalParams) -> FocalCoefficients:
    """Coefficients of ``focal``'s subproblem; its own row in ``others`` is ignored."""
    rows = _rows(others)
    return coefficients_from_gains(focal, link_gains(layout, params), rows, params.sigma)


def _rows(alloc):
    return np.asarray(getattr(alloc, "vectors", alloc), dtype=float).tolist()


def _objective(x0, x1, x2, coeffs, scheme) -> float:
    a, b, c, d, e = coeffs
    return scheme.ber(a * x0) - scheme.ber(b / (c + x1)) - scheme.ber(d / (e + x2))


def focal_payoff(focal: int, x: Sequence[float], coeffs: FocalCoefficients, scheme) -> float:
    """Objective minimised by ``focal``.

    For team A this is the agent's share of the team payoff (its mate's BER
    minus the two opposing BERs); for team B it is the negation of the
    maximand, which has the same normal form.
    """
    check_simplex(x)
    return _objective(x[0], x[1], x[2], coeffs, scheme)


def team_payoff(layout: AgentLayout, alloc, params: PhysicalParams, scheme) -> float:
    """Instantaneous payoff ``L``: team A's total BER minus team B's."""
    s = sinr_from_gains(link_gains(layout, params), _checked_rows(alloc), params.sigma)
    return scheme.ber(s[0]) + scheme.ber(s[1]) - scheme.ber(s[2]) - scheme.ber(s[3])


def _checked_rows(alloc):
    rows = _rows(alloc)
    for row in rows:
        check_simplex(row)
    return rows


def power_monotonicity_check(focal: int, layout: AgentLayout, alloc, params: PhysicalParams,
                             scheme, power_grid: Sequence[float]) -> bool:
    """Whether ``focal``'s natural objective is strictly monotone in its own power.

    Team A's minimand must strictly decrease and team B's maximand strictly
    increase along ``power_grid``; the other agents stay at ``pmax``.
    """
    grid = [float(p) for p in power_grid]
    if any(p <= 0 or p > params.pmax for p in grid) or any(q <= p for p, q in zip(grid, grid[1:])):
        raise DomainError("power_grid must be strictly increasing within (0, pmax]")
    f = Agent(focal)
    rows = _checked_rows(alloc)
    o1, o2 = f.opponents
    values = []
    for p in grid:
        powers = [params.pmax] * 4
        powers[f] = p
        s = sinr_from_gains(link_gains(layout, params, powers), rows, params.sigma)
        minimand = scheme.ber(s[f.mate]) - scheme.ber(s[o1]) - scheme.ber(s[o2])
        values.append(minimand if f.team == "a" else -minimand)
    pairs = list(zip(values, values[1:]))
    if f.team == "a":
        return all(v1 < v0 for v0, v1 in pairs)
    return all(v1 > v0 for v0, v1 in pairs)


def hessian_diag(x: Sequence[float], coeffs: FocalCoefficients, scheme) -> tuple[float, float, float]:
    """Diagonal of the focal objective's Hessian (off-diagonal entries vanish)."""
    a, b, c, d, e = coeffs
    s0 = a * x[0]
    s1 = b / (c + x[1])
    s2 = d / (e + x[2])
    if min(s0, s1, s2) <= 0:
        raise SingularityError("Hessian is unbounded where an affected SINR is zero")
    u1, u2 = c + x[1], e + x[2]
    h0 = a * a * scheme.ber_second(s0)
    h1 = -b * b / u1 ** 4 * (scheme.ber_second(s1) + 2.0 / b * u1 * scheme.ber_prime(s1))
    h2 = -d * d / u2 ** 4 * (scheme.ber_second(s2) + 2.0 / d * u2 * scheme.ber_prime(s2))
    return h0, h1, h2


def _jam_condition(num, off, x, scheme) -> bool:
    # g''(s) + (2/num)(off + x) g'(s) < 0; holds in the limit when num = 0,
    # since the jammed link then carries no signal to protect.
    if num == 0:
        return True
    s = num / (off + x)
    return scheme.ber_second(s) + 2.0 / num * (off + x) * scheme.ber_prime(s) < 0


def _mate_condition(a, x0, scheme) -> bool:
    s = a * x0
    if s <= 0:
        return True  # g'' -> +inf as s -> 0+
    return scheme.ber_second(s) > 0


def player_conditions(x: Sequence[float], coeffs: FocalCoefficients, scheme) -> tuple[bool, bool, bool]:
    """The three convexity conditions of one player at allocation ``x``."""
    a, b, c, d, e = coeffs
    return (_mate_condition(a, x[0], scheme),
            _jam_condition(b, c, x[1], scheme),
            _jam_condition(d, e, x[2], scheme))


def subproblem_convex(coeffs: FocalCoefficients, scheme) -> bool:
    """Whether the conditions hold over the whole simplex.

    The jamming conditions are checked at both ends of ``[0, 1]``; for
    M-QAM they reduce to ``b / (c + x) < 3 / beta`` so ``x = 0`` binds.
    """
    a, b, c, d, e = coeffs
    return (_mate_condition(a, 1.0, scheme)
            and all(_jam_condition(b, c, t, scheme) and _jam_condition(d, e, t, scheme)
                    for t in (0.0, 1.0)))


def mqam_sufficient_condition(layout: AgentLayout, params: PhysicalParams) -> CertificationCheck:
    """Physical-layer sufficient condition for a unique pure equilibrium.

    Team A's subproblems need ``beta rho_b pmax d_B**-alpha < 3 sigma`` (the
    jammed links are team B's, in team B's band) and team B's the mirror
    image; the larger of the two left-hand sides is reported.
    """
    lhs = max(team_wise_lhs(layout, params))
    rhs = 3.0 * params.sigma
    return CertificationCheck(lhs < rhs, lhs, rhs)


def team_wise_lhs(layout: AgentLayout, params: PhysicalParams) -> tuple[float, float]:
    """Left-hand sides guarding team A's and team B's subproblems respectively."""
    beta = MqamScheme(params.modulation_size).beta
    d_a = layout.distance(Agent.A1, Agent.A2)
    d_b = layout.distance(Agent.B1, Agent.B2)
    lhs_for_a = beta * params.rho_b * params.pmax * d_b ** (-params.alpha)
    lhs_for_b = beta * params.rho_a * params.pmax * d_a ** (-params.alpha)
    return lhs_for_a, lhs_for_b


def convexity_conditions(profile: AllocationProfile, layout: AgentLayout, params: PhysicalParams,
                         scheme) -> PsneReport:
    """Evaluate every player's convexity conditions at ``profile``."""
    gains = link_gains(layout, params)
    rows = _checked_rows(profile)
    return _report(gains, rows, layout, params, scheme)


def _report(gains, rows, layout, params, scheme, converged=True, iterations=0, changes=()):
    oks = []
    for f in AGENTS:
        coeffs = coefficients_from_gains(f, gains, rows, params.sigma)
        oks.append(all(player_conditions(rows[f], coeffs, scheme)))
    ok, lhs, rhs = mqam_sufficient_condition(layout, params)
    return PsneReport(tuple(oks), ok, lhs, rhs, converged, iterations, tuple(changes))


# ---------------------------------------------------------------------------
# best response by KKT case enumeration
# ---------------------------------------------------------------------------

class _Pieces:
    """First and second derivatives of the three separable objective pieces."""

    __slots__ = ("a", "b", "c", "d", "e", "g", "gp", "gpp")

    def __init__(self, coeffs, scheme):
        self.a, self.b, self.c, self.d, self.e = coeffs
        self.g = scheme.ber
        self.gp = scheme.ber_prime
        self.gpp = scheme.ber_second

    def value(self, x0, x1, x2):
        return self.g(self.a * x0) - self.g(self.b / (self.c + x1)) - self.g(self.d / (self.e + x2))

    def d0(self, x0):
        if self.a == 0:
            return 0.0
        if x0 <= 0:
            return -_INF
        return self.a * self.gp(self.a * x0)

    def _djam(self, num, off, x):
        if num == 0:
            return 0.0
        u = off + x
        return num * self.gp(num / u) / (u * u)

    def d1(self, x1):
        return self._djam(self.b, self.c, x1)

    def d2(self, x2):
        return self._djam(self.d, self.e, x2)

    def h0(self, x0):
        if self.a == 0:
            return 0.0
        return self.a * self.a * self.gpp(self.a * x0)

    def _hjam(self, num, off, x):
        if num == 0:
            return 0.0
        u = off + x
        s = num / u
        return -(num * num / u ** 4 * self.gpp(s) + 2.0 * num / u ** 3 * self.gp(s))

    def h1(self, x1):
        return self._hjam(self.b, self.c, x1)

    def h2(self, x2):
        return self._hjam(self.d, self.e, x2)

    def grad(self, x):
        return (self.d0(x[0]), self.d1(x[1]), self.d2(x[2]))


def _bisect_edge(hprime: Callable[[float], float], tol: float, max_iter: int) -> float:
    """Minimiser over ``t in [0, 1]`` of a function with increasing derivative ``hprime``."""
    if hprime(0.0) >= 0:
        return 0.0
    if hprime(1.0) <= 0:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hprime(mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= tol:
            return 0.5 * (lo + hi)
    raise ConvergenceError("edge bisection did not reach its bracket tolerance",
                           bracket=(lo, hi), tol=tol, max_iter=max_iter)


def _kkt_holds(x, grad) -> bool:
    """First-order optimality of a boundary point on the simplex."""
    support = [i for i in range(3) if x[i] > 0]
    mu = sum(grad[i] for i in support) / len(support)
    return all(grad[k] >= mu for k in range(3) if x[k] == 0)


def _newton_interior(p: _Pieces, start, opts: SolverOptions):
    """Damped Newton on the two gradient-equality equations.

    Returns the interior stationary point, or None if Newton left the
    simplex, met a non-convex Hessian or stalled.
    """
    x1, x2 = start
    for _ in range(opts.newton_max_iter):
        x0 = 1.0 - x1 - x2
        g0, g1, g2 = p.d0(x0), p.d1(x1), p.d2(x2)
        r1, r2 = g1 - g0, g2 - g0
        scale = max(abs(g0), abs(g1), abs(g2), 1e-300)
        if max(abs(r1), abs(r2)) <= 1e-13 * scale:
            return x0, x1, x2
        h0, h1, h2 = p.h0(x0), p.h1(x1), p.h2(x2)
        j11, j12, j22 = h0 + h1, h0, h0 + h2
        det = j11 * j22 - j12 * j12
        if not (j11 > 0 and det > 0):
            return None
        s1 = -(j22 * r1 - j12 * r2) / det
        s2 = -(j11 * r2 - j12 * r1) / det
        if max(abs(s1), abs(s2)) <= 1e-16:
            return x0, x1, x2
        f_old = p.value(x0, x1, x2)
        slope = r1 * s1 + r2 * s2
        res_old = max(abs(r1), abs(r2))
        t = 1.0
        for _ in range(60):
            n1, n2 = x1 + t * s1, x2 + t * s2
            n0 = 1.0 - n1 - n2
            if n0 > 0 and n1 > 0 and n2 > 0:
                f_new = p.value(n0, n1, n2)
                if f_new <= f_old + 1e-4 * t * slope:
                    break
                g0n = p.d0(n0)
                if max(abs(p.d1(n1) - g0n), abs(p.d2(n2) - g0n)) < res_old:
                    break
            t *= 0.5
        else:
            return None
        x1, x2 = n1, n2
    return None


def _project_simplex(v):
    u = sorted(v, reverse=True)
    css = 0.0
    theta = 0.0
    for i, ui in enumerate(u, start=1):
        css += ui
        t = (css - 1.0) / i
        if ui - t > 0:
            theta = t
    w = [max(vi - theta, 0.0) for vi in v]
    w[0] = max(1.0 - w[1] - w[2], 0.0)
    total = w[0] + w[1] + w[2]
    return [wi / total for wi in w]


def _projected_gradient(p: _Pieces, start, opts: SolverOptions):
    x = list(start)
    f = p.value(*x)
    step = 1.0
    for _ in range(opts.pgd_max_iter):
        grad = (p.d0(max(x[0], 1e-15)), p.d1(x[1]), p.d2(x[2]))
        accepted = False
        for _ in range(60):
            y = _project_simplex([xi - step * gi for xi, gi in zip(x, grad)])
            fy = p.value(*y)
            decrease = sum(gi * (xi - yi) for gi, xi, yi in zip(grad, x, y))
            if fy <= f - 1e-4 * decrease:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            return x
        moved = max(abs(yi - xi) for xi, yi in zip(x, y))
        x, f = y, fy
        if moved < 1e-15:
            return x
        step *= 2.0
    return x


def best_response(focal: int, coeffs: FocalCoefficients, scheme, opts: SolverOptions | None = None,
                  start: Sequence[float] | None = None) -> BestResponse:
    """Minimiser of ``focal``'s normal-form objective over the simplex.

    ``start`` seeds the interior Newton solve and is typically the agent's
    current allocation.  When the convexity conditions fail the best
    candidate is still returned, with ``certified=False``.
    """
    opts = opts or SolverOptions()
    p = _Pieces(coeffs, scheme)
    certified = subproblem_convex(coeffs, scheme)
    tol, it = opts.bisect_tol, opts.max_iter

    candidates = [
        ("vertex-comm", (1.0, 0.0, 0.0)),
        ("vertex-jam1", (0.0, 1.0, 0.0)),
        ("vertex-jam2", (0.0, 0.0, 1.0)),
    ]
    t = _bisect_edge(lambda t: p.d1(t) - p.d2(1.0 - t), tol, it)
    candidates.append(("edge-no-comm", (0.0, t, 1.0 - t)))
    t = _bisect_edge(lambda t: p.d2(t) - p.d0(1.0 - t), tol, it)
    candidates.append(("edge-no-jam1", (1.0 - t, 0.0, t)))
    t = _bisect_edge(lambda t: p.d1(t) - p.d0(1.0 - t), tol, it)
    candidates.append(("edge-no-jam2", (1.0 - t, t, 0.0)))

    scored = [(p.value(*x), name, x) for name, x in candidates]
    value, name, x = min(scored, key=lambda item: item[0])

    # Under strict convexity a boundary KKT point is the unique minimiser and
    # the interior system has no solution, so Newton is not attempted.
    if not (certified and _kkt_holds(x, p.grad(x))):
        if start is not None and min(start) > 1e-9:
            seed = (start[1], start[2])
        else:
            seed = (1.0 / 3.0, 1.0 / 3.0)
        interior = _newton_interior(p, seed, opts)
        if interior is None:
            interior = tuple(_projected_gradient(p, (1.0 - seed[0] - seed[1], *seed), opts))
            label = "interior-pgd"
        else:
            label = "interior"
        v = p.value(*interior)
        # PGD is only accurate to its step size; it must beat the exactly
        # solved boundary candidates by more than rounding noise.
        margin = 1e-14 * max(1.0, abs(value)) if label == "interior-pgd" else 0.0
        if v < value - margin:
            value, name, x = v, label, interior
    return BestResponse(tuple(float(xi) for xi in x), value, certified, name)


# ---------------------------------------------------------------------------
# equilibrium
# ---------------------------------------------------------------------------

def nash_solve(layout: AgentLayout, params: PhysicalParams, scheme, init: AllocationProfile | None = None,
               opts: SolverOptions | None = None,
               callback: Callable[[int, Agent, AllocationProfile], None] | None = None,
               ) -> tuple[AllocationProfile, PsneReport]:
    """Gauss-Seidel best-response iteration in the order A1, A2, B1, B2.

    Converges when a full sweep moves the profile by less than ``opts.tol``
    in the infinity norm.  ``callback(sweep, agent, profile)`` runs after
    every individual update.
    """
    opts = opts or SolverOptions()
    init = init or AllocationProfile.uniform()
    gains = link_gains(layout, params)
    sigma = params.sigma
    rows = init.vectors.tolist()
    omega = opts.relaxation
    changes = []
    converged = False
    for sweep in range(1, opts.max_sweeps + 1):
        delta = 0.0
        for f in AGENTS:
            coeffs = coefficients_from_gains(f, gains, rows, sigma)
            new = best_response(f, coeffs, scheme, opts, start=rows[f]).x
            if omega != 1.0:
                old = rows[f]
                new = [(1.0 - omega) * o + omega * n for o, n in zip(old, new)]
                new[2] = 1.0 - new[0] - new[1]
            delta = max(delta, *(abs(n - o) for n, o in zip(new, rows[f])))
            rows[f] = list(new)
            if callback is not None:
                callback(sweep, f, AllocationProfile(rows))
        changes.append(delta)
        if delta < opts.tol:
            converged = True
            break
    profile = AllocationProfile(rows)
    if not converged and opts.raise_on_failure:
        raise NashConvergenceError(
            f"best-response iteration did not converge in {opts.max_sweeps} sweeps "
            f"(last change {changes[-1]:.3e})", profile, changes)
    report = _report(gains, rows, layout, params, scheme, converged, len(changes), changes)
    return profile, report


def verify_nash(profile: AllocationProfile, layout: AgentLayout, params: PhysicalParams, scheme,
                n_samples: int = 1000, tol: float = 1e-9, seed: int = 0) -> bool:
    """Check that no sampled unilateral deviation improves any player by more than ``tol``."""
    if n_samples <= 0:
        return True
    rng = np.random.default_rng(seed)
    gains = link_gains(layout, params)
    rows = _checked_rows(profile)
    for f in AGENTS:
        coeffs = coefficients_from_gains(f, gains, rows, params.sigma)
        current = _objective(*rows[f], coeffs, scheme)
        for x in _dirichlet_rows(rng, n_samples).tolist():
            if _objective(*x, coeffs, scheme) < current - tol:
                return False
    return True
