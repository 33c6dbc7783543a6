"""
Physical-layer arithmetic for the four-agent jamming game.

Agents are indexed A1, A2, B1, B2.  Each agent transmits to its team-mate
and jams the two opposing agents, so every agent is also a receiver whose
SINR depends on its mate's communication fraction and on the jamming
fractions the opposing team aims at it.

A link gain ``G[i][j] = P_i * rho_j * d(i, j)**-alpha`` is the received
power at ``j`` from a full-power transmission by ``i``.  The path factor
``rho_j`` always uses the *receiver's* band: jammers are assumed to tune to
their victim's carrier.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

import numpy as np

from .errors import DomainError

#: Distances below this are clamped before the d**-alpha power law.
D_MIN = 1e-3

#: Speed of light used when converting carrier frequencies to wavelengths.
SPEED_OF_LIGHT = 2.998e8

MODULATION_SIZES = (2, 4, 16, 64, 256)


class DistanceClampWarning(RuntimeWarning):
    """Two agents came closer than :data:`D_MIN`; the distance was clamped."""


class Agent(IntEnum):
    A1 = 0
    A2 = 1
    B1 = 2
    B2 = 3

    @property
    def team(self) -> str:
        return "a" if self < 2 else "b"

    @property
    def slot(self) -> int:
        """Index of the agent within its own team (0 or 1)."""
        return int(self) % 2

    @property
    def mate(self) -> "Agent":
        return Agent(int(self) ^ 1)

    @property
    def opponents(self) -> tuple["Agent", "Agent"]:
        base = 2 if self < 2 else 0
        return Agent(base), Agent(base + 1)

    @property
    def label(self) -> str:
        return self.name.lower()


AGENTS = tuple(Agent)


def wavelength(frequency: float) -> float:
    """Free-space wavelength in meters for a carrier frequency in Hz."""
    if frequency <= 0:
        raise DomainError(f"frequency must be positive, got {frequency}")
    return SPEED_OF_LIGHT / frequency


def rho(gt: float, gr: float, lam: float) -> float:
    """Free-space path factor ``gt * gr * lam**2 / (4 pi)**2``."""
    if gt <= 0 or gr <= 0 or lam <= 0:
        raise DomainError(f"rho needs positive gains and wavelength, got {(gt, gr, lam)}")
    return gt * gr * lam * lam / (4.0 * math.pi) ** 2


def clamp_distance(d: float) -> tuple[float, bool]:
    """Return ``(max(d, D_MIN), clamped)``."""
    if d < D_MIN:
        return D_MIN, True
    return d, False


def received_power(pt: float, rho_: float, d: float, alpha: float) -> float:
    """Received power ``rho * pt * d**-alpha`` with the distance clamped at D_MIN."""
    if pt < 0:
        raise DomainError(f"transmit power must be nonnegative, got {pt}")
    if rho_ <= 0:
        raise DomainError(f"rho must be positive, got {rho_}")
    d, clamped = clamp_distance(d)
    if clamped:
        warnings.warn(f"distance clamped to {D_MIN} m", DistanceClampWarning, stacklevel=2)
    return rho_ * pt * d ** (-alpha)


@dataclass(frozen=True)
class PhysicalParams:
    """Radio and energy constants shared by all four agents.

    ``lambda_a`` and ``lambda_b`` are the wavelengths of team A's and team
    B's communication bands.
    """

    pmax: float = 100.0
    energy: float = 1000.0
    sigma: float = 0.01
    alpha: float = 2.0
    gt: float = 1.0
    gr: float = 1.0
    lambda_a: float = SPEED_OF_LIGHT / 300e6
    lambda_b: float = SPEED_OF_LIGHT / 100e6
    modulation_size: int = 2

    def __post_init__(self):
        for name in ("pmax", "energy", "sigma", "alpha", "gt", "gr", "lambda_a", "lambda_b"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive and finite, got {value}")
        # lambda_a == lambda_b is accepted: mirror-symmetry studies need it and
        # the model has no cross-team eavesdropping term that would break.
        if self.modulation_size not in MODULATION_SIZES:
            raise DomainError(f"M must be in {{2,4,16,64,256}}, got {self.modulation_size}")

    @classmethod
    def from_frequencies(cls, freq_a: float, freq_b: float, **kwargs) -> "PhysicalParams":
        return cls(lambda_a=wavelength(freq_a), lambda_b=wavelength(freq_b), **kwargs)

    @property
    def rho_a(self) -> float:
        return rho(self.gt, self.gr, self.lambda_a)

    @property
    def rho_b(self) -> float:
        return rho(self.gt, self.gr, self.lambda_b)

    def rho_for(self, receiver: Agent) -> float:
        return self.rho_a if Agent(receiver).team == "a" else self.rho_b


@dataclass(frozen=True, eq=False)
class AgentLayout:
    """Planar positions, headings and speeds of A1, A2, B1, B2 (in that order)."""

    positions: np.ndarray
    headings: np.ndarray
    speeds: np.ndarray

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(4, 2)
        hdg = np.array(self.headings, dtype=float).reshape(4)
        spd = np.array(self.speeds, dtype=float).reshape(4)
        if np.any(spd < 0):
            raise DomainError("speeds must be nonnegative")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(hdg)) and np.all(np.isfinite(spd))):
            raise DomainError("layout contains non-finite values")
        for arr in (pos, hdg, spd):
            arr.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "headings", hdg)
        object.__setattr__(self, "speeds", spd)

    @classmethod
    def from_points(cls, points: Sequence[Sequence[float]], headings=None, speeds=None) -> "AgentLayout":
        headings = np.zeros(4) if headings is None else headings
        speeds = np.zeros(4) if speeds is None else speeds
        return cls(np.asarray(points, dtype=float), headings, speeds)

    def replace(self, positions=None, headings=None, speeds=None) -> "AgentLayout":
        return AgentLayout(
            self.positions if positions is None else positions,
            self.headings if headings is None else headings,
            self.speeds if speeds is None else speeds,
        )

    def raw_distance(self, i: int, j: int) -> float:
        dx = self.positions[i, 0] - self.positions[j, 0]
        dy = self.positions[i, 1] - self.positions[j, 1]
        return math.hypot(dx, dy)

    def distance(self, i: int, j: int) -> float:
        """Clamped distance between agents ``i`` and ``j`` (symmetric by construction)."""
        if int(i) > int(j):
            i, j = j, i
        d, clamped = clamp_distance(self.raw_distance(i, j))
        if clamped and i != j:
            warnings.warn(f"agents {Agent(i).name} and {Agent(j).name} closer than {D_MIN} m",
                          DistanceClampWarning, stacklevel=2)
        return d

    def min_distance(self) -> float:
        return min(self.raw_distance(i, j) for i in range(4) for j in range(i + 1, 4))


@dataclass(frozen=True)
class SinrState:
    """SINR received by each agent from its team-mate."""

    s_a1: float
    s_a2: float
    s_b1: float
    s_b2: float

    def __getitem__(self, agent: int) -> float:
        return (self.s_a1, self.s_a2, self.s_b1, self.s_b2)[int(agent)]

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.s_a1, self.s_a2, self.s_b1, self.s_b2)


def link_gains(layout: AgentLayout, params: PhysicalParams, powers=None) -> list[list[float]]:
    """Matrix ``G[i][j]`` of received power at ``j`` from a full-power send by ``i``.

    ``powers`` overrides the per-agent transmit power (default ``pmax`` for
    everyone).  The diagonal is zero.
    """
    if powers is None:
        powers = (params.pmax,) * 4
    rhos = (params.rho_a, params.rho_a, params.rho_b, params.rho_b)
    alpha = params.alpha
    gains = [[0.0] * 4 for _ in range(4)]
    for i in range(4):
        for j in range(i + 1, 4):
            dpow = layout.distance(i, j) ** (-alpha)
            gains[i][j] = powers[i] * rhos[j] * dpow
            gains[j][i] = powers[j] * rhos[i] * dpow
    return gains


def _check_vectors(vectors) -> None:
    for row in vectors:
        if min(row) < 0 or abs(sum(row) - 1.0) > 1e-12:
            raise DomainError(f"allocation {tuple(row)} is not on the simplex")


def sinr_from_gains(gains, vectors, sigma: float) -> tuple[float, float, float, float]:
    """SINR at each receiver given link gains and the 4x3 allocation rows."""
    out = []
    for r in AGENTS:
        m = r.mate
        k = 1 + r.slot
        o1, o2 = r.opponents
        interference = gains[o1][r] * vectors[o1][k] + gains[o2][r] * vectors[o2][k]
        out.append(gains[m][r] * vectors[m][0] / (sigma + interference))
    return tuple(out)


def sinr_all(layout: AgentLayout, alloc, params: PhysicalParams) -> SinrState:
    """The four link SINRs with every agent transmitting at ``pmax``.

    ``alloc`` is an :class:`~teamjam.allocation.AllocationProfile` or any
    4x3 array-like of simplex rows.
    """
    vectors = np.asarray(getattr(alloc, "vectors", alloc), dtype=float).tolist()
    _check_vectors(vectors)
    return SinrState(*sinr_from_gains(link_gains(layout, params), vectors, params.sigma))
