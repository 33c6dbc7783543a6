"""
Uncoded Gray-coded M-QAM bit error rate used as the per-link cost g(s).

The approximation ``g(s) = zeta / log2(M) * Q(sqrt(beta * s))`` is used as a
smooth cost surrogate and is never clamped to 0.5; at s = 0 with M = 2 it
evaluates to about 0.586.

Any object exposing ``ber``, ``ber_prime`` and ``ber_second`` with the same
signatures can stand in for :class:`MqamScheme` in the allocation solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

from .errors import DomainError, SingularityError

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


def q_function(x: float) -> float:
    """Standard Gaussian tail probability via ``erfc`` (accurate far into the tail)."""
    return 0.5 * math.erfc(x / _SQRT2)


@dataclass(frozen=True)
class MqamScheme:
    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise DomainError(f"constellation size must be an integer >= 2, got {self.m}")

    @cached_property
    def zeta(self) -> float:
        return 4.0 * (1.0 - 1.0 / math.sqrt(self.m))

    @cached_property
    def beta(self) -> float:
        return 3.0 / (self.m - 1)

    @cached_property
    def bits(self) -> float:
        return math.log2(self.m)

    def ber(self, s: float) -> float:
        if s < 0:
            raise DomainError(f"SINR must be nonnegative, got {s}")
        return self.zeta / self.bits * q_function(math.sqrt(self.beta * s))

    @cached_property
    def _slope(self) -> float:
        # zeta sqrt(beta) / (2 log2(M) sqrt(2 pi)), the common prefactor of g' and g''
        return self.zeta * math.sqrt(self.beta) / (2.0 * self.bits * _SQRT2PI)

    def ber_prime(self, s: float) -> float:
        """First derivative of :meth:`ber`; strictly negative, unbounded as s -> 0+."""
        if s <= 0:
            raise SingularityError(f"g'(s) is unbounded at s = {s}")
        return -self._slope / math.sqrt(s) * math.exp(-0.5 * self.beta * s)

    def ber_second(self, s: float) -> float:
        """Second derivative of :meth:`ber`; strictly positive on s > 0."""
        if s <= 0:
            raise SingularityError(f"g''(s) is unbounded at s = {s}")
        beta = self.beta
        return (0.5 * self._slope * (1.0 + beta * s) / (s * math.sqrt(s))
                * math.exp(-0.5 * beta * s))
