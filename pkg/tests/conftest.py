import math

import numpy as np
import pytest

from teamjam.allocation import AllocationProfile, mqam_sufficient_condition
from teamjam.channel import MODULATION_SIZES, SPEED_OF_LIGHT, AgentLayout, PhysicalParams
from teamjam.modulation import MqamScheme


def random_instance(rng, box=60.0, min_sep=1.0):
    """Random geometry, radio constants and allocation profile."""
    while True:
        pos = rng.uniform(0.0, box, size=(4, 2))
        if min(np.hypot(*(pos[i] - pos[j])) for i in range(4) for j in range(i + 1, 4)) >= min_sep:
            break
    params = PhysicalParams(
        pmax=float(rng.uniform(10, 200)),
        energy=float(rng.uniform(100, 2000)),
        sigma=float(10 ** rng.uniform(-3, -1)),
        alpha=float(rng.uniform(2, 4)),
        lambda_a=SPEED_OF_LIGHT / float(rng.uniform(50e6, 1e9)),
        lambda_b=SPEED_OF_LIGHT / float(rng.uniform(50e6, 1e9)),
        modulation_size=int(rng.choice(MODULATION_SIZES)),
    )
    headings = rng.uniform(-math.pi, math.pi, 4)
    layout = AgentLayout(pos, headings, np.ones(4))
    return layout, params, MqamScheme(params.modulation_size), AllocationProfile.random(rng)


def certified_instance(rng):
    """Random instance built to satisfy the sufficient condition.

    Each team's intra-pair distance is set just beyond the certification
    threshold, and the opponents are dropped near the pair, so all KKT cases
    (vertices, edges, interior) occur with useful frequency.
    """
    while True:
        layout, params, scheme, profile = random_instance(rng)
        beta = scheme.beta
        # distance at which beta * rho * pmax * d**-alpha = 3 sigma, times a margin > 1
        d_a = (beta * params.rho_b * params.pmax / (3 * params.sigma)) ** (1 / params.alpha)
        d_b = (beta * params.rho_a * params.pmax / (3 * params.sigma)) ** (1 / params.alpha)
        d_for_b_team = max(d_a * rng.uniform(1.01, 2.0), 1.0)
        d_for_a_team = max(d_b * rng.uniform(1.01, 2.0), 1.0)
        pos = np.zeros((4, 2))
        th = rng.uniform(0, 2 * math.pi, 2)
        pos[1] = d_for_a_team * np.array([math.cos(th[0]), math.sin(th[0])])
        centre = pos[:2].mean(axis=0) + rng.normal(0.0, 0.5 * d_for_a_team, 2)
        pos[2] = centre
        pos[3] = centre + d_for_b_team * np.array([math.cos(th[1]), math.sin(th[1])])
        if min(np.hypot(*(pos[i] - pos[j])) for i in range(4) for j in range(i + 1, 4)) < 1e-2:
            continue
        layout = layout.replace(positions=pos)
        if mqam_sufficient_condition(layout, params).ok:
            return layout, params, scheme, profile


def certified_instances(rng, count):
    return [certified_instance(rng) for _ in range(count)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance results, printed once at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, text = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {n:2d}: {text}")
