"""Brute-force classical evaluation of finite-volume states.

When every edge amplitude and every site density is diagonal, the state
``phi0(K^* g K)`` of a diagonal observable ``g`` is a plain sum over
configurations.  This module computes that sum with scalar arithmetic only,
straight from the edge tables, so it shares no code with the operator path.
"""

from __future__ import annotations

import itertools
import math


def classical_expectation(centers, neighbors, edge_value, probabilities, observable,
                          observable_sites=()):
    """Sum over configurations of ``prod_x p_x(s_x) |K(s)|^2 g(s)``.

    Parameters
    ----------
    centers : sequence
        Tessellation centers inside the region.
    neighbors : dict
        ``y -> list of x`` for each center.
    edge_value : callable
        ``edge_value(y, x, s_x, s_y)`` -> complex amplitude entry.
    probabilities : dict
        ``site -> sequence of probabilities`` (diagonal of the site density).
    observable : callable
        ``observable(config) -> value`` where ``config`` maps site -> state.
    observable_sites : sequence
        Sites the observable depends on.
    """
    sites = set(observable_sites)
    for y in centers:
        sites.add(y)
        sites.update(neighbors[y])
    sites = sorted(sites, key=repr)
    ranges = [range(len(probabilities[s])) for s in sites]

    def local_b(y, config):
        total = 0.0
        for t, p in enumerate(probabilities[y]):
            term = p
            for x in neighbors[y]:
                term *= abs(edge_value(y, x, config[x], t)) ** 2
            total += term
        return total

    value = 0.0
    for states in itertools.product(*ranges):
        config = dict(zip(sites, states))
        weight = 1.0
        for s in sites:
            weight *= probabilities[s][config[s]]
        if weight == 0.0:
            continue
        amp2 = 1.0
        for y in centers:
            k = 1.0
            for x in neighbors[y]:
                k *= abs(edge_value(y, x, config[x], config[y])) ** 2
            amp2 *= k / local_b(y, config)
        value += weight * amp2 * observable(config)
    return value


def configuration_count(centers, neighbors, dims, observable_sites=()) -> int:
    sites = set(observable_sites)
    for y in centers:
        sites.add(y)
        sites.update(neighbors[y])
    return math.prod(dims[s] for s in sites)
