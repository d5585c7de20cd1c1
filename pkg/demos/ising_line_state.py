"""Finite-volume states of an Ising-type field on the integer line.

Evaluates <Z_0> on growing regions. Every region that holds the center 0
gives the same value. Each value is also compared with a brute-force
classical sum.

    python3 demos/ising_line_state.py
"""

import numpy as np

from qmfield.amplitudes import build_family
from qmfield.graph_topology import GraphWindow, build_tessellation
from qmfield.markov_field import classical_oracle_compare, finite_volume_state
from qmfield.operator_algebra import ProductState, SiteModel

if __name__ == "__main__":
    w = GraphWindow.lattice(1, 12)
    sites = SiteModel(w)
    state = ProductState({i: np.diag([0.6, 0.4]) for i in range(len(w.vertices))})
    f = build_family(build_tessellation(w), {"mode": "ising", "J": 0.7, "h": 0.2}, sites, state)
    z = sites.operator([(0,)], np.diag([1.0, -1.0]))
    print(" region       phi(Z_0)            oracle delta")
    for r in range(0, 6):
        region = [(i,) for i in range(-r, r + 1)]
        value = finite_volume_state(f, region, z)
        delta = classical_oracle_compare(f, region, z).residual
        print(f" [-{r}, {r}]    {value.real:.15f}   {delta:.1e}")
