"""Quasi-conditional expectation of a conjugated-diagonal field on Z2.

Builds E for an inner region {0} inside its closure plus two outer cells,
then prints the unitality, Choi spectrum and module-property checks.

    python3 demos/z2_choi_spectrum.py
"""

import numpy as np

from qmfield.amplitudes import build_family
from qmfield.graph_topology import GraphWindow, build_tessellation
from qmfield.markov_field import random_descriptor, verify_quasi_cond_expectation
from qmfield.operator_algebra import ProductState, SiteModel

if __name__ == "__main__":
    w = GraphWindow.lattice(2, 5)
    spec = {"mode": "conjugated", "unitary": "hadamard", "table": [1, 0.5, 2, 1.5]}
    f = build_family(build_tessellation(w), spec, SiteModel(w), ProductState())
    d = random_descriptor(f, np.random.default_rng(1), inner_size=1, extra=2)
    print("inner:", sorted(d.inner), " traced centers:", list(d.amplitude.centers))
    for r in verify_quasi_cond_expectation(d, seed=1):
        extra = ""
        if r.check == "qce_complete_positivity":
            extra = f"  (min eigenvalue {r.witness['min_eigenvalue']:.2e}, dim {r.witness['choi_dim']})"
        print(f"{r.check:<26} residual {r.residual:.2e}  {'PASS' if r.passed else 'FAIL'}{extra}")
