"""Quantum Markov fields on tessellated graphs.

Subpackages:

- ``graph_topology``: graph windows, region calculus and the tessellation
- ``operator_algebra``: local operators, product states and partial traces
- ``amplitudes``: edge, plaquette and region amplitudes
- ``markov_field``: finite-volume states, quasi-conditional expectations
  and the verification checks
- ``cli``: the ``qmf`` command line
"""

__version__ = "0.1.0"
