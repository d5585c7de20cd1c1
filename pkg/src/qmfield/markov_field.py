"""Finite-volume states, quasi-conditional expectations and their checks.

The finite-volume state of a region ``L`` is ``phi_L(a) = phi0(K_L^* a K_L)``
with ``K_L`` the region amplitude.  For ``closure(L1) ⊆ L2`` the map

    E_{L1,L2}(a) = E_S(K_S^* a K_S),     S = L2 \\ closure(L1),

traces out ``S`` after conjugating by the amplitude of ``S``.  Every
``*_check`` / ``*_probe`` function returns :class:`VerificationReport`
records holding the measured residual, so failures come with a witness
instead of an exception.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from functools import wraps
from typing import Iterable, Sequence

import numpy as np

from .amplitudes import (
    AmplitudeFamily,
    RegionAmplitude,
    plaquette_normalization_residual,
    region_normalization_residual,
)
from .graph_topology import closure, external_boundary
from .operator_algebra import (
    WORKING_DIM_CAP,
    LocalOperator,
    dense_sandwich_trace,
    embed,
    identity,
    max_abs_diff,
    multiply,
    product,
    random_operator,
    sandwich_trace,
)
from .oracle import classical_expectation
from .reports import VerificationReport

TOL_STATE = 1e-9
TOL_UNITAL = 1e-10
TOL_CP = 1e-9
TOL_MODULE = 1e-10
TOL_STATIONARY = 1e-9
TOL_PROJECTIVE = 1e-8
TOL_LOCALIZATION = 1e-9
TOL_FACTORIZATION = 1e-10
TOL_ORACLE = 1e-9
TOL_NORMALIZATION = 1e-9
CHOI_DIM_CAP = 2 ** 11
CHOI_FULL_CAP = 2 ** 10
DENSE_AUTO_CAP = 2 ** 10


class PreconditionError(ValueError):
    pass


class SequenceConditionError(PreconditionError):
    def __init__(self, message, step, vertex):
        super().__init__(message)
        self.step = step
        self.vertex = vertex


class NonDiagonalInput(PreconditionError):
    pass


def _timed(fn):
    @wraps(fn)
    def inner(*args, **kwargs):
        t0 = time.perf_counter()
        out = fn(*args, **kwargs)
        dt = time.perf_counter() - t0
        for r in (out if isinstance(out, list) else [out]):
            r.wall_time = dt
        return out
    return inner


def _labels(f: AmplitudeFamily, region) -> list:
    w = f.window
    return [w.encode(v) for v in w.sort(region)]


def _site_list(f: AmplitudeFamily, region) -> list:
    return sorted(f.site(v) for v in region)


def _route(method: str, size: int):
    if method == "auto":
        method = "dense" if size <= DENSE_AUTO_CAP else "sweep"
    return dense_sandwich_trace if method == "dense" else sandwich_trace


def _span_dim(f: AmplitudeFamily, a: LocalOperator, factors) -> int:
    dims = dict(zip(a.support, a.dims))
    for op in factors:
        dims.update(zip(op.support, op.dims))
    return int(np.prod(list(dims.values()), dtype=np.int64))


# --------------------------------------------------------------------------
# finite-volume states


def finite_volume_state(f: AmplitudeFamily, region, a: LocalOperator, method: str = "sweep",
                        certified: bool = True) -> complex:
    """``phi0(K^* a K)`` for the region amplitude ``K``."""
    if certified:
        f.require_certified()
    ra = f.region_amplitude(region)
    sites = set(a.support) | ra.sites
    fn = _route(method, _span_dim(f, a, ra.factors))
    return fn(a, ra.factors, sites, f.state).to_scalar()


def conjugated(f: AmplitudeFamily, ra: RegionAmplitude, a: LocalOperator, traced=(),
               method: str = "auto") -> LocalOperator:
    """``E_traced(K^* a K)`` for a region amplitude, kept as an operator."""
    fn = _route(method, _span_dim(f, a, ra.factors))
    return fn(a, ra.factors, traced, f.state)


# --------------------------------------------------------------------------
# quasi-conditional expectations


@dataclass(frozen=True)
class QuasiCondExpDescriptor:
    family: AmplitudeFamily
    inner: frozenset            # L1
    outer: frozenset            # L2
    inner_closure: frozenset
    trace_set: frozenset        # L2 \ closure(L1)
    amplitude: RegionAmplitude  # amplitude of the trace set
    boundary_clear: bool        # no center on the external boundary of L1

    @property
    def trace_sites(self) -> list:
        return _site_list(self.family, self.trace_set)

    def output_support(self, a: LocalOperator) -> tuple:
        traced = set(self.trace_sites)
        return tuple(sorted((set(a.support) | self.amplitude.sites) - traced))

    def lands_in_closure(self, a: LocalOperator) -> bool:
        closure_sites = set(_site_list(self.family, self.inner_closure))
        return set(self.output_support(a)) <= closure_sites


def make_descriptor(f: AmplitudeFamily, inner, outer) -> QuasiCondExpDescriptor:
    w = f.window
    inner, outer = w.region(inner), w.region(outer)
    cl = closure(w, inner)
    if not cl <= outer:
        missing = w.sort(cl - outer)
        raise PreconditionError(f"closure of the inner region is not inside the outer one "
                                f"(missing {missing[0]!r})")
    trace_set = outer - cl
    t = f.tessellation
    clear = not any(t.in_v0(v) for v in external_boundary(w, inner))
    return QuasiCondExpDescriptor(f, inner, outer, cl, trace_set,
                                  f.region_amplitude(trace_set), clear)


def quasi_cond_expectation(d: QuasiCondExpDescriptor, a: LocalOperator,
                           method: str = "sweep") -> LocalOperator:
    """``E_{L1,L2}(a)``; the result lives on :meth:`QuasiCondExpDescriptor.output_support`."""
    fn = _route(method, _span_dim(d.family, a, d.amplitude.factors))
    return fn(a, d.amplitude.factors, d.trace_sites, d.family.state)


def _matrix_units(sites, dims):
    D = int(np.prod(dims, dtype=np.int64)) if dims else 1
    for i in range(D):
        for j in range(D):
            m = np.zeros((D, D), dtype=complex)
            m[i, j] = 1.0
            yield i, j, LocalOperator(tuple(sites), tuple(dims), m)


def _out_sites(d: QuasiCondExpDescriptor, input_sites) -> tuple:
    return tuple(sorted((set(input_sites) | d.amplitude.sites) - set(d.trace_sites)))


def _dim(f: AmplitudeFamily, sites) -> int:
    return int(np.prod(f.sites.dims(sites), dtype=np.int64))


def choi_matrix(d: QuasiCondExpDescriptor, input_sites: Sequence[int]) -> tuple:
    r"""Choi matrix ``sum_ij |i><j| ⊗ E(|i><j| ⊗ id)`` of the map on ``input_sites``.

    With ``K`` the trace-set amplitude written over all sites ``A``,
    ``J[(i,R),(j,C)] = sum_{r,s,t} conj(K[(i,r),(R,s)]) K[(j,r),(C,t)] rho_S[t,s]``
    where ``r`` runs over ``A \ input``, ``R, C`` over the output sites and
    ``s, t`` over the traced ones.  Returns ``(J, out_sites)``.
    """
    f = d.family
    I = tuple(sorted(input_sites))
    ops = d.amplitude.factors
    K = product(ops) if ops else identity((), ())
    A = tuple(sorted(set(I) | set(K.support)))
    S = tuple(s for s in A if s in set(d.trace_sites))
    O = tuple(s for s in A if s not in S)
    rest = tuple(s for s in A if s not in I)
    dims = {s: f.sites.dim(s) for s in A}
    n = len(A)
    pos = {s: k for k, s in enumerate(A)}
    T = embed(K, A, dims).tensor
    T = T.transpose([pos[s] for s in I + rest] + [n + pos[s] for s in O + S])
    dI, dr, dO, dS = (_dim(f, g) for g in (I, rest, O, S))
    T = T.reshape(dI, dr, dO, dS)
    rho = np.ones((1, 1), dtype=complex)
    for s in S:
        rho = np.kron(rho, f.state.rho(s, dims[s]))
    TR = T @ rho                                         # [j, r, C, s]
    J4 = np.tensordot(T.conj(), TR, axes=([1, 3], [1, 3]))  # [i, R, j, C]
    return J4.reshape(dI * dO, dI * dO), O


def choi_matrix_by_units(d: QuasiCondExpDescriptor, input_sites: Sequence[int]) -> tuple:
    """Slow reference for :func:`choi_matrix`: applies the map to each matrix unit."""
    f = d.family
    I = tuple(sorted(input_sites))
    dims = f.sites.dims(I)
    O = _out_sites(d, I)
    out_dims = {s: f.sites.dim(s) for s in O}
    dI, dO = _dim(f, I), _dim(f, O)
    J4 = np.zeros((dI, dI, dO, dO), dtype=complex)
    for i, j, unit in _matrix_units(I, dims):
        J4[i, j] = embed(quasi_cond_expectation(d, unit), O, out_dims).matrix
    return J4.transpose(0, 2, 1, 3).reshape(dI * dO, dI * dO), O


def _choi_input_sites(d: QuasiCondExpDescriptor, cap: int) -> tuple:
    f = d.family
    outer = _site_list(f, d.outer)

    def fits(sites):
        every = set(sites) | d.amplitude.sites
        return (_dim(f, sites) * _dim(f, _out_sites(d, sites)) <= cap
                and _dim(f, every) <= WORKING_DIM_CAP)

    # The map is id on outer sites the amplitude never touches and a state
    # functional on traced sites it never touches, so positivity of the Choi
    # matrix restricted to the touched sites decides positivity of the whole.
    if fits(outer) and _dim(f, outer) * _dim(f, _out_sites(d, outer)) <= CHOI_FULL_CAP:
        return tuple(outer), "outer region"
    sites = [s for s in outer if s in d.amplitude.sites]
    if fits(sites):
        return tuple(sites), "outer sites touched by the amplitude"
    raise PreconditionError(f"Choi matrix exceeds the dimension cap {cap}")


@_timed
def verify_quasi_cond_expectation(d: QuasiCondExpDescriptor, seed: int = 0,
                                  choi_cap: int = CHOI_DIM_CAP) -> list:
    """Run the unitality, Choi positivity and module-property checks on one descriptor."""
    f = d.family
    rng = np.random.default_rng(seed)
    witness = {"inner": _labels(f, d.inner), "outer": _labels(f, d.outer)}

    ident = identity((), ())
    E1 = quasi_cond_expectation(d, ident)
    unital = max_abs_diff(E1, identity(E1.support, E1.dims))
    reports = [VerificationReport("qce_unitality", "quasi-conditional expectation is unital",
                                  unital, TOL_UNITAL, dict(witness), seed)]

    in_sites, scope = _choi_input_sites(d, choi_cap)
    J, out_sites = choi_matrix(d, in_sites)
    herm = float(np.max(np.abs(J - J.conj().T))) if J.size else 0.0
    min_eig = float(np.linalg.eigvalsh((J + J.conj().T) / 2).min())
    reports.append(VerificationReport(
        "qce_complete_positivity", "quasi-conditional expectation is completely positive",
        max(0.0, -min_eig), TOL_CP,
        dict(witness, min_eigenvalue=min_eig, hermiticity=herm, choi_dim=int(J.shape[0]),
             input_scope=scope, input_sites=list(f.sites.labels(in_sites))), seed))

    inner_sites = _site_list(f, d.inner)
    outer_sites = _site_list(f, d.outer)
    if _dim(f, outer_sites) <= 2 ** 7:
        a_sites = outer_sites
    else:
        a_sites = sorted(set(inner_sites) | set(d.trace_sites))
        extra = [s for s in a_sites if s not in set(inner_sites)]
        while extra and _dim(f, set(a_sites) | d.amplitude.sites) > WORKING_DIM_CAP:
            a_sites.remove(extra.pop())
    a = random_operator(a_sites, f.sites.dims(a_sites), rng)
    Ea = quasi_cond_expectation(d, a)
    worst, where = 0.0, None
    for i, j, c in _matrix_units(inner_sites, f.sites.dims(inner_sites)):
        r = max_abs_diff(quasi_cond_expectation(d, multiply(c, a)), multiply(c, Ea))
        if r > worst:
            worst, where = r, (i, j)
    reports.append(VerificationReport(
        "qce_module_property", "E(ca) = c E(a) for c on the inner region",
        worst, TOL_MODULE, dict(witness, worst_unit=where,
                                a_sites=list(f.sites.labels(a_sites))), seed))
    return reports


# --------------------------------------------------------------------------
# properties of the construction


@_timed
def plaquette_density_check(f: AmplitudeFamily, y) -> VerificationReport:
    K = f.plaquette_amplitude(y)
    r = plaquette_normalization_residual(K, f.site(y), f.state)
    return VerificationReport("plaquette_normalization", "conditional density amplitude of a plaquette",
                              r, TOL_NORMALIZATION, {"center": f.window.encode(y)})


@_timed
def region_density_check(f: AmplitudeFamily, region, method: str = "sweep") -> VerificationReport:
    r = region_normalization_residual(f, region, method=method)
    return VerificationReport("region_normalization", "conditional density amplitude of a region",
                              r, TOL_NORMALIZATION, {"region": _labels(f, region)})


@_timed
def factorization_check(f: AmplitudeFamily, region, other) -> VerificationReport:
    """``K`` of a union of well separated regions is the product of the two."""
    w = f.window
    region, other = w.region(region), w.region(other)
    if region and other and closure(w, region) & other:
        raise PreconditionError("closure of the first region meets the second")
    if not other or not region:
        return VerificationReport("factorization", "amplitude of a separated union factorizes",
                                  0.0, TOL_FACTORIZATION,
                                  {"region": _labels(f, region), "other": _labels(f, other)})
    union = f.region_amplitude(region | other).operator
    split = multiply(f.region_amplitude(region).operator, f.region_amplitude(other).operator)
    return VerificationReport("factorization", "amplitude of a separated union factorizes",
                              max_abs_diff(union, split), TOL_FACTORIZATION,
                              {"region": _labels(f, region), "other": _labels(f, other)})


@_timed
def localization_check(f: AmplitudeFamily, core, region, a: LocalOperator,
                       method: str = "auto", seed: int | None = None) -> VerificationReport:
    """Tracing out centers far from ``core`` shrinks ``K^* a K`` to smaller amplitudes.

    Checks, for every center ``z`` in ``region \\ closure(core)``, that
    ``E_z(K_L^* a K_L) = K_{L-z}^* a K_{L-z}``, and that tracing all of them
    at once leaves ``K_{cl(core)}^* a K_{cl(core)}``.
    """
    w = f.window
    t = f.tessellation
    core, region = w.region(core), w.region(region)
    cl = closure(w, core)
    if not cl < region:
        raise PreconditionError("need closure(core) to be a proper subset of region")
    core_sites = set(_site_list(f, core))
    if not set(a.support) <= core_sites:
        raise PreconditionError("observable is not supported in the core")
    full = f.region_amplitude(region)
    far = [z for z in t.centers_in(region - cl)]
    worst, where = 0.0, None
    for z in far:
        lhs = conjugated(f, full, a, [f.site(z)], method)
        rhs = conjugated(f, f.region_amplitude(region - {z}), a, (), method)
        r = max_abs_diff(lhs, rhs)
        if where is None or r > worst:
            worst, where = r, ("single", w.encode(z))
    lhs = conjugated(f, full, a, [f.site(z) for z in far], method)
    rhs = conjugated(f, f.region_amplitude(cl), a, (), method)
    r = max_abs_diff(lhs, rhs)
    if where is None or r > worst:
        worst, where = r, ("all", None)
    return VerificationReport("localization", "tracing far centers localizes K* a K",
                              worst, TOL_LOCALIZATION,
                              {"core": _labels(f, core), "region": _labels(f, region),
                               "traced_centers": [w.encode(z) for z in far], "worst": where},
                              seed)


@_timed
def stationarity_probe(f: AmplitudeFamily, core, growth: Iterable, a: LocalOperator,
                       seed: int | None = None, method: str = "sweep") -> VerificationReport:
    """``phi_L(a)`` is the same for every ``L`` containing the closure of ``core``."""
    w = f.window
    core = w.region(core)
    cl = closure(w, core)
    if not set(a.support) <= set(_site_list(f, core)):
        raise PreconditionError("observable is not supported in the core")
    growth = [w.region(g) for g in growth]
    for k, g in enumerate(growth):
        if not cl <= g:
            raise PreconditionError(f"growth region {k} does not contain closure(core)")
        if k and not growth[k - 1] <= g:
            raise PreconditionError(f"growth region {k} does not contain region {k - 1}")
    base = finite_volume_state(f, cl, a, method=method)
    values = [finite_volume_state(f, g, a, method=method) for g in growth]
    residual = max((abs(v - base) for v in values), default=0.0)
    return VerificationReport("stationarity", "finite-volume states are stationary",
                              residual, TOL_STATIONARY,
                              {"core": _labels(f, core), "sizes": [len(g) for g in growth],
                               "base": base, "values": values}, seed)


def check_sequence(f: AmplitudeFamily, sequence: Sequence) -> list:
    """Validate ``L_n ⊂⊂ L_{n+1}`` and that no ``L_n`` has a center on its external boundary."""
    w = f.window
    t = f.tessellation
    seq = [w.region(s) for s in sequence]
    for n, lam in enumerate(seq):
        for v in w.sort(external_boundary(w, lam)):
            if t.in_v0(v):
                raise SequenceConditionError(
                    f"region {n} has center {v!r} on its external boundary", n, v)
        if n + 1 < len(seq) and not closure(w, lam) <= seq[n + 1]:
            raise SequenceConditionError(
                f"closure of region {n} is not inside region {n + 1}", n,
                w.sort(closure(w, lam) - seq[n + 1])[0])
    return seq


@_timed
def projectivity_check(f: AmplitudeFamily, sequence: Sequence, a: LocalOperator,
                       seed: int | None = None, method: str = "sweep") -> VerificationReport:
    """``phi_{L_n} ∘ E_{L_n, L_{n+1}} = phi_{L_{n+1}}`` per step and telescoped."""
    seq = check_sequence(f, sequence)
    if len(seq) < 2:
        raise PreconditionError("need at least two regions")
    descriptors = [make_descriptor(f, seq[n], seq[n + 1]) for n in range(len(seq) - 1)]
    steps = []
    for n, d in enumerate(descriptors):
        lhs = finite_volume_state(f, seq[n], quasi_cond_expectation(d, a, method), method=method)
        rhs = finite_volume_state(f, seq[n + 1], a, method=method)
        steps.append(abs(lhs - rhs))
    b = a
    for d in reversed(descriptors):
        b = quasi_cond_expectation(d, b, method)
    chained = finite_volume_state(f, seq[0], b, method=method)
    target = finite_volume_state(f, seq[-1], a, method=method)
    tele = abs(chained - target)
    return VerificationReport("projectivity", "boundary state composed with the chain of maps",
                              max(steps + [tele]), TOL_PROJECTIVE,
                              {"sizes": [len(s) for s in seq], "step_residuals": steps,
                               "telescoped_residual": tele,
                               "a_support": list(f.sites.labels(a.support))}, seed)


# --------------------------------------------------------------------------
# classical cross-check


def _is_diagonal(m: np.ndarray) -> bool:
    return not np.any(m - np.diag(np.diag(m)))


@_timed
def classical_oracle_compare(f: AmplitudeFamily, region, g: LocalOperator,
                             seed: int | None = None) -> VerificationReport:
    """Operator value of ``phi_L(g)`` against a brute-force configuration sum."""
    w = f.window
    region = w.region(region)
    ra = f.region_amplitude(region)
    centers = ra.centers
    for y in centers:
        for x in w.neighbors(y):
            if not _is_diagonal(f.tables[(y, x)]):
                raise NonDiagonalInput(f"edge ({x!r}, {y!r}) amplitude is not diagonal")
    if not _is_diagonal(g.matrix):
        raise NonDiagonalInput("observable is not diagonal")
    involved = set(g.support) | ra.sites
    if not f.state.is_diagonal(involved):
        raise NonDiagonalInput("reference state is not diagonal on the involved sites")

    dims = {s: f.sites.dim(s) for s in involved}
    neighbors = {f.site(y): [f.site(x) for x in w.neighbors(y)] for y in centers}
    label = {f.site(v): v for y in centers for v in (y,) + w.neighbors(y)}

    def edge_value(y, x, s_x, s_y):
        table = f.tables[(label[y], label[x])]
        k = s_x * dims[y] + s_y
        return table[k, k]

    g_diag = np.diag(g.matrix)
    strides = []
    acc = 1
    for d in reversed(g.dims):
        strides.append(acc)
        acc *= d
    strides = strides[::-1]

    def observable(config):
        return g_diag[sum(config[s] * st for s, st in zip(g.support, strides))]

    probs = {s: f.state.probabilities(s, dims[s]) for s in involved}
    expected = classical_expectation([f.site(y) for y in centers], neighbors, edge_value,
                                     probs, observable, g.support)
    value = finite_volume_state(f, region, g)
    return VerificationReport("classical_oracle", "diagonal instance matches configuration sum",
                              abs(value - expected), TOL_ORACLE,
                              {"region": _labels(f, region), "operator_value": value,
                               "oracle_value": expected}, seed)


# --------------------------------------------------------------------------
# seeded inputs


def random_region(f: AmplitudeFamily, rng, size: int, start=None, within=None) -> frozenset:
    """Connected region grown from ``start`` by random breadth-first accretion."""
    w = f.window
    allowed = set(within) if within is not None else set(w.complete_vertices)
    start = w.root if start is None else start
    region = {start}
    frontier = [v for v in w.neighbors(start) if v in allowed]
    while len(region) < size and frontier:
        frontier = w.sort(set(frontier))
        v = frontier[int(rng.integers(len(frontier)))]
        region.add(v)
        frontier = [u for u in set(frontier) | set(w.neighbors(v))
                    if u in allowed and u not in region]
    return frozenset(region)


def random_observable(f: AmplitudeFamily, region, rng, max_sites: int = 2,
                      diagonal: bool = False) -> LocalOperator:
    w = f.window
    labels = list(w.sort(region))
    k = int(rng.integers(1, min(max_sites, len(labels)) + 1))
    pick = sorted(rng.choice(len(labels), size=k, replace=False))
    sites = [f.site(labels[i]) for i in pick]
    dims = f.sites.dims(sites)
    if diagonal:
        D = int(np.prod(dims))
        return LocalOperator(tuple(sites), dims, np.diag(rng.normal(size=D)))
    return random_operator(sites, dims, rng)


def random_descriptor(f: AmplitudeFamily, rng, inner_size: int = 2, extra: int = 2,
                      start=None, min_centers: int = 1, cap: int = CHOI_DIM_CAP,
                      attempts: int = 200):
    """Descriptor with ``L2 = closure(L1)`` plus ``extra`` vertices just outside it.

    Retries until the trace set holds at least ``min_centers`` centers (so the
    map is more than a partial trace) and the Choi matrix fits under ``cap``.
    """
    w = f.window
    complete = w.complete_vertices
    for _ in range(attempts):
        inner = random_region(f, rng, inner_size, start=start)
        cl = closure(w, inner)
        ring = [v for v in w.sort(external_boundary(w, cl)) if v in complete]
        if not cl <= complete or len(ring) < extra:
            continue
        pick = rng.choice(len(ring), size=extra, replace=False)
        outer = cl | {ring[i] for i in pick}
        if not outer <= f.tessellation.certified:
            continue
        d = make_descriptor(f, inner, outer)
        if len(d.amplitude.centers) < min_centers:
            continue
        try:
            _choi_input_sites(d, cap)
        except PreconditionError:
            continue
        return d
    raise PreconditionError("no descriptor under the Choi cap was found")


def admissible_hull(f: AmplitudeFamily, region) -> frozenset:
    """``region`` plus the centers on its external boundary.

    Neighbors of centers are never centers, so the external boundary of the
    result holds no center: the result is a valid member of a sequence.
    """
    w = f.window
    t = f.tessellation
    region = w.region(region)
    return region | {v for v in external_boundary(w, region) if t.in_v0(v)}


def admissible_sequence(f: AmplitudeFamily, core, steps: int) -> list:
    """``L_0 = hull(core)``, ``L_{n+1} = hull(closure(L_n))``."""
    w = f.window
    seq = [admissible_hull(f, core)]
    for _ in range(steps):
        seq.append(admissible_hull(f, closure(w, seq[-1])))
    return seq


def random_separated_pair(f: AmplitudeFamily, rng, size: int = 2, gap: int = 0,
                          attempts: int = 100) -> tuple:
    """Two random connected regions with ``closure(first) ∩ second = ∅``.

    ``gap`` extra vertices of distance are kept between the two.
    """
    w = f.window
    certified = {v for v in f.tessellation.certified if w.is_complete(v)}
    pool = w.sort(certified)
    for _ in range(attempts):
        first = random_region(f, rng, size, start=pool[int(rng.integers(len(pool)))],
                              within=certified)
        blocked = closure(w, first)
        for _ in range(gap):
            blocked = closure(w, blocked)
        rest = [v for v in pool if v not in blocked]
        if not rest:
            continue
        second = random_region(f, rng, size, start=rest[int(rng.integers(len(rest)))],
                               within=set(certified) - blocked)
        return first, second
    raise PreconditionError("could not place two separated regions")
