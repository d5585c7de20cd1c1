"""Edge amplitude families and the conditional density amplitudes built from them.

For every center ``y`` of the tessellation and every neighbor ``x`` of
``y`` the family holds an invertible two-site operator ``Kt[(y, x)]``.
From these:

* plaquette product   ``P_y = prod_{x in N_y} Kt[(y, x)]``
* normalizer          ``B_y = E_y(P_y^* P_y)``            (supported on N_y)
* plaquette amplitude ``K_y = P_y B_y^{-1/2}``
* region amplitude    ``K_L = prod_{y in L ∩ V0} K_y``   (canonical y-order)

Edge tables are always given with the x factor first, i.e. rows and
columns indexed by ``|s_x s_y>``.  For Ising-type tables the spin value
``+1`` is basis index 0 and ``-1`` is index 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping

import numpy as np

from .graph_topology import Tessellation, amplitude_support
from .operator_algebra import (
    EigenvalueFloorError,
    LocalOperator,
    ProductState,
    SiteModel,
    adjoint,
    dense_sandwich_trace,
    identity,
    inv_sqrt_psd,
    max_abs_diff,
    multiply,
    product,
    sandwich_trace,
    umegaki_expect,
)

INVERTIBILITY_FLOOR = 1e-8
COMMUTATOR_TOL = 1e-10
NORMALIZER_FLOOR = 1e-8   # relative to ||B_y||
NORMALIZATION_TOL = 1e-9
MODES = ("diagonal", "ising", "conjugated", "custom")


class AmplitudeError(ValueError):
    pass


class UncertifiedFamily(AmplitudeError):
    pass


# --------------------------------------------------------------------------
# edge tables


def ising_table(J: float, h_x: float = 0.0, h_y: float = 0.0) -> np.ndarray:
    spins = (1.0, -1.0)
    diag = [math.exp(J * sx * sy + h_x * sx + h_y * sy) for sx in spins for sy in spins]
    return np.diag(diag).astype(complex)


HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def parse_complex_matrix(obj) -> np.ndarray:
    """Nested list of numbers or ``[re, im]`` pairs -> complex array."""
    arr = np.asarray(obj, dtype=object)
    if arr.ndim == 3 and arr.shape[-1] == 2:
        return np.asarray(obj, dtype=float) @ np.array([1, 1j])
    if arr.ndim == 2:
        return np.asarray(obj, dtype=complex)
    raise AmplitudeError(f"malformed complex matrix of shape {arr.shape}")


def encode_complex_matrix(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _parse_scalar(v) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise AmplitudeError(f"malformed complex entry {v!r}")
        return complex(float(v[0]), float(v[1]))
    return complex(v)


def _parse_table(table, d_x: int, d_y: int) -> np.ndarray:
    """Diagonal table: flat list in |s_x s_y> order, or a d_x-by-d_y grid."""
    if table is None:
        raise AmplitudeError("diagonal mode needs a 'table'")
    if isinstance(table, Mapping):
        # keys "i,j" -> value
        entries = np.ones(d_x * d_y, dtype=complex)
        for key, v in table.items():
            i, j = (int(c) for c in str(key).split(","))
            if not (0 <= i < d_x and 0 <= j < d_y):
                raise AmplitudeError(f"table key {key!r} out of range")
            entries[i * d_y + j] = _parse_scalar(v)
        return np.diag(entries)
    rows = list(table)
    if len(rows) == d_x * d_y:
        flat = [_parse_scalar(e) for e in rows]
    elif len(rows) == d_x and all(isinstance(r, (list, tuple)) and len(r) == d_y for r in rows):
        flat = [_parse_scalar(e) for r in rows for e in r]
    else:
        raise AmplitudeError(f"table must have {d_x * d_y} entries or {d_x} rows of {d_y}")
    if len(flat) != d_x * d_y:
        raise AmplitudeError(f"table has {len(flat)} entries, need {d_x * d_y}")
    return np.diag(np.array(flat, dtype=complex))


def _unitary(obj, d: int) -> np.ndarray:
    if isinstance(obj, str):
        if obj == "hadamard":
            if d != 2:
                raise AmplitudeError("hadamard conjugator needs qubit sites")
            return HADAMARD
        if obj == "identity":
            return np.eye(d, dtype=complex)
        raise AmplitudeError(f"unknown unitary {obj!r}")
    u = parse_complex_matrix(obj)
    if u.shape != (d, d) or np.max(np.abs(u @ u.conj().T - np.eye(d))) > 1e-10:
        raise AmplitudeError("conjugator is not a unitary of the site dimension")
    return u


def edge_table(spec: Mapping, d_x: int, d_y: int, u_x=None, u_y=None, custom=None) -> np.ndarray:
    """Matrix of one edge amplitude in |s_x s_y> order, from a JSON-style spec."""
    mode = spec.get("mode")
    if mode == "diagonal":
        return _parse_table(spec.get("table"), d_x, d_y)
    if mode == "ising":
        if (d_x, d_y) != (2, 2):
            raise AmplitudeError("ising mode needs qubit sites")
        h = spec.get("h", 0.0)
        return ising_table(float(spec.get("J", 0.0)), float(spec.get("h_x", h)),
                           float(spec.get("h_y", h)))
    if mode == "conjugated":
        D = _parse_table(spec.get("table"), d_x, d_y)
        U = np.kron(u_x, u_y)
        return U @ D @ U.conj().T
    if mode == "custom":
        m = custom if custom is not None else spec.get("matrix")
        if m is None:
            raise AmplitudeError("custom mode needs a matrix for every edge")
        m = parse_complex_matrix(m) if not isinstance(m, np.ndarray) else m.astype(complex)
        if m.shape != (d_x * d_y, d_x * d_y):
            raise AmplitudeError(f"custom edge matrix has shape {m.shape}")
        return m
    raise AmplitudeError(f"unknown amplitude mode {mode!r}")


# --------------------------------------------------------------------------
# the family


@dataclass
class Certificate:
    name: str
    residual: float
    tolerance: float
    ok: bool
    witness: tuple | None = None


@dataclass
class FamilyCertificate:
    invertibility: Certificate
    commutativity: Certificate
    commutant: Certificate

    @property
    def ok(self) -> bool:
        return self.invertibility.ok and self.commutativity.ok and self.commutant.ok

    def items(self):
        return [self.invertibility, self.commutativity, self.commutant]


@dataclass
class AmplitudeFamily:
    """Edge amplitudes on a tessellation together with their derived objects.

    ``tables`` keeps each edge matrix exactly as supplied (|s_x s_y> order),
    keyed by the label pair ``(y, x)``; ``edges`` holds the same matrices as
    :class:`LocalOperator` on canonical sites.
    """

    tessellation: Tessellation
    sites: SiteModel
    state: ProductState
    mode: str
    tables: dict
    conjugators: dict | None = None
    invertibility_floor: float = INVERTIBILITY_FLOOR
    commutator_tol: float = COMMUTATOR_TOL
    normalizer_floor: float = NORMALIZER_FLOOR
    edges: dict = field(init=False)
    _normalizers: dict = field(init=False, default_factory=dict, repr=False)
    _plaquettes: dict = field(init=False, default_factory=dict, repr=False)
    _certificate: FamilyCertificate | None = field(init=False, default=None, repr=False)

    def __post_init__(self):
        w = self.tessellation.window
        self.edges = {}
        for (y, x), m in self.tables.items():
            if not w.adjacent(y, x):
                raise AmplitudeError(f"({x!r}, {y!r}) is not an edge")
            self.edges[(y, x)] = self.sites.operator([x, y], m)

    @property
    def window(self):
        return self.tessellation.window

    @property
    def centers(self) -> tuple:
        return self.window.sort({y for y, _ in self.tables})

    def edge(self, y, x) -> LocalOperator:
        try:
            return self.edges[(y, x)]
        except KeyError:
            raise AmplitudeError(f"no amplitude for edge ({x!r}, {y!r})") from None

    def site(self, label) -> int:
        return self.sites.site(label)

    def certificate(self) -> FamilyCertificate:
        if self._certificate is None:
            self._certificate = verify_family(self)
        return self._certificate

    def require_certified(self):
        cert = self.certificate()
        if not cert.ok:
            bad = next(c for c in cert.items() if not c.ok)
            raise UncertifiedFamily(
                f"family fails the {bad.name} certificate (residual {bad.residual:.3e}, "
                f"witness {bad.witness})")

    # -- plaquette objects (write-once caches) ---------------------------

    def plaquette_product(self, y) -> LocalOperator:
        self.tessellation.plaquette(y)
        return product(self.edge(y, x) for x in self.window.neighbors(y))

    def normalizer(self, y, state: ProductState | None = None) -> LocalOperator:
        if state is not None and state is not self.state:
            return compute_plaquette_normalizer(self, y, state)
        if y not in self._normalizers:
            self._normalizers[y] = compute_plaquette_normalizer(self, y, self.state)
        return self._normalizers[y]

    def plaquette_amplitude(self, y, state: ProductState | None = None) -> LocalOperator:
        if state is not None and state is not self.state:
            return build_plaquette_amplitude(self, y, state)
        if y not in self._plaquettes:
            self._plaquettes[y] = build_plaquette_amplitude(self, y, self.state)
        return self._plaquettes[y]

    def region_amplitude(self, region) -> "RegionAmplitude":
        return build_region_amplitude(self, region)


def family_from_tables(t: Tessellation, sites: SiteModel, state: ProductState, mode: str,
                       table_fn: Callable, conjugators: Mapping | None = None,
                       require_independent: bool = True, **tolerances) -> AmplitudeFamily:
    """Family with ``table_fn(y, x, d_x, d_y)`` giving every edge matrix."""
    if require_independent and not t.independence_ok:
        raise AmplitudeError(
            "tessellation centers are not independent; witness "
            f"{t.diagnostics['independence'].witness}")
    w = t.window
    tables = {}
    for y in t.plaquettes:
        for x in w.neighbors(y):
            d_x, d_y = sites.dim(sites.site(x)), sites.dim(sites.site(y))
            m = np.asarray(table_fn(y, x, d_x, d_y), dtype=complex)
            if m.shape != (d_x * d_y, d_x * d_y):
                raise AmplitudeError(f"edge ({x!r}, {y!r}) matrix has shape {m.shape}")
            tables[(y, x)] = m
    return AmplitudeFamily(t, sites, state, mode, tables,
                           dict(conjugators) if conjugators else None, **tolerances)


def build_family(t: Tessellation, spec: Mapping, sites: SiteModel, state: ProductState,
                 require_independent: bool = True, **tolerances) -> AmplitudeFamily:
    """Family from the JSON amplitude spec, applying per-edge overrides."""
    mode = spec.get("mode")
    if mode not in MODES:
        raise AmplitudeError(f"unknown amplitude mode {mode!r}")
    w = t.window
    overrides = {}
    for o in spec.get("overrides", []):
        y, x = w.decode(o["y"]), w.decode(o["x"])
        overrides[(y, x)] = o["spec"]
    custom_edges = {}
    if mode == "custom":
        for key, m in (spec.get("edges") or {}).items():
            ys, xs = key.split("|")
            custom_edges[(w.decode(ys), w.decode(xs))] = m

    conj = None
    if mode == "conjugated":
        per_site = spec.get("unitaries") or {}
        default = spec.get("unitary", "hadamard")
        conj = {}
        for v in w.vertices:
            d = sites.dim(sites.site(v))
            conj[v] = _unitary(per_site.get(w.key(v), default), d)

    def table_fn(y, x, d_x, d_y):
        s = overrides.get((y, x), spec)
        u_x = conj[x] if conj else None
        u_y = conj[y] if conj else None
        return build_edge_amplitude_table(s, d_x, d_y, u_x, u_y, custom_edges.get((y, x)))

    return family_from_tables(t, sites, state, mode, table_fn, conj,
                              require_independent=require_independent, **tolerances)


def build_edge_amplitude_table(spec, d_x, d_y, u_x=None, u_y=None, custom=None,
                               floor: float = INVERTIBILITY_FLOOR) -> np.ndarray:
    m = edge_table(spec, d_x, d_y, u_x, u_y, custom)
    smin = np.linalg.svd(m, compute_uv=False).min()
    if smin < floor:
        raise AmplitudeError(f"edge amplitude is not invertible (min singular value {smin:.2e})")
    return m


def build_edge_amplitude(spec: Mapping, edge, sites: SiteModel, tessellation: Tessellation | None = None,
                         u_x=None, u_y=None) -> LocalOperator:
    """One edge amplitude ``Kt[(y, x)]`` as an operator on ``{x, y}``; ``edge = (x, y)``."""
    x, y = edge
    if tessellation is not None:
        if not tessellation.in_v0(y):
            raise AmplitudeError(f"{y!r} is not a tessellation center")
        if not tessellation.window.adjacent(y, x):
            raise AmplitudeError(f"{x!r} is not a neighbor of {y!r}")
    d_x, d_y = sites.dim(sites.site(x)), sites.dim(sites.site(y))
    if spec.get("mode") == "conjugated":
        u = spec.get("unitary", "hadamard")
        u_x = _unitary(u, d_x) if u_x is None else u_x
        u_y = _unitary(u, d_y) if u_y is None else u_y
    m = build_edge_amplitude_table(spec, d_x, d_y, u_x, u_y)
    return sites.operator([x, y], m)


# --------------------------------------------------------------------------
# certificates


def _rel_commutator(p: LocalOperator, q: LocalOperator) -> float:
    c = multiply(p, q) - multiply(q, p)
    scale = p.norm() * q.norm()
    return c.norm() / scale if scale > 0 else 0.0


def verify_family(f: AmplitudeFamily) -> FamilyCertificate:
    """Invertibility, commutativity of {Kt, Kt^*}, and B_y in the commutant."""
    w = f.window
    worst = (np.inf, None)
    for key in sorted(f.edges, key=lambda k: (w.index(k[0]), w.index(k[1]))):
        smin = float(np.linalg.svd(f.edges[key].matrix, compute_uv=False).min())
        if smin < worst[0]:
            worst = (smin, key)
    inv = Certificate("invertibility", worst[0], f.invertibility_floor,
                      worst[0] >= f.invertibility_floor, worst[1])

    gens = []
    for key in sorted(f.edges, key=lambda k: (w.index(k[0]), w.index(k[1]))):
        op = f.edges[key]
        gens.append((key, "K", op))
        gens.append((key, "K*", adjoint(op)))
    by_site: dict = {}
    for i, (_, _, op) in enumerate(gens):
        for s in op.support:
            by_site.setdefault(s, []).append(i)
    worst = (0.0, None)
    seen = set()
    for s in sorted(by_site):
        idx = by_site[s]
        for a in range(len(idx)):
            for b in range(a + 1, len(idx)):
                pair = (idx[a], idx[b])
                if pair in seen:
                    continue
                seen.add(pair)
                r = _rel_commutator(gens[pair[0]][2], gens[pair[1]][2])
                if r > worst[0]:
                    worst = (r, (gens[pair[0]][:2], gens[pair[1]][:2]))
    comm = Certificate("commutativity", worst[0], f.commutator_tol,
                       worst[0] <= f.commutator_tol, worst[1])

    worst = (0.0, None)
    try:
        for y in f.centers:
            B = f.normalizer(y)
            nb = set(B.support)
            for key, kind, op in gens:
                if nb & set(op.support):
                    r = _rel_commutator(B, op)
                    if r > worst[0]:
                        worst = (r, (y, key, kind))
        cm = Certificate("commutant", worst[0], f.commutator_tol,
                         worst[0] <= f.commutator_tol, worst[1])
    except EigenvalueFloorError as exc:
        cm = Certificate("commutant", np.inf, f.commutator_tol, False, (str(exc),))
    return FamilyCertificate(inv, comm, cm)


# --------------------------------------------------------------------------
# plaquette and region amplitudes


def compute_plaquette_normalizer(f: AmplitudeFamily, y, state: ProductState) -> LocalOperator:
    """``B_y = E_y(P_y^* P_y)``, a positive operator on N_y."""
    P = f.plaquette_product(y)
    B = umegaki_expect(multiply(adjoint(P), P), [f.site(y)], state)
    B = LocalOperator(B.support, B.dims, (B.matrix + B.matrix.conj().T) / 2)
    w = np.linalg.eigvalsh(B.matrix)
    floor = f.normalizer_floor * max(float(np.abs(w).max()), 1e-300)
    if w.min() < floor:
        raise EigenvalueFloorError(
            f"normalizer at {y!r} has eigenvalue {w.min():.3e} below {floor:.3e}", float(w.min()))
    return B


def build_plaquette_amplitude(f: AmplitudeFamily, y, state: ProductState) -> LocalOperator:
    """``K_y = P_y B_y^{-1/2}``; raises if the normalization residual is too large."""
    B = f.normalizer(y, state)
    w = np.linalg.eigvalsh(B.matrix)
    K = multiply(f.plaquette_product(y), inv_sqrt_psd(B, floor=f.normalizer_floor * w.max()))
    res = plaquette_normalization_residual(K, f.site(y), state)
    if res > NORMALIZATION_TOL:
        raise AmplitudeError(f"plaquette amplitude at {y!r} is not normalized (residual {res:.2e})")
    return K


def plaquette_normalization_residual(K: LocalOperator, y_site: int, state: ProductState) -> float:
    """max |E_y(K^* K) - id|."""
    E = umegaki_expect(multiply(adjoint(K), K), [y_site], state)
    return max_abs_diff(E, identity(E.support, E.dims))


@dataclass
class RegionAmplitude:
    """``K`` for a finite region: ordered product of plaquette amplitudes."""

    region: frozenset
    support: frozenset          # region ∪ dext0(region), as labels
    centers: tuple              # region ∩ V0, canonical order
    factors: tuple              # LocalOperator per center
    leaked_centers: tuple = ()  # V0 vertices of `support` outside `region`

    @cached_property
    def operator(self) -> LocalOperator:
        return product(self.factors)

    @property
    def sites(self) -> frozenset:
        out = set()
        for op in self.factors:
            out.update(op.support)
        return frozenset(out)

    def reversed_operator(self) -> LocalOperator:
        return product(reversed(self.factors))


def build_region_amplitude(f: AmplitudeFamily, region) -> RegionAmplitude:
    t = f.tessellation
    region = t.window.region(region)
    if not region:
        return RegionAmplitude(region, region, (), ())
    support = amplitude_support(t, region)
    centers = t.centers_in(region)
    leaked = tuple(v for v in t.window.sort(support - region) if v in t.certified and v in t.v0)
    factors = [f.plaquette_amplitude(y) for y in centers]
    return RegionAmplitude(region, support, centers, tuple(factors), leaked)


def factor_order_residual(ra: RegionAmplitude) -> float:
    """max |K - K_reversed|: how far the canonical order matters."""
    if len(ra.factors) < 2:
        return 0.0
    return max_abs_diff(ra.operator, ra.reversed_operator())


def region_normalization_residual(f: AmplitudeFamily, region, method: str = "sweep") -> float:
    """max |E_{region ∩ V0}(K^* K) - id| for the region amplitude."""
    ra = f.region_amplitude(region)
    if not ra.factors:
        return 0.0
    traced = [f.site(y) for y in ra.centers]
    ident = identity((), ())
    fn = sandwich_trace if method == "sweep" else dense_sandwich_trace
    E = fn(ident, ra.factors, traced, f.state)
    return max_abs_diff(E, identity(E.support, E.dims))
