import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import identity_family, make_family
from qmfield.amplitudes import (
    AmplitudeError,
    UncertifiedFamily,
    build_edge_amplitude,
    build_family,
    edge_table,
    encode_complex_matrix,
    factor_order_residual,
    family_from_tables,
    ising_table,
    parse_complex_matrix,
    plaquette_normalization_residual,
    region_normalization_residual,
)
from qmfield.graph_topology import GraphWindow, build_tessellation
from qmfield.operator_algebra import (
    ProductState,
    SiteModel,
    max_abs_diff,
    multiply,
    product,
    random_unitary,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


@pytest.fixture(scope="module")
def edge_window():
    # single edge y - x, y the root and only center
    return GraphWindow.explicit([("y", "x")], root="y")


def diag1234_family(window, state=None):
    return make_family(window, {"mode": "diagonal", "table": [1, 2, 3, 4]}, state=state)


# -- edge amplitudes ------------------------------------------------------------

def test_diagonal_table_edge(edge_window):
    t = build_tessellation(edge_window)
    sites = SiteModel(edge_window)
    k = build_edge_amplitude({"mode": "diagonal", "table": [1, 2, 3, 4]}, ("x", "y"), sites, t)
    assert set(k.support) == {sites.site("x"), sites.site("y")}
    # stored in canonical order (y before x); read back in |s_x s_y> order
    back = k.tensor.transpose(1, 0, 3, 2).reshape(4, 4)
    assert np.abs(back - np.diag([1, 2, 3, 4])).max() == 0


def test_ising_zero_is_identity():
    assert np.abs(ising_table(0.0) - np.eye(4)).max() == 0


def test_ising_coupling_only():
    beta = 0.37
    want = np.diag(np.exp([beta, -beta, -beta, beta]))
    assert np.abs(ising_table(beta) - want).max() < 1e-15


def test_ising_fields():
    J, hx, hy = 0.3, -0.2, 0.5
    spins = [1, -1]
    want = [np.exp(J * a * b + hx * a + hy * b) for a in spins for b in spins]
    assert np.abs(np.diag(ising_table(J, hx, hy)) - want).max() < 1e-15


def test_table_formats_agree():
    flat = edge_table({"mode": "diagonal", "table": [1, 2, 3, 4]}, 2, 2)
    grid = edge_table({"mode": "diagonal", "table": [[1, 2], [3, 4]]}, 2, 2)
    keyed = edge_table({"mode": "diagonal", "table": {"0,1": 2, "1,0": 3, "1,1": 4}}, 2, 2)
    assert np.abs(flat - grid).max() == 0 and np.abs(flat - keyed).max() == 0


def test_malformed_table():
    with pytest.raises(AmplitudeError):
        edge_table({"mode": "diagonal", "table": [1, 2, 3]}, 2, 2)
    with pytest.raises(AmplitudeError):
        edge_table({"mode": "nope"}, 2, 2)


def test_non_invertible_edge(edge_window):
    sites = SiteModel(edge_window)
    with pytest.raises(AmplitudeError):
        build_edge_amplitude({"mode": "diagonal", "table": [1, 0, 1, 1]}, ("x", "y"), sites)


def test_complex_matrix_round_trip(rng):
    m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    assert np.abs(parse_complex_matrix(encode_complex_matrix(m)) - m).max() == 0


# -- certificates ---------------------------------------------------------------------

def test_diagonal_family_commutes_exactly(line):
    f = make_family(line, {"mode": "ising", "J": 0.4, "h": 0.1})
    cert = f.certificate()
    assert cert.ok
    assert cert.commutativity.residual == 0.0


def test_conjugated_family_residuals(z2):
    f = make_family(z2, {"mode": "conjugated", "unitary": "hadamard", "table": [1, 2, 3, 0.5]})
    cert = f.certificate()
    assert cert.commutativity.residual <= 1e-12
    assert cert.commutant.residual <= 1e-12


def pauli_table(y, x, dx, dy):
    # sigma_x on x for the center left of x, sigma_z for the one to the right
    return np.kron(SX if y[0] < x[0] else SZ, np.eye(dy))


def test_noncommuting_family_fails(line):
    t = build_tessellation(line)
    f = family_from_tables(t, SiteModel(line), ProductState(), "custom", pauli_table)
    cert = f.certificate()
    assert not cert.commutativity.ok
    assert cert.commutativity.residual > 0.5
    assert cert.commutativity.witness is not None
    with pytest.raises(UncertifiedFamily):
        f.require_certified()


def test_family_refuses_dependent_centers():
    w = GraphWindow.explicit([("r", "a"), ("r", "b"), ("a", "c"), ("b", "d"), ("c", "d")],
                             root="r")
    t = build_tessellation(w)
    with pytest.raises(AmplitudeError):
        build_family(t, {"mode": "ising", "J": 0.5}, SiteModel(w), ProductState())


# -- plaquette objects ---------------------------------------------------------------------

def test_identity_family_plaquettes(line):
    f = identity_family(line)
    y = (0,)
    B = f.normalizer(y)
    assert np.abs(B.matrix - np.eye(B.size)).max() < 1e-15
    K = f.plaquette_amplitude(y)
    assert np.abs(K.matrix - np.eye(K.size)).max() < 1e-15


def test_single_edge_normalizer(edge_window):
    f = diag1234_family(edge_window)
    B = f.normalizer("y")
    assert B.support == (f.site("x"),)
    assert np.abs(B.matrix - np.diag([2.5, 12.5])).max() < 1e-14


def test_single_edge_amplitude(edge_window):
    f = diag1234_family(edge_window)
    K = f.plaquette_amplitude("y")
    # |K|^2 read in |s_x s_y> order
    KK = multiply(K.dag, K)
    t = KK.tensor.transpose(1, 0, 3, 2).reshape(4, 4)
    assert np.abs(np.diag(t) - [0.4, 1.6, 18 / 25, 32 / 25]).max() < 1e-14
    res = plaquette_normalization_residual(K, f.site("y"), f.state)
    assert res < 1e-14


def test_ising_degree_two_normalizer(line):
    J, h = 0.8, 0.3
    f = make_family(line, {"mode": "ising", "J": J, "h": h})
    B = f.normalizer((0,))
    spins = [1, -1]
    k = lambda sx, sy: np.exp(J * sx * sy + h * sx + h * sy)
    want = [0.5 * sum(k(a, s) ** 2 * k(b, s) ** 2 for s in spins) for a in spins for b in spins]
    # B lives on sites of -1 and 1; canonical order puts -1 first
    assert f.sites.labels(B.support) == ((-1,), (1,))
    assert np.abs(np.diag(B.matrix) - want).max() < 1e-12
    assert np.abs(B.matrix - np.diag(np.diag(B.matrix))).max() == 0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_conddensity_random_diagonal(seed):
    rng = np.random.default_rng(seed)
    w = GraphWindow.lattice(1, 6)
    t = build_tessellation(w)
    densities = {i: np.diag(p) for i, p in
                 enumerate(rng.dirichlet([1, 1], size=len(w.vertices)))}
    tables = {}

    def table_fn(y, x, dx, dy):
        tables[(y, x)] = np.diag(rng.uniform(0.2, 3.0, size=4) *
                                 np.exp(1j * rng.uniform(0, 2 * np.pi, size=4)))
        return tables[(y, x)]

    f = family_from_tables(t, SiteModel(w), ProductState(densities), "diagonal", table_fn)
    for y in f.centers:
        if y in t.plaquettes:
            K = f.plaquette_amplitude(y)
            assert plaquette_normalization_residual(K, f.site(y), f.state) <= 1e-9


def test_conddensity_conjugated_random_unitaries(tree, rng):
    t = build_tessellation(tree)
    sites = SiteModel(tree)
    conj = {v: random_unitary(2, rng) for v in tree.vertices}

    def table_fn(y, x, dx, dy):
        U = np.kron(conj[x], conj[y])
        return U @ np.diag(rng.uniform(0.3, 2.0, size=4)) @ U.conj().T

    f = family_from_tables(t, sites, ProductState(), "conjugated", table_fn, conj)
    assert f.certificate().ok
    for y in f.centers:
        K = f.plaquette_amplitude(y)
        assert plaquette_normalization_residual(K, f.site(y), f.state) <= 1e-9


# -- region amplitudes -----------------------------------------------------------------

def test_region_without_centers_is_identity(ising_line):
    ra = ising_line.region_amplitude([(1,)])
    assert ra.factors == ()
    assert ra.operator.support == ()
    assert abs(ra.operator.to_scalar() - 1) == 0


def test_region_single_plaquette(ising_line):
    plaq = ising_line.tessellation.plaquette((2,))
    ra = ising_line.region_amplitude(plaq)
    assert ra.centers == ((2,),)
    assert max_abs_diff(ra.operator, ising_line.plaquette_amplitude((2,))) == 0


def test_region_line_three_plaquettes(ising_line):
    ra = ising_line.region_amplitude([(i,) for i in range(-2, 3)])
    assert set(ra.centers) == {(-2,), (0,), (2,)}
    direct = product(ising_line.plaquette_amplitude(y) for y in [(-2,), (0,), (2,)])
    assert max_abs_diff(ra.operator, direct) < 1e-15
    assert factor_order_residual(ra) <= 1e-12
    assert ra.support == {(i,) for i in range(-3, 4)}
    assert ra.leaked_centers == ()


def test_region_support_has_no_outside_centers(z2, rng):
    f = make_family(z2, {"mode": "ising", "J": 0.3})
    t = f.tessellation
    for _ in range(10):
        y = list(t.plaquettes)[int(rng.integers(len(t.plaquettes)))]
        region = {y} | set(z2.neighbors(y)[:2])
        if not region <= z2.complete_vertices:
            continue
        ra = f.region_amplitude(region)
        assert not (ra.support - region) & t.v0


def test_region_normalization_both_routes(ising_line):
    region = [(i,) for i in range(-3, 4)]
    assert region_normalization_residual(ising_line, region, method="sweep") <= 1e-9
    assert region_normalization_residual(ising_line, region, method="dense") <= 1e-9


def test_conjugated_order_independence(z2):
    f = make_family(z2, {"mode": "conjugated", "unitary": "hadamard", "table": [1, 2, 3, 0.5]})
    region = {(0, 0), (1, 0), (1, 1), (2, 0)}
    ra = f.region_amplitude(region)
    assert len(ra.factors) >= 2
    assert factor_order_residual(ra) <= 1e-12


def test_overrides_and_custom_edges(line):
    t = build_tessellation(line)
    sites = SiteModel(line)
    spec = {"mode": "ising", "J": 0.2,
            "overrides": [{"y": [0], "x": [1], "spec": {"mode": "diagonal",
                                                     "table": [1, 2, 3, 4]}}]}
    f = build_family(t, spec, sites, ProductState())
    assert np.abs(f.tables[((0,), (1,))] - np.diag([1, 2, 3, 4])).max() == 0
    assert np.abs(f.tables[((0,), (-1,))] - ising_table(0.2)).max() == 0


def test_tables_keep_edge_order(line):
    # every plaquette edge is stored, none twice
    f = make_family(line, {"mode": "ising", "J": 0.1})
    for y in f.tessellation.plaquettes:
        for x in line.neighbors(y):
            assert (y, x) in f.tables
    assert len(f.tables) == sum(len(line.neighbors(y)) for y in f.tessellation.plaquettes)
    assert all(a != b for a, b in itertools.combinations(f.tables, 2))
