import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmfield.operator_algebra import (
    DimensionCapError,
    DimensionMismatch,
    EigenvalueFloorError,
    LocalOperator,
    NotHermitianError,
    OperatorError,
    ProductState,
    SiteModel,
    SupportError,
    adjoint,
    canonicalize,
    dense_sandwich_trace,
    embed,
    expect_value,
    identity,
    inv_sqrt_psd,
    multiply,
    random_density,
    random_operator,
    sandwich_trace,
    umegaki_expect,
)

SZ = np.diag([1.0, -1.0])
SX = np.array([[0, 1], [1, 0]], dtype=complex)


def op(sites, m, dims=None):
    dims = dims or [2] * len(sites)
    return LocalOperator.from_ordered(sites, dims, m)


def dense_on(a, sites, dims):
    """Independent embedding: kron over ``sites`` in order, identities elsewhere."""
    full = np.ones((1, 1), dtype=complex)
    own = list(a.support)
    # bring a's factors to the front, then permute into ``sites`` order with einsum
    rest = [s for s in sites if s not in own]
    m = np.kron(a.matrix, np.eye(int(np.prod([dims[s] for s in rest])) if rest else 1))
    order = own + rest
    n = len(order)
    t = m.reshape([dims[s] for s in order] * 2)
    perm = [order.index(s) for s in sites]
    t = t.transpose(perm + [n + p for p in perm])
    size = int(np.prod([dims[s] for s in sites]))
    return full * t.reshape(size, size)


# -- embed -----------------------------------------------------------------

def test_embed_adds_identity_factor():
    a = op([0], SZ)
    e = embed(a, [0, 1])
    assert np.abs(e.matrix - np.kron(SZ, np.eye(2))).max() < 1e-15


def test_embed_permutes_into_canonical_order():
    a = op([1], SZ)
    e = embed(a, [0, 1])
    assert np.abs(e.matrix - np.kron(np.eye(2), SZ)).max() < 1e-15


def test_embed_identity():
    e = embed(identity((3,), (2,)), [1, 3, 5])
    assert np.abs(e.matrix - np.eye(8)).max() == 0


def test_embed_canonicalize_round_trip(rng):
    a = random_operator((2, 4), (2, 3), rng)
    e = embed(a, [1, 2, 4, 6], {1: 2, 6: 2})
    back = canonicalize(e)
    assert back.support == a.support
    assert np.abs(back.matrix - a.matrix).max() < 1e-14


def test_embed_support_not_contained():
    with pytest.raises(SupportError):
        embed(op([0, 1], np.eye(4)), [0])


def test_from_ordered_reverses_factors():
    m = np.kron(SZ, SX)       # SZ on site 5, SX on site 2
    a = LocalOperator.from_ordered([5, 2], [2, 2], m)
    assert a.support == (2, 5)
    assert np.abs(a.matrix - np.kron(SX, SZ)).max() < 1e-15


def test_local_operator_validation():
    with pytest.raises(DimensionMismatch):
        LocalOperator((0,), (2,), np.eye(3))
    with pytest.raises(SupportError):
        LocalOperator((1, 0), (2, 2), np.eye(4))


# -- multiply / adjoint ----------------------------------------------------------

def test_sigma_z_squared():
    z = op([0], SZ)
    r = multiply(z, z)
    assert np.abs(r.matrix - np.eye(2)).max() == 0


def test_disjoint_product_is_kron(rng):
    a = random_operator((0,), (2,), rng)
    b = random_operator((3,), (3,), rng)
    ab = multiply(a, b)
    assert ab.support == (0, 3)
    assert np.abs(ab.matrix - np.kron(a.matrix, b.matrix)).max() < 1e-15
    ba = multiply(b, a)
    assert np.abs(ab.matrix - ba.matrix).max() == 0


def test_adjoint_of_product(rng):
    a = random_operator((0, 1), (2, 2), rng)
    b = random_operator((1, 2), (2, 2), rng)
    lhs = adjoint(multiply(a, b))
    rhs = multiply(adjoint(b), adjoint(a))
    A = np.kron(a.matrix, np.eye(2))
    B = np.kron(np.eye(2), b.matrix)
    assert np.abs(lhs.matrix - (A @ B).conj().T).max() < 1e-13
    assert np.abs(lhs.matrix - rhs.matrix).max() < 1e-13


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        multiply(op([0], SZ), LocalOperator((0,), (3,), np.eye(3)))


def test_adjoint_examples(rng):
    h = random_operator((0,), (2,), rng)
    h = LocalOperator(h.support, h.dims, h.matrix + h.matrix.conj().T)
    assert np.abs(adjoint(h).matrix - h.matrix).max() == 0
    a = random_operator((0, 1), (2, 2), rng)
    assert np.abs(adjoint(adjoint(a)).matrix - a.matrix).max() == 0
    s = LocalOperator((0,), (1,), [[1 + 2j]])
    assert adjoint(s).matrix[0, 0] == 1 - 2j


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31 - 1),
       st.lists(st.integers(0, 5), min_size=1, max_size=3, unique=True),
       st.lists(st.integers(0, 5), min_size=1, max_size=3, unique=True))
def test_multiply_matches_dense(seed, sa, sb):
    rng = np.random.default_rng(seed)
    dims = {s: 2 + (s % 2) for s in range(6)}
    a = random_operator(tuple(sorted(sa)), [dims[s] for s in sorted(sa)], rng)
    b = random_operator(tuple(sorted(sb)), [dims[s] for s in sorted(sb)], rng)
    union = sorted(set(sa) | set(sb))
    ab = multiply(a, b)
    expect = dense_on(a, union, dims) @ dense_on(b, union, dims)
    assert np.abs(ab.matrix - expect).max() < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_multiply_associative(seed):
    rng = np.random.default_rng(seed)
    a = random_operator((0, 1), (2, 2), rng)
    b = random_operator((1, 2), (2, 2), rng)
    c = random_operator((0, 2), (2, 2), rng)
    l = multiply(multiply(a, b), c)
    r = multiply(a, multiply(b, c))
    assert np.abs(l.matrix - r.matrix).max() < 1e-12


# -- states and conditional expectations ------------------------------------------

def test_product_state_validation():
    with pytest.raises(OperatorError):
        ProductState({0: np.diag([0.7, 0.7])})
    with pytest.raises(NotHermitianError):
        ProductState({0: [[0.5, 0.1], [0.0, 0.5]]})
    with pytest.raises(OperatorError):
        ProductState({0: np.diag([1.2, -0.2])})


def test_umegaki_traceless_factor():
    b = np.array([[1, 2], [3, 4]], dtype=complex)
    a = op([0, 1], np.kron(SZ, b))
    r = umegaki_expect(a, [0], ProductState())
    assert r.support == (1,)
    assert np.abs(r.matrix).max() == 0


def test_umegaki_identity():
    r = umegaki_expect(identity((0, 1, 2), (2, 2, 2)), [1], ProductState())
    assert r.support == (0, 2)
    assert np.abs(r.matrix - np.eye(4)).max() == 0


def test_umegaki_diag_example():
    a = op([0, 1], np.diag([1.0, 2, 3, 4]))
    r = umegaki_expect(a, [1], ProductState())
    assert np.abs(r.matrix - np.diag([1.5, 3.5])).max() < 1e-15


def test_umegaki_weighted_sum(rng):
    # brute-force sum over the traced index
    a = random_operator((0, 1), (2, 3), rng)
    rho = random_density(3, rng)
    r = umegaki_expect(a, [1], ProductState({1: rho}))
    t = a.matrix.reshape(2, 3, 2, 3)
    expect = np.zeros((2, 2), dtype=complex)
    for p in range(3):
        for q in range(3):
            expect += t[:, p, :, q] * rho[q, p]
    assert np.abs(r.matrix - expect).max() < 1e-14


def test_umegaki_product_input(rng):
    ax = random_operator((0,), (2,), rng)
    b = random_operator((1,), (2,), rng)
    rho = random_density(2, rng)
    r = umegaki_expect(multiply(ax, b), [0], ProductState({0: rho}))
    assert np.abs(r.matrix - np.trace(rho @ ax.matrix) * b.matrix).max() < 1e-14


def test_expect_value_examples():
    assert abs(expect_value(identity((0, 1), (2, 2)), ProductState()) - 1) < 1e-15
    assert abs(expect_value(op([4], SZ), ProductState())) < 1e-15
    assert abs(expect_value(op([0, 1], np.diag([1.0, 2, 3, 4])), ProductState()) - 2.5) < 1e-15


def random_state(sites, rng, dims):
    return ProductState({s: random_density(dims[s], rng) for s in sites})


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(0, 2), st.integers(0, 2))
def test_partial_traces_commute(seed, x, y):
    rng = np.random.default_rng(seed)
    dims = {0: 2, 1: 3, 2: 2}
    state = random_state(range(3), rng, dims)
    a = random_operator((0, 1, 2), (2, 3, 2), rng)
    xy = umegaki_expect(umegaki_expect(a, [x], state), [y], state)
    yx = umegaki_expect(umegaki_expect(a, [y], state), [x], state)
    assert np.abs(xy.matrix - yx.matrix).max() < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.sets(st.integers(0, 3), max_size=4),
       st.sets(st.integers(0, 3), max_size=4))
def test_tower_property(seed, s1, s2):
    rng = np.random.default_rng(seed)
    dims = {s: 2 for s in range(4)}
    state = random_state(range(4), rng, dims)
    a = random_operator((0, 1, 2, 3), (2,) * 4, rng)
    both = s1 | s2
    staged = umegaki_expect(umegaki_expect(a, s2, state), both, state)
    direct = umegaki_expect(a, both, state)
    assert np.abs(staged.matrix - direct.matrix).max() < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_module_property(seed):
    rng = np.random.default_rng(seed)
    state = random_state(range(3), rng, {s: 2 for s in range(3)})
    a = random_operator((0, 1, 2), (2, 2, 2), rng)
    c = random_operator((0, 2), (2, 2), rng)
    lhs = umegaki_expect(multiply(c, a), [1], state)
    rhs = multiply(c, umegaki_expect(a, [1], state))
    assert np.abs(lhs.matrix - rhs.matrix).max() < 1e-12
    lhs = umegaki_expect(multiply(a, c), [1], state)
    rhs = multiply(umegaki_expect(a, [1], state), c)
    assert np.abs(lhs.matrix - rhs.matrix).max() < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.sets(st.integers(0, 2), max_size=3))
def test_positivity_and_state_compatibility(seed, traced):
    rng = np.random.default_rng(seed)
    state = random_state(range(3), rng, {s: 2 for s in range(3)})
    b = random_operator((0, 1, 2), (2, 2, 2), rng)
    a = multiply(adjoint(b), b)
    e = umegaki_expect(a, traced, state)
    if e.support:
        assert np.linalg.eigvalsh(e.matrix).min() >= -1e-10
    assert abs(expect_value(a, state) - expect_value(e, state)) < 1e-12


# -- inverse square root -----------------------------------------------------

def test_inv_sqrt_identity():
    r = inv_sqrt_psd(identity((0,), (2,)), 1e-8)
    assert np.abs(r.matrix - np.eye(2)).max() < 1e-15


def test_inv_sqrt_diag():
    r = inv_sqrt_psd(op([0], np.diag([4.0, 9.0])), 1e-8)
    assert np.abs(r.matrix - np.diag([0.5, 1 / 3])).max() < 1e-15


def test_inv_sqrt_contract(rng):
    b = random_operator((0, 1), (2, 2), rng)
    a = multiply(adjoint(b), b) + identity((0, 1), (2, 2)) * 0.1
    r = inv_sqrt_psd(a, 1e-8)
    chk = multiply(r, multiply(a, r))
    assert np.abs(chk.matrix - np.eye(4)).max() < 1e-9 * a.norm()


def test_inv_sqrt_floor(rng):
    u, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    m = u @ np.diag([1.0, 0.5, 1e-10]) @ u.T
    with pytest.raises(EigenvalueFloorError) as err:
        inv_sqrt_psd(LocalOperator((0,), (3,), m), 1e-8)
    assert err.value.min_eigenvalue < 1e-8


def test_inv_sqrt_not_hermitian():
    with pytest.raises(NotHermitianError):
        inv_sqrt_psd(op([0], [[1.0, 1.0], [0.0, 1.0]]), 1e-8)


# -- sandwich contraction -------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_sandwich_matches_dense(seed):
    rng = np.random.default_rng(seed)
    state = random_state(range(6), rng, {s: 2 for s in range(6)})
    factors = [random_operator(s, (2,) * len(s), rng)
               for s in [(0, 1, 2), (2, 3), (3, 4, 5), (1, 4)]]
    a = random_operator((1, 3), (2, 2), rng)
    traced = [int(s) for s in rng.choice(6, size=int(rng.integers(0, 7)), replace=False)]
    sweep = sandwich_trace(a, factors, traced, state)
    dense = dense_sandwich_trace(a, factors, traced, state)
    assert sweep.support == dense.support
    assert np.abs(sweep.matrix - dense.matrix).max() < 1e-12


def test_sandwich_cap(rng):
    factors = [random_operator((0, 1, 2, 3), (2,) * 4, rng)]
    with pytest.raises(DimensionCapError):
        sandwich_trace(identity((), ()), factors, [], ProductState(), cap=8)


def test_site_model_labels(line):
    sites = SiteModel(line, dims={(3,): 3})
    a = sites.operator([(1,), (0,)], np.eye(4))
    assert a.support == tuple(sorted([line.index((1,)), line.index((0,))]))
    assert sites.dim(sites.site((3,))) == 3
