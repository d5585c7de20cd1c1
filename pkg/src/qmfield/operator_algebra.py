"""Finitely supported operators on a tensor product of site spaces.

Sites are integers: the canonical position of a vertex in its
:class:`~qmfield.graph_topology.GraphWindow`.  A :class:`LocalOperator`
stores its support sorted ascending, so the smallest site is the most
significant digit of the mixed-radix row/column index.

The product reference state is a :class:`ProductState`, one density matrix
per site; :func:`umegaki_expect` is the state-weighted partial trace
``E(a_L ⊗ a_rest) = tr(rho_L a_L) a_rest``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Mapping, Sequence

import numpy as np

HERMITIAN_TOL = 1e-10
STATE_TOL = 1e-12
IDENTITY_FACTOR_TOL = 1e-12


class OperatorError(ValueError):
    pass


class SupportError(OperatorError):
    pass


class DimensionMismatch(OperatorError):
    pass


class NotHermitianError(OperatorError):
    pass


class EigenvalueFloorError(OperatorError):
    def __init__(self, message, min_eigenvalue):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


# --------------------------------------------------------------------------
# sites


class SiteModel:
    """Local dimensions, plus optional label <-> site translation.

    ``dims`` is keyed by vertex label when a window is given, else by site.
    """

    def __init__(self, window=None, dims: Mapping | None = None, default: int = 2):
        if default < 1:
            raise ValueError("local dimension must be >= 1")
        self.window = window
        self.default = int(default)
        self._dims = {}
        for key, d in (dims or {}).items():
            if int(d) < 1:
                raise ValueError(f"local dimension at {key!r} must be >= 1")
            site = self.site(key) if window is not None else int(key)
            self._dims[site] = int(d)

    def dim(self, site: int) -> int:
        return self._dims.get(site, self.default)

    def dims(self, sites: Iterable[int]) -> tuple:
        return tuple(self.dim(s) for s in sites)

    def site(self, label) -> int:
        if self.window is None:
            return int(label)
        return self.window.index(label)

    def sites(self, labels: Iterable) -> tuple:
        return tuple(sorted(self.site(v) for v in labels))

    def label(self, site: int):
        return site if self.window is None else self.window.label(site)

    def labels(self, sites: Iterable[int]) -> tuple:
        return tuple(self.label(s) for s in sites)

    def operator(self, labels: Sequence, matrix) -> "LocalOperator":
        """Operator whose tensor factors are listed in the order of ``labels``."""
        sites = [self.site(v) for v in labels]
        return LocalOperator.from_ordered(sites, self.dims(sites), matrix)

    def identity(self, sites: Iterable[int]) -> "LocalOperator":
        sites = tuple(sorted(sites))
        return identity(sites, self.dims(sites))


# --------------------------------------------------------------------------
# operators


def _tensor(matrix, dims):
    return matrix.reshape(tuple(dims) + tuple(dims))


@dataclass(frozen=True, eq=False)
class LocalOperator:
    support: tuple
    dims: tuple
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        support = tuple(int(s) for s in self.support)
        dims = tuple(int(d) for d in self.dims)
        if len(support) != len(dims):
            raise DimensionMismatch("support and dims differ in length")
        if any(b <= a for a, b in zip(support, support[1:])):
            raise SupportError(f"support {support} is not strictly increasing")
        m = np.array(self.matrix, dtype=complex)
        size = int(np.prod(dims, dtype=np.int64)) if dims else 1
        if m.shape != (size, size):
            raise DimensionMismatch(f"matrix shape {m.shape} does not match dims {dims}")
        m.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_ordered(cls, sites: Sequence[int], dims: Sequence[int], matrix) -> "LocalOperator":
        """Build from factors listed in arbitrary order; permutes to sorted support."""
        sites = [int(s) for s in sites]
        if len(set(sites)) != len(sites):
            raise SupportError(f"duplicate sites in {sites}")
        order = sorted(range(len(sites)), key=sites.__getitem__)
        m = np.asarray(matrix, dtype=complex)
        n = len(sites)
        t = _tensor(m, dims).transpose(order + [n + i for i in order])
        new_dims = tuple(dims[i] for i in order)
        size = int(np.prod(new_dims, dtype=np.int64)) if n else 1
        return cls(tuple(sites[i] for i in order), new_dims, t.reshape(size, size))

    @classmethod
    def scalar(cls, value) -> "LocalOperator":
        return cls((), (), np.array([[value]], dtype=complex))

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def tensor(self) -> np.ndarray:
        return _tensor(self.matrix, self.dims)

    @property
    def dag(self) -> "LocalOperator":
        return adjoint(self)

    def dim_of(self, site: int) -> int:
        return self.dims[self.support.index(site)]

    def __matmul__(self, other):
        return multiply(self, other)

    def __mul__(self, c):
        if isinstance(c, LocalOperator):
            return multiply(self, c)
        return LocalOperator(self.support, self.dims, self.matrix * c)

    __rmul__ = lambda self, c: self.__mul__(c)

    def __neg__(self):
        return self * -1

    def __add__(self, other):
        a, b = _align(self, other)
        return LocalOperator(a.support, a.dims, a.matrix + b.matrix)

    def __sub__(self, other):
        a, b = _align(self, other)
        return LocalOperator(a.support, a.dims, a.matrix - b.matrix)

    def norm(self) -> float:
        """Operator (spectral) norm."""
        return float(np.linalg.norm(self.matrix, 2)) if self.size else 0.0

    def to_scalar(self) -> complex:
        if self.support:
            raise SupportError(f"operator on {self.support} is not a scalar")
        return complex(self.matrix[0, 0])

    def __repr__(self):
        return f"LocalOperator(support={self.support}, dims={self.dims})"


def identity(support: Sequence[int], dims: Sequence[int]) -> LocalOperator:
    size = int(np.prod(dims, dtype=np.int64)) if len(dims) else 1
    return LocalOperator(tuple(support), tuple(dims), np.eye(size, dtype=complex))


def _site_dims(*ops) -> dict:
    out = {}
    for op in ops:
        for s, d in zip(op.support, op.dims):
            if out.setdefault(s, d) != d:
                raise DimensionMismatch(f"site {s} has dimensions {out[s]} and {d}")
    return out


def _align(a, b):
    dims = _site_dims(a, b)
    target = tuple(sorted(dims))
    return embed(a, target, dims), embed(b, target, dims)


def embed(a: LocalOperator, target_support: Iterable[int], sites=None) -> LocalOperator:
    """``a ⊗ id`` on ``target_support``.

    ``sites`` supplies dimensions of the new sites: a :class:`SiteModel`, a
    mapping ``site -> dim``, or ``None`` for qubits.
    """
    target = tuple(sorted(set(int(s) for s in target_support)))
    if not set(a.support) <= set(target):
        raise SupportError(f"support {a.support} is not contained in {target}")
    if target == a.support:
        return a
    own = dict(zip(a.support, a.dims))

    def dim(s):
        if s in own:
            return own[s]
        if sites is None:
            return 2
        if isinstance(sites, SiteModel):
            return sites.dim(s)
        return sites[s]

    extra = [s for s in target if s not in own]
    extra_dims = [dim(s) for s in extra]
    big = np.kron(a.matrix, np.eye(int(np.prod(extra_dims, dtype=np.int64)), dtype=complex))
    order_sites = list(a.support) + extra
    return LocalOperator.from_ordered(order_sites, list(a.dims) + extra_dims, big)


def _mul_into(big: LocalOperator, small: LocalOperator, left: bool) -> LocalOperator:
    """``small·big`` (left) or ``big·small`` (right), with supp(small) ⊆ supp(big)."""
    n = len(big.support)
    pos = [big.support.index(s) for s in small.support]
    k = len(pos)
    T = big.tensor
    S = small.tensor
    if left:
        # new[r, c] = sum_m S[r_s, m_s] T[m, c]
        out = np.tensordot(S, T, axes=(list(range(k, 2 * k)), pos))
        # axes: S rows (k), T remaining rows (n-k), T cols (n)
        rest = [i for i in range(n) if i not in pos]
        perm = [0] * (2 * n)
        for j, p in enumerate(pos):
            perm[p] = j
        for j, p in enumerate(rest):
            perm[p] = k + j
        for i in range(n):
            perm[n + i] = n + i
        out = out.transpose(perm)
    else:
        # new[r, c] = sum_m T[r, m] S[m_s, c_s]
        cols = [n + p for p in pos]
        out = np.tensordot(T, S, axes=(cols, list(range(k))))
        # axes: T rows (n), T remaining cols (n-k), S cols (k)
        rest = [i for i in range(n) if i not in pos]
        perm = list(range(n)) + [0] * n
        for j, p in enumerate(rest):
            perm[n + p] = n + j
        for j, p in enumerate(pos):
            perm[n + p] = 2 * n - k + j
        out = out.transpose(perm)
    return LocalOperator(big.support, big.dims, out.reshape(big.size, big.size))


def multiply(a: LocalOperator, b: LocalOperator) -> LocalOperator:
    """Product ``a·b`` on the union of the supports."""
    dims = _site_dims(a, b)
    union = tuple(sorted(dims))
    if not b.support:
        return LocalOperator(a.support, a.dims, a.matrix * b.matrix[0, 0])
    if not a.support:
        return LocalOperator(b.support, b.dims, b.matrix * a.matrix[0, 0])
    if a.support == b.support:
        return LocalOperator(a.support, a.dims, a.matrix @ b.matrix)
    if not set(a.support) & set(b.support):
        # the Kronecker product makes disjoint factors commute exactly
        lo, hi = (a, b) if a.support[0] < b.support[0] else (b, a)
        return LocalOperator.from_ordered(lo.support + hi.support, lo.dims + hi.dims,
                                          np.kron(lo.matrix, hi.matrix))
    if a.support == union:
        return _mul_into(a, b, left=False)
    if b.support == union:
        return _mul_into(b, a, left=True)
    if a.size >= b.size:
        return _mul_into(embed(a, union, dims), b, left=False)
    return _mul_into(embed(b, union, dims), a, left=True)


def product(ops: Iterable[LocalOperator]) -> LocalOperator:
    """Ordered product ``ops[0]·ops[1]·...``; the empty product is the scalar 1."""
    return reduce(multiply, ops, LocalOperator.scalar(1.0))


def adjoint(a: LocalOperator) -> LocalOperator:
    return LocalOperator(a.support, a.dims, a.matrix.conj().T)


def max_abs_diff(a: LocalOperator, b: LocalOperator) -> float:
    """Entrywise max |a - b| after embedding both on the union support."""
    x, y = _align(a, b)
    return float(np.max(np.abs(x.matrix - y.matrix))) if x.size else 0.0


def canonicalize(a: LocalOperator, tol: float = IDENTITY_FACTOR_TOL) -> LocalOperator:
    """Drop sites on which ``a`` acts as the identity (relative tolerance)."""
    scale = max(float(np.max(np.abs(a.matrix))), 1e-300)
    changed = True
    while changed and a.support:
        changed = False
        for s, d in zip(a.support, a.dims):
            flat = maximally_mixed_state()
            reduced = umegaki_expect(a, [s], flat)
            back = embed(reduced, a.support, {s: d})
            if np.max(np.abs(back.matrix - a.matrix)) <= tol * scale:
                a = reduced
                changed = True
                break
    return a


# --------------------------------------------------------------------------
# product state and partial traces


class ProductState:
    """``phi0 = ⊗_x tr(rho_x ·)``; sites without an entry are maximally mixed."""

    def __init__(self, densities: Mapping[int, np.ndarray] | None = None,
                 tol: float = STATE_TOL):
        self._rho = {}
        for site, rho in (densities or {}).items():
            rho = np.array(rho, dtype=complex)
            check_density(rho, tol)
            rho.setflags(write=False)
            self._rho[int(site)] = rho

    def rho(self, site: int, dim: int) -> np.ndarray:
        rho = self._rho.get(site)
        if rho is None:
            return np.eye(dim, dtype=complex) / dim
        if rho.shape != (dim, dim):
            raise DimensionMismatch(f"density at site {site} has shape {rho.shape}, need {dim}")
        return rho

    def probabilities(self, site: int, dim: int) -> np.ndarray:
        return np.real(np.diag(self.rho(site, dim)))

    def is_diagonal(self, sites: Iterable[int] | None = None, tol: float = 0.0) -> bool:
        keys = self._rho if sites is None else [s for s in sites if s in self._rho]
        for s in keys:
            rho = self._rho[s]
            if np.max(np.abs(rho - np.diag(np.diag(rho)))) > tol:
                return False
        return True

    @property
    def explicit_sites(self) -> tuple:
        return tuple(sorted(self._rho))


def maximally_mixed_state() -> ProductState:
    return ProductState()


def check_density(rho: np.ndarray, tol: float = STATE_TOL):
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionMismatch(f"density matrix must be square, got {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise NotHermitianError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise OperatorError(f"density matrix has trace {np.trace(rho).real:.3g}")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise OperatorError("density matrix is not positive semidefinite")


def umegaki_expect(a: LocalOperator, traced: Iterable[int], state: ProductState) -> LocalOperator:
    """State-weighted partial trace of ``a`` over ``traced ∩ support(a)``."""
    traced = set(int(s) for s in traced) & set(a.support)
    if not traced:
        return a
    T = a.tensor
    support = list(a.support)
    dims = list(a.dims)
    for s in sorted(traced, reverse=True):
        i = support.index(s)
        n = len(support)
        rho = state.rho(s, dims[i])
        # sum_{p,q} T[.., p(row i), .., q(col i), ..] rho[q, p]
        T = np.tensordot(T, rho, axes=([i, n + i], [1, 0]))
        del support[i]
        del dims[i]
    size = int(np.prod(dims, dtype=np.int64)) if dims else 1
    return LocalOperator(tuple(support), tuple(dims), T.reshape(size, size))


def expect_value(a: LocalOperator, state: ProductState) -> complex:
    return umegaki_expect(a, a.support, state).to_scalar()


def inv_sqrt_psd(a: LocalOperator, floor: float) -> LocalOperator:
    """``a^{-1/2}`` of a Hermitian positive definite operator.

    Raises :class:`EigenvalueFloorError` when an eigenvalue is below ``floor``.
    """
    m = a.matrix
    scale = max(1.0, float(np.max(np.abs(m)))) if a.size else 1.0
    if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL * scale:
        raise NotHermitianError("operator is not Hermitian")
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    if w.min() < floor:
        raise EigenvalueFloorError(
            f"min eigenvalue {w.min():.3e} below floor {floor:.3e}", float(w.min()))
    return LocalOperator(a.support, a.dims, (v / np.sqrt(w)) @ v.conj().T)


class DimensionCapError(OperatorError):
    pass


WORKING_DIM_CAP = 2 ** 12


def sandwich_trace(a: LocalOperator, factors: Sequence[LocalOperator], traced: Iterable[int],
                   state: ProductState, cap: int = WORKING_DIM_CAP) -> LocalOperator:
    """``E_traced(K* a K)`` with ``K = factors[0]·factors[1]·...``.

    Conjugates by one factor at a time, innermost (``factors[0]``) first, and
    traces a site out as soon as no remaining factor acts on it.  This is a
    contraction order for the same expression, not a use of any identity
    between the factors: their order is kept as given.
    """
    traced = set(int(s) for s in traced)
    last = {}
    for i, f in enumerate(factors):
        for s in f.support:
            last[s] = i
    X = a
    ready = [s for s in X.support if s in traced and last.get(s, -1) < 0]
    X = umegaki_expect(X, ready, state)
    for i, f in enumerate(factors):
        grown = int(np.prod(list(_site_dims(X, f).values()), dtype=np.int64))
        if grown > cap:
            raise DimensionCapError(f"working operator would reach dimension {grown} (cap {cap})")
        X = multiply(adjoint(f), multiply(X, f))
        ready = [s for s in X.support if s in traced and last.get(s, -1) <= i]
        X = umegaki_expect(X, ready, state)
    rest = [s for s in X.support if s in traced]
    return umegaki_expect(X, rest, state)


def dense_sandwich_trace(a: LocalOperator, factors: Sequence[LocalOperator],
                         traced: Iterable[int], state: ProductState,
                         cap: int = WORKING_DIM_CAP) -> LocalOperator:
    """Same value as :func:`sandwich_trace`, by forming ``K`` in full first."""
    K = product(factors)
    size = int(np.prod(list(_site_dims(a, K).values()), dtype=np.int64))
    if size > cap:
        raise DimensionCapError(f"dense route needs dimension {size} (cap {cap})")
    return umegaki_expect(multiply(adjoint(K), multiply(a, K)), traced, state)


# --------------------------------------------------------------------------
# random inputs for property checks


def random_operator(support: Sequence[int], dims: Sequence[int], rng) -> LocalOperator:
    size = int(np.prod(dims, dtype=np.int64)) if len(dims) else 1
    m = rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size))
    return LocalOperator(tuple(support), tuple(dims), m / np.sqrt(2 * size))


def random_density(dim: int, rng, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    rho = (rho + rho.conj().T) / 2
    return rho / np.trace(rho).real


def random_diagonal_density(dim: int, rng) -> np.ndarray:
    p = rng.uniform(0.2, 1.0, size=dim)
    return np.diag(p / p.sum()).astype(complex)


def random_unitary(dim: int, rng) -> np.ndarray:
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))
