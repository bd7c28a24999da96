"""Exact linear algebra for even integer lattices.

Everything here is exact: integers, ``fractions.Fraction`` in hot loops and
sympy domain matrices for Smith normal forms and rational solves. No floating
point value ever reaches a decision.
"""

from __future__ import annotations

import logging
import math
import operator
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cache, cached_property
from typing import Iterator, NamedTuple, Sequence, Union

from sympy.polys.domains import QQ, ZZ
from sympy.polys.matrices import DomainMatrix
from sympy.polys.matrices.normalforms import smith_normal_decomp

from .config import get_settings
from .errors import EnumerationLimitError, InputError

logger = logging.getLogger(__name__)

Rational = Union[int, Fraction]
IntMatrix = tuple[tuple[int, ...], ...]

# Bourbaki numbering of the E8 Dynkin diagram: 1-3-4-5-6-7-8 with 2 hanging off 4.
E8_EDGES = ((0, 2), (2, 3), (1, 3), (3, 4), (4, 5), (5, 6), (6, 7))


def _to_int(value) -> int:
    try:
        return operator.index(value)
    except TypeError as exc:
        raise InputError(f"expected an integer, got {value!r}") from exc


def _int_matrix(rows) -> IntMatrix:
    return tuple(tuple(_to_int(x) for x in row) for row in rows)


def _dm(rows: Sequence[Sequence[int]], ncols: int) -> DomainMatrix:
    return DomainMatrix([[ZZ(x) for x in row] for row in rows], (len(rows), ncols), ZZ)


def _plain(dm: DomainMatrix) -> list[list[int]]:
    return [[int(x) for x in row] for row in dm.to_list()]


def mat_vec(rows: Sequence[Sequence], x: Sequence) -> tuple:
    return tuple(sum(r * c for r, c in zip(row, x)) for row in rows)


def pair(gram: Sequence[Sequence[int]], x: Sequence, y: Sequence):
    """Bilinear form x^T G y on plain coordinate sequences."""
    return sum(xi * gy for xi, gy in zip(x, mat_vec(gram, y)))


def inertia(gram: Sequence[Sequence[int]]) -> tuple[int, int, int]:
    """(positive, negative, zero) eigenvalue counts of a symmetric integer matrix.

    The characteristic polynomial of a symmetric matrix is real-rooted, so
    Descartes' rule of signs counts its positive roots exactly.
    """
    n = len(gram)
    if n == 0:
        return 0, 0, 0
    coeffs = [int(c) for c in _dm(gram, n).charpoly()]
    zero = 0
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
        zero += 1
    signs = [c > 0 for c in coeffs if c]
    positive = sum(1 for a, b in zip(signs, signs[1:]) if a != b)
    return positive, n - zero - positive, zero


@dataclass(frozen=True)
class IntegerLattice:
    """Free Z-module with an even symmetric Gram matrix.

    Degenerate Gram matrices are representable (isotropic complements show up
    mid-computation) and flagged by ``is_degenerate``; operations that need a
    nondegenerate form reject them.
    """

    gram: IntMatrix
    label: str | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        gram = _int_matrix(self.gram)
        object.__setattr__(self, "gram", gram)
        n = len(gram)
        for i, row in enumerate(gram):
            if len(row) != n:
                raise InputError("Gram matrix must be square")
            if row[i] % 2:
                raise InputError(f"diagonal entry {i} is odd; only even lattices are supported")
            for j in range(i):
                if row[j] != gram[j][i]:
                    raise InputError(f"Gram matrix is not symmetric at ({i}, {j})")

    @property
    def rank(self) -> int:
        return len(self.gram)

    @cached_property
    def inertia(self) -> tuple[int, int, int]:
        return inertia(self.gram)

    @cached_property
    def determinant(self) -> int:
        if self.rank == 0:
            return 1
        return int(_dm(self.gram, self.rank).det())

    @property
    def is_degenerate(self) -> bool:
        return self.determinant == 0

    def vector(self, coords: Sequence[int]) -> LatticeVector:
        return LatticeVector(self, tuple(coords))

    def zero(self) -> LatticeVector:
        return LatticeVector(self, (0,) * self.rank)

    def basis_vector(self, index: int) -> LatticeVector:
        return LatticeVector(self, tuple(int(i == index) for i in range(self.rank)))

    def __repr__(self) -> str:
        name = self.label or "lattice"
        return f"IntegerLattice({name}, rank={self.rank})"


@dataclass(frozen=True)
class LatticeVector:
    lattice: IntegerLattice
    coords: tuple[int, ...]

    def __post_init__(self) -> None:
        coords = tuple(_to_int(x) for x in self.coords)
        object.__setattr__(self, "coords", coords)
        if len(coords) != self.lattice.rank:
            raise InputError(
                f"vector has {len(coords)} coordinates, lattice rank is {self.lattice.rank}"
            )

    def _check(self, other: LatticeVector) -> None:
        if other.lattice is not self.lattice and other.lattice != self.lattice:
            raise InputError("vectors belong to different lattices")

    def __add__(self, other: LatticeVector) -> LatticeVector:
        self._check(other)
        return LatticeVector(self.lattice, tuple(a + b for a, b in zip(self.coords, other.coords)))

    def __sub__(self, other: LatticeVector) -> LatticeVector:
        self._check(other)
        return LatticeVector(self.lattice, tuple(a - b for a, b in zip(self.coords, other.coords)))

    def __neg__(self) -> LatticeVector:
        return LatticeVector(self.lattice, tuple(-a for a in self.coords))

    def __mul__(self, k: int) -> LatticeVector:
        return LatticeVector(self.lattice, tuple(k * a for a in self.coords))

    __rmul__ = __mul__

    def is_zero(self) -> bool:
        return not any(self.coords)

    @property
    def content(self) -> int:
        return math.gcd(*self.coords)

    def __repr__(self) -> str:
        return f"LatticeVector{self.coords}"


@dataclass(frozen=True)
class Embedding:
    """Isometric map source -> target; ``matrix`` columns are images of the source basis."""

    source: IntegerLattice
    target: IntegerLattice
    matrix: IntMatrix

    def __post_init__(self) -> None:
        matrix = _int_matrix(self.matrix)
        object.__setattr__(self, "matrix", matrix)
        rows, cols = self.target.rank, self.source.rank
        if len(matrix) != rows or any(len(r) != cols for r in matrix):
            raise InputError(f"embedding matrix must be {rows}x{cols}")
        if cols == 0:
            return
        m = _dm(matrix, cols)
        pulled = m.transpose().matmul(_dm(self.target.gram, rows)).matmul(m)
        if _int_matrix(_plain(pulled)) != self.source.gram:
            raise InputError("embedding is not Gram compatible: M^T G M != source Gram")

    @cached_property
    def is_primitive(self) -> bool:
        if self.source.rank == 0:
            return True
        diag = smith_normal_form(self.matrix).diagonal
        return len(diag) == self.source.rank and all(d == 1 for d in diag)

    def column(self, index: int) -> LatticeVector:
        return LatticeVector(self.target, tuple(row[index] for row in self.matrix))

    def image(self, x: LatticeVector | Sequence[Rational]):
        """Map source coordinates to target coordinates (integral or rational)."""
        if isinstance(x, LatticeVector):
            if x.lattice != self.source:
                raise InputError("vector is not in the embedding source")
            return LatticeVector(self.target, mat_vec(self.matrix, x.coords))
        if len(x) != self.source.rank:
            raise InputError("dimension mismatch for embedding image")
        return mat_vec(self.matrix, x)


def make_embedding(
    source: IntegerLattice,
    target: IntegerLattice,
    matrix: Sequence[Sequence[int]],
    *,
    primitive: bool = False,
) -> Embedding:
    embedding = Embedding(source, target, _int_matrix(matrix))
    if primitive and not embedding.is_primitive:
        raise InputError("embedding was asserted primitive but its image is not saturated")
    return embedding


class SmithForm(NamedTuple):
    D: IntMatrix
    P: IntMatrix
    Q: IntMatrix

    @property
    def diagonal(self) -> tuple[int, ...]:
        return tuple(self.D[i][i] for i in range(min(len(self.D), len(self.Q))))


def _identity(n: int) -> IntMatrix:
    return tuple(tuple(int(i == j) for j in range(n)) for i in range(n))


def smith_normal_form(matrix: Sequence[Sequence[int]]) -> SmithForm:
    """Return (D, P, Q) with P M Q = D, P and Q unimodular, d_1 | d_2 | ... >= 0."""
    rows = [list(row) for row in _int_matrix(matrix)]
    m = len(rows)
    n = len(rows[0]) if m else 0
    if m == 0 or n == 0:
        return SmithForm(tuple((0,) * n for _ in range(m)), _identity(m), _identity(n))
    dm = DomainMatrix([[ZZ(x) for x in row] for row in rows], (m, n), ZZ)
    d, p, q = smith_normal_decomp(dm)
    D = [[int(x) for x in row] for row in d.to_list()]
    P = [[int(x) for x in row] for row in p.to_list()]
    Q = [[int(x) for x in row] for row in q.to_list()]
    for i in range(min(m, n)):
        if D[i][i] < 0:
            D[i][i] = -D[i][i]
            P[i] = [-x for x in P[i]]
    diag = [D[i][i] for i in range(min(m, n))]
    chain_ok = all(
        (diag[i + 1] % diag[i] == 0) if diag[i] else diag[i + 1] == 0
        for i in range(len(diag) - 1)
    )
    if not chain_ok or _plain(_dm(P, m).matmul(dm).matmul(_dm(Q, n))) != D:
        raise ArithmeticError("Smith normal decomposition failed verification")
    return SmithForm(_int_matrix(D), _int_matrix(P), _int_matrix(Q))


def integer_kernel(rows: Sequence[Sequence[int]], ncols: int) -> list[tuple[int, ...]]:
    """Basis of the saturated kernel {x in Z^ncols : A x = 0}."""
    if not rows:
        return list(_identity(ncols))
    snf = smith_normal_form(rows)
    r = sum(1 for d in snf.diagonal if d != 0)
    return [tuple(snf.Q[k][j] for k in range(ncols)) for j in range(r, ncols)]


def _qq(x: Rational):
    x = Fraction(x)
    return QQ(x.numerator, x.denominator)


def _fraction(element) -> Fraction:
    return Fraction(int(element.numerator), int(element.denominator))


def solve_rational(matrix: Sequence[Sequence[Rational]], rhs: Sequence[Rational]) -> tuple[Fraction, ...]:
    """Solve a square nonsingular rational system exactly."""
    n = len(matrix)
    if n == 0:
        return ()
    a = DomainMatrix([[_qq(x) for x in row] for row in matrix], (n, n), QQ)
    if a.det() == QQ.zero:
        raise InputError("singular linear system")
    b = DomainMatrix([[_qq(x)] for x in rhs], (n, 1), QQ)
    return tuple(_fraction(row[0]) for row in a.lu_solve(b).to_list())


def _coords(L: IntegerLattice, x) -> tuple:
    if isinstance(x, LatticeVector):
        if x.lattice is not L and x.lattice != L:
            raise InputError("vector does not belong to this lattice")
        return x.coords
    x = tuple(x)
    if len(x) != L.rank:
        raise InputError(f"dimension mismatch: {len(x)} coordinates for rank {L.rank}")
    return x


def inner(L: IntegerLattice, x, y):
    """The pairing (x, y). Integral for lattice vectors, exact rational otherwise."""
    return pair(L.gram, _coords(L, x), _coords(L, y))


def direct_sum(parts: Sequence[IntegerLattice], label: str | None = None) -> IntegerLattice:
    size = sum(p.rank for p in parts)
    gram = [[0] * size for _ in range(size)]
    offset = 0
    for part in parts:
        for i, row in enumerate(part.gram):
            gram[offset + i][offset : offset + part.rank] = row
        offset += part.rank
    if label is None and parts:
        label = "+".join(p.label or "?" for p in parts)
    return IntegerLattice(_int_matrix(gram), label=label)


def e8_minus_gram() -> IntMatrix:
    gram = [[-2 if i == j else 0 for j in range(8)] for i in range(8)]
    for i, j in E8_EDGES:
        gram[i][j] = gram[j][i] = 1
    return _int_matrix(gram)


_RANK1 = re.compile(r"^rank1\((-?\d+)\)$")


def standard_lattice(name: str, k: int | None = None) -> IntegerLattice:
    """``U``, ``E8_minus`` (negated Bourbaki Cartan matrix) or ``rank1`` / ``rank1(k)``."""
    match = _RANK1.match(name.replace(" ", ""))
    if match:
        name, k = "rank1", int(match.group(1))
    if name == "U":
        return IntegerLattice(((0, 1), (1, 0)), label="U")
    if name == "E8_minus":
        return IntegerLattice(e8_minus_gram(), label="E8(-1)")
    if name == "rank1":
        if k is None or k == 0 or k % 2:
            raise InputError(f"rank1 lattice needs an even nonzero k, got {k!r}")
        return IntegerLattice(((k,),), label=f"<{k}>")
    raise InputError(f"unknown standard lattice {name!r}")


def signature(L: IntegerLattice) -> tuple[int, int]:
    positive, negative, zero = L.inertia
    if zero:
        raise InputError("signature requested for a degenerate lattice")
    return positive, negative


def divisibility(L: IntegerLattice, v) -> int:
    coords = _coords(L, v)
    if not any(coords):
        raise InputError("divisibility of the zero vector is undefined")
    div = math.gcd(*mat_vec(L.gram, coords))
    if div == 0:
        raise InputError("vector lies in the radical of a degenerate lattice")
    return div


def is_primitive(L: IntegerLattice, v) -> bool:
    coords = _coords(L, v)
    if not any(coords):
        raise InputError("the zero vector is not primitive")
    return math.gcd(*coords) == 1


def primitive_part(L: IntegerLattice, v) -> LatticeVector:
    coords = _coords(L, v)
    if not any(coords):
        raise InputError("the zero vector has no primitive part")
    content = math.gcd(*coords)
    return LatticeVector(L, tuple(c // content for c in coords))


@dataclass(frozen=True)
class DiscriminantClass:
    invariant_factors: tuple[int, ...]
    exponents: tuple[int, ...]

    @property
    def order(self) -> int:
        return math.lcm(1, *(d // math.gcd(a, d) for a, d in zip(self.exponents, self.invariant_factors)))

    @property
    def is_trivial(self) -> bool:
        return not any(self.exponents)

    def __neg__(self) -> DiscriminantClass:
        return DiscriminantClass(
            self.invariant_factors,
            tuple(-a % d for a, d in zip(self.exponents, self.invariant_factors)),
        )


@dataclass(frozen=True)
class DiscriminantGroup:
    """A_L = L^dual / L with its discriminant quadratic form.

    ``generator_lifts[i]`` is a rational vector g_i with d_i g_i in L. ``q_values``
    are q(g_i) in [0, 2) and ``b_values`` are b(g_i, g_j) in [0, 1).
    """

    invariant_factors: tuple[int, ...]
    generator_lifts: tuple[tuple[Fraction, ...], ...]
    q_values: tuple[Fraction, ...]
    b_values: tuple[tuple[Fraction, ...], ...]
    gram: IntMatrix = field(repr=False)
    reduction: IntMatrix = field(repr=False)

    @property
    def order(self) -> int:
        return math.prod(self.invariant_factors)

    @property
    def exponent(self) -> int:
        return self.invariant_factors[-1] if self.invariant_factors else 1

    def element(self, exponents: Sequence[int]) -> DiscriminantClass:
        if len(exponents) != len(self.invariant_factors):
            raise InputError("wrong number of exponents for this discriminant group")
        return DiscriminantClass(
            self.invariant_factors,
            tuple(a % d for a, d in zip(exponents, self.invariant_factors)),
        )

    def reduce(self, dual_coords: Sequence[Rational]) -> DiscriminantClass:
        """Class of a vector of L^dual given in rational lattice coordinates."""
        y = mat_vec(self.gram, [Fraction(c) for c in dual_coords])
        if any(c.denominator != 1 for c in y):
            raise InputError("vector is not in the dual lattice")
        y = [int(c) for c in y]
        return self.element([sum(p * c for p, c in zip(row, y)) for row in self.reduction])

    def q(self, element: DiscriminantClass) -> Fraction:
        a = element.exponents
        k = len(a)
        value = sum(a[i] * a[i] * self.q_values[i] for i in range(k))
        value += sum(2 * a[i] * a[j] * self.b_values[i][j] for i in range(k) for j in range(i + 1, k))
        return Fraction(value) % 2

    def b(self, x: DiscriminantClass, y: DiscriminantClass) -> Fraction:
        k = len(self.invariant_factors)
        value = sum(
            x.exponents[i] * y.exponents[j] * self.b_values[i][j] for i in range(k) for j in range(k)
        )
        return Fraction(value) % 1


@cache
def discriminant_group(L: IntegerLattice) -> DiscriminantGroup:
    if L.is_degenerate:
        raise InputError("discriminant group of a degenerate lattice")
    n = L.rank
    snf = smith_normal_form(L.gram)
    diag = snf.diagonal
    keep = [i for i, d in enumerate(diag) if d > 1]
    lifts = tuple(tuple(Fraction(snf.Q[r][i], diag[i]) for r in range(n)) for i in keep)
    q_values = tuple(Fraction(pair(L.gram, g, g)) % 2 for g in lifts)
    b_values = tuple(tuple(Fraction(pair(L.gram, g, h)) % 1 for h in lifts) for g in lifts)
    group = DiscriminantGroup(
        invariant_factors=tuple(diag[i] for i in keep),
        generator_lifts=lifts,
        q_values=q_values,
        b_values=b_values,
        gram=L.gram,
        reduction=tuple(snf.P[i] for i in keep),
    )
    logger.debug("discriminant group of %r: %s", L, group.invariant_factors)
    return group


def disc_class(L: IntegerLattice, v, m: int) -> DiscriminantClass:
    """Class of v/m in A_L, where m must equal div(v)."""
    coords = _coords(L, v)
    if m != divisibility(L, coords):
        raise InputError(f"m={m} is not the divisibility of the vector")
    return discriminant_group(L).reduce([Fraction(c, m) for c in coords])


def orthogonal_complement(L: IntegerLattice, S: Sequence) -> Embedding:
    """Saturated sublattice {x : (x, s) = 0 for s in S}, possibly degenerate or rank 0."""
    rows = [mat_vec(L.gram, _coords(L, s)) for s in S]
    basis = integer_kernel(rows, L.rank)
    matrix = tuple(tuple(b[r] for b in basis) for r in range(L.rank))
    sub_gram = tuple(tuple(pair(L.gram, a, b) for b in basis) for a in basis)
    source = IntegerLattice(sub_gram, label=f"complement in {L.label or 'lattice'}")
    if source.is_degenerate:
        logger.debug("orthogonal complement in %r is degenerate", L)
    return Embedding(source, L, matrix)


def saturation(L: IntegerLattice, sub: Embedding) -> Embedding:
    """Primitive closure of the image of ``sub``: (Q-span of the image) intersected with L."""
    if sub.target != L:
        raise InputError("sublattice is not embedded in this lattice")
    k = sub.source.rank
    diag = smith_normal_form(sub.matrix).diagonal if k else ()
    if sum(1 for d in diag if d) < k:
        raise InputError("sublattice generators are linearly dependent")
    if all(d == 1 for d in diag):
        return sub
    columns = [tuple(row[j] for row in sub.matrix) for j in range(k)]
    perp = integer_kernel(columns, L.rank)
    basis = integer_kernel(perp, L.rank)
    matrix = tuple(tuple(b[r] for b in basis) for r in range(L.rank))
    sub_gram = tuple(tuple(pair(L.gram, a, b) for b in basis) for a in basis)
    return Embedding(IntegerLattice(sub_gram, label=f"saturation in {L.label or 'lattice'}"), L, matrix)


def _fincke_pohst_coefficients(gram: Sequence[Sequence[Rational]]) -> list[list[Fraction]]:
    """Cholesky-style coefficients with Q(x) = sum q_ii (x_i + sum_{j>i} q_ij x_j)^2."""
    n = len(gram)
    q = [[Fraction(gram[i][j]) for j in range(n)] for i in range(n)]
    for i in range(n):
        if q[i][i] <= 0:
            raise InputError("quadratic form is not positive definite")
        for j in range(i + 1, n):
            q[j][i] = q[i][j]
            q[i][j] = q[i][j] / q[i][i]
        for k in range(i + 1, n):
            for l in range(k, n):
                q[k][l] -= q[k][i] * q[i][l]
    return q


def enumerate_ellipsoid(
    gram: Sequence[Sequence[Rational]],
    bound: Rational,
    *,
    max_cells: int | None = None,
) -> Iterator[tuple[tuple[int, ...], Fraction]]:
    """Yield every (x, Q(x)) with Q(x) <= bound for a positive definite rational form.

    Fincke-Pohst enumeration with exact bound propagation; each coordinate range
    is over-approximated with an integer square root and then filtered exactly.
    """
    limit = max_cells or get_settings().max_cells
    bound = Fraction(bound)
    n = len(gram)
    if bound < 0:
        return
    if n == 0:
        yield (), Fraction(0)
        return
    q = _fincke_pohst_coefficients(gram)
    x = [0] * n
    cells = 0

    def descend(i: int, remaining: Fraction) -> Iterator[tuple[tuple[int, ...], Fraction]]:
        nonlocal cells
        center = -sum((q[i][j] * x[j] for j in range(i + 1, n)), Fraction(0))
        reach = math.isqrt(math.floor(remaining / q[i][i])) + 1
        for xi in range(math.floor(center - reach), math.ceil(center + reach) + 1):
            cells += 1
            if cells > limit:
                raise EnumerationLimitError(limit)
            step = q[i][i] * (xi - center) ** 2
            if step > remaining:
                continue
            x[i] = xi
            if i == 0:
                yield tuple(x), bound - (remaining - step)
            else:
                yield from descend(i - 1, remaining - step)
        x[i] = 0

    yield from descend(n - 1, bound)


def short_vectors(L: IntegerLattice, target_norm: int, *, max_cells: int | None = None) -> list[LatticeVector]:
    """All x in a definite lattice with (x, x) == target_norm, sorted lexicographically."""
    positive, negative, _ = L.inertia
    if positive == L.rank:
        sign = 1
    elif negative == L.rank:
        sign = -1
    else:
        raise InputError("short_vectors needs a definite lattice")
    norm = sign * target_norm
    if norm < 0:
        return []
    gram = [[sign * x for x in row] for row in L.gram]
    found = [
        x for x, value in enumerate_ellipsoid(gram, norm, max_cells=max_cells) if value == norm
    ]
    return [LatticeVector(L, x) for x in sorted(found)]
