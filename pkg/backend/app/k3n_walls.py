"""Wall divisors on manifolds of K3^[n] type, as lattice arithmetic.

L_n = U^3 + E8(-1)^2 + <-(2n-2)> sits in the Mukai lattice U^4 + E8(-1)^2 as the
orthogonal complement of v = (1, n-1) in the fourth U. The wall criteria here
consume the known characterizations (Markman's for -2 and isotropic classes,
Bayer-Macri's on the rank two lattice T) purely as integer searches.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Optional, Sequence

from sympy import divisors
from sympy.core.intfunc import igcdex

from .config import get_settings
from .errors import EnumerationLimitError, HypothesisError, InputError
from .lattice_core import (
    DiscriminantClass,
    Embedding,
    IntegerLattice,
    LatticeVector,
    direct_sum,
    disc_class,
    divisibility,
    inner,
    is_primitive,
    make_embedding,
    mat_vec,
    pair,
    primitive_part,
    saturation,
    solve_rational,
    standard_lattice,
)

logger = logging.getLogger(__name__)

# Coordinate blocks of L_n and of the Mukai lattice in the fixed bases.
LN_BLOCKS: Mapping[str, slice] = {
    "U1": slice(0, 2),
    "U2": slice(2, 4),
    "U3": slice(4, 6),
    "E8a": slice(6, 14),
    "E8b": slice(14, 22),
    "delta": slice(22, 23),
}
MUKAI_BLOCKS: Mapping[str, slice] = {
    "U1": slice(0, 2),
    "U2": slice(2, 4),
    "U3": slice(4, 6),
    "U4": slice(6, 8),
    "E8a": slice(8, 16),
    "E8b": slice(16, 24),
}


def _from_blocks(lattice: IntegerLattice, layout: Mapping[str, slice], blocks: Mapping[str, object]) -> LatticeVector:
    coords = [0] * lattice.rank
    for name, values in blocks.items():
        if name not in layout:
            raise InputError(f"unknown block {name!r}; expected one of {sorted(layout)}")
        span = layout[name]
        values = [values] if isinstance(values, int) else list(values)
        if len(values) != span.stop - span.start:
            raise InputError(f"block {name!r} needs {span.stop - span.start} coordinates")
        coords[span] = values
    return LatticeVector(lattice, tuple(coords))


@dataclass(frozen=True)
class NContext:
    n: int
    Ln: IntegerLattice
    mukai: IntegerLattice
    embedding: Embedding
    v: LatticeVector

    @property
    def delta(self) -> LatticeVector:
        return self.Ln.basis_vector(22)

    @property
    def half_index(self) -> int:
        """2n - 2, the order of the discriminant group of L_n."""
        return 2 * self.n - 2

    def ln_vector(self, blocks: Mapping[str, object]) -> LatticeVector:
        return _from_blocks(self.Ln, LN_BLOCKS, blocks)

    def mukai_vector(self, blocks: Mapping[str, object]) -> LatticeVector:
        return _from_blocks(self.mukai, MUKAI_BLOCKS, blocks)

    def to_mukai(self, D: LatticeVector) -> LatticeVector:
        return self.embedding.image(D)


@lru_cache(maxsize=64)
def make_context(n: int) -> NContext:
    if n < 2:
        raise InputError(f"n must be at least 2, got {n}")
    U = standard_lattice("U")
    E8 = standard_lattice("E8_minus")
    Ln = direct_sum([U, U, U, E8, E8, standard_lattice("rank1", -(2 * n - 2))], label=f"L_{n}")
    mukai = direct_sum([U, U, U, U, E8, E8], label="Mukai")
    matrix = [[0] * 23 for _ in range(24)]
    for i in range(6):
        matrix[i][i] = 1
    for i in range(16):
        matrix[8 + i][6 + i] = 1
    # delta -> (1, -(n-1)) in the fourth U, the generator of v-perp there
    matrix[6][22] = 1
    matrix[7][22] = -(n - 1)
    embedding = make_embedding(Ln, mukai, matrix, primitive=True)
    v = _from_blocks(mukai, MUKAI_BLOCKS, {"U4": (1, n - 1)})
    logger.debug("built context for n=%d", n)
    return NContext(n=n, Ln=Ln, mukai=mukai, embedding=embedding, v=v)


class WitnessCondition(str, Enum):
    MK_minus2 = "MK_minus2"
    MK_isotropic = "MK_isotropic"
    BM_orth_root = "BM_orth_root"
    BM_isotropic = "BM_isotropic"
    BM_bounded_root = "BM_bounded_root"
    BM_sum_decomposition = "BM_sum_decomposition"


@dataclass(frozen=True)
class WallWitness:
    """Self-certifying reason for a wall.

    ``vectors`` live in ``lattice`` (L_n for MK_minus2, the Mukai lattice for
    MK_isotropic, T otherwise). ``v`` is the Mukai vector in the same lattice
    when the condition refers to it.
    """

    condition: WitnessCondition
    lattice: IntegerLattice
    vectors: tuple[LatticeVector, ...]
    pairing_data: tuple[int, ...]
    v: Optional[LatticeVector] = None

    def recompute(self) -> tuple[int, ...]:
        L = self.lattice
        if self.condition is WitnessCondition.MK_minus2:
            (D,) = self.vectors
            return (inner(L, D, D),)
        if self.condition is WitnessCondition.BM_sum_decomposition:
            w, t = self.vectors
            return (inner(L, w, w), inner(L, t, t), inner(L, w, self.v), inner(L, t, self.v))
        (w,) = self.vectors
        return (inner(L, w, w), inner(L, w, self.v))

    def verify(self) -> bool:
        data = self.recompute()
        if data != self.pairing_data:
            return False
        c = self.condition
        if c is WitnessCondition.MK_minus2:
            return data == (-2,)
        v2 = inner(self.lattice, self.v, self.v)
        if c in (WitnessCondition.MK_isotropic, WitnessCondition.BM_isotropic):
            return data[0] == 0 and data[1] in (1, 2)
        if c is WitnessCondition.BM_orth_root:
            return data == (-2, 0)
        if c is WitnessCondition.BM_bounded_root:
            return data[0] == -2 and 0 < 2 * data[1] <= v2
        w, t = self.vectors
        return (
            w + t == self.v
            and data[0] >= 0
            and data[1] >= 0
            and data[2] > 0
            and data[3] > 0
        )


@dataclass(frozen=True)
class IsotropicPair:
    w1: LatticeVector
    w2: LatticeVector
    pairings: tuple[int, int]


def isotropic_pair(ctx: NContext, D: LatticeVector) -> IsotropicPair:
    """Primitive isotropic classes on the rays of v + i(D) and v - i(D)."""
    if inner(ctx.Ln, D, D) != 2 - 2 * ctx.n:
        raise InputError(f"isotropic_pair needs D^2 = {2 - 2 * ctx.n}")
    image = ctx.to_mukai(D)
    w1 = primitive_part(ctx.mukai, ctx.v + image)
    w2 = primitive_part(ctx.mukai, ctx.v - image)
    return IsotropicPair(w1, w2, (inner(ctx.mukai, ctx.v, w1), inner(ctx.mukai, ctx.v, w2)))


def _checked_divisor(ctx: NContext, D) -> LatticeVector:
    if not isinstance(D, LatticeVector):
        D = LatticeVector(ctx.Ln, tuple(D))
    if D.lattice != ctx.Ln:
        raise InputError("divisor must be a vector of L_n")
    if D.is_zero():
        raise InputError("the zero vector is not a divisor class")
    return D


def markman_wall_test(ctx: NContext, D) -> Optional[WallWitness]:
    """MK_minus2 or MK_isotropic witness, or None (which proves nothing)."""
    D = _checked_divisor(ctx, D)
    square = inner(ctx.Ln, D, D)
    if square >= 0:
        raise InputError(f"wall tests need a negative square, got {square}")
    if not is_primitive(ctx.Ln, D):
        raise InputError("markman_wall_test needs a primitive divisor")
    if square == -2:
        return WallWitness(WitnessCondition.MK_minus2, ctx.Ln, (D,), (-2,))
    if square == 2 - 2 * ctx.n and divisibility(ctx.Ln, D) % (ctx.n - 1) == 0:
        pair_ = isotropic_pair(ctx, D)
        for w, p in ((pair_.w1, pair_.pairings[0]), (pair_.w2, pair_.pairings[1])):
            if p in (1, 2):
                return WallWitness(WitnessCondition.MK_isotropic, ctx.mukai, (w,), (0, p), v=ctx.v)
    return None


@dataclass(frozen=True)
class HyperbolicT:
    """Saturated rank two sublattice of the Mukai lattice, in a basis starting with v."""

    lattice: IntegerLattice
    v_in_T: LatticeVector
    s_in_T: LatticeVector
    embedding: Embedding

    @property
    def is_hyperbolic(self) -> bool:
        return self.lattice.determinant < 0


def _coordinates_in(embedding: Embedding, x: Sequence[int]) -> tuple[int, ...]:
    """Integer coordinates of x in the image basis of a saturated embedding."""
    m = embedding.matrix
    k = embedding.source.rank
    cols = [[row[j] for row in m] for j in range(k)]
    normal = [[sum(a * b for a, b in zip(ci, cj)) for cj in cols] for ci in cols]
    rhs = [sum(a * b for a, b in zip(ci, x)) for ci in cols]
    coords = solve_rational(normal, rhs)
    if any(c.denominator != 1 for c in coords) or mat_vec(m, coords) != tuple(x):
        raise InputError("vector does not lie in the sublattice")
    return tuple(int(c) for c in coords)


def hyperbolic_T(ctx: NContext, s: LatticeVector) -> HyperbolicT:
    if s.lattice != ctx.mukai:
        raise InputError("s must be a vector of the Mukai lattice")
    vs = [[a, b] for a, b in zip(ctx.v.coords, s.coords)]
    span = Embedding(
        IntegerLattice(
            (
                (inner(ctx.mukai, ctx.v, ctx.v), inner(ctx.mukai, ctx.v, s)),
                (inner(ctx.mukai, s, ctx.v), inner(ctx.mukai, s, s)),
            )
        ),
        ctx.mukai,
        tuple(map(tuple, vs)),
    )
    try:
        sat = saturation(ctx.mukai, span)
    except InputError as exc:
        raise InputError("s is a rational multiple of v") from exc
    p, q = _coordinates_in(sat, ctx.v.coords)
    x, y, g = igcdex(p, q)
    if g != 1:
        raise ArithmeticError("v is not primitive in its saturation")
    x, y = int(x), int(y)
    # basis (v, b) with b = -y b1 + x b2 has determinant p x + q y = 1
    b1 = [row[0] for row in sat.matrix]
    b2 = [row[1] for row in sat.matrix]
    b = [-y * c1 + x * c2 for c1, c2 in zip(b1, b2)]
    matrix = tuple((vc, bc) for vc, bc in zip(ctx.v.coords, b))
    gram = (
        (inner(ctx.mukai, ctx.v, ctx.v), pair(ctx.mukai.gram, ctx.v.coords, b)),
        (pair(ctx.mukai.gram, b, ctx.v.coords), pair(ctx.mukai.gram, b, b)),
    )
    T = IntegerLattice(gram, label="T")
    embedding = make_embedding(T, ctx.mukai, matrix, primitive=True)
    s_coords = _coordinates_in(embedding, s.coords)
    logger.debug("T gram %s", gram)
    return HyperbolicT(T, T.vector((1, 0)), T.vector(s_coords), embedding)


def _integral_point(T: IntegerLattice, v: Sequence[int], z: Sequence[int], k: int, j: int) -> Optional[LatticeVector]:
    """The vector with (w, v) = k and (w, z) = j, if it is integral."""
    v2 = pair(T.gram, v, v)
    z2 = pair(T.gram, z, z)
    coords = [Fraction(k, v2) * a + Fraction(j, z2) * b for a, b in zip(v, z)]
    if any(c.denominator != 1 for c in coords):
        return None
    return T.vector([int(c) for c in coords])


def bm_wall_test(T: IntegerLattice, v_in_T: LatticeVector) -> Optional[WallWitness]:
    """First witness among the four Bayer-Macri conditions, in their fixed order.

    Every w in T is (k/V) v + (j/z^2) z with k = (w, v), j = (w, z), V = v^2 and
    z the primitive generator of v-perp; each condition fixes or bounds k and
    then j, so the searches below are complete.
    """
    if T.rank != 2:
        raise InputError("bm_wall_test needs a rank two lattice")
    V = inner(T, v_in_T, v_in_T)
    if V <= 0:
        raise InputError("v must have positive square in T")
    if T.determinant >= 0:
        raise InputError("T must be hyperbolic (signature (1, 1))")
    v = v_in_T.coords
    gv = mat_vec(T.gram, v)
    z = (gv[1], -gv[0])
    g = math.gcd(*z)
    z = tuple(c // g for c in z)
    if next(c for c in z if c) < 0:
        z = tuple(-c for c in z)
    z2 = pair(T.gram, z, z)
    N = -z2

    def witness(condition: WitnessCondition, *vectors: LatticeVector) -> WallWitness:
        data: tuple[int, ...]
        if len(vectors) == 2:
            w, t = vectors
            data = (inner(T, w, w), inner(T, t, t), inner(T, w, v_in_T), inner(T, t, v_in_T))
        else:
            (w,) = vectors
            data = (inner(T, w, w), inner(T, w, v_in_T))
        return WallWitness(condition, T, tuple(vectors), data, v=v_in_T)

    if z2 == -2:
        return witness(WitnessCondition.BM_orth_root, T.vector(z))

    for k in (1, 2):
        num = N * k * k
        if num % V == 0:
            j = math.isqrt(num // V)
            if j * j == num // V:
                for jj in sorted({-j, j}):
                    w = _integral_point(T, v, z, k, jj)
                    if w is not None:
                        return witness(WitnessCondition.BM_isotropic, w)

    for k in range(1, V // 2 + 1):
        num = N * (k * k + 2 * V)
        if num % V == 0:
            j = math.isqrt(num // V)
            if j * j == num // V:
                for jj in sorted({-j, j}):
                    w = _integral_point(T, v, z, k, jj)
                    if w is not None:
                        return witness(WitnessCondition.BM_bounded_root, w)

    for k in range(1, V):
        reach = math.isqrt(N * min(k, V - k) ** 2 // V)
        for j in range(-reach, reach + 1):
            w = _integral_point(T, v, z, k, j)
            if w is None:
                continue
            t = v_in_T - w
            if inner(T, w, w) >= 0 and inner(T, t, t) >= 0:
                return witness(WitnessCondition.BM_sum_decomposition, w, t)
    return None


def bm_wall_test_divisor(ctx: NContext, D) -> Optional[WallWitness]:
    D = _checked_divisor(ctx, D)
    if inner(ctx.Ln, D, D) >= 0:
        raise InputError("wall tests need a negative square")
    T = hyperbolic_T(ctx, ctx.to_mukai(D))
    return bm_wall_test(T.lattice, T.v_in_T)


def detect_wall(ctx: NContext, D) -> Optional[WallWitness]:
    """Markman's test, then Bayer-Macri on T = sat(v, i(D))."""
    return markman_wall_test(ctx, D) or bm_wall_test_divisor(ctx, D)


def ht_bound_ok(n: int, ray_square) -> bool:
    return Fraction(ray_square) >= Fraction(-(n + 3), 2)


def wall_type_exists(ctx: NContext, square: int, m: int) -> Optional[LatticeVector]:
    """A primitive D in L_n with D^2 = square and div(D) = m, or None if there is none.

    D is built as m*u + c*delta with u = (1, k) in the first U: it exists iff
    m | 2n-2 and square = -c^2 (2n-2) mod 2m^2 for some c prime to m.
    """
    if square % 2:
        raise InputError(f"square must be even, got {square}")
    if square >= 0:
        raise InputError(f"square must be negative, got {square}")
    if m < 1:
        raise InputError(f"divisibility must be positive, got {m}")
    e = ctx.half_index
    if e % m:
        return None
    modulus = 2 * m * m
    limit = get_settings().max_cells
    if m > limit:
        raise EnumerationLimitError(limit)
    # m | 2n-2 and 2n-2 is even, so c^2 (2n-2) mod 2m^2 only depends on c mod m
    for c in range(m):
        if math.gcd(c, m) != 1 or (square + c * c * e) % modulus:
            continue
        k = (square + c * c * e) // modulus
        D = ctx.ln_vector({"U1": (m, m * k), "delta": c})
        if inner(ctx.Ln, D, D) != square or divisibility(ctx.Ln, D) != m or not is_primitive(ctx.Ln, D):
            raise ArithmeticError(f"wall type witness failed verification for ({square}, {m})")
        return D
    return None


@dataclass(frozen=True)
class WallType:
    square: int
    div: int
    witness: Optional[LatticeVector] = field(default=None, compare=False, repr=False)

    @property
    def ray_square(self) -> Fraction:
        return Fraction(self.square, self.div * self.div)


def candidate_caveat(n: int) -> Optional[str]:
    if n < 5:
        return None
    return (
        f"n={n}: these are candidate wall types (HT bound and existence only); "
        "for n >= 5 some candidate rays are not extremal"
    )


def enumerate_wall_types(ctx: NContext) -> list[WallType]:
    """Candidate wall types: exact for n <= 4, a superset of the wall types beyond."""
    limit = get_settings().max_cells
    # one residue loop of length m per (square, m) pair under the HT bound
    cells = sum(((ctx.n + 3) * m * m // 4 + 1) * m for m in divisors(ctx.half_index))
    if cells > limit:
        raise EnumerationLimitError(limit)
    rows: list[WallType] = []
    for m in divisors(ctx.half_index):
        square = -2
        while 2 * square >= -(ctx.n + 3) * m * m:
            witness = wall_type_exists(ctx, square, m)
            if witness is not None:
                rows.append(WallType(square, m, witness))
            square -= 2
    rows.sort(key=lambda t: (t.div, -t.square))
    logger.debug("n=%d: %d candidate wall types", ctx.n, len(rows))
    return rows


def confirmed_wall_types(ctx: NContext) -> list[WallType]:
    """Candidate types whose witness divisor passes Markman's or Bayer-Macri's test.

    Only the witness's orbit is tested; when n-1 is not a prime power other
    orbits with the same (square, div) are not covered.
    """
    return [t for t in enumerate_wall_types(ctx) if detect_wall(ctx, t.witness) is not None]


@dataclass(frozen=True)
class EichlerInvariants:
    square: int
    div: int
    disc: DiscriminantClass


def eichler_invariants(L: IntegerLattice, v) -> EichlerInvariants:
    if not is_primitive(L, v):
        raise InputError("Eichler invariants need a primitive vector")
    m = divisibility(L, v)
    return EichlerInvariants(inner(L, v, v), m, disc_class(L, v, m))


def has_two_hyperbolic_planes(L: IntegerLattice) -> bool:
    """True when two disjoint basis pairs span orthogonal direct summands isometric to U."""
    gram = L.gram
    n = L.rank
    found: list[int] = []
    i = 0
    while i < n - 1 and len(found) < 4:
        j = i + 1
        block_ok = gram[i][i] == 0 and gram[j][j] == 0 and gram[i][j] == 1
        isolated = all(
            gram[i][k] == 0 and gram[j][k] == 0 for k in range(n) if k not in (i, j)
        )
        if block_ok and isolated:
            found += [i, j]
            i += 2
        else:
            i += 1
    return len(found) >= 4


def same_orbit(L: IntegerLattice, v, w, *, assume_eichler: bool = False) -> bool:
    """Equality of Eichler invariants, which decides the orbit when L = U^2 + N."""
    if not assume_eichler and not has_two_hyperbolic_planes(L):
        raise HypothesisError(
            "lattice has no visible U+U summand; invariants would only be a necessary condition"
        )
    return eichler_invariants(L, v) == eichler_invariants(L, w)


def dual_ray(L: IntegerLattice, D) -> tuple[Fraction, ...]:
    """D / div(D) as an exact rational vector."""
    m = divisibility(L, D)
    coords = D.coords if isinstance(D, LatticeVector) else tuple(D)
    return tuple(Fraction(c, m) for c in coords)


def eichler_transvection(L: IntegerLattice, e: LatticeVector, a: LatticeVector, x: LatticeVector) -> LatticeVector:
    """x -> x - (x,e) a + (x,a) e - (a^2/2)(x,e) e, an isometry for isotropic e with a in e-perp."""
    if inner(L, e, e) != 0:
        raise InputError("e must be isotropic")
    if inner(L, e, a) != 0:
        raise InputError("a must be orthogonal to e")
    xe = inner(L, x, e)
    xa = inner(L, x, a)
    half = inner(L, a, a) // 2
    return x - xe * a + xa * e - (half * xe) * e
