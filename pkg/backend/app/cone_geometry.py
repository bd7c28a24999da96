"""Walls and chambers of the positive cone of a Picard lattice inside L_n."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Iterator, Optional, Sequence

from sympy import Eq, Rational, symbols
from sympy.solvers.simplex import InfeasibleLPError, UnboundedLPError, lpmax

from .config import get_settings
from .errors import ConfigurationError, EnumerationLimitError, InputError, OnWallError
from .k3n_walls import NContext, WallType, candidate_caveat, enumerate_wall_types
from .lattice_core import (
    Embedding,
    IntegerLattice,
    LatticeVector,
    divisibility,
    enumerate_ellipsoid,
    make_embedding,
    mat_vec,
    pair,
    signature,
    solve_rational,
)

logger = logging.getLogger(__name__)

MAX_PICARD_RANK = 5

RationalVector = tuple[Fraction, ...]


def _rational(rank: int, x) -> RationalVector:
    coords = x.coords if isinstance(x, LatticeVector) else tuple(x)
    if len(coords) != rank:
        raise InputError(f"expected {rank} coordinates, got {len(coords)}")
    out = []
    for c in coords:
        if isinstance(c, float):
            raise InputError("floating point coordinates are not accepted; use 'p/q' strings")
        try:
            out.append(Fraction(c))
        except (TypeError, ValueError, ZeroDivisionError) as exc:
            raise InputError(f"not a rational number: {c!r}") from exc
    return tuple(out)


def _add(x: Sequence, y: Sequence, scale=1) -> RationalVector:
    return tuple(Fraction(a) + scale * b for a, b in zip(x, y))


def _scale(x: Sequence, k) -> RationalVector:
    return tuple(k * Fraction(a) for a in x)


@dataclass(frozen=True)
class PicardData:
    """A hyperbolic lattice of rank <= 5 primitively embedded in L_n, with an optional reference class."""

    ctx: NContext
    pic: IntegerLattice
    embed: Embedding
    reference: Optional[RationalVector] = None

    def __post_init__(self) -> None:
        if self.embed.source != self.pic or self.embed.target != self.ctx.Ln:
            raise InputError("embedding must map the Picard lattice into L_n")
        rho = self.pic.rank
        if not 1 <= rho <= MAX_PICARD_RANK:
            raise InputError(f"Picard rank must be between 1 and {MAX_PICARD_RANK}, got {rho}")
        if signature(self.pic) != (1, rho - 1):
            raise InputError(f"Picard lattice must have signature (1, {rho - 1})")
        if not self.embed.is_primitive:
            raise InputError("Picard lattice embedding is not primitive")
        if self.reference is not None:
            ref = _rational(rho, self.reference)
            object.__setattr__(self, "reference", ref)
            if self.square(ref) <= 0:
                raise InputError("reference class must have positive square")

    @property
    def rank(self) -> int:
        return self.pic.rank

    @cached_property
    def default_types(self) -> tuple[WallType, ...]:
        return tuple(enumerate_wall_types(self.ctx))

    def pairing(self, x: Sequence, y: Sequence):
        return pair(self.pic.gram, x, y)

    def square(self, x: Sequence):
        return pair(self.pic.gram, x, x)

    def div_in_Ln(self, D: LatticeVector) -> int:
        return divisibility(self.ctx.Ln, self.embed.image(D))

    def with_reference(self, reference) -> PicardData:
        return replace(self, reference=_rational(self.rank, reference))


def picard_data(
    ctx: NContext,
    pic_gram: Sequence[Sequence[int]],
    embed: Sequence[Sequence[int]],
    reference=None,
    label: str = "Pic",
) -> PicardData:
    pic = IntegerLattice(tuple(map(tuple, pic_gram)), label=label)
    embedding = make_embedding(pic, ctx.Ln, embed, primitive=True)
    return PicardData(ctx, pic, embedding, reference)


@dataclass(frozen=True)
class Wall:
    """A primitive wall class of the Picard lattice, oriented positively on the reference side."""

    D: LatticeVector
    wall_type: WallType
    certificate: Optional[RationalVector] = field(default=None, compare=False)

    @property
    def ray(self) -> RationalVector:
        return tuple(Fraction(c, self.wall_type.div) for c in self.D.coords)

    @property
    def ray_square(self) -> Fraction:
        return self.wall_type.ray_square

    @property
    def is_minus_two(self) -> bool:
        return self.wall_type.square == -2


@dataclass(frozen=True)
class ExtremalRay:
    ray: RationalVector
    ray_square: Fraction
    wall: Wall


@dataclass(frozen=True)
class ChamberReport:
    reference: RationalVector
    walls_crossed: tuple[Wall, ...]
    supporting: tuple[Wall, ...]
    rays: tuple[ExtremalRay, ...]
    completeness: str
    caveat: Optional[str] = None

    @property
    def minus_two_walls(self) -> tuple[Wall, ...]:
        return tuple(w for w in self.supporting if w.is_minus_two)


def _type_table(P: PicardData, types: Optional[Iterable[WallType]]) -> dict[tuple[int, int], WallType]:
    rows = P.default_types if types is None else types
    return {(t.square, t.div): t for t in rows}


def _as_wall(P: PicardData, coords: Sequence[int], table: dict[tuple[int, int], WallType]) -> Optional[Wall]:
    square = P.square(coords)
    if square >= 0 or math.gcd(*coords) != 1:
        return None
    if not any(s == square for s, _ in table):
        return None
    D = LatticeVector(P.pic, tuple(coords))
    wall_type = table.get((square, P.div_in_Ln(D)))
    return None if wall_type is None else Wall(D, wall_type)


def _positive(P: PicardData, x, name: str) -> RationalVector:
    x = _rational(P.rank, x)
    if P.square(x) <= 0:
        raise InputError(f"{name} is not a positive class (square {P.square(x)})")
    return x


def is_positive_class(P: PicardData, x) -> bool:
    if P.reference is None:
        raise ConfigurationError("no reference positive class is set for this Picard lattice")
    x = _rational(P.rank, x)
    return P.square(x) > 0 and P.pairing(x, P.reference) > 0


def _sqrt_lower(x: Fraction, bits: int = 16) -> Fraction:
    return Fraction(math.isqrt(math.floor(x * 4**bits)), 2**bits)


def _majorant_center(P: PicardData, a: RationalVector, b: RationalVector) -> RationalVector:
    # roughly the hyperbolic midpoint of a and b
    ra, rb = _sqrt_lower(P.square(a)), _sqrt_lower(P.square(b))
    if ra == 0 or rb == 0:
        return _add(a, b)
    return _add(_scale(a, rb), b, ra)


def _separating(
    P: PicardData,
    a: RationalVector,
    b: RationalVector,
    table: dict[tuple[int, int], WallType],
    *,
    closed_start: bool = False,
) -> list[Wall]:
    """Walls D with (D, a) > 0 > (D, b), or (D, a) >= 0 with ``closed_start``.

    Every such D is orthogonal to a positive point p of the segment [a, b]. For
    a positive g, q_g(x) = -x^2 + 2 (x, g)^2 / g^2 is positive definite and on
    p-perp q_g <= -x^2 (2 cosh^2 d(g, p) - 1). cosh^2 d(g, .) is largest at an
    end of the segment, so q_g(D) <= R = max|D^2| (2M - 1) with
    M = max over gamma in {a, b} of (g, gamma)^2 / (g^2 gamma^2).
    """
    if not table:
        return []
    g = _majorant_center(P, a, b)
    g2 = P.square(g)
    M = max(P.pairing(g, c) ** 2 / (g2 * P.square(c)) for c in (a, b))
    bound = max(-s for s, _ in table) * (2 * M - 1)
    h = mat_vec(P.pic.gram, g)
    rho = P.rank
    majorant = [
        [-P.pic.gram[i][j] + 2 * h[i] * h[j] / g2 for j in range(rho)] for i in range(rho)
    ]
    logger.debug("majorant bound %s (M=%s) for rank %d", bound, M, rho)
    walls = []
    for x, value in enumerate_ellipsoid(majorant, bound):
        if not any(x):
            continue
        xa, xb = P.pairing(x, a), P.pairing(x, b)
        if xb >= 0 or xa < 0 or (xa == 0 and not closed_start):
            continue
        wall = _as_wall(P, x, table)
        if wall is None:
            continue
        if value > bound:
            raise ArithmeticError("majorant enumeration returned a point outside its bound")
        walls.append(wall)
    walls.sort(key=lambda w: w.D.coords)
    return walls


def walls_between(P: PicardData, alpha, beta, types: Optional[Iterable[WallType]] = None) -> list[Wall]:
    """All walls whose hyperplane strictly separates alpha from beta, oriented towards alpha."""
    a = _positive(P, alpha, "alpha")
    b = _positive(P, beta, "beta")
    if P.pairing(a, b) <= 0:
        raise InputError("alpha and beta lie in different components of the positive cone")
    return _separating(P, a, b, _type_table(P, types))


def same_chamber(P: PicardData, alpha, beta, types: Optional[Iterable[WallType]] = None) -> bool:
    return not walls_between(P, alpha, beta, types)


def in_dual_cone(P: PicardData, walls: Sequence[Wall], omega_ref, x) -> bool:
    """(D, x) > 0 for every wall and (x, omega_ref) >= 0."""
    x = _rational(P.rank, x)
    ref = _rational(P.rank, omega_ref)
    return all(P.pairing(w.D.coords, x) > 0 for w in walls) and P.pairing(x, ref) >= 0


def _check_omega(P: PicardData, omega) -> RationalVector:
    w = _positive(P, omega, "omega")
    if P.reference is not None and P.pairing(w, P.reference) <= 0:
        raise InputError("omega is not in the component of the reference class")
    return w


def _primitive_integral(x: Sequence[Fraction]) -> tuple[int, ...]:
    den = math.lcm(*(c.denominator for c in x))
    ints = [int(c * den) for c in x]
    g = math.gcd(*ints)
    return tuple(c // g for c in ints)


def _support_rank_two(P, omega, table, depth) -> tuple[list[Wall], bool]:
    w = _primitive_integral(omega)
    gw = mat_vec(P.pic.gram, w)
    u = _primitive_integral((Fraction(gw[1]), Fraction(-gw[0])))
    for sign in (1, -1):
        on = _as_wall(P, tuple(sign * c for c in u), table)
        if on is not None:
            raise OnWallError(f"omega lies on the wall D={list(on.D.coords)}", wall=on)
    # omega + t*u is positive exactly for t^2 < tau
    tau = P.square(omega) / -P.square(u)
    root = _exact_sqrt(tau)
    walls, exact = [], True
    for sigma in (1, -1):
        if root is not None:
            found = _cusp_side(P, omega, u, sigma, root, table)
        else:
            found = _bracket_side(P, omega, u, sigma, tau, table, depth)
            exact = exact and found is not None
        if found is not None:
            walls.append(found)
    walls.sort(key=lambda x: x.D.coords)
    return walls, exact


def _exact_sqrt(x: Fraction) -> Optional[Fraction]:
    p, q = math.isqrt(x.numerator), math.isqrt(x.denominator)
    if p * p == x.numerator and q * q == x.denominator:
        return Fraction(p, q)
    return None


def _bracket_steps(tau: Fraction, depth: int) -> Iterator[Fraction]:
    """t_k < sqrt(tau) with t_k >= sqrt(tau) (1 - 2^-k), independent of the scale of u."""
    e = 0
    while tau * 4**e < 1:
        e += 1
    for k in range(1, depth + 1):
        m = k + 1 + e
        r = Fraction(math.isqrt(math.floor(tau * 4**m)), 2**m)
        yield r * (1 - Fraction(1, 2 ** (k + 1)))


def _nearest(P, omega, u, sigma, crossed: Sequence[Wall]) -> Wall:
    def crossing(wall: Wall) -> Fraction:
        return -Fraction(P.pairing(wall.D.coords, omega)) / (sigma * P.pairing(wall.D.coords, u))

    nearest = min(crossed, key=lambda wall: (crossing(wall), wall.D.coords))
    return replace(nearest, certificate=_add(omega, u, sigma * crossing(nearest)))


def _bracket_side(P, omega, u, sigma, tau, table, depth) -> Optional[Wall]:
    """Nearest wall from omega along omega + t*sigma*u, walking segments towards an irrational cone boundary."""
    previous, previous_t = omega, Fraction(0)
    for k, t in enumerate(_bracket_steps(tau, depth), start=1):
        if t <= previous_t:
            continue
        point = _add(omega, u, sigma * t)
        crossed = _separating(P, previous, point, table, closed_start=previous_t > 0)
        if crossed:
            logger.debug("side %+d bracketed at depth %d", sigma, k)
            return _nearest(P, omega, u, sigma, crossed)
        previous, previous_t = point, t
    return None


def _cusp_side(P, omega, u, sigma, root, table) -> Optional[Wall]:
    """Nearest wall towards a rational isotropic boundary ray e, decided by one finite search.

    For e primitive integral, (D, e) is a nonzero integer for every wall D. A wall
    meeting the segment from p to e has (D, e)^2 < |D^2| (p, e)^2 / p^2, so once p
    is close enough to e that the right side is at most 1, every wall on this side
    already separates omega from p.
    """
    e = _primitive_integral(_add(omega, u, sigma * root))
    smax = max(-s for s, _ in table)
    oe = P.pairing(omega, e)
    c = smax * oe * oe - P.square(omega) + 2 * oe
    lam = Fraction(1, 2) if c <= 0 else min(Fraction(1, 2), oe / c)
    p = _add(e, _add(omega, e, -1), lam)
    crossed = _separating(P, omega, p, table)
    logger.debug("side %+d ends at the rational cusp %s: %d walls", sigma, e, len(crossed))
    return _nearest(P, omega, u, sigma, crossed) if crossed else None


def _candidates(P, omega, table, bound) -> list[Wall]:
    limit = get_settings().max_cells
    if (2 * bound + 1) ** P.rank > limit:
        raise EnumerationLimitError(limit)
    found = []
    for coords in itertools.product(range(-bound, bound + 1), repeat=P.rank):
        if not any(coords):
            continue
        pw = P.pairing(coords, omega)
        if pw < 0:
            continue
        wall = _as_wall(P, coords, table)
        if wall is None:
            continue
        if pw == 0:
            raise OnWallError(f"omega lies on the wall D={list(coords)}", wall=wall)
        found.append(wall)
    logger.debug("%d candidate walls up to height %d", len(found), bound)
    return found


def _strict_point(P, omega, D, others) -> Optional[RationalVector]:
    xs = symbols(f"x0:{P.rank}")
    s = symbols("s")

    def form(vec):
        h = mat_vec(P.pic.gram, vec)
        return sum(Rational(c.numerator, c.denominator) * x for c, x in zip(map(Fraction, h), xs))

    constraints = [Eq(form(D), 0), Eq(form(omega), 1), s <= 1]
    constraints += [form(o) - s >= 0 for o in others]
    try:
        best, point = lpmax(s, constraints)
    except (InfeasibleLPError, UnboundedLPError):
        return None
    if best <= 0:
        return None
    return tuple(Fraction(int(point[x].p), int(point[x].q)) for x in xs)


def _facet_point(P: PicardData, omega: RationalVector, wall: Wall, others: Sequence[Wall]) -> Optional[RationalVector]:
    """A rational x with (D, x) = 0, (D', x) > 0 for the other walls and x^2 > 0, if one exists."""
    D = tuple(Fraction(c) for c in wall.D.coords)
    d2 = P.square(D)
    p = _add(omega, D, -P.pairing(D, omega) / d2)
    p2 = P.square(p)
    center = _scale(p, 1 / p2)
    other_vecs = [o.D.coords for o in others]
    slack = [P.pairing(o, center) for o in other_vecs]
    if all(v > 0 for v in slack):
        return center

    # Max x^2 = c^2 + y^2 over y in {D, p}-perp with (D', c + y) >= 0: the optimum
    # is the minimum norm point of some face, found by enumerating active sets.
    def project(a):
        return _add(_add(a, D, -P.pairing(a, D) / d2), p, -P.pairing(a, p) / p2)

    normals = [project(o) for o in other_vecs]
    limit = get_settings().max_cells
    cells = 0
    best: Optional[tuple[RationalVector, Fraction]] = None
    for size in range(P.rank - 1):
        for active in itertools.combinations(range(len(normals)), size):
            cells += 1
            if cells > limit:
                raise EnumerationLimitError(limit)
            rows = [[P.pairing(normals[i], normals[j]) for j in active] for i in active]
            try:
                mu = solve_rational(rows, [-slack[i] for i in active])
            except InputError:
                continue
            y = tuple(Fraction(0) for _ in D)
            for m, i in zip(mu, active):
                y = _add(y, normals[i], m)
            if any(sl + P.pairing(o, y) < 0 for sl, o in zip(slack, other_vecs)):
                continue
            value = 1 / p2 + P.square(y)
            if best is None or value > best[1]:
                best = (y, value)
    if best is None or best[1] <= 0:
        return None
    x_star = _add(center, best[0])
    if all(P.pairing(o, x_star) > 0 for o in other_vecs):
        return x_star
    x0 = _strict_point(P, omega, D, other_vecs)
    if x0 is None:
        return None
    lam = Fraction(1)
    while True:
        x = _add(x_star, _add(x0, x_star, -1), lam)
        if P.square(x) > 0:
            break
        lam /= 2
    if P.pairing(D, x) != 0 or any(P.pairing(o, x) <= 0 for o in other_vecs):
        logger.warning("facet certificate for D=%s failed re-verification", wall.D.coords)
        return None
    return x


def _supporting(P: PicardData, omega, types, search_bound) -> tuple[list[Wall], str]:
    w = _check_omega(P, omega)
    table = _type_table(P, types)
    bound = search_bound or get_settings().search_bound
    if bound < 1:
        raise InputError("search_bound must be at least 1")
    if P.rank == 1 or not table:
        return [], "exact"
    if P.rank == 2:
        walls, exact = _support_rank_two(P, w, table, bound)
        return walls, "exact" if exact else f"complete up to bracketing depth {bound}"
    candidates = _candidates(P, w, table, bound)
    supporting = []
    for wall in candidates:
        others = [c for c in candidates if c is not wall]
        point = _facet_point(P, w, wall, others)
        if point is not None:
            supporting.append(replace(wall, certificate=point))
    return supporting, f"complete up to height {bound}"


def supporting_walls(
    P: PicardData,
    omega,
    types: Optional[Iterable[WallType]] = None,
    search_bound: Optional[int] = None,
) -> list[Wall]:
    """Walls whose hyperplanes carry a facet of the chamber of omega, each with a certificate point."""
    return _supporting(P, omega, types, search_bound)[0]


def _rays(walls: Iterable[Wall]) -> list[ExtremalRay]:
    return [ExtremalRay(w.ray, w.ray_square, w) for w in walls]


def extremal_rays(
    P: PicardData,
    omega,
    types: Optional[Iterable[WallType]] = None,
    search_bound: Optional[int] = None,
) -> list[ExtremalRay]:
    return _rays(supporting_walls(P, omega, types, search_bound))


def chamber_report(
    P: PicardData,
    omega=None,
    alpha=None,
    beta=None,
    types: Optional[Iterable[WallType]] = None,
    search_bound: Optional[int] = None,
) -> ChamberReport:
    if omega is None:
        omega = P.reference
    if omega is None:
        raise ConfigurationError("chamber report needs omega or a reference class")
    omega = _rational(P.rank, omega)
    supporting, completeness = _supporting(P, omega, types, search_bound)
    crossed: list[Wall] = []
    if alpha is not None and beta is not None:
        crossed = walls_between(P, alpha, beta, types)
    return ChamberReport(
        reference=omega,
        walls_crossed=tuple(crossed),
        supporting=tuple(supporting),
        rays=tuple(_rays(supporting)),
        completeness=completeness,
        caveat=candidate_caveat(P.ctx.n),
    )
