from __future__ import annotations

import logging
import random
from fractions import Fraction
from typing import List, Mapping, Optional, Sequence, Union

from .catalog import FixtureReport, get_fixture, list_fixtures, plain, verify_fixture
from .cone_geometry import Wall, chamber_report, picard_data
from .errors import InputError
from .k3n_walls import (
    EichlerInvariants,
    NContext,
    WallWitness,
    candidate_caveat,
    confirmed_wall_types,
    detect_wall,
    eichler_invariants,
    eichler_transvection,
    enumerate_wall_types,
    ht_bound_ok,
    make_context,
    same_orbit,
    wall_type_exists,
)
from .lattice_core import LatticeVector, divisibility, inner, primitive_part
from .schemas import (
    ChamberQuery,
    ChamberResponse,
    CheckOrbitsResponse,
    InvariantsOut,
    OrbitRequest,
    OrbitResponse,
    RayOut,
    TableResponse,
    WallOut,
    WallTestRequest,
    WallTestResponse,
    WallTypeRow,
    WitnessOut,
)

logger = logging.getLogger(__name__)


def _witness_out(witness: WallWitness) -> WitnessOut:
    return WitnessOut(
        condition=witness.condition.value,
        lattice=witness.lattice.label or "",
        gram=[list(row) for row in witness.lattice.gram],
        vectors=[list(x.coords) for x in witness.vectors],
        pairing_data=list(witness.pairing_data),
        v=None if witness.v is None else list(witness.v.coords),
        verified=witness.verify(),
    )


def _wall_out(wall: Wall) -> WallOut:
    return WallOut(
        D=list(wall.D.coords),
        square=wall.wall_type.square,
        div=wall.wall_type.div,
        ray=plain(wall.ray),
        ray_square=str(wall.ray_square),
        minus_two=wall.is_minus_two,
        certificate=None if wall.certificate is None else plain(wall.certificate),
    )


def _invariants_out(inv: EichlerInvariants) -> InvariantsOut:
    return InvariantsOut(
        square=inv.square,
        div=inv.div,
        disc=list(inv.disc.exponents),
        invariant_factors=list(inv.disc.invariant_factors),
    )


class WallkitEngine:
    """Shared service behind the CLI and the HTTP routers."""

    def _types(self, ctx: NContext, which: str):
        return confirmed_wall_types(ctx) if which == "confirmed" else enumerate_wall_types(ctx)

    def _vector(self, ctx: NContext, value: Union[Sequence[int], Mapping[str, object]]) -> LatticeVector:
        if isinstance(value, Mapping):
            return ctx.ln_vector(value)
        if len(value) != ctx.Ln.rank:
            raise InputError(f"a vector of L_{ctx.n} needs {ctx.Ln.rank} coordinates, got {len(value)}")
        return ctx.Ln.vector(value)

    def tabulate(self, n: int, types: str = "candidate") -> TableResponse:
        ctx = make_context(n)
        rows = [
            WallTypeRow(n=n, square=t.square, div=t.div, ray_square=str(t.ray_square)) for t in self._types(ctx, types)
        ]
        return TableResponse(n=n, types=types, rows=rows, caveat=candidate_caveat(n))

    def wall_test(self, request: WallTestRequest) -> WallTestResponse:
        ctx = make_context(request.n)
        if request.square is not None:
            D = wall_type_exists(ctx, request.square, request.div)
            if D is None:
                raise InputError(
                    f"no primitive vector of square {request.square} and divisibility {request.div} in L_{request.n}"
                )
        else:
            D = self._vector(ctx, request.coords if request.coords is not None else request.blocks)
        square = inner(ctx.Ln, D, D)
        m = divisibility(ctx.Ln, D)
        ray_square = Fraction(square, m * m)
        witness = detect_wall(ctx, D)
        logger.info("wall test n=%d square=%d div=%d detected=%s", request.n, square, m, witness is not None)
        return WallTestResponse(
            n=request.n,
            divisor=list(D.coords),
            square=square,
            div=m,
            ray_square=str(ray_square),
            ht_bound=ht_bound_ok(request.n, ray_square),
            detected=witness is not None,
            witness=None if witness is None else _witness_out(witness),
        )

    def orbit(self, request: OrbitRequest) -> OrbitResponse:
        ctx = make_context(request.n)
        v = self._vector(ctx, request.v)
        w = self._vector(ctx, request.w)
        verdict = same_orbit(ctx.Ln, v, w, assume_eichler=request.assume_eichler)
        return OrbitResponse(
            n=request.n,
            v=_invariants_out(eichler_invariants(ctx.Ln, v)),
            w=_invariants_out(eichler_invariants(ctx.Ln, w)),
            same_orbit=verdict,
        )

    def chamber(self, query: ChamberQuery) -> ChamberResponse:
        ctx = make_context(query.n)
        rho = len(query.pic_gram)
        embed = query.embed
        if len(embed) == rho and rho != ctx.Ln.rank and all(len(row) == ctx.Ln.rank for row in embed):
            embed = [list(col) for col in zip(*embed)]
        P = picard_data(ctx, query.pic_gram, embed, reference=query.reference)
        report = chamber_report(
            P,
            omega=query.omega,
            alpha=query.alpha,
            beta=query.beta,
            types=self._types(ctx, query.types),
            search_bound=query.search_bound,
        )
        logger.info(
            "chamber n=%d rank=%d: %d supporting walls (%s)",
            query.n,
            rho,
            len(report.supporting),
            report.completeness,
        )
        return ChamberResponse(
            n=query.n,
            reference=plain(report.reference),
            walls_crossed=[_wall_out(w) for w in report.walls_crossed],
            supporting=[_wall_out(w) for w in report.supporting],
            rays=[RayOut(ray=plain(r.ray), ray_square=str(r.ray_square)) for r in report.rays],
            completeness=report.completeness,
            caveat=report.caveat,
        )

    def catalog(self) -> List[str]:
        return list_fixtures()

    def verify(self, name: str, n: Optional[int] = None) -> FixtureReport:
        return verify_fixture(name, n)

    def catalog_n_values(self, name: str) -> List[int]:
        return list(get_fixture(name).n_values)

    def _random_primitive(self, rng: random.Random, ctx: NContext) -> LatticeVector:
        while True:
            coords = [rng.randint(-3, 3) for _ in range(ctx.Ln.rank)]
            if any(coords):
                return primitive_part(ctx.Ln, coords)

    def check_orbits(self, seed: int = 0, samples: int = 200, n_values: Sequence[int] = (2, 3, 5)) -> CheckOrbitsResponse:
        """Random Eichler transvections must preserve (square, div, disc class)."""
        rng = random.Random(seed)
        failures: List[str] = []
        for index in range(samples):
            ctx = make_context(rng.choice(list(n_values)))
            L = ctx.Ln
            x = ctx.delta if index % 4 == 0 else self._random_primitive(rng, ctx)
            # e = e1 is isotropic; a needs a zero f1 coordinate to lie in e-perp
            e = L.basis_vector(0)
            a = [rng.randint(-2, 2) for _ in range(L.rank)]
            a[1] = 0
            y = eichler_transvection(L, e, L.vector(a), x)
            z = eichler_transvection(L, L.basis_vector(2), L.basis_vector(0) + L.basis_vector(4), y)
            before = eichler_invariants(L, x)
            if eichler_invariants(L, y) != before or eichler_invariants(L, z) != before:
                failures.append(f"sample {index} (n={ctx.n}): invariants changed for {list(x.coords)}")
                continue
            relations = (
                same_orbit(L, x, x),
                same_orbit(L, x, y) == same_orbit(L, y, x),
                same_orbit(L, x, y) and same_orbit(L, y, z) and same_orbit(L, x, z),
            )
            if not all(relations):
                failures.append(f"sample {index} (n={ctx.n}): same_orbit is not an equivalence on the chain")
        logger.info("check-orbits seed=%d: %d/%d violations", seed, len(failures), samples)
        return CheckOrbitsResponse(
            seed=seed,
            samples=samples,
            n_values=list(n_values),
            violations=len(failures),
            failures=failures,
        )


engine = WallkitEngine()
