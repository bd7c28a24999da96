"""Worked examples and tables as JSON fixtures, and the verifier that recomputes them.

Each fixture stores claims (quantity, expected value, provenance tag) for one or
more values of n. ``verify_fixture`` recomputes every quantity with the lattice
modules and reports one assertion per claim.
"""

from __future__ import annotations

import logging
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Dict, List, Literal, Optional

from pydantic import BaseModel, computed_field, model_validator

from .cone_geometry import chamber_report, picard_data, PicardData
from .errors import InputError
from .k3n_walls import (
    NContext,
    WitnessCondition,
    bm_wall_test,
    confirmed_wall_types,
    detect_wall,
    dual_ray,
    enumerate_wall_types,
    ht_bound_ok,
    hyperbolic_T,
    make_context,
    markman_wall_test,
)
from .lattice_core import LatticeVector, divisibility, inner, is_primitive

logger = logging.getLogger(__name__)

FIXTURE_DIR = Path(__file__).with_name("fixtures")

Tag = Literal["PAPER", "TRIVIAL", "DERIVED"]
FixtureKind = Literal["divisor", "bm_witness", "table", "chamber", "negative_ray", "remark"]


class Claim(BaseModel):
    quantity: str
    expected: Any
    tag: Tag
    n: Optional[int] = None
    note: Optional[str] = None

    @model_validator(mode="after")
    def _derived_needs_oracle(self) -> "Claim":
        if self.tag == "DERIVED" and not self.note:
            raise ValueError(f"DERIVED claim {self.quantity!r} needs a note naming its oracle")
        return self


class Provenance(BaseModel):
    source: str
    quote: str


class Fixture(BaseModel):
    name: str
    kind: FixtureKind
    n_values: List[int]
    provenance: Provenance
    payload: Dict[str, Any] = {}
    claims: List[Claim]

    @model_validator(mode="after")
    def _claims_in_range(self) -> "Fixture":
        for claim in self.claims:
            if claim.n is not None and claim.n not in self.n_values:
                raise ValueError(f"claim {claim.quantity!r} targets n={claim.n} outside {self.n_values}")
        return self


class Assertion(BaseModel):
    quantity: str
    n: int
    tag: Tag
    expected: Any
    observed: Any
    passed: bool
    note: Optional[str] = None


class FixtureReport(BaseModel):
    name: str
    kind: FixtureKind
    provenance: Provenance
    assertions: List[Assertion]

    @computed_field
    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    @property
    def failures(self) -> List[Assertion]:
        return [a for a in self.assertions if not a.passed]


@lru_cache(maxsize=1)
def _load() -> Dict[str, Fixture]:
    fixtures: Dict[str, Fixture] = {}
    for path in sorted(FIXTURE_DIR.glob("*.json")):
        fixture = Fixture.model_validate_json(path.read_text(encoding="utf-8"))
        if fixture.name in fixtures:
            raise ValueError(f"duplicate fixture name {fixture.name!r} in {path.name}")
        fixtures[fixture.name] = fixture
    logger.debug("loaded %d fixtures from %s", len(fixtures), FIXTURE_DIR)
    return fixtures


def list_fixtures() -> List[str]:
    return sorted(_load())


def get_fixture(name: str) -> Fixture:
    try:
        return _load()[name]
    except KeyError:
        raise InputError(f"unknown fixture {name!r}; known: {', '.join(list_fixtures())}") from None


def plain(value: Any) -> Any:
    """JSON-friendly form: integral fractions become ints, others 'p/q' strings."""
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Fraction):
        return int(value) if value.denominator == 1 else str(value)
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    return value


def _canon(value: Any) -> Any:
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value)
        except ValueError:
            return value
    if isinstance(value, (list, tuple)):
        return tuple(_canon(v) for v in value)
    return value


def _condition(witness) -> Optional[str]:
    return None if witness is None else witness.condition.value


def _type_keys(types) -> set:
    return {(t.square, t.div) for t in types}


def _observe_divisor(ctx: NContext, payload: Dict[str, Any]) -> Dict[str, Any]:
    D = ctx.ln_vector(payload["blocks"])
    square = inner(ctx.Ln, D, D)
    m = divisibility(ctx.Ln, D)
    ray_square = Fraction(square, m * m)
    found = detect_wall(ctx, D)
    return {
        "square": square,
        "div": m,
        "primitive": is_primitive(ctx.Ln, D),
        "ray_square": ray_square,
        # coefficient of the dual ray on delta-dual = delta / (2n-2)
        "ray_delta_dual": dual_ray(ctx.Ln, D)[22] * ctx.half_index,
        "markman": _condition(markman_wall_test(ctx, D)),
        "is_wall": found is not None,
        "witness_verified": found is not None and found.verify(),
        "ht_bound": ht_bound_ok(ctx.n, ray_square),
        "table_row": [ray_square, square, m],
        "in_table": (square, m) in _type_keys(enumerate_wall_types(ctx)),
    }


def _observe_bm_witness(ctx: NContext, payload: Dict[str, Any]) -> Dict[str, Any]:
    D = ctx.ln_vector(payload["blocks"])
    k = payload["s_denominator"]
    total = ctx.v + ctx.to_mukai(D)
    if any(c % k for c in total.coords):
        raise InputError(f"(v + D) / {k} is not integral")
    s = LatticeVector(ctx.mukai, tuple(c // k for c in total.coords))
    T = hyperbolic_T(ctx, s)
    witness = bm_wall_test(T.lattice, T.v_in_T)
    return {
        "square": inner(ctx.Ln, D, D),
        "div": divisibility(ctx.Ln, D),
        "v_square": inner(ctx.mukai, ctx.v, ctx.v),
        "s_square": inner(ctx.mukai, s, s),
        "s_v": inner(ctx.mukai, s, ctx.v),
        "det_T": T.lattice.determinant,
        "markman": _condition(markman_wall_test(ctx, D)),
        "bm_condition": _condition(witness),
        "bm_data": None if witness is None else list(witness.pairing_data),
        "witness_verified": witness is not None and witness.verify(),
    }


def _rows(types) -> List[List[Any]]:
    return [[t.ray_square, t.square, t.div] for t in types]


def _observe_table(ctx: NContext, payload: Dict[str, Any]) -> Dict[str, Any]:
    rows = enumerate_wall_types(ctx)
    confirmed = confirmed_wall_types(ctx)
    return {
        "rows": _rows(rows),
        "count": len(rows),
        "confirmed_rows": _rows(confirmed),
        "squares": sorted({t.square for t in rows}),
    }


def bm2_picard(ctx: NContext, d: int) -> PicardData:
    """<2d> + <-(2n-2)> with H = e1 + d f1 in the first U and delta the last basis vector."""
    embed = [[0, 0] for _ in range(ctx.Ln.rank)]
    embed[0][0] = 1
    embed[1][0] = d
    embed[22][1] = 1
    return picard_data(ctx, [[2 * d, 0], [0, -ctx.half_index]], embed, label=f"Pic_d{d}")


def _types_for(ctx: NContext, which: str):
    if which == "confirmed":
        return confirmed_wall_types(ctx)
    if which == "candidate":
        return enumerate_wall_types(ctx)
    raise InputError(f"types must be 'candidate' or 'confirmed', got {which!r}")


def _observe_chamber(ctx: NContext, payload: Dict[str, Any]) -> Dict[str, Any]:
    d = payload["d"]
    P = bm2_picard(ctx, d)
    omega = (Fraction(1), Fraction(-d, d + ctx.n))
    report = chamber_report(P, omega, types=_types_for(ctx, payload.get("types", "confirmed")))
    nef = [(Fraction(1), Fraction(0)), (Fraction(1), Fraction(-2 * d, d + ctx.n))]
    supporting = [list(w.D.coords) for w in report.supporting]
    rays = {tuple(w.D.coords): r for w, r in zip(report.supporting, report.rays)}
    delta_ray = rays.get((0, 1))
    return {
        "supporting": supporting,
        "ray_squares": [r.ray_square for r in report.rays],
        "orthogonal_to_nef_generators": all(
            any(P.pairing(w.D.coords, g) == 0 for g in nef) for w in report.supporting
        ),
        "delta_ray": None if delta_ray is None else list(delta_ray.ray),
        "completeness": report.completeness,
    }


def _observe_negative_ray(ctx: NContext, payload: Dict[str, Any]) -> Dict[str, Any]:
    P = bm2_picard(ctx, payload["d"])
    coords = tuple(payload["ray_coords"])
    R = LatticeVector(P.pic, coords)
    square = P.square(coords)
    m = P.div_in_Ln(R)
    ray_square = Fraction(square, m * m)
    omega = (Fraction(1), Fraction(-payload["d"], payload["d"] + ctx.n))

    def supporting(which: str) -> bool:
        report = chamber_report(P, omega, types=_types_for(ctx, which))
        return coords in {w.D.coords for w in report.supporting}

    return {
        "square": square,
        "div": m,
        "ray_square": ray_square,
        "ht_bound": ht_bound_ok(ctx.n, ray_square),
        "candidate_type": (square, m) in _type_keys(enumerate_wall_types(ctx)),
        "confirmed_type": (square, m) in _type_keys(confirmed_wall_types(ctx)),
        "is_wall": detect_wall(ctx, P.embed.image(R)) is not None,
        "supporting_candidate_chamber": supporting("candidate"),
        "supporting_confirmed_chamber": supporting("confirmed"),
    }


def _observe_remark(ctx: NContext, payload: Dict[str, Any]) -> Dict[str, Any]:
    candidates = enumerate_wall_types(ctx)
    confirmed = confirmed_wall_types(ctx)
    shift = 2 * ctx.n + 6
    bounded = [
        t.square
        for t in confirmed
        if t.div == 2 and detect_wall(ctx, t.witness).condition is WitnessCondition.BM_bounded_root
    ]
    return {
        "div1_squares": sorted({t.square for t in confirmed if t.div == 1}),
        "div2_congruence": all((t.square + shift) % 4 == 0 for t in candidates if t.div == 2),
        "div2_bounded_root_squares": sorted(bounded),
    }


OBSERVERS: Dict[str, Callable[[NContext, Dict[str, Any]], Dict[str, Any]]] = {
    "divisor": _observe_divisor,
    "bm_witness": _observe_bm_witness,
    "table": _observe_table,
    "chamber": _observe_chamber,
    "negative_ray": _observe_negative_ray,
    "remark": _observe_remark,
}


def verify_fixture(name: str, n: Optional[int] = None) -> FixtureReport:
    fixture = get_fixture(name)
    if n is not None and n not in fixture.n_values:
        raise InputError(f"fixture {name!r} covers n in {fixture.n_values}, not {n}")
    n_values = fixture.n_values if n is None else [n]
    observe = OBSERVERS[fixture.kind]
    assertions: List[Assertion] = []
    for current in n_values:
        claims = [c for c in fixture.claims if c.n in (None, current)]
        if not claims:
            continue
        observed = observe(make_context(current), fixture.payload)
        for claim in claims:
            if claim.quantity not in observed:
                raise InputError(f"fixture {name!r} claims unknown quantity {claim.quantity!r}")
            value = plain(observed[claim.quantity])
            assertions.append(
                Assertion(
                    quantity=claim.quantity,
                    n=current,
                    tag=claim.tag,
                    expected=claim.expected,
                    observed=value,
                    passed=_canon(claim.expected) == _canon(value),
                    note=claim.note,
                )
            )
    report = FixtureReport(name=name, kind=fixture.kind, provenance=fixture.provenance, assertions=assertions)
    if not report.passed:
        logger.warning("fixture %s: %d failing assertions", name, len(report.failures))
    return report
