import itertools
import math
import random
from fractions import Fraction

import pytest

from backend.app.catalog import bm2_picard
from backend.app.cone_geometry import (
    chamber_report,
    extremal_rays,
    in_dual_cone,
    is_positive_class,
    picard_data,
    same_chamber,
    supporting_walls,
    walls_between,
)
from backend.app.config import get_settings
from backend.app.errors import ConfigurationError, EnumerationLimitError, InputError, OnWallError
from backend.app.k3n_walls import confirmed_wall_types, enumerate_wall_types, ht_bound_ok, make_context


def deg2(n=2, d=1):
    return bm2_picard(make_context(n), d)


def rank3(n):
    """<2> + <-(2n-2)> + <-2>: H = e1 + f1, delta, E = e2 - f2."""
    ctx = make_context(n)
    embed = [[0, 0, 0] for _ in range(ctx.Ln.rank)]
    embed[0][0] = embed[1][0] = 1
    embed[22][1] = 1
    embed[2][2], embed[3][2] = 1, -1
    gram = [[2, 0, 0], [0, -(2 * n - 2), 0], [0, 0, -2]]
    return picard_data(ctx, gram, embed, reference=(3, 0, 0))


def coords(walls):
    return sorted(list(w.D.coords) for w in walls)


@pytest.fixture
def small_cell_cap(monkeypatch):
    monkeypatch.setenv("WALLKIT_MAX_CELLS", "60")
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


def test_picard_data_validation():
    ctx = make_context(2)
    embed = [[0] for _ in range(23)]
    embed[0][0] = embed[1][0] = 1
    assert picard_data(ctx, [[2]], embed).rank == 1
    negative = [[0] for _ in range(23)]
    negative[22][0] = 1
    with pytest.raises(InputError):
        picard_data(ctx, [[-2]], negative)
    imprimitive = [[0] for _ in range(23)]
    imprimitive[0][0] = imprimitive[1][0] = 2
    with pytest.raises(InputError):
        picard_data(ctx, [[8]], imprimitive)
    # isotropic reference
    with pytest.raises(InputError):
        deg2().with_reference((1, 1))


def test_positive_class():
    P = deg2().with_reference((2, -1))
    assert is_positive_class(P, (2, -1))
    assert is_positive_class(P, (1, 0))
    assert not is_positive_class(P, (-2, 1))
    # H + delta is isotropic
    assert not is_positive_class(P, (1, 1))
    with pytest.raises(ConfigurationError):
        is_positive_class(deg2(), (2, -1))


def test_float_coordinates_rejected():
    with pytest.raises(InputError):
        supporting_walls(deg2(), (2.0, -1.0))
    assert supporting_walls(deg2(), ("2", "-1"))


def test_supporting_walls_degree_two():
    P = deg2()
    walls = supporting_walls(P, (2, -1))
    assert coords(walls) == [[0, 1], [2, -3]]
    assert all(P.pairing(w.D.coords, (2, -1)) > 0 for w in walls)
    assert sorted(r.ray_square for r in extremal_rays(P, (2, -1))) == [Fraction(-5, 2), Fraction(-1, 2)]
    report = chamber_report(P, omega=(2, -1))
    assert report.completeness == "exact"
    assert report.caveat is None
    assert [list(w.D.coords) for w in report.minus_two_walls] == [[0, 1]]


@pytest.mark.parametrize(
    "n, expected",
    [(3, [[0, 1], [4, -5]]), (4, [[0, 1], [1, -1]]), (5, [[0, 1], [8, -7]])],
)
def test_degree_two_nef_cone_confirmed_types(n, expected):
    ctx = make_context(n)
    P = bm2_picard(ctx, 2)
    omega = (1, Fraction(-2, 2 + n))
    walls = supporting_walls(P, omega, types=confirmed_wall_types(ctx))
    assert coords(walls) == expected
    delta_wall = next(w for w in walls if w.D.coords == (0, 1))
    assert delta_wall.ray == (0, Fraction(1, 2 * n - 2))


def test_candidate_type_wall_at_n5_is_not_confirmed():
    ctx = make_context(5)
    P = bm2_picard(ctx, 2)
    omega = (1, Fraction(-2, 7))
    candidate = coords(supporting_walls(P, omega, types=enumerate_wall_types(ctx)))
    confirmed = coords(supporting_walls(P, omega, types=confirmed_wall_types(ctx)))
    assert [1, -1] in candidate
    assert [1, -1] not in confirmed
    assert chamber_report(P, omega=omega).caveat is not None


def test_rank_one_has_no_walls():
    ctx = make_context(3)
    embed = [[0] for _ in range(23)]
    embed[0][0], embed[1][0] = 1, 2
    P = picard_data(ctx, [[4]], embed)
    report = chamber_report(P, omega=(1,))
    assert report.supporting == ()
    assert report.completeness == "exact"
    with pytest.raises(ConfigurationError):
        chamber_report(P)


def test_omega_on_a_wall():
    with pytest.raises(OnWallError) as info:
        supporting_walls(deg2(), (1, 0))
    assert info.value.wall.D.coords in ((0, 1), (0, -1))
    with pytest.raises(OnWallError):
        supporting_walls(rank3(2), (3, 0, 0), search_bound=2)


def test_omega_in_other_component():
    P = deg2().with_reference((2, -1))
    with pytest.raises(InputError):
        supporting_walls(P, (-2, 1))


def test_walls_between_crosses_delta():
    P = deg2()
    crossed = walls_between(P, (2, -1), (2, 1))
    assert [0, 1] in coords(crossed)
    for w in crossed:
        assert P.pairing(w.D.coords, (2, -1)) > 0 > P.pairing(w.D.coords, (2, 1))
    assert walls_between(P, (2, -1), (2, -1)) == []


def test_walls_between_reflection():
    P = deg2()
    alpha = (2, -1)
    beta = (Fraction(14, 5), Fraction(-11, 5))
    # beta is alpha reflected in (2H - 3 delta)-perp
    D = (2, -3)
    assert beta == tuple(a - Fraction(2 * P.pairing(alpha, D), P.square(D)) * d for a, d in zip(alpha, D))
    crossed = walls_between(P, alpha, beta)
    assert [2, -3] in coords(crossed)
    assert not same_chamber(P, alpha, beta)


def test_walls_between_errors():
    P = deg2()
    with pytest.raises(InputError):
        walls_between(P, (1, 1), (2, -1))
    with pytest.raises(InputError):
        walls_between(P, (2, -1), (-2, 1))


def test_same_chamber():
    P = deg2()
    assert same_chamber(P, (2, -1), (6, -3))
    assert same_chamber(P, (2, -1), (Fraction(2001, 1000), -1))
    assert not same_chamber(P, (2, -1), (2, 1))


def test_in_dual_cone():
    P = deg2()
    walls = supporting_walls(P, (2, -1))
    assert in_dual_cone(P, [], (2, -1), (2, -1))
    assert in_dual_cone(P, walls, (2, -1), (2, -1))
    assert not in_dual_cone(P, walls, (2, -1), (1, 0))
    assert not in_dual_cone(P, walls, (2, -1), (-2, 1))


def test_rank_three_certificates():
    P = rank3(2)
    omega = (3, Fraction(-1, 3), Fraction(-1, 5))
    report = chamber_report(P, omega=omega, search_bound=3)
    assert report.completeness == "complete up to height 3"
    assert report.supporting
    for wall in report.supporting:
        cert = wall.certificate
        assert P.pairing(wall.D.coords, omega) > 0
        assert P.pairing(wall.D.coords, cert) == 0
        assert P.square(cert) > 0
        for other in report.supporting:
            if other is not wall:
                assert P.pairing(other.D.coords, cert) > 0


def test_enumeration_cap(small_cell_cap):
    with pytest.raises(EnumerationLimitError):
        supporting_walls(rank3(2), (3, Fraction(-1, 3), Fraction(-1, 5)), search_bound=3)


def test_random_rank_two_rays_satisfy_ht_bound():
    rng = random.Random(7)
    checked = 0
    while checked < 50:
        n = rng.choice([2, 3, 4])
        d = rng.randint(1, 6)
        P = bm2_picard(make_context(n), d)
        t = Fraction(rng.randint(1, 60), 61)
        # omega = H - t delta is positive iff t^2 (2n - 2) < 2d
        if t * t * (2 * n - 2) >= 2 * d:
            continue
        try:
            rays = extremal_rays(P, (1, -t))
        except OnWallError:
            continue
        checked += 1
        assert all(ht_bound_ok(n, r.ray_square) for r in rays)


def brute_force_walls(P, alpha, beta, height):
    table = {(t.square, t.div) for t in P.default_types}
    squares = {s for s, _ in table}
    found = []
    for x in itertools.product(range(-height, height + 1), repeat=P.rank):
        if not any(x) or math.gcd(*x) != 1:
            continue
        if not P.pairing(x, alpha) > 0 > P.pairing(x, beta):
            continue
        square = P.square(x)
        if square not in squares:
            continue
        D = P.embed.source.vector(x)
        if (square, P.div_in_Ln(D)) in table:
            found.append(list(x))
    return sorted(found)


@pytest.mark.slow
def test_walls_between_matches_brute_force():
    rng = random.Random(11)
    height = 12

    def point(first):
        return (first, Fraction(rng.randint(-4, 4), 4), Fraction(rng.randint(-4, 4), 4))

    for _ in range(30):
        n = rng.choice([2, 3, 4])
        P = rank3(n)
        alpha, beta = point(3), point(rng.choice([3, 4]))
        crossed = [c for c in coords(walls_between(P, alpha, beta)) if max(map(abs, c)) <= height]
        assert crossed == brute_force_walls(P, alpha, beta, height)


def side(omega, x):
    return (omega[0] * x[1] > omega[1] * x[0]) - (omega[0] * x[1] < omega[1] * x[0])


def wall_ray(P, x, omega):
    g = P.pic.gram
    h = [g[0][0] * x[0] + g[0][1] * x[1], g[1][0] * x[0] + g[1][1] * x[1]]
    r = (h[1], -h[0])
    return r if P.pairing(r, omega) > 0 else (-r[0], -r[1])


@pytest.mark.parametrize(
    "d, omegas, expected",
    [
        (2, [(1, Fraction(-1, 2)), (1, Fraction(-47, 400)), (1, Fraction(-1201, 1000))], [[0, 1], [2, -3]]),
        (3, [(1, Fraction(-1, 2)), (1, Fraction(-173, 1200)), (1, Fraction(-1499, 1000))], [[0, 1], [1, -2]]),
    ],
)
def test_rank_two_chamber_ignores_omega_denominators(d, omegas, expected):
    P = deg2(d=d)
    for omega in omegas:
        report = chamber_report(P, omega=omega)
        assert coords(report.supporting) == expected
        assert report.completeness == "exact"


def test_rank_two_bracketing_depth():
    # at d=2 the wall 2H - 3delta of the chamber of 2H - delta is first bracketed at depth 3
    P = deg2(d=2)
    shallow = chamber_report(P, omega=(2, -1), search_bound=2)
    assert coords(shallow.supporting) == [[0, 1]]
    assert shallow.completeness == "complete up to bracketing depth 2"
    deep = chamber_report(P, omega=(2, -1), search_bound=3)
    assert coords(deep.supporting) == [[0, 1], [2, -3]]
    assert deep.completeness == "exact"
    assert coords(chamber_report(P, omega=(20, -10), search_bound=3).supporting) == [[0, 1], [2, -3]]


def test_rank_two_rational_cusp_is_exact_at_any_depth():
    # (H + delta)^2 = 0 at d=1, so both boundary rays of the positive cone are rational
    P = deg2()
    report = chamber_report(P, omega=(2, -1), search_bound=1)
    assert coords(report.supporting) == [[0, 1], [2, -3]]
    assert report.completeness == "exact"
    for wall in report.supporting:
        assert P.pairing(wall.D.coords, wall.certificate) == 0
        assert P.square(wall.certificate) > 0


@pytest.mark.slow
def test_rank_two_chambers_match_brute_force():
    rng = random.Random(131)
    box = 40
    checked = 0
    while checked < 40:
        n = rng.choice([2, 3, 4])
        d = rng.randint(1, 6)
        P = bm2_picard(make_context(n), d)
        t = Fraction(rng.randint(1, 2000), rng.randint(1, 1200))
        if t * t * (2 * n - 2) >= 2 * d:
            continue
        omega = (1, -t)
        try:
            report = chamber_report(P, omega=omega)
        except OnWallError:
            continue
        checked += 1
        table = {(w.square, w.div) for w in P.default_types}
        squares = {s for s, _ in table}
        walls = []
        for x in itertools.product(range(-box, box + 1), repeat=2):
            if math.gcd(*x) != 1 or P.pairing(x, omega) <= 0 or P.square(x) not in squares:
                continue
            if (P.square(x), P.div_in_Ln(P.embed.source.vector(x))) in table:
                walls.append(x)
        sides = {side(omega, wall_ray(P, x, omega)) for x in walls}
        found = set()
        for wall in report.supporting:
            cert = wall.certificate
            assert P.pairing(wall.D.coords, cert) == 0
            assert P.square(cert) > 0
            assert all(P.pairing(x, cert) >= 0 for x in walls)
            found.add(side(omega, cert))
        assert len(found) == len(report.supporting)
        if report.completeness == "exact":
            assert sides <= found


def test_walls_between_is_antisymmetric():
    rng = random.Random(23)
    for _ in range(6):
        n = rng.choice([2, 3])
        P = rank3(n)
        alpha = (3, Fraction(rng.randint(-4, 4), 4), Fraction(rng.randint(-4, 4), 5))
        beta = (3, Fraction(rng.randint(-4, 4), 3), Fraction(rng.randint(-4, 4), 7))
        forward = coords(walls_between(P, alpha, beta))
        backward = coords(walls_between(P, beta, alpha))
        assert backward == sorted([-c for c in D] for D in forward)
        for D in forward:
            assert P.pairing(D, alpha) > 0 > P.pairing(D, beta)


def unoriented(P, walls, *avoid):
    keys = set()
    for w in walls:
        D = w.D.coords
        if any(P.pairing(D, x) == 0 for x in avoid):
            continue
        sign = 1 if next(c for c in D if c) > 0 else -1
        keys.add(tuple(sign * c for c in D))
    return keys


def test_walls_between_along_a_broken_path():
    rng = random.Random(29)
    for _ in range(6):
        n = rng.choice([2, 3])
        P = rank3(n)
        alpha = (3, Fraction(rng.randint(-4, 4), 4), Fraction(rng.randint(-4, 4), 5))
        beta = (3, Fraction(rng.randint(-4, 4), 3), Fraction(rng.randint(-4, 4), 7))
        gamma = (3, Fraction(rng.randint(-4, 4), 11), Fraction(rng.randint(-4, 4), 13))
        direct = unoriented(P, walls_between(P, alpha, beta), gamma)
        first = unoriented(P, walls_between(P, alpha, gamma), beta)
        second = unoriented(P, walls_between(P, gamma, beta), alpha)
        assert direct == first ^ second
