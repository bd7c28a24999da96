import math
import random
from fractions import Fraction

import pytest

from backend.app.config import get_settings
from backend.app.errors import EnumerationLimitError, HypothesisError, InputError
from backend.app.k3n_walls import (
    WallType,
    WitnessCondition,
    bm_wall_test,
    bm_wall_test_divisor,
    candidate_caveat,
    confirmed_wall_types,
    detect_wall,
    dual_ray,
    eichler_invariants,
    eichler_transvection,
    enumerate_wall_types,
    has_two_hyperbolic_planes,
    ht_bound_ok,
    hyperbolic_T,
    isotropic_pair,
    make_context,
    markman_wall_test,
    same_orbit,
    wall_type_exists,
)
from backend.app.lattice_core import (
    IntegerLattice,
    LatticeVector,
    discriminant_group,
    divisibility,
    inner,
    is_primitive,
    signature,
    standard_lattice,
)


def rows(types):
    return {(t.ray_square, t.square, t.div) for t in types}


def bundle_root(ctx, blocks, k):
    D = ctx.ln_vector(blocks)
    total = ctx.v + ctx.to_mukai(D)
    return LatticeVector(ctx.mukai, tuple(c // k for c in total.coords))


@pytest.mark.parametrize("n", [2, 3, 4, 6])
def test_context(n):
    ctx = make_context(n)
    assert inner(ctx.mukai, ctx.v, ctx.v) == 2 * n - 2
    assert signature(ctx.Ln) == (3, 20)
    assert ctx.embedding.is_primitive
    for i in range(ctx.Ln.rank):
        assert inner(ctx.mukai, ctx.embedding.column(i), ctx.v) == 0


def test_context_n2_discriminant():
    ctx = make_context(2)
    assert ctx.Ln.determinant == 2
    assert discriminant_group(ctx.Ln).invariant_factors == (2,)


def test_context_rejects_small_n():
    with pytest.raises(InputError):
        make_context(1)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_isotropic_pair_for_delta(n):
    ctx = make_context(n)
    pair = isotropic_pair(ctx, ctx.delta)
    for w in (pair.w1, pair.w2):
        assert inner(ctx.mukai, w, w) == 0
        assert is_primitive(ctx.mukai, w)
    assert 1 in pair.pairings or 2 in pair.pairings


def test_isotropic_pair_needs_square():
    ctx = make_context(3)
    with pytest.raises(InputError):
        isotropic_pair(ctx, ctx.ln_vector({"U1": [1, -1]}))


@pytest.mark.parametrize("n", [2, 3, 5])
def test_markman_minus_two(n):
    ctx = make_context(n)
    witness = markman_wall_test(ctx, ctx.ln_vector({"U1": [1, -1]}))
    assert witness.condition is WitnessCondition.MK_minus2
    assert witness.verify()


@pytest.mark.parametrize("n", [3, 4, 5])
def test_markman_isotropic_delta(n):
    ctx = make_context(n)
    witness = markman_wall_test(ctx, ctx.delta)
    assert witness.condition is WitnessCondition.MK_isotropic
    assert witness.verify()


def test_markman_misses_pn_divisor_at_n3():
    ctx = make_context(3)
    D = ctx.ln_vector({"U1": [2, -2], "delta": -1})
    assert inner(ctx.Ln, D, D) == -12
    assert divisibility(ctx.Ln, D) == 2
    assert markman_wall_test(ctx, D) is None


def test_markman_input_errors():
    ctx = make_context(3)
    with pytest.raises(InputError):
        markman_wall_test(ctx, ctx.ln_vector({"U1": [1, 1]}))
    with pytest.raises(InputError):
        markman_wall_test(ctx, ctx.ln_vector({"U1": [2, -2]}))
    with pytest.raises(InputError):
        markman_wall_test(ctx, ctx.Ln.zero())


def test_hyperbolic_T_for_bundle_n3():
    ctx = make_context(3)
    a = bundle_root(ctx, {"U1": [4, -4], "delta": -1}, 4)
    T = hyperbolic_T(ctx, a)
    assert T.is_hyperbolic
    assert inner(T.lattice, T.s_in_T, T.s_in_T) == -2
    assert inner(T.lattice, T.s_in_T, T.v_in_T) == 1
    assert T.v_in_T.coords == (1, 0)
    assert T.embedding.is_primitive


def test_hyperbolic_T_for_square_minus_six_n4():
    ctx = make_context(4)
    a = bundle_root(ctx, {"U1": [2, 0], "delta": 1}, 2)
    T = hyperbolic_T(ctx, a)
    assert inner(T.lattice, T.s_in_T, T.s_in_T) == 0
    assert inner(T.lattice, T.s_in_T, T.v_in_T) == 3


def test_hyperbolic_T_rejects_multiple_of_v():
    ctx = make_context(3)
    with pytest.raises(InputError):
        hyperbolic_T(ctx, ctx.v * 2)


def test_bm_bounded_root_n3():
    ctx = make_context(3)
    T = hyperbolic_T(ctx, bundle_root(ctx, {"U1": [4, -4], "delta": -1}, 4))
    witness = bm_wall_test(T.lattice, T.v_in_T)
    assert witness.condition is WitnessCondition.BM_bounded_root
    assert witness.pairing_data == (-2, 1)
    assert witness.verify()


def test_bm_sum_decomposition_n4():
    ctx = make_context(4)
    D = ctx.ln_vector({"U1": [2, 0], "delta": 1})
    witness = bm_wall_test_divisor(ctx, D)
    assert witness.condition is WitnessCondition.BM_sum_decomposition
    assert witness.pairing_data == (0, 0, 3, 3)
    w, t = witness.vectors
    assert w + t == witness.v
    assert witness.verify()


def test_bm_orth_root():
    T = IntegerLattice(((4, 0), (0, -2)))
    witness = bm_wall_test(T, T.vector((1, 0)))
    assert witness.condition is WitnessCondition.BM_orth_root
    assert witness.verify()


def test_bm_isotropic():
    # v = e + f in U has square 2 and pairs to 1 with the isotropic e
    U = standard_lattice("U")
    witness = bm_wall_test(U, U.vector((1, 1)))
    assert witness.condition in (WitnessCondition.BM_orth_root, WitnessCondition.BM_isotropic)
    assert witness.verify()


def test_bm_no_wall():
    # <4> + <-6>: v^2 = 4, z^2 = -6; no root, no isotropic class, no decomposition
    T = IntegerLattice(((4, 0), (0, -6)))
    assert bm_wall_test(T, T.vector((1, 0))) is None


def test_bm_input_errors():
    with pytest.raises(InputError):
        bm_wall_test(IntegerLattice(((2,),)), LatticeVector(IntegerLattice(((2,),)), (1,)))
    T = IntegerLattice(((2, 0), (0, 2)))
    with pytest.raises(InputError):
        bm_wall_test(T, T.vector((1, 0)))
    T = IntegerLattice(((-2, 0), (0, 2)))
    with pytest.raises(InputError):
        bm_wall_test(T, T.vector((1, 0)))


def test_tampered_witness_fails_verification():
    ctx = make_context(3)
    T = hyperbolic_T(ctx, bundle_root(ctx, {"U1": [4, -4], "delta": -1}, 4))
    witness = bm_wall_test(T.lattice, T.v_in_T)
    forged = type(witness)(witness.condition, witness.lattice, witness.vectors, (-2, 2), witness.v)
    assert not forged.verify()


def test_detect_wall_prefers_markman():
    ctx = make_context(3)
    assert detect_wall(ctx, ctx.delta).condition is WitnessCondition.MK_isotropic
    D = ctx.ln_vector({"U1": [4, -4], "delta": -1})
    assert detect_wall(ctx, D).condition is WitnessCondition.BM_bounded_root


@pytest.mark.parametrize(
    "n, r2, ok",
    [
        (3, Fraction(-3), True),
        (4, Fraction(-7, 2), True),
        (2, Fraction(-3), False),
        (2, Fraction(-5, 2), True),
        (5, Fraction(-9, 2), False),
    ],
)
def test_ht_bound(n, r2, ok):
    assert ht_bound_ok(n, r2) is ok


@pytest.mark.parametrize(
    "n, square, m, exists",
    [
        (3, -12, 2, True),
        (3, -8, 2, False),
        (4, -78, 6, True),
        (3, -36, 4, True),
        (3, -4, 3, False),
        (2, -2, 2, True),
    ],
)
def test_wall_type_exists(n, square, m, exists):
    ctx = make_context(n)
    D = wall_type_exists(ctx, square, m)
    assert (D is not None) is exists
    if D is not None:
        assert inner(ctx.Ln, D, D) == square
        assert divisibility(ctx.Ln, D) == m
        assert is_primitive(ctx.Ln, D)


def test_wall_type_exists_input_errors():
    ctx = make_context(3)
    with pytest.raises(InputError):
        wall_type_exists(ctx, -3, 1)
    with pytest.raises(InputError):
        wall_type_exists(ctx, 2, 1)
    with pytest.raises(InputError):
        wall_type_exists(ctx, -2, 0)


def test_table_n3():
    ctx = make_context(3)
    assert rows(enumerate_wall_types(ctx)) == {
        (Fraction(-3), -12, 2),
        (Fraction(-9, 4), -36, 4),
        (Fraction(-2), -2, 1),
        (Fraction(-1, 4), -4, 4),
        (Fraction(-1), -4, 2),
    }


def test_table_n4():
    ctx = make_context(4)
    table = rows(enumerate_wall_types(ctx))
    assert len(table) == 7
    assert (Fraction(-7, 2), -14, 2) in table
    assert (Fraction(-13, 6), -78, 6) in table
    assert {(s, m) for _, s, m in table} == {(-14, 2), (-24, 3), (-78, 6), (-2, 1), (-6, 3), (-6, 6), (-6, 2)}


def test_table_n2():
    ctx = make_context(2)
    types = enumerate_wall_types(ctx)
    assert {(t.square, t.div) for t in types} == {(-2, 1), (-2, 2), (-10, 2)}
    assert {t.square for t in types} == {-2, -10}


def test_table_sorted_and_witnessed():
    for n in (2, 3, 4, 5):
        ctx = make_context(n)
        types = enumerate_wall_types(ctx)
        assert types == sorted(types, key=lambda t: (t.div, -t.square))
        for t in types:
            assert inner(ctx.Ln, t.witness, t.witness) == t.square
            assert ht_bound_ok(n, t.ray_square)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_candidates_are_confirmed_up_to_four(n):
    ctx = make_context(n)
    assert confirmed_wall_types(ctx) == enumerate_wall_types(ctx)


def test_candidate_list_is_a_superset_at_five():
    ctx = make_context(5)
    candidates = enumerate_wall_types(ctx)
    confirmed = confirmed_wall_types(ctx)
    assert len(candidates) == 10
    assert WallType(-4, 1) in candidates
    assert WallType(-4, 1) not in confirmed
    assert set(confirmed) < set(candidates)
    assert candidate_caveat(5) is not None
    assert candidate_caveat(4) is None


def test_congruences_for_n3():
    # div 2: D^2 = -4 mod 8, div 4: D^2 = -4 mod 32, over 500 random primitive vectors of each kind
    ctx = make_context(3)
    L = ctx.Ln
    rng = random.Random(2024)
    checked = {2: 0, 4: 0}
    violations = 0
    while min(checked.values()) < 500:
        m = 2 if checked[2] <= checked[4] else 4
        y = [rng.randint(-10, 10) for _ in range(22)]
        c = rng.choice([-3, -1, 1, 3])
        D = [m * a for a in y] + [c]
        if not is_primitive(L, D) or divisibility(L, D) != m:
            continue
        checked[m] += 1
        square = inner(L, D, D)
        if (m == 2 and square % 8 != 4) or (m == 4 and square % 32 != 28):
            violations += 1
    assert violations == 0


@pytest.fixture
def cell_cap(monkeypatch):
    def apply(value):
        monkeypatch.setenv("WALLKIT_MAX_CELLS", str(value))
        get_settings.cache_clear()

    yield apply
    get_settings.cache_clear()


def test_wall_type_enumeration_respects_cell_cap(cell_cap):
    cell_cap(100)
    # n=2 needs 14 cells, n=3 needs 116
    assert len(enumerate_wall_types(make_context(2))) == 3
    with pytest.raises(EnumerationLimitError) as info:
        enumerate_wall_types(make_context(3))
    assert info.value.limit == 100
    cell_cap(3)
    with pytest.raises(EnumerationLimitError):
        wall_type_exists(make_context(3), -36, 4)
    assert wall_type_exists(make_context(3), -12, 2) is not None


def expected_types(n):
    """(square, div) pairs from the residue congruence, over a full period of c mod 2 m^2."""
    e = 2 * n - 2
    expected = set()
    for m in range(1, e + 1):
        if e % m:
            continue
        modulus = 2 * m * m
        residues = {(-c * c * e) % modulus for c in range(modulus) if math.gcd(c, m) == 1}
        square = -2
        while 2 * square >= -(n + 3) * m * m:
            if square % modulus in residues:
                expected.add((square, m))
            square -= 2
    return expected


@pytest.mark.slow
@pytest.mark.parametrize("n", range(2, 31))
def test_enumerated_types_match_congruences(n):
    ctx = make_context(n)
    types = enumerate_wall_types(ctx)
    assert {(t.square, t.div) for t in types} == expected_types(n)
    assert len(types) == len({(t.square, t.div) for t in types})
    for t in types:
        assert (2 * n - 2) % t.div == 0
        assert inner(ctx.Ln, t.witness, t.witness) == t.square
        assert divisibility(ctx.Ln, t.witness) == t.div
        assert is_primitive(ctx.Ln, t.witness)
        assert ht_bound_ok(n, t.ray_square)


def test_eichler_invariants_delta():
    ctx = make_context(4)
    inv = eichler_invariants(ctx.Ln, ctx.delta)
    assert (inv.square, inv.div) == (-6, 6)
    assert inv.disc.order == 6


def test_eichler_invariants_unimodular_part():
    ctx = make_context(3)
    inv = eichler_invariants(ctx.Ln, ctx.Ln.basis_vector(0))
    assert (inv.square, inv.div) == (0, 1)
    assert inv.disc.is_trivial
    inv = eichler_invariants(ctx.Ln, ctx.Ln.basis_vector(6))
    assert (inv.square, inv.div) == (-2, 1)
    with pytest.raises(InputError):
        eichler_invariants(ctx.Ln, ctx.delta * 2)


def test_same_orbit_examples():
    ctx = make_context(3)
    L = ctx.Ln
    root = ctx.ln_vector({"U1": [1, -1]})
    assert same_orbit(L, root, -root)
    assert not same_orbit(L, ctx.delta, root)
    image = eichler_transvection(L, L.basis_vector(0), ctx.ln_vector({"U2": [1, 1], "delta": 1}), ctx.delta)
    assert image != ctx.delta
    assert same_orbit(L, ctx.delta, image)


def test_same_orbit_needs_two_hyperbolic_planes():
    L = IntegerLattice(((0, 1), (1, 0)))
    assert not has_two_hyperbolic_planes(L)
    with pytest.raises(HypothesisError):
        same_orbit(L, (1, 0), (0, 1))
    assert same_orbit(L, (1, 0), (0, 1), assume_eichler=True)


def test_eichler_transvection_is_isometry():
    ctx = make_context(2)
    L = ctx.Ln
    e = L.basis_vector(0)
    a = ctx.ln_vector({"U2": [2, -1], "delta": 3})
    x = ctx.ln_vector({"U1": [1, 4], "U3": [2, 1], "delta": -1})
    y = ctx.ln_vector({"U1": [0, 1], "E8a": [1, 0, 0, 0, 0, 0, 0, 0]})
    gx = eichler_transvection(L, e, a, x)
    gy = eichler_transvection(L, e, a, y)
    assert inner(L, gx, gy) == inner(L, x, y)
    assert inner(L, gx, gx) == inner(L, x, x)


def test_eichler_transvection_preconditions():
    ctx = make_context(2)
    L = ctx.Ln
    with pytest.raises(InputError):
        eichler_transvection(L, ctx.delta, L.basis_vector(2), ctx.delta)
    with pytest.raises(InputError):
        eichler_transvection(L, L.basis_vector(0), L.basis_vector(1), ctx.delta)


@pytest.mark.parametrize("n", [2, 3, 5])
def test_random_transvections_preserve_invariants(n):
    ctx = make_context(n)
    L = ctx.Ln
    rng = random.Random(n)
    samples = [ctx.delta]
    while len(samples) < 200:
        coords = [rng.randint(-3, 3) for _ in range(L.rank)]
        if any(coords) and is_primitive(L, coords):
            samples.append(L.vector(coords))
    e = L.basis_vector(0)
    for x in samples:
        a = [rng.randint(-2, 2) for _ in range(L.rank)]
        a[1] = 0
        y = eichler_transvection(L, e, L.vector(a), x)
        assert eichler_invariants(L, y) == eichler_invariants(L, x)
        assert same_orbit(L, x, y) and same_orbit(L, y, x)
    first, second = samples[1], samples[2]
    if same_orbit(L, first, second):
        third = eichler_transvection(L, e, L.basis_vector(4), second)
        assert same_orbit(L, first, third)


def test_dual_ray():
    ctx = make_context(3)
    assert dual_ray(ctx.Ln, ctx.delta)[22] == Fraction(1, 4)
    root = ctx.ln_vector({"U1": [1, -1]})
    assert dual_ray(ctx.Ln, root) == tuple(Fraction(c) for c in root.coords)
    ctx2 = make_context(2)
    D = ctx2.ln_vector({"U1": [2, 2], "delta": -3})
    ray = dual_ray(ctx2.Ln, D)
    assert inner(ctx2.Ln, ray, ray) == Fraction(-5, 2)
