import random
from fractions import Fraction

from hypothesis import given, settings, strategies as st

from reebcz.arith import parse, sqrt
from reebcz.datasets import EllipsoidSpec, ellipsoid_system
from reebcz.homology import (
    GradedGeneratorTable,
    Infeasible,
    MatchingCertificate,
    complete_window,
    generator_table,
    homology_of_certificate,
    morse_feasibility,
    synthetic_table,
    target_betti,
)
from reebcz.index import OrbitSystem, make_orbit

from oracles import exhaustive_feasible, random_rows


def _rows(spec):
    return {d: [(f"g{d}_{i}", Fraction(a)) for i, a in enumerate(acts)] for d, acts in spec.items()}


def test_target_betti():
    assert [target_betti(2, d) for d in range(0, 8)] == [0, 0, 0, 1, 0, 1, 0, 1]
    assert [target_betti(3, d) for d in range(2, 8)] == [0, 0, 1, 0, 1, 0]


def test_round_sphere_pattern_is_feasible_without_pairs():
    t = synthetic_table(2, _rows({3: [1], 5: [2], 7: [3]}))
    cert = morse_feasibility(t)
    assert isinstance(cert, MatchingCertificate)
    assert cert.pairs == () and homology_of_certificate(cert) == {3: 1, 5: 1, 7: 1}


def test_surplus_without_partner_is_infeasible():
    res = morse_feasibility(synthetic_table(2, _rows({3: [1, 2], 5: [2]})))
    assert isinstance(res, Infeasible) and not res
    assert res.witness_degree == 4


def test_action_decreasing_pair_cancels():
    cert = morse_feasibility(synthetic_table(2, _rows({3: [1, 2], 4: [3], 5: [2]})))
    assert len(cert.pairs) == 1
    src, tgt = cert.pairs[0]
    assert (src.index, tgt.index) == (4, 3)
    assert homology_of_certificate(cert) == {3: 1, 5: 1}


def test_tie_forbids_pairing():
    res = morse_feasibility(synthetic_table(2, _rows({3: [2, 2], 4: [2], 5: [3]})))
    assert isinstance(res, Infeasible) and res.witness_degree == 3


def test_source_below_targets_is_infeasible():
    res = morse_feasibility(synthetic_table(2, _rows({3: [2, 3], 4: [1], 5: [3]})))
    assert isinstance(res, Infeasible) and res.witness_degree == 3


def test_parity_wrong_degree_is_infeasible():
    res = morse_feasibility(synthetic_table(3, _rows({4: [1], 5: [2]})))
    assert isinstance(res, Infeasible) and res.witness_degree == 4


def test_ellipsoid_table_and_certificate():
    system = ellipsoid_system(EllipsoidSpec.from_radii([1, sqrt(2)]))
    table = generator_table(system, parse("(* 5 (sqrt 2))"))
    assert table.window == (-1, 22)
    assert all(table.count(d) == target_betti(2, d) for d in range(-1, 23))
    cert = morse_feasibility(table)
    assert cert.pairs == ()
    assert homology_of_certificate(cert) == {d: 1 for d in range(3, 22, 2)}
    small = generator_table(system, parse("(* 2 (sqrt 2))"))
    assert small.window is not None and small.window[1] >= 6
    assert homology_of_certificate(morse_feasibility(small)) == {
        d: 1 for d in range(3, small.window[1] + 1) if d % 2
    }


def test_empty_system_has_no_window():
    empty = OrbitSystem(2, ())
    assert complete_window(empty, 5) is None
    table = generator_table(empty, 5)
    assert table.window is None and morse_feasibility(table).window is None


def test_window_closes_with_negative_mean():
    system = OrbitSystem(2, (make_orbit("a", 2, 1, -4, [sqrt(2) - 1]),))
    assert complete_window(system, 10) is None


def test_json_round_trip():
    system = ellipsoid_system(EllipsoidSpec.from_radii([1, sqrt(3)]))
    table = generator_table(system, 6)
    data = table.to_json()
    again = GradedGeneratorTable.from_json(data)
    assert again.to_json() == data
    assert morse_feasibility(again).to_json() == morse_feasibility(table).to_json()


def test_agrees_with_exhaustive_search():
    rng = random.Random(11)
    feasible = 0
    for _ in range(150):
        n = rng.randint(2, 3)
        rows, window = random_rows(rng, n, max_gens=9)
        labelled = {d: [(f"x{d}_{i}", a) for i, a in enumerate(acts)] for d, acts in rows.items()}
        table = synthetic_table(n, labelled, window=window)
        expect = exhaustive_feasible(n, rows, window)
        got = morse_feasibility(table)
        assert bool(got) == expect, rows
        feasible += expect
    assert feasible > 10


@settings(max_examples=60)
@given(
    st.integers(min_value=2, max_value=4),
    st.lists(st.integers(min_value=1, max_value=40), min_size=1, max_size=6),
    st.integers(min_value=1, max_value=20),
)
def test_adding_a_cancelling_pair_keeps_feasibility(n, actions, d_off):
    rows = {n + 1 + 2 * k: [(f"s{k}", a)] for k, a in enumerate(actions)}
    base = synthetic_table(n, rows)
    assert morse_feasibility(base)
    top = max(rows)
    d = n + d_off % (top - n + 1)
    extra = {k: list(v) for k, v in rows.items()}
    extra.setdefault(d + 1, []).append(("hi", 1000))
    extra.setdefault(d, []).insert(0, ("lo", Fraction(1, 1000)))
    table = synthetic_table(n, extra, window=(1 - n, top))
    assert morse_feasibility(table)
