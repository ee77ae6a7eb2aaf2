import math
import random
from fractions import Fraction

import mpmath
import pytest

from reebcz.arith import const, sqrt
from reebcz.cij import (
    CIJEntry,
    CIJInstance,
    CIJSolution,
    SearchExhausted,
    choose_epsilon,
    find_common_jump,
    rescan_minimal,
    verify_solution,
)
from reebcz.index import OrbitSystem, PreconditionError, iterate_index, make_orbit


def brute_force_jump(mean, rotations, eps, bound=10**4):
    """Independent 128-bit scan for the single-orbit case."""
    with mpmath.workprec(128):
        v = [1 / mean] + [t / mean for t in rotations]
        for k in range(1, bound):
            if all(abs(k * c - mpmath.nint(k * c)) < eps for c in v):
                frac = k / mean - mpmath.floor(k / mean)
                eta = 1 if frac < eps else -1
                m = int(mpmath.floor(k / mean)) if eta == 1 else int(mpmath.ceil(k / mean))
                return k, m, eta
    return None


def test_epsilon_examples(jump_system):
    assert choose_epsilon(jump_system, 1).exact() == Fraction(1, 48)
    even = OrbitSystem(1, (make_orbit("b", 1, 1, 2),))
    assert choose_epsilon(even, 1).exact() == Fraction(1, 16)


def test_epsilon_union_of_lists(jump_orbit):
    other = make_orbit("c", 2, 1, 8)
    both = OrbitSystem(2, (jump_orbit, other))
    # 1/mean of c = 1/8 < 1/6: eps = 1/64
    assert choose_epsilon(both, 1).exact() == Fraction(1, 64)


def test_single_orbit_jump(jump_system):
    sol = find_common_jump(CIJInstance(jump_system, 1))
    assert (sol.N, sol.entries) == (41, (CIJEntry("a", 17, -1),))
    with mpmath.workprec(128):
        s2 = mpmath.sqrt(2)
        assert brute_force_jump(1 + s2, [1 / s2], mpmath.mpf(1) / 48) == (41, 17, -1)
    o = jump_system.orbits[0]
    assert [iterate_index(o, ell) for ell in (1, 33, 34, 35)] == [2, 80, 83, 84]
    report = verify_solution(jump_system, sol)
    assert report.ok and len(report.checks) == 4
    assert rescan_minimal(CIJInstance(jump_system, 1), sol)


def test_even_integer_mean():
    system = OrbitSystem(1, (make_orbit("b", 1, 1, 2),))
    sol = find_common_jump(CIJInstance(system, 1))
    assert (sol.N, sol.entries[0].m, sol.entries[0].eta) == (2, 1, 1)
    assert [iterate_index(system.orbits[0], ell) for ell in (1, 3)] == [2, 6]


def test_duplicate_orbits_share_the_jump(jump_orbit):
    twin = make_orbit("b", 2, 1, 1, jump_orbit.thetas, strict=False)
    sol = find_common_jump(CIJInstance(OrbitSystem(2, (jump_orbit, twin)), 1))
    assert sol.N == 41 and sol.entry("a").m == sol.entry("b").m == 17


def test_perturbed_solution_fails(jump_system):
    sol = CIJSolution(41, (CIJEntry("a", 16, -1),), const(Fraction(1, 48)), 1)
    report = verify_solution(jump_system, sol)
    assert not report.ok
    assert any("mu(a^31)" in c.description for c in report.failures())


def test_zero_horizon_checks_window_only(jump_system):
    sol = CIJSolution(41, (CIJEntry("a", 17, -1),), const(Fraction(1, 48)), 0)
    report = verify_solution(jump_system, sol)
    assert report.ok and len(report.checks) == 1


def test_json_round_trip(jump_system):
    sol = find_common_jump(CIJInstance(jump_system, 1))
    data = sol.to_json()
    assert data == {"N": 41, "entries": [{"label": "a", "m": 17, "eta": -1}], "epsilon": "(/ 1 48)", "M": 1}
    assert CIJSolution.from_json(data).to_json() == data


def test_search_exhausted(jump_system):
    with pytest.raises(SearchExhausted) as info:
        find_common_jump(CIJInstance(jump_system, 1, search_bound=40))
    assert info.value.bound == 40


def test_preconditions():
    neg = OrbitSystem(2, (make_orbit("n", 2, 1, -4, [sqrt(2) - 1]),))
    with pytest.raises(PreconditionError):
        CIJInstance(neg, 1)
    with pytest.raises(ValueError):
        CIJInstance(OrbitSystem(2, ()), 1)


def test_workers_do_not_change_the_answer():
    system = OrbitSystem(
        2,
        (make_orbit("a", 2, 1, 2, [1 / sqrt(2)]), make_orbit("b", 2, 2, 3, [sqrt(5) - 2], strict=False)),
    )
    one = find_common_jump(CIJInstance(system, 1))
    three = find_common_jump(CIJInstance(system, 1), workers=3)
    assert one.to_json() == three.to_json()


def test_rational_mean_matches_direct_scan():
    # q = 0 and mean a/b: N is the smallest k with frac(k b / a) near 0 or 1
    for p in (3, 5, 6, 7):
        system = OrbitSystem(2, (make_orbit("r", 2, 1, p),))
        sol = find_common_jump(CIJInstance(system, 1))
        eps = Fraction(1, 8 * p)
        direct = next(
            k for k in range(1, 1000)
            if min(Fraction(k, p) % 1, 1 - Fraction(k, p) % 1) < eps and 2 * math.floor(Fraction(k, p) + Fraction(1, 2)) - 1 >= 1
        )
        assert sol.N == direct == p


def test_random_feasible_instances_verify():
    rng = random.Random(3)
    for _ in range(25):
        n = rng.randint(2, 3)
        orbits = []
        for i in range(rng.randint(1, 2)):
            q = rng.randint(0, n - 1)
            p = rng.randint(1, 5)
            if q == n - 1 and p % 2:
                p += 1
            thetas = []
            for _ in range(q):
                a = rng.choice([2, 3, 5, 6, 7, 10, 11])
                b = rng.randint(2, 7)
                x = sqrt(a) / b
                thetas.append(x - math.floor(float(x)))
            orbits.append(make_orbit(f"o{i}", n, 1, p, thetas))
        system = OrbitSystem(n, tuple(orbits))
        sol = find_common_jump(CIJInstance(system, 1, search_bound=10**7))
        assert verify_solution(system, sol).ok
