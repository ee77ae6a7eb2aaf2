"""Iterated Conley-Zehnder indices from a rotation decomposition.

A nondegenerate simple orbit is summarised by ``(p, q, theta_1..theta_q)``
with ``mu(gamma^l) = l*p + 2*sum(floor(l*theta_j)) + q``.  Everything here
is exact: floors go through :mod:`reebcz.arith`.

Evenness is read off ``p``: the parity of ``l*p + q`` is independent of
``l`` exactly when ``p`` is even, which is equivalent to the return map
having a multiple of four real negative eigenvalues.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .arith import (
    DEFAULT_BITS,
    NumberExpr,
    Ordering,
    UndecidableComparison,
    as_expr,
    compare_certified,
    div,
    floor_certified,
    floor_multiple,
    mul,
)


class PreconditionError(ValueError):
    """An operation was called outside its stated hypotheses."""


@dataclass(frozen=True)
class RotationDecomposition:
    p: int
    thetas: tuple[NumberExpr, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "thetas", tuple(as_expr(t) for t in self.thetas))
        for j, t in enumerate(self.thetas):
            if compare_certified(t, 0) is not Ordering.GREATER or compare_certified(t, 1) is not Ordering.LESS:
                raise ValueError(f"theta_{j + 1} = {t} is not certified to lie in (0, 1)")

    @property
    def q(self) -> int:
        return len(self.thetas)


@dataclass(frozen=True)
class SimpleOrbit:
    label: str
    n: int
    action: NumberExpr
    rotation: RotationDecomposition
    # q = n-1 with odd p is not a valid normal form; tests of the index
    # calculus alone may switch the parity rule off.
    strict: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "action", as_expr(self.action))
        if self.n < 1:
            raise ValueError("ambient half-dimension n must be positive")
        q = self.rotation.q
        if q > self.n - 1:
            raise ValueError(f"orbit {self.label}: q = {q} exceeds n - 1 = {self.n - 1}")
        if self.strict and q == self.n - 1 and self.rotation.p % 2:
            raise ValueError(
                f"orbit {self.label}: q = n - 1 requires p even, got p = {self.rotation.p}"
            )
        if compare_certified(self.action, 0) is not Ordering.GREATER:
            raise ValueError(f"orbit {self.label}: action {self.action} is not certified positive")

    @property
    def p(self) -> int:
        return self.rotation.p

    @property
    def q(self) -> int:
        return self.rotation.q

    @property
    def thetas(self) -> tuple[NumberExpr, ...]:
        return self.rotation.thetas


@dataclass(frozen=True)
class OrbitSystem:
    n: int
    orbits: tuple[SimpleOrbit, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "orbits", tuple(self.orbits))
        labels = [o.label for o in self.orbits]
        if len(set(labels)) != len(labels):
            raise ValueError(f"orbit labels are not distinct: {labels}")
        for o in self.orbits:
            if o.n != self.n:
                raise ValueError(f"orbit {o.label} has n = {o.n}, system has n = {self.n}")

    def __len__(self):
        return len(self.orbits)

    def __iter__(self):
        return iter(self.orbits)

    def by_label(self, label: str) -> SimpleOrbit:
        for o in self.orbits:
            if o.label == label:
                return o
        raise KeyError(label)


@dataclass(frozen=True)
class IterateRecord:
    label: str
    iterate: int
    index: int
    good: bool
    action: NumberExpr = field(compare=False)

    def __str__(self):
        return f"{self.label}^{self.iterate}"


def make_orbit(label, n, action, p, thetas=(), strict=True) -> SimpleOrbit:
    """Shorthand used throughout the tests and the dataset loader."""
    return SimpleOrbit(label, n, as_expr(action), RotationDecomposition(p, tuple(thetas)), strict)


# -- indices -----------------------------------------------------------------


def iterate_index(orbit: SimpleOrbit, ell: int, budget_bits: int = DEFAULT_BITS) -> int:
    if ell < 1:
        raise ValueError(f"iterate must be a positive integer, got {ell}")
    total = ell * orbit.p + orbit.q
    for j, theta in enumerate(orbit.thetas, start=1):
        ctx = {"orbit": orbit.label, "j": j, "l": ell}
        total += 2 * floor_multiple(theta, ell, budget_bits, ctx)
    return total


def mean_index(orbit: SimpleOrbit) -> NumberExpr:
    total = as_expr(orbit.p)
    for theta in orbit.thetas:
        total = total + 2 * theta
    return total


def is_good(orbit: SimpleOrbit, ell: int, budget_bits: int = DEFAULT_BITS) -> bool:
    return (iterate_index(orbit, ell, budget_bits) - iterate_index(orbit, 1, budget_bits)) % 2 == 0


def is_even_orbit(orbit: SimpleOrbit) -> bool:
    return orbit.p % 2 == 0


def iterate_record(orbit: SimpleOrbit, ell: int, budget_bits: int = DEFAULT_BITS) -> IterateRecord:
    mu = iterate_index(orbit, ell, budget_bits)
    good = (mu - (orbit.p + orbit.q)) % 2 == 0
    return IterateRecord(orbit.label, ell, mu, good, mul(ell, orbit.action))


# -- structural checks -------------------------------------------------------


@dataclass
class DeviationReport:
    ok: bool
    checked: int
    violation: tuple[int, int] | None = None  # (iterate, claimed index)

    def __bool__(self):
        return self.ok


def deviation_check(
    orbit: SimpleOrbit,
    ell_max: int,
    claimed: Mapping[int, int] | None = None,
    budget_bits: int = DEFAULT_BITS,
) -> DeviationReport:
    """Certify ``|mu(gamma^l) - l*mean| < n - 1`` for ``l <= ell_max``.

    ``claimed`` overrides computed indices for selected iterates, which is
    how a tampered or externally supplied record is audited.
    """
    if ell_max < 1:
        raise ValueError("ell_max must be positive")
    claimed = dict(claimed or {})
    mean = mean_index(orbit)
    bound = orbit.n - 1
    lo, hi = mean.enclosure(64 + ell_max.bit_length())
    for ell in range(1, ell_max + 1):
        mu = claimed[ell] if ell in claimed else iterate_index(orbit, ell, budget_bits)
        dlo, dhi = mu - ell * hi, mu - ell * lo
        if -bound < dlo and dhi < bound:
            continue
        if dhi <= -bound or dlo >= bound:
            return DeviationReport(False, ell, (ell, mu))
        # enclosure too coarse for this iterate; decide with full refinement
        dev = as_expr(mu) - mul(ell, mean)
        upper = compare_certified(dev, bound, budget_bits)
        lower = compare_certified(dev, -bound, budget_bits)
        if upper is Ordering.LESS and lower is Ordering.GREATER:
            continue
        if upper is Ordering.UNDECIDABLE or lower is Ordering.UNDECIDABLE:
            raise UndecidableComparison(f"deviation of {orbit.label}^{ell} undecidable at {budget_bits} bits")
        return DeviationReport(False, ell, (ell, mu))
    return DeviationReport(True, ell_max)


@dataclass
class MonotonicityReport:
    ok: bool
    c: int
    checked: int
    violation: tuple[int, int, int] | None = None  # (l, mu(l), mu(l+1))
    min_gap: int | None = None

    def __bool__(self):
        return self.ok


def monotonicity_check(orbit: SimpleOrbit, c: int, ell_max: int, budget_bits: int = DEFAULT_BITS) -> MonotonicityReport:
    """Check ``mu(gamma^(l+1)) >= mu(gamma^l) + c`` for ``l < ell_max``.

    Only meaningful under the hypothesis ``mu(gamma) >= n - 1 + c``; calling
    it otherwise raises :class:`PreconditionError`.
    """
    if c < 0:
        raise ValueError("c must be nonnegative")
    mu1 = iterate_index(orbit, 1, budget_bits)
    if mu1 < orbit.n - 1 + c:
        raise PreconditionError(
            f"orbit {orbit.label}: mu = {mu1} < n - 1 + c = {orbit.n - 1 + c}; monotonicity grade {c} not implied"
        )
    prev = mu1
    min_gap = None
    for ell in range(1, ell_max):
        nxt = iterate_index(orbit, ell + 1, budget_bits)
        gap = nxt - prev
        min_gap = gap if min_gap is None else min(min_gap, gap)
        if gap < c:
            return MonotonicityReport(False, c, ell, (ell, prev, nxt), min_gap)
        prev = nxt
    return MonotonicityReport(True, c, max(ell_max - 1, 0), None, min_gap)


def _cmp_records(a: IterateRecord, b: IterateRecord) -> int:
    if a.index != b.index:
        return -1 if a.index < b.index else 1
    order = compare_certified(a.action, b.action)
    if order is Ordering.LESS:
        return -1
    if order is Ordering.GREATER:
        return 1
    ka, kb = (a.label, a.iterate), (b.label, b.iterate)
    return (ka > kb) - (ka < kb)


def sort_records(records: Sequence[IterateRecord]) -> list[IterateRecord]:
    return sorted(records, key=functools.cmp_to_key(_cmp_records))


def max_iterate_within(action: NumberExpr, cap: NumberExpr, budget_bits: int = DEFAULT_BITS) -> int:
    """Largest ``l`` with ``l * action <= cap`` (zero if none)."""
    return max(floor_certified(div(cap, action), budget_bits, {"cap": str(cap)}), 0)


def index_spectrum(system: OrbitSystem, action_cap, budget_bits: int = DEFAULT_BITS) -> list[IterateRecord]:
    """All iterates with action at most ``action_cap``, sorted by (index, action)."""
    cap = as_expr(action_cap)
    if compare_certified(cap, 0) is not Ordering.GREATER:
        raise ValueError("action cap must be positive")
    records = []
    for orbit in system.orbits:
        top = max_iterate_within(orbit.action, cap, budget_bits)
        for ell in range(1, top + 1):
            records.append(iterate_record(orbit, ell, budget_bits))
    return sort_records(records)
