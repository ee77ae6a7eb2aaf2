"""Common index jump: simultaneous recurrence on a torus.

For orbits with positive mean indices ``mh_i`` and rotation numbers
``theta_ij`` put ``v = (1/mh_i, theta_ij/mh_i)``.  An integer ``N`` such that
every component of ``N*v`` is within ``eps`` of an integer gives iterates
``m_i = eta_i * floor(eta_i * N / mh_i)`` whose indices jump together:

    mu(g_i^(2m_i - m)) = 2N - mu(g_i^m)
    mu(g_i^(2m_i + m)) = 2N + mu(g_i^m)        (1 <= m <= M)
    2N - (n-1) <= mu(g_i^(2m_i)) <= 2N + (n-1)

Such ``N`` exist by recurrence but no bound is known, so the search is a
bounded scan.  A float prefilter with a rigorous error margin discards
almost every multiplier; survivors are decided with certified arithmetic.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .arith import (
    DEFAULT_BITS,
    AmbiguousFloor,
    NumberExpr,
    Ordering,
    as_expr,
    compare_certified,
    div,
    floor_multiple,
    frac_certified,
    mul,
    parse,
    sub,
    to_text,
)
from .index import OrbitSystem, PreconditionError, iterate_index, mean_index

DEFAULT_SEARCH_BOUND = 10**6
_CHUNK = 1 << 16


class SearchExhausted(RuntimeError):
    """No admissible N up to the search bound.  Not a refutation."""

    def __init__(self, bound: int, epsilon: NumberExpr):
        self.bound = bound
        self.epsilon = epsilon
        super().__init__(
            f"no common index jump with N <= {bound} at eps = {float(epsilon):.6g}; "
            "a solution exists but lies beyond the search bound"
        )


class VerificationFailure(AssertionError):
    pass


@dataclass(frozen=True)
class CIJInstance:
    system: OrbitSystem
    M: int = 1
    search_bound: int = DEFAULT_SEARCH_BOUND
    budget_bits: int = DEFAULT_BITS

    def __post_init__(self):
        if self.M < 0:
            raise ValueError("M must be nonnegative")
        if self.search_bound < 1:
            raise ValueError("search bound must be positive")
        if len(self.system) == 0:
            raise ValueError("instance needs at least one orbit")
        for o in self.system:
            if compare_certified(mean_index(o), 0, self.budget_bits) is not Ordering.GREATER:
                raise PreconditionError(f"orbit {o.label}: mean index is not certified positive")


@dataclass(frozen=True)
class CIJEntry:
    label: str
    m: int
    eta: int


@dataclass(frozen=True)
class CIJSolution:
    N: int
    entries: tuple[CIJEntry, ...]
    epsilon: NumberExpr
    M: int

    def entry(self, label: str) -> CIJEntry:
        for e in self.entries:
            if e.label == label:
                return e
        raise KeyError(label)

    def to_json(self) -> dict:
        return {
            "N": self.N,
            "entries": [{"label": e.label, "m": e.m, "eta": e.eta} for e in self.entries],
            "epsilon": to_text(self.epsilon),
            "M": self.M,
        }

    @classmethod
    def from_json(cls, data: dict) -> "CIJSolution":
        entries = tuple(CIJEntry(str(e["label"]), int(e["m"]), int(e["eta"])) for e in data["entries"])
        return cls(int(data["N"]), entries, parse(str(data["epsilon"])), int(data["M"]))


def _certified_min(values: list[NumberExpr], budget_bits: int) -> NumberExpr:
    best = values[0]
    for v in values[1:]:
        order = compare_certified(v, best, budget_bits)
        if order is Ordering.UNDECIDABLE:
            raise AmbiguousFloor(sub(v, best), *sub(v, best).enclosure(budget_bits), budget_bits, {"op": "min"})
        if order is Ordering.LESS:
            best = v
    return best


def choose_epsilon(system: OrbitSystem, M: int, budget_bits: int = DEFAULT_BITS) -> NumberExpr:
    """One eighth of the minimum of the recurrence safety list."""
    terms: list[NumberExpr] = []
    for o in system:
        for theta in o.thetas:
            for m in range(1, M + 1):
                f = frac_certified(mul(m, theta), budget_bits, {"orbit": o.label, "m": m})
                terms.append(f)
                terms.append(sub(1, f))
        if o.q:
            terms.append(as_expr(Fraction(1, 6 * o.q)))
        terms.append(div(1, mean_index(o)))
    return div(_certified_min(terms, budget_bits), 8)


def _components(system: OrbitSystem) -> list[NumberExpr]:
    comps = []
    for o in system:
        mh = mean_index(o)
        comps.append(div(1, mh))
        comps.extend(div(t, mh) for t in o.thetas)
    return comps


def _near_integer(c: NumberExpr, k: int, eps: NumberExpr, budget_bits: int) -> bool:
    """Certified ``dist(k*c, Z) < eps``."""
    bits = 64 + k.bit_length()
    lo, hi = c.enclosure(bits)
    elo, ehi = eps.enclosure(bits)
    a, b = k * lo, k * hi
    r = round((a + b) / 2)
    if -elo < a - r and b - r < elo:
        return True
    if a - r >= ehi or b - r <= -ehi:
        return False
    if a - r > Fraction(1, 2) or b - r < -Fraction(1, 2):
        return False
    dev = sub(mul(k, c), r)
    upper = compare_certified(dev, eps, budget_bits)
    lower = compare_certified(dev, sub(0, eps), budget_bits)
    if Ordering.UNDECIDABLE in (upper, lower):
        raise AmbiguousFloor(dev, *dev.enclosure(budget_bits), budget_bits, {"k": k})
    return upper is Ordering.LESS and lower is Ordering.GREATER


def _entries_for(system: OrbitSystem, N: int, eps: NumberExpr, M: int, budget_bits: int):
    entries = []
    for o in system:
        inv = div(1, mean_index(o))
        ctx = {"orbit": o.label, "N": N}
        base = floor_multiple(inv, N, budget_bits, ctx)
        f = sub(mul(N, inv), base)
        eta = 1 if compare_certified(f, eps, budget_bits) is Ordering.LESS else -1
        m = base if eta == 1 else base + 1  # eta * floor(eta * N/mh)
        if 2 * m - M < 1:
            return None
        entries.append(CIJEntry(o.label, m, eta))
    return tuple(entries)


def _scan_chunk(vals: np.ndarray, start: int, stop: int, eps_f: float) -> np.ndarray:
    ks = np.arange(start, stop, dtype=np.float64)
    x = ks[:, None] * vals[None, :]
    dist = np.abs(x - np.rint(x))
    margin = 64 * 2.0**-52 * stop * np.abs(vals).max() + 1e-12
    ok = np.all(dist < eps_f + margin, axis=1)
    return np.nonzero(ok)[0] + start


def find_common_jump(instance: CIJInstance, workers: int = 1) -> CIJSolution:
    system, M, budget = instance.system, instance.M, instance.budget_bits
    eps = choose_epsilon(system, M, budget)
    comps = _components(system)
    vals = np.array([float(c) for c in comps])
    eps_f = float(eps)
    bound = instance.search_bound

    def certified(k: int):
        if all(_near_integer(c, k, eps, budget) for c in comps):
            return _entries_for(system, k, eps, M, budget)
        return None

    def first_in(rng):
        start, stop = rng
        for k in _scan_chunk(vals, start, stop, eps_f):
            entries = certified(int(k))
            if entries is not None:
                return int(k), entries
        return None

    ranges = [(s, min(s + _CHUNK, bound + 1)) for s in range(1, bound + 1, _CHUNK)]
    workers = max(1, int(workers))
    found = None
    if workers == 1:
        for rng in ranges:
            found = first_in(rng)
            if found:
                break
    else:
        with ThreadPoolExecutor(workers) as pool:
            for i in range(0, len(ranges), workers):
                # results come back in range order, so the minimum is deterministic
                for res in pool.map(first_in, ranges[i : i + workers]):
                    if res:
                        found = res
                        break
                if found:
                    break
    if found is None:
        raise SearchExhausted(bound, eps)
    sol = CIJSolution(found[0], found[1], eps, M)
    report = verify_solution(system, sol, budget)
    if not report.ok:
        raise VerificationFailure(f"constructed solution fails its own check: {report.failures()[0]}")
    return sol


@dataclass(frozen=True)
class Check:
    label: str
    description: str
    lhs: int
    rhs: str
    ok: bool

    def __str__(self):
        mark = "ok" if self.ok else "FAIL"
        return f"[{mark}] {self.label}: {self.description}  ({self.lhs} vs {self.rhs})"


@dataclass
class VerifyReport:
    checks: list[Check] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.ok]

    def __bool__(self):
        return self.ok


def verify_solution(system: OrbitSystem, sol: CIJSolution, budget_bits: int = DEFAULT_BITS) -> VerifyReport:
    """Recheck every conclusion from scratch: per orbit three checks for
    each ``1 <= m <= M`` plus the window around ``2N``."""
    report = VerifyReport()
    N, M = sol.N, sol.M
    for o in system:
        e = sol.entry(o.label)
        mu = lambda ell: iterate_index(o, ell, budget_bits)  # noqa: E731
        n1 = o.n - 1
        for m in range(1, M + 1):
            pos = 2 * e.m - m >= 1
            report.checks.append(Check(o.label, f"2m-{m} >= 1", 2 * e.m - m, ">= 1", pos))
            if pos:
                lhs = mu(2 * e.m - m)
                report.checks.append(
                    Check(o.label, f"mu({o.label}^{2 * e.m - m}) = 2N - mu({o.label}^{m})", lhs, str(2 * N - mu(m)), lhs == 2 * N - mu(m))
                )
            else:
                report.checks.append(Check(o.label, f"mu({o.label}^2m-{m}) undefined", 0, "positive iterate", False))
            lhs = mu(2 * e.m + m)
            report.checks.append(
                Check(o.label, f"mu({o.label}^{2 * e.m + m}) = 2N + mu({o.label}^{m})", lhs, str(2 * N + mu(m)), lhs == 2 * N + mu(m))
            )
        if e.m >= 1:
            w = mu(2 * e.m)
            report.checks.append(
                Check(o.label, f"mu({o.label}^{2 * e.m}) in [2N-{n1}, 2N+{n1}]", w, f"[{2 * N - n1}, {2 * N + n1}]",
                      2 * N - n1 <= w <= 2 * N + n1)
            )
        else:
            report.checks.append(Check(o.label, "m >= 1", e.m, ">= 1", False))
    return report


def rescan_minimal(instance: CIJInstance, sol: CIJSolution) -> bool:
    """True when no smaller multiplier passes the fractional-part test."""
    comps = _components(instance.system)
    for k in range(1, sol.N):
        if all(_near_integer(c, k, sol.epsilon, instance.budget_bits) for c in comps):
            if _entries_for(instance.system, k, sol.epsilon, sol.M, instance.budget_bits) is not None:
                return False
    return True
