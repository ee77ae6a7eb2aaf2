"""Dataset audits: can a given orbit list be the complete set of simple Reeb
orbits of a nondegenerate starshaped hypersurface?

A ``Violation`` verdict always carries a degree whose generator count is
impossible, recomputable from scratch.  ``Inconclusive`` means the bounded
searches or the action window were too small to decide.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .arith import (
    DEFAULT_BITS,
    NumberExpr,
    Ordering,
    as_expr,
    compare_certified,
    div,
    floor_certified,
    mul,
    sub,
    to_text,
)
from .cij import CIJInstance, SearchExhausted, find_common_jump, DEFAULT_SEARCH_BOUND
from .homology import generator_table, target_betti
from .index import (
    OrbitSystem,
    PreconditionError,
    is_even_orbit,
    iterate_index,
    mean_index,
    monotonicity_check,
)


class Verdict(enum.Enum):
    CONSISTENT = "Consistent"
    VIOLATION = "Violation"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class Finding:
    check: str
    subjects: tuple[str, ...]
    passed: bool
    explanation: str
    degree: int | None = None

    def to_json(self) -> dict:
        return {
            "check": self.check,
            "subjects": list(self.subjects),
            "passed": self.passed,
            "explanation": self.explanation,
            "degree": self.degree,
        }


@dataclass
class AuditReport:
    check: str
    verdict: Verdict
    findings: list[Finding] = field(default_factory=list)
    summary: str = ""
    witness_degree: int | None = None
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "check": self.check,
            "verdict": self.verdict.value,
            "summary": self.summary,
            "witness_degree": self.witness_degree,
            "findings": [f.to_json() for f in self.findings],
            "details": self.details,
        }

    def format(self) -> str:
        lines = [f"{self.check}: {self.verdict.value}" + (f" ({self.summary})" if self.summary else "")]
        if self.witness_degree is not None:
            lines.append(f"witness degree: {self.witness_degree}")
        for f in self.findings:
            mark = "ok" if f.passed else "FAIL"
            where = f" [degree {f.degree}]" if f.degree is not None else ""
            lines.append(f"  [{mark}] {f.check}{where}: {f.explanation}")
        return "\n".join(lines)


# -- dynamical convexity -------------------------------------------------------


def check_dynamical_convexity(system: OrbitSystem, budget_bits: int = DEFAULT_BITS, spot_iterates: int = 50) -> bool:
    """All simple orbits have index at least ``n + 1``.

    That suffices: grade-2 monotonicity then keeps every iterate above
    ``n + 1``.  The implication is spot-checked on the first iterates.
    """
    n = system.n
    for o in system:
        if iterate_index(o, 1, budget_bits) < n + 1:
            return False
    for o in system:
        report = monotonicity_check(o, 2, spot_iterates, budget_bits)
        if not report.ok:
            raise AssertionError(f"orbit {o.label}: grade-2 monotonicity fails at iterate {report.violation[0]}")
    return True


def convexity_report(system: OrbitSystem, budget_bits: int = DEFAULT_BITS) -> AuditReport:
    findings = []
    for o in system:
        mu = iterate_index(o, 1, budget_bits)
        ok = mu >= system.n + 1
        findings.append(Finding("index >= n+1", (o.label,), ok, f"mu({o.label}) = {mu}, n+1 = {system.n + 1}", mu))
    ok = check_dynamical_convexity(system, budget_bits)
    verdict = Verdict.CONSISTENT if ok else Verdict.VIOLATION
    witness = None if ok else min(f.degree for f in findings if not f.passed)
    return AuditReport("convexity", verdict, findings, "dynamically convex" if ok else "not dynamically convex", witness)


# -- multiplicity ----------------------------------------------------------------


def _iterates_near(orbit, lo_excl: int, hi_excl: int, budget_bits: int) -> list[tuple[int, int]]:
    """Iterates ``(l, mu)`` with ``lo_excl < mu < hi_excl``, found through the
    deviation bound ``|mu(l) - l*mean| < n - 1``."""
    mean = float(mean_index(orbit))
    slack = orbit.n - 1
    first = max(1, math.floor((lo_excl - slack) / mean) - 2)
    last = math.ceil((hi_excl + slack) / mean) + 2
    out = []
    for ell in range(first, last + 1):
        mu = iterate_index(orbit, ell, budget_bits)
        if lo_excl < mu < hi_excl:
            out.append((ell, mu))
    return out


def multiplicity_audit(
    system: OrbitSystem,
    threshold: int | None = None,
    search_bound: int = DEFAULT_SEARCH_BOUND,
    budget_bits: int = DEFAULT_BITS,
    workers: int = 1,
) -> AuditReport:
    """Common-index-jump window count.

    With ``threshold = n + 1`` every simple orbit in the ``n + 1`` parity class
    must have index at least ``n + 1``; the window ``]2N - n - 1, 2N + n + 1[``
    then needs good generators in the ``n`` degrees ``2N - n + 1 + 2j``.  With
    ``threshold = n - 1`` all orbits must have index at least ``n - 1`` and
    the ``n - 2`` degrees strictly inside ``]2N - n + 1, 2N + n - 1[`` are
    required.  Only orbits in the ``n + 1`` parity class can fill them.
    """
    n = system.n
    threshold = n + 1 if threshold is None else threshold
    if threshold not in (n + 1, n - 1):
        raise ValueError(f"threshold must be n+1 = {n + 1} or n-1 = {n - 1}")
    check = f"multiplicity(threshold={threshold})"
    fillers = []
    for o in system:
        mu = iterate_index(o, 1, budget_bits)
        in_class = (mu - n - 1) % 2 == 0
        if threshold == n - 1 and mu < n - 1:
            raise PreconditionError(f"orbit {o.label}: mu = {mu} < n - 1")
        if in_class:
            if threshold == n + 1 and mu < n + 1:
                raise PreconditionError(f"orbit {o.label}: mu = {mu} < n + 1 in the n+1 parity class")
            fillers.append(o)
    for o in fillers:
        if compare_certified(mean_index(o), 0, budget_bits) is not Ordering.GREATER:
            raise PreconditionError(f"orbit {o.label}: mean index is not positive")

    if threshold == n + 1:
        required_count, lo_off = n, -n + 1
    else:
        required_count, lo_off = n - 2, -n + 3

    if not fillers:
        if required_count == 0:
            return AuditReport(check, Verdict.CONSISTENT, [], "no degrees required")
        first = n + 1
        f = Finding("window fill", (), False, "no orbit in the n+1 parity class; nothing can generate degree n+1", first)
        return AuditReport(check, Verdict.VIOLATION, [f], "no admissible orbits", first)

    sub_system = OrbitSystem(n, tuple(fillers))
    try:
        sol = find_common_jump(CIJInstance(sub_system, 1, search_bound, budget_bits), workers=workers)
    except SearchExhausted as exc:
        return AuditReport(check, Verdict.INCONCLUSIVE, [], str(exc))
    N = sol.N
    required = [2 * N + lo_off + 2 * j for j in range(required_count)]
    lo_excl, hi_excl = 2 * N - threshold, 2 * N + threshold
    filled: dict[int, list[str]] = {}
    for o in fillers:
        mu1 = iterate_index(o, 1, budget_bits)
        for ell, mu in _iterates_near(o, lo_excl, hi_excl, budget_bits):
            if (mu - mu1) % 2 == 0:
                filled.setdefault(mu, []).append(f"{o.label}^{ell}")
    findings = []
    witness = None
    for d in required:
        gens = filled.get(d, [])
        ok = bool(gens)
        findings.append(
            Finding("window fill", tuple(gens), ok, f"good generators at {d}: {', '.join(gens) or 'none'}", d)
        )
        if not ok and witness is None:
            witness = d
    details = {"N": N, "entries": sol.to_json()["entries"], "window": [lo_excl, hi_excl], "required": required}
    if witness is None:
        return AuditReport(check, Verdict.CONSISTENT, findings, f"{len(fillers)} orbits fill the window", None, details)
    summary = f"{len(fillers)} admissible orbits cannot fill {required_count} required degrees"
    return AuditReport(check, Verdict.VIOLATION, findings, summary, witness, details)


# -- perfectness ---------------------------------------------------------------


def perfectness_check(
    system: OrbitSystem,
    K,
    search_bound: int = DEFAULT_SEARCH_BOUND,
    budget_bits: int = DEFAULT_BITS,
) -> AuditReport:
    """One good generator in each degree ``n - 1 + 2l`` (``l >= 1``) of the
    complete window and none elsewhere; a perfect table must then come from
    exactly ``n`` simple orbits, all even."""
    table = generator_table(system, K, budget_bits)
    n = system.n
    if table.window is None:
        return AuditReport("perfect", Verdict.INCONCLUSIVE, [], "complete window is empty; raise K")
    lo, hi = table.window
    findings = []
    bad_degrees = []
    for d in range(lo, hi + 1):
        want, got = target_betti(n, d), table.count(d)
        if want != got:
            bad_degrees.append(d)
            findings.append(Finding("perfect degree", tuple(str(r) for r in table.at(d)), False,
                                    f"{got} good generators, homology rank {want}", d))
    details = {"window": [lo, hi], "perfect": not bad_degrees}
    if bad_degrees:
        return AuditReport("perfect", Verdict.CONSISTENT, findings, "not perfect", bad_degrees[0], details)
    findings.append(Finding("perfect degree", (), True, f"exactly one good generator per degree n-1+2l in [{lo}, {hi}]"))

    even = [o for o in system if is_even_orbit(o)]
    odd = [o for o in system if not is_even_orbit(o)]
    if len(even) > n:
        chosen = OrbitSystem(n, tuple(even[: n + 1]))
        try:
            sol = find_common_jump(CIJInstance(chosen, 1, search_bound, budget_bits))
        except SearchExhausted as exc:
            return AuditReport("perfect", Verdict.INCONCLUSIVE, findings, str(exc), None, details)
        counts: dict[int, list[str]] = {}
        for o in chosen:
            e = sol.entry(o.label)
            mu = iterate_index(o, 2 * e.m, budget_bits)
            counts.setdefault(mu, []).append(f"{o.label}^{2 * e.m}")
        witness = min(d for d, g in counts.items() if len(g) > 1 or target_betti(n, d) == 0)
        findings.append(Finding("even orbit count", tuple(counts[witness]), False,
                                f"{len(even)} even orbits; N = {sol.N} puts {len(counts[witness])} good generators at {witness}",
                                witness))
        details["N"] = sol.N
        return AuditReport("perfect", Verdict.VIOLATION, findings, "perfect but more than n even orbits", witness, details)
    if len(even) < n:
        audit = multiplicity_audit(OrbitSystem(n, tuple(even)) if even else system, n + 1, search_bound, budget_bits)
        findings.extend(audit.findings)
        verdict = Verdict.VIOLATION if audit.verdict is Verdict.VIOLATION else audit.verdict
        return AuditReport("perfect", verdict, findings, f"perfect but only {len(even)} even orbits", audit.witness_degree, details)
    if odd:
        witness = iterate_index(odd[0], 1, budget_bits)
        findings.append(Finding("all orbits even", tuple(o.label for o in odd), False,
                                f"perfect table with odd orbits {', '.join(o.label for o in odd)}", witness))
        return AuditReport("perfect", Verdict.VIOLATION, findings, "perfect but not all orbits even", witness, details)
    findings.append(Finding("even orbit count", tuple(o.label for o in even), True, f"exactly n = {n} even orbits"))
    return AuditReport("perfect", Verdict.CONSISTENT, findings, "perfect", None, details)


# -- resonance and the third orbit ----------------------------------------------


def action_ratio(orbit) -> NumberExpr:
    return div(orbit.action, mean_index(orbit))


def resonance_check(system: OrbitSystem, budget_bits: int = DEFAULT_BITS) -> Ordering:
    """Compare ``A/mean`` of the first orbit against the second."""
    if len(system) != 2:
        raise ValueError(f"resonance check needs exactly two orbits, got {len(system)}")
    a, b = system.orbits
    for o in (a, b):
        if compare_certified(mean_index(o), 0, budget_bits) is not Ordering.GREATER:
            raise PreconditionError(f"orbit {o.label}: mean index is not positive")
    return compare_certified(action_ratio(a), action_ratio(b), budget_bits)


def kappa_zero(n: int, big: NumberExpr, small: NumberExpr, budget_bits: int = DEFAULT_BITS) -> int:
    """Smallest ``k >= 1`` with ``(R-n+1)/(R+n) * big >= small`` at ``R = 2k+n+1``.

    The left side increases with ``R``, so the inequality then holds for all
    larger ``k`` as well.
    """
    # R * (big - small) >= (n-1)*big + n*small
    bound = div((n - 1) * big + n * small, sub(big, small))
    k = max(1, -floor_certified(div(sub(n + 1, bound), 2), budget_bits))
    while k > 1 and _kappa_ok(n, k - 1, big, small, budget_bits):
        k -= 1
    while not _kappa_ok(n, k, big, small, budget_bits):
        k += 1
    return k


def _kappa_ok(n, k, big, small, budget_bits) -> bool:
    R = 2 * k + n + 1
    order = compare_certified(mul(R - n + 1, big), mul(R + n, small), budget_bits)
    return order in (Ordering.GREATER, Ordering.EQUAL)


def third_orbit_analysis(system: OrbitSystem, K, budget_bits: int = DEFAULT_BITS) -> AuditReport:
    n = system.n
    if n % 2 == 0:
        raise ValueError(f"n odd required (got n = {n})")
    if n < 3:
        raise ValueError("third orbit analysis needs n >= 3")
    order = resonance_check(system, budget_bits)
    check = "third-orbit"
    if order is Ordering.EQUAL:
        return AuditReport(check, Verdict.INCONCLUSIVE, [], "resonant, inconclusive")
    if order is Ordering.UNDECIDABLE:
        return AuditReport(check, Verdict.INCONCLUSIVE, [], f"ratio comparison undecidable at {budget_bits} bits")

    a, b = system.orbits
    in_class = [o for o in (a, b) if (iterate_index(o, 1, budget_bits) - n - 1) % 2 == 0]
    gamma = in_class[0] if len(in_class) == 1 else a
    delta = b if gamma is a else a
    findings = []
    if len(in_class) != 1:
        findings.append(Finding("orbit roles", (gamma.label, delta.label), True,
                                f"{len(in_class)} orbits in the n+1 parity class; taking {gamma.label} as gamma"))
    rg, rd = action_ratio(gamma), action_ratio(delta)
    case = 1 if compare_certified(rg, rd, budget_bits) is Ordering.GREATER else 2
    big, small = (rg, rd) if case == 1 else (rd, rg)
    k0 = kappa_zero(n, big, small, budget_bits)
    details = {"case": case, "gamma": gamma.label, "delta": delta.label, "kappa0": k0,
               "order": order.value}

    table = generator_table(system, K, budget_bits)
    hi = table.window[1] if table.window else None
    top_offset = n + 1 if case == 1 else n + 2
    if hi is None or 2 * k0 + top_offset > hi:
        worst = max((div(o.action, mean_index(o)) for o in system), key=float)
        need = mul(2 * k0 + 2 * n + 2, worst)
        details["required_K"] = to_text(need)
        return AuditReport(check, Verdict.INCONCLUSIVE, findings,
                           f"K too small to reach kappa0 = {k0}; need K >= {float(need):.6g}", None, details)
    details["window"] = list(table.window)

    # spectrum of gamma should be min - 2 + 2N on the truncated table
    reach = [iterate_index(gamma, ell, budget_bits) for ell in range(1, _iterate_cap(gamma, hi) + 1)]
    reach = sorted(set(mu for mu in reach if mu <= hi))
    if reach:
        expected = list(range(reach[0], hi + 1, 2))
        gaps = sorted(set(expected) - set(reach))
        findings.append(Finding("gamma spectrum", (gamma.label,), not gaps,
                                "indices of gamma cover min - 2 + 2N" if not gaps else f"gaps at {gaps[:5]}",
                                gaps[0] if gaps else None))

    count = table.count
    kappa = k0
    while 2 * kappa + top_offset <= hi:
        if case == 1:
            lhs, rhs = count(2 * kappa + n) + 1, count(2 * kappa + n + 1)
            text = f"#mu^-1({2 * kappa + n}) + 1 = {lhs}, #mu^-1({2 * kappa + n + 1}) = {rhs}"
        else:
            lhs, rhs = count(2 * kappa + n + 1), count(2 * kappa + n + 2) + 1
            text = f"#mu^-1({2 * kappa + n + 1}) = {lhs}, #mu^-1({2 * kappa + n + 2}) + 1 = {rhs}"
        ok = lhs == rhs
        findings.append(Finding(f"count identity kappa={kappa}", (gamma.label, delta.label), ok, text, 2 * kappa + n + 1))
        if not ok:
            return AuditReport(check, Verdict.VIOLATION, findings, "third orbit forced", 2 * kappa + n + 1, details)
        kappa += 1

    # all identities hold: the low-degree part must then be acyclic
    top = n - 1 if case == 1 else n
    degrees = range(-n + 3, top + 1)
    same = sum(count(d) for d in degrees if (d - n - 1) % 2 == 0)
    other = sum(count(d) for d in degrees if (d - n) % 2 == 0)
    ok = same == other
    findings.append(Finding("acyclic low range", (gamma.label, delta.label), ok,
                            f"degrees [{-n + 3}, {top}]: {same} generators of parity n+1, {other} of parity n", top))
    if not ok:
        return AuditReport(check, Verdict.VIOLATION, findings, "third orbit forced", top, details)
    return AuditReport(check, Verdict.INCONCLUSIVE, findings, "no contradiction found within the window", None, details)


def _iterate_cap(orbit, hi: int) -> int:
    return max(1, math.ceil((hi + orbit.n - 1) / float(mean_index(orbit))) + 1)


def required_degrees(report: AuditReport) -> list[int]:
    return list(report.details.get("required", []))


def scale_actions(system: OrbitSystem, factor) -> OrbitSystem:
    """Same orbits with every action multiplied by ``factor``."""
    from .index import SimpleOrbit

    factor = as_expr(factor)
    return OrbitSystem(
        system.n,
        tuple(SimpleOrbit(o.label, o.n, mul(factor, o.action), o.rotation, o.strict) for o in system),
    )
