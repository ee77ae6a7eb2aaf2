"""Irrational ellipsoids and dataset files.

On ``E(a_1..a_n) = {sum pi |z_j|^2 / a_j = 1}`` with irrational ratios the
simple Reeb orbits are the circles in the coordinate axes, ``A(g_k) = a_k``
and ``mu(g_k^l) = n - 1 + 2 * sum_j floor(l * a_k / a_j)``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import IO

import jsonschema

from .arith import (
    DEFAULT_BITS,
    NumberExpr,
    Ordering,
    as_expr,
    compare_certified,
    div,
    floor_certified,
    floor_multiple,
    frac_certified,
    parse,
    to_text,
)
from .czpath import BlockSpec
from .index import OrbitSystem, RotationDecomposition, SimpleOrbit

SCHEMA_ID = "reebcz-dataset/1"


class DatasetError(ValueError):
    pass


class DatasetWarning(UserWarning):
    pass


def _is_rational(x: NumberExpr) -> bool:
    if x.exact() is not None:
        return True
    alg = x.algebraic()
    return alg is not None and set(alg) <= {frozenset()}


@dataclass(frozen=True)
class EllipsoidSpec:
    n: int
    radii: tuple[NumberExpr, ...]

    def __post_init__(self):
        radii = tuple(as_expr(a) for a in self.radii)
        object.__setattr__(self, "radii", radii)
        if self.n < 2:
            raise ValueError("ellipsoids need n >= 2 (n = 1 has no contact structure worth auditing)")
        if len(radii) != self.n:
            raise ValueError(f"expected {self.n} radii, got {len(radii)}")
        for a in radii:
            if compare_certified(a, 0) is not Ordering.GREATER:
                raise ValueError(f"radius {a} is not certified positive")
        for j in range(self.n):
            for k in range(j + 1, self.n):
                if _is_rational(div(radii[j], radii[k])):
                    raise ValueError(f"radii {radii[j]} and {radii[k]} have a rational ratio (degenerate ellipsoid)")

    @classmethod
    def from_radii(cls, radii) -> "EllipsoidSpec":
        radii = tuple(radii)
        return cls(len(radii), radii)


def ellipsoid_index(spec: EllipsoidSpec, k: int, ell: int, budget_bits: int = DEFAULT_BITS) -> int:
    """Closed form for the ``ell``-th iterate of the ``k``-th axis orbit (0-based)."""
    ak = spec.radii[k]
    total = spec.n - 1
    for j, aj in enumerate(spec.radii):
        total += 2 * (ell if j == k else floor_multiple(div(ak, aj), ell, budget_bits, {"k": k, "j": j}))
    return total


def ellipsoid_system(spec: EllipsoidSpec, budget_bits: int = DEFAULT_BITS) -> OrbitSystem:
    orbits = []
    for k, ak in enumerate(spec.radii):
        p = 2
        thetas = []
        for j, aj in enumerate(spec.radii):
            if j == k:
                continue
            r = div(ak, aj)
            p += 2 * floor_certified(r, budget_bits)
            thetas.append(frac_certified(r, budget_bits))
        orbits.append(SimpleOrbit(f"g{k + 1}", spec.n, ak, RotationDecomposition(p, tuple(thetas))))
    return OrbitSystem(spec.n, tuple(orbits))


def ellipsoid_block_spec(spec: EllipsoidSpec, k: int, samples_per_unit: int = 512) -> BlockSpec:
    """Linearised flow of the ``k``-th axis orbit on the transverse planes.

    The ``z_j`` plane turns ``a_k / a_j`` times along the orbit; the first
    transverse block carries one extra turn from the trivialisation of the
    contact structure along the axis circle.
    """
    ak = spec.radii[k]
    rots = [div(ak, aj) for j, aj in enumerate(spec.radii) if j != k]
    rots[0] = rots[0] + 1
    return BlockSpec(tuple(rots), (), samples_per_unit)


# -- files -------------------------------------------------------------------


def _schema() -> dict:
    text = resources.files("reebcz").joinpath("data/dataset.schema.json").read_text()
    return json.loads(text)


def system_to_json(system: OrbitSystem, notes: str | None = None) -> dict:
    data = {
        "schema": SCHEMA_ID,
        "n": system.n,
        "orbits": [
            {
                "label": o.label,
                "action": to_text(o.action),
                "p": o.p,
                "q": o.q,
                "thetas": [to_text(t) for t in o.thetas],
            }
            for o in system
        ],
    }
    if notes:
        data["notes"] = notes
    return data


def _field(path) -> str:
    out = ""
    for part in path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<root>"


def system_from_json(data: dict) -> OrbitSystem:
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        msgs = [f"{_field(e.absolute_path)}: {e.message}" for e in errors]
        raise DatasetError("schema violation:\n  " + "\n  ".join(msgs))
    n = data["n"]
    orbits = []
    for i, row in enumerate(data["orbits"]):
        where = f"orbits[{i}]"
        if row["q"] != len(row["thetas"]):
            raise DatasetError(f"{where}.q: q = {row['q']} but {len(row['thetas'])} thetas given")
        try:
            action = parse(row["action"])
            thetas = tuple(parse(t) for t in row["thetas"])
        except ValueError as exc:
            raise DatasetError(f"{where}: {exc}") from None
        if row["q"] == n - 1 and row["p"] % 2:
            raise DatasetError(
                f"{where}: q = n - 1 requires p even (iteration normal form), got p = {row['p']}"
            )
        for j, t in enumerate(thetas):
            if _is_rational(t):
                warnings.warn(
                    f"{where}.thetas[{j}] = {to_text(t)}: rational theta violates nondegeneracy assumption",
                    DatasetWarning,
                    stacklevel=3,
                )
        try:
            orbits.append(SimpleOrbit(row["label"], n, action, RotationDecomposition(row["p"], thetas)))
        except ValueError as exc:
            raise DatasetError(f"{where}: {exc}") from None
    try:
        return OrbitSystem(n, tuple(orbits))
    except ValueError as exc:
        raise DatasetError(str(exc)) from None


def loads_dataset(text: str) -> OrbitSystem:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return system_from_json(data)


def load_dataset(source: str | Path | IO[str]) -> OrbitSystem:
    if hasattr(source, "read"):
        return loads_dataset(source.read())
    return loads_dataset(Path(source).read_text())


def dumps_dataset(system: OrbitSystem, notes: str | None = None) -> str:
    return json.dumps(system_to_json(system, notes), indent=2) + "\n"


def save_dataset(system: OrbitSystem, path: str | Path, notes: str | None = None) -> None:
    Path(path).write_text(dumps_dataset(system, notes))


def split_radii(text: str) -> list[NumberExpr]:
    """``"1,(sqrt 2)"`` -> two expressions; commas inside parentheses are kept."""
    parts, depth, cur = [], 0, ""
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append(cur)
            cur = ""
        else:
            cur += ch
    parts.append(cur)
    parts = [p.strip() for p in parts]
    if any(not p for p in parts):
        raise ValueError(f"empty radius in {text!r}")
    return [parse(p) for p in parts]
