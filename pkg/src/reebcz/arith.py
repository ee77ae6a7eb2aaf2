"""Certified real arithmetic over symbolic number expressions.

A :class:`NumberExpr` is an immutable expression tree whose leaves are
rationals, square roots of positive rationals, or opaque decimal literals
known to a stated accuracy.  Every node can produce an enclosing interval
``(lo, hi)`` with dyadic endpoints at any requested precision, and the
enclosures are nested: asking for more bits never widens the interval.

Floors and comparisons are either certified from the enclosures or, when
the enclosure cannot settle the question, decided symbolically by putting
the expression in normal form inside a multiquadratic field
``Q(sqrt p1, sqrt p2, ...)``.  Anything still unresolved is reported
(:class:`AmbiguousFloor`, :attr:`Ordering.UNDECIDABLE`), never rounded.

Grammar of the text form (round-trips through :func:`parse`)::

    expr    := integer | "(" op expr+ ")" | "(sqrt" expr ")" | decimal
    op      := "+" | "-" | "*" | "/"
    decimal := 'dec"' digits ["." digits] '"' " bits=" integer

``(- x)`` with a single argument is negation; ``+`` and ``*`` accept any
number of arguments and ``-`` / ``/`` fold left.  A rational is written
``(/ 3 7)``.  ``dec"0.70710678" bits=27`` is an opaque real within
``2**-27`` of the decimal.
"""

from __future__ import annotations

import copy
import enum
import math
import re
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Union

DEFAULT_BITS = 256

# Enclosure working precision is chosen from a fixed ladder so that the
# precision used for b bits is nondecreasing in b (keeps refinement nested).
_GUARD = 8
_LADDER = tuple(sorted({int(16 * 1.5 ** k) for k in range(40)}))

Number = Union["NumberExpr", int, Fraction]


class AmbiguousFloor(ArithmeticError):
    """The enclosure still straddles an integer at the maximal budget."""

    def __init__(self, value, lo, hi, budget, context=None):
        self.value = value
        self.lo = lo
        self.hi = hi
        self.budget = budget
        self.context = dict(context or {})
        where = "".join(f", {k}={v}" for k, v in self.context.items())
        super().__init__(
            f"floor of {value} not certified at {budget} bits "
            f"(enclosure [{float(lo):.6g}, {float(hi):.6g}]{where})"
        )


class UndecidableComparison(ArithmeticError):
    """Raised by callers that need a definite order and did not get one."""


class Ordering(enum.Enum):
    LESS = "Less"
    EQUAL = "Equal"
    GREATER = "Greater"
    UNDECIDABLE = "Undecidable"

    def flipped(self) -> "Ordering":
        return _FLIP[self]


_FLIP = {
    Ordering.LESS: Ordering.GREATER,
    Ordering.GREATER: Ordering.LESS,
    Ordering.EQUAL: Ordering.EQUAL,
    Ordering.UNDECIDABLE: Ordering.UNDECIDABLE,
}


def _round_out(lo: Fraction, hi: Fraction, w: int) -> tuple[Fraction, Fraction]:
    scale = 1 << w
    l = Fraction(math.floor(lo * scale), scale)
    h = Fraction(math.ceil(hi * scale), scale)
    return l, h


class NumberExpr:
    """Base class of the expression tree.

    Subclasses implement ``_eval(w)`` (raw enclosure at working precision
    ``w``, or ``None`` if unbounded), ``_sexpr()`` and ``_algebraic()``.
    """

    __slots__ = ("_cache", "precision")

    def __init__(self):
        self._cache = {}
        self.precision = 0

    # -- enclosures ---------------------------------------------------------

    def _enc_at(self, w: int):
        try:
            return self._cache[w]
        except KeyError:
            val = self._eval(w)
            self._cache[w] = val
            return val

    def enclosure(self, bits: int | None = None) -> tuple[Fraction, Fraction]:
        """Enclosure with width at most ``2**-bits * max(1, |x|)``.

        Opaque decimal leaves cap the attainable width; in that case the
        tightest enclosure reachable within the precision ladder is returned.
        """
        if bits is None:
            bits = self.precision
        exact = self.exact()
        if exact is not None:
            return exact, exact
        target = Fraction(1, 1 << bits)
        cap = 4 * bits + 256
        last = None
        for w in _LADDER:
            if w > cap:
                break
            last = w
            if w < bits + _GUARD:
                continue
            enc = self._enc_at(w)
            if enc is None:
                continue
            lo, hi = enc
            if lo > 0:
                mig = lo
            elif hi < 0:
                mig = -hi
            else:
                mig = 0
            if hi - lo <= target * max(1, mig):
                return enc
        enc = self._enc_at(last)
        if enc is None:
            return Fraction(-(1 << cap)), Fraction(1 << cap)
        return enc

    @property
    def lo(self) -> Fraction:
        return self.enclosure()[0]

    @property
    def hi(self) -> Fraction:
        return self.enclosure()[1]

    def refine(self, bits: int) -> "NumberExpr":
        """Copy of this value whose current enclosure is taken at ``bits``."""
        if bits < 1:
            raise ValueError("bits must be positive")
        if bits < self.precision:
            raise ValueError(f"cannot refine from {self.precision} down to {bits} bits")
        if bits == self.precision:
            return self
        out = copy.copy(self)
        out.precision = bits
        return out

    def __float__(self) -> float:
        lo, hi = self.enclosure(64)
        return float((lo + hi) / 2)

    # -- exactness ----------------------------------------------------------

    def exact(self) -> Fraction | None:
        """The value as a Fraction when the tree is a folded rational."""
        return None

    def algebraic(self):
        """Normal form as ``{frozenset(primes): Fraction}`` or ``None``.

        The key ``frozenset({2, 3})`` stands for ``sqrt(6)``; the empty key
        is the rational part.  ``None`` means an opaque leaf is involved or a
        zero divisor was met.
        """
        try:
            return self._algebraic()
        except _NotAlgebraic:
            return None

    def _algebraic(self):
        raise _NotAlgebraic

    # -- arithmetic sugar ---------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    # -- text form ----------------------------------------------------------

    def __str__(self) -> str:
        return self._sexpr()

    def __repr__(self) -> str:
        return f"NumberExpr({self._sexpr()!r})"


class _NotAlgebraic(Exception):
    pass


class Rational(NumberExpr):
    __slots__ = ("value",)

    def __init__(self, value):
        super().__init__()
        self.value = Fraction(value)

    def exact(self):
        return self.value

    def _eval(self, w):
        return self.value, self.value

    def _algebraic(self):
        return {frozenset(): self.value} if self.value else {}

    def _sexpr(self):
        v = self.value
        if v.denominator == 1:
            return str(v.numerator)
        return f"(/ {v.numerator} {v.denominator})"


class Sqrt(NumberExpr):
    __slots__ = ("radicand",)

    def __init__(self, radicand: Fraction):
        super().__init__()
        self.radicand = Fraction(radicand)

    def _eval(self, w):
        r = self.radicand
        scale4 = 1 << (2 * w)
        y_lo = (r.numerator * scale4) // r.denominator
        y_hi = -((-r.numerator * scale4) // r.denominator)
        lo = math.isqrt(y_lo)
        hi = math.isqrt(y_hi - 1) + 1 if y_hi > 0 else 0
        return Fraction(lo, 1 << w), Fraction(hi, 1 << w)

    def _algebraic(self):
        r = self.radicand
        # sqrt(p/q) = sqrt(p*q) / q
        coef, primes = _squarefree(r.numerator * r.denominator)
        return {primes: Fraction(coef, r.denominator)}

    def _sexpr(self):
        return f"(sqrt {Rational(self.radicand)._sexpr()})"


class Decimal(NumberExpr):
    """Opaque real known to lie within ``2**-bits`` of a decimal string."""

    __slots__ = ("text", "bits", "value")

    def __init__(self, text: str, bits: int):
        super().__init__()
        if not re.fullmatch(r"-?\d+(\.\d+)?", text):
            raise ValueError(f"bad decimal literal {text!r}")
        if bits < 0:
            raise ValueError("decimal precision must be nonnegative")
        self.text = text
        self.bits = int(bits)
        self.value = Fraction(text)

    def _eval(self, w):
        r = Fraction(1, 1 << self.bits)
        return self.value - r, self.value + r

    def _sexpr(self):
        return f'dec"{self.text}" bits={self.bits}'


class _Binary(NumberExpr):
    __slots__ = ("a", "b")
    symbol = "?"

    def __init__(self, a: NumberExpr, b: NumberExpr):
        super().__init__()
        self.a = a
        self.b = b

    def _sexpr(self):
        return f"({self.symbol} {self.a._sexpr()} {self.b._sexpr()})"


class Add(_Binary):
    __slots__ = ()
    symbol = "+"

    def _eval(self, w):
        x, y = self.a._enc_at(w), self.b._enc_at(w)
        if x is None or y is None:
            return None
        return _round_out(x[0] + y[0], x[1] + y[1], w)

    def _algebraic(self):
        return _alg_add(self.a._algebraic(), self.b._algebraic())


class Sub(_Binary):
    __slots__ = ()
    symbol = "-"

    def _eval(self, w):
        x, y = self.a._enc_at(w), self.b._enc_at(w)
        if x is None or y is None:
            return None
        return _round_out(x[0] - y[1], x[1] - y[0], w)

    def _algebraic(self):
        return _alg_add(self.a._algebraic(), _alg_scale(self.b._algebraic(), -1))


class Mul(_Binary):
    __slots__ = ()
    symbol = "*"

    def _eval(self, w):
        x, y = self.a._enc_at(w), self.b._enc_at(w)
        if x is None or y is None:
            return None
        ps = (x[0] * y[0], x[0] * y[1], x[1] * y[0], x[1] * y[1])
        return _round_out(min(ps), max(ps), w)

    def _algebraic(self):
        return _alg_mul(self.a._algebraic(), self.b._algebraic())


class Div(_Binary):
    __slots__ = ()
    symbol = "/"

    def _eval(self, w):
        x, y = self.a._enc_at(w), self.b._enc_at(w)
        if x is None or y is None or y[0] <= 0 <= y[1]:
            return None
        qs = (x[0] / y[0], x[0] / y[1], x[1] / y[0], x[1] / y[1])
        return _round_out(min(qs), max(qs), w)

    def _algebraic(self):
        return _alg_mul(self.a._algebraic(), _alg_inv(self.b._algebraic()))


class Neg(NumberExpr):
    __slots__ = ("a",)

    def __init__(self, a: NumberExpr):
        super().__init__()
        self.a = a

    def _eval(self, w):
        x = self.a._enc_at(w)
        if x is None:
            return None
        return -x[1], -x[0]

    def _algebraic(self):
        return _alg_scale(self.a._algebraic(), -1)

    def _sexpr(self):
        return f"(- {self.a._sexpr()})"


# -- constructors with constant folding --------------------------------------


def as_expr(x: Number) -> NumberExpr:
    if isinstance(x, NumberExpr):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, (int, Fraction)):
        return Rational(x)
    if isinstance(x, str):
        return parse(x)
    raise TypeError(f"cannot convert {type(x).__name__} to NumberExpr (floats are not exact)")


def const(x) -> NumberExpr:
    """Exact rational constant (accepts ints, Fractions and 'p/q' strings)."""
    return Rational(Fraction(x))


def sqrt(x: Number) -> NumberExpr:
    x = as_expr(x)
    r = x.exact()
    if r is None:
        raise ValueError("sqrt is only defined for rational arguments")
    if r <= 0:
        raise ValueError(f"sqrt needs a positive rational, got {r}")
    n, d = math.isqrt(r.numerator), math.isqrt(r.denominator)
    if n * n == r.numerator and d * d == r.denominator:
        return Rational(Fraction(n, d))
    return Sqrt(r)


def add(a: Number, b: Number) -> NumberExpr:
    a, b = as_expr(a), as_expr(b)
    ea, eb = a.exact(), b.exact()
    if ea is not None and eb is not None:
        return Rational(ea + eb)
    if ea == 0:
        return b
    if eb == 0:
        return a
    return Add(a, b)


def sub(a: Number, b: Number) -> NumberExpr:
    a, b = as_expr(a), as_expr(b)
    ea, eb = a.exact(), b.exact()
    if ea is not None and eb is not None:
        return Rational(ea - eb)
    if eb == 0:
        return a
    return Sub(a, b)


def mul(a: Number, b: Number) -> NumberExpr:
    a, b = as_expr(a), as_expr(b)
    ea, eb = a.exact(), b.exact()
    if ea is not None and eb is not None:
        return Rational(ea * eb)
    if ea == 1:
        return b
    if eb == 1:
        return a
    return Mul(a, b)


def div(a: Number, b: Number) -> NumberExpr:
    a, b = as_expr(a), as_expr(b)
    ea, eb = a.exact(), b.exact()
    if eb == 0:
        raise ZeroDivisionError("division by exact zero")
    if ea is not None and eb is not None:
        return Rational(ea / eb)
    if eb == 1:
        return a
    return Div(a, b)


def neg(a: Number) -> NumberExpr:
    a = as_expr(a)
    ea = a.exact()
    if ea is not None:
        return Rational(-ea)
    if isinstance(a, Neg):
        return a.a
    return Neg(a)


def decimal(text: str, bits: int) -> NumberExpr:
    return Decimal(text, bits)


# -- multiquadratic normal form ----------------------------------------------

_SMALL_PRIMES = [p for p in range(2, 1000) if all(p % q for q in range(2, math.isqrt(p) + 1))]


@lru_cache(maxsize=4096)
def _squarefree(m: int) -> tuple[int, frozenset]:
    """Write ``m = c**2 * s`` with ``s`` squarefree; return (c, primes of s)."""
    if m <= 0:
        raise ValueError("expected a positive integer")
    coef, primes = 1, set()
    for p in _SMALL_PRIMES:
        if p * p > m:
            break
        e = 0
        while m % p == 0:
            m //= p
            e += 1
        coef *= p ** (e // 2)
        if e % 2:
            primes.add(p)
    if m > 1:
        r = math.isqrt(m)
        if r * r == m:
            coef *= r
        else:
            from sympy import factorint

            for p, e in factorint(m).items():
                coef *= p ** (e // 2)
                if e % 2:
                    primes.add(p)
    return coef, frozenset(primes)


def _alg_add(x: dict, y: dict) -> dict:
    out = dict(x)
    for k, v in y.items():
        s = out.get(k, 0) + v
        if s:
            out[k] = s
        else:
            out.pop(k, None)
    return out


def _alg_scale(x: dict, c) -> dict:
    if not c:
        return {}
    return {k: v * c for k, v in x.items()}


def _alg_mul(x: dict, y: dict) -> dict:
    out: dict = {}
    for kx, vx in x.items():
        for ky, vy in y.items():
            common = kx & ky
            factor = math.prod(common) if common else 1
            k = kx ^ ky
            s = out.get(k, 0) + vx * vy * factor
            if s:
                out[k] = s
            else:
                out.pop(k, None)
    return out


def _alg_inv(x: dict) -> dict:
    if not x:
        raise _NotAlgebraic  # zero divisor
    primes = set().union(*x.keys())
    if not primes:
        return {frozenset(): 1 / x[frozenset()]}
    p = min(primes)
    # x = a + b*sqrt(p); 1/x = (a - b*sqrt(p)) / (a**2 - p*b**2)
    conj = {k: (-v if p in k else v) for k, v in x.items()}
    norm = _alg_mul(x, conj)
    return _alg_mul(conj, _alg_inv(norm))


# -- certified operations ----------------------------------------------------


def refine(x: Number, bits: int) -> NumberExpr:
    return as_expr(x).refine(bits)


def _bit_schedule(budget: int) -> Iterable[int]:
    b = 16
    while b < budget:
        yield b
        b *= 2
    yield budget


def floor_certified(x: Number, budget_bits: int = DEFAULT_BITS, context=None) -> int:
    """Certified floor, refining up to ``budget_bits``.

    Falls back to the symbolic normal form when the value is an integer in
    disguise (e.g. ``sqrt(2) * sqrt(2)``).
    """
    x = as_expr(x)
    e = x.exact()
    if e is not None:
        return math.floor(e)
    lo = hi = None
    for b in _bit_schedule(budget_bits):
        lo, hi = x.enclosure(b)
        fl = math.floor(lo)
        if fl == math.floor(hi):
            return fl
    alg = x.algebraic()
    if alg is not None and set(alg) <= {frozenset()}:
        return math.floor(alg.get(frozenset(), Fraction(0)))
    raise AmbiguousFloor(x, lo, hi, budget_bits, context)


def frac_certified(x: Number, budget_bits: int = DEFAULT_BITS, context=None) -> NumberExpr:
    """``x - floor(x)`` as an expression, with the floor certified."""
    x = as_expr(x)
    return sub(x, floor_certified(x, budget_bits, context))


def compare_certified(x: Number, y: Number, budget_bits: int = DEFAULT_BITS) -> Ordering:
    x, y = as_expr(x), as_expr(y)
    ex, ey = x.exact(), y.exact()
    if ex is not None and ey is not None:
        return Ordering.LESS if ex < ey else Ordering.GREATER if ex > ey else Ordering.EQUAL
    d = sub(x, y)
    checked_symbolic = False
    for b in _bit_schedule(budget_bits):
        lo, hi = d.enclosure(b)
        if lo > 0:
            return Ordering.GREATER
        if hi < 0:
            return Ordering.LESS
        if not checked_symbolic and b >= 32:
            checked_symbolic = True
            alg = d.algebraic()
            if alg is not None and not alg:
                return Ordering.EQUAL
    return Ordering.UNDECIDABLE


def floor_multiple(x: NumberExpr, k: int, budget_bits: int = DEFAULT_BITS, context=None) -> int:
    """``floor(k * x)`` for a positive integer ``k``, certified.

    Uses one cached enclosure of ``x`` scaled by ``k``; falls back to the
    full certified floor of the product only when that enclosure is too wide.
    """
    e = x.exact()
    if e is not None:
        return math.floor(k * e)
    lo, hi = x.enclosure(64 + k.bit_length())
    a, b = k * lo, k * hi
    fa = a.numerator // a.denominator
    if fa == b.numerator // b.denominator:
        return fa
    return floor_certified(mul(k, x), budget_bits, context)


def is_positive(x: Number, budget_bits: int = DEFAULT_BITS) -> bool:
    return compare_certified(x, 0, budget_bits) is Ordering.GREATER


# -- parsing -----------------------------------------------------------------

_TOKEN = re.compile(r'\s*(?:(\()|(\))|dec"(-?\d+(?:\.\d+)?)"\s+bits=(\d+)|([^\s()]+))')


def _tokenize(text: str):
    pos = 0
    out = []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse number expression at {text[pos:]!r}")
        pos = m.end()
        if m.group(1):
            out.append("(")
        elif m.group(2):
            out.append(")")
        elif m.group(3) is not None:
            out.append(("dec", m.group(3), int(m.group(4))))
        else:
            out.append(("atom", m.group(5)))
        while pos < len(text) and text[pos].isspace():
            pos += 1
    return out


def parse(text: str) -> NumberExpr:
    """Parse the prefix text form; plain integers, 'p/q' and decimals like
    '0.25' (read as exact rationals) are also accepted at top level."""
    tokens = _tokenize(text)
    if not tokens:
        raise ValueError("empty number expression")
    expr, pos = _parse_at(tokens, 0)
    if pos != len(tokens):
        raise ValueError(f"trailing input in number expression {text!r}")
    return expr


def _atom(tok: str) -> NumberExpr:
    try:
        return Rational(Fraction(tok))
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"bad number literal {tok!r}") from None


_FOLD = {"+": add, "*": mul, "-": sub, "/": div}


def _parse_at(tokens, pos):
    tok = tokens[pos]
    if tok == "(":
        head = tokens[pos + 1] if pos + 1 < len(tokens) else None
        if not isinstance(head, tuple) or head[0] != "atom":
            raise ValueError("expected an operator after '('")
        op = head[1]
        pos += 2
        args = []
        while pos < len(tokens) and tokens[pos] != ")":
            arg, pos = _parse_at(tokens, pos)
            args.append(arg)
        if pos >= len(tokens):
            raise ValueError("unbalanced parentheses")
        pos += 1
        if op == "sqrt":
            if len(args) != 1:
                raise ValueError("sqrt takes one argument")
            return sqrt(args[0]), pos
        if op not in _FOLD or not args:
            raise ValueError(f"unknown operator {op!r}")
        if op == "-" and len(args) == 1:
            return neg(args[0]), pos
        acc = args[0]
        for a in args[1:]:
            acc = _FOLD[op](acc, a)
        return acc, pos
    if tok == ")":
        raise ValueError("unexpected ')'")
    if tok[0] == "dec":
        return Decimal(tok[1], tok[2]), pos + 1
    return _atom(tok[1]), pos + 1


def to_text(x: Number) -> str:
    return str(as_expr(x))
