"""Numeric probing: exact rational evaluation with certified interval
arithmetic for the transcendental kernels.

An assignment maps every kernel atom of an expression (symbols, jets,
arbitrary-function kernels) to a rational.  Rational subexpressions evaluate
exactly; exp, log and symbolic powers fall back to mpmath interval arithmetic
at increasing precision until the result interval is narrower than 1e-40 or
excludes zero.  This is the independent oracle backing the symbolic
zero-tests.
"""

from __future__ import annotations

import random
from fractions import Fraction

import mpmath

from .errors import DomainError, UncoveredKernelError
from .expr import (Add, ExpF, LogF, Mul, Pow, Rat, SPow, atoms_of, is_atom)

TARGET_WIDTH = Fraction(1, 10 ** 40)

_DEFAULT_SEED = [0]


def set_default_probe_seed(seed):
    """Base seed for randomized probe points (CLI --seed)."""
    _DEFAULT_SEED[0] = int(seed)


def default_probe_seed():
    return _DEFAULT_SEED[0]


class Interval:
    """A closed rational-endpoint enclosure of a real value."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi):
        self.lo = lo
        self.hi = hi

    def __repr__(self):
        return f"Interval({float(self.lo)}, {float(self.hi)})"

    @property
    def width(self):
        return self.hi - self.lo

    def includes_zero(self):
        return self.lo <= 0 <= self.hi

    def excludes_zero(self):
        return self.lo > 0 or self.hi < 0


def _mpf_to_fraction(x):
    try:
        p, q = mpmath.libmp.to_rational(mpmath.mpf(x)._mpf_)
    except (ValueError, TypeError) as exc:
        raise DomainError(f"non-finite value in interval evaluation: {x}") from exc
    return Fraction(p, q)


def _iv_to_interval(x):
    return Interval(_mpf_to_fraction(x.a), _mpf_to_fraction(x.b))


def _add(a, b):
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a + b
    ia, ib = _as_interval(a), _as_interval(b)
    return Interval(ia.lo + ib.lo, ia.hi + ib.hi)


def _as_interval(v):
    return v if isinstance(v, Interval) else Interval(v, v)


def _mul(a, b):
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a * b
    ia, ib = _as_interval(a), _as_interval(b)
    cands = [ia.lo * ib.lo, ia.lo * ib.hi, ia.hi * ib.lo, ia.hi * ib.hi]
    return Interval(min(cands), max(cands))


def _ipow(v, n):
    if isinstance(v, Fraction):
        if v == 0 and n < 0:
            raise DomainError("zero raised to a negative power")
        return v ** n
    iv = v
    if n < 0:
        if iv.includes_zero():
            raise DomainError("interval through zero raised to a negative power")
        lo, hi = 1 / iv.hi, 1 / iv.lo
        return _ipow(Interval(lo, hi), -n)
    if n == 0:
        return Fraction(1)
    out = Interval(Fraction(1), Fraction(1))
    for _ in range(n):
        out = _as_interval(_mul(out, iv))
    return out


def _transcendental(fn, v, prec):
    old = mpmath.iv.prec
    mpmath.iv.prec = prec
    try:
        if isinstance(v, Fraction):
            x = mpmath.iv.mpf(v.numerator) / v.denominator
        else:
            lo = mpmath.iv.mpf(v.lo.numerator) / v.lo.denominator
            hi = mpmath.iv.mpf(v.hi.numerator) / v.hi.denominator
            x = mpmath.iv.mpf([lo.a, hi.b])
        return _iv_to_interval(fn(x))
    finally:
        mpmath.iv.prec = old


def _eval(e, assignment, prec):
    if isinstance(e, Rat):
        return e.value
    if is_atom(e):
        v = assignment.get(e)
        if v is None:
            raise UncoveredKernelError(f"assignment does not cover {e!r}")
        return Fraction(v) if not isinstance(v, (Fraction, Interval)) else v
    if isinstance(e, Add):
        out = Fraction(0)
        for t in e.terms:
            out = _add(out, _eval(t, assignment, prec))
        return out
    if isinstance(e, Mul):
        out = Fraction(1)
        for f in e.factors:
            out = _mul(out, _eval(f, assignment, prec))
        return out
    if isinstance(e, Pow):
        return _ipow(_eval(e.base, assignment, prec), e.exponent)
    if isinstance(e, ExpF):
        return _transcendental(mpmath.iv.exp, _eval(e.arg, assignment, prec), prec)
    if isinstance(e, LogF):
        v = _eval(e.arg, assignment, prec)
        if (isinstance(v, Fraction) and v <= 0) or (isinstance(v, Interval) and v.lo <= 0):
            raise DomainError("log of a nonpositive value")
        return _transcendental(mpmath.iv.log, v, prec)
    if isinstance(e, SPow):
        b = _eval(e.base, assignment, prec)
        q = _eval(e.expo, assignment, prec)
        if isinstance(q, Fraction) and q.denominator == 1:
            return _ipow(b, int(q))
        if (isinstance(b, Fraction) and b <= 0) or (isinstance(b, Interval) and b.lo <= 0):
            raise DomainError("symbolic power of a nonpositive base")
        lg = _transcendental(mpmath.iv.log, b, prec)
        return _transcendental(mpmath.iv.exp, _mul(q, lg), prec)
    raise UncoveredKernelError(f"cannot evaluate node {type(e).__name__}")


def numeric_probe(e, assignment, target_width=TARGET_WIDTH):
    """Evaluate `e` under an atom assignment.

    Returns an exact Fraction when the expression is rational in its kernels,
    otherwise an Interval certified to be narrower than `target_width`
    (relative to magnitude) or to exclude zero.
    """
    prec = 80
    while True:
        v = _eval(e, assignment, prec)
        if isinstance(v, Fraction):
            return v
        scale = max(Fraction(1), abs(v.lo), abs(v.hi))
        if v.width <= target_width * scale or v.excludes_zero():
            return v
        if prec > 4000:
            return v
        prec *= 2


def probe_is_zero(e, assignment):
    v = numeric_probe(e, assignment)
    if isinstance(v, Fraction):
        return v == 0
    return v.includes_zero()


def probe_nonzero(e, assignment):
    v = numeric_probe(e, assignment)
    if isinstance(v, Fraction):
        return v != 0
    return v.excludes_zero()


def random_assignment(e, rng, lo=-6, hi=6, avoid_zero=True):
    """Small random rationals for every kernel atom of `e`.

    Values are kept positive for atoms that occur inside log or as symbolic
    power bases; exact zeros are avoided for atoms raised to negative powers.
    """
    need_positive = set()
    from .expr import walk

    def mark_positive(sub):
        for a in atoms_of(sub):
            need_positive.add(a)

    for n in walk(e):
        if isinstance(n, LogF):
            mark_positive(n.arg)
        elif isinstance(n, SPow):
            mark_positive(n.base)

    asg = {}
    for a in atoms_of(e):
        while True:
            num = rng.randint(lo, hi)
            den = rng.randint(1, 4)
            v = Fraction(num, den)
            if avoid_zero and v == 0:
                continue
            if a in need_positive and v <= 0:
                v = abs(v) + Fraction(1, den)
            asg[a] = v
            break
    return asg


def agree_at_random_points(e1, e2, npoints=20, seed=0):
    """Probe e1 - e2 at random assignments; True when all enclose zero."""
    from .expr import sub

    d = sub(e1, e2)
    rng = random.Random(seed)
    for _ in range(npoints):
        asg = random_assignment(d, rng)
        try:
            if not probe_is_zero(d, asg):
                return False
        except DomainError:
            continue
    return True
