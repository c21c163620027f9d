"""Exact symbolic expression kernel.

Expressions are immutable trees over a fixed node set: rational constants,
symbols, jet variables, arbitrary-function terms, sums, products, integer
powers, symbolic powers (base^parameter), exp and log.  All construction goes
through the smart constructors (`add`, `mul`, `pow_int`, `sym_pow`, `exp_`,
`log_`), which canonicalize on the way in:

* sums and products are flattened, commutatively sorted by a fixed term
  order, and rational constants folded;
* exp factors inside a product merge (exp(a)*exp(b) -> exp(a+b), exp(0) -> 1);
* symbolic powers with a common base merge and shed their integer part into
  ordinary integer powers;
* log(exp(a)) -> a and exp(log(a)) -> a (single level), and exp of a sum
  splits off integer multiples of log terms;
* positive integer powers of sums are expanded; negative ones are kept as
  opaque denominator kernels with rational content factored out;
* a sum that is identically zero as a rational expression in its kernels
  collapses to the literal 0 (denominators are cleared internally before
  deciding).

A canonical expression is therefore either a rational constant, a single
monomial (coefficient times kernels raised to integer powers), or a sorted
sum of monomials.  Zero-testing of `a - b` is the equality test used
throughout the package.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import gcd

from .errors import ExprError

KIND_INDEPENDENT = "independent"
KIND_PARAMETER = "parameter"
KIND_COORDINATE = "coordinate"

_MAX_TERMS = [200000]


def set_max_terms(n):
    """Global guard on monomial counts produced by expansion."""
    _MAX_TERMS[0] = int(n)


class Expr:
    __slots__ = ("key", "_hash")

    def __eq__(self, other):
        return self is other or (isinstance(other, Expr) and self.key == other.key)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        from .grammar import to_text

        return f"<{to_text(self)}>"

    def _finish(self, key):
        self.key = key
        self._hash = hash(key)


class Rat(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = value
        self._finish((0, value.numerator, value.denominator))


class Sym(Expr):
    __slots__ = ("name", "kind")

    def __init__(self, name, kind):
        self.name = name
        self.kind = kind
        self._finish((1, name, kind))


class Jet(Expr):
    """A dependent-variable component with a derivative multi-index.

    `midx` is a sorted tuple of (independent-name, order) pairs with positive
    orders; the empty tuple denotes the dependent itself.
    """

    __slots__ = ("dep", "midx")

    def __init__(self, dep, midx=()):
        midx = tuple(sorted((v, o) for v, o in midx if o))
        if any(o < 0 for _, o in midx):
            raise ExprError("negative derivative order in jet multi-index")
        self.dep = dep
        self.midx = midx
        self._finish((2, dep, sum(o for _, o in midx), midx))

    @property
    def order(self):
        return sum(o for _, o in self.midx)

    def bump(self, var, by=1):
        d = dict(self.midx)
        d[var] = d.get(var, 0) + by
        return Jet(self.dep, tuple(d.items()))


class Fun(Expr):
    """Arbitrary-function term: name, ordered argument expressions, and a
    derivative multi-index over argument positions."""

    __slots__ = ("name", "args", "dmidx")

    def __init__(self, name, args, dmidx=None):
        args = tuple(args)
        if dmidx is None:
            dmidx = (0,) * len(args)
        dmidx = tuple(dmidx)
        if len(dmidx) != len(args) or any(o < 0 for o in dmidx):
            raise ExprError("bad derivative multi-index for function term")
        self.name = name
        self.args = args
        self.dmidx = dmidx
        self._finish((3, name, dmidx, tuple(a.key for a in args)))

    @property
    def order(self):
        return sum(self.dmidx)

    def bump(self, pos):
        d = list(self.dmidx)
        d[pos] += 1
        return Fun(self.name, self.args, tuple(d))


class ExpF(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg):
        self.arg = arg
        self._finish((4, arg.key))


class LogF(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg):
        self.arg = arg
        self._finish((5, arg.key))


class SPow(Expr):
    """Symbolic power base^expo with a non-integer, parameter-like exponent."""

    __slots__ = ("base", "expo")

    def __init__(self, base, expo):
        self.base = base
        self.expo = expo
        self._finish((6, base.key, expo.key))


class Pow(Expr):
    __slots__ = ("base", "exponent")

    def __init__(self, base, exponent):
        self.base = base
        self.exponent = exponent
        self._finish((7, exponent, base.key))


class Mul(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors):
        self.factors = tuple(factors)
        self._finish((8, tuple(f.key for f in self.factors)))


class Add(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms):
        self.terms = tuple(terms)
        self._finish((9, tuple(t.key for t in self.terms)))


ZERO = Rat(Fraction(0))
ONE = Rat(Fraction(1))
MINUS_ONE = Rat(Fraction(-1))


def rat(p, q=1):
    return Rat(Fraction(p, q))


def is_zero(e):
    return isinstance(e, Rat) and e.value == 0


def is_one(e):
    return isinstance(e, Rat) and e.value == 1


def is_integer(e):
    return isinstance(e, Rat) and e.value.denominator == 1


def is_atom(e):
    return isinstance(e, (Sym, Jet, Fun))


# ---------------------------------------------------------------------------
# monomial bookkeeping
#
# A monomial is (coeff: Fraction, fmap: dict[kernel Expr -> int exponent]).
# Kernels are atoms, ExpF, LogF, SPow, or canonical Add nodes (the latter only
# with negative exponents, as denominators).
# ---------------------------------------------------------------------------


def _mono_of(e):
    """Decompose a canonical non-Add expression into (coeff, fmap)."""
    if isinstance(e, Rat):
        return e.value, {}
    if isinstance(e, Mul):
        coeff = Fraction(1)
        fmap = {}
        for f in e.factors:
            if isinstance(f, Rat):
                coeff *= f.value
            elif isinstance(f, Pow):
                fmap[f.base] = fmap.get(f.base, 0) + f.exponent
            else:
                fmap[f] = fmap.get(f, 0) + 1
        return coeff, fmap
    if isinstance(e, Pow):
        return Fraction(1), {e.base: e.exponent}
    return Fraction(1), {e: 1}


def _monos_of(e):
    if isinstance(e, Add):
        return [_mono_of(t) for t in e.terms]
    return [_mono_of(e)]


def _fsig(fmap):
    return tuple(sorted(((k.key, n) for k, n in fmap.items())))


def _mono_degree(fmap):
    return sum(fmap.values())


def _mono_sort_key(coeff, fmap):
    return (-_mono_degree(fmap), _fsig(fmap), coeff)


def _build_mono(coeff, fmap):
    """Assemble a canonical expression from one monomial."""
    if coeff == 0:
        return ZERO
    factors = []
    for k in sorted(fmap, key=lambda k: k.key):
        n = fmap[k]
        if n == 0:
            continue
        factors.append(k if n == 1 else Pow(k, n))
    if not factors:
        return Rat(coeff)
    if coeff == 1 and len(factors) == 1:
        return factors[0]
    if coeff != 1:
        factors.insert(0, Rat(coeff))
    if len(factors) == 1:
        return factors[0]
    return Mul(factors)


def _collect(monos):
    """Collect a list of monomials into {fsig: (coeff, fmap)} with zero drop."""
    acc = {}
    for coeff, fmap in monos:
        if coeff == 0:
            continue
        sig = _fsig(fmap)
        if sig in acc:
            c = acc[sig][0] + coeff
            if c == 0:
                del acc[sig]
            else:
                acc[sig] = (c, fmap)
        else:
            acc[sig] = (coeff, fmap)
    return acc


def _mono_mul(m1, m2):
    c1, f1 = m1
    c2, f2 = m2
    if len(f1) < len(f2):
        f1, f2 = f2, f1
    fmap = dict(f1)
    for k, n in f2.items():
        m = fmap.get(k, 0) + n
        if m == 0:
            fmap.pop(k)
        else:
            fmap[k] = m
    return _normalize_fmap(c1 * c2, fmap)


def _poly_mul(p1, p2):
    out = []
    for m1 in p1:
        for m2 in p2:
            out.append(_mono_mul(m1, m2))
    if len(out) > _MAX_TERMS[0]:
        raise ExprError("expression exceeds the configured term limit")
    return list(_collect(out).values())


def _poly_mul_kernel(monos, kern):
    """Multiply a monomial list by a sum kernel: monomials carrying the
    kernel with a negative exponent merge exponents; the rest distribute."""
    kmonos = [_mono_of(t) for t in kern.terms]
    out = []
    for coeff, fmap in monos:
        e = fmap.get(kern, 0)
        if e < 0:
            fm = dict(fmap)
            if e == -1:
                fm.pop(kern)
            else:
                fm[kern] = e + 1
            out.append((coeff, fm))
        else:
            for mk in kmonos:
                out.append(_mono_mul((coeff, fmap), mk))
    if len(out) > _MAX_TERMS[0]:
        raise ExprError("expression exceeds the configured term limit")
    return list(_collect(out).values())


def _normalize_fmap(coeff, fmap):
    """Re-run kernel merge rules on a raw fmap (exp merging, SPow merging,
    expansion of positive Add powers is deferred to the caller)."""
    exp_parts = []
    spow = {}
    plain = {}
    for k, n in fmap.items():
        if n == 0:
            continue
        if isinstance(k, ExpF):
            exp_parts.append(mul(rat(n), k.arg))
        elif isinstance(k, SPow):
            prev = spow.get(k.base, ZERO)
            spow[k.base] = add(prev, mul(rat(n), k.expo))
        else:
            plain[k] = plain.get(k, 0) + n
    changed = bool(exp_parts) or bool(spow)
    if not changed:
        return coeff, {k: n for k, n in plain.items() if n != 0}
    extra = ONE
    if exp_parts:
        extra = mul(extra, exp_(add(*exp_parts)))
    for base, expo in spow.items():
        extra = mul(extra, sym_pow(base, expo))
    c2, f2 = _mono_of(extra) if not isinstance(extra, Add) else (None, None)
    if f2 is None:
        # extremely unlikely: merged factor expanded into a sum; fold via mul
        res = mul(_build_mono(coeff, plain), extra)
        return _mono_of(res) if not isinstance(res, Add) else (Fraction(1), {res: 1})
    for k, n in f2.items():
        plain[k] = plain.get(k, 0) + n
    return coeff * c2, {k: n for k, n in plain.items() if n != 0}


# ---------------------------------------------------------------------------
# zero decision with denominator clearing
# ---------------------------------------------------------------------------


def _clearable(fmap):
    return any(isinstance(k, Add) and n < 0 for k, n in fmap.items())


def _expand_positive_adds(mono):
    """Expand Add kernels with positive exponents inside one monomial."""
    coeff, fmap = mono
    polys = []
    base = {}
    for k, n in fmap.items():
        if isinstance(k, Add) and n > 0:
            p = [_mono_of(t) for t in k.terms]
            for _ in range(n):
                polys.append(p)
        else:
            base[k] = n
    out = [(coeff, base)]
    for p in polys:
        out = _poly_mul(out, p)
    return out


def _cleared_is_zero(monos):
    """Decide identical vanishing by clearing Add-kernel denominators."""
    cur = list(_collect(monos).values())
    for _ in range(64):
        if not cur:
            return True
        shifts = {}
        for _, fmap in cur:
            for k, n in fmap.items():
                if isinstance(k, Add) and n < 0:
                    shifts[k] = max(shifts.get(k, 0), -n)
        if not shifts:
            return False
        for k, s in shifts.items():
            for _ in range(s):
                cur = _poly_mul_kernel(cur, k)
        expanded = []
        for m in cur:
            expanded.extend(_expand_positive_adds(m))
        cur = list(_collect(expanded).values())
    raise ExprError("denominator clearing did not stabilize")


# ---------------------------------------------------------------------------
# smart constructors
# ---------------------------------------------------------------------------


def add(*terms):
    monos = []
    for t in terms:
        monos.extend(_monos_of(t))
    acc = _collect(monos)
    if not acc:
        return ZERO
    out = sorted(acc.values(), key=lambda m: _mono_sort_key(*m))
    if len(out) == 1:
        return _build_mono(*out[0])
    if any(_clearable(f) for _, f in out) and _cleared_is_zero(out):
        return ZERO
    return Add(tuple(_build_mono(c, f) for c, f in out))


def add_all(terms):
    return add(*terms)


def sub(a, b):
    return add(a, neg(b))


def neg(e):
    return mul(MINUS_ONE, e)


def mul(*factors):
    coeff = Fraction(1)
    exp_parts = []
    spow_acc = {}
    fmap = {}
    polys = []

    def feed_kernel(k, n):
        nonlocal coeff
        if n == 0:
            return
        if isinstance(k, ExpF):
            exp_parts.append(mul(rat(n), k.arg))
        elif isinstance(k, SPow):
            prev = spow_acc.get(k.base, ZERO)
            spow_acc[k.base] = add(prev, mul(rat(n), k.expo))
        elif isinstance(k, Add):
            # merge against matching inverse kernels before any expansion
            c, prim = _extract_content(k)
            coeff *= c ** n
            fmap[prim] = fmap.get(prim, 0) + n
        else:
            fmap[k] = fmap.get(k, 0) + n

    def feed(e):
        nonlocal coeff
        if isinstance(e, Rat):
            coeff *= e.value
        elif isinstance(e, Mul):
            for f in e.factors:
                feed(f)
        elif isinstance(e, Pow):
            feed_kernel(e.base, e.exponent)
        else:
            feed_kernel(e, 1)

    for f in factors:
        feed(f)
    if coeff == 0:
        return ZERO

    extra = []
    if exp_parts:
        extra.append(exp_(add(*exp_parts)))
    for base, expo in spow_acc.items():
        extra.append(sym_pow(base, expo))
    for e in extra:
        if isinstance(e, Rat):
            coeff *= e.value
        elif isinstance(e, Add):
            polys.append([_mono_of(t) for t in e.terms])
        else:
            c, f = _mono_of(e)
            coeff *= c
            for k, n in f.items():
                m = fmap.get(k, 0) + n
                if m == 0:
                    fmap.pop(k)
                else:
                    fmap[k] = m
    if coeff == 0:
        return ZERO
    add_kernels = []
    for k in [k for k, n in fmap.items() if isinstance(k, Add) and n > 0]:
        add_kernels.append((k, fmap.pop(k)))
    if not polys and not add_kernels:
        return _build_mono(coeff, {k: n for k, n in fmap.items() if n != 0})
    out = [(coeff, {k: n for k, n in fmap.items() if n != 0})]
    for p in polys:
        out = _poly_mul(out, p)
    for k, n in add_kernels:
        for _ in range(n):
            out = _poly_mul_kernel(out, k)
    return add(*[_build_mono(c, f) for c, f in out])


def _extract_content(e):
    """Rational content (with the sign of the leading term) of a sum."""
    monos = _monos_of(e)
    nums = [abs(c.numerator) for c, _ in monos]
    dens = [c.denominator for c, _ in monos]
    g = 0
    for n in nums:
        g = gcd(g, n)
    l = 1
    for d in dens:
        l = l * d // gcd(l, d)
    content = Fraction(g, l)
    lead = min(monos, key=lambda m: _mono_sort_key(*m))
    if lead[0] < 0:
        content = -content
    if content == 1:
        return Fraction(1), e
    prim = add(*[_build_mono(c / content, dict(f)) for c, f in monos])
    return content, prim


def pow_int(base, n):
    n = int(n)
    if n == 0:
        return ONE
    if n == 1:
        return base
    if isinstance(base, Rat):
        if base.value == 0 and n < 0:
            raise ExprError("division by zero")
        return Rat(base.value ** n)
    if isinstance(base, Mul):
        return mul(*[pow_int(f, n) for f in base.factors])
    if isinstance(base, Pow):
        return pow_int(base.base, base.exponent * n)
    if isinstance(base, ExpF):
        return exp_(mul(rat(n), base.arg))
    if isinstance(base, SPow):
        return sym_pow(base.base, mul(rat(n), base.expo))
    if isinstance(base, Add):
        if n > 0:
            out = [(Fraction(1), {})]
            p = [_mono_of(t) for t in base.terms]
            for _ in range(n):
                out = _poly_mul(out, p)
            return add(*[_build_mono(c, f) for c, f in out])
        c, prim = _extract_content(base)
        if is_zero(prim):
            raise ExprError("division by zero")
        return _build_mono(c ** n, {prim: n})
    return Pow(base, n)


def div(a, b):
    return mul(a, pow_int(b, -1))


def sym_pow(base, expo):
    if is_integer(expo):
        return pow_int(base, int(expo.value))
    if is_zero(expo):
        return ONE
    if is_one(base):
        return ONE
    if isinstance(base, ExpF):
        return exp_(mul(expo, base.arg))
    if isinstance(base, SPow):
        return sym_pow(base.base, mul(expo, base.expo))
    if isinstance(base, Pow):
        return sym_pow(base.base, mul(rat(base.exponent), expo))
    # shed the integer-constant additive part of the exponent
    const = Fraction(0)
    rest = []
    for c, f in _monos_of(expo):
        if not f and c.denominator == 1:
            const += c
        else:
            rest.append((c, f))
    if const and rest:
        residual = add(*[_build_mono(c, dict(f)) for c, f in rest])
        return mul(pow_int(base, int(const)), SPow(base, residual))
    return SPow(base, expo)


def exp_(arg):
    if is_zero(arg):
        return ONE
    if isinstance(arg, LogF):
        return arg.arg
    if isinstance(arg, Add):
        keep = []
        factors = []
        for c, f in _monos_of(arg):
            if len(f) == 1 and c.denominator == 1:
                (k, n), = f.items()
                if isinstance(k, LogF) and n == 1:
                    factors.append(pow_int(k.arg, int(c)))
                    continue
            keep.append((c, dict(f)))
        if factors:
            rest = add(*[_build_mono(c, f) for c, f in keep])
            return mul(*factors, exp_(rest) if not is_zero(rest) else ONE)
    elif isinstance(arg, Mul):
        for c, f in _monos_of(arg):
            if len(f) == 1 and c.denominator == 1:
                (k, n), = f.items()
                if isinstance(k, LogF) and n == 1:
                    return pow_int(k.arg, int(c))
    return ExpF(arg)


def log_(arg):
    if is_one(arg):
        return ZERO
    if is_zero(arg):
        raise ExprError("log of zero")
    if isinstance(arg, ExpF):
        return arg.arg
    return LogF(arg)


# ---------------------------------------------------------------------------
# canonicalize / rebuild
# ---------------------------------------------------------------------------


def canonicalize(e):
    """Rebuild an expression through the smart constructors (idempotent)."""
    if isinstance(e, (Rat, Sym, Jet)):
        return e
    if isinstance(e, Fun):
        return Fun(e.name, tuple(canonicalize(a) for a in e.args), e.dmidx)
    if isinstance(e, ExpF):
        return exp_(canonicalize(e.arg))
    if isinstance(e, LogF):
        return log_(canonicalize(e.arg))
    if isinstance(e, SPow):
        return sym_pow(canonicalize(e.base), canonicalize(e.expo))
    if isinstance(e, Pow):
        return pow_int(canonicalize(e.base), e.exponent)
    if isinstance(e, Mul):
        return mul(*[canonicalize(f) for f in e.factors])
    if isinstance(e, Add):
        return add(*[canonicalize(t) for t in e.terms])
    raise ExprError(f"unknown node {type(e).__name__}")


def equal(a, b):
    return is_zero(sub(a, b))


# ---------------------------------------------------------------------------
# structural queries
# ---------------------------------------------------------------------------


def walk(e):
    yield e
    if isinstance(e, Fun):
        for a in e.args:
            yield from walk(a)
    elif isinstance(e, (ExpF, LogF)):
        yield from walk(e.arg)
    elif isinstance(e, SPow):
        yield from walk(e.base)
        yield from walk(e.expo)
    elif isinstance(e, Pow):
        yield from walk(e.base)
    elif isinstance(e, Mul):
        for f in e.factors:
            yield from walk(f)
    elif isinstance(e, Add):
        for t in e.terms:
            yield from walk(t)


def atoms_of(e, cls=None):
    out = []
    seen = set()
    for n in walk(e):
        if is_atom(n) and (cls is None or isinstance(n, cls)) and n not in seen:
            seen.add(n)
            out.append(n)
    return sorted(out, key=lambda a: a.key)


def jets_of(e, dep=None):
    return [j for j in atoms_of(e, Jet) if dep is None or j.dep == dep]


def fun_kernels_of(e, name=None):
    return [f for f in atoms_of(e, Fun) if name is None or f.name == name]


def contains(e, atom):
    return any(n == atom for n in walk(e))


def max_jet_order(e):
    orders = [j.order for j in jets_of(e)]
    return max(orders) if orders else 0


# ---------------------------------------------------------------------------
# substitution
# ---------------------------------------------------------------------------


def substitute(e, rules):
    """Simultaneous substitution of atoms (symbols / jets) followed by
    canonicalization.  Derivatives of substituted jets are not rewritten;
    callers must prolong their rules first."""
    for k in rules:
        if not isinstance(k, (Sym, Jet)):
            raise ExprError("substitution patterns must be symbols or jet variables")
    return substitute_kernels(e, rules)


def substitute_kernels(e, rules):
    """Internal: simultaneous structural replacement of arbitrary kernels."""
    if not rules:
        return e

    def go(n):
        r = rules.get(n)
        if r is not None:
            return r
        if isinstance(n, (Rat, Sym, Jet)):
            return n
        if isinstance(n, Fun):
            return Fun(n.name, tuple(go(a) for a in n.args), n.dmidx)
        if isinstance(n, ExpF):
            return exp_(go(n.arg))
        if isinstance(n, LogF):
            return log_(go(n.arg))
        if isinstance(n, SPow):
            return sym_pow(go(n.base), go(n.expo))
        if isinstance(n, Pow):
            return pow_int(go(n.base), n.exponent)
        if isinstance(n, Mul):
            return mul(*[go(f) for f in n.factors])
        if isinstance(n, Add):
            return add(*[go(t) for t in n.terms])
        raise ExprError(f"unknown node {type(n).__name__}")

    return go(e)


# ---------------------------------------------------------------------------
# derivatives
# ---------------------------------------------------------------------------


def _derive(e, leaf):
    """Generic derivation: `leaf` maps an atom (Sym/Jet/Fun) to its
    derivative, or returns None to request default handling (zero for
    symbols and jets, the chain rule through arguments for function
    kernels)."""
    if isinstance(e, Rat):
        return ZERO
    if isinstance(e, (Sym, Jet)):
        r = leaf(e)
        return ZERO if r is None else r
    if isinstance(e, Fun):
        r = leaf(e)
        if r is not None:
            return r
        parts = []
        for i, a in enumerate(e.args):
            da = _derive(a, leaf)
            if not is_zero(da):
                parts.append(mul(da, e.bump(i)))
        return add(*parts) if parts else ZERO
    if isinstance(e, ExpF):
        return mul(_derive(e.arg, leaf), e)
    if isinstance(e, LogF):
        return mul(_derive(e.arg, leaf), pow_int(e.arg, -1))
    if isinstance(e, SPow):
        db = _derive(e.base, leaf)
        terms = []
        if not is_zero(db):
            terms.append(mul(e.expo, sym_pow(e.base, sub(e.expo, ONE)), db))
        dq = _derive(e.expo, leaf)
        if not is_zero(dq):
            terms.append(mul(dq, log_(e.base), e))
        return add(*terms) if terms else ZERO
    if isinstance(e, Pow):
        db = _derive(e.base, leaf)
        if is_zero(db):
            return ZERO
        return mul(rat(e.exponent), pow_int(e.base, e.exponent - 1), db)
    if isinstance(e, Mul):
        terms = []
        fs = e.factors
        for i, f in enumerate(fs):
            df = _derive(f, leaf)
            if not is_zero(df):
                terms.append(mul(df, *fs[:i], *fs[i + 1:]))
        return add(*terms) if terms else ZERO
    if isinstance(e, Add):
        return add(*[_derive(t, leaf) for t in e.terms])
    raise ExprError(f"unknown node {type(e).__name__}")


@lru_cache(maxsize=400000)
def diff_atom(e, atom):
    """Partial derivative treating `atom` as a variable and every other
    symbol, jet and function kernel as independent of it.  Function terms
    other than `atom` itself chain through their arguments."""
    if isinstance(atom, Fun):
        def leaf(a):
            if a == atom:
                return ONE
            return rat(0) if not isinstance(a, Fun) else None
    else:
        def leaf(a):
            if a == atom:
                return ONE
            return None if isinstance(a, Fun) else ZERO
    return _derive(e, leaf)


@lru_cache(maxsize=400000)
def total_derivative(e, x):
    """Total derivative with respect to an independent variable: jets raise
    their multi-index, function terms chain through their arguments."""
    if not isinstance(x, Sym):
        raise ExprError("total derivative direction must be a symbol")

    def leaf(a):
        if isinstance(a, Sym):
            return ONE if a == x else ZERO
        if isinstance(a, Fun):
            return None
        return a.bump(x.name)

    return _derive(e, leaf)


def diff_kernel(e, kernel):
    """Partial derivative with respect to an arbitrary kernel node (an exp,
    log, symbolic-power or denominator-sum kernel as well as a plain atom);
    nodes equal to the kernel are the variable, everything else chains."""
    if isinstance(kernel, (Sym, Jet, Fun)):
        return diff_atom(e, kernel)

    def go(n):
        if n == kernel:
            return ONE
        if isinstance(n, (Rat, Sym, Jet)):
            return ZERO
        if isinstance(n, Fun):
            parts = []
            for i, a in enumerate(n.args):
                da = go(a)
                if not is_zero(da):
                    parts.append(mul(da, n.bump(i)))
            return add(*parts) if parts else ZERO
        if isinstance(n, ExpF):
            return mul(go(n.arg), n)
        if isinstance(n, LogF):
            return mul(go(n.arg), pow_int(n.arg, -1))
        if isinstance(n, SPow):
            db = go(n.base)
            out = []
            if not is_zero(db):
                out.append(mul(n.expo, sym_pow(n.base, sub(n.expo, ONE)), db))
            dq = go(n.expo)
            if not is_zero(dq):
                out.append(mul(dq, log_(n.base), n))
            return add(*out) if out else ZERO
        if isinstance(n, Pow):
            db = go(n.base)
            if is_zero(db):
                return ZERO
            return mul(rat(n.exponent), pow_int(n.base, n.exponent - 1), db)
        if isinstance(n, Mul):
            terms = []
            fs = n.factors
            for i, f in enumerate(fs):
                df = go(f)
                if not is_zero(df):
                    terms.append(mul(df, *fs[:i], *fs[i + 1:]))
            return add(*terms) if terms else ZERO
        if isinstance(n, Add):
            return add(*[go(t) for t in n.terms])
        raise ExprError(f"unknown node {type(n).__name__}")

    return go(e)


def total_derivative_multi(e, vars_orders):
    for x, n in vars_orders:
        for _ in range(n):
            e = total_derivative(e, x)
    return e


def clear_caches():
    diff_atom.cache_clear()
    total_derivative.cache_clear()
