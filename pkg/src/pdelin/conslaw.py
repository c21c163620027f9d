"""Conservation-law multipliers: determining equations, splitting into an
overdetermined linear system, a heuristic reducer (algebraic elimination,
potential introduction, first-order integration, characteristics), multiplier
family verification, divergence testing and flux reconstruction."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .constraints import LinearConstraints
from .errors import ExprError, NotADivergenceError
from .expr import (Add, Fun, Jet, Sym, add, atoms_of, diff_atom, div,
                   exp_, fun_kernels_of, is_zero, jets_of, log_,
                   max_jet_order, mul, neg, pow_int, rat, sub, substitute,
                   substitute_kernels, walk)
from .expr import _monos_of  # monomial views for splitting
from .jets import PdeSystem, euler_operator, jet_rank

PLACEHOLDERS = [Sym(f"_pos{i}", "coordinate") for i in range(12)]

PRESET_GENERAL = "general"
PRESET_FIXED_INDEPENDENTS = "fixed-independents"
PRESET_INTEGRATING_FACTOR = "integrating-factor"


@dataclass
class MultiplierAnsatz:
    """Shape and jet order of the unknown multipliers; `restrict_to` can pin
    the argument list to a subset of the default atoms."""

    order: int = None
    shape: str = PRESET_GENERAL
    restrict_to: tuple = None

    def resolve_order(self, sys):
        if self.order is not None:
            return self.order
        return 1 if sys.m == 1 else 0

    def arguments(self, sys):
        if self.restrict_to is not None:
            return tuple(self.restrict_to)
        ws = sys.workspace
        ell = self.resolve_order(sys)
        if sys.m == 1 and ell > 2:
            raise ExprError("scalar contact case allows multiplier order at most 2")
        if sys.m >= 2 and ell > 1:
            raise ExprError("multicomponent point case allows multiplier order at most 1")
        args = list(ws.independents)
        jets = []
        names = [s.name for s in ws.independents]
        for dep in ws.dependents:
            for total in range(ell + 1):
                for midx in _orders(names, total):
                    jets.append(Jet(dep, midx))
        jets.sort(key=lambda j: jet_rank(ws, j))
        return tuple(args + jets)


def _orders(names, total):
    if not names:
        if total == 0:
            yield ()
        return
    for first in range(total + 1):
        for rest in _orders(names[1:], total - first):
            yield ((names[0], first),) + rest if first else rest


# ---------------------------------------------------------------------------
# multiplier families
# ---------------------------------------------------------------------------


@dataclass
class MultiplierFamily:
    """Concrete multiplier components built from arbitrary-function kernels,
    together with the linear system constraining those functions.

    `coordinates` are the formal coordinate symbols of the constraint
    operator; `definitions` give each coordinate as an expression in the
    system variables (the X_i of the linearization theory)."""

    components: list
    function_names: list
    coordinates: tuple
    definitions: tuple
    constraints: LinearConstraints | None

    def instantiated_args(self):
        return tuple(self.definitions)

    def reduce(self, e):
        return self.constraints.reduce(e) if self.constraints is not None else e


@dataclass
class VerificationReport:
    ok: bool
    residuals: list
    fluxes: list | None = None
    flux_residual: object = None
    singular_warnings: list = field(default_factory=list)
    messages: list = field(default_factory=list)


def multiplier_combination(sys, fam):
    if len(fam.components) != len(sys.equations):
        raise ExprError("family component count does not match the system")
    return add(*[mul(lam, g) for lam, g in zip(fam.components, sys.equations)])


def verify_multipliers(sys, fam, with_fluxes=True):
    """Check E_{U^sigma}(Lambda_nu G^nu) == 0 modulo the family constraints;
    on success reconstruct fluxes with an exactly zero residual."""
    ws = sys.workspace
    s = multiplier_combination(sys, fam)
    residuals = []
    for dep in ws.dependents:
        r = fam.reduce(euler_operator(s, dep, ws))
        residuals.append(r)
    ok = all(is_zero(r) for r in residuals)
    messages = []
    if not ok:
        for dep, r in zip(ws.dependents, residuals):
            if not is_zero(r):
                messages.append(f"E_{dep} residual nonzero: offending terms remain")
        return VerificationReport(ok=False, residuals=residuals, messages=messages)

    warnings = []
    for i, lam in enumerate(fam.components):
        if is_zero(sys.reduce_on_solutions(lam)):
            warnings.append(f"multiplier {i + 1} vanishes identically on solutions")

    fluxes = None
    flux_residual = None
    if with_fluxes:
        if not any(fun_kernels_of(lam) for lam in fam.components):
            fluxes = reconstruct_fluxes(s, ws)
            flux_residual = sub(s, _divergence(fluxes, ws))
        else:
            from .linearize import family_fluxes
            try:
                fluxes, flux_residual = family_fluxes(sys, fam)
            except ExprError as exc:
                messages.append(f"fluxes unavailable: {exc}")
    return VerificationReport(ok=True, residuals=residuals, fluxes=fluxes,
                              flux_residual=flux_residual,
                              singular_warnings=warnings, messages=messages)


def _divergence(fluxes, ws):
    from .expr import total_derivative

    return add(*[total_derivative(f, s) for f, s in zip(fluxes, ws.independents)])


# ---------------------------------------------------------------------------
# determining system
# ---------------------------------------------------------------------------


@dataclass
class DeterminingSystem:
    system: PdeSystem
    ansatz: MultiplierAnsatz
    unknowns: list
    arguments: tuple
    equations: list  # (dependent index, parametric signature text, Expr)

    def equations_only(self):
        return [e for (_, _, e) in self.equations]

    def check_family(self, candidates, constraints=None):
        """Substitute candidate expressions for the unknown multipliers into
        every split equation and reduce modulo the given constraints."""
        out = []
        for (_, _, eq) in self.equations:
            e = _instantiate_unknowns(eq, self.unknowns, self.arguments, candidates)
            if constraints is not None:
                e = constraints.reduce(e)
            out.append(e)
        return out


def _instantiate_unknowns(e, names, args, candidates):
    repl = {}
    for k in fun_kernels_of(e):
        if k.name in names:
            base = candidates[k.name]
            d = base
            for pos, o in enumerate(k.dmidx):
                for _ in range(o):
                    d = diff_atom(d, args[pos])
            repl[k] = d
    return substitute_kernels(e, repl)


def determining_system(sys, ansatz):
    """Form E_{U^sigma}(Lambda_nu G^nu), substitute the prolonged
    leading-solve rules, and split over parametric jet monomials."""
    ws = sys.workspace
    args = ansatz.arguments(sys)
    names = [f"L{nu + 1}" for nu in range(len(sys.equations))]
    lam = [Fun(nm, args) for nm in names]
    s = add(*[mul(l, g) for l, g in zip(lam, sys.equations)])
    arg_jets = {a for a in args if isinstance(a, Jet)}
    equations = []
    for sigma, dep in enumerate(ws.dependents):
        e = euler_operator(s, dep, ws)
        need = max(max_jet_order(e), sys.order)
        e = substitute(e, sys.prolonged_rules(need))
        for sig_text, coeff in _split_parametric(e, arg_jets):
            equations.append((sigma, sig_text, coeff))
    # deterministic order, deduplicated up to sign and rational content
    cleaned = []
    seen = set()
    for sigma, sig, eq in sorted(equations, key=lambda r: (r[0], r[1])):
        eqn = normalize_equation(eq)
        if is_zero(eqn):
            continue
        if eqn.key in seen:
            continue
        seen.add(eqn.key)
        cleaned.append((sigma, sig, eqn))
    return DeterminingSystem(system=sys, ansatz=ansatz, unknowns=names,
                             arguments=args, equations=cleaned)


def _split_parametric(e, arg_jets):
    """Collect coefficients of each monomial in jets outside the ansatz
    arguments.  The expression must be polynomial in those jets."""
    from .grammar import to_text
    from .expr import _build_mono

    groups = {}
    for coeff, fmap in _monos_of(e):
        par = {}
        rest = {}
        for k, n in fmap.items():
            if isinstance(k, Jet) and k not in arg_jets:
                if n < 0:
                    raise ExprError(f"parametric jet {k!r} occurs with negative power")
                par[k] = n
            else:
                for a in walk(k):
                    if isinstance(a, Jet) and a not in arg_jets:
                        raise ExprError(
                            f"parametric jet {a!r} occurs inside kernel {k!r}")
                rest[k] = n
        sig = tuple(sorted(((k.key, n) for k, n in par.items())))
        mono = _build_mono(coeff, rest)
        groups.setdefault(sig, []).append(mono)
    out = []
    for sig, monos in groups.items():
        label = "1" if not sig else to_text(
            _build_mono(Fraction(1), {k: n for k, n in
                                      [(_key_jet(kk), n) for kk, n in sig]}))
        out.append((label, add(*monos)))
    return out


_JET_CACHE = {}


def _key_jet(key):
    j = _JET_CACHE.get(key)
    if j is None:
        j = Jet(key[1], key[3])
        _JET_CACHE[key] = j
    return j


def normalize_equation(eq):
    """Strip a common invertible monomial factor and rational content; fix
    the sign so the leading coefficient is positive."""
    if is_zero(eq) or not isinstance(eq, Add):
        monos = _monos_of(eq)
        if len(monos) == 1 and not is_zero(eq):
            c, fmap = monos[0]
            keep = {k: n for k, n in fmap.items()
                    if isinstance(k, Fun) or _contains_fun(k)}
            from .expr import _build_mono
            return _build_mono(Fraction(1), keep)
        return eq
    monos = _monos_of(eq)
    common = None
    for _, fmap in monos:
        if common is None:
            common = dict(fmap)
        else:
            for k in list(common):
                n = fmap.get(k, 0)
                if n == 0 or (n > 0) != (common[k] > 0):
                    del common[k]
                else:
                    common[k] = min(common[k], n, key=abs)
    common = {k: n for k, n in (common or {}).items()
              if not (isinstance(k, Fun) or _contains_fun(k))}
    parts = []
    gcd_c = None
    from .expr import _build_mono
    for c, fmap in monos:
        fm = dict(fmap)
        for k, n in common.items():
            m = fm.get(k, 0) - n
            if m == 0:
                fm.pop(k, None)
            else:
                fm[k] = m
        gcd_c = c if gcd_c is None else _frac_gcd(gcd_c, c)
        parts.append((c, fm))
    lead = min(parts, key=lambda m: _mono_key_for_sort(m))
    scale = abs(gcd_c) if gcd_c else Fraction(1)
    if lead[0] < 0:
        scale = -scale
    return add(*[_build_mono(c / scale, fm) for c, fm in parts])


def _mono_key_for_sort(m):
    from .expr import _mono_sort_key

    return _mono_sort_key(m[0], m[1])


def _frac_gcd(a, b):
    from math import gcd

    num = gcd(abs(a.numerator), abs(b.numerator))
    den = a.denominator * b.denominator // gcd(a.denominator, b.denominator)
    return Fraction(num, den)


def _contains_fun(k):
    return any(isinstance(n, Fun) for n in walk(k))


# ---------------------------------------------------------------------------
# heuristic reducer
# ---------------------------------------------------------------------------


@dataclass
class ReducerResult:
    case: str                     # "II", "I", or "undetermined"
    family: MultiplierFamily | None
    residual_equations: list
    steps: list


def reduce_determining_system(det, coordinate_names=("X", "T", "Y", "Z")):
    """Heuristic integration of the split determining system.

    Handles, iteratively: algebraic elimination, removal of absent
    dependencies (g_xi = 0), potential introduction for exactness relations,
    first-order integrating factors (g_xi + a g = 0 with a free of xi), and
    transport equations g_xi + a g_eta = 0 integrated by characteristics.
    A single surviving linear PDE in one function of n variables is packaged
    as a multiplier family (Case II); everything else is reported as Case I
    or undetermined with the irreducible residual system."""
    state = _ReducerState(det.unknowns, det.arguments, det.equations_only())
    state.run()
    ws = det.system.workspace
    live = state.live_equations()
    components = [state.component(nm) for nm in det.unknowns]
    names = sorted({k.name for e in live for k in fun_kernels_of(e)} |
                   {k.name for c in components for k in fun_kernels_of(c)})
    if not any(fun_kernels_of(c) for c in components):
        return ReducerResult("I", None, live, state.steps)
    if len(names) == 1 and len(live) == 1 and state.arity(names[0]) == ws.n:
        fam = _package_family(state, components, names[0], live[0],
                              coordinate_names, ws)
        if fam is not None:
            return ReducerResult("II", fam, live, state.steps)
    return ReducerResult("undetermined", None, live, state.steps)


def reduce_family_constraints(fam, sys, coordinate_names=("X", "T", "Y", "Z")):
    """Integrate first-order constraint rows of a provided multiplier family
    by characteristics, reducing the number of coordinates its arbitrary
    function depends on.  Returns (family, steps); the family is repackaged
    over fresh coordinate aliases when the reduction reaches n composite
    arguments with a single surviving constraint row."""
    if fam.constraints is None or len(fam.function_names) != 1:
        return fam, []
    name = fam.function_names[0]
    defs = tuple(fam.definitions)
    inst_rows = [substitute(r, dict(zip(fam.coordinates, defs)))
                 for r in fam.constraints.rows]
    state = _ReducerState([name], defs, inst_rows)
    state.args[name] = defs
    state.run()
    live = state.live_equations()
    components = [state.rewrite_instance(c) for c in fam.components]
    names = sorted({k.name for e in live for k in fun_kernels_of(e)} |
                   {k.name for c in components for k in fun_kernels_of(c)})
    ws = sys.workspace
    if len(names) == 1 and len(live) == 1 and state.arity(names[0]) == ws.n:
        packed = _package_family(state, components, names[0], live[0],
                                 coordinate_names, ws)
        if packed is not None:
            return packed, state.steps
    return fam, state.steps


class _ReducerState:
    """Rewrites unknown-function kernels through accumulated substitutions.

    Substitutions are stored positionally: for an eliminated function g of
    arity r, `subs[g]` is an expression over the placeholder symbols
    _pos0.._pos{r-1} (plus kernels of surviving functions whose arguments are
    placeholder expressions).  Rewriting an instantiated kernel
    g_{K}(args) differentiates the stored expression with respect to the
    placeholders and substitutes the actual arguments."""

    def __init__(self, unknowns, arguments, equations):
        self.args = {nm: tuple(arguments) for nm in unknowns}
        self.equations = list(equations)
        self.subs = {}
        self.steps = []
        self.fresh = 0

    # -- bookkeeping --------------------------------------------------------

    def arity(self, name):
        return len(self.args[name])

    def new_name(self, base="f"):
        self.fresh += 1
        return f"{base}{self.fresh}"

    def placeholders(self, name):
        return PLACEHOLDERS[:self.arity(name)]

    def rewrite_instance(self, e):
        """Apply all substitutions to an expression with instantiated
        kernels, repeatedly until stable."""
        for _ in range(32):
            repl = {}
            for k in fun_kernels_of(e):
                if k.name in self.subs:
                    repl[k] = self._instance(k)
            if not repl:
                return e
            e = substitute_kernels(e, repl)
        raise ExprError("reducer substitution did not stabilize")

    def _instance(self, kernel):
        body = self.subs[kernel.name]
        ph = PLACEHOLDERS[:len(kernel.args)]
        d = body
        for pos, o in enumerate(kernel.dmidx):
            for _ in range(o):
                d = diff_atom(d, ph[pos])
        return substitute(d, dict(zip(ph, kernel.args)))

    def component(self, name):
        return self.rewrite_instance(Fun(name, self.args[name]))

    def live_equations(self):
        out = []
        seen = set()
        for eq in self.equations:
            e = normalize_equation(self.rewrite_instance(eq))
            if is_zero(e) or e.key in seen:
                continue
            seen.add(e.key)
            out.append(e)
        return out

    # -- the pass loop ------------------------------------------------------

    def run(self):
        for _ in range(64):
            self.equations = self.live_equations()
            if not self.equations:
                return
            if (self._pass_drop_dependency() or self._pass_algebraic()
                    or self._pass_potential() or self._pass_exponential()
                    or self._pass_transport()):
                continue
            return

    def _kernels(self, e):
        return [k for k in fun_kernels_of(e)
                if k.name in self.args and k.name not in self.subs]

    def _register(self, name, body, note):
        self.subs[name] = body
        self.steps.append(note)

    def _fun_free(self, e):
        return not self._kernels(e)

    # pass: c * g_K = 0 with a single kernel
    def _pass_drop_dependency(self):
        for eq in self.equations:
            ks = self._kernels(eq)
            if len(ks) != 1:
                continue
            k = ks[0]
            c = diff_atom(eq, k)
            if not self._fun_free(c) or not is_zero(sub(eq, mul(c, k))):
                continue
            if sum(k.dmidx) == 0:
                self._register(k.name, rat(0), f"{k.name} = 0 forced")
                return True
            if sum(k.dmidx) == 1:
                pos = next(i for i, o in enumerate(k.dmidx) if o)
                self._drop_argument(k.name, pos)
                return True
        return False

    def _drop_argument(self, name, pos):
        old_args = self.args[name]
        new_args = old_args[:pos] + old_args[pos + 1:]
        if not new_args:
            const = Sym(f"c{len(self.subs) + 1}", "parameter")
            self._register(name, const,
                           f"{name} depends on nothing: constant {const.name}")
            return
        new = self.new_name()
        self.args[new] = new_args
        ph = PLACEHOLDERS[:len(old_args)]
        body = Fun(new, tuple(ph[:pos] + ph[pos + 1:]))
        self._register(name, body,
                       f"{name} does not depend on argument {pos + 1}; "
                       f"renamed to {new}")

    # pass: solve one equation algebraically for an underived kernel
    def _pass_algebraic(self):
        for eq in self.equations:
            for k in self._kernels(eq):
                if sum(k.dmidx) != 0:
                    continue
                c = diff_atom(eq, k)
                if is_zero(c) or not self._fun_free(c):
                    continue
                rhs = neg(div(sub(eq, mul(c, k)), c))
                if any(kk.name == k.name for kk in self._kernels(rhs)):
                    continue
                body = self._to_placeholders(rhs, k.name, k.args)
                if body is None:
                    continue
                self._register(k.name, body, f"{k.name} eliminated algebraically")
                return True
        return False

    def _to_placeholders(self, e, name, args):
        """Express `e` over the placeholders of `name`: actual argument
        atoms map to placeholder symbols; any other atom outside surviving
        kernels blocks the substitution."""
        ph = PLACEHOLDERS[:len(args)]
        mapping = {}
        for a, p in zip(args, ph):
            if not isinstance(a, (Sym, Jet)):
                return None
            mapping[a] = p
        out = substitute(e, mapping)
        for a in atoms_of(out):
            if isinstance(a, Fun):
                continue
            if a in ph:
                continue
            if isinstance(a, Sym) and a.kind == "parameter":
                continue
            return None
        return out

    # pass: exactness  c*(g1_xi - g2_eta) = 0  ->  potential
    def _pass_potential(self):
        for eq in self.equations:
            ks = self._kernels(eq)
            if len(ks) != 2:
                continue
            k1, k2 = ks
            if k1.name == k2.name or k1.args != k2.args:
                continue
            if sum(k1.dmidx) != 1 or sum(k2.dmidx) != 1:
                continue
            p1 = next(i for i, o in enumerate(k1.dmidx) if o)
            p2 = next(i for i, o in enumerate(k2.dmidx) if o)
            if p1 == p2:
                continue
            c1, c2 = diff_atom(eq, k1), diff_atom(eq, k2)
            if not is_zero(add(c1, c2)) or not self._fun_free(c1):
                continue
            if not (is_zero(sub(c1, rat(1))) or is_zero(add(c1, rat(1)))):
                continue
            # c*(g1_{p1} - g2_{p2}) = 0: closed form, introduce h with
            # g1 = h_{p2}, g2 = h_{p1}
            g1, g2 = k1.name, k2.name
            if is_zero(add(c1, rat(1))):
                g1, g2, p1, p2 = g2, g1, p2, p1
            h = self.new_name()
            self.args[h] = self.args[g1]
            ph = PLACEHOLDERS[:len(self.args[g1])]
            d1 = [0] * len(ph)
            d1[p2] = 1
            d2 = [0] * len(ph)
            d2[p1] = 1
            self._register(g1, Fun(h, tuple(ph), tuple(d1)),
                           f"potential {h}: {g1} = {h}_pos{p2 + 1}")
            self._register(g2, Fun(h, tuple(ph), tuple(d2)),
                           f"potential {h}: {g2} = {h}_pos{p1 + 1}")
            return True
        return False

    # pass: g_xi + a*g = 0 with a free of xi -> g = exp(-a xi) h(rest)
    def _pass_exponential(self):
        for eq in self.equations:
            ks = self._kernels(eq)
            if len(ks) != 2:
                continue
            names = {k.name for k in ks}
            if len(names) != 1:
                continue
            under = [k for k in ks if sum(k.dmidx) == 0]
            first = [k for k in ks if sum(k.dmidx) == 1]
            if len(under) != 1 or len(first) != 1:
                continue
            g = under[0]
            gk = first[0]
            pos = next(i for i, o in enumerate(gk.dmidx) if o)
            c1 = diff_atom(eq, gk)
            c0 = diff_atom(eq, g)
            if not (self._fun_free(c0) and self._fun_free(c1)):
                continue
            a = div(c0, c1)
            body_a = self._to_placeholders(a, g.name, g.args)
            if body_a is None:
                continue
            ph = PLACEHOLDERS[:len(g.args)]
            if not is_zero(diff_atom(body_a, ph[pos])):
                continue
            new = self.new_name()
            self.args[new] = self.args[g.name][:pos] + self.args[g.name][pos + 1:]
            hk = Fun(new, tuple(ph[:pos] + ph[pos + 1:]))
            body = mul(exp_(neg(mul(body_a, ph[pos]))), hk)
            self._register(g.name, body,
                           f"{g.name} integrated: factor exp(-a*arg{pos + 1})")
            return True
        return False

    # pass: transport g_xi + a*g_eta = 0 by characteristics
    def _pass_transport(self):
        for eq in self.equations:
            ks = self._kernels(eq)
            if len(ks) != 2:
                continue
            k1, k2 = ks
            if k1.name != k2.name or sum(k1.dmidx) != 1 or sum(k2.dmidx) != 1:
                continue
            p1 = next(i for i, o in enumerate(k1.dmidx) if o)
            p2 = next(i for i, o in enumerate(k2.dmidx) if o)
            if p1 == p2:
                continue
            c1, c2 = diff_atom(eq, k1), diff_atom(eq, k2)
            if not (self._fun_free(c1) and self._fun_free(c2)):
                continue
            name = k1.name
            args = self.args[name]
            orderings = sorted([(p1, p2, c1, c2), (p2, p1, c2, c1)],
                               key=lambda o: o[0])
            for (pj, pk, cj, ck) in orderings:
                a = div(ck, cj)  # g_{pj} + a g_{pk} = 0
                inv = self._invariant(a, args, pj, pk)
                if inv is None:
                    continue
                new = self.new_name()
                ph = PLACEHOLDERS[:len(args)]
                new_ph = []
                new_args_actual = []
                for i, arg in enumerate(args):
                    if i == pk:
                        continue
                    if i == pj:
                        new_ph.append(inv)
                        new_args_actual.append(substitute(inv, dict(zip(ph, args))))
                    else:
                        new_ph.append(ph[i])
                        new_args_actual.append(arg)
                self.args[new] = tuple(new_args_actual)
                body = Fun(new, tuple(new_ph))
                self._register(name, body,
                               f"{name} rides characteristics of args "
                               f"{pj + 1},{pk + 1}; new function {new}")
                return True
        return False

    def _invariant(self, a, args, pj, pk):
        """Characteristic invariant of d(arg_pk)/d(arg_pj) = a, written over
        placeholders.  Catalog: a a nonzero rational, and a = c * arg_pk."""
        ph = PLACEHOLDERS[:len(args)]
        # a rational constant
        from .expr import Rat
        if isinstance(a, Rat) and a.value != 0:
            return sub(ph[pj], div(ph[pk], a))
        # a = c * arg_pk with rational c
        c = div(a, args[pk])
        if isinstance(c, Rat) and c.value != 0:
            return sub(ph[pj], div(log_(ph[pk]), c))
        return None


def _package_family(state, components, fname, constraint, coordinate_names, ws):
    """Build a MultiplierFamily from reducer output: one surviving function
    of n composite arguments with a single linear constraint."""
    defs = state.args[fname]
    declared = {s.name for s in ws.independents} | set(ws.dependents)

    def fresh_names():
        for nm in coordinate_names:
            if nm not in declared:
                yield nm
        i = 1
        while True:
            nm = f"X{i}"
            if nm not in declared:
                yield nm
            i += 1

    names_iter = fresh_names()
    coord_syms = tuple(Sym(next(names_iter), "coordinate") for _ in defs)
    formal = _formalize(constraint, fname, defs, coord_syms)
    if formal is None:
        return None
    try:
        cons = LinearConstraints({fname: coord_syms}, [formal])
    except ExprError:
        return None
    return MultiplierFamily(components=components, function_names=[fname],
                            coordinates=coord_syms, definitions=tuple(defs),
                            constraints=cons)


def _formalize(eq, fname, defs, coord_syms):
    """Re-express an instantiated constraint over formal coordinates.
    Coefficients must be rational or literally match a coordinate
    definition."""
    repl = {}
    for k in fun_kernels_of(eq):
        if k.name != fname or tuple(k.args) != tuple(defs):
            return None
        repl[k] = Fun(fname, coord_syms, k.dmidx)
    e = substitute_kernels(eq, repl)
    for i, d in enumerate(defs):
        if isinstance(d, (Sym, Jet)):
            e = substitute(e, {d: coord_syms[i]})
    for a in atoms_of(e):
        if isinstance(a, Fun):
            continue
        if a in coord_syms or (isinstance(a, Sym) and a.kind == "parameter"):
            continue
        return None
    return e


# ---------------------------------------------------------------------------
# divergence test and flux reconstruction
# ---------------------------------------------------------------------------


def is_divergence(e, ws):
    """True iff every Euler image vanishes; on success also a flux witness."""
    for dep in ws.dependents:
        if not is_zero(euler_operator(e, dep, ws)):
            return False, None
    return True, reconstruct_fluxes(e, ws)


def reconstruct_fluxes(e, ws):
    """Write a total divergence as D_i Upsilon_i.

    An integration-by-parts sweep absorbs the highest-ranked jets first (it
    also handles transcendental kernels); when the sweep cannot finish and
    the expression is polynomial in its jets, the homotopy-operator formula
    with higher Euler operators takes over."""
    for dep in ws.dependents:
        if not is_zero(euler_operator(e, dep, ws)):
            raise NotADivergenceError("nonzero Euler image; not a total divergence")
    n = ws.n
    fluxes = [rat(0)] * n
    s = e
    for _ in range(400):
        if is_zero(s):
            return fluxes
        js = [j for j in jets_of(s) if j.order >= 1]
        if not js:
            s2 = _absorb_jet_free(s, fluxes, ws)
            if s2 is None:
                break
            s = s2
            continue
        m = max(js, key=lambda j: jet_rank(ws, j))
        s2 = _absorb(s, m, fluxes, ws)
        if s2 is None:
            break
        s = s2
    if is_zero(s):
        return fluxes
    rest = _homotopy_fluxes(s, ws)
    if rest is None:
        raise NotADivergenceError("flux reconstruction failed on a "
                                  "non-polynomial remainder")
    return [add(f, r) for f, r in zip(fluxes, rest)]


def higher_euler(e, dep, K, ws):
    """E^(K): sum over jets J >= K of binom(J, K) (-D)^(J-K) d e/d u_J."""
    from math import comb

    names = [s.name for s in ws.independents]
    terms = []
    for j in jets_of(e, dep):
        jv = tuple(dict(j.midx).get(nm, 0) for nm in names)
        if not all(a >= b for a, b in zip(jv, K)):
            continue
        d = diff_atom(e, j)
        if is_zero(d):
            continue
        binom = 1
        for a, b in zip(jv, K):
            binom *= comb(a, b)
        delta = tuple(a - b for a, b in zip(jv, K))
        sign = rat(-1) if sum(delta) % 2 else rat(1)
        from .expr import total_derivative
        for i, o in enumerate(delta):
            for _ in range(o):
                d = total_derivative(d, ws.independents[i])
        terms.append(mul(rat(binom), sign, d))
    return add(*terms) if terms else rat(0)


def _homotopy_fluxes(e, ws):
    """Scaling-homotopy fluxes for expressions polynomial in the jets:
    Upsilon_i = sum_sigma sum_{K, K_i >= 1} (K_i/|K|)
                D^(K - e_i)[ u^sigma E^(K)(e) ], followed by the exact
    lambda-integration (each monomial divided by its jet degree)."""
    from .expr import total_derivative, _build_mono

    for _, fmap in _monos_of(e):
        for k in fmap.keys():
            if not isinstance(k, Jet) and any(isinstance(a, Jet) for a in walk(k)):
                return None
    jet_zero = {j: rat(0) for j in jets_of(e)}
    base = substitute(e, jet_zero)
    work = sub(e, base)
    names = [s.name for s in ws.independents]
    n = ws.n
    raw = [rat(0)] * n
    kset = set()
    for j in jets_of(work):
        jv = tuple(dict(j.midx).get(nm, 0) for nm in names)
        for K in _sub_multis_upto(jv):
            if sum(K) >= 1:
                kset.add(K)
    for dep in ws.dependents:
        u0 = Jet(dep, ())
        for K in sorted(kset):
            ek = higher_euler(work, dep, K, ws)
            if is_zero(ek):
                continue
            body = mul(u0, ek)
            for i in range(n):
                if K[i] < 1:
                    continue
                d = body
                J = K[:i] + (K[i] - 1,) + K[i + 1:]
                for ii, o in enumerate(J):
                    for _ in range(o):
                        d = total_derivative(d, ws.independents[ii])
                raw[i] = add(raw[i], mul(rat(K[i], sum(K)), d))
    fluxes = []
    for r in raw:
        parts = []
        for coeff, fmap in _monos_of(r):
            deg = sum(nn for kk, nn in fmap.items() if isinstance(kk, Jet))
            if deg <= 0:
                return None
            parts.append(_build_mono(coeff / deg, dict(fmap)))
        fluxes.append(add(*parts) if parts else rat(0))
    if not is_zero(base):
        extra = [rat(0)] * n
        left = _absorb_jet_free(base, extra, ws)
        while left is not None and not is_zero(left):
            left = _absorb_jet_free(left, extra, ws)
        if left is None:
            return None
        fluxes = [add(f, x) for f, x in zip(fluxes, extra)]
    return fluxes


def _sub_multis_upto(jv):
    if not jv:
        yield ()
        return
    for first in range(jv[0] + 1):
        for rest in _sub_multis_upto(jv[1:]):
            yield (first,) + rest


def _absorb(s, m, fluxes, ws):
    directions = [i for i, sym in enumerate(ws.independents)
                  if dict(m.midx).get(sym.name, 0) >= 1]
    best = None
    for i in directions:
        sym = ws.independents[i]
        mp = m.bump(sym.name, -1)
        split = _power_split(s, m, mp)
        if split is None:
            continue
        terms, rest = split
        penalty = 0
        for c, _a in terms:
            for j in jets_of(c):
                jb = j.bump(sym.name)
                if jet_rank(ws, jb) >= jet_rank(ws, m):
                    penalty += 1
        cand = (penalty, i, terms, rest, mp)
        if best is None or cand[0] < best[0]:
            best = cand
        if penalty == 0:
            break
    if best is None:
        return None
    _, i, terms, rest, mp = best
    sym = ws.independents[i]
    from .expr import total_derivative
    new_terms = [rest]
    for c, a in terms:
        theta = mul(c, pow_int(mp, a + 1), rat(1, a + 1))
        fluxes[i] = add(fluxes[i], theta)
        new_terms.append(neg(mul(total_derivative(c, sym),
                                 pow_int(mp, a + 1), rat(1, a + 1))))
    return add(*new_terms)


def _power_split(s, m, mp):
    """Split s = sum_a c_a * mp^a * m + rest, with each c_a free of m and mp.
    Returns None when m occurs nonlinearly or inside another kernel."""
    from .expr import _build_mono

    terms = {}
    rest = []
    for coeff, fmap in _monos_of(s):
        n_m = fmap.get(m, 0)
        if n_m == 0:
            for k in fmap:
                if any(j == m for j in jets_of(k)):
                    return None
            rest.append(_build_mono(coeff, dict(fmap)))
            continue
        if n_m != 1:
            return None
        a = fmap.get(mp, 0)
        if a < 0:
            return None
        fm = {k: v for k, v in fmap.items() if k not in (m, mp)}
        for k in fm:
            if any(j == m or j == mp for j in jets_of(k)):
                return None
        c = _build_mono(coeff, fm)
        terms.setdefault(a, []).append(c)
    out = [(add(*cs), a) for a, cs in sorted(terms.items())]
    return out, add(*rest) if rest else rat(0)


def _absorb_jet_free(s, fluxes, ws):
    """Remainder without derivative jets: integrate explicitly in the first
    variable admitting a closed-form antiderivative."""
    from .expr import total_derivative

    for i, v in enumerate(ws.independents):
        theta = _antiderivative(s, v)
        if theta is not None:
            fluxes[i] = add(fluxes[i], theta)
            return sub(s, total_derivative(theta, v))
    return None


def _antiderivative(s, x):
    """Exact antiderivative for sums of monomials x^n * exp(a*x + b) * rest
    with `rest` free of x; None when any monomial falls outside that class."""
    from .expr import ExpF, _build_mono

    parts = []
    for coeff, fmap in _monos_of(s):
        n = fmap.get(x, 0)
        if n < 0:
            return None
        expk = None
        for k in fmap:
            if k == x:
                continue
            if any(a == x for a in atoms_of(k)):
                if isinstance(k, ExpF) and fmap[k] == 1 and expk is None:
                    expk = k
                else:
                    return None
        fm = {k: v for k, v in fmap.items() if k != x}
        if expk is None:
            fm[x] = n + 1
            parts.append(_build_mono(coeff / (n + 1), fm))
            continue
        a = diff_atom(expk.arg, x)
        if is_zero(a) or not is_zero(diff_atom(a, x)) or jets_of(a) \
                or fun_kernels_of(a):
            return None
        # integrate g(x) * e^{a x + ...} by parts, descending in deg(g)
        fm.pop(expk)
        g = _build_mono(coeff, fm)
        acc = rat(0)
        factor = div(rat(1), a)
        for _ in range(n + 2):
            if is_zero(g):
                break
            acc = add(acc, mul(factor, g))
            g = neg(mul(factor, diff_atom(g, x)))
        parts.append(mul(acc, expk))
    return add(*parts)

