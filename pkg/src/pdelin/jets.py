"""Jet-space calculus: PDE systems, leading-derivative solving, prolonged
substitution rules, Euler (variational) operators, and verification of
infinitesimal symmetries in evolutionary form."""

from __future__ import annotations

from dataclasses import dataclass, field

from .constraints import LinearConstraints
from .errors import CyclicRuleError, ExprError, WorkspaceError
from .expr import (Jet, add, diff_atom, div, is_zero, jets_of,
                   max_jet_order, mul, neg, rat, sub, substitute,
                   total_derivative)


def jet_rank(ws, j):
    vec = tuple(dict(j.midx).get(s.name, 0) for s in ws.independents)
    return (j.order, ws.dep_index(j.dep), vec)


def leading_solve(ws, equation):
    """Solve an equation for its highest-ranked jet, if linear in it."""
    js = jets_of(equation)
    if not js:
        raise ExprError("equation contains no jet variables")
    for j in sorted(js, key=lambda j: jet_rank(ws, j), reverse=True):
        c = diff_atom(equation, j)
        if is_zero(c) or not is_zero(diff_atom(c, j)):
            continue
        rest = sub(equation, mul(c, j))
        return j, neg(div(rest, c))
    raise ExprError("no jet occurs linearly; cannot form a leading solve")


class PdeSystem:
    """A declared system {G^nu[u] = 0} with optional leading-solve overrides."""

    def __init__(self, workspace, equations, leading=None, names=None):
        self.workspace = workspace
        self.equations = list(equations)
        self.names = list(names) if names else [f"G{i+1}" for i in range(len(equations))]
        self.order = max((max_jet_order(g) for g in self.equations), default=0)
        self.leading = {}
        leading = leading or {}
        for i, g in enumerate(self.equations):
            if i in leading:
                jet = leading[i]
                c = diff_atom(g, jet)
                if is_zero(c) or not is_zero(diff_atom(c, jet)):
                    raise ExprError(f"equation {self.names[i]} is not linear in {jet!r}")
                solved = neg(div(sub(g, mul(c, jet)), c))
            else:
                jet, solved = leading_solve(workspace, g)
            if not is_zero(substitute(g, {jet: solved})):
                raise ExprError(f"leading solve for {self.names[i]} does not close")
            self.leading[i] = (jet, solved)

    @property
    def m(self):
        return self.workspace.m

    @property
    def n(self):
        return self.workspace.n

    def leading_rules(self):
        return {jet: solved for jet, solved in self.leading.values()}

    def prolonged_rules(self, order):
        return prolong_rules(self.leading_rules(), order, self.workspace,
                             complete=True)

    def reduce_on_solutions(self, e, order=None):
        if order is None:
            order = max(max_jet_order(e), self.order)
        return substitute(e, self.prolonged_rules(order))


def prolong_rules(rules, order, ws, complete=False):
    """Close a jet substitution-rule set under total differentiation up to
    the given order.

    Cross-derivative targets reachable from several base rules are derived
    from the lexicographically smallest base.  With `complete=True`,
    disagreements between derivation paths (integrability consequences of
    the base rules) are solved for their own leading jet and added to the
    rule set, so the result cuts out the full solution manifold."""
    for jet, rhs in rules.items():
        for j2 in rules:
            if any(j == j2 for j in jets_of(rhs)):
                raise CyclicRuleError(
                    f"rule right-hand side for {jet!r} contains ruled jet {j2!r}")

    base_rules = dict(rules)
    for _ in range(8):
        out, conflict = _close_rules(base_rules, order, ws, complete)
        if conflict is None:
            return out
        jet, solved = leading_solve(ws, conflict)
        if jet in base_rules:
            raise CyclicRuleError(
                f"integrability condition re-solves ruled jet {jet!r}")
        base_rules[jet] = substitute(solved, out)
    raise CyclicRuleError("rule completion did not stabilize")


def _close_rules(rules, order, ws, complete):
    def vec(j):
        return tuple(dict(j.midx).get(s.name, 0) for s in ws.independents)

    names = [s.name for s in ws.independents]
    out = dict(rules)
    targets = {}
    for j in rules:
        base = vec(j)
        free = order - j.order
        if free < 0:
            continue
        for delta in _multi_indices(len(names), free):
            tv = tuple(b + d for b, d in zip(base, delta))
            t = Jet(j.dep, tuple(zip(names, tv)))
            if t in out or sum(tv) == sum(base):
                continue
            targets.setdefault(t, []).append(j)

    def derive(base, t):
        d = out[base]
        bvec, tvec = vec(base), vec(t)
        for i, name in enumerate(names):
            for _ in range(tvec[i] - bvec[i]):
                d = total_derivative(d, ws.independent(name))
        for _ in range(16):
            d2 = substitute(d, out)
            if d2 == d:
                return d
            d = d2
        raise CyclicRuleError("prolonged rule did not stabilize under self-substitution")

    for t in sorted(targets, key=lambda j: jet_rank(ws, j)):
        bases = sorted(targets[t], key=lambda b: (-b.order, vec(b)))
        d = derive(bases[0], t)
        out[t] = d
        if complete:
            for other in bases[1:]:
                gap = sub(d, derive(other, t))
                if not is_zero(gap):
                    return out, gap
    return out, None


def _multi_indices(n, total_max):
    if n == 0:
        yield ()
        return
    for first in range(total_max + 1):
        for rest in _multi_indices(n - 1, total_max - first):
            yield (first,) + rest


def euler_operator(e, dep, ws):
    """Variational derivative with respect to one dependent:
    sum over jets J of (-D)^J (d e / d U_J)."""
    terms = []
    for j in jets_of(e, dep):
        d = diff_atom(e, j)
        if is_zero(d):
            continue
        sign = rat(-1) if j.order % 2 else rat(1)
        for v, o in j.midx:
            s = ws.independent(v)
            for _ in range(o):
                d = total_derivative(d, s)
        terms.append(mul(sign, d))
    return add(*terms) if terms else rat(0)


@dataclass
class SymmetryGenerator:
    """Infinitesimal generator with components xi_i d/dx_i + eta^tau d/du^tau;
    components may carry arbitrary-function kernels constrained by a linear
    system."""

    xi: tuple
    eta: tuple
    constraints: LinearConstraints | None = None


@dataclass
class SymmetryReport:
    ok: bool
    residuals: list
    messages: list = field(default_factory=list)


def verify_point_symmetry(sys, gen):
    """Check a (point or contact) symmetry in evolutionary form: the
    characteristic is eta^tau - xi_i u^tau_{x_i}; its prolonged action on
    each equation must vanish after leading-solve substitution and
    constraint reduction."""
    ws = sys.workspace
    if len(gen.xi) != ws.n or len(gen.eta) != ws.m:
        raise WorkspaceError("generator component counts do not match the system")
    chars = []
    for tau, dep in enumerate(ws.dependents):
        parts = [gen.eta[tau]]
        for i, s in enumerate(ws.independents):
            parts.append(neg(mul(gen.xi[i], Jet(dep, ((s.name, 1),)))))
        chars.append(add(*parts))

    residuals = []
    messages = []
    for idx, g in enumerate(sys.equations):
        action_terms = []
        for tau, dep in enumerate(ws.dependents):
            for j in jets_of(g, dep):
                coeff = diff_atom(g, j)
                if is_zero(coeff):
                    continue
                d = chars[tau]
                for v, o in j.midx:
                    s = ws.independent(v)
                    for _ in range(o):
                        d = total_derivative(d, s)
                action_terms.append(mul(d, coeff))
        action = add(*action_terms) if action_terms else rat(0)
        need = max(max_jet_order(action), sys.order)
        reduced = substitute(action, sys.prolonged_rules(need))
        if gen.constraints is not None:
            reduced = gen.constraints.reduce(reduced)
        residuals.append(reduced)
        if not is_zero(reduced):
            messages.append(f"{sys.names[idx]}: nonzero residual")
    return SymmetryReport(ok=all(is_zero(r) for r in residuals),
                          residuals=residuals, messages=messages)
