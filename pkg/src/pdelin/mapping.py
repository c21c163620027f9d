"""Point and contact transformations: exact change of variables in jet
space, inversion for the closed-form patterns the corpus needs (componentwise
linear solves plus exp/log kernels), solution transport, and comparison of
systems up to nonzero factors."""

from __future__ import annotations

from dataclasses import dataclass, field
import random

from .errors import DegenerateError, ExprError
from .expr import (ExpF, Jet, Sym, add, atoms_of, diff_atom, diff_kernel,
                   div, exp_, is_zero, jets_of, log_, mul, neg, pow_int, rat,
                   sub, substitute, total_derivative, walk)
from .jets import PdeSystem, jet_rank
from .linalg import adjugate, det
from .probe import DomainError, probe_nonzero, random_assignment
from .workspace import Workspace


@dataclass
class Transformation:
    """z = phi(x, u[, du]), w = psi(x, u[, du]); contact transformations
    additionally carry rho with w_{z_i} = rho_i and satisfy the contact
    condition D_x psi = rho . D_x phi."""

    kind: str
    source: Workspace
    target: Workspace
    phi: tuple
    psi: tuple
    rho: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("point", "contact"):
            raise ExprError(f"unknown transformation kind '{self.kind}'")
        if self.kind == "contact" and self.source.m != 1:
            raise ExprError("contact transformations require one dependent variable")
        if len(self.phi) != self.source.n or len(self.psi) != self.source.m:
            raise ExprError("transformation component counts do not match")
        max_order = 1 if self.kind == "contact" else 0
        for e in list(self.phi) + list(self.psi):
            for j in jets_of(e):
                if j.order > max_order:
                    raise ExprError(
                        f"{self.kind} transformation component depends on {j!r}")

    def jacobian_matrix(self):
        return [[total_derivative(p, xj) for p in self.phi]
                for xj in self.source.independents]

    def jacobian(self):
        return det(self.jacobian_matrix())


def check_contact_condition(tr):
    """D_{x_j} psi - sum_i rho_i D_{x_j} phi_i == 0 for every j."""
    if tr.kind != "contact" or tr.rho is None:
        raise ExprError("contact condition requires a contact transformation with rho")
    psi = tr.psi[0]
    for xj in tr.source.independents:
        lhs = total_derivative(psi, xj)
        rhs = add(*[mul(r, total_derivative(p, xj))
                    for r, p in zip(tr.rho, tr.phi)])
        if not is_zero(sub(lhs, rhs)):
            return False
    return True


def lift_point_to_contact(tr):
    """Attach rho to a point transformation of a scalar system by solving
    the contact condition (always consistent when the Jacobian is regular)."""
    amat = tr.jacobian_matrix()
    psi = tr.psi[0]
    rhs = [total_derivative(psi, xj) for xj in tr.source.independents]
    from .linalg import solve

    rho = solve(amat, rhs)
    return Transformation("contact", tr.source, tr.target, tr.phi, tr.psi,
                          tuple(rho))


# ---------------------------------------------------------------------------
# inversion
# ---------------------------------------------------------------------------


def _probe_nonzero_robust(e, seed=None):
    if is_zero(e):
        return False
    from .probe import default_probe_seed
    rng = random.Random(default_probe_seed() + 5 if seed is None else seed)
    for _ in range(12):
        try:
            if probe_nonzero(e, random_assignment(e, rng)):
                return True
        except DomainError:
            continue
    return False


def invert_transformation(tr):
    """Closed-form inverse by sequential solving: each pass solves one
    source atom from one equation, linearly or through a single exp kernel.
    Returns (inverse Transformation, substitution dict old-atom -> new
    expression), or (None, None) when no closed form is found."""
    src, tgt = tr.source, tr.target
    unknowns = list(src.independents) + [src.lookup(d) for d in src.dependents]
    if tr.kind == "contact":
        dep = src.dependents[0]
        unknowns += [Jet(dep, ((s.name, 1),)) for s in src.independents]
    pairs = []
    for i, p in enumerate(tr.phi):
        pairs.append((p, tgt.independents[i]))
    for s, p in enumerate(tr.psi):
        pairs.append((p, tgt.lookup(tgt.dependents[s])))
    if tr.kind == "contact":
        if tr.rho is None:
            raise ExprError("contact transformation lacks rho components")
        for i, r in enumerate(tr.rho):
            pairs.append((r, Jet(tgt.dependents[0],
                                 ((tgt.independents[i].name, 1),))))
    solution = {}
    remaining = list(unknowns)
    # identity components alias source and target atoms outright
    for lhs, rhs in pairs:
        if lhs == rhs and lhs in remaining:
            solution[lhs] = rhs
            remaining.remove(lhs)
    equations = [sub(lhs, rhs) for lhs, rhs in pairs]
    for _ in range(len(unknowns) + 1):
        if not remaining:
            break
        progress = False
        for eq in equations:
            e = substitute(eq, solution)
            if is_zero(e):
                continue
            for y in list(remaining):
                val = _solve_for(e, y, remaining)
                if val is None:
                    continue
                solution[y] = val
                remaining.remove(y)
                solution = {k: substitute(v, {y: val}) for k, v in solution.items()}
                progress = True
                break
            if progress:
                break
        if not progress:
            break
    if remaining:
        return None, None
    # consistency: every equation vanishes under the solution
    for eq in equations:
        if not is_zero(substitute(eq, solution)):
            return None, None
    inv_phi = tuple(solution[x] for x in src.independents)
    inv_psi = tuple(solution[src.lookup(d)] for d in src.dependents)
    inv_rho = None
    if tr.kind == "contact":
        dep = src.dependents[0]
        inv_rho = tuple(solution[Jet(dep, ((s.name, 1),))]
                        for s in src.independents)
    inv = Transformation(tr.kind, tgt, src, inv_phi, inv_psi, inv_rho)
    return inv, solution


def _free_of(e, atoms):
    present = set(atoms_of(e))
    return not any(a in present for a in atoms)


def _solve_for(e, y, unsolved):
    """Solve e == 0 for atom y: linear occurrence, or a single exp kernel
    with argument linear in y."""
    others = [u for u in unsolved if u != y]
    c = diff_atom(e, y)
    if not is_zero(c) and is_zero(diff_atom(c, y)) and _free_of(c, unsolved):
        rest = sub(e, mul(c, y))
        if _free_of(rest, unsolved):
            val = neg(div(rest, c))
            if _probe_nonzero_robust(c) or not _contains_jets_or_deps(c):
                return val
    # c*exp(a*y + d) + r == 0   or   c*log(a*y + d) + r == 0
    from .expr import LogF

    for k in walk(e):
        if not isinstance(k, (ExpF, LogF)):
            continue
        a = diff_atom(k.arg, y)
        if is_zero(a) or not is_zero(diff_atom(a, y)) or not _free_of(a, unsolved):
            continue
        ck = diff_kernel(e, k)
        if is_zero(ck) or not _free_of(ck, unsolved) or not is_zero(diff_kernel(ck, k)):
            continue
        r = sub(e, mul(ck, k))
        if not _free_of(r, unsolved) or not _free_of(r, [y]):
            continue
        d = sub(k.arg, mul(a, y))
        if not _free_of(d, [y]):
            continue
        target = neg(div(r, ck))
        try:
            if isinstance(k, ExpF):
                return div(sub(log_(target), d), a)
            return div(sub(exp_(target), d), a)
        except ExprError:
            continue
    return None


def _contains_jets_or_deps(e):
    return bool(jets_of(e))


# ---------------------------------------------------------------------------
# applying a transformation to a system
# ---------------------------------------------------------------------------


@dataclass
class MappingReport:
    equations: list
    system: PdeSystem | None
    stripped_factors: list
    messages: list = field(default_factory=list)


def apply_transformation(sys, tr, build_system=True):
    """Rewrite a system in the transformation's target variables.

    Needs the closed-form inverse: old independents/dependents (and, for
    contact maps, first-order jets) as expressions of the new ones.  Old
    jets lift through D_{x_i} = (Dz/Dx-inverse chain) D_{z_j}; each
    transformed equation is cleared of an overall nonzero factor, recorded
    in the report."""
    if sys.workspace is not tr.source:
        raise ExprError("transformation source workspace differs from the system's")
    jac = tr.jacobian()
    if is_zero(jac) or not _probe_nonzero_robust(jac):
        raise DegenerateError("transformation Jacobian vanishes")
    if tr.kind == "contact" and not check_contact_condition(tr):
        raise ExprError("contact condition violated")
    inv, solution = invert_transformation(tr)
    if inv is None:
        raise ExprError("no closed-form inverse available for this transformation")

    src, tgt = tr.source, tr.target
    # matrix of D_{z_j}(old x_i) over the target jet space
    amat = [[total_derivative(solution[xi], zj) for xi in src.independents]
            for zj in tgt.independents]
    detb = det(amat)
    if is_zero(detb):
        raise DegenerateError("inverse Jacobian matrix is singular")
    cof = adjugate(amat)

    cache = {}
    for i, xi in enumerate(src.independents):
        cache[xi] = solution[xi]
    for depname in src.dependents:
        cache[src.lookup(depname)] = solution[src.lookup(depname)]
    if tr.kind == "contact":
        dep = src.dependents[0]
        for s in src.independents:
            j = Jet(dep, ((s.name, 1),))
            cache[j] = solution[j]

    def old_jet(j):
        if j in cache:
            return cache[j]
        var, _ = max(j.midx, key=lambda vo: vo[1])
        lower = j.bump(var, -1)
        base = old_jet(lower)
        i = next(i for i, s in enumerate(src.independents) if s.name == var)
        num = add(*[mul(cof[i][jj], total_derivative(base, tgt.independents[jj]))
                    for jj in range(tgt.n)])
        val = div(num, detb)
        cache[j] = val
        return val

    raw_eqs = []
    factors = []
    for g in sys.equations:
        rules = {}
        for a in atoms_of(g):
            if isinstance(a, Sym) and a.kind == "independent":
                rules[a] = cache[a]
            elif isinstance(a, Jet):
                rules[a] = old_jet(a)
        moved = substitute(g, rules)
        cleared, factor = _clear_equation(moved)
        raw_eqs.append(cleared)
        factors.append(factor)
    new_eqs, messages = _triangularize(raw_eqs, tgt)
    system = None
    if build_system:
        try:
            system = PdeSystem(tgt, new_eqs)
        except ExprError as exc:
            messages.append(f"transformed equations do not close: {exc}")
    return MappingReport(equations=new_eqs, system=system,
                         stripped_factors=factors, messages=messages)


def _triangularize(eqs, ws):
    """Fraction-free reduction of each transformed equation modulo the
    previous ones; change of variables mixes target rows by the invertible
    factor matrix, and this restores a row-per-row presentation."""
    from .jets import jet_rank
    from .expr import total_derivative

    messages = []
    out = []
    pivots = []  # (leading jet, equation)
    for idx, eq in enumerate(eqs):
        for _ in range(64):
            target = None
            for j in sorted(jets_of(eq), key=lambda j: jet_rank(ws, j), reverse=True):
                for lead, red in pivots:
                    if j.dep == lead.dep and _midx_geq(j, lead):
                        target = (j, lead, red)
                        break
                if target:
                    break
            if target is None:
                break
            j, lead, red = target
            r = red
            for v, o in _midx_diff(j, lead):
                s = ws.independent(v)
                for _ in range(o):
                    r = total_derivative(r, s)
            ce = diff_atom(eq, j)
            cr = diff_atom(r, j)
            if not is_zero(diff_atom(ce, j)) or not is_zero(diff_atom(cr, j)):
                messages.append(f"equation {idx + 1}: nonlinear pivot, reduction skipped")
                break
            eq = sub(mul(cr, eq), mul(ce, r))
        eq, _ = _clear_equation(eq)
        if is_zero(eq):
            messages.append(f"equation {idx + 1} is a consequence of the others")
            out.append(eq)
            continue
        out.append(eq)
        js = jets_of(eq)
        if js:
            lead = max(js, key=lambda j: jet_rank(ws, j))
            if is_zero(diff_atom(diff_atom(eq, lead), lead)):
                pivots.append((lead, eq))
    return out, messages


def _midx_geq(a, b):
    da, db = dict(a.midx), dict(b.midx)
    return all(da.get(v, 0) >= o for v, o in db.items())


def _midx_diff(a, b):
    da, db = dict(a.midx), dict(b.midx)
    out = []
    for v, o in da.items():
        d = o - db.get(v, 0)
        if d > 0:
            out.append((v, d))
    return out


def _clear_equation(e):
    """Multiply away denominators (iterating: expanding a sum kernel can
    expose further denominators) and strip a common monomial factor."""
    from .conslaw import normalize_equation
    from .expr import _monos_of

    cleared = e
    for _ in range(32):
        shifts = {}
        for _, fmap in _monos_of(cleared):
            for k, n in fmap.items():
                if n < 0:
                    shifts[k] = max(shifts.get(k, 0), -n)
        if not shifts:
            break
        cleared = mul(cleared, *[pow_int(k, n) for k, n in shifts.items()])
    normalized = normalize_equation(cleared)
    ratio = div(e, normalized) if not is_zero(normalized) else rat(1)
    return normalized, ratio


# ---------------------------------------------------------------------------
# comparison up to nonzero factors
# ---------------------------------------------------------------------------


def equations_match_up_to_factor(got, want, seed=17):
    """Bijective matching: each produced equation is a jet-free nonzero
    multiple of one expected equation."""
    if len(got) != len(want):
        return False
    used = set()
    for g in got:
        hit = None
        for i, w in enumerate(want):
            if i in used:
                continue
            r = _factor_ratio(g, w, seed)
            if r is not None:
                hit = i
                break
        if hit is None:
            return False
        used.add(hit)
    return True


def _factor_ratio(a, b, seed):
    """A jet-free nonzero r with a == r*b, tried from monomial ratios of
    leading terms (sums do not cancel in quotient-free canonical form)."""
    from .expr import _monos_of, _build_mono
    from fractions import Fraction

    if is_zero(a) or is_zero(b):
        return None
    cb, fb = _monos_of(b)[0]
    candidates = []
    for ca, fa in _monos_of(a):
        fm = dict(fa)
        for k, n in fb.items():
            m = fm.get(k, 0) - n
            if m == 0:
                fm.pop(k, None)
            else:
                fm[k] = m
        candidates.append(_build_mono(ca / cb, fm))
    for r in candidates:
        if jets_of(r):
            continue
        if is_zero(sub(mul(r, b), a)) and _probe_nonzero_robust(r, seed):
            return r
    return None


# ---------------------------------------------------------------------------
# solution transport
# ---------------------------------------------------------------------------


def push_solution(sys, tr, solution):
    """Image of a source-system solution under the transformation.

    `solution` maps dependent names to expressions in the source
    independents; it must satisfy the source system.  Returns a dict with
    the parametric image (z_i and w^s as expressions of x) and, when the
    independent part can be solved for x in closed form, the explicit form
    w^s(z)."""
    src, tgt = tr.source, tr.target

    def rules_for(e):
        out = {}
        for j in jets_of(e):
            d = solution[j.dep]
            for v, o in j.midx:
                s = src.independent(v)
                for _ in range(o):
                    d = total_derivative(d, s)
            out[j] = d
        return out

    for name, g in zip(sys.names, sys.equations):
        if not is_zero(substitute(g, rules_for(g))):
            raise ExprError(f"candidate solution does not satisfy {name}")

    z_par = [substitute(p, rules_for(p)) for p in tr.phi]
    w_par = [substitute(p, rules_for(p)) for p in tr.psi]
    out = {"z": z_par, "w": w_par, "explicit": None}

    unknowns = list(src.independents)
    sol = {}
    remaining = list(unknowns)
    eqs = []
    for i, zp in enumerate(z_par):
        zi = tgt.independents[i]
        if zp == zi and zp in remaining:
            sol[zp] = zi
            remaining.remove(zp)
        else:
            eqs.append(sub(zp, zi))
    for _ in range(len(unknowns) + 1):
        progress = False
        for eq in eqs:
            e = substitute(eq, sol)
            for y in list(remaining):
                val = _solve_for(e, y, remaining)
                if val is not None:
                    sol[y] = val
                    remaining.remove(y)
                    progress = True
                    break
            if progress:
                break
        if not progress:
            break
    if not remaining:
        out["explicit"] = [substitute(wp, sol) for wp in w_par]
    return out
