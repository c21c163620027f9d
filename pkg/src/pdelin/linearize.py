"""The linearization pipeline built on conservation-law multipliers:
recognize the required multiplier form, extract the dependent-variable part
of the mapping from the augmented conservation-law identity, build the
transformation, derive the linear target system, and verify everything to
literal zero."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction

from .conslaw import MultiplierFamily, multiplier_combination
from .constraints import LinearConstraints
from .errors import DegenerateError, ExprError, ExtractionError
from .expr import (Add, Fun, Jet, Sym, add, diff_atom, diff_kernel, div,
                   fun_kernels_of, is_zero, jets_of, mul, neg, pow_int, rat,
                   sub, substitute, substitute_kernels, total_derivative,
                   walk)
from .expr import _monos_of
from .linalg import adjugate, det
from .linops import LinearOperator, bilinear_identity
from .mapping import (Transformation, apply_transformation,
                      equations_match_up_to_factor, _probe_nonzero_robust)
from .probe import DomainError, probe_is_zero, random_assignment
from .workspace import Workspace


@dataclass
class Rejection:
    reason: str
    details: list = field(default_factory=list)

    def __bool__(self):
        return False


@dataclass
class LinearizationCandidate:
    family: MultiplierFamily          # in arbitrary-function (v) form
    system: object                    # the source PdeSystem
    coords: tuple                     # formal coordinate symbols X_i
    X: tuple                          # coordinate definitions X_i(x, U[, dU])
    Q: list                           # Q[nu][mu]
    J: object                         # Jacobian expression
    constraint_op: LinearOperator     # L~ (m rows, M cols) over coords
    vnames: list
    W: list | None = None
    fluxes: list | None = None

    @property
    def contact(self):
        return self.system.m == 1 and any(j.order >= 1
                                          for x in self.X for j in jets_of(x))


def jacobian(X, sys):
    """det(D X_i / D x_j) with total derivatives."""
    ws = sys.workspace
    if len(X) != ws.n:
        raise ExprError("coordinate count does not match the system")
    mat = [[total_derivative(xi, xj) for xi in X] for xj in ws.independents]
    return det(mat)


def _jacobian_matrix(X, sys):
    ws = sys.workspace
    return [[total_derivative(xi, xj) for xi in X] for xj in ws.independents]


# ---------------------------------------------------------------------------
# conversion of scalar-function families to first-order systems
# ---------------------------------------------------------------------------


def to_first_order_system(fam, sys):
    """Rename the derivative kernels of a single arbitrary function as
    independent components v^1..v^M and derive the first-order linear system
    they satisfy (coordinate derivatives of named kernels, closed with the
    help of the original constraint)."""
    if len(fam.function_names) != 1:
        return fam
    name = fam.function_names[0]
    kernels = sorted({(k.dmidx) for c in fam.components
                      for k in fun_kernels_of(c, name)},
                     key=lambda d: (sum(d), d))
    if not kernels:
        raise ExprError("family components hold no arbitrary-function kernels")
    if kernels == [(0,) * len(fam.coordinates)] and len(sys.equations) == 1:
        return fam  # already a single underived function: v-form with M = 1
    M = len(sys.equations)
    if len(kernels) != M:
        raise ExprError(
            f"family has {len(kernels)} distinct kernels but the system has "
            f"{M} equations; cannot form the component system")
    coords = fam.coordinates
    vnames = [f"v{i+1}" for i in range(M)]
    named = {k: i for i, k in enumerate(kernels)}
    cons = fam.constraints

    def express(dmidx, exclude):
        """dmidx of the scalar function in terms of named kernels and their
        first coordinate-derivatives: directly as a cross-derivative of
        another named kernel, or through the constraint."""
        if dmidx in named:
            return Fun(vnames[named[dmidx]], coords)
        direct = _as_named_or_derivative(dmidx, exclude)
        if direct is not None:
            return direct
        row = cons.rows[0]
        k_target = Fun(name, coords, dmidx)
        c = diff_atom(row, k_target)
        if is_zero(c):
            return None
        rest = sub(row, mul(c, k_target))
        solved = neg(div(rest, c))
        out = []
        for k in fun_kernels_of(solved, name):
            repl = _as_named_or_derivative(k.dmidx, exclude)
            if repl is None:
                return None
            out.append((k, repl))
        return substitute_kernels(solved, dict(out))

    def _as_named_or_derivative(dmidx, exclude=None):
        if dmidx in named:
            return Fun(vnames[named[dmidx]], coords)
        for base, i in named.items():
            delta = tuple(a - b for a, b in zip(dmidx, base))
            if all(d >= 0 for d in delta) and sum(delta) == 1:
                pos = next(p for p, d in enumerate(delta) if d)
                if exclude is not None and (i, pos) == exclude:
                    continue
                return Fun(vnames[i], coords, delta)
        return None

    rows = []
    seen = set()
    m = sys.m
    for dmidx, i in sorted(named.items(), key=lambda kv: kv[1]):
        for pos in range(len(coords)):
            if len(rows) >= m:
                break
            target = tuple(o + (1 if p == pos else 0)
                           for p, o in enumerate(dmidx))
            rhs = express(target, exclude=(i, pos))
            if rhs is None:
                continue
            lhs = Fun(vnames[i], coords, tuple(1 if p == pos else 0
                                               for p in range(len(coords))))
            row = sub(lhs, rhs)
            if is_zero(row):
                continue
            from .conslaw import normalize_equation
            canon = normalize_equation(row)
            if canon.key in seen:
                continue
            seen.add(canon.key)
            rows.append(row)
    if len(rows) != m:
        raise ExprError(
            f"component-system closure found {len(rows)} rows; expected {m}")
    new_cons = LinearConstraints({nm: coords for nm in vnames}, rows)
    repl = {}
    for c in fam.components:
        for k in fun_kernels_of(c, name):
            if k.dmidx not in named:
                raise ExprError("component holds an unnamed kernel")
            repl[k] = Fun(vnames[named[k.dmidx]], k.args)
    comps = [substitute_kernels(c, repl) for c in fam.components]
    return MultiplierFamily(components=comps, function_names=vnames,
                            coordinates=coords, definitions=fam.definitions,
                            constraints=new_cons)


# ---------------------------------------------------------------------------
# matching the required multiplier form
# ---------------------------------------------------------------------------


def match_multiplier_form(fam, sys):
    """Factor a verified family as Lambda_nu = sum_mu v^mu(X) Q_nu^mu J and
    package the linearization candidate, or reject with the reason."""
    try:
        fam = to_first_order_system(fam, sys)
    except ExprError as exc:
        return Rejection(f"family is not of the required arbitrary-function "
                         f"form: {exc}")
    ws = sys.workspace
    M = len(sys.equations)
    coords = fam.coordinates
    X = fam.definitions
    if len(X) != ws.n:
        return Rejection(
            f"{len(X)} coordinate definitions for {ws.n} independent "
            "variables: multiplier arguments do not form new coordinates")
    max_x_order = 1 if ws.m == 1 else 0
    for x in X:
        for j in jets_of(x):
            if j.order > max_x_order:
                return Rejection(
                    f"coordinate {x!r} depends on {j!r}; beyond "
                    f"{'contact' if ws.m == 1 else 'point'} form")
    vnames = list(fam.function_names)
    if len(vnames) != M:
        return Rejection(f"{len(vnames)} arbitrary functions for {M} "
                         "equations; Q cannot be square")
    args = fam.instantiated_args()
    J = jacobian(X, sys)
    if is_zero(J) or not _probe_nonzero_robust(J):
        return Rejection("coordinate definitions are functionally dependent "
                         "(Jacobian vanishes)")
    Q = []
    for nu, lam in enumerate(fam.components):
        row = []
        leftover = lam
        for mu, nm in enumerate(vnames):
            kernel = Fun(nm, args)
            coeff = diff_kernel(lam, kernel)
            if fun_kernels_of(coeff):
                return Rejection(f"multiplier {nu + 1} is not linear in the "
                                 "arbitrary functions")
            row.append(div(coeff, J))
            leftover = sub(leftover, mul(coeff, kernel))
        if not is_zero(leftover):
            if not fun_kernels_of(lam):
                return Rejection("multipliers carry no arbitrary function; "
                                 "factored-form recovery impossible")
            return Rejection(f"multiplier {nu + 1} holds derivative kernels "
                             "or a function-free part; not of the required form")
        Q.append(row)
    detq = det(Q)
    if is_zero(detq) or not _probe_nonzero_robust(detq):
        return Rejection("factor matrix Q is degenerate")
    if fam.constraints is None or len(fam.constraints.rows) != ws.m:
        have = 0 if fam.constraints is None else len(fam.constraints.rows)
        return Rejection(f"constraint operator has {have} rows; need m = {ws.m}")
    Lop = LinearOperator.from_rows(fam.constraints.rows, vnames, coords)
    return LinearizationCandidate(family=fam, system=sys, coords=tuple(coords),
                                  X=tuple(X), Q=Q, J=J, constraint_op=Lop,
                                  vnames=vnames)


# ---------------------------------------------------------------------------
# the augmented identity and W extraction
# ---------------------------------------------------------------------------


def _dx_operator(cand):
    """Formal d/dX_i realized on jet expressions through the chain rule:
    DX_i(h) = sum_j adj[i][j] D_{x_j}(h) / J."""
    ws = cand.system.workspace
    amat = _jacobian_matrix(cand.X, cand.system)
    cof = adjugate(amat)

    def DX(i, h):
        num = add(*[mul(cof[i][j], total_derivative(h, ws.independents[j]))
                    for j in range(ws.n)])
        return div(num, cand.J)

    return DX, cof


def _compose_coordinates(cand, e):
    """Substitute formal coordinates by their definitions."""
    return substitute(e, dict(zip(cand.coords, cand.X)))


def _adjoint_rows_on(cand, W):
    """(L~* W)^mu composed with X(x,U): coefficients b(X) -> b(X(x,U)) and
    each d/dX_i realized through the chain rule."""
    DX, _ = _dx_operator(cand)
    Lstar = cand.constraint_op.adjoint()
    cache = {}

    def dW(alpha, K):
        if (alpha, K) in cache:
            return cache[(alpha, K)]
        if sum(K) == 0:
            val = W[alpha]
        else:
            i = next(i for i, o in enumerate(K) if o)
            val = DX(i, dW(alpha, K[:i] + (K[i] - 1,) + K[i + 1:]))
        cache[(alpha, K)] = val
        return val

    out = []
    for mu in range(Lstar.rows):
        terms = []
        for (r, alpha, K), b in Lstar.coeffs.items():
            if r != mu:
                continue
            terms.append(mul(_compose_coordinates(cand, b), dW(alpha, K)))
        out.append(add(*terms) if terms else rat(0))
    return out


def _qg_rows(cand):
    sys = cand.system
    M = len(sys.equations)
    return [add(*[mul(cand.Q[nu][mu], sys.equations[nu]) for nu in range(M)])
            for mu in range(M)]


def _candidate_basis(cand, degree):
    """Monomials for the undetermined-coefficient solve of the dependent
    part W: atoms and transcendental kernels harvested from the family."""
    ws = cand.system.workspace
    atoms = list(ws.independents)
    max_order = 1 if ws.m == 1 else 0
    names = [s.name for s in ws.independents]
    for dep in ws.dependents:
        atoms.append(Jet(dep, ()))
        if max_order >= 1:
            for nm in names:
                atoms.append(Jet(dep, ((nm, 1),)))
    from .expr import ExpF, LogF, Pow, SPow

    kernels = []
    seen = set()
    sources = list(cand.family.components) + list(cand.X) + \
        [c for row in cand.Q for c in row]
    inverted = set()
    for s in sources:
        for n in walk(s):
            if isinstance(n, (ExpF, LogF, SPow)) and not fun_kernels_of(n):
                if n.key not in seen:
                    seen.add(n.key)
                    kernels.append(n)
            if isinstance(n, Pow) and n.exponent < 0:
                inverted.add(n.base)
    units = atoms + kernels + [pow_int(b, -1) for b in inverted
                               if not isinstance(b, Add)]
    basis = [rat(1)]
    seen = {rat(1).key}
    frontier = [rat(1)]
    for _ in range(degree):
        nxt = []
        for b in frontier:
            for u in units:
                m = mul(b, u)
                if isinstance(m, Add) or m.key in seen:
                    continue
                seen.add(m.key)
                nxt.append(m)
        basis.extend(nxt)
        frontier = nxt

    # structured monomials first, so pivoting prefers them and the plain
    # polynomial freedom of the adjoint kernel is pinned to zero
    kernel_keys = {k.key for k in kernels}
    def struct(m):
        if jets_of(m):
            return 0
        return 0 if any(k.key in kernel_keys for k in _monos_of(m)[0][1]) else 1
    basis.sort(key=lambda m: (struct(m), m.key))
    return basis


def extract_dependent_part(cand, max_degree=3):
    """Solve Q_nu^mu G^nu == (L~* W)^mu identically in U for W by structured
    undetermined coefficients over a harvested monomial basis.  Returns the
    W list; raises ExtractionError when no combination of candidate
    monomials satisfies the identity."""
    last = None
    for degree in range(2, max_degree + 1):
        try:
            return _extract_at_degree(cand, degree)
        except ExtractionError as exc:
            last = exc
    raise last


def _extract_at_degree(cand, degree):
    targets = _qg_rows(cand)
    basis = _candidate_basis(cand, degree)
    m = cand.constraint_op.rows
    names = []
    W = []
    for alpha in range(m):
        comps = []
        for k, b in enumerate(basis):
            c = Sym(f"_c{alpha}_{k}", "parameter")
            names.append(c.name)
            comps.append(mul(c, b))
        W.append(add(*comps))
    rows = _adjoint_rows_on(cand, W)
    residuals = [sub(t, r) for t, r in zip(targets, rows)]
    equations = []
    grouped = {}
    for resid in residuals:
        cleared = _clear_for_solve(resid)
        local = {}
        for coeff, fmap in _monos_of(cleared):
            cpart = None
            sig = {}
            for kk, n in fmap.items():
                if isinstance(kk, Sym) and kk.kind == "parameter" \
                        and kk.name.startswith("_c"):
                    if cpart is not None or n != 1:
                        raise ExtractionError("extraction system is nonlinear")
                    cpart = kk
                else:
                    sig[kk] = n
            key = tuple(sorted((kk.key, n) for kk, n in sig.items()))
            row = local.setdefault(key, {})
            tag = cpart.name if cpart is not None else None
            row[tag] = row.get(tag, Fraction(0)) + coeff
        equations.extend(local.values())
    sol = _solve_linear_system(equations, names)
    if sol is None:
        raise ExtractionError(
            "no dependent-variable part exists in the candidate basis "
            f"(degree {degree})")
    repl = {Sym(nm, "parameter"): rat(sol[nm]) for nm in names}
    out = [substitute(w, repl) for w in W]
    # exact confirmation of the identity with the concrete W
    final = _adjoint_rows_on(cand, out)
    for t, r in zip(targets, final):
        if not is_zero(sub(t, r)):
            raise ExtractionError("candidate solve left a nonzero residual")
    return out


def _clear_for_solve(e):
    """Multiply an extraction residual by its denominators (all nonzero in
    the kernel algebra)."""
    from .mapping import _clear_equation

    cleared, _ = _clear_equation(e)
    return cleared


def _solve_linear_system(equations, var_order):
    """Exact Gaussian elimination over the rationals; free variables are
    pinned to zero (variable order carries the structured-first preference).
    Returns None on inconsistency."""
    rows = [dict(e) for e in equations]
    pivots = []
    used = [False] * len(rows)
    for v in var_order:
        pr = None
        for i, r in enumerate(rows):
            if not used[i] and r.get(v):
                pr = i
                break
        if pr is None:
            continue
        used[pr] = True
        pivots.append((v, rows[pr]))
        pc = rows[pr][v]
        for i, r in enumerate(rows):
            if i == pr or not r.get(v):
                continue
            f = r[v] / pc
            for kk, val in rows[pr].items():
                nv = r.get(kk, Fraction(0)) - f * val
                if nv == 0:
                    r.pop(kk, None)
                else:
                    r[kk] = nv
    sol = {v: Fraction(0) for v in var_order}
    for v, pr in reversed(pivots):
        s = pr.get(None, Fraction(0))
        for kk, val in pr.items():
            if kk in (v, None):
                continue
            s += val * sol[kk]
        sol[v] = -s / pr[v]
    for i, r in enumerate(rows):
        if used[i]:
            continue
        s = r.get(None, Fraction(0))
        for kk, val in r.items():
            if kk is not None:
                s += val * sol[kk]
        if s != 0:
            return None
    return sol


# ---------------------------------------------------------------------------
# the full augmented identity with fluxes
# ---------------------------------------------------------------------------


@dataclass
class AugmentedIdentity:
    W: list
    fluxes: list
    row_terms: list
    residual: object


def augmented_identity(cand):
    """delta-V Q G J  ==  delta-W J (L~ V)  +  Div Gamma, with W extracted
    and Gamma assembled from the formal bilinear fluxes of the constraint
    operator composed through X(x, U)."""
    sys = cand.system
    ws = sys.workspace
    if cand.W is None:
        cand.W = extract_dependent_part(cand)
    W = cand.W
    A = multiplier_combination(sys, cand.family)

    # row terms: W_alpha * J * (L~ v)_alpha composed
    rows_formal = cand.constraint_op.to_rows(cand.vnames)
    rows_inst = [_compose_coordinates(cand, r) for r in rows_formal]
    row_terms = [mul(W[a], cand.J, rows_inst[a]) for a in range(len(rows_inst))]

    # fluxes: delta-v (L~* W~) = delta-W~ (L~ v) + Div_X Upsilon, composed
    Lstar = cand.constraint_op.adjoint()
    wtilde = [f"_W{a+1}" for a in range(len(W))]
    upsilon = bilinear_identity(Lstar, vnames=cand.vnames, wnames=wtilde)
    DX, cof = _dx_operator(cand)
    cacheW = {}

    def dW(alpha, K):
        if (alpha, K) in cacheW:
            return cacheW[(alpha, K)]
        if sum(K) == 0:
            val = W[alpha]
        else:
            i = next(i for i, o in enumerate(K) if o)
            val = DX(i, dW(alpha, K[:i] + (K[i] - 1,) + K[i + 1:]))
        cacheW[(alpha, K)] = val
        return val

    def compose_upsilon(u):
        repl = {}
        for k in fun_kernels_of(u):
            if k.name in wtilde:
                repl[k] = dW(wtilde.index(k.name), k.dmidx)
        u = substitute_kernels(u, repl)
        return _compose_coordinates(cand, u)

    ups = [compose_upsilon(u) for u in upsilon]
    n = ws.n
    fluxes = [add(*[mul(cof[i][j], ups[i]) for i in range(n)]) for j in range(n)]
    divergence = add(*[total_derivative(fluxes[j], ws.independents[j])
                       for j in range(n)])
    residual = sub(sub(A, add(*row_terms)), divergence)
    cand.fluxes = fluxes
    return AugmentedIdentity(W=W, fluxes=fluxes, row_terms=row_terms,
                             residual=residual)


def family_fluxes(sys, fam):
    """Fluxes for a verified arbitrary-function family: the augmented
    identity evaluated on constrained functions, where the constraint-row
    terms vanish.  Returns (fluxes, residual reduced modulo constraints)."""
    cand = match_multiplier_form(fam, sys)
    if isinstance(cand, Rejection):
        raise ExprError(f"family does not match the factored form: {cand.reason}")
    rec = augmented_identity(cand)
    if not is_zero(rec.residual):
        raise ExprError("augmented identity residual is nonzero")
    fam2 = cand.family  # possibly converted to component form
    combo = multiplier_combination(sys, fam2)
    ws = sys.workspace
    divergence = add(*[total_derivative(rec.fluxes[j], ws.independents[j])
                       for j in range(ws.n)])
    reduced = fam2.reduce(sub(combo, divergence))
    return rec.fluxes, reduced


# ---------------------------------------------------------------------------
# mapping, target system, verification
# ---------------------------------------------------------------------------


def _target_workspace(cand):
    names = [c.name for c in cand.coords]
    deps = [f"w{i+1}" for i in range(len(cand.W or []) or cand.constraint_op.rows)]
    params = [p.name for p in cand.system.workspace.parameters]
    return Workspace(names, deps, params)


def build_mapping(cand):
    """The transformation z = X(x,u), w = W(x,u); contact when the scalar
    case depends on first derivatives, with rho solved from the contact
    condition."""
    if cand.W is None:
        cand.W = extract_dependent_part(cand)
    sys = cand.system
    tgt = _target_workspace(cand)
    contact = sys.m == 1 and any(
        j.order >= 1 for e in list(cand.X) + list(cand.W) for j in jets_of(e))
    detq = det(cand.Q)
    if is_zero(detq) or not _probe_nonzero_robust(detq):
        raise DegenerateError("factor matrix Q is degenerate")
    if is_zero(cand.J) or not _probe_nonzero_robust(cand.J):
        raise DegenerateError("coordinate definitions are functionally dependent")
    if not contact:
        return Transformation("point", sys.workspace, tgt,
                              tuple(cand.X), tuple(cand.W))
    amat = _jacobian_matrix(cand.X, sys)
    from .linalg import solve
    rhs = [total_derivative(cand.W[0], xj) for xj in sys.workspace.independents]
    rho = solve(amat, rhs)
    for r in rho:
        for j in jets_of(r):
            if j.order > 1:
                raise DegenerateError(
                    "contact data depends on second derivatives; not a "
                    "contact transformation")
    return Transformation("contact", sys.workspace, tgt,
                          tuple(cand.X), tuple(cand.W), tuple(rho))


def target_system(cand):
    """The linear target: the adjoint of the constraint operator, with the
    coordinates renamed to independent variables."""
    from .jets import PdeSystem

    tgt = _target_workspace(cand)
    Lstar = cand.constraint_op.adjoint()
    rename = {c: tgt.independent(c.name) for c in cand.coords}
    coeffs = {k: substitute(v, rename) for k, v in Lstar.coeffs.items()}
    op = LinearOperator(tuple(tgt.independents), Lstar.rows, Lstar.cols, coeffs)
    wjets = [tgt.lookup(d) for d in tgt.dependents]
    eqs = op.apply(wjets, derive=total_derivative)
    return PdeSystem(tgt, eqs)


@dataclass
class LinearizationReport:
    ok: bool
    identity_residuals: list
    mapping_checked: bool
    mapping_ok: bool | None
    messages: list = field(default_factory=list)


def verify_linearization(sys, cand):
    """Check Q G == L~* W identically in U, then cross-check by applying the
    built transformation and comparing with the target system up to nonzero
    row factors."""
    if cand.W is None:
        cand.W = extract_dependent_part(cand)
    targets = _qg_rows(cand)
    rows = _adjoint_rows_on(cand, cand.W)
    residuals = [sub(t, r) for t, r in zip(targets, rows)]
    ok43 = all(is_zero(r) for r in residuals)
    messages = []
    if not ok43:
        messages.append("identity Q.G == L~*W fails; mismatch residual recorded")
    rng = random.Random(23)
    for r in residuals:
        if is_zero(r):
            try:
                if not probe_is_zero(r, random_assignment(r, rng)):
                    ok43 = False
                    messages.append("probe contradicts a symbolic zero")
            except DomainError:
                pass
    mapping_checked = False
    mapping_ok = None
    if ok43:
        try:
            tr = build_mapping(cand)
            rep = apply_transformation(sys, tr)
            want = target_system(cand)
            mapping_ok = equations_match_up_to_factor(rep.equations,
                                                      want.equations)
            mapping_checked = True
            if not mapping_ok:
                messages.append("transformed system does not match the target")
        except ExprError as exc:
            messages.append(f"mapping cross-check skipped: {exc}")
    return LinearizationReport(ok=ok43 and mapping_ok is not False,
                               identity_residuals=residuals,
                               mapping_checked=mapping_checked,
                               mapping_ok=mapping_ok, messages=messages)


# ---------------------------------------------------------------------------
# Euler operators with respect to the arbitrary functions (X-space)
# ---------------------------------------------------------------------------


def euler_wrt_function(cand, e, mu):
    """E_{V^mu} in the X-coordinates, realized on composite expressions:
    sum_K (-1)^|K| DX^K (d e / d V^mu_K)."""
    DX, _ = _dx_operator(cand)
    args = cand.family.instantiated_args()
    name = cand.vnames[mu]
    out = []
    for k in fun_kernels_of(e, name):
        if k.args != args:
            continue
        d = diff_kernel(e, k)
        sign = rat(-1) if sum(k.dmidx) % 2 else rat(1)
        for pos, o in enumerate(k.dmidx):
            for _ in range(o):
                d = DX(pos, d)
        out.append(mul(sign, d))
    return add(*out) if out else rat(0)
