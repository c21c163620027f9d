"""Linear differential operators over declared coordinates, their formal
adjoints, and the bilinear conservation identity

    V . (L W)  -  W . (L* V)  =  Div Upsilon[V, W]

realized by mechanical integration by parts.  Coordinates may be symbols or
zero-order jets; derivatives are formal partials with respect to those
atoms, so the same machinery serves target systems in new variables and
constraint operators over composite coordinates."""

from __future__ import annotations

from math import comb

from .errors import ExprError
from .expr import (Fun, add, atoms_of, diff_atom, fun_kernels_of, is_zero,
                   mul, neg, rat, sub)

KIND_PARAM = "parameter"


def _multi_leq(a, b):
    return all(x <= y for x, y in zip(a, b))


def _multi_sub(a, b):
    return tuple(x - y for x, y in zip(a, b))


def _multi_binom(a, b):
    out = 1
    for x, y in zip(a, b):
        out *= comb(x, y)
    return out


class LinearOperator:
    """Coefficient table b[(row nu, col alpha, multi-index K)] over the
    declared coordinates."""

    def __init__(self, variables, rows, cols, coeffs):
        self.variables = tuple(variables)
        self.rows = rows
        self.cols = cols
        self.coeffs = {k: v for k, v in coeffs.items() if not is_zero(v)}
        for (nu, alpha, K), c in self.coeffs.items():
            if not (0 <= nu < rows and 0 <= alpha < cols and len(K) == len(self.variables)):
                raise ExprError("malformed operator coefficient index")
            bad = [a for a in atoms_of(c)
                   if a not in self.variables and not (
                       hasattr(a, "kind") and a.kind == KIND_PARAM)]
            if bad:
                raise ExprError(f"operator coefficient depends on {bad[0]!r}")

    @property
    def order(self):
        return max((sum(K) for (_, _, K) in self.coeffs), default=0)

    @classmethod
    def from_rows(cls, rows, func_names, variables):
        """Extract the coefficient table from row expressions linear in the
        kernels of the named functions evaluated at the coordinates."""
        coords = tuple(variables)
        coeffs = {}
        for nu, row in enumerate(rows):
            seen = rat(0)
            for k in fun_kernels_of(row):
                if k.name not in func_names or k.args != coords:
                    raise ExprError(f"row {nu + 1} holds a foreign kernel {k!r}")
                c = diff_atom(row, k)
                if fun_kernels_of(c):
                    raise ExprError(f"row {nu + 1} is not linear in {k!r}")
                coeffs[(nu, func_names.index(k.name), k.dmidx)] = c
                seen = add(seen, mul(c, k))
            if not is_zero(sub(row, seen)):
                raise ExprError(f"row {nu + 1} has a kernel-free part")
        return cls(coords, len(rows), len(func_names), coeffs)

    def to_rows(self, func_names):
        out = []
        for nu in range(self.rows):
            terms = []
            for (r, alpha, K), c in sorted(self.coeffs.items(), key=lambda kv: kv[0]):
                if r != nu:
                    continue
                terms.append(mul(c, Fun(func_names[alpha], self.variables, K)))
            out.append(add(*terms) if terms else rat(0))
        return out

    # -- application --------------------------------------------------------

    def apply(self, W, derive=None):
        """Apply to m component expressions.  `derive` defaults to formal
        partial differentiation with respect to the coordinates; pass
        `total_derivative` when the components are jet expressions over
        independent variables."""
        if len(W) != self.cols:
            raise ExprError(f"operator expects {self.cols} components, got {len(W)}")
        if derive is None:
            derive = diff_atom
        cache = {}

        def dW(alpha, K):
            if (alpha, K) in cache:
                return cache[(alpha, K)]
            if sum(K) == 0:
                val = W[alpha]
            else:
                i = next(i for i, o in enumerate(K) if o)
                prev = dW(alpha, K[:i] + (K[i] - 1,) + K[i + 1:])
                val = derive(prev, self.variables[i])
            cache[(alpha, K)] = val
            return val

        out = []
        for nu in range(self.rows):
            terms = [mul(c, dW(alpha, K))
                     for (r, alpha, K), c in self.coeffs.items() if r == nu]
            out.append(add(*terms) if terms else rat(0))
        return out

    # -- adjoint -------------------------------------------------------------

    def adjoint(self):
        """Formal integration by parts: the operator L* with
        (L* v)^alpha = sum (-1)^|K| d^K (b[nu,alpha,K] v^nu)."""
        coeffs = {}
        for (nu, alpha, K), b in self.coeffs.items():
            sign = -1 if sum(K) % 2 else 1
            for J in _sub_multis(K):
                d = b
                for i, o in enumerate(_multi_sub(K, J)):
                    for _ in range(o):
                        d = diff_atom(d, self.variables[i])
                term = mul(rat(sign * _multi_binom(K, J)), d)
                key = (alpha, nu, J)
                coeffs[key] = add(coeffs.get(key, rat(0)), term)
        return LinearOperator(self.variables, self.cols, self.rows, coeffs)


def _sub_multis(K):
    if not K:
        yield ()
        return
    for first in range(K[0] + 1):
        for rest in _sub_multis(K[1:]):
            yield (first,) + rest


def bilinear_identity(L, vnames=None, wnames=None):
    """Fluxes Upsilon with  δV.(L W) − δW.(L* V) − Σ_i ∂_i Upsilon_i = 0
    for formal arbitrary functions V (M components) and W (m components)
    of the operator's coordinates."""
    vnames = vnames or [f"V{n+1}" for n in range(L.rows)]
    wnames = wnames or [f"W{n+1}" for n in range(L.cols)]
    coords = L.variables
    n = len(coords)
    fluxes = [rat(0)] * n

    def wk(alpha, K):
        return Fun(wnames[alpha], coords, K)

    def transfer(c, alpha, K):
        """c * d^K(W_alpha): peel derivatives onto c, collecting fluxes."""
        nonlocal fluxes
        while sum(K) > 0:
            i = next(i for i, o in enumerate(K) if o)
            K2 = K[:i] + (K[i] - 1,) + K[i + 1:]
            fluxes[i] = add(fluxes[i], mul(c, wk(alpha, K2)))
            c = neg(diff_atom(c, coords[i]))
            K = K2
        return mul(c, wk(alpha, K))

    residual_terms = []
    for (nu, alpha, K), b in sorted(L.coeffs.items(), key=lambda kv: kv[0]):
        c = mul(Fun(vnames[nu], coords), b)
        residual_terms.append(transfer(c, alpha, K))
    # residual_terms now reads  δW . (L* V); the caller checks the identity.
    return fluxes


def identity_residual(L, vnames=None, wnames=None):
    """The full residual of the bilinear identity; canonically zero."""
    vnames = vnames or [f"V{n+1}" for n in range(L.rows)]
    wnames = wnames or [f"W{n+1}" for n in range(L.cols)]
    coords = L.variables
    V = [Fun(nm, coords) for nm in vnames]
    W = [Fun(nm, coords) for nm in wnames]
    lw = L.apply(W)
    lsv = L.adjoint().apply(V)
    fluxes = bilinear_identity(L, vnames, wnames)
    divergence = add(*[diff_atom(f, coords[i]) for i, f in enumerate(fluxes)]) \
        if fluxes else rat(0)
    lhs = add(*[mul(V[nu], lw[nu]) for nu in range(L.rows)])
    rhs = add(*[mul(W[a], lsv[a]) for a in range(L.cols)])
    return sub(sub(lhs, rhs), divergence)
