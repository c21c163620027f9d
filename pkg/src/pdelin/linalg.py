"""Tiny exact matrix helpers over expressions (n stays small here)."""

from __future__ import annotations

from .errors import DegenerateError
from .expr import add, div, is_zero, mul, neg, rat, sub


def det(mat):
    n = len(mat)
    if n == 1:
        return mat[0][0]
    if n == 2:
        return sub(mul(mat[0][0], mat[1][1]), mul(mat[0][1], mat[1][0]))
    out = []
    for j in range(n):
        minor = [row[:j] + row[j + 1:] for row in mat[1:]]
        term = mul(mat[0][j], det(minor))
        out.append(term if j % 2 == 0 else neg(term))
    return add(*out)


def adjugate(mat):
    n = len(mat)
    if n == 1:
        return [[rat(1)]]
    adj = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [[mat[r][c] for c in range(n) if c != j]
                     for r in range(n) if r != i]
            cof = det(minor) if minor else rat(1)
            adj[j][i] = cof if (i + j) % 2 == 0 else neg(cof)
    return adj


def inverse(mat):
    d = det(mat)
    if is_zero(d):
        raise DegenerateError("matrix determinant is identically zero")
    adj = adjugate(mat)
    n = len(mat)
    return [[div(adj[i][j], d) for j in range(n)] for i in range(n)]


def solve(mat, rhs):
    """Cramer solve of mat * x = rhs over the expression field."""
    d = det(mat)
    if is_zero(d):
        raise DegenerateError("linear system is degenerate")
    n = len(mat)
    out = []
    for j in range(n):
        col = [[mat[i][k] if k != j else rhs[i] for k in range(n)]
               for i in range(n)]
        out.append(div(det(col), d))
    return out


def mat_mul(a, b):
    n, k, m = len(a), len(b), len(b[0])
    return [[add(*[mul(a[i][t], b[t][j]) for t in range(k)]) for j in range(m)]
            for i in range(n)]


def is_identity(mat):
    n = len(mat)
    for i in range(n):
        for j in range(n):
            want = rat(1) if i == j else rat(0)
            if not is_zero(sub(mat[i][j], want)):
                return False
    return True
