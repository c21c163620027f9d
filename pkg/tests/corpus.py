"""The three bundled systems with their multiplier families, shared by the
conslaw / linearize / mapping / acceptance tests."""

from pdelin.conslaw import MultiplierFamily
from pdelin.constraints import LinearConstraints
from pdelin.grammar import parse
from pdelin.jets import PdeSystem
from pdelin.workspace import Workspace


def burgers():
    ws = Workspace("xt", ["u1", "u2"])
    sys = PdeSystem(ws, [parse("u2_x - 2*u1", ws),
                         parse("u2_t - 2*u1_x + u1^2", ws)])
    return ws, sys


def burgers_family_v(ws):
    """The Burgers family in two-component form with the first-order
    constraint pair."""
    X, T = ws.declare_coordinate("X"), ws.declare_coordinate("T")
    cons = LinearConstraints(
        {"v1": (X, T), "v2": (X, T)},
        [parse("v1_{1}(X,T) - v2(X,T)", ws),
         parse("v2_{1}(X,T) + v1_{2}(X,T)", ws)])
    return MultiplierFamily(
        components=[parse("1/2*u1*exp(-u2/4)*v1(x,t) + exp(-u2/4)*v2(x,t)", ws),
                    parse("exp(-u2/4)*v1(x,t)", ws)],
        function_names=["v1", "v2"], coordinates=(X, T),
        definitions=(ws.independents[0], ws.independents[1]),
        constraints=cons)


def burgers_family_f(ws):
    """Same family with a single scalar function and the backward-heat
    constraint."""
    X, T = ws.declare_coordinate("X"), ws.declare_coordinate("T")
    cons = LinearConstraints(
        {"f": (X, T)}, [parse("f_{1,1}(X,T) + f_{2}(X,T)", ws)])
    return MultiplierFamily(
        components=[parse("1/2*u1*exp(-u2/4)*f(x,t) + exp(-u2/4)*f_{1}(x,t)", ws),
                    parse("exp(-u2/4)*f(x,t)", ws)],
        function_names=["f"], coordinates=(X, T),
        definitions=(ws.independents[0], ws.independents[1]),
        constraints=cons)


def pipeline():
    ws = Workspace("xt", ["u"], ["p"])
    sys = PdeSystem(ws, [parse("u_t*u_xx + pow(u_x, p)", ws)])
    return ws, sys


def pipeline_family(ws):
    X, T = ws.declare_coordinate("X"), ws.declare_coordinate("T")
    cons = LinearConstraints(
        {"v": (X, T)},
        [parse("v_{2}(X,T) + pow(X,p)*v_{1,1}(X,T) + 2*p*pow(X,p-1)*v_{1}(X,T)"
               " + p*(p-1)*pow(X,p-2)*v(X,T)", ws)])
    return MultiplierFamily(
        components=[parse("v(u_x, t)", ws)], function_names=["v"],
        coordinates=(X, T),
        definitions=(parse("u_x", ws), ws.independents[1]),
        constraints=cons)


def telegraph():
    ws = Workspace("xt", ["u1", "u2"])
    sys = PdeSystem(ws, [parse("u2_t - u1_x", ws),
                         parse("u1_t + u1*(u1 - 1) - u1^2*u2_x", ws)])
    return ws, sys


def telegraph_family(ws):
    """Reduced telegraph family: (-f_X, -f_T/u1) with f_XX - f_TT + f_T = 0."""
    X, T = ws.declare_coordinate("X"), ws.declare_coordinate("T")
    cons = LinearConstraints(
        {"f": (X, T)}, [parse("f_{1,1}(X,T) - f_{2,2}(X,T) + f_{2}(X,T)", ws)])
    return MultiplierFamily(
        components=[parse("-f_{1}(x - u2, t - log(u1))", ws),
                    parse("-f_{2}(x - u2, t - log(u1))/u1", ws)],
        function_names=["f"], coordinates=(X, T),
        definitions=(parse("x - u2", ws), parse("t - log(u1)", ws)),
        constraints=cons)


def telegraph_family_potential(ws):
    """Telegraph family in potential form: one function of the four
    coordinates (x, t, u1, u2) under two transport constraints and one
    second-order constraint."""
    x, t = ws.independents
    u1, u2 = ws.lookup("u1"), ws.lookup("u2")
    coords = (x, t, u1, u2)
    cons = LinearConstraints(
        {"f": coords},
        [parse("f_{1}(x,t,u1,u2) + f_{4}(x,t,u1,u2)", ws),
         parse("f_{2}(x,t,u1,u2) + u1*f_{3}(x,t,u1,u2)", ws),
         parse("u1^2*f_{3,3}(x,t,u1,u2) + 2*u1*f_{3}(x,t,u1,u2)"
               " - f_{4,4}(x,t,u1,u2)", ws)])
    return MultiplierFamily(
        components=[parse("f_{4}(x,t,u1,u2)", ws),
                    parse("f_{3}(x,t,u1,u2)", ws)],
        function_names=["f"], coordinates=coords, definitions=coords,
        constraints=cons)
