"""Workspace files: the `[section]` / `key = value` input format.

Sections: [vars], [system], optional [leading], [ansatz], [multipliers],
[transformation], [target].  Unknown sections or keys are errors.  Values
use the expression grammar, in the variables declared by [vars]."""

from __future__ import annotations

from dataclasses import dataclass, field

from .conslaw import MultiplierAnsatz, MultiplierFamily
from .constraints import LinearConstraints
from .errors import WorkspaceError
from .expr import Jet, Sym, fun_kernels_of, is_atom, substitute
from .grammar import parse
from .jets import PdeSystem
from .mapping import Transformation
from .workspace import Workspace

_SECTIONS = ("vars", "system", "leading", "ansatz", "multipliers",
             "transformation", "target")
_VARS_KEYS = ("independents", "dependents", "parameters", "coordinates")
_ANSATZ_KEYS = ("order", "preset", "arguments")
_PRESETS = ("general", "fixed-independents", "integrating-factor")


@dataclass
class WorkspaceFile:
    workspace: Workspace
    system: PdeSystem
    equation_names: list
    ansatz: MultiplierAnsatz | None = None
    family: MultiplierFamily | None = None
    transformation: Transformation | None = None
    target_equations: list | None = None
    target_workspace: Workspace | None = None
    sections: dict = field(default_factory=dict)


def _split_sections(text):
    sections = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if line.strip().startswith("["):
            name = line.strip()
            if not name.endswith("]"):
                raise WorkspaceError(f"line {lineno}: malformed section header")
            name = name[1:-1].strip()
            if name not in _SECTIONS:
                raise WorkspaceError(f"line {lineno}: unknown section [{name}]")
            if name in sections:
                raise WorkspaceError(f"line {lineno}: duplicate section [{name}]")
            sections[name] = []
            current = name
            continue
        if current is None:
            raise WorkspaceError(f"line {lineno}: content before any section")
        if "=" not in line:
            raise WorkspaceError(f"line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        sections[current].append((key.strip(), value.strip(), lineno))
    return sections


def _names(value):
    out = [v.strip() for v in value.split(",") if v.strip()]
    if not out:
        raise WorkspaceError("empty name list")
    return out


def load_workspace_text(text):
    sections = _split_sections(text)
    if "vars" not in sections or "system" not in sections:
        raise WorkspaceError("a workspace file needs [vars] and [system]")

    decl = {"independents": None, "dependents": None,
            "parameters": [], "coordinates": []}
    for key, value, lineno in sections["vars"]:
        if key not in _VARS_KEYS:
            raise WorkspaceError(f"line {lineno}: unknown [vars] key '{key}'")
        decl[key] = _names(value)
    if not decl["independents"] or not decl["dependents"]:
        raise WorkspaceError("[vars] must declare independents and dependents")
    ws = Workspace(decl["independents"], decl["dependents"],
                   decl["parameters"], decl["coordinates"])

    eq_names, equations = [], []
    for key, value, lineno in sections["system"]:
        eq_names.append(key)
        equations.append(parse(value, ws))

    leading = {}
    for key, value, lineno in sections.get("leading", []):
        if key not in eq_names:
            raise WorkspaceError(f"line {lineno}: [leading] names unknown "
                                 f"equation '{key}'")
        jet = parse(value, ws)
        if not isinstance(jet, Jet):
            raise WorkspaceError(f"line {lineno}: leading value must be a jet")
        leading[eq_names.index(key)] = jet
    system = PdeSystem(ws, equations, leading=leading, names=eq_names)

    out = WorkspaceFile(workspace=ws, system=system, equation_names=eq_names,
                        sections=sections)

    if "ansatz" in sections:
        order = None
        preset = "general"
        restrict = None
        for key, value, lineno in sections["ansatz"]:
            if key not in _ANSATZ_KEYS:
                raise WorkspaceError(f"line {lineno}: unknown [ansatz] key '{key}'")
            if key == "order":
                order = int(value)
            elif key == "arguments":
                restrict = []
                for nm in _names(value):
                    atom = ws.lookup(nm)
                    if atom is None or not isinstance(atom, (Sym, Jet)):
                        raise WorkspaceError(
                            f"line {lineno}: ansatz argument '{nm}' is not "
                            "a declared variable")
                    restrict.append(atom)
                restrict = tuple(restrict)
            else:
                if value not in _PRESETS:
                    raise WorkspaceError(f"line {lineno}: unknown preset '{value}'")
                preset = value
        out.ansatz = MultiplierAnsatz(order=order, shape=preset,
                                      restrict_to=restrict)

    if "multipliers" in sections:
        out.family = _load_family(sections["multipliers"], ws, system)

    if "transformation" in sections:
        out.transformation, out.target_workspace = _load_transformation(
            sections["transformation"], ws)

    if "target" in sections:
        if out.transformation is None:
            raise WorkspaceError("[target] requires [transformation]")
        out.target_equations = [parse(value, out.target_workspace)
                                for key, value, lineno in sections["target"]]
    return out


def _load_family(entries, ws, system):
    comps = {}
    defs = {}
    rows = []
    for key, value, lineno in entries:
        if key.startswith("L") and key[1:].isdigit():
            comps[int(key[1:])] = parse(value, ws)
        elif key.startswith("row") and key[3:].isdigit():
            rows.append(parse(value, ws))
        elif ws.lookup(key) is not None and isinstance(ws.lookup(key), Sym) \
                and ws.lookup(key).kind == "coordinate":
            defs[ws.lookup(key)] = parse(value, ws)
        else:
            raise WorkspaceError(
                f"line {lineno}: unknown [multipliers] key '{key}' "
                "(use L<n>, row<n>, or a declared coordinate)")
    if sorted(comps) != list(range(1, len(system.equations) + 1)):
        raise WorkspaceError("[multipliers] must define L1..Lm for every equation")
    components = [comps[i] for i in sorted(comps)]

    if defs:
        coords = tuple(s for s in ws.coordinates if s in defs)
        definitions = tuple(defs[s] for s in coords)
        components = [substitute(c, defs) for c in components]
    else:
        # components carry instantiated kernels over atomic arguments
        args = None
        for c in components:
            for k in fun_kernels_of(c):
                if args is None:
                    args = k.args
                elif k.args != args:
                    raise WorkspaceError(
                        "[multipliers] kernels disagree on their arguments")
        if args is None:
            coords, definitions = (), ()
        else:
            if not all(is_atom(a) for a in args):
                raise WorkspaceError(
                    "[multipliers] without coordinate definitions need "
                    "atomic kernel arguments")
            coords = tuple(args)
            definitions = tuple(args)

    names = sorted({k.name for c in components for k in fun_kernels_of(c)} |
                   {k.name for r in rows for k in fun_kernels_of(r)})
    constraints = None
    if rows:
        constraints = LinearConstraints({nm: coords for nm in names}, rows)
    return MultiplierFamily(components=components, function_names=names,
                            coordinates=coords, definitions=definitions,
                            constraints=constraints)


def _load_transformation(entries, ws):
    kind = None
    tvars = None
    tdeps = None
    z, w, rho = {}, {}, {}
    for key, value, lineno in entries:
        if key == "kind":
            kind = value
        elif key == "vars":
            tvars = _names(value)
        elif key == "deps":
            tdeps = _names(value)
        elif key.startswith("z") and key[1:].isdigit():
            z[int(key[1:])] = value
        elif key.startswith("w") and key[1:].isdigit():
            w[int(key[1:])] = value
        elif key.startswith("rho") and key[3:].isdigit():
            rho[int(key[3:])] = value
        else:
            raise WorkspaceError(f"line {lineno}: unknown [transformation] "
                                 f"key '{key}'")
    if kind not in ("point", "contact"):
        raise WorkspaceError("[transformation] needs kind = point | contact")
    if tvars is None or tdeps is None:
        raise WorkspaceError("[transformation] needs vars = ... and deps = ...")
    tgt = Workspace(tvars, tdeps, [p.name for p in ws.parameters])
    if sorted(z) != list(range(1, ws.n + 1)):
        raise WorkspaceError("[transformation] must define z1..zn")
    if sorted(w) != list(range(1, ws.m + 1)):
        raise WorkspaceError("[transformation] must define w1..wm")
    phi = tuple(parse(z[i], ws) for i in sorted(z))
    psi = tuple(parse(w[i], ws) for i in sorted(w))
    rho_t = None
    if rho:
        if sorted(rho) != list(range(1, ws.n + 1)):
            raise WorkspaceError("[transformation] must define rho1..rhon")
        rho_t = tuple(parse(rho[i], ws) for i in sorted(rho))
    tr = Transformation(kind, ws, tgt, phi, psi, rho_t)
    return tr, tgt
