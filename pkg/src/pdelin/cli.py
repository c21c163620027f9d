"""Command-line surface.

    pdelin detsys FILE      multiplier determining system + heuristic reduction
    pdelin linearize FILE   full pipeline: match, identity, mapping, target
    pdelin verify FILE      verify multipliers and/or a declared transformation

Exit codes: 0 ok, 2 rejected (no multiplier family of the required form /
degenerate factors), 3 input error, 4 residual failure.  Results are printed
as an indented key-value document or as JSON (--json); every expression in a
document re-parses to an equal expression."""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import sys
from importlib import resources

from . import __version__
from .conslaw import (MultiplierAnsatz, determining_system,
                      reduce_determining_system, reduce_family_constraints,
                      verify_multipliers)
from .errors import ExtractionError, ParseError, PdelinError, WorkspaceError
from .expr import is_zero, set_max_terms
from .grammar import to_text
from .linearize import (Rejection, augmented_identity, build_mapping,
                        match_multiplier_form, target_system,
                        verify_linearization)
from .mapping import (apply_transformation, check_contact_condition,
                      equations_match_up_to_factor)
from .wsfile import load_workspace_text

EXIT_OK = 0
EXIT_REJECTED = 2
EXIT_INPUT = 3
EXIT_RESIDUAL = 4


class CliFailure(Exception):
    def __init__(self, code, message):
        self.code = code
        self.message = message
        super().__init__(message)


def _render_text(doc, indent=0):
    lines = []
    pad = "  " * indent
    for key, value in doc.items():
        if isinstance(value, dict):
            lines.append(f"{pad}{key}:")
            lines.extend(_render_text(value, indent + 1))
        elif isinstance(value, (list, tuple)):
            lines.append(f"{pad}{key}:")
            for item in value:
                if isinstance(item, dict):
                    lines.extend(_render_text(item, indent + 1))
                    lines.append(f"{pad}  -")
                else:
                    lines.append(f"{pad}  - {item}")
        else:
            lines.append(f"{pad}{key} = {value}")
    return lines if indent else "\n".join(lines)


def _provenance(text):
    return {
        "tool": f"pdelin {__version__}",
        "input-sha256": hashlib.sha256(text.encode()).hexdigest(),
        "generated-at": datetime.datetime.now(datetime.timezone.utc)
        .isoformat(timespec="seconds"),
    }


def _system_doc(wf):
    ws = wf.workspace
    return {
        "independents": ", ".join(s.name for s in ws.independents),
        "dependents": ", ".join(ws.dependents),
        "parameters": ", ".join(s.name for s in ws.parameters),
        "equations": {nm: to_text(g)
                      for nm, g in zip(wf.equation_names, wf.system.equations)},
    }


def _family_doc(fam):
    doc = {
        "components": {f"L{i+1}": to_text(c)
                       for i, c in enumerate(fam.components)},
        "coordinates": {getattr(c, "name", to_text(c)): to_text(d)
                        for c, d in zip(fam.coordinates, fam.definitions)},
    }
    if fam.constraints is not None:
        doc["constraint-rows"] = [to_text(r) + " = 0"
                                  for r in fam.constraints.rows]
    return doc


def _resolve_family(wf, args, doc):
    """The family from the file, or one derived by reducing the determining
    system; first-order constraint blocks of a provided family are
    integrated by characteristics."""
    sysm = wf.system
    if wf.family is not None:
        fam, steps = reduce_family_constraints(wf.family, sysm)
        if steps:
            doc["constraint-integration"] = steps
        doc["multipliers"] = dict(_family_doc(fam), source="file")
        return fam
    ansatz = wf.ansatz or MultiplierAnsatz()
    if args.ansatz_order is not None:
        ansatz = MultiplierAnsatz(order=args.ansatz_order, shape=ansatz.shape)
    if args.preset:
        ansatz = MultiplierAnsatz(order=ansatz.order, shape=args.preset)
    det = determining_system(sysm, ansatz)
    doc["determining-system"] = _detsys_doc(det)
    res = reduce_determining_system(det)
    doc["reduction"] = {"case": res.case, "steps": res.steps}
    if res.residual_equations:
        doc["reduction"]["residual-equations"] = [
            to_text(e) + " = 0" for e in res.residual_equations]
    if res.case != "II":
        raise CliFailure(EXIT_REJECTED,
                         "no multiplier family of the arbitrary-function form "
                         f"was derived (case {res.case}); the given system "
                         "does not linearize along this route")
    doc["multipliers"] = dict(_family_doc(res.family),
                              source="determining-system")
    return res.family


def _detsys_doc(det):
    deps = det.system.workspace.dependents
    return {
        "unknowns": {nm: "function of (" + ", ".join(to_text(a) for a in det.arguments) + ")"
                     for nm in det.unknowns},
        "equations": [{"euler": deps[sigma], "monomial": sig,
                       "equation": to_text(eq) + " = 0"}
                      for sigma, sig, eq in det.equations],
    }


def cmd_detsys(wf, args, doc):
    sysm = wf.system
    ansatz = wf.ansatz or MultiplierAnsatz()
    if args.ansatz_order is not None:
        ansatz = MultiplierAnsatz(order=args.ansatz_order, shape=ansatz.shape,
                                  restrict_to=ansatz.restrict_to)
    if args.preset:
        ansatz = MultiplierAnsatz(order=ansatz.order, shape=args.preset,
                                  restrict_to=ansatz.restrict_to)
    det = determining_system(sysm, ansatz)
    doc["determining-system"] = _detsys_doc(det)
    if wf.family is not None:
        fam, steps = reduce_family_constraints(wf.family, sysm)
        if steps:
            doc["constraint-integration"] = steps
        doc["multipliers"] = dict(_family_doc(fam), source="file")
    else:
        res = reduce_determining_system(det)
        doc["reduction"] = {"case": res.case, "steps": res.steps}
        if res.residual_equations:
            doc["reduction"]["residual-equations"] = [
                to_text(e) + " = 0" for e in res.residual_equations]
        if res.family is None:
            # Case I or undetermined: the document carries the residual
            # system; nothing further to verify
            return EXIT_OK
        doc["multipliers"] = dict(_family_doc(res.family),
                                  source="determining-system")
        fam = res.family
    rep = verify_multipliers(sysm, fam, with_fluxes=False)
    doc["family-verification"] = {
        "euler-residuals": [to_text(r) for r in rep.residuals],
        "ok": rep.ok,
    }
    if rep.singular_warnings:
        doc["family-verification"]["warnings"] = rep.singular_warnings
    if not rep.ok:
        raise CliFailure(EXIT_RESIDUAL, "derived family fails verification")
    return EXIT_OK


def cmd_linearize(wf, args, doc):
    fam = _resolve_family(wf, args, doc)
    cand = match_multiplier_form(fam, wf.system)
    if isinstance(cand, Rejection):
        doc["match"] = {"rejected": cand.reason}
        raise CliFailure(EXIT_REJECTED, f"not linearizable as presented: "
                                        f"{cand.reason}")
    doc["match"] = {
        "X": {c.name: to_text(d) for c, d in zip(cand.coords, cand.X)},
        "jacobian": to_text(cand.J),
        "Q": [[to_text(q) for q in row] for row in cand.Q],
    }
    try:
        rec = augmented_identity(cand)
    except ExtractionError as exc:
        doc["augmented-identity"] = {"failed": str(exc)}
        raise CliFailure(EXIT_REJECTED, f"dependent-part extraction failed: {exc}")
    doc["augmented-identity"] = {
        "W": [to_text(w) for w in rec.W],
        "fluxes": [to_text(f) for f in rec.fluxes],
        "residual": to_text(rec.residual),
    }
    if not is_zero(rec.residual):
        raise CliFailure(EXIT_RESIDUAL, "augmented identity residual is nonzero")
    tr = build_mapping(cand)
    doc["transformation"] = _transformation_doc(tr)
    tsys = target_system(cand)
    doc["target-system"] = [to_text(e) + " = 0" for e in tsys.equations]
    rep = verify_linearization(wf.system, cand)
    doc["verification"] = {
        "identity-residuals": [to_text(r) for r in rep.identity_residuals],
        "mapping-check": ("ok" if rep.mapping_ok
                          else "skipped" if not rep.mapping_checked
                          else "mismatch"),
    }
    if rep.messages:
        doc["verification"]["messages"] = rep.messages
    if not rep.ok:
        raise CliFailure(EXIT_RESIDUAL, "linearization verification failed")
    return EXIT_OK


def _transformation_doc(tr):
    doc = {"kind": tr.kind}
    for i, p in enumerate(tr.phi):
        doc[f"z{i+1} ({tr.target.independents[i].name})"] = to_text(p)
    for s, p in enumerate(tr.psi):
        doc[f"w{s+1} ({tr.target.dependents[s]})"] = to_text(p)
    if tr.rho:
        for i, r in enumerate(tr.rho):
            doc[f"rho{i+1}"] = to_text(r)
    return doc


def cmd_verify(wf, args, doc):
    did = False
    code = EXIT_OK
    if wf.family is not None:
        did = True
        fam, steps = reduce_family_constraints(wf.family, wf.system)
        if steps:
            doc["constraint-integration"] = steps
        doc["multipliers"] = _family_doc(fam)
        rep = verify_multipliers(wf.system, fam)
        vdoc = {
            "euler-residuals": [to_text(r) for r in rep.residuals],
            "ok": rep.ok,
        }
        if rep.fluxes is not None:
            vdoc["fluxes"] = [to_text(f) for f in rep.fluxes]
            vdoc["flux-residual"] = to_text(rep.flux_residual)
        if rep.singular_warnings:
            vdoc["warnings"] = rep.singular_warnings
        if rep.messages:
            vdoc["messages"] = rep.messages
        doc["multiplier-verification"] = vdoc
        if not rep.ok or (rep.flux_residual is not None
                          and not is_zero(rep.flux_residual)):
            code = EXIT_RESIDUAL
    if wf.transformation is not None:
        did = True
        tr = wf.transformation
        doc["transformation"] = _transformation_doc(tr)
        tdoc = {}
        if tr.kind == "contact":
            ok = check_contact_condition(tr)
            tdoc["contact-condition"] = "ok" if ok else "violated"
            if not ok:
                code = EXIT_RESIDUAL
        if wf.target_equations is not None and code == EXIT_OK:
            rep = apply_transformation(wf.system, tr)
            tdoc["transformed-system"] = [to_text(e) + " = 0"
                                          for e in rep.equations]
            match = equations_match_up_to_factor(rep.equations,
                                                 wf.target_equations)
            tdoc["matches-target"] = match
            if rep.messages:
                tdoc["messages"] = rep.messages
            if not match:
                code = EXIT_RESIDUAL
        doc["transformation-verification"] = tdoc
    if not did:
        raise CliFailure(EXIT_INPUT,
                         "verify needs [multipliers] or [transformation]")
    if code != EXIT_OK:
        raise CliFailure(code, "verification reported a nonzero residual")
    return EXIT_OK


_COMMANDS = {"detsys": cmd_detsys, "linearize": cmd_linearize,
             "verify": cmd_verify}


def bundled_path(name):
    ref = resources.files("pdelin").joinpath(f"corpus/{name}.ws")
    return ref


def _read_input(path):
    if path.endswith(".ws"):
        base = path[:-3]
    else:
        base = path
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError:
        ref = bundled_path(base.rsplit("/", 1)[-1])
        try:
            return ref.read_text(encoding="utf-8")
        except OSError as exc:
            raise CliFailure(EXIT_INPUT, f"cannot read '{path}': {exc}")


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="pdelin",
        description="Invertible linearization of nonlinear PDE systems "
                    "through conservation-law multipliers.")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("file", help="workspace file (or a bundled name: "
                                     "burgers, pipeline, telegraph)")
    parser.add_argument("--ansatz-order", type=int, default=None,
                        help="multiplier jet order for the determining system")
    parser.add_argument("--preset", choices=("general", "fixed-independents",
                                             "integrating-factor"),
                        default=None)
    parser.add_argument("--json", action="store_true",
                        help="emit the result document as JSON")
    parser.add_argument("--max-terms", type=int, default=200000,
                        help="expression-size guard")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for numeric probe points")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # keep exit code 2 reserved for rejected linearizations
        raise SystemExit(EXIT_INPUT if exc.code not in (0, None) else 0)
    set_max_terms(args.max_terms)
    from .probe import set_default_probe_seed
    set_default_probe_seed(args.seed)

    doc = {"command": args.command, "status": "ok"}
    code = EXIT_OK
    try:
        text = _read_input(args.file)
        doc["provenance"] = _provenance(text)
        try:
            wf = load_workspace_text(text)
        except (WorkspaceError, ParseError) as exc:
            raise CliFailure(EXIT_INPUT, str(exc))
        doc["system"] = _system_doc(wf)
        code = _COMMANDS[args.command](wf, args, doc)
    except CliFailure as fail:
        doc["status"] = {EXIT_REJECTED: "rejected", EXIT_INPUT: "error",
                         EXIT_RESIDUAL: "error"}.get(fail.code, "error")
        doc["message"] = fail.message
        code = fail.code
    except PdelinError as exc:
        doc["status"] = "error"
        doc["message"] = f"{type(exc).__name__}: {exc}"
        code = EXIT_RESIDUAL
    out = json.dumps(doc, indent=2, sort_keys=True) if args.json \
        else _render_text(doc)
    print(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
