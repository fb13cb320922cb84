"""Batch command-line interface.

Subcommands: homology, tate, bar-com, partition-nerve, k-top, k-sp, cobar,
pn, derived-hom, bk-e1, classify, mccarthy, check.  Inputs are JSON
documents; output is deterministic JSON with every homological claim carrying
its certified degree window.  Exit codes: 0 success, 1 validation failure,
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import serialize
from .chain import DegreeWindow
from .fields import field_from_name


MAX_DIM_ENV = "TCALC_MAX_DIM"


def _max_dim():
    return int(os.environ.get(MAX_DIM_ENV, "20000"))


def _parse_window(text):
    try:
        lo, hi = text.split(":")
        return DegreeWindow(int(lo), int(hi))
    except Exception:
        raise UsageError("--window must be lo:hi with lo <= hi")


class UsageError(Exception):
    pass


class ValidationFailure(Exception):
    def __init__(self, payload):
        self.payload = payload


def _load_doc(path):
    try:
        with open(path) as f:
            return json.load(f)
    except FileNotFoundError:
        raise UsageError("input file not found: %s" % path)
    except json.JSONDecodeError as e:
        raise UsageError("malformed JSON in %s: %s" % (path, e))


def _emit(args, payload):
    text = serialize.dumps(payload)
    if getattr(args, "out", None):
        with open(args.out, "w") as f:
            f.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _guard_dims(c):
    if c.total_dim() > _max_dim():
        raise UsageError("complex exceeds %s=%d basis elements" %
                         (MAX_DIM_ENV, _max_dim()))


def _windowed_dims(complex_, w):
    return {str(k): complex_.homology(k)[0] for k in w.degrees()}


def cmd_homology(args):
    c = serialize.chain_from_json(_load_doc(args.input))
    _guard_dims(c)
    dims = {str(k): c.homology(k)[0] for k in c.support()}
    _emit(args, {"command": "homology", "dims": dims,
                 "window": "all supported degrees (finite complex)"})
    return 0


def cmd_tate(args):
    from .equivariant import tate
    w = _parse_window(args.window)
    e = serialize.equivariant_from_json(_load_doc(args.input))
    _guard_dims(e.complex)
    t = tate(e, w)
    _emit(args, {"command": "tate", "group": list(e.group.blocks),
                 "dims": _windowed_dims(t.complex, w),
                 "window": serialize.window_to_json(w)})
    return 0


def cmd_bar_com(args):
    from .fields import field_from_name
    from .operads import bar_construction, commutative_operad
    field = field_from_name(args.field)
    com = commutative_operad(field, args.n)
    bc, normalized, coop = bar_construction(com)
    out = {"command": "bar-com", "arity": args.n,
           "normalized_dims": {str(k): normalized[args.n].dim(k)
                               for k in normalized[args.n].support()},
           "homology": {str(k): normalized[args.n].homology(k)[0]
                        for k in normalized[args.n].support()},
           "window": "exact (finite complex)"}
    _emit(args, out)
    return 0


def cmd_partition_nerve(args):
    from .operads import partition_poset_nerve
    field = field_from_name(args.field)
    nerve, comparison = partition_poset_nerve(field, args.n)
    _emit(args, {"command": "partition-nerve", "n": args.n,
                 "nerve_dims": {str(k): nerve.complex.dim(k)
                                for k in nerve.complex.support()},
                 "comparison_homology": {str(k): comparison.homology(k)[0]
                                         for k in comparison.support()},
                 "window": "exact (finite complex)"})
    return 0


def cmd_k_top(args):
    from .comonads import k_top_component
    w = _parse_window(args.window)
    e = serialize.equivariant_from_json(_load_doc(args.input))
    _guard_dims(e.complex)
    res = k_top_component(e, args.r, w)
    _emit(args, {"command": "k-top", "r": args.r, "n": e.group.degree,
                 "dims": _windowed_dims(res.complex, w),
                 "exact": res.exact,
                 "window": serialize.window_to_json(w)})
    return 0


def cmd_k_sp(args):
    from .comonads import k_sp_component
    w = _parse_window(args.window)
    e = serialize.equivariant_from_json(_load_doc(args.input))
    _guard_dims(e.complex)
    res = k_sp_component(e, args.r, w)
    _emit(args, {"command": "k-sp", "r": args.r, "n": e.group.degree,
                 "dims": _windowed_dims(res.complex, w),
                 "window": serialize.window_to_json(w)})
    return 0


def _parse_site(text, source):
    if source == "sp":
        if not text.startswith("S"):
            raise UsageError("sp sites are spheres S<d>")
        return int(text[1:])
    if not text.startswith("set:"):
        raise UsageError("top sites are set:<m>")
    from .coalgebras import FinitePointedSet
    return FinitePointedSet(int(text.split(":")[1]))


def cmd_cobar(args):
    from .tower import cobar
    c = serialize.coalgebra_from_json(_load_doc(args.input))
    site = _parse_site(args.site, c.source)
    cs = cobar(c, site, c.window)
    _emit(args, {"command": "cobar",
                 "levels": [
                     {str(k): lv.dim(k) for k in lv.support()}
                     for lv in cs.levels],
                 "degenerate_above": cs.degenerate_above,
                 "window": serialize.window_to_json(c.window)})
    return 0


def cmd_pn(args):
    from .tower import p_n
    c = serialize.coalgebra_from_json(_load_doc(args.input))
    site = _parse_site(args.site, c.source)
    routes = [args.route] if args.route != "both" else ["tot", "pullback"]
    reports = {}
    for route in routes:
        st = p_n(c, site, args.n, route=route)
        reports[route] = {
            "dims": _windowed_dims(st["complex"], st["window"]),
            "window": serialize.window_to_json(st["window"]),
        }
    payload = {"command": "pn", "n": args.n, "routes": reports}
    if len(reports) == 2:
        payload["routes_agree"] = \
            reports["tot"]["dims"] == reports["pullback"]["dims"]
    _emit(args, payload)
    return 0


def cmd_derived_hom(args):
    from .tower import derived_hom
    c = serialize.coalgebra_from_json(_load_doc(args.input))
    c2 = serialize.coalgebra_from_json(_load_doc(args.second))
    r = derived_hom(c, c2)
    _emit(args, {"command": "derived-hom", "h0": r["h0"],
                 "dims": _windowed_dims(r["complex"], r["window"]),
                 "window": serialize.window_to_json(r["window"])})
    return 0


def cmd_bk_e1(args):
    from .tower import bk_e1, einf_dims
    c = serialize.coalgebra_from_json(_load_doc(args.input))
    c2 = serialize.coalgebra_from_json(_load_doc(args.second))
    r = bk_e1(c, c2)
    page = r["e1"]
    einf = einf_dims(r)
    _emit(args, {"command": "bk-e1",
                 "e1": {"%d,%d" % k: v for k, v in sorted(page.dims().items())},
                 "d1_squared_zero": page.d1_squared_zero(),
                 "e2": {"%d,%d" % k: v for k, v in
                        sorted(page.e2_dims().items())},
                 "einf": {"%d,%d" % k: v for k, v in sorted(einf.items())},
                 "window": serialize.window_to_json(r["window"])})
    return 0


def cmd_classify(args):
    from .classify import classify_2exc_sp, classify_2exc_top, classify_3exc_sp
    w = _parse_window(args.window)
    doc = _load_doc(args.input)
    a1 = serialize.chain_from_json(doc["a1"])
    a2 = serialize.equivariant_from_json(doc["a2"])
    if args.variant == "sp_sp_2":
        rep = classify_2exc_sp(a1, a2, w)
    elif args.variant == "top_sp_2":
        rep = classify_2exc_top(a1, a2, w)
    elif args.variant == "sp_sp_3":
        a3 = serialize.equivariant_from_json(doc["a3"])
        rep = classify_3exc_sp(a1, a2, a3, w)
    else:
        raise UsageError("unknown classify variant %r" % args.variant)
    payload = {"command": "classify", "variant": args.variant}
    payload.update({k: (list(v) if isinstance(v, tuple) else v)
                    for k, v in rep.items()
                    if k in ("dim", "dims", "classes", "square_vacuous",
                             "window")})
    _emit(args, payload)
    return 0


def cmd_mccarthy(args):
    from .classify import mccarthy_square_check
    c = serialize.coalgebra_from_json(_load_doc(args.input))
    site = _parse_site(args.site, c.source)
    rep = mccarthy_square_check(c, site, args.n)
    _emit(args, {"command": "mccarthy", "n": args.n,
                 "acyclic": rep["acyclic"],
                 "homology": {str(k): v for k, v in rep["homology"].items()},
                 "window": rep["window"]})
    return 0 if rep["acyclic"] else 1


def cmd_check(args):
    """Full invariant suite on a coalgebra document."""
    from .coalgebras import validate_coalgebra
    c = serialize.coalgebra_from_json(_load_doc(args.input))
    rep = validate_coalgebra(c)
    payload = {"command": "check", "valid": rep["valid"],
               "failures": rep["failures"],
               "squares": {"%d,%d,%d" % k: v
                           for k, v in sorted(rep["squares"].items())},
               "window": serialize.window_to_json(c.window)}
    _emit(args, payload)
    return 0 if rep["valid"] else 1


def build_parser():
    p = argparse.ArgumentParser(
        prog="tcalc",
        description="Exact chain-level Taylor tower calculator")
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp, window=True, input_file=True):
        if window:
            sp.add_argument("--window", required=window,
                            help="certified degree window lo:hi")
        if input_file:
            sp.add_argument("input", help="input JSON document")
        sp.add_argument("--out", help="output path (default stdout)")
        sp.add_argument("--format", default="json", choices=["json"])
        sp.add_argument("--arity-max", type=int, default=4)

    sp = sub.add_parser("homology")
    add_common(sp, window=False)
    sp.set_defaults(func=cmd_homology)

    sp = sub.add_parser("tate")
    sp.add_argument("--group", help="informational group tag")
    sp.add_argument("--field", help="informational field tag")
    add_common(sp)
    sp.set_defaults(func=cmd_tate)

    sp = sub.add_parser("bar-com")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--field", required=True)
    add_common(sp, window=False, input_file=False)
    sp.set_defaults(func=cmd_bar_com)

    sp = sub.add_parser("partition-nerve")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--field", required=True)
    add_common(sp, window=False, input_file=False)
    sp.set_defaults(func=cmd_partition_nerve)

    sp = sub.add_parser("k-top")
    sp.add_argument("--r", type=int, required=True)
    add_common(sp)
    sp.set_defaults(func=cmd_k_top)

    sp = sub.add_parser("k-sp")
    sp.add_argument("--r", type=int, required=True)
    add_common(sp)
    sp.set_defaults(func=cmd_k_sp)

    sp = sub.add_parser("cobar")
    sp.add_argument("--site", required=True)
    add_common(sp, window=False)
    sp.set_defaults(func=cmd_cobar)

    sp = sub.add_parser("pn")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--site", required=True)
    sp.add_argument("--route", default="both",
                    choices=["tot", "pullback", "both"])
    add_common(sp, window=False)
    sp.set_defaults(func=cmd_pn)

    sp = sub.add_parser("derived-hom")
    sp.add_argument("second", help="second coalgebra JSON document")
    add_common(sp, window=False)
    sp.set_defaults(func=cmd_derived_hom)

    sp = sub.add_parser("bk-e1")
    sp.add_argument("second")
    add_common(sp, window=False)
    sp.set_defaults(func=cmd_bk_e1)

    sp = sub.add_parser("classify")
    sp.add_argument("--variant", required=True,
                    choices=["sp_sp_2", "sp_sp_3", "top_sp_2"])
    add_common(sp)
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("mccarthy")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--site", required=True)
    add_common(sp, window=False)
    sp.set_defaults(func=cmd_mccarthy)

    sp = sub.add_parser("check")
    add_common(sp, window=False)
    sp.set_defaults(func=cmd_check)

    return p


def main(argv=None):
    parser = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    # accept `--window -4:4` by gluing the value (argparse would otherwise
    # read a leading minus as an option)
    glued = []
    i = 0
    while i < len(argv):
        if argv[i] == "--window" and i + 1 < len(argv):
            glued.append("--window=" + argv[i + 1])
            i += 2
        else:
            glued.append(argv[i])
            i += 1
    try:
        args = parser.parse_args(glued)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        return args.func(args)
    except UsageError as e:
        sys.stderr.write(serialize.dumps({"error": "usage", "detail": str(e)})
                         + "\n")
        return 2
    except (ValueError, KeyError, ArithmeticError) as e:
        sys.stderr.write(serialize.dumps({"error": "validation",
                                          "detail": str(e)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
