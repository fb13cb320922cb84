"""JSON serialization for the domain types.

Chain complexes follow the interchange schema
{"field": "Q"|"F2"|"F<p>", "dims": {"<degree>": n},
 "diff": {"<degree>": [[r, c, "num/den"], ...]}, "labels": {...}};
degrees are decimal strings (possibly negative) and scalars are strings to
keep rational entries exact.  Equivariant complexes add {"group": [...],
"action": {"s_<i>": {"<degree>": [[r, c, "v"], ...]}}}; symmetric sequences,
coalgebras and cosimplicial complexes nest these documents."""

from __future__ import annotations

import json

from .chain import ChainComplex, ChainMap, DegreeWindow
from .equivariant import EquivariantComplex
from .fields import FieldSpec, field_from_name
from .operads import SymmetricSequence
from .perms import YoungGroup
from .sparse import SparseMatrix


def _label_to_json(lab):
    if isinstance(lab, tuple):
        return {"t": [_label_to_json(x) for x in lab]}
    if isinstance(lab, (int, str)):
        return lab
    raise TypeError("unserializable label %r" % (lab,))


def _label_from_json(doc):
    if isinstance(doc, dict) and "t" in doc:
        return tuple(_label_from_json(x) for x in doc["t"])
    if isinstance(doc, (int, str)):
        return doc
    raise ValueError("bad label document %r" % (doc,))


def matrix_to_json(m: SparseMatrix):
    field = m.field
    return [[i, j, field.format_scalar(v)]
            for (i, j), v in sorted(m.entries.items())]


def matrix_from_json(doc, rows, cols, field) -> SparseMatrix:
    m = SparseMatrix(rows, cols, field)
    for r, c, v in doc:
        m[r, c] = field.parse_scalar(v)
    return m


def chain_to_json(c: ChainComplex):
    out = {
        "field": c.field.name(),
        "dims": {str(k): n for k, n in sorted(c.dims.items())},
        "diff": {str(k): matrix_to_json(m) for k, m in sorted(c.diff.items())},
        "labels": {str(k): [_label_to_json(lab) for lab in labs]
                   for k, labs in sorted(c.labels.items())},
    }
    return out


def chain_from_json(doc) -> ChainComplex:
    field = field_from_name(doc["field"])
    dims = {int(k): n for k, n in doc["dims"].items()}
    diff = {}
    for k, entries in doc.get("diff", {}).items():
        k = int(k)
        diff[k] = matrix_from_json(entries, dims.get(k - 1, 0),
                                   dims.get(k, 0), field)
    labels = None
    if doc.get("labels"):
        labels = {int(k): tuple(_label_from_json(x) for x in labs)
                  for k, labs in doc["labels"].items()}
    return ChainComplex(field, dims, diff, labels)


def map_to_json(f: ChainMap):
    return {
        "degree": f.degree,
        "components": {str(k): matrix_to_json(m)
                       for k, m in sorted(f.components.items())},
    }


def map_from_json(doc, source: ChainComplex, target: ChainComplex) -> ChainMap:
    degree = doc.get("degree", 0)
    comps = {}
    for k, entries in doc.get("components", {}).items():
        k = int(k)
        comps[k] = matrix_from_json(entries, target.dim(k + degree),
                                    source.dim(k), source.field)
    return ChainMap(source, target, comps, degree)


def equivariant_to_json(e: EquivariantComplex):
    out = chain_to_json(e.complex)
    out["group"] = list(e.group.blocks)
    out["action"] = {
        "s_%d" % i: {str(k): matrix_to_json(m)
                     for k, m in sorted(f.components.items())}
        for i, f in sorted(e.action.items())
    }
    return out


def equivariant_from_json(doc) -> EquivariantComplex:
    c = chain_from_json(doc)
    group = YoungGroup(tuple(doc["group"]))
    action = {}
    for name, comps in doc.get("action", {}).items():
        i = int(name.split("_")[1])
        f_comps = {}
        for k, entries in comps.items():
            k = int(k)
            f_comps[k] = matrix_from_json(entries, c.dim(k), c.dim(k),
                                          c.field)
        action[i] = ChainMap(c, c, f_comps, check=False)
    return EquivariantComplex(c, group, action)


def sequence_to_json(s: SymmetricSequence):
    return {
        "truncation": s.truncation,
        "field": s.field.name(),
        "terms": {str(n): equivariant_to_json(t)
                  for n, t in sorted(s.terms.items())},
    }


def sequence_from_json(doc) -> SymmetricSequence:
    field = field_from_name(doc["field"])
    terms = {int(n): equivariant_from_json(t)
             for n, t in doc.get("terms", {}).items()}
    return SymmetricSequence(field, doc["truncation"], terms)


def window_to_json(w: DegreeWindow):
    return [w.lo, w.hi]


def window_from_json(doc) -> DegreeWindow:
    return DegreeWindow(doc[0], doc[1])


def coalgebra_to_json(c):
    out = {
        "source": c.source,
        "window": window_to_json(c.window),
        "sequence": sequence_to_json(c.sequence),
        "theta": {"%d,%d" % key: map_to_json(f)
                  for key, f in sorted(c.theta.items())},
    }
    if c.witnesses:
        out["witnesses"] = {"%d,%d,%d" % key:
                            {str(k): matrix_to_json(m)
                             for k, m in sorted(w.items())}
                            for key, w in sorted(c.witnesses.items())}
    return out


def coalgebra_from_json(doc):
    from .coalgebras import TruncatedCoalgebra
    seq = sequence_from_json(doc["sequence"])
    w = window_from_json(doc["window"])
    shell = TruncatedCoalgebra(doc["source"], seq, w, {})
    theta = {}
    for key, fdoc in doc.get("theta", {}).items():
        r, n = (int(x) for x in key.split(","))
        comp = shell.komonad.component(r, n)
        theta[(r, n)] = map_from_json(fdoc, seq.term_complex(r),
                                      comp.value.complex)
    return TruncatedCoalgebra(doc["source"], seq, w, theta,
                              komonad=shell.komonad)


def cosimplicial_to_json(x):
    return {
        "levels": [chain_to_json(lv) for lv in x.levels],
        "coface": {"%d,%d" % key: map_to_json(f)
                   for key, f in sorted(x.cofaces.items())},
        "codeg": {"%d,%d" % key: map_to_json(f)
                  for key, f in sorted(x.codegens.items())},
        "degenerate_above": x.degenerate_above,
    }


def cosimplicial_from_json(doc):
    from .tower import CosimplicialComplex
    levels = [chain_from_json(lv) for lv in doc["levels"]]
    cofaces, codegens = {}, {}
    for key, fdoc in doc.get("coface", {}).items():
        m, i = (int(v) for v in key.split(","))
        cofaces[(m, i)] = map_from_json(fdoc, levels[m], levels[m + 1])
    for key, fdoc in doc.get("codeg", {}).items():
        m, j = (int(v) for v in key.split(","))
        codegens[(m, j)] = map_from_json(fdoc, levels[m], levels[m - 1])
    return CosimplicialComplex(levels, cofaces, codegens,
                               doc.get("degenerate_above"))


def dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def loads(text: str):
    return json.loads(text)


def comonad_value_to_json(k):
    """Serialize a comonad value: per-component complexes with their
    certified windows, and the comultiplication/counit matrices."""
    comps = {}
    for (r, n), comp in sorted(k.components.items()):
        entry = {
            "complex": chain_to_json(comp.value.complex),
            "window": window_to_json(getattr(comp, "window", k.w
                                             if hasattr(k, "w") else
                                             comp.window)),
            "exact": bool(getattr(comp, "exact", False)),
            "kind": comp.kind,
        }
        comps["%d,%d" % (r, n)] = entry
    deltas = {}
    for key, d in sorted(getattr(k, "delta", {}).items()):
        if d is None:
            deltas["%d,%d,%d" % key] = None
        else:
            deltas["%d,%d,%d" % key] = map_to_json(d)
    eps = {}
    for (r, n) in sorted(k.components):
        if r == n and hasattr(k, "epsilon"):
            e = k.epsilon(r)
            if e is not None:
                eps[str(r)] = map_to_json(e)
    return {"components": comps, "delta": deltas, "epsilon": eps}


def comonad_value_from_json(doc):
    """Parse a comonad-value document back into plain data (complexes,
    windows, matrices); canonical print o parse is the identity."""
    out = {"components": {}, "delta": doc.get("delta", {}),
           "epsilon": doc.get("epsilon", {})}
    for key, entry in doc.get("components", {}).items():
        out["components"][key] = {
            "complex": chain_from_json(entry["complex"]),
            "window": window_from_json(entry["window"]),
            "exact": entry.get("exact", False),
            "kind": entry.get("kind"),
        }
    return out


def comonad_value_roundtrip_identical(k) -> bool:
    doc = comonad_value_to_json(k)
    parsed = comonad_value_from_json(doc)
    redoc = {"components": {key: {
        "complex": chain_to_json(entry["complex"]),
        "window": window_to_json(entry["window"]),
        "exact": entry["exact"], "kind": entry["kind"]}
        for key, entry in parsed["components"].items()},
        "delta": parsed["delta"], "epsilon": parsed["epsilon"]}
    return dumps(doc) == dumps(redoc)
