"""Fixed-format MPS export and external-solution import.

The bridge to external MIP solvers: write the model as fixed-format
MPS with mangled 8-character names, solve it elsewhere, read the
variable values back from a plain "<name> <value>" file and validate
them against the model.
"""

from __future__ import annotations

import math

import numpy as np

from .model import EQ, GE, LE, LinearModel, MipSolution

OBJ_NAME = "OBJ"

# Fixed-format field start columns (1-based): indicator, name, name,
# value, name, value.
_FIELDS = (2, 5, 15, 25, 40, 50)


def mangle_names(model: LinearModel) -> tuple[dict[str, str], dict[str, str]]:
    """Deterministic <= 8 character names for rows and variables.

    Rows become R0000001.. in row order, variables C0000001.. in
    variable order, so the same model always mangles the same way.
    """
    row_map = {name: f"R{i + 1:07d}" for i, name in enumerate(model.row_names)}
    var_map = {name: f"C{i + 1:07d}" for i, name in enumerate(model.var_names)}
    return row_map, var_map


def _line(*fields: tuple[int, str]) -> str:
    out = []
    for col, text in fields:
        pad = col - 1 - len(out)
        if pad > 0:
            out.append(" " * pad)
        out.append(text)
    return "".join(out).rstrip()


def _num(v: float) -> str:
    if v == int(v) and abs(v) < 1e10:
        return f"{int(v)}.0"
    return f"{v:.8g}"


def export_mps(model: LinearModel, path: str) -> None:
    """Write the model as fixed-format MPS.

    The name-mangling table is written next to the file as
    "<path>.names" with one "<short> <original>" pair per line.
    """
    row_map, var_map = mangle_names(model)
    sense_tag = {LE: "L", GE: "G", EQ: "E"}
    lines = [f"NAME          {model.name[:60]}"]
    lines.append("ROWS")
    lines.append(_line((2, "N"), (5, OBJ_NAME)))
    for name, sense in zip(model.row_names, model.senses):
        lines.append(_line((2, sense_tag[sense]), (5, row_map[name])))

    # Coefficients grouped by variable; binaries sit inside
    # INTORG/INTEND marker blocks.
    lines.append("COLUMNS")
    by_var: dict[int, list[tuple[str, float]]] = {j: [] for j in range(model.n_vars)}
    for i, coeffs in enumerate(model.row_coeffs):
        short = row_map[model.row_names[i]]
        for j, v in coeffs.items():
            by_var[j].append((short, v))
    in_int = False
    marker = 0
    for j in range(model.n_vars):
        if model.binary[j] != in_int:
            tag = "'INTORG'" if model.binary[j] else "'INTEND'"
            marker += 1
            lines.append(_line((5, f"MARK{marker:04d}"), (15, "'MARKER'"), (40, tag)))
            in_int = model.binary[j]
        short = var_map[model.var_names[j]]
        entries = [(OBJ_NAME, model.obj[j])] + by_var[j]
        for a in range(0, len(entries), 2):
            pair = entries[a : a + 2]
            fields = [(5, short), (15, pair[0][0]), (25, _num(pair[0][1]))]
            if len(pair) == 2:
                fields += [(40, pair[1][0]), (50, _num(pair[1][1]))]
            lines.append(_line(*fields))
    if in_int:
        marker += 1
        lines.append(_line((5, f"MARK{marker:04d}"), (15, "'MARKER'"), (40, "'INTEND'")))

    lines.append("RHS")
    entries = [
        (row_map[model.row_names[i]], r) for i, r in enumerate(model.rhs) if r != 0.0
    ]
    for a in range(0, len(entries), 2):
        pair = entries[a : a + 2]
        fields = [(5, "RHS"), (15, pair[0][0]), (25, _num(pair[0][1]))]
        if len(pair) == 2:
            fields += [(40, pair[1][0]), (50, _num(pair[1][1]))]
        lines.append(_line(*fields))

    lines.append("BOUNDS")
    for j in range(model.n_vars):
        short = var_map[model.var_names[j]]
        lb, ub = model.lb[j], model.ub[j]
        if model.binary[j]:
            lines.append(_line((2, "BV"), (5, "BND"), (15, short)))
            continue
        if lb == ub:
            lines.append(_line((2, "FX"), (5, "BND"), (15, short), (25, _num(lb))))
            continue
        if lb == -math.inf:
            lines.append(_line((2, "MI"), (5, "BND"), (15, short)))
        elif lb != 0.0:
            lines.append(_line((2, "LO"), (5, "BND"), (15, short), (25, _num(lb))))
        if ub != math.inf:
            lines.append(_line((2, "UP"), (5, "BND"), (15, short), (25, _num(ub))))
    lines.append("ENDATA")

    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    with open(path + ".names", "w") as fh:
        for name, short in row_map.items():
            fh.write(f"{short} {name}\n")
        for name, short in var_map.items():
            fh.write(f"{short} {name}\n")


def read_external_solution(model: LinearModel, path: str) -> MipSolution:
    """Read "<name> <value>" lines and validate them against the model.

    Names may be originals or the mangled short forms.  Missing
    variables default to their lower bound (0 for unbounded-below).
    Raises ValueError on unknown names or constraint violations beyond
    1e-6.
    """
    _, var_map = mangle_names(model)
    index = {name: j for j, name in enumerate(model.var_names)}
    for name, short in var_map.items():
        index[short] = index[name]

    x = np.where(np.isfinite(model.arrays()[4]), model.arrays()[4], 0.0)
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 2:
                raise ValueError(f"{path}:{lineno}: expected '<name> <value>'")
            name, value = parts[0], parts[1]
            if name not in index:
                raise ValueError(f"{path}:{lineno}: unknown variable {name!r}")
            try:
                x[index[name]] = float(value)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad value {value!r}") from exc

    bad = model.check_feasible(x, tol=1e-6)
    if bad:
        raise ValueError(f"external solution violates: {', '.join(bad[:5])}")
    return MipSolution(
        status="imported",
        objective=model.objective_value(x),
        x=x,
        bound=-math.inf,
        gap=math.inf,
    )
