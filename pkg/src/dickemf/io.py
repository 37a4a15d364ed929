"""Bit-stable CSV emission.

All numeric fields are written with 17 significant digits so identical runs
produce byte-identical files regardless of worker count; line endings are LF
and a header row is mandatory.
"""

from __future__ import annotations

import csv
import io as _io

from .model import phase_name


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_csv(path: str, header: list[str], rows) -> None:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def phase_map_rows(pm) -> tuple[list[str], list]:
    header = ["x", "nu", "phase", "xi", "energy"]
    rows = []
    for ix, x in enumerate(pm.x_vals):
        for iy, nu in enumerate(pm.nu_vals):
            rows.append([float(x), float(nu), phase_name(int(pm.labels[ix, iy])),
                         float(pm.xi[ix, iy]), float(pm.energy[ix, iy])])
    return header, rows


def boundary_rows(pm) -> tuple[list[str], list]:
    header = ["x", "nu", "kind", "order"]
    rows = []
    for b in pm.boundaries:
        for pt in b.points:
            rows.append([float(pt[0]), float(pt[1]), b.kind, b.order])
    return header, rows


def critical_point_rows(points) -> tuple[list[str], list]:
    header = ["kind", "x", "nu", "uncertainty", "res_nu_xi", "res_nu_xixi"]
    rows = []
    for cp in points:
        r1 = float(cp.residuals[0]) if len(cp.residuals) > 0 else 0.0
        r2 = float(cp.residuals[1]) if len(cp.residuals) > 1 else 0.0
        rows.append([cp.kind, float(cp.x), float(cp.nu), float(cp.uncertainty), r1, r2])
    return header, rows
