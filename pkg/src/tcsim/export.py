"""File formats: 16-bit PGM layers with a JSON sidecar, CSV trajectories, SVG top view."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .gridmap import GridMap

PGM_MAX = 65535


def write_pgm(path, levels: np.ndarray) -> None:
    """Binary 16-bit PGM (P5, big-endian). Row 0 of ``levels`` is written first."""
    levels = np.asarray(levels)
    if levels.min(initial=0) < 0 or levels.max(initial=0) > PGM_MAX:
        raise ValueError("PGM levels must lie in [0, 65535]")
    rows, cols = levels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n{PGM_MAX}\n".encode("ascii"))
        fh.write(levels.astype(">u2").tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while data[pos:pos + 1] not in (b"\n", b""):
                pos += 1
            continue
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos].decode("ascii"))
    pos += 1  # single whitespace after maxval
    magic, cols, rows, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic != "P5":
        raise ValueError(f"{path}: only binary PGM (P5) is supported")
    dtype = ">u2" if maxval > 255 else "u1"
    return np.frombuffer(data, dtype=dtype, count=rows * cols, offset=pos).reshape(rows, cols).astype(np.int64)


def _layer_scale(values: np.ndarray) -> tuple[float, float]:
    finite = values[~np.isnan(values)]
    if finite.size == 0:
        return 0.0, 1.0
    lo, hi = float(finite.min()), float(finite.max())
    # level 0 is reserved for absent cells
    scale = (hi - lo) / (PGM_MAX - 1) if hi > lo else 1.0
    return lo, scale


def save_map(gmap: GridMap, out_dir, exact: bool = True) -> None:
    """One PGM (+ ``_mask`` PGM) per layer and ``map.json`` metadata.

    Present cells store ``1 + round((v - offset) / scale)``, absent cells 0.
    With ``exact`` the float layers are also kept in ``layers.npz`` so a
    reload is value-identical.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "resolution": gmap.resolution,
        "origin": list(gmap.origin),
        "dims": list(gmap.dims),
        "layers": {},
    }
    for name in sorted(gmap.layers):
        values = gmap.layers[name]
        offset, scale = _layer_scale(values)
        valid = ~np.isnan(values)
        levels = np.zeros(values.shape, dtype=np.int64)
        levels[valid] = 1 + np.rint((values[valid] - offset) / scale).astype(np.int64)
        write_pgm(out / f"{name}.pgm", levels)
        write_pgm(out / f"{name}_mask.pgm", valid.astype(np.int64) * PGM_MAX)
        meta["layers"][name] = {"offset": offset, "scale": scale, "file": f"{name}.pgm",
                                "mask": f"{name}_mask.pgm"}
    (out / "map.json").write_text(json.dumps(meta, indent=2) + "\n")
    if exact:
        with open(out / "layers.npz", "wb") as fh:
            np.savez(fh, **{k: gmap.layers[k] for k in sorted(gmap.layers)})


def load_map(map_dir) -> GridMap:
    """Inverse of :func:`save_map`; exact if ``layers.npz`` is present."""
    d = Path(map_dir)
    meta = json.loads((d / "map.json").read_text())
    layers = {}
    npz = d / "layers.npz"
    if npz.exists():
        with np.load(npz) as z:
            layers = {k: z[k].astype(float) for k in z.files}
    else:
        for name, info in meta["layers"].items():
            levels = read_pgm(d / info["file"])
            mask = read_pgm(d / info["mask"]) > 0
            vals = info["offset"] + (levels - 1) * info["scale"]
            layers[name] = np.where(mask, vals, np.nan)
    return GridMap(meta["resolution"], tuple(meta["origin"]), tuple(meta["dims"]), layers)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def write_jsonl(path, records) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _color(t: float) -> str:
    # red (0) -> yellow -> green (1)
    t = min(max(t, 0.0), 1.0)
    r = int(round(255 * min(1.0, 2 * (1 - t))))
    g = int(round(255 * min(1.0, 2 * t)))
    return f"#{r:02x}{g:02x}30"


def map_svg(gmap: GridMap, trajectories=None, anchor=None, landing=None, px: float = 6.0) -> str:
    """Top view: traversability colors, robot trajectories and markers.

    ``trajectories`` maps a label to ``(color, [(x, y), ...])``. No
    timestamps are embedded, so identical inputs give identical text.
    """
    rows, cols = gmap.dims
    w, h = cols * px, rows * px
    x0 = gmap.origin[0] - gmap.resolution / 2
    y0 = gmap.origin[1] - gmap.resolution / 2

    def to_px(x, y):
        return (x - x0) / gmap.resolution * px, h - (y - y0) / gmap.resolution * px

    trav = gmap.layers.get("traversability")
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:g}" height="{h:g}" viewBox="0 0 {w:g} {h:g}">',
             f'<rect width="{w:g}" height="{h:g}" fill="#444444"/>']
    if trav is not None:
        for r in range(rows):
            for c in range(cols):
                v = trav[r, c]
                if np.isnan(v):
                    continue
                parts.append(f'<rect x="{c * px:g}" y="{h - (r + 1) * px:g}" width="{px:g}" height="{px:g}" '
                             f'fill="{_color(float(v))}"/>')
    for label, (color, pts) in (trajectories or {}).items():
        if len(pts) < 2:
            continue
        coords = " ".join("{:.2f},{:.2f}".format(*to_px(x, y)) for x, y in pts)
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2">'
                     f'<title>{label}</title></polyline>')
    if anchor is not None:
        ax, ay = to_px(*anchor)
        parts.append(f'<circle cx="{ax:.2f}" cy="{ay:.2f}" r="{2 * px:g}" fill="none" stroke="red" stroke-width="2">'
                     f'<title>anchor</title></circle>')
    if landing is not None:
        lx, ly = to_px(*landing)
        parts.append(f'<rect x="{lx - px:.2f}" y="{ly - px:.2f}" width="{2 * px:g}" height="{2 * px:g}" '
                     f'fill="none" stroke="white" stroke-width="2"><title>landing</title></rect>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
