"""Plain-text frame snapshots with full double precision.

Layout::

    MCFLAB v1 d=2 rep=rot t=0.125 n=81 closed=1 poles=1,1
    0 x r lam_1 .. lam_d H dH_1 .. dH_d lapH weight
    ...

Positions are the two profile coordinates (the plane curve itself, or the
meridian ``(x, r)`` of a rotational frame). The ``closed``/``poles`` fields
and an optional ``origin=`` list extend the base header so that open chains
and rescaled frames read back unambiguously.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInput
from .frame import FlowFrame, build_curve_frame, build_rotational_frame


def fmt(x: float) -> str:
    """17-significant-digit, locale-independent decimal."""
    return format(float(x), ".17g")


def format_snapshot(frame: FlowFrame) -> str:
    head = [
        "MCFLAB v1",
        f"d={frame.d}",
        f"rep={frame.rep}",
        f"t={fmt(frame.t)}",
        f"n={frame.n}",
        f"closed={int(frame.closed)}",
        f"poles={int(frame.poles[0])},{int(frame.poles[1])}",
    ]
    if frame.origin is not None:
        head.append("origin=" + ",".join(fmt(v) for v in frame.origin))
    lines = [" ".join(head)]
    cols = np.column_stack([
        frame.profile, frame.lam, frame.H, frame.gradH, frame.lapH, frame.weight,
    ])
    for i, row in enumerate(cols):
        lines.append(f"{i} " + " ".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_snapshot(frame: FlowFrame, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_snapshot(frame))


def _parse_header(line: str) -> dict:
    if not line.startswith("MCFLAB v1"):
        raise InvalidInput("not an MCFLAB v1 snapshot")
    out = {}
    for item in line[len("MCFLAB v1"):].split():
        if "=" not in item:
            raise InvalidInput(f"malformed header item {item!r}")
        k, v = item.split("=", 1)
        out[k] = v
    for key in ("d", "rep", "t", "n"):
        if key not in out:
            raise InvalidInput(f"snapshot header lacks {key!r}")
    return out


def parse_snapshot(text: str) -> FlowFrame:
    """Rebuild a frame from snapshot text.

    Curvature fields are recomputed from the stored positions without
    resampling, so a written frame reads back with identical fields.
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise InvalidInput("empty snapshot")
    head = _parse_header(lines[0])
    d, n, t, rep = int(head["d"]), int(head["n"]), float(head["t"]), head["rep"]
    rows = lines[1:]
    if len(rows) != n:
        raise InvalidInput(f"snapshot declares n={n} but has {len(rows)} rows")
    data = np.array([[float(v) for v in row.split()] for row in rows])
    if data.shape[1] < 3 or not np.array_equal(data[:, 0], np.arange(n)):
        raise InvalidInput("snapshot rows must start with consecutive indices")
    P = data[:, 1:3]
    closed = head.get("closed", "1") == "1"
    if rep == "curve":
        frame = build_curve_frame(P, t, closed=closed, resample=False)
    elif rep == "rot":
        frame = build_rotational_frame(P, d, t, resample=False)
    else:
        raise InvalidInput(f"unknown representation {rep!r}")
    if "origin" in head:
        origin = np.array([float(v) for v in head["origin"].split(",")])
        frame = frame.replace_fields(origin=origin)
    return frame


def read_snapshot(path) -> FlowFrame:
    with open(path, encoding="utf-8") as fh:
        return parse_snapshot(fh.read())


def read_profile(path, d: int) -> FlowFrame:
    """Initial frame from a snapshot or a plain two-column coordinate file.

    Plain files hold one ``x y`` pair per line; with ``d == 1`` they describe a
    closed plane curve, otherwise the meridian of a rotational hypersurface.
    """
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("MCFLAB"):
        return parse_snapshot(text)
    rows = [ln.split("#", 1)[0].split() for ln in text.splitlines()]
    rows = [r for r in rows if r]
    try:
        P = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise InvalidInput(f"unreadable profile file: {exc}") from None
    if P.ndim != 2 or P.shape[1] != 2:
        raise InvalidInput("profile files need exactly two columns")
    if d == 1:
        return build_curve_frame(P, 0.0, closed=True, resample=True)
    return build_rotational_frame(P, d, 0.0, resample=False)
