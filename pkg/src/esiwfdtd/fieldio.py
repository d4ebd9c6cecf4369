"""Flat binary volume files with a 64-byte text header.

Header (ASCII, space separated, padded with blanks to 63 bytes plus a
newline; numbers carry as many digits as fit)::

    EMV1 nx ny nz dx dy dz x0 y0 z0 dtype layout

Sizes and origin are in mm, ``dtype`` is a numpy code (``<f8``, ``<f4``,
``|u1``) and ``layout`` names the sample positions (``cell``, ``Ex``,
``plane-z`` ...).  The payload follows in C order (x slowest).
"""

from __future__ import annotations

import numpy as np

MAGIC = "EMV1"
HEADER_BYTES = 64


class FieldIOError(ValueError):
    pass


def _header(shape, spacing, origin, dtype: str, layout: str) -> str:
    """Header line with as many significant digits (8 down to 3) as the 63 bytes allow."""
    if not layout or " " in layout:
        raise FieldIOError(f"malformed layout {layout!r}")
    for digits in range(8, 2, -1):
        nums = [f"{float(v):.{digits}g}" for v in (*spacing, *origin)]
        head = " ".join([MAGIC, *map(str, shape), *nums, dtype, layout])
        if len(head) <= HEADER_BYTES - 1:
            return head
    raise FieldIOError(f"header does not fit {HEADER_BYTES} bytes: {head!r}")


def write_volume(path, data: np.ndarray, spacing, origin, layout: str, dtype: str = "<f8") -> None:
    arr = np.asarray(data)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise FieldIOError("volume must be 2-D or 3-D")
    if np.iscomplexobj(arr):
        raise FieldIOError("complex data: write magnitude/real/imag separately")
    arr = arr.astype(dtype)
    head = _header(arr.shape, spacing, origin, np.dtype(dtype).str, layout)
    with open(path, "wb") as fh:
        fh.write(head.ljust(HEADER_BYTES - 1).encode("ascii") + b"\n")
        fh.write(np.ascontiguousarray(arr).tobytes())


def read_volume(path):
    """Return (data, header dict)."""
    with open(path, "rb") as fh:
        head = fh.read(HEADER_BYTES).decode("ascii").split()
        if not head or head[0] != MAGIC:
            raise FieldIOError(f"{path}: not an {MAGIC} file")
        shape = tuple(int(v) for v in head[1:4])
        spacing = tuple(float(v) for v in head[4:7])
        origin = tuple(float(v) for v in head[7:10])
        dtype = head[10]
        layout = head[11]
        data = np.frombuffer(fh.read(), dtype=dtype)
    if data.size != int(np.prod(shape)):
        raise FieldIOError(f"{path}: payload size does not match header")
    return data.reshape(shape), {"shape": shape, "spacing": spacing, "origin": origin, "dtype": dtype, "layout": layout}


def export_grid(grid, directory) -> list:
    """Material volume of a YeeGrid: cell eps_r and sigma plus per-component PEC edge masks."""
    from pathlib import Path

    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    spec = grid.spec
    o = spec.origin
    d = spec.d
    written = []
    for name, arr in (("cell_eps_r", grid.cell_eps_r), ("cell_sigma", grid.cell_sigma)):
        p = out / f"{name}.emv"
        write_volume(p, arr, d, tuple(o[a] + d[a] / 2 for a in range(3)), "cell")
        written.append(p)
    for c, comp in enumerate("xyz"):
        origin = tuple(o[a] + (d[a] / 2 if a == c else 0.0) for a in range(3))
        p = out / f"pec_e{comp}.emv"
        write_volume(p, grid.pec[c], d, origin, f"E{comp}", dtype="|u1")
        written.append(p)
    return written
