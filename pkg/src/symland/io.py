"""Plain-text file formats: checkpoints, network specs and profile CSVs.

Checkpoint::

    symland-ckpt v1
    <l>
    <rows> <cols>
    <row of cols floats>      (rows lines)
    ...                        (repeated for each of the l weights)

Network spec::

    symland-net v1
    dims d0 d1 ... dl
    act <kind> <param>         (one line per hidden interface)
    eps <value>
    <rows> <cols> + rows lines for X, then the same for Y

Floats are written with 17 significant digits so a save/load round trip is
bit exact.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .models import Activation, DatasetPair, NetworkSpec, ParameterPoint, ShapeError

CKPT_HEADER = "symland-ckpt v1"
NET_HEADER = "symland-net v1"


class MalformedFileError(ValueError):
    pass


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _matrix_lines(m: np.ndarray) -> list[str]:
    lines = [f"{m.shape[0]} {m.shape[1]}"]
    lines.extend(" ".join(fmt(v) for v in row) for row in m)
    return lines


class _Reader:
    def __init__(self, text: str, source: str):
        self.lines = text.splitlines()
        self.pos = 0
        self.source = source

    def fail(self, msg: str):
        raise MalformedFileError(f"{self.source}:{self.pos}: {msg}")

    def next(self) -> str:
        while self.pos < len(self.lines):
            line = self.lines[self.pos].strip()
            self.pos += 1
            if line:
                return line
        self.fail("unexpected end of file")

    def ints(self, n: int) -> list[int]:
        parts = self.next().split()
        if len(parts) != n:
            self.fail(f"expected {n} integers, got {len(parts)}")
        try:
            return [int(p) for p in parts]
        except ValueError:
            self.fail("expected integers")

    def matrix(self) -> np.ndarray:
        rows, cols = self.ints(2)
        if rows < 1 or cols < 1:
            self.fail("matrix dimensions must be positive")
        data = np.empty((rows, cols))
        for r in range(rows):
            parts = self.next().split()
            if len(parts) != cols:
                self.fail(f"expected {cols} entries in row {r}, got {len(parts)}")
            try:
                data[r] = [float(p) for p in parts]
            except ValueError:
                self.fail("non-numeric matrix entry")
        if not np.all(np.isfinite(data)):
            self.fail("non-finite matrix entry")
        return data

    def done(self):
        rest = [ln for ln in self.lines[self.pos:] if ln.strip()]
        if rest:
            self.fail("trailing content")


def _write_text(path, lines: Iterable[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def dump_checkpoint(w: ParameterPoint) -> str:
    lines = [CKPT_HEADER, str(len(w))]
    for m in w:
        lines.extend(_matrix_lines(m))
    return "\n".join(lines) + "\n"


def save_checkpoint(w: ParameterPoint, path) -> None:
    _write_text(path, dump_checkpoint(w).splitlines())


def parse_checkpoint(text: str, source: str = "<string>") -> ParameterPoint:
    rd = _Reader(text, source)
    if rd.next() != CKPT_HEADER:
        rd.fail(f"missing header {CKPT_HEADER!r}")
    (n,) = rd.ints(1)
    if n < 1:
        rd.fail("weight count must be positive")
    weights = [rd.matrix() for _ in range(n)]
    rd.done()
    for a, b in zip(weights, weights[1:]):
        if b.shape[1] != a.shape[0]:
            raise ShapeError(f"{source}: consecutive weights {a.shape}, {b.shape} do not chain")
    return ParameterPoint(tuple(weights))


def load_checkpoint(path, net: NetworkSpec | None = None) -> ParameterPoint:
    w = parse_checkpoint(Path(path).read_text(encoding="utf-8"), os.fspath(path))
    if net is not None and w.shapes != net.shapes:
        raise ShapeError(f"{path}: shapes {w.shapes} do not match network {net.shapes}")
    return w


def dump_network(net: NetworkSpec) -> str:
    lines = [NET_HEADER, "dims " + " ".join(str(d) for d in net.layer_dims)]
    lines.extend(f"act {a.kind} {fmt(a.param())}" for a in net.activations)
    lines.append(f"eps {fmt(net.skip_epsilon)}")
    lines.extend(_matrix_lines(net.data.x))
    lines.extend(_matrix_lines(net.data.y))
    return "\n".join(lines) + "\n"


def save_network(net: NetworkSpec, path) -> None:
    _write_text(path, dump_network(net).splitlines())


def load_network(path) -> NetworkSpec:
    rd = _Reader(Path(path).read_text(encoding="utf-8"), os.fspath(path))
    if rd.next() != NET_HEADER:
        rd.fail(f"missing header {NET_HEADER!r}")
    head, *dims = rd.next().split()
    if head != "dims" or len(dims) < 2:
        rd.fail("expected 'dims d0 ... dl'")
    try:
        dims = [int(d) for d in dims]
    except ValueError:
        rd.fail("dims must be integers")
    acts = []
    for _ in range(len(dims) - 2):
        parts = rd.next().split()
        if len(parts) != 3 or parts[0] != "act":
            rd.fail("expected 'act <kind> <param>'")
        try:
            acts.append(Activation(parts[1], float(parts[2])))
        except ValueError as exc:
            rd.fail(str(exc))
    parts = rd.next().split()
    if len(parts) != 2 or parts[0] != "eps":
        rd.fail("expected 'eps <value>'")
    eps = float(parts[1])
    x = rd.matrix()
    y = rd.matrix()
    rd.done()
    return NetworkSpec(tuple(dims), tuple(acts), DatasetPair(x, y), eps)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence[float]]) -> None:
    """Comma separated, LF endings, floats with 17 significant digits."""
    lines = [",".join(header)]
    width = len(header)
    for row in rows:
        if len(row) != width:
            raise ValueError(f"row arity {len(row)} does not match header {width}")
        lines.append(",".join(fmt(v) for v in row))
    _write_text(path, lines)


def read_csv(path) -> tuple[list[str], np.ndarray]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    rows = [[float(v) for v in ln.split(",")] for ln in lines[1:] if ln]
    for r in rows:
        if len(r) != len(header):
            raise MalformedFileError(f"{path}: row arity does not match header")
    return header, np.array(rows).reshape(len(rows), len(header))
