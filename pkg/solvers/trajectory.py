"""Binary space-time trajectory dumps for adjoint replay.

Layout: a 64-byte little-endian header (magic, version, n_cells, n_steps,
n_components, dt, dx, zero padding) followed by a C-ordered float64 array of
shape (n_steps+1, n_components, n_cells+1).
"""

import os
import struct
from dataclasses import dataclass

import numpy as np

from handlers.errors import OutputError
from handlers.logger_handler import Logger

MAGIC = b"DRYMTRAJ"
VERSION = 1
HEADER_FORMAT = "<8sIIIIdd"
HEADER_SIZE = 64

TAG = f"[{chr(int('f1c0', 16))} Trajectory]"


@dataclass(frozen=True)
class TrajectoryHeader:
    version: int
    n_cells: int
    n_steps: int
    n_components: int
    dt: float
    dx: float

    @property
    def shape(self):
        return (self.n_steps + 1, self.n_components, self.n_cells + 1)


@dataclass(frozen=True, eq=False)
class TrajectoryDump:
    header: TrajectoryHeader
    states: np.ndarray
    path: str


def _pack(header):
    packed = struct.pack(HEADER_FORMAT, MAGIC, header.version, header.n_cells, header.n_steps,
                         header.n_components, header.dt, header.dx)
    return packed.ljust(HEADER_SIZE, b"\0")


def create_dump(path, grid, n_components):
    """Write the header and return a writable memmap for the trajectory body."""
    header = TrajectoryHeader(VERSION, grid.n_cells, grid.n_steps, n_components, grid.dt, grid.dx)
    try:
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        with open(path, "wb") as f:
            f.write(_pack(header))
        body = np.memmap(path, dtype="<f8", mode="r+", offset=HEADER_SIZE, shape=header.shape)
    except OSError as e:
        raise OutputError(f"Could not create trajectory dump {path}: {e}") from e
    size_mb = np.prod(header.shape) * 8 / 1e6
    Logger.log(f"{TAG} Writing {header.shape} trajectory to {path} ({size_mb:.1f} MB)", "DEBUG")
    return body


def read_header(path):
    try:
        with open(path, "rb") as f:
            raw = f.read(HEADER_SIZE)
    except OSError as e:
        raise OutputError(f"Could not read trajectory dump {path}: {e}") from e
    if len(raw) < HEADER_SIZE:
        raise OutputError(f"Trajectory dump {path} is truncated")
    magic, version, n_cells, n_steps, n_components, dt, dx = struct.unpack_from(HEADER_FORMAT, raw)
    if magic != MAGIC:
        raise OutputError(f"{path} is not a trajectory dump (bad magic {magic!r})")
    if version != VERSION:
        raise OutputError(f"Unsupported trajectory dump version {version} in {path}")
    return TrajectoryHeader(version, n_cells, n_steps, n_components, dt, dx)


def load_dump(path):
    """Reopen a dump read-only; the body stays on disk and is paged in on access."""
    header = read_header(path)
    expected = HEADER_SIZE + 8 * int(np.prod(header.shape))
    if os.path.getsize(path) < expected:
        raise OutputError(f"Trajectory dump {path} is truncated ({os.path.getsize(path)} < {expected} bytes)")
    states = np.memmap(path, dtype="<f8", mode="r", offset=HEADER_SIZE, shape=header.shape)
    return TrajectoryDump(header, states, path)
