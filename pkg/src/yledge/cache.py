"""On-disk cache of biorthogonal sector spectra.

One file per entry at ``<cache_dir>/<first two hex digits>/<sha256>``. The
binary layout is little-endian:

    magic  b"YLSC" | version u1 | n u4 | dim u4
    eigenvalues  n   x complex128
    right        dim x n complex128 (row major)
    left         dim x n complex128
    pairing      n   x int64
    condition    n   x float64
    sha256 of everything above (32 bytes)

Writes go through a temporary file in the target directory followed by an
atomic rename, so concurrent workers see either nothing or a whole entry.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .spectrum import CLUSTER_TOL, EP_TOL, PAIR_TOL, REALITY_TOL, BiorthogonalSpectrum

ENV_VAR = "YLEDGE_CACHE"
MAGIC = b"YLSC"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sBII")


def default_cache_dir() -> Path:
    env = os.environ.get(ENV_VAR)
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "yledge"


def cache_key(params, k, tolerances: dict | None = None) -> str:
    """Content hash of everything that determines a sector spectrum."""
    tol = {"reality": REALITY_TOL, "ep": EP_TOL, "pair": PAIR_TOL, "cluster": CLUSTER_TOL}
    tol.update(tolerances or {})
    payload = {
        "format": FORMAT_VERSION,
        "model": params.model, "N": params.N, "bc": params.bc,
        # float.hex keeps the key exact: 0.1 and 0.1000000000000001 differ
        **{name: float(getattr(params, name)).hex() for name in ("h_x", "g", "alpha", "m", "J", "h_z")},
        "k": None if k is None else int(k),
        "tol": {name: float(v).hex() for name, v in sorted(tol.items())},
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def encode_spectrum(spec: BiorthogonalSpectrum) -> bytes:
    n = len(spec.eigenvalues)
    dim = spec.right.shape[0]
    parts = [
        _HEADER.pack(MAGIC, FORMAT_VERSION, n, dim),
        np.ascontiguousarray(spec.eigenvalues, dtype="<c16").tobytes(),
        np.ascontiguousarray(spec.right, dtype="<c16").tobytes(),
        np.ascontiguousarray(spec.left, dtype="<c16").tobytes(),
        np.ascontiguousarray(spec.pairing, dtype="<i8").tobytes(),
        np.ascontiguousarray(spec.condition, dtype="<f8").tobytes(),
    ]
    body = b"".join(parts)
    return body + hashlib.sha256(body).digest()


class CorruptEntryError(ValueError):
    pass


def decode_spectrum(blob: bytes) -> BiorthogonalSpectrum:
    if len(blob) < _HEADER.size + 32:
        raise CorruptEntryError("entry truncated")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CorruptEntryError("checksum mismatch")
    magic, version, n, dim = _HEADER.unpack_from(body)
    if magic != MAGIC or version != FORMAT_VERSION:
        raise CorruptEntryError(f"unknown entry format {magic!r} v{version}")
    sizes = [16 * n, 16 * dim * n, 16 * dim * n, 8 * n, 8 * n]
    if len(body) != _HEADER.size + sum(sizes):
        raise CorruptEntryError("entry length does not match its header")
    off = _HEADER.size
    arrays = []
    for size, dtype in zip(sizes, ("<c16", "<c16", "<c16", "<i8", "<f8")):
        arrays.append(np.frombuffer(body, dtype=dtype, count=size // np.dtype(dtype).itemsize, offset=off))
        off += size
    e, r, l, pairing, cond = arrays
    return BiorthogonalSpectrum(eigenvalues=e.astype(np.complex128), right=r.reshape(dim, n).astype(np.complex128),
                                left=l.reshape(dim, n).astype(np.complex128),
                                pairing=pairing.astype(np.int64), condition=cond.astype(np.float64))


class SpectrumCache:
    """Create-or-read store keyed by cache_key; corrupted entries are dropped and recomputed."""

    def __init__(self, cache_dir=None, tolerances: dict | None = None):
        self.root = Path(cache_dir) if cache_dir is not None else default_cache_dir()
        self.tolerances = tolerances
        self.hits = 0
        self.misses = 0
        self.corrupt = 0

    def path(self, params, k) -> Path:
        key = cache_key(params, k, self.tolerances)
        return self.root / key[:2] / key

    def load(self, params, k) -> BiorthogonalSpectrum | None:
        p = self.path(params, k)
        try:
            blob = p.read_bytes()
        except FileNotFoundError:
            self.misses += 1
            return None
        try:
            spec = decode_spectrum(blob)
        except CorruptEntryError:
            self.corrupt += 1
            self.misses += 1
            try:
                p.unlink()
            except FileNotFoundError:
                pass
            return None
        self.hits += 1
        return spec

    def store(self, params, k, spec: BiorthogonalSpectrum) -> Path:
        p = self.path(params, k)
        if p.exists():
            return p
        p.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=p.parent, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(encode_spectrum(spec))
            os.replace(tmp, p)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return p
