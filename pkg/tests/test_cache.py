import multiprocessing as mp

import numpy as np
import pytest

from yledge.cache import (
    ENV_VAR, CorruptEntryError, SpectrumCache, cache_key, decode_spectrum, default_cache_dir, encode_spectrum,
)
from yledge.chain import PXPChain
from yledge.hamiltonian import ModelParams
from yledge.spectrum import full_eig


def _same(a, b):
    return all(np.array_equal(getattr(a, f), getattr(b, f))
               for f in ("eigenvalues", "right", "left", "pairing", "condition"))


def test_encode_decode_is_bit_exact():
    spec = full_eig(PXPChain(ModelParams(N=10, g=0.7, alpha=0.3, m=-0.2)).matrix(1))
    back = decode_spectrum(encode_spectrum(spec))
    assert _same(spec, back)


def test_corruption_is_detected():
    blob = bytearray(encode_spectrum(full_eig(PXPChain(ModelParams(N=8, g=0.2)).matrix(0))))
    blob[40] ^= 0xFF
    with pytest.raises(CorruptEntryError):
        decode_spectrum(bytes(blob))
    with pytest.raises(CorruptEntryError):
        decode_spectrum(b"YLSC")


def test_key_depends_on_every_input():
    p = ModelParams(N=8, g=0.1, m=-0.5)
    keys = {cache_key(p, 0), cache_key(p, 1), cache_key(p.replace(m=-0.5000000000000001), 0),
            cache_key(p.replace(bc="open"), None), cache_key(p.replace(alpha=0.2), 0),
            cache_key(p, 0, {"reality": 1e-6})}
    assert len(keys) == 6
    assert cache_key(p, 0) == cache_key(ModelParams(N=8, g=0.1, m=-0.5), 0)


def test_cold_and_warm_runs_agree(tmp_path):
    p = ModelParams(N=10, g=0.4, m=-0.3)
    cold = SpectrumCache(tmp_path)
    a = PXPChain(p, cache=cold).spectrum(0)
    assert cold.misses == 1 and cold.hits == 0
    warm = SpectrumCache(tmp_path)
    b = PXPChain(p, cache=warm).spectrum(0)
    assert warm.hits == 1
    assert _same(a, b)
    path = warm.path(p, 0)
    assert path.parent.name == path.name[:2]


def test_corrupt_entry_is_recomputed(tmp_path):
    p = ModelParams(N=8, g=0.4, m=0.1)
    c = SpectrumCache(tmp_path)
    ref = PXPChain(p, cache=c).spectrum(2)
    path = c.path(p, 2)
    path.write_bytes(path.read_bytes()[:-5])
    c2 = SpectrumCache(tmp_path)
    again = PXPChain(p, cache=c2).spectrum(2)
    assert c2.corrupt == 1 and _same(ref, again)
    assert decode_spectrum(path.read_bytes()) is not None


def test_env_var_sets_default_dir(monkeypatch, tmp_path):
    monkeypatch.setenv(ENV_VAR, str(tmp_path / "x"))
    assert default_cache_dir() == tmp_path / "x"
    monkeypatch.delenv(ENV_VAR)
    monkeypatch.setenv("XDG_CACHE_HOME", str(tmp_path))
    assert default_cache_dir() == tmp_path / "yledge"


def _worker(args):
    root, m = args
    c = SpectrumCache(root)
    spec = PXPChain(ModelParams(N=10, g=0.3, m=m), cache=c).spectrum(0)
    return spec.eigenvalues.tobytes()


def test_concurrent_writers_share_entries(tmp_path):
    tasks = [(str(tmp_path), -0.5)] * 4 + [(str(tmp_path), 0.5)] * 4
    with mp.get_context("spawn").Pool(4) as pool:
        out = pool.map(_worker, tasks)
    assert len(set(out[:4])) == 1 and len(set(out[4:])) == 1
    files = [f for f in tmp_path.rglob("*") if f.is_file()]
    assert len(files) == 2 and not any(f.name.startswith(".tmp") for f in files)
