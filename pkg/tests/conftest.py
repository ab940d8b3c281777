"""Independent oracles shared by the test modules."""

from fractions import Fraction
from functools import reduce

import numpy as np
import pytest

# -- dense Kronecker-product construction in the unconstrained 2^N space ----

_P = np.diag([1.0, 0.0])
_N = np.diag([0.0, 1.0])
_X = np.array([[0.0, 1.0], [1.0, 0.0]])
_Y = np.array([[0.0, -1j], [1j, 0.0]])
_I = np.eye(2)


def _site_op(ops: dict, N: int) -> np.ndarray:
    """Kronecker product with ops[j] on site j (bit j of the word index)."""
    factors = [ops.get(j, _I) for j in reversed(range(N))]
    return reduce(np.kron, factors)


def kron_pxp(N, bc="periodic", h_x=1.0, g=0.0, alpha=np.pi / 2, m=0.0):
    """Constrained Hamiltonian built from Pauli strings, restricted to blockade-legal words."""
    dim = 2**N
    H = np.zeros((dim, dim), dtype=complex)
    for j in range(N):
        left, right = j - 1, j + 1
        proj = {}
        if bc == "periodic":
            proj = {left % N: _P, right % N: _P}
        else:
            if left >= 0:
                proj[left] = _P
            if right < N:
                proj[right] = _P
        kin = h_x * _X + g * np.exp(1j * alpha) * _Y
        H += _site_op({**proj, j: kin}, N)
        H += 2 * m * _site_op({**proj, j: _N}, N)
    words = np.arange(dim)
    legal = (words & (words >> 1)) == 0
    if bc == "periodic" and N > 1:
        legal &= ~(((words & 1) == 1) & (((words >> (N - 1)) & 1) == 1))
    idx = np.nonzero(legal)[0]
    return H[np.ix_(idx, idx)], idx


# -- exact characteristic polynomial with rational entries -------------------

def _pmul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def _trim(p):
    while len(p) > 1 and p[-1] == 0:
        p = p[:-1]
    return p


def _pdivmod(a, b):
    """Polynomials as coefficient lists, lowest degree first."""
    a, b = _trim(list(a)), _trim(list(b))
    q = [Fraction(0)] * max(1, len(a) - len(b) + 1)
    while len(a) >= len(b) and any(a):
        c = a[-1] / b[-1]
        d = len(a) - len(b)
        q[d] = c
        for i, y in enumerate(b):
            a[i + d] -= c * y
        a = _trim(a[:-1]) if len(a) > 1 else [Fraction(0)]
    return _trim(q), _trim(a)


def _pgcd(a, b):
    while any(_trim(b)) :
        a, b = b, _pdivmod(a, b)[1]
    a = _trim(a)
    return [x / a[-1] for x in a]


def _pderiv(p):
    return [i * p[i] for i in range(1, len(p))] or [Fraction(0)]


def charpoly_exact(A):
    """Faddeev-LeVerrier on a rational matrix; coefficients lowest degree first, monic."""
    n = len(A)
    M = [[Fraction(0)] * n for _ in range(n)]
    coeffs = [Fraction(0)] * (n + 1)
    coeffs[n] = Fraction(1)
    for k in range(1, n + 1):
        AM = [[sum(A[i][l] * M[l][j] for l in range(n) if A[i][l]) for j in range(n)] for i in range(n)]
        for i in range(n):
            AM[i][i] += coeffs[n - k + 1]
        M = AM
        AMk = sum(sum(A[i][l] * M[l][i] for l in range(n) if A[i][l]) for i in range(n))
        coeffs[n - k] = -AMk / k
    return coeffs


def squarefree_decomposition(p):
    """Yun's algorithm: list of (factor, multiplicity) with p = prod factor**multiplicity."""
    out = []
    a = _pgcd(p, _pderiv(p))
    b = _pdivmod(p, a)[0]
    c = _pdivmod(_pderiv(p), a)[0]
    d = [x - y for x, y in zip(c + [Fraction(0)] * len(b), _pderiv(b) + [Fraction(0)] * len(c))]
    i = 1
    while len(_trim(b)) > 1:
        a = _pgcd(b, _trim(d))
        if len(a) > 1:
            out.append((a, i))
        b = _pdivmod(b, a)[0]
        c = _pdivmod(_trim(d), a)[0]
        db = _pderiv(b)
        L = max(len(c), len(db))
        d = [(c[k] if k < len(c) else 0) - (db[k] if k < len(db) else 0) for k in range(L)]
        i += 1
    return out


def _eval_exact(p, z: complex) -> complex:
    """Horner evaluation with exact rational arithmetic at the binary value of z."""
    xr, xi = Fraction(z.real), Fraction(z.imag)
    ar, ai = Fraction(0), Fraction(0)
    for c in reversed(p):
        ar, ai = ar * xr - ai * xi + c, ar * xi + ai * xr
    return complex(float(ar), float(ai))


def _polish_roots(p, roots, iters=60):
    """Durand-Kerner iterations on a monic squarefree polynomial, residuals evaluated exactly."""
    lead = p[-1]
    p = [c / lead for c in p]
    x = np.array(roots, dtype=complex)
    for _ in range(iters):
        step = np.array([_eval_exact(p, xi) / np.prod([xi - xj for j, xj in enumerate(x) if j != i] or [1.0])
                         for i, xi in enumerate(x)])
        x = x - step
        if np.abs(step).max() < 1e-15 * max(1.0, np.abs(x).max()):
            break
    return x


def exact_eigenvalues(A_rational):
    """Eigenvalue multiset from the exact characteristic polynomial.

    Each squarefree factor's roots are seeded by numpy.roots and polished with
    exactly evaluated residuals, so clustered levels do not lose accuracy.
    """
    p = charpoly_exact(A_rational)
    vals = []
    for factor, mult in squarefree_decomposition(p):
        r = np.roots([float(x) for x in reversed(factor)])
        vals += list(_polish_roots(factor, r)) * mult
    return np.array(vals, dtype=complex)


def match_error(a, b):
    """Largest distance after optimal one-to-one matching of two multisets."""
    from scipy.optimize import linear_sum_assignment

    a, b = np.asarray(a), np.asarray(b)
    assert len(a) == len(b)
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max(initial=0.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
