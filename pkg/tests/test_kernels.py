"""The compiled core and the numpy fallback must agree."""

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from subkernel import _pykernels, kernels, markov, space

try:
    from subkernel import _ckernels
except ImportError:  # pragma: no cover - extension not built
    _ckernels = None

needs_c = pytest.mark.skipif(_ckernels is None, reason="compiled extension not built")


def test_backend_selection():
    assert kernels.BACKEND in ("cython", "python")
    assert kernels.get_backend("python") is _pykernels
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


pmfs = st.lists(st.floats(min_value=0, max_value=1), min_size=2, max_size=40)


@needs_c
@given(pmfs, pmfs, st.integers(0, 60))
@settings(max_examples=60, deadline=None)
def test_truncated_convolve_agrees(a, b, K):
    a, b = np.array(a), np.array(b)
    ref = _pykernels.truncated_convolve(a, b, K)
    got = _ckernels.truncated_convolve(a, b, K)
    assert np.allclose(got, ref, rtol=1e-13, atol=1e-15)
    assert np.allclose(ref, np.convolve(a, b)[: K + 1].tolist() + [0.0] * max(0, K + 1 - (a.size + b.size - 1)))


@needs_c
@given(pmfs, st.integers(0, 80))
@settings(max_examples=40, deadline=None)
def test_renewal_agrees(p, S):
    p = np.array([0.0] + p)
    p = p / max(p.sum(), 1.0)
    ref = _pykernels.renewal_sequence(p, S)
    got = _ckernels.renewal_sequence(p, S)
    assert np.allclose(got, ref, rtol=1e-12, atol=1e-15)


def test_renewal_geometric_oracle():
    # P(R = 1) = 1: u_s = 1 for all s
    u = kernels.renewal_sequence(np.array([0.0, 1.0]), 10)
    assert np.all(u == 1.0)


def _setup(side=65):
    Z = space.build_lattice(1, side)
    k = markov.average_two_step(markov.srw(Z))
    PT = k.transpose_csr()
    c = Z.center()
    V0 = np.zeros((Z.n, 2))
    V0[c, 0] = 1.0
    V0[c + 3, 1] = 1.0
    return Z, k, PT, V0


@needs_c
def test_power_accumulate_agrees():
    Z, k, PT, V0 = _setup()
    rng = np.random.default_rng(1)
    W = rng.random((5, 700))
    for tol in (1e-9, 1.0):
        a = _pykernels.power_accumulate(PT, V0, W, 1.0 / Z.mu, tol)
        b = _ckernels.power_accumulate(PT, V0, W, 1.0 / Z.mu, tol)
        assert a[3] == b[3]
        for x, y in zip(a[:3], b[:3]):
            assert np.allclose(x, y, rtol=1e-12, atol=1e-14)


def test_power_accumulate_dense_oracle():
    Z, k, PT, V0 = _setup(33)
    W = np.eye(6)
    acc, mass, sup, K_eff = kernels.power_accumulate(PT, V0, W, 1.0 / Z.mu, 1.0)
    P = k.dense()
    M = np.eye(Z.n)
    for j in range(6):
        assert np.allclose(acc[j].T, (V0.T @ M), atol=1e-15)
        M = M @ P
    assert K_eff == 5


@pytest.mark.parametrize("backend", ["python", pytest.param("cython", marks=needs_c)])
def test_sampler_matches_exact_laws(backend):
    # the two samplers consume the stream in different orders; compare both with exact laws
    Z, k, _, _ = _setup(33)
    P = sp.csr_matrix(k.P)
    P.sort_indices()
    indptr, indices = P.indptr.astype(np.int64), P.indices.astype(np.int64)
    cum = np.concatenate([np.cumsum(P.data[indptr[i]:indptr[i + 1]]) for i in range(Z.n)])
    cdf = np.cumsum([0.0, 0.5, 0.25, 0.125])  # P(R=1,2,3) = 1/2, 1/4, 1/8; truncated 1/8
    impl = kernels.get_backend(backend)
    n_paths = 20000
    rng = np.random.Generator(np.random.PCG64(7))
    pos, times = impl.sample_paths(cdf, indptr, indices, cum, Z.center(), 3, n_paths, rng)
    alive1 = np.mean(times[:, 0] >= 0)
    assert abs(alive1 - 7 / 8) <= 4 * np.sqrt(7 / 64 / n_paths)
    p2 = np.mean(times[:, 0] == 2)
    assert abs(p2 - 0.25) <= 4 * np.sqrt(0.25 * 0.75 / n_paths)
    # position after one subordinate step: sum_k c_k P^k(x0, .)
    M = k.dense()
    ref = 0.5 * M[Z.center()] + 0.25 * (M @ M)[Z.center()] + 0.125 * (M @ M @ M)[Z.center()]
    for y in (Z.center(), Z.center() + 1, Z.center() + 3):
        f = np.mean(pos[:, 0] == y)
        assert abs(f - ref[y]) <= 4 * np.sqrt(ref[y] * (1 - ref[y]) / n_paths)
