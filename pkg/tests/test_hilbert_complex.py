import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hodgelab import feec
from hodgelab.errors import DegreeOutOfRangeError, RangeError, ShapeError
from hodgelab.hilbert_complex import (
    FiniteHilbertComplex,
    HodgeSpectrumBundle,
    alternating_counting_sum,
    dual_nonzero_spectrum,
    hodge_decompose,
    laplacian_spectrum,
    nonzero_spectrum,
    partial_spectra,
    random_complex,
    validate,
)
from hodgelab.mesh import DomainSpec, generate


@pytest.fixture(scope="module")
def annulus_cx():
    return feec.assemble(generate(DomainSpec.annulus(resolution=10)))


def test_shape_errors():
    with pytest.raises(ShapeError):
        FiniteHilbertComplex([np.zeros((2, 3))], [np.eye(3), np.eye(3)])
    with pytest.raises(ShapeError):
        FiniteHilbertComplex([], [np.eye(2), np.eye(2)])


def test_validate_whitney_exact(annulus_cx):
    diag = validate(annulus_cx)
    assert diag.passed
    assert all(a == 0 for a in diag.residual_abs)
    assert all(m > 0 for m in diag.mass_min_eig)


def test_validate_detects_perturbation():
    cx = random_complex(1)
    D = [x.astype(float).copy() for x in cx.D]
    D[1][np.nonzero(D[1])[0][0], np.nonzero(D[1])[1][0]] += 1e-6
    bad = FiniteHilbertComplex(D, cx.M)
    diag = validate(bad)
    assert not diag.passed
    assert 0.5e-6 < max(diag.residual_abs) < 2e-6


def test_random_complex_deterministic_and_valid():
    a, b = random_complex(1), random_complex(1)
    assert all(np.array_equal(x, y) for x, y in zip(a.D, b.D))
    assert all(np.array_equal(x, y) for x, y in zip(a.M, b.M))
    assert validate(a).passed
    assert max(a.n) <= 40


def test_hodge_decompose_constants_on_connected(annulus_cx):
    h = hodge_decompose(annulus_cx, 0)
    assert h.dims[0] == 1
    v = h.harmonic[:, 0]
    assert np.allclose(v / v[0], 1.0)


def test_hodge_decompose_annulus_degree_one(annulus_cx):
    h = hodge_decompose(annulus_cx, 1)
    assert h.dims[0] == 1
    assert sum(h.dims) == annulus_cx.n[1]


def test_hodge_decompose_degree_check(annulus_cx):
    with pytest.raises(DegreeOutOfRangeError):
        hodge_decompose(annulus_cx, 3)


def _dense(A):
    return A.toarray() if hasattr(A, "toarray") else np.asarray(A, dtype=float)


@pytest.mark.parametrize("seed", range(15))
def test_hodge_orthogonality_and_harmonic_conditions(seed):
    cx = random_complex(seed)
    betti = cx.betti()
    for k in range(cx.d + 1):
        h = hodge_decompose(cx, k)
        M = _dense(cx.M[k])
        assert sum(h.dims) == cx.n[k]
        assert h.dims[0] == betti[k] == cx.n[k] - cx.rank(k) - cx.rank(k - 1)
        parts = [h.harmonic, h.exact, h.coexact]
        for i in range(3):
            G = parts[i].T @ M @ parts[i]
            assert np.allclose(G, np.eye(G.shape[0]), atol=1e-9)
            for j in range(i + 1, 3):
                assert np.abs(parts[i].T @ M @ parts[j]).max(initial=0) < 1e-9
        H = h.harmonic
        if H.shape[1]:
            scale = np.abs(H).max()
            if k < cx.d:
                assert np.abs(_dense(cx.D[k]) @ H).max() < 1e-9 * scale * max(1, np.abs(_dense(cx.D[k])).max())
            if k > 0:
                R = _dense(cx.D[k - 1]).T @ M @ H
                assert np.abs(R).max() < 1e-9 * max(1.0, np.abs(M).max()) * scale


@pytest.mark.parametrize("seed", range(25))
def test_nonzero_spectrum_duality(seed):
    cx = random_complex(seed)
    for k in range(cx.d):
        a, _ = nonzero_spectrum(cx, k)
        b = dual_nonzero_spectrum(cx, k)
        assert len(a) == len(b) == cx.rank(k)
        if len(a):
            assert np.max(np.abs(a - b) / a) < 1e-8


def test_zero_coboundary_has_empty_sigma():
    cx = FiniteHilbertComplex([np.zeros((3, 2), dtype=int)], [np.eye(2), np.eye(3)])
    bundle = partial_spectra(cx)
    assert bundle.sigma[0].size == 0
    assert bundle.betti == [2, 3]


def test_bundle_json_round_trip(annulus_cx):
    b = partial_spectra(annulus_cx, 5)
    data = json.loads(b.to_json())
    assert set(data) == {"d", "sigma", "betti", "chi", "reliable_lambda"}
    b2 = HodgeSpectrumBundle.from_dict(data)
    assert b2.chi == 0 and b2.betti == [1, 1, 0]
    assert np.allclose(b2.sigma[0], b.sigma[0])


def test_laplacian_spectrum_reconstruction(annulus_cx):
    b = partial_spectra(annulus_cx)
    s1 = laplacian_spectrum(b, 1)
    assert s1.values[0] == 0 and s1.values[1] > 0
    assert len(s1) == annulus_cx.n[1]
    s0 = laplacian_spectrum(b, 0)
    assert s0.counting(0.0) == 1


def test_truncated_bundle_range_error(annulus_cx):
    b = partial_spectra(annulus_cx, 4)
    assert np.isfinite(b.reliable_lambda)
    alternating_counting_sum(b, 0.5 * b.reliable_lambda)
    with pytest.raises(RangeError):
        alternating_counting_sum(b, 2 * b.reliable_lambda)


def test_sparse_path_matches_dense():
    cx = feec.assemble(generate(DomainSpec.box(level=2)))
    for k in range(3):
        dense, _ = nonzero_spectrum(cx, k, 10, method="dense")
        sparse, _ = nonzero_spectrum(cx, k, 10, method="sparse")
        assert np.max(np.abs(dense - sparse) / dense) < 1e-8


def test_alternating_sum_at_zero_is_chi():
    for seed in range(10):
        cx = random_complex(seed)
        b = partial_spectra(cx)
        assert alternating_counting_sum(b, 0.0) == b.chi == cx.euler_characteristic()


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), lam=st.floats(0, 1e4))
def test_alternating_sum_property(seed, lam):
    b = partial_spectra(random_complex(seed))
    assert alternating_counting_sum(b, lam) == b.chi
