import numpy as np
import pytest

from nerdebias import _pykernels, kernels

from oracles import crf_logz_oracle, viterbi_oracle

BACKENDS = kernels.available_backends()


@pytest.fixture(params=BACKENDS)
def backend(request):
    previous = kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(previous)


def crf_inputs(rng, n, c):
    return (rng.normal(size=(n, c)), rng.normal(size=(c, c)), rng.normal(size=c), rng.normal(size=c))


class TestSelection:
    def test_python_always_available(self):
        assert "python" in BACKENDS

    def test_unknown_backend(self):
        with pytest.raises(ValueError):
            kernels.use_backend("fortran")

    def test_switch_and_restore(self):
        previous = kernels.use_backend("python")
        assert kernels.backend_name() == "python"
        kernels.use_backend(previous)
        assert kernels.backend_name() == previous


class TestKernels:
    def test_log_partition(self, backend, rng):
        for _ in range(30):
            n, c = int(rng.integers(1, 6)), int(rng.integers(2, 5))
            args = crf_inputs(rng, n, c)
            assert abs(kernels.crf_log_partition(*args) - crf_logz_oracle(*args)) < 1e-9

    def test_viterbi(self, backend, rng):
        for _ in range(30):
            n, c = int(rng.integers(1, 6)), int(rng.integers(2, 5))
            args = crf_inputs(rng, n, c)
            path, score = kernels.viterbi(*args)
            ref_path, ref_score = viterbi_oracle(*args)
            assert list(path) == ref_path
            assert score == pytest.approx(ref_score, abs=1e-12)

    def test_marginals_are_distributions(self, backend, rng):
        e, t, s, f = crf_inputs(rng, 6, 4)
        log_z, marg, pair = kernels.crf_forward_backward(e, t, s, f)
        np.testing.assert_allclose(marg.sum(axis=1), 1.0, atol=1e-12)
        assert pair.sum() == pytest.approx(5.0, abs=1e-12)
        assert log_z == pytest.approx(kernels.crf_log_partition(e, t, s, f), abs=1e-12)

    def test_marginals_match_enumeration(self, backend, rng):
        from itertools import product

        from oracles import path_score_oracle
        e, t, s, f = crf_inputs(rng, 3, 3)
        weights = {p: np.exp(path_score_oracle(e, t, s, f, p)) for p in product(range(3), repeat=3)}
        z = sum(weights.values())
        expected = np.zeros((3, 3))
        for p, w in weights.items():
            for i, y in enumerate(p):
                expected[i, y] += w / z
        _, marg, _ = kernels.crf_forward_backward(e, t, s, f)
        np.testing.assert_allclose(marg, expected, atol=1e-12)

    def test_scatter_add_repeated_rows(self, backend):
        target = np.zeros((3, 2))
        kernels.scatter_add_rows(target, np.array([0, 2, 0]), np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]))
        np.testing.assert_array_equal(target, [[6.0, 8.0], [0.0, 0.0], [3.0, 4.0]])


@pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")
class TestEquivalence:
    def test_backends_agree(self, rng):
        from nerdebias import _ckernels
        for _ in range(50):
            n, c = int(rng.integers(1, 30)), int(rng.integers(2, 8))
            args = crf_inputs(rng, n, c)
            assert _ckernels.crf_log_partition(*args) == pytest.approx(_pykernels.crf_log_partition(*args), abs=1e-10)
            pc, sc = _ckernels.viterbi(*args)
            pp, sp = _pykernels.viterbi(*args)
            np.testing.assert_array_equal(pc, pp)
            assert sc == pytest.approx(sp, abs=1e-10)
            for a, b in zip(_ckernels.crf_forward_backward(*args)[1:], _pykernels.crf_forward_backward(*args)[1:]):
                np.testing.assert_allclose(a, b, atol=1e-10)
            idx = rng.integers(0, 5, size=n)
            vals = rng.normal(size=(n, c))
            t1, t2 = np.zeros((5, c)), np.zeros((5, c))
            _ckernels.scatter_add_rows(t1, idx, vals)
            _pykernels.scatter_add_rows(t2, idx, vals)
            np.testing.assert_allclose(t1, t2, atol=1e-12)
