import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from helpers import OPS, gradcheck
from lagr import tensor as T

TOL = 1e-3


def _rng(seed):
    return np.random.default_rng(seed)


class TestGradients:
    @pytest.mark.parametrize("name", sorted(OPS))
    def test_matches_finite_differences(self, name):
        fn, make = OPS[name]
        for seed in range(20):
            err = gradcheck(fn, make(_rng(seed)), seed=seed)
            assert err < TOL, f"{name} seed {seed}: relative error {err:.2e}"

    def test_composite_expression(self):
        def fn(x, w):
            h = T.gelu(x @ w)
            return T.log_softmax(T.layer_norm(h, T.ones((3,), False), T.zeros((3,), False)), axis=-1)

        r = _rng(3)
        assert gradcheck(fn, [r.normal(size=(4, 2)), r.normal(size=(2, 3))]) < TOL

    def test_shared_subexpression_accumulates(self):
        x = T.Tensor(np.array([1.0, 2.0]), requires_grad=True)
        y = (x * x + x).sum()
        y.backward()
        np.testing.assert_allclose(x.grad, 2 * x.data + 1)


class TestBackwardContract:
    def test_non_scalar_rejected(self):
        x = T.Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(ValueError, match="scalar"):
            (x * 2).backward()

    def test_second_backward_raises(self):
        x = T.Tensor(np.ones(3), requires_grad=True)
        loss = (x * 2).sum()
        loss.backward()
        with pytest.raises(T.GraphConsumedError):
            loss.backward()

    def test_fresh_forward_after_backward(self):
        x = T.Tensor(np.ones(3), requires_grad=True)
        (x * 2).sum().backward()
        (x * 3).sum().backward()
        np.testing.assert_allclose(x.grad, np.full(3, 5.0))

    def test_constant_loss_rejected(self):
        with pytest.raises(ValueError, match="requires grad"):
            (T.Tensor(np.ones(2)) * 2).sum().backward()

    def test_matmul_shape_error_names_shapes(self):
        with pytest.raises(ValueError, match=r"\(2, 3\).*\(4, 2\)"):
            T.Tensor(np.ones((2, 3))) @ T.Tensor(np.ones((4, 2)))

    def test_reshape_error(self):
        with pytest.raises(ValueError, match="cannot reshape"):
            T.Tensor(np.ones(6)).reshape(4, 2)

    def test_float64_context_restores(self):
        with T.float64():
            assert T.Tensor([1.0]).data.dtype == np.float64
        assert T.Tensor([1.0]).data.dtype == np.float32


class TestLayerNorm:
    def test_against_scalar_loop(self):
        r = _rng(0)
        x, gamma, beta = r.normal(size=(4, 6)), r.normal(size=6), r.normal(size=6)
        with T.float64():
            out = T.layer_norm(T.Tensor(x), T.Tensor(gamma), T.Tensor(beta), eps=1e-5).data
        for i in range(4):
            row = x[i]
            mu = sum(row) / len(row)
            var = sum((v - mu) ** 2 for v in row) / len(row)
            for j in range(6):
                expect = (row[j] - mu) / (var + 1e-5) ** 0.5 * gamma[j] + beta[j]
                assert abs(out[i, j] - expect) < 1e-10


class TestSoftmax:
    @given(hnp.arrays(np.float64, (3, 5), elements=st.floats(-50, 50)))
    @settings(max_examples=50, deadline=None)
    def test_rows_normalised(self, x):
        with T.float64():
            p = T.softmax(T.Tensor(x)).data
            lp = T.log_softmax(T.Tensor(x)).data
        np.testing.assert_allclose(p.sum(-1), 1.0, atol=1e-12)
        np.testing.assert_allclose(np.exp(lp), p, atol=1e-12)

    def test_large_logits_stay_finite(self):
        p = T.softmax(T.Tensor(np.array([1e4, 0.0, -1e4]))).data
        assert np.all(np.isfinite(p)) and p[0] == pytest.approx(1.0)


class TestInit:
    def test_he_statistics(self):
        t = T.he_init((400, 500), 400, _rng(0))
        assert t.data.dtype == np.float32 and t.requires_grad
        assert abs(t.data.mean()) < 5e-3
        assert t.data.var() == pytest.approx(2.0 / 400, rel=0.02)

    def test_he_deterministic(self):
        a = T.he_init((5, 5), 5, _rng(11)).data
        b = T.he_init((5, 5), 5, _rng(11)).data
        assert np.array_equal(a, b)

    def test_he_bad_fan_in(self):
        with pytest.raises(ValueError):
            T.he_init((2, 2), 0, _rng(0))

    def test_dropout_eval_is_identity(self):
        x = T.Tensor(np.ones(10))
        assert T.dropout(x, 0.5, _rng(0), train=False) is x

    def test_dropout_preserves_expectation(self):
        out = T.dropout(T.Tensor(np.ones(200_000)), 0.25, _rng(1)).data
        assert out.mean() == pytest.approx(1.0, abs=0.01)
        assert set(np.unique(out)) <= {0.0, np.float32(1 / 0.75)}
