import math

import numpy as np
import pytest

from conftest import gradcheck, rand_t
from misskit import tensor as T


def t64(data):
    return T.Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)


class TestMatmul:
    def test_identity(self):
        a = T.Tensor(np.eye(2, dtype=np.float32))
        b = T.Tensor(np.array([[1, 2], [3, 4]], dtype=np.float32))
        np.testing.assert_array_equal(T.matmul(a, b).data, b.data)

    def test_annihilator(self):
        a = T.Tensor(np.array([[1, 0], [0, 0]], dtype=np.float32))
        b = T.Tensor(np.array([[0], [5]], dtype=np.float32))
        np.testing.assert_array_equal(T.matmul(a, b).data, np.zeros((2, 1), dtype=np.float32))

    def test_against_triple_loop(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((3, 4))
        b = rng.standard_normal((4, 2))
        expect = np.zeros((3, 2))
        for i in range(3):
            for j in range(2):
                for k in range(4):
                    expect[i, j] += a[i, k] * b[k, j]
        got = T.matmul(T.Tensor(a), T.Tensor(b)).data
        np.testing.assert_allclose(got, expect, atol=1e-6)

    def test_shape_mismatch(self):
        with pytest.raises(T.ShapeError):
            T.matmul(T.Tensor(np.zeros((2, 3))), T.Tensor(np.zeros((2, 3))))


class TestElementwise:
    def test_relu(self):
        x = T.Tensor(np.array([-1.0, 0.0, 2.0], dtype=np.float32))
        np.testing.assert_array_equal(T.relu(x).data, [0.0, 0.0, 2.0])

    def test_add_zero_identity(self):
        x = T.Tensor(np.array([0.1, -2.5, 7.25], dtype=np.float32))
        out = T.add(x, 0.0)
        assert out.data.tobytes() == x.data.tobytes()

    def test_gelu_matches_reference_formula(self):
        # oracle: the pinned tanh formula evaluated independently in double
        x = 1.0
        u = math.sqrt(2.0 / math.pi) * (x + 0.044715 * x**3)
        expect = 0.5 * x * (1.0 + math.tanh(u))
        got = T.gelu(T.Tensor(np.array(x, dtype=np.float64))).item()
        assert abs(got - expect) < 1e-6

    def test_log_domain_error(self):
        with pytest.raises(T.DomainError):
            T.log(T.Tensor(np.array([1.0, 0.0])))

    def test_incompatible_shapes(self):
        with pytest.raises(T.ShapeError):
            T.add(T.Tensor(np.zeros(3)), T.Tensor(np.zeros(4)))


class TestSoftmax:
    def test_symmetry(self):
        out = T.softmax(T.Tensor(np.array([0.0, 0.0]))).data
        np.testing.assert_allclose(out, [0.5, 0.5], atol=1e-7)

    def test_stabilized(self):
        out = T.softmax(T.Tensor(np.array([1000.0, 0.0]))).data
        assert np.all(np.isfinite(out))
        np.testing.assert_allclose(out, [1.0, 0.0], atol=1e-7)

    def test_against_double_oracle(self):
        x = np.array([1.0, 2.0, 3.0])
        e = np.exp(x)
        expect = e / e.sum()
        got = T.softmax(T.Tensor(x)).data
        np.testing.assert_allclose(got, expect, atol=1e-6)

    def test_rows_sum_to_one_and_bounded(self):
        rng = np.random.default_rng(7)
        x = T.Tensor(rng.standard_normal((20, 9)) * 10)
        out = T.softmax(x, axis=-1).data
        np.testing.assert_allclose(out.sum(axis=-1), 1.0, atol=1e-6)
        assert np.all(out >= 0.0) and np.all(out <= 1.0)


class TestLayernorm:
    def test_constant_row_is_zero(self):
        x = T.Tensor(np.full((4,), 3.7))
        gain = T.Tensor(np.ones(4))
        bias = T.Tensor(np.zeros(4))
        out = T.layernorm(x, gain, bias).data
        np.testing.assert_allclose(out, 0.0, atol=1e-3)

    def test_two_point_row(self):
        x = T.Tensor(np.array([1.0, -1.0]))
        out = T.layernorm(x, T.Tensor(np.ones(2)), T.Tensor(np.zeros(2)), eps=1e-12).data
        np.testing.assert_allclose(out, [1.0, -1.0], atol=1e-5)

    def test_zero_gain_gives_bias(self):
        rng = np.random.default_rng(3)
        x = T.Tensor(rng.standard_normal((5, 6)))
        bias = T.Tensor(rng.standard_normal(6))
        out = T.layernorm(x, T.Tensor(np.zeros(6)), bias).data
        np.testing.assert_allclose(out, np.broadcast_to(bias.data, (5, 6)), atol=1e-7)


def naive_conv2d(x, w, stride, padding):
    c, h, wd = x.shape
    f, _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (wd + 2 * padding - kw) // stride + 1
    out = np.zeros((f, oh, ow))
    for ff in range(f):
        for i in range(oh):
            for j in range(ow):
                patch = xp[:, i * stride : i * stride + kh, j * stride : j * stride + kw]
                out[ff, i, j] = np.sum(patch * w[ff])
    return out


class TestConv2d:
    def test_one_by_one_identity(self):
        rng = np.random.default_rng(1)
        x = T.Tensor(rng.standard_normal((1, 4, 5)))
        w = T.Tensor(np.ones((1, 1, 1, 1)))
        np.testing.assert_allclose(T.conv2d(x, w).data, x.data, atol=1e-7)

    def test_counting(self):
        x = T.Tensor(np.ones((1, 3, 3)))
        w = T.Tensor(np.ones((1, 1, 3, 3)))
        out = T.conv2d(x, w, stride=1, padding=0).data
        np.testing.assert_allclose(out, [[[9.0]]], atol=1e-7)

    @pytest.mark.parametrize("stride,padding,kh,kw", [(1, 0, 3, 3), (1, 1, 3, 3), (2, 1, 3, 3), (1, 0, 2, 3), (2, 0, 1, 1)])
    def test_against_naive_loop(self, stride, padding, kh, kw):
        rng = np.random.default_rng(42 + stride + padding + kh)
        x = rng.standard_normal((3, 7, 8))
        w = rng.standard_normal((2, 3, kh, kw))
        got = T.conv2d(T.Tensor(x), T.Tensor(w), stride=stride, padding=padding).data
        np.testing.assert_allclose(got, naive_conv2d(x, w, stride, padding), atol=1e-5)

    def test_kernel_too_large(self):
        with pytest.raises(T.ShapeError):
            T.conv2d(T.Tensor(np.zeros((1, 2, 2))), T.Tensor(np.zeros((1, 1, 3, 3))))


class TestBackward:
    def test_sum_gives_ones(self):
        x = t64(np.arange(6.0).reshape(2, 3))
        T.backward(x.sum())
        np.testing.assert_array_equal(x.grad, np.ones((2, 3)))

    def test_quadratic_hand_gradient(self):
        x = t64([1.0, 2.0])
        loss = T.tsum(T.mul(x, x))
        T.backward(loss)
        np.testing.assert_allclose(x.grad, [2.0, 4.0], atol=1e-12)

    def test_loss_must_be_scalar(self):
        x = t64([1.0, 2.0])
        with pytest.raises(T.ShapeError):
            T.backward(T.mul(x, x))

    def test_fanout_accumulates_both_paths(self):
        # tensor feeding two consumers: loss = sum(x*x) + sum(3*x)
        x = t64([0.5, -1.5, 2.0])
        loss = T.add(T.tsum(T.mul(x, x)), T.tsum(T.mul(x, 3.0)))
        T.backward(loss)
        np.testing.assert_allclose(x.grad, 2 * x.data + 3.0, atol=1e-12)
        # and against finite differences
        x2 = t64([0.5, -1.5, 2.0])
        gradcheck(lambda ps: T.add(T.tsum(T.mul(ps[0], ps[0])), T.tsum(T.mul(ps[0], 3.0))), [x2])

    def test_tape_topological_and_single_use(self):
        x = t64([1.0, 2.0])
        y = T.mul(x, x)
        loss = T.tsum(y)
        tape = T.Tape.trace(loss)
        pos = {id(n): i for i, n in enumerate(tape.nodes)}
        for node in tape.nodes:
            for parent in node._parents:
                assert pos[id(parent)] < pos[id(node)]
        T.backward(loss, tape)
        with pytest.raises(RuntimeError):
            tape.run(loss)


class TestAdam:
    def test_zero_gradient_leaves_params(self):
        p = T.parameter([1.0, 2.0])
        p.grad = np.zeros(2, dtype=np.float32)
        before = p.data.copy()
        T.Adam([p], lr=0.1).step()
        np.testing.assert_array_equal(p.data, before)

    def test_converges_on_scalar_quadratic(self):
        p = T.parameter(np.array(5.0), dtype=np.float64)
        opt = T.Adam([p], lr=0.1)
        for _ in range(200):
            p.grad = None
            loss = T.mul(T.sub(p, 3.0), T.sub(p, 3.0))
            T.backward(loss)
            opt.step()
        assert abs(p.item() - 3.0) < 1e-3

    def test_first_step_magnitude(self):
        p = T.parameter(np.array([2.0, -1.0]), dtype=np.float64)
        p.grad = np.array([0.5, -0.25])
        T.Adam([p], lr=0.01).step()
        # bias-corrected first step is lr * g / (|g| + eps) ~= lr * sign(g)
        np.testing.assert_allclose(p.data, [2.0 - 0.01, -1.0 + 0.01], atol=1e-6)

    def test_missing_grad_raises(self):
        p = T.parameter([1.0])
        with pytest.raises(ValueError):
            T.Adam([p]).step()


class TestGradientChecks:
    """Central finite differences in double mode, rel err <= 1e-5."""

    def test_binary_ops(self):
        rng = np.random.default_rng(10)
        for op in (T.add, T.sub, T.mul):
            a, b = rand_t(rng, (3, 4)), rand_t(rng, (3, 4))
            w = rng.standard_normal((3, 4))
            gradcheck(lambda ps, op=op, w=w: T.tsum(T.mul(op(ps[0], ps[1]), T.Tensor(w))), [a, b])
            s = rand_t(rng, ())
            gradcheck(lambda ps, op=op, w=w: T.tsum(T.mul(op(ps[0], ps[1]), T.Tensor(w))), [a, s])

    def test_unary_ops(self):
        rng = np.random.default_rng(11)
        cases = [
            (T.neg, 1.0),
            (T.relu, 1.0),
            (T.gelu, 1.0),
            (T.exp, 0.5),
            (T.absolute, 1.0),
            (lambda t: T.abs_pow(t, 3.0), 1.0),
            (lambda t: T.log(T.add(T.absolute(t), 2.0)), 1.0),
            (lambda t: T.softmax(t, axis=-1), 1.0),
        ]
        for op, scale in cases:
            x = rand_t(rng, (4, 5), scale)
            x.data += np.sign(x.data) * 0.05  # keep clear of relu/abs kinks
            w = rng.standard_normal((4, 5))
            gradcheck(lambda ps, op=op, w=w: T.tsum(T.mul(op(ps[0]), T.Tensor(w))), [x])

    def test_matmul_variants(self):
        rng = np.random.default_rng(12)
        a, b = rand_t(rng, (3, 4)), rand_t(rng, (4, 2))
        w = rng.standard_normal((3, 2))
        gradcheck(lambda ps, w=w: T.tsum(T.mul(T.matmul(ps[0], ps[1]), T.Tensor(w))), [a, b])
        a = rand_t(rng, (2, 3, 4))
        w = rng.standard_normal((2, 3, 2))
        gradcheck(lambda ps, w=w: T.tsum(T.mul(T.matmul(ps[0], ps[1]), T.Tensor(w))), [a, b])
        a, b = rand_t(rng, (2, 3, 4)), rand_t(rng, (2, 4, 2))
        gradcheck(lambda ps, w=w: T.tsum(T.mul(T.matmul(ps[0], ps[1]), T.Tensor(w))), [a, b])

    def test_layernorm(self):
        rng = np.random.default_rng(13)
        x, gain, bias = rand_t(rng, (3, 5)), rand_t(rng, (5,)), rand_t(rng, (5,))
        w = rng.standard_normal((3, 5))
        gradcheck(lambda ps, w=w: T.tsum(T.mul(T.layernorm(ps[0], ps[1], ps[2]), T.Tensor(w))), [x, gain, bias], tol=2e-5)

    def test_conv2d(self):
        rng = np.random.default_rng(14)
        for stride, padding in [(1, 0), (1, 1), (2, 1)]:
            x = rand_t(rng, (2, 2, 5, 5))
            k = rand_t(rng, (3, 2, 3, 3))
            b = rand_t(rng, (3,))
            w = rng.standard_normal(T.conv2d(x, k, b, stride=stride, padding=padding).shape)
            gradcheck(
                lambda ps, w=w, s=stride, p=padding: T.tsum(T.mul(T.conv2d(ps[0], ps[1], ps[2], stride=s, padding=p), T.Tensor(w))),
                [x, k, b],
            )

    def test_structural_ops(self):
        rng = np.random.default_rng(15)
        x = rand_t(rng, (3, 4))
        w = rng.standard_normal(12)
        gradcheck(lambda ps, w=w: T.tsum(T.mul(T.reshape(ps[0], (12,)), T.Tensor(w))), [x])
        w = rng.standard_normal((4, 3))
        gradcheck(lambda ps, w=w: T.tsum(T.mul(T.transpose(ps[0], (1, 0)), T.Tensor(w))), [x])
        y = rand_t(rng, (3, 1))
        w = rng.standard_normal((3, 4))
        gradcheck(lambda ps, w=w: T.tsum(T.mul(T.broadcast_to(ps[0], (3, 4)), T.Tensor(w))), [y])
        w = rng.standard_normal((2, 4))
        gradcheck(lambda ps, w=w: T.tsum(T.mul(ps[0][1:3], T.Tensor(w))), [x])
        idx = np.array([0, 2, 2, 1])
        w = rng.standard_normal((4, 4))
        gradcheck(lambda ps, w=w: T.tsum(T.mul(T.gather_rows(ps[0], idx), T.Tensor(w))), [x])
        idx2 = np.array([[0, 3, 3], [1, 0, 2]])
        z = rand_t(rng, (2, 4, 3))
        w = rng.standard_normal((2, 3, 3))
        gradcheck(lambda ps, w=w: T.tsum(T.mul(T.gather_tokens(ps[0], idx2), T.Tensor(w))), [z])
        a, b = rand_t(rng, (2, 3)), rand_t(rng, (4, 3))
        w = rng.standard_normal((6, 3))
        gradcheck(lambda ps, w=w: T.tsum(T.mul(T.concat([ps[0], ps[1]], axis=0), T.Tensor(w))), [a, b])
        w = rng.standard_normal(4)
        gradcheck(lambda ps, w=w: T.tsum(T.mul(T.tmean(ps[0], axis=0), T.Tensor(w))), [x])
        bias = rand_t(rng, (4,))
        w = rng.standard_normal((3, 4))
        gradcheck(lambda ps, w=w: T.tsum(T.mul(T.add_bias(ps[0], ps[1]), T.Tensor(w))), [x, bias])
        w = rng.standard_normal((3, 4))
        c = rng.standard_normal((1, 4))
        gradcheck(lambda ps, w=w, c=c: T.tsum(T.mul(T.add_const(ps[0], c), T.Tensor(w))), [x])

    def test_cross_entropy(self):
        rng = np.random.default_rng(16)
        logits = rand_t(rng, (5, 4))
        labels = np.array([0, 3, 1, 1, 2])
        gradcheck(lambda ps: T.cross_entropy(ps[0], labels), [logits])

    def test_three_composite_programs(self):
        rng = np.random.default_rng(17)

        def prog1(ps):  # matmul -> gelu -> sum
            return T.tsum(T.gelu(T.matmul(ps[0], ps[1])))

        def prog2(ps):  # layernorm -> softmax -> weighted sum
            out = T.softmax(T.layernorm(ps[0], ps[1], ps[2]), axis=-1)
            return T.tsum(T.mul(out, T.Tensor(np.arange(5.0).reshape(1, 5) * np.ones((3, 1)))))

        def prog3(ps):  # conv -> relu -> mean -> exp
            return T.tsum(T.exp(T.tmean(T.relu(T.conv2d(ps[0], ps[1], stride=1, padding=1)))))

        gradcheck(prog1, [rand_t(rng, (3, 4)), rand_t(rng, (4, 5))])
        gradcheck(prog2, [rand_t(rng, (3, 5)), rand_t(rng, (5,)), rand_t(rng, (5,))], tol=2e-5)
        gradcheck(prog3, [rand_t(rng, (1, 2, 4, 4), 0.5), rand_t(rng, (2, 2, 3, 3), 0.5)])


class TestDeterminism:
    def test_ops_bit_identical(self):
        rng = np.random.default_rng(20)
        x = rng.standard_normal((6, 6)).astype(np.float32)
        w = rng.standard_normal((6, 6)).astype(np.float32)

        def run():
            a = T.Tensor(x.copy())
            b = T.Tensor(w.copy())
            out = T.softmax(T.gelu(T.matmul(a, b)), axis=-1)
            return out.data.tobytes()

        assert run() == run()

    def test_mixed_dtype_rejected(self):
        with pytest.raises(TypeError):
            T.add(T.Tensor(np.zeros(2, dtype=np.float32)), T.Tensor(np.zeros(2, dtype=np.float64)))
