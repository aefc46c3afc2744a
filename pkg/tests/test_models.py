import numpy as np
import pytest

from misskit import tensor as T
from misskit.data import SyntheticDatasetSpec, build_dataset
from misskit.models import (
    CNNClassifier,
    CNNConfig,
    MissingnessAugment,
    TokenSet,
    TrainParams,
    ViTClassifier,
    ViTConfig,
    drop_tokens,
    saliency_map,
    tokens_covering,
    train_model,
)

SMALL_VIT = ViTConfig(image_size=32, token_size=8, embed_dim=32, num_heads=4, num_layers=2, mlp_ratio=2, num_classes=4)
SMALL_CNN = CNNConfig(image_size=32, widths=(8, 16), strides=(2, 2), num_classes=4)


def rand_image(seed, size=32):
    return np.random.default_rng(seed).random((3, size, size)).astype(np.float32)


class TestTokenize:
    def test_token_count_and_indices(self):
        model = ViTClassifier(ViTConfig(), seed=0)
        ts = model.tokenize(rand_image(0, 64))
        assert ts.tokens.shape == (64, 64)
        np.testing.assert_array_equal(ts.kept_indices, np.arange(64))

    def test_patch_locality(self):
        model = ViTClassifier(SMALL_VIT, seed=1)
        img1 = rand_image(1)
        img2 = img1.copy()
        # grid cell 5 of a 4x4 grid is row 1, col 1
        img2[:, 8:16, 8:16] += 0.25
        t1 = model.tokenize(img1).tokens.data
        t2 = model.tokenize(img2).tokens.data
        differs = np.any(t1 != t2, axis=1)
        np.testing.assert_array_equal(np.flatnonzero(differs), [5])

    def test_zero_image_gives_pos_plus_bias(self):
        model = ViTClassifier(SMALL_VIT, seed=2)
        ts = model.tokenize(np.zeros((3, 32, 32), dtype=np.float32))
        expect = model.params["pos"].data + model.params["patch.b"].data[None, :]
        np.testing.assert_allclose(ts.tokens.data, expect, atol=1e-7)

    def test_dimension_mismatch(self):
        model = ViTClassifier(SMALL_VIT, seed=3)
        with pytest.raises(T.ShapeError):
            model.tokenize(np.zeros((3, 16, 16), dtype=np.float32))


class TestDropTokens:
    def test_empty_removal_unchanged(self):
        model = ViTClassifier(SMALL_VIT, seed=4)
        ts = model.tokenize(rand_image(4))
        out = drop_tokens(ts, np.zeros((32, 32), bool), 8)
        assert out is ts

    def test_conservative_rectangle(self):
        mask = np.zeros((64, 64), bool)
        mask[0:10, 0:10] = True
        np.testing.assert_array_equal(tokens_covering(mask, 8), [0, 1, 8, 9])

    def test_exact_cell(self):
        mask = np.zeros((64, 64), bool)
        mask[8:16, 16:24] = True  # grid cell row 1, col 2 of 8x8 grid
        np.testing.assert_array_equal(tokens_covering(mask, 8), [1 * 8 + 2])

    def test_monotone_cover(self):
        model = ViTClassifier(SMALL_VIT, seed=5)
        ts = model.tokenize(rand_image(5))
        rng = np.random.default_rng(6)
        for _ in range(10):
            a = rng.random((32, 32)) < 0.2
            b = a | (rng.random((32, 32)) < 0.2)
            kept_a = set(drop_tokens(ts, a, 8).kept_indices.tolist())
            kept_b = set(drop_tokens(ts, b, 8).kept_indices.tolist())
            assert kept_b <= kept_a

    def test_whole_cell_union_is_exact(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            cells = rng.choice(16, size=rng.integers(1, 10), replace=False)
            mask = np.zeros((32, 32), bool)
            for c in cells:
                r, col = divmod(int(c), 4)
                mask[r * 8 : (r + 1) * 8, col * 8 : (col + 1) * 8] = True
            np.testing.assert_array_equal(tokens_covering(mask, 8), np.sort(cells))


class TestViTForward:
    def test_full_set_matches_plain_forward(self):
        model = ViTClassifier(SMALL_VIT, seed=8)
        img = rand_image(8)
        ts = model.tokenize(img)
        compact = model.forward_tokens(ts, "compact").data
        plain = model.logits(img)
        np.testing.assert_allclose(compact, plain, atol=1e-6)

    def test_padded_equals_compact_across_counts(self):
        rng = np.random.default_rng(9)
        for trial in range(20):
            model = ViTClassifier(SMALL_VIT, seed=100 + trial)
            img = rand_image(200 + trial)
            ts = model.tokenize(img)
            count = int(rng.integers(1, 17))
            keep = np.sort(rng.choice(16, size=count, replace=False))
            sub = TokenSet(T.gather_rows(ts.tokens, keep), keep)
            padded = model.forward_tokens(sub, "padded").data
            compact = model.forward_tokens(sub, "compact").data
            np.testing.assert_allclose(padded, compact, atol=1e-5)

    def test_padded_batch_mixed_lengths(self):
        model = ViTClassifier(ViTConfig(), seed=10)
        img = rand_image(10, 64)
        drops = [list(range(0)), list(range(34))]  # keeps 64 and 30 tokens
        batch = model.logits_dropped_batch(img, drops)
        for row, dropped in zip(batch, drops):
            ts = model.tokenize(img)
            mask = np.zeros(64, bool)
            mask[dropped] = True
            keep = np.flatnonzero(~mask)
            sub = TokenSet(T.gather_rows(ts.tokens, keep), keep)
            np.testing.assert_allclose(row, model.forward_tokens(sub, "compact").data, atol=1e-5)

    def test_token_permutation_invariance(self):
        model = ViTClassifier(SMALL_VIT, seed=11)
        ts = model.tokenize(rand_image(11))
        rng = np.random.default_rng(12)
        perm = rng.permutation(16)
        shuffled = TokenSet(T.gather_rows(ts.tokens, perm), ts.kept_indices[perm])
        a = model.forward_tokens(ts, "compact").data
        b = model.forward_tokens(shuffled, "compact").data
        np.testing.assert_allclose(a, b, atol=1e-5)

    def test_all_tokens_dropped_ignores_image(self):
        model = ViTClassifier(SMALL_VIT, seed=13)
        out1 = model.logits_dropped_batch(rand_image(13), [list(range(16))])
        out2 = model.logits_dropped_batch(rand_image(14), [list(range(16))])
        np.testing.assert_allclose(out1, out2, atol=1e-6)


class TestCNNForward:
    def test_deterministic(self):
        model = CNNClassifier(SMALL_CNN, seed=15)
        img = rand_image(15)
        a = model.logits(img)
        b = model.logits(img)
        assert a.tobytes() == b.tobytes()

    def test_reproducible_init(self):
        a = CNNClassifier(SMALL_CNN, seed=16).logits(rand_image(16))
        b = CNNClassifier(SMALL_CNN, seed=16).logits(rand_image(16))
        assert a.tobytes() == b.tobytes()
        c = CNNClassifier(SMALL_CNN, seed=17).logits(rand_image(16))
        assert a.tobytes() != c.tobytes()


class LinearRedModel:
    """logit0 = sum of the red channel; logit1 = 0."""

    kind = "cnn"
    model_id = "linear-red"
    dtype = np.float32

    def forward(self, images):
        red = images[:, 0, :, :]
        s = T.tsum(red, axis=(1, 2))
        zero = T.mul(s, 0.0)
        return T.concat([T.reshape(s, (s.shape[0], 1)), T.reshape(zero, (zero.shape[0], 1))], axis=1)

    def logits(self, image):
        return self.forward(T.Tensor(np.asarray(image, dtype=np.float32)[None])).data[0]


class TestSaliency:
    def test_zero_head_gives_zero_map(self):
        model = CNNClassifier(SMALL_CNN, seed=18)
        model.params["head.w"].data[:] = 0.0
        model.params["head.b"].data[:] = 0.0
        smap = saliency_map(model, rand_image(18))
        np.testing.assert_allclose(smap, 0.0, atol=1e-8)

    def test_linear_model_analytic(self):
        smap = saliency_map(LinearRedModel(), rand_image(19) + 0.5)
        np.testing.assert_allclose(smap, 1.0, atol=1e-6)

    def test_matches_finite_differences(self):
        cfg = CNNConfig(image_size=8, widths=(4, 4), strides=(2, 1), num_classes=3)
        model = CNNClassifier(cfg, seed=20).astype(np.float64)
        img = np.random.default_rng(21).random((3, 8, 8))
        smap = saliency_map(model, img)
        c = int(np.argmax(model.logits(img)))
        h = 1e-5
        fd = np.zeros((3, 8, 8))
        for ch in range(3):
            for y in range(8):
                for x in range(8):
                    up, down = img.copy(), img.copy()
                    up[ch, y, x] += h
                    down[ch, y, x] -= h
                    fd[ch, y, x] = (model.logits(up)[c] - model.logits(down)[c]) / (2 * h)
        np.testing.assert_allclose(smap, np.abs(fd).max(axis=0), atol=1e-3)


class TestTraining:
    def test_zero_epochs_returns_init(self):
        ds = build_dataset(SyntheticDatasetSpec(image_size=32, n_train=8, n_test=0, seed=1))
        hp = TrainParams(epochs=0, seed=5)
        model = train_model(SMALL_VIT_8CLS, ds, hp)
        fresh = ViTClassifier(SMALL_VIT_8CLS, seed=5)
        for name in model.params:
            assert model.params[name].data.tobytes() == fresh.params[name].data.tobytes()

    def test_deterministic_training(self):
        ds = build_dataset(SyntheticDatasetSpec(image_size=32, n_train=32, n_test=0, seed=2))
        hp = TrainParams(epochs=1, batch_size=16, lr=1e-3, seed=9)
        m1 = train_model(SMALL_VIT_8CLS, ds, hp)
        m2 = train_model(SMALL_VIT_8CLS, ds, hp)
        for name in m1.params:
            assert m1.params[name].data.tobytes() == m2.params[name].data.tobytes()

    def test_augment_drops_exact_count(self, monkeypatch):
        ds = build_dataset(SyntheticDatasetSpec(image_size=32, n_train=16, n_test=0, seed=3))
        seen = []
        original = ViTClassifier.embed_images

        def spy(self, images, kept=None):
            if kept is not None:
                seen.append(kept.shape[1])
            return original(self, images, kept)

        monkeypatch.setattr(ViTClassifier, "embed_images", spy)
        hp = TrainParams(epochs=1, batch_size=8, lr=1e-3, seed=4)
        train_model(SMALL_VIT_8CLS, ds, hp, augment=MissingnessAugment(0.5), token_size=8)
        # 4x4 grid of 8px tokens on 32px images: ceil(0.5*16)=8 kept of 16
        assert seen and all(k == 8 for k in seen)

    def test_augmented_cnn_blacks_cells(self):
        from misskit.models import _black_out_cells

        imgs = np.ones((2, 3, 32, 32), dtype=np.float32)
        out = _black_out_cells(imgs, [[0], [5]], grid_side=4, token_size=8)
        assert np.all(out[0, :, 0:8, 0:8] == 0.0)
        assert np.all(out[0, :, 8:, :] == 1.0)
        assert np.all(out[1, :, 8:16, 8:16] == 0.0)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_raises_with_step(self):
        ds = build_dataset(SyntheticDatasetSpec(image_size=32, n_train=8, n_test=0, seed=4))
        hp = TrainParams(epochs=6, batch_size=8, lr=1e12, seed=6)
        from misskit.models import TrainingError

        with pytest.raises(TrainingError) as err:
            train_model(SMALL_VIT_8CLS, ds, hp)
        assert err.value.step >= 1


SMALL_VIT_8CLS = ViTConfig(image_size=32, token_size=8, embed_dim=32, num_heads=4, num_layers=2, mlp_ratio=2, num_classes=8)


class TestConfigValidation:
    def test_image_size_divisibility(self):
        with pytest.raises(ValueError):
            ViTConfig(image_size=60, token_size=8)

    def test_heads_divide_embed(self):
        with pytest.raises(ValueError):
            ViTConfig(embed_dim=30, num_heads=4)
