import sys
from pathlib import Path

import numpy as np
import pytest


src = str(Path(__file__).parent.parent) + "/src"

sys.path.insert(0, src)

import ssllab as sl
from ssllab.simsiam.losses import l2_normalize


def test_negative_cosine_similarity():
    v = sl.Tensor([[1.0, 2.0, -3.0]])
    assert np.isclose(float(sl.negative_cosine_similarity(v, v).data), -1)
    assert float(sl.negative_cosine_similarity(sl.Tensor([[1.0, 0.0]]), sl.Tensor([[0.0, 1.0]])).data) == 0
    value = float(sl.negative_cosine_similarity(sl.Tensor([[3.0, 4.0]]), sl.Tensor([[4.0, 3.0]])).data)
    assert np.isclose(value, -0.96)

    # scale invariant, and in [-1, 1]
    x = sl.make_rng(0).standard_normal((16, 8))
    y = sl.make_rng(1).standard_normal((16, 8))
    a = float(sl.negative_cosine_similarity(x, y).data)
    b = float(sl.negative_cosine_similarity(x * 5, y * 0.1).data)
    assert np.isclose(a, b, atol=1e-6)
    assert -1 <= a <= 1

    with pytest.raises(sl.DegenerateVectorError):
        sl.negative_cosine_similarity(sl.Tensor([[0.0, 0.0]]), sl.Tensor([[1.0, 0.0]]))
    with pytest.raises(sl.ShapeError):
        sl.negative_cosine_similarity(sl.Tensor(np.ones((2, 3))), sl.Tensor(np.ones((2, 4))))


def random_batch(rng, n: int, d: int, dtype) -> sl.Tensor:
    """Gaussian rows, some of them scaled down to a norm near 1e-6."""
    x = rng.standard_normal((n, d))
    tiny = rng.random(n) < 0.2
    x[tiny] *= 1e-6 / np.linalg.norm(x[tiny], axis=1, keepdims=True)
    return sl.Tensor(x.astype(dtype))


def test_loss_properties_on_random_batches():
    rng = sl.make_rng(10)
    for i in range(1000):
        dtype = np.float32 if i % 2 else np.float64
        atol = 1e-5 if dtype == np.float32 else 1e-12
        n, d = int(rng.integers(1, 9)), int(rng.integers(1, 17))
        v = random_batch(rng, n, d, dtype)
        w = random_batch(rng, n, d, dtype)

        same = float(sl.negative_cosine_similarity(v, v).data)
        assert same == pytest.approx(-1, abs=atol), i

        a = float(sl.negative_cosine_similarity(v, w).data)
        assert -1 - atol <= a <= 1 + atol, i
        scales = (10.0 ** rng.uniform(-3, 3, size=(n, 1))).astype(dtype)
        b = float(sl.negative_cosine_similarity(sl.Tensor(v.data * scales), w).data)
        assert b == pytest.approx(a, abs=atol * 10), i

        p1, p2, z1, z2 = (random_batch(rng, n, d, dtype) for _ in range(4))
        loss = sl.symmetric_loss(p1, p2, z1, z2).data
        assert loss == sl.symmetric_loss(p2, p1, z2, z1).data, i
        assert loss.dtype == dtype, i


def test_l2_normalize():
    out = l2_normalize(sl.Tensor([[3.0, 4.0], [0.0, 2.0]])).data
    assert np.allclose(out, [[0.6, 0.8], [0, 1]])


def test_symmetric_loss():
    e1 = sl.Tensor([[1.0, 0.0]])
    e2 = sl.Tensor([[0.0, 1.0]])
    assert np.isclose(float(sl.symmetric_loss(e1, e2, e2, e1).data), -1)
    assert float(sl.symmetric_loss(e1, e1, e2, e2).data) == 0

    # p1 = [1, 0], z2 = [0, 1], p2 = [1, 0], z1 = [1, 0]
    assert np.isclose(float(sl.symmetric_loss(e1, e1, e1, e2).data), -0.5)

    rng = sl.make_rng(2)
    p1, p2, z1, z2 = (sl.Tensor(rng.standard_normal((8, 4))) for _ in range(4))
    loss = sl.symmetric_loss(p1, p2, z1, z2).data
    swapped = sl.symmetric_loss(p2, p1, z2, z1).data
    assert loss == swapped
    assert -1 <= float(loss) <= 1


def test_representation_std():
    same = np.tile([[1.0, 2.0, 3.0]], (5, 1))
    assert sl.representation_std(same) == pytest.approx(0, abs=1e-12)

    d = 64
    basis = np.eye(d)
    assert sl.representation_std(basis) == pytest.approx(np.sqrt(1 / d - 1 / d**2))

    gaussian = sl.make_rng(3).standard_normal((512, d))
    assert abs(sl.representation_std(gaussian) - 1 / np.sqrt(d)) < 0.2 / np.sqrt(d)

    with pytest.raises(sl.DegenerateBatchError):
        sl.representation_std(np.ones((1, 4)))


def test_heads():
    rng = sl.make_rng(0)
    projection = sl.ProjectionHead(32, 16, rng)
    linears = projection.linear_layers()
    assert [(layer.in_features, layer.out_features) for layer in linears] == [(32, 16), (16, 16), (16, 16)]
    assert [layer.bias is None for layer in linears] == [True, True, False]
    batch_norms = [layer for layer in projection.layers if isinstance(layer, sl.BatchNorm)]
    assert len(batch_norms) == 2

    with_bn = sl.ProjectionHead(32, 16, rng, output_bn=True)
    assert isinstance(list(with_bn.layers)[-1], sl.BatchNorm)
    assert with_bn.linear_layers()[-1].bias is None

    prediction = sl.PredictionHead(16, rng)
    assert prediction.hidden_dim == 4
    assert prediction(sl.Tensor(np.ones((3, 16)) + np.arange(16))).shape == (3, 16)

    with pytest.raises(sl.ConfigError):
        sl.PredictionHead(30, rng)


def test_siamese_forward(resnet_config, images):
    model = sl.build_siamese(resnet_config, projection_dim=16, seed=0)
    outputs = sl.siamese_forward(model, sl.Tensor(images), sl.Tensor(images[::-1].copy()))
    assert [out.shape for out in outputs] == [(4, 16)] * 4
    p1, p2, z1, z2 = outputs
    assert p1.requires_grad and p2.requires_grad
    assert not z1.requires_grad and not z2.requires_grad

    model.eval()
    p1, p2, z1, z2 = sl.siamese_forward(model, sl.Tensor(images), sl.Tensor(images))
    assert np.array_equal(p1.data, p2.data)
    assert np.array_equal(z1.data, z2.data)

    with pytest.raises(sl.ShapeError):
        sl.siamese_forward(model, sl.Tensor(images), sl.Tensor(images[:2]))

    with pytest.raises(sl.ConfigError):
        sl.build_siamese(resnet_config, projection_dim=30)


def loss_gradients(model, x1, x2) -> dict:
    """Gradient of the loss with respect to every parameter."""
    model.zero_grad()
    p1, p2, z1, z2 = sl.siamese_forward(model, x1, x2)
    sl.symmetric_loss(p1, p2, z1, z2).backward()
    return {name: param.grad.copy() for name, param in model.named_parameters()}


def test_stop_gradient_path(images):
    config = sl.BackboneConfig("resnet_small", input_size=(3, 16, 16), width_multiplier=0.125, depth=1)
    x1 = sl.Tensor(images, dtype=np.float64)
    x2 = sl.Tensor(images[:, :, :, ::-1], dtype=np.float64)

    stopped = sl.build_siamese(config, projection_dim=16, seed=4).astype(np.float64)
    stopped_grads = loss_gradients(stopped, x1, x2)

    # the same loss, written out with the prediction branch as the only path
    oracle = sl.build_siamese(config, projection_dim=16, seed=4, stop_gradient=False).astype(np.float64)
    oracle.zero_grad()
    z1 = oracle.encode(x1)
    z2 = oracle.encode(x2)
    loss = sl.symmetric_loss(
        oracle.prediction(z1), oracle.prediction(z2), sl.Tensor(z1.data), sl.Tensor(z2.data)
    )
    loss.backward()
    for name, param in oracle.named_parameters():
        assert np.allclose(param.grad, stopped_grads[name], atol=1e-10), name

    # without stop-gradient the z branches contribute as well
    free = sl.build_siamese(config, projection_dim=16, seed=4, stop_gradient=False).astype(np.float64)
    free_grads = loss_gradients(free, x1, x2)
    name = "projection.layers.0.weight"
    assert not np.allclose(free_grads[name], stopped_grads[name])


def test_checkpoint_meta(resnet_config):
    model = sl.build_siamese(resnet_config, projection_dim=16, stop_gradient=False, projection_output_bn=True)
    assert model.checkpoint_meta() == {
        "projection_dim": 16,
        "stop_gradient": False,
        "projection_output_bn": True,
    }
    assert model.backbone_config == resnet_config


def main():
    config = sl.BackboneConfig("resnet_small", input_size=(3, 16, 16), width_multiplier=0.125, depth=1)
    images = sl.make_rng(3).standard_normal((4, 3, 16, 16)).astype(np.float32)
    test_negative_cosine_similarity()
    test_loss_properties_on_random_batches()
    test_l2_normalize()
    test_symmetric_loss()
    test_representation_std()
    test_heads()
    test_siamese_forward(config, images)
    test_stop_gradient_path(images)
    test_checkpoint_meta(config)


if __name__ == "__main__":
    main()
