import numpy as np
import pytest

from cgnl.kernels import KernelSpec
from cgnl.toy import DivergenceError, ToyTrainConfig, losses_csv, make_dataset, train_toy


def test_dataset_labels_follow_interaction():
    cfg = ToyTrainConfig(n_samples=64, shift=2)
    x, y = make_dataset(cfg)
    stat = np.array([sum(x[s, n, 0] * x[s, n + 2, 1] for n in range(cfg.n - 2)) for s in range(64)])
    assert np.array_equal(y, (stat > 0).astype(int))
    assert np.all(x[:, :, -1] == 1.0)
    assert 0.2 < y.mean() < 0.8


def test_multiclass_labels_balanced():
    _, y = make_dataset(ToyTrainConfig(n_samples=90, classes=3))
    assert np.bincount(y).tolist() == [30, 30, 30]


def test_deterministic_curve():
    cfg = ToyTrainConfig(n_samples=32, steps=10)
    assert train_toy(cfg) == train_toy(cfg)


def test_threads_do_not_change_curve():
    cfg = ToyTrainConfig(n_samples=32, steps=5, groups=4)
    spec = KernelSpec("embedded_gaussian", order=2)
    assert train_toy(cfg, spec) == train_toy(cfg, spec, threads=4)


def test_zero_learning_rate_is_flat():
    losses = train_toy(ToyTrainConfig(n_samples=32, steps=6, learning_rate=0.0))
    assert len(set(losses)) == 1


def test_divergence_raises():
    with pytest.raises(DivergenceError):
        train_toy(ToyTrainConfig(n_samples=32, steps=20, learning_rate=50.0))


@pytest.mark.parametrize("kw", [dict(steps=0), dict(learning_rate=-1), dict(c=2),
                                dict(shift=16), dict(classes=1), dict(rho=1.0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        ToyTrainConfig(**kw)


def test_losses_csv():
    assert losses_csv([1.0, 0.5]) == "step,loss\n0,1.0\n1,0.5\n"


@pytest.mark.parametrize("spec", [KernelSpec("embedded_gaussian", order=3),
                                  KernelSpec("rbf", order=3, gamma=1e-4)],
                         ids=["egauss", "rbf"])
def test_other_kernels_train(spec):
    losses = train_toy(ToyTrainConfig(n_samples=64, steps=60, groups=2), spec)
    assert losses[-1] < losses[0]
