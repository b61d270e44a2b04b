import math

import numpy as np
import pytest
import torch

from channel.dataset import generate_records
from channel.errors import InvalidInputError, MissingWeightsError
from channel.generator import DatasetSpec
from channel.state import SamplingGrid
from network.labels import CellGrid
from network.losses import GateMode, OrderLoss, loss_detection, loss_model_order, loss_params, loss_total
from network.model import HarmonicNet, NetworkConfig, count_parameters, predict
from network.training import ModelWeights, TrainingSpec, train

SMALL = NetworkConfig(
    n_freq = 16,
    n_time = 16,
    stage1_blocks = 2,
    base_channels = 4,
    downsample_blocks = 1,
    head_conv_blocks = 1,
    fc_hidden = 16,
)


def small_records(count=6, seed=1):
    spec = DatasetSpec(grid=SamplingGrid(16, 16), path_count_range=(1, 3), count=count, seed=seed)
    return generate_records(spec)


def test_default_network_size():
    config = NetworkConfig()
    assert config.stage1_channels == [32, 64, 128, 256, 512]
    assert config.feature_size == (8, 8)
    assert 20e6 <= count_parameters(HarmonicNet(config)) <= 30e6


def test_output_shapes_and_zero_input():
    torch.manual_seed(0)
    model = HarmonicNet(SMALL)
    eta, rho = predict(model, np.zeros((32, 16, 16)))
    assert eta.shape == (8, 8, 9)
    assert rho.shape == (20,)
    assert np.all(np.isfinite(eta)) and np.all(np.isfinite(rho))


def test_eval_mode_is_batch_independent():
    torch.manual_seed(0)
    model = HarmonicNet(SMALL)
    sample = np.random.default_rng(0).standard_normal((32, 16, 16))
    eta, rho = predict(model, np.stack([sample, sample]))
    assert eta.shape == (2, 8, 8, 9)
    np.testing.assert_array_equal(eta[0], eta[1])
    np.testing.assert_array_equal(rho[0], rho[1])


def test_wrong_input_shape():
    with pytest.raises(InvalidInputError):
        predict(HarmonicNet(SMALL), np.zeros((32, 8, 16)))


def test_config_validation():
    with pytest.raises(InvalidInputError):
        NetworkConfig(kernel_size=4)
    with pytest.raises(InvalidInputError):
        NetworkConfig(cell_grid=CellGrid(2, 2, 1), p_max=20)


def test_model_order_loss_examples():
    target = torch.eye(20)[4][None]
    assert loss_model_order(torch.zeros(1, 20), target).item() == pytest.approx(math.log(2))
    saturated = 40.0 * (2 * target - 1)
    assert loss_model_order(saturated, target).item() < 1e-12

    three = torch.tensor([[0.0, 0.0, 1.0]])
    assert loss_model_order(torch.zeros(1, 3), three, OrderLoss.SOFTMAX).item() == pytest.approx(math.log(3))
    logits = torch.tensor([[1.0, -2.0, 0.5]])
    expected = -sum(
        t * math.log(1 / (1 + math.exp(-z))) + (1 - t) * math.log(1 - 1 / (1 + math.exp(-z)))
        for z, t in zip([1.0, -2.0, 0.5], [0.0, 0.0, 1.0])
    ) / 3
    assert loss_model_order(logits, three).item() == pytest.approx(expected, rel=1e-6)


def test_param_loss_example():
    eta_true = torch.zeros(8, 8, 9)
    eta_pred = torch.zeros(8, 8, 9)
    eta_true[2, 3, 0:3] = torch.tensor([1.0, 0.5, 0.5])
    eta_pred[2, 3, 0:3] = torch.tensor([0.0, 0.75, 0.25])
    # Other slots: sigmoid(0) = 0.5 gate but zero distance.
    assert loss_params(eta_pred, eta_true).item() == pytest.approx(0.0625)
    assert loss_params(eta_pred, eta_true, GateMode.TRUE).item() == pytest.approx(0.25)

    total = loss_total(eta_pred, eta_true, torch.zeros(20), torch.eye(20)[0], beta=4.0)
    assert total.item() == pytest.approx(math.log(2) + 0.25)


def test_param_loss_is_batch_mean():
    eta_true = torch.zeros(2, 8, 8, 9)
    eta_pred = torch.zeros(2, 8, 8, 9)
    eta_pred[0, 0, 0, 1] = 1.0
    single = loss_params(eta_pred[0], eta_true[0]).item()
    assert loss_params(eta_pred, eta_true).item() == pytest.approx(single / 2)


def test_masked_slot_has_no_gradient():
    eta_true = torch.zeros(8, 8, 9)
    eta_pred = torch.zeros(8, 8, 9)
    eta_pred[..., 0::3] = -20.0
    eta_pred[1, 1, 1:3] = torch.tensor([0.9, 0.1])
    eta_pred.requires_grad_(True)
    loss_params(eta_pred, eta_true).backward()
    assert eta_pred.grad[1, 1, 1:3].abs().max().item() < 1e-7


def test_losses_match_finite_differences():
    generator = torch.Generator().manual_seed(3)
    eta_true = torch.rand(2, 2, 2, 6, generator=generator, dtype=torch.float64)
    eta_true[..., 0::3] = (eta_true[..., 0::3] > 0.5).double()
    eta_pred = torch.randn(2, 2, 2, 6, generator=generator, dtype=torch.float64, requires_grad=True)
    rho_true = torch.eye(4, dtype=torch.float64)[[1, 3]]
    rho_logits = torch.randn(2, 4, generator=generator, dtype=torch.float64, requires_grad=True)

    assert torch.autograd.gradcheck(lambda e: loss_params(e, eta_true), (eta_pred,))
    assert torch.autograd.gradcheck(lambda e: loss_detection(e, eta_true), (eta_pred,))
    assert torch.autograd.gradcheck(lambda r: loss_model_order(r, rho_true), (rho_logits,))


def test_detection_loss_at_zero_logits():
    eta_true = torch.zeros(8, 8, 9)
    eta_true[0, 0, 0] = 1.0
    assert loss_detection(torch.zeros(8, 8, 9), eta_true).item() == pytest.approx(math.log(2))


def test_training_defaults():
    spec = TrainingSpec()
    data = spec.to_dict()
    assert (data['learning_rate'], data['betas'], data['batch_size'], data['epochs'], data['beta']) == (
        3e-4, [0.9, 0.999], 32, 20, 4.0,
    )
    assert data['order_loss'] == 'bce' and data['gate'] == 'predicted'
    with pytest.raises(InvalidInputError):
        TrainingSpec(optimizer='sgd')


def test_training_is_deterministic():
    records = small_records()
    spec = TrainingSpec(batch_size=3, epochs=2)
    first = train(records, SMALL, spec)
    second = train(records, SMALL, spec)

    assert first.history == second.history
    assert len(first.history['train_loss']) == 2
    assert first.training['steps'] == 4
    for key, value in first.state_dict.items():
        assert torch.equal(value, second.state_dict[key]), key


def test_training_rejects_mismatched_grid():
    with pytest.raises(InvalidInputError):
        train(small_records(count=2), NetworkConfig(), TrainingSpec(epochs=1))
    with pytest.raises(InvalidInputError):
        train([], SMALL, TrainingSpec(epochs=1))


def test_weights_round_trip(tmp_path):
    records = small_records(count=3)
    weights = train(records, SMALL, TrainingSpec(batch_size=3, epochs=1), validation=records, dataset_hash='abc')
    weights.save(tmp_path / 'weights')
    loaded = ModelWeights.load(tmp_path / 'weights')

    assert loaded.config == SMALL
    assert loaded.dataset_hash == 'abc'
    assert loaded.history == weights.history
    for key, value in weights.state_dict.items():
        assert torch.equal(value, loaded.state_dict[key]), key
    model = loaded.build_model()
    assert not model.training

    with pytest.raises(MissingWeightsError):
        ModelWeights.load(tmp_path / 'missing')


@pytest.mark.slow
def test_small_network_overfits():
    records = small_records(count=64)
    spec = TrainingSpec(batch_size=64, epochs=2000, learning_rate=1e-3, max_steps=2000)
    weights = train(records, SMALL, spec)
    losses = weights.history['step_loss']
    assert len(losses) <= 2000
    assert losses[-1] < 0.05 * losses[0]
