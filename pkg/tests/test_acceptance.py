import time

import numpy as np
import pytest

from graph_fcn.backbone import BackboneConfig
from graph_fcn.data import generate_shapes, split_ids
from graph_fcn.gradcheck import DEFAULT_TOLERANCE, full_model_check
from graph_fcn.metrics import ConfusionMatrix, pixel_accuracy
from graph_fcn.model import ModelConfig, predict
from graph_fcn.training import TrainConfig, train

TOY = BackboneConfig(in_channels=3, c1=8, c2=16, node_stride=8, num_classes=4)


def test_full_model_gradients_match_finite_differences():
    start = time.time()
    result = full_model_check(seed=0, count=50)
    assert len(result.entries) == 50
    assert result.passed(DEFAULT_TOLERANCE), result.worst()
    assert time.time() - start < 60.0


def test_gradients_without_node_loss():
    assert full_model_check(seed=1, count=20, lambda_node=0.0).passed()


@pytest.mark.slow
def test_joint_training_halves_the_loss_and_fits_the_images():
    samples = generate_shapes(5, 32, 32, 4, seed=0)
    model_cfg = ModelConfig.build(BackboneConfig(c1=8, c2=16, node_stride=4, num_classes=4), hidden_dim=16)
    cfg = TrainConfig(phase1_iters=0, phase2_lr=0.01, weight_decay=0.0, epochs=40, seed=0)
    report = train(samples, model_cfg, cfg)
    assert len(report.steps) == 200
    assert report.epochs[-1].mean_total <= 0.5 * report.epochs[0].mean_total
    for sample in samples:
        labels = predict(sample.image, report.params, model_cfg.backbone)
        cm = ConfusionMatrix(4).accumulate(labels, sample.labels)
        assert pixel_accuracy(cm) >= 0.9


@pytest.mark.slow
def test_node_loss_does_not_hurt_toy_segmentation():
    samples = generate_shapes(250, 64, 64, 4, seed=0)
    train_ids, _ = split_ids([s.id for s in samples], 0.2, seed=0)
    held_in = set(train_ids)
    train_set = [s for s in samples if s.id in held_in]
    test_set = [s for s in samples if s.id not in held_in]
    model_cfg = ModelConfig.build(TOY, hidden_dim=32)

    gains = []
    for seed in range(5):
        cfg = TrainConfig(phase1_iters=100, phase1_lr=0.01, phase2_lr=1e-3, epochs=3, seed=seed)
        dual = train(train_set, model_cfg, cfg, test_set=test_set).epochs[-1].metrics['miou']
        plain = train(train_set, model_cfg, cfg.without_gcn(), test_set=test_set).epochs[-1].metrics['miou']
        gains.append((dual, plain))
    dual, plain = np.array(gains).T
    assert np.median(dual) >= np.median(plain)
    assert np.mean(dual - plain) > 0
