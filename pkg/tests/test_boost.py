import numpy as np
import pytest

from cirboost import BoostConfig, Dataset, predict, train
from cirboost.boost import delta_scaling_check, scaled_reduction
from cirboost.cir import CirConfig
from cirboost.data import build_sorted_index
from cirboost.errors import DomainError, ShapeError
from cirboost.loss import LossSpec
from cirboost.simlab import DgpSpec, generate_dgp
from cirboost.tree import OptimismReport, Tree, TreeBuilder, build_tree


def test_scaled_reduction_at_full_step_is_root_test():
    rep = OptimismReport.make(0.3, 0.1, 0.35)
    assert scaled_reduction(rep, 1.0) == pytest.approx(rep.adjusted_gain)
    assert scaled_reduction(rep, 0.5) == pytest.approx(0.75 * 0.3 + 0.5 * (0.1 - 0.35))


@pytest.mark.parametrize("delta", [0.5, 0.1, 0.01, 1.0])
def test_delta_scaling_identity(case1_data, delta):
    d = case1_data
    loss = LossSpec("squared_error")
    derivs = loss.derivatives(d.response, np.full(d.n, d.response.mean()))
    root = build_tree(d, build_sorted_index(d), derivs)
    tree = Tree.from_node(root)
    direct, scaled = delta_scaling_check(tree, d, derivs, delta)
    assert direct == pytest.approx(scaled, rel=1e-10, abs=1e-12)
    assert tree.n_leaves >= 2
    # the actual loss drop equals the quadratic one exactly for squared error
    before = loss.value(d.response, np.full(d.n, d.response.mean())).mean()
    after = loss.value(d.response, d.response.mean() + delta * tree.predict(d.features)).mean()
    assert before - after == pytest.approx(direct, rel=1e-9)


def test_delta_scaling_on_stump_matches_R():
    y = np.array([0.0, 0.0, 2.0, 2.0])
    d = Dataset(np.arange(4.0)[:, None], y)
    derivs = LossSpec().derivatives(y, np.ones(4))
    root, _ = TreeBuilder(d, build_sorted_index(d), derivs).grow(force_root_split=True)
    direct, _ = delta_scaling_check(Tree.from_node(root), d, derivs, 0.5)
    assert direct == pytest.approx(0.75 * root.report.R, rel=1e-12)


@pytest.fixture(scope="module")
def case1_model():
    spec = DgpSpec("linear_u04", 1.0, 400)
    d = generate_dgp(spec, 2)
    return d, train(d, BoostConfig(learning_rate=0.05))


def test_training_loss_non_increasing(case1_model):
    _, ens = case1_model
    path = np.array(ens.train_loss_path)
    assert ens.n_trained > 5 and not ens.hit_iteration_cap
    assert len(path) == ens.n_trained + 1
    assert np.all(np.diff(path) <= 1e-12)


def test_cached_predictions_equal_predict(case1_model):
    d, ens = case1_model
    assert np.array_equal(ens.training_predictions, predict(ens, d.features))


def test_every_accepted_tree_passes_the_rule(case1_model):
    _, ens = case1_model
    assert all(scaled_reduction(r, ens.learning_rate) > 0 for r in ens.root_reports)
    assert scaled_reduction(ens.final_rejected, ens.learning_rate) <= 0 or ens.final_rejected.best_feature < 0


def test_reproducible_and_seed_sensitive():
    d = generate_dgp(DgpSpec("linear_u04", 1.0, 200, m_noise=3), 4)
    cfg = BoostConfig(learning_rate=0.1)
    a, b = train(d, cfg), train(d, cfg)
    assert a.n_trained == b.n_trained
    assert np.array_equal(a.training_predictions, b.training_predictions)
    threaded = train(d, BoostConfig(learning_rate=0.1, threads=3))
    assert np.array_equal(a.training_predictions, threaded.training_predictions)
    assert BoostConfig(seed=7, cir=CirConfig(seed=2)).seed == 7


def test_no_splittable_feature_gives_empty_ensemble():
    d = Dataset(np.zeros((20, 2)), np.arange(20.0))
    ens = train(d)
    assert ens.n_trained == 0 and not ens.hit_iteration_cap
    assert np.array_equal(ens.predict(np.ones((3, 2))), np.full(3, 9.5))


def test_iteration_cap_is_flagged():
    d = generate_dgp(DgpSpec("linear_u04", 1.0, 300), 1)
    ens = train(d, BoostConfig(max_iterations=3))
    assert ens.n_trained == 3 and ens.hit_iteration_cap


def test_stop_policy_never_forces_a_split():
    d = generate_dgp(DgpSpec("linear_u04", 1.0, 300), 1)
    ens = train(d, BoostConfig(learning_rate=0.1, root_leaf_policy="stop"))
    assert all(t.n_leaves >= 2 for t in ens.trees)
    assert all(r.splits for r in ens.root_reports)


def test_log_loss_training():
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 1, 400)
    y = (rng.uniform(size=400) < np.where(x > 0.5, 0.85, 0.15)).astype(float)
    d = Dataset(x[:, None], y)
    ens = train(d, BoostConfig(loss="log_loss", learning_rate=0.1))
    assert ens.n_trained > 0
    assert np.all(np.diff(ens.train_loss_path) <= 1e-12)
    p = ens.predict_probability(np.array([[0.2], [0.8]]))
    assert p[0] < 0.35 and p[1] > 0.65


def test_predict_shape_errors(case1_model):
    _, ens = case1_model
    with pytest.raises(ShapeError):
        ens.predict(np.zeros((2, 3)))
    with pytest.raises(DomainError):
        ens.predict_probability(np.zeros((1, 1)))


def test_config_validation():
    with pytest.raises(DomainError):
        BoostConfig(learning_rate=0.0)
    with pytest.raises(DomainError):
        BoostConfig(max_iterations=0)
    with pytest.raises(DomainError):
        BoostConfig(root_leaf_policy="maybe")
