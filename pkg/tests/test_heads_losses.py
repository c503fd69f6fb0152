import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import binom, poisson

from unimodal_ordinal import autodiff as ad
from unimodal_ordinal import heads, losses
from unimodal_ordinal.gradcheck import gradient_check
from unimodal_ordinal.methods import (
    METHOD_NAMES,
    LossSpec,
    forward_head,
    output_width,
    predict_from_output,
    sample_losses,
)
from unimodal_ordinal.simplex import is_unimodal, is_unimodal_batch, is_unimodal_with_mode
from unimodal_ordinal.transport import project_unimodal

EX1 = np.array([2, 3, 0, 1]) / 6
EX2 = np.array([2, 3, 1, 0]) / 6


def val(node):
    return float(node.value) if isinstance(node, ad.Node) else float(node)


def simplex_vectors(min_k=2, max_k=8):
    return st.integers(min_k, max_k).flatmap(
        lambda K: st.lists(st.floats(0.0, 1.0), min_size=K, max_size=K)
        .filter(lambda v: sum(v) > 1e-3).map(lambda v: np.array(v) / sum(v)))


# ------------------------------------------------------------------- heads

def test_unimodal_net_head_example():
    yhat, parts = heads.unimodal_net_head(np.array([1.0, 2.0, 0.0]), return_parts=True)
    assert np.array_equal(parts["zz"].value, [1, 2, 0])
    assert np.array_equal(parts["zm"].value, [1, 3, 3])
    assert np.array_equal(parts["zd"].value, [3, 2, 0])
    assert np.array_equal(parts["zo"].value, [1, 2, 0])
    e = np.exp([1.0, 2.0, 0.0])
    assert np.allclose(yhat.value, e / e.sum())
    assert is_unimodal_with_mode(yhat.value, 2)


def test_unimodal_net_head_negative_input_is_uniform():
    yhat = heads.unimodal_net_head(-np.ones(5) * 3)
    assert np.allclose(yhat.value, 0.2)


@pytest.mark.parametrize("nonneg", ["relu", "softplus"])
def test_unimodal_net_head_always_unimodal(nonneg):
    rng = np.random.default_rng(0)
    for K in range(2, 16):
        z = rng.normal(scale=3.0, size=(100_000, K))
        yhat = heads.unimodal_net_head(z, nonneg).value
        assert is_unimodal_batch(yhat).all()


def test_binomial_head():
    assert np.allclose(heads.binomial_head(np.array([0.0]), 3).value, [0.25, 0.5, 0.25])
    low = heads.binomial_head(np.array([-40.0]), 4).value
    assert low[0] == pytest.approx(1.0)
    rng = np.random.default_rng(1)
    for K in range(2, 13):
        x = rng.normal(scale=4.0, size=(10_000 // 11, 1))
        yhat = heads.binomial_head(x, K).value
        ref = binom.pmf(np.arange(K)[None, :], K - 1, 1 / (1 + np.exp(-x)))
        assert np.allclose(yhat, ref, atol=1e-12)
        assert np.allclose(yhat.sum(axis=1), 1.0)
        assert is_unimodal_batch(yhat).all()


def test_poisson_head():
    raw = np.array([np.log(np.expm1(2.0 - 1e-6))])          # rate exactly 2
    yhat = heads.poisson_head(raw, 5, tau=50.0).value
    # pmf(1) == pmf(2) at an integer rate: an exact tie
    assert yhat[0] == pytest.approx(yhat[1]) and yhat[0] == pytest.approx(0.5)
    raw23 = np.array([np.log(np.expm1(2.3 - 1e-6))])
    assert np.argmax(heads.poisson_head(raw23, 5, tau=50.0).value) + 1 == 2
    pmf = poisson.pmf(np.arange(1, 6), 2.0)
    assert np.allclose(heads.poisson_head(raw, 5, tau=1.0).value, pmf / pmf.sum())
    assert np.allclose(heads.poisson_head(raw, 5, tau=1e-9).value, 0.2, atol=1e-8)
    rng = np.random.default_rng(2)
    raw = rng.normal(scale=3.0, size=(10_000, 1))
    tau = np.exp(rng.normal(scale=2.0, size=(10_000, 1)))
    for K in (2, 5, 10):
        assert is_unimodal_batch(heads.poisson_head(raw, K, tau).value).all()
    with pytest.raises(ValueError):
        heads.poisson_head(raw, 5, tau=0.0)


def test_ordinal_encoding():
    assert heads.predict_label([1.0, 1.0, 0.0], "cumulative") == 3
    assert heads.predict_label([0.9, 0.6, 0.4], "cumulative") == 3
    p = heads.cumulative_to_distribution([0.9, 0.7, 0.2])
    assert np.allclose(p, [0.1, 0.2, 0.5, 0.2])
    q = heads.cumulative_to_distribution([0.4, 0.6, 0.1])
    assert np.all(q >= 0) and q.sum() == pytest.approx(1.0)
    assert np.allclose(q, np.array([0.6, 0.0, 0.5, 0.1]) / 1.2)
    cumulative, yhat = heads.ordinal_encoding_head(np.zeros(3))
    assert np.allclose(cumulative.value, 0.5)


def test_predict_label_ties():
    assert heads.predict_label([0.1, 0.7, 0.2]) == 2
    assert heads.predict_label([0.5, 0.5]) == 1


# ------------------------------------------------------------------ losses

def test_ce_examples():
    assert val(losses.ce_loss(2, np.array([0.0, 1.0, 0.0]))) == 0.0
    assert val(losses.ce_loss(3, np.full(4, 0.25))) == pytest.approx(np.log(4))
    assert val(losses.ce_loss(3, np.array([0.1, 0.2, 0.7]))) == pytest.approx(-np.log(0.7))


def test_u_term_examples():
    assert val(losses.u_term(0.0, 4, EX1)) == pytest.approx(3 / 6, abs=1e-15)
    assert val(losses.u_term(0.0, 4, EX2)) == pytest.approx(3 / 6, abs=1e-15)
    assert val(losses.u_term(0.0, 2, np.array([0.2, 0.5, 0.3]))) == 0.0


def test_uu_term_examples():
    assert val(losses.uu_term(0.0, 4, EX1)) == pytest.approx(8 / 6, abs=1e-15)
    assert val(losses.uu_term(0.0, 4, EX2)) == pytest.approx(9 / 6, abs=1e-15)
    assert val(losses.uu_term(0.0, 2, np.array([0.2, 0.5, 0.3]))) == 0.0


def test_co2_examples():
    y = np.array([0.1, 0.6, 0.3])
    assert val(losses.co2_loss(0.05, 0.0, 1, y)) == pytest.approx(val(losses.ce_loss(1, y)))
    # yhat[k*] = 1/6, so CE is -ln(1/6)
    assert val(losses.co2_loss(0.0, 1.0, 4, EX1)) == pytest.approx(-np.log(1 / 6) + 3 / 6)
    assert val(losses.co2_loss(0.0, 1.0, 2, np.array([0.0, 1.0, 0.0]))) == 0.0
    assert val(losses.co_loss(2.0, 4, EX1)) == pytest.approx(val(losses.co2_loss(0.0, 2.0, 4, EX1)))
    with pytest.raises(ValueError):
        losses.co2_loss(-1.0, 1.0, 1, y)


def test_wu_examples():
    y = np.array([0.1, 0.6, 0.3])
    ce = val(losses.ce_loss(2, y))
    assert val(losses.wu_loss(2, y, 1.0, "kldiv")) == ce
    assert val(losses.wu_loss(2, y, 1.0, "wasserstein")) == ce
    assert val(losses.wu_loss(1, y, 0.0, "kldiv")) == val(losses.ce_loss(1, y))
    # transport distance to the uniform projection
    total = val(losses.wu_loss(4, EX1, 1.0, "wasserstein"))
    assert total == pytest.approx(-np.log(1 / 6) + 0.5, abs=1e-9)
    kl = val(losses.wu_penalty(4, EX1, "kldiv"))
    expected = np.sum(0.25 * np.log(0.25 / np.maximum(EX1, 1e-12)))
    assert kl == pytest.approx(expected)


def test_wu_wass_rejects_other_costs():
    from unimodal_ordinal.transport import CostMatrix
    with pytest.raises(ValueError):
        losses.wu_penalty(1, EX1, "wasserstein", CostMatrix.power(4, 2.0))
    assert val(losses.wu_penalty(1, EX1, "kldiv", CostMatrix.power(4, 2.0))) > 0
    with pytest.raises(ValueError):
        losses.wu_penalty(1, EX1, "l2")


def test_cdw_ce_examples():
    assert val(losses.cdw_ce_loss(2, np.array([0.0, 1.0, 0.0]))) == 0.0
    assert val(losses.cdw_ce_loss(1, np.array([0.5, 0.5]))) == pytest.approx(np.log(2))
    near = val(losses.cdw_ce_loss(1, np.array([0.6, 0.3, 0.1])))
    far = val(losses.cdw_ce_loss(1, np.array([0.6, 0.1, 0.3])))
    assert far > near
    with pytest.raises(ValueError):
        losses.cdw_ce_loss(1, np.array([0.5, 0.5]), alpha=0)


def test_oe_loss_value():
    z = np.array([0.3, -1.2, 2.0])
    t = np.array([1.0, 1.0, 0.0])          # k* = 3 of 4
    s = 1 / (1 + np.exp(-z))
    expected = -(t * np.log(s) + (1 - t) * np.log(1 - s)).sum()
    assert val(losses.oe_loss(3, z)) == pytest.approx(expected)


def test_batch_matches_single_sample():
    rng = np.random.default_rng(3)
    Y = rng.dirichlet(np.ones(5), size=6)
    ks = rng.integers(1, 6, size=6)
    batch = losses.uu_loss(0.05, 1.0, ks, Y).value
    for i in range(6):
        assert batch[i] == pytest.approx(val(losses.uu_loss(0.05, 1.0, ks[i], Y[i])))


@settings(max_examples=300, deadline=None)
@given(simplex_vectors(2, 8), st.data())
def test_penalties_vanish_exactly_on_mode_unimodal(y, data):
    k = data.draw(st.integers(1, y.size))
    uni = is_unimodal_with_mode(y, k, tol=0.0)
    assert (val(losses.u_term(0.0, k, y)) == 0.0) == uni
    assert (val(losses.uu_term(0.0, k, y)) == 0.0) == uni
    assert val(losses.uu_term(0.0, k, y)) >= val(losses.u_term(0.0, k, y)) - 1e-15


@settings(max_examples=150, deadline=None)
@given(simplex_vectors(3, 7), st.data())
def test_wu_penalty_sign(y, data):
    k = data.draw(st.integers(1, y.size))
    for d2 in ("kldiv", "wasserstein"):
        pen = val(losses.wu_penalty(k, y, d2))
        assert pen >= -1e-12
        if is_unimodal_with_mode(y, k):
            assert pen == 0.0
        elif project_unimodal(y, k)[1] > 1e-9:
            assert pen > 0.0


@settings(max_examples=150, deadline=None)
@given(simplex_vectors(3, 7), st.data())
def test_losses_are_reversal_covariant(y, data):
    K = y.size
    k = data.draw(st.integers(1, K))
    rev = y[::-1].copy()
    kr = K + 1 - k
    pairs = [
        (lambda kk, v: losses.ce_loss(kk, v)),
        (lambda kk, v: losses.co2_loss(0.05, 1.0, kk, v)),
        (lambda kk, v: losses.uu_loss(0.05, 1.0, kk, v)),
        (lambda kk, v: losses.cdw_ce_loss(kk, v)),
        (lambda kk, v: losses.wu_loss(kk, v, 1.0, "wasserstein")),
    ]
    for fn in pairs:
        assert val(fn(k, y)) == pytest.approx(val(fn(kr, rev)), abs=1e-9)


def test_wu_kldiv_reversal_with_unique_projection():
    rng = np.random.default_rng(4)
    checked = 0
    for _ in range(200):
        K = int(rng.integers(3, 7))
        y = rng.dirichlet(np.ones(K))
        k = int(rng.integers(1, K + 1))
        p = project_unimodal(y, k)[0]
        pr = project_unimodal(y[::-1].copy(), K + 1 - k)[0]
        if not np.allclose(p, pr[::-1], atol=1e-9):
            continue            # tied optimal vertices: KL can legitimately differ
        a = val(losses.wu_loss(k, y, 1.0, "kldiv"))
        b = val(losses.wu_loss(K + 1 - k, y[::-1].copy(), 1.0, "kldiv"))
        assert a == pytest.approx(b, abs=1e-9)
        checked += 1
    assert checked > 100


# ---------------------------------------------------------------- registry

def test_registry_covers_every_method():
    K = 4
    rng = np.random.default_rng(5)
    ks = np.array([1, 2, 3, 4])
    for name in METHOD_NAMES:
        spec = LossSpec(name)
        params = ad.ParameterSet({"tau_raw": np.array([0.5])})
        z = ad.Node(rng.normal(size=(4, output_width(name, K))), requires_grad=True)
        out = forward_head(spec, z, K, params)
        loss = sample_losses(spec, out, ks)
        assert loss.shape == (4,) and np.all(np.isfinite(loss.value))
        pred = predict_from_output(out)
        assert pred.shape == (4,) and set(pred) <= {1, 2, 3, 4}
        assert np.allclose(out.distribution.sum(axis=1), 1.0)
        if name in ("un", "bu", "pu"):
            assert all(is_unimodal(row) for row in out.distribution)


def test_loss_spec_validation():
    with pytest.raises(ValueError):
        LossSpec("hinge")
    with pytest.raises(ValueError):
        LossSpec("co2", lam=-1)
    with pytest.raises(ValueError):
        LossSpec("pu", tau=0)
    assert LossSpec("co").with_lambda(10).lam == 10.0


@pytest.mark.parametrize("name", METHOD_NAMES)
def test_gradients_match_finite_differences(name):
    worst = max(gradient_check(name, K=5, n=4, seed=s) for s in range(10))
    assert worst < 1e-4


def test_gradient_variants():
    assert gradient_check(LossSpec("un", nonneg="softplus"), seed=1) < 1e-4
    assert gradient_check(LossSpec("pu", tau=2.0), seed=2) < 1e-4
    assert gradient_check(LossSpec("wu-kldiv", r=2.0), seed=3) < 1e-4
