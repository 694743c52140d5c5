import math

import numpy as np
import pytest
from scipy.special import gamma

from currentlab.currents import CurrentEnsemble
from currentlab.exact import ExactGibbs, ThermoParams
from currentlab.graphs import build_decorated, single_edge
from currentlab.gs_blocks import (
    BlockParams,
    TargetMeasure,
    TuningError,
    block_moments,
    block_pmf,
    target_moments,
    tune,
)


def test_block_pmf_n1():
    pmf = block_pmf(BlockParams(1, 0.7, 0.0))
    assert sorted(v for v, _ in pmf) == pytest.approx([-0.7, 0.7])
    assert all(p == pytest.approx(0.5) for _, p in pmf)


def test_block_pmf_n2_free():
    pmf = sorted(block_pmf(BlockParams(2, 1.0, 0.0)))
    vals = [v for v, _ in pmf]
    probs = [p for _, p in pmf]
    assert vals == pytest.approx([-math.sqrt(2), 0.0, math.sqrt(2)])
    assert probs == pytest.approx([0.25, 0.5, 0.25])


def test_block_pmf_n2_coupled_ratio():
    pmf = sorted(block_pmf(BlockParams(2, 1.0, 1.0)))
    ratio = (pmf[0][1] + pmf[2][1]) / pmf[1][1]
    assert ratio == pytest.approx(math.exp(2.0), rel=1e-12)


def test_block_pmf_normalized_and_symmetric(rng):
    for _ in range(8):
        n = int(rng.integers(1, 3000))
        params = BlockParams(n, float(rng.uniform(0.1, 3)), float(rng.uniform(0, 2)))
        pmf = block_pmf(params)
        probs = np.array([p for _, p in pmf])
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(probs, probs[::-1], atol=1e-13)


def test_target_moments_quartic():
    tm = target_moments(TargetMeasure(1.0, 0.0), 4)
    assert tm[1] == pytest.approx(gamma(0.75) / gamma(0.25), rel=1e-10)
    assert tm[3] == pytest.approx(0.25, rel=1e-10)
    assert tm[0] == 0.0 and tm[2] == 0.0


def test_target_moments_gaussian():
    tm = target_moments(TargetMeasure(0.0, -0.5), 4)
    assert tm[1] == pytest.approx(1.0, rel=1e-10)
    assert tm[3] == pytest.approx(3.0, rel=1e-10)


def test_target_validation():
    with pytest.raises(ValueError):
        TargetMeasure(0.0, 0.5)
    with pytest.raises(ValueError):
        TargetMeasure(-1.0, 0.0)


def test_tune_matches_low_moments():
    target = TargetMeasure(1.0, 0.0)
    params, residual = tune(1024, target)
    assert residual <= 1e-6
    tm = target_moments(target, 4)
    got = block_moments(params, (2, 4))
    assert got[2] == pytest.approx(tm[1], rel=1e-9)
    assert got[4] == pytest.approx(tm[3], rel=1e-9)


def test_tuned_g_approaches_mean_field_critical_point():
    # the block weight exp((g/N) S^2) has its mean-field transition at 1/2;
    # tuned g climbs monotonically toward it as N grows
    target = TargetMeasure(1.0, 0.0)
    gs = [tune(n, target)[0].g for n in (64, 256, 1024)]
    assert gs[0] < gs[1] < gs[2] < 0.5
    assert abs(gs[2] - 0.5) < abs(gs[0] - 0.5)


def test_sixth_moment_error_shrinks():
    target = TargetMeasure(1.0, 0.0)
    m6 = target_moments(target, 6)[5]
    errs = [abs(block_moments(tune(n, target)[0], (6,))[6] - m6)
            for n in (64, 256, 1024, 4096)]
    assert errs[-1] < errs[0]
    assert all(errs[i + 1] < errs[i] for i in range(len(errs) - 1))


def test_tune_n1_fails():
    with pytest.raises(TuningError):
        tune(1, TargetMeasure(1.0, 0.0))


def test_linearity_bridge_on_decorated_graph():
    """Block-field correlation from constituent spin sums agrees between the
    spin oracle and the current representation."""
    base = single_edge(0.9)
    n = 2
    alpha = 1.1
    dec = build_decorated(base, N=n, alpha=alpha, g=0.8)
    beta = 0.65
    gibbs = ExactGibbs(dec, ThermoParams(beta))
    ens = CurrentEnsemble(dec, beta)
    scale = alpha**2 / n
    spin_sum = sum(gibbs.correlation((i, j))
                   for i in dec.blocks[0] for j in dec.blocks[1])
    current_sum = sum(ens.correlation((i, j))
                      for i in dec.blocks[0] for j in dec.blocks[1])
    assert scale * spin_sum == pytest.approx(scale * current_sum, rel=1e-10)
