import numpy as np
import pytest

from hmm_frontier import (
    ConstraintBox,
    NoMemberError,
    SearchConfig,
    canonicalize,
    estimate_theta,
    losses,
    min_distance_fit,
    moment_init,
    sample_path,
    sample_phipsi,
    switch_labels,
    theta_to_phipsi,
    triple_law_phipsi,
    validate_phipsi,
)
from hmm_frontier.triple_law import TripleLaw

from test_params import worked_box, worked_theta

FAST = SearchConfig(random_starts=1, grid_points=5)


def worked_pp():
    return theta_to_phipsi(worked_theta())


class TestMomentInit:
    def test_exact_recovery(self):
        pp = worked_pp()
        init, fallback = moment_init(triple_law_phipsi(pp), worked_box())
        assert not fallback
        init = canonicalize(init)
        rec = losses(init, pp)
        assert max(rec.phi1, rec.phi2, rec.phi3, rec.psi1, rec.psi2) <= 1e-6

    def test_iid_tensor_falls_back(self):
        psi1 = np.array([0.38, 0.30, 0.32])
        t = TripleLaw(probs=np.einsum("a,b,c->abc", psi1, psi1, psi1))
        init, fallback = moment_init(t, worked_box())
        assert fallback
        assert validate_phipsi(init, worked_box()).all_pass

    def test_marginal_is_psi1(self):
        pp = worked_pp()
        t = triple_law_phipsi(pp)
        init, _ = moment_init(t, worked_box())
        np.testing.assert_allclose(
            t.probs.sum(axis=(1, 2)), init.psi1 * t.total_mass, atol=1e-10
        )


class TestMinDistanceFit:
    def test_noiseless_recovery(self):
        pp = worked_pp()
        fit = min_distance_fit(triple_law_phipsi(pp), worked_box(), FAST)
        rec = losses(fit.estimate, pp)
        assert max(rec.phi1, rec.phi2, rec.phi3, rec.psi1, rec.psi2) <= 1e-3
        assert fit.objective <= 1e-6

    def test_label_switched_input_same_estimate(self):
        pp = worked_pp()
        fit_a = min_distance_fit(triple_law_phipsi(pp), worked_box(), FAST)
        fit_b = min_distance_fit(
            triple_law_phipsi(switch_labels(pp)), worked_box(), FAST
        )
        assert fit_a.estimate.phi1 == pytest.approx(fit_b.estimate.phi1, abs=1e-6)
        np.testing.assert_allclose(fit_a.estimate.psi2, fit_b.estimate.psi2, atol=1e-6)

    def test_estimate_is_canonical_and_feasible(self):
        pp = worked_pp()
        fit = min_distance_fit(triple_law_phipsi(pp), worked_box(), FAST)
        canon = canonicalize(fit.estimate)
        assert canon.phi1 == fit.estimate.phi1
        assert validate_phipsi(fit.estimate, worked_box()).all_pass

    def test_near_minimality_diagnostic(self):
        pp = worked_pp()
        fit = min_distance_fit(triple_law_phipsi(pp), worked_box(), FAST)
        assert fit.converged
        assert fit.objective <= 2 * fit.grid_floor + 1e-9

    def test_noiseless_consistency_random_truths(self):
        box = worked_box()
        for i in range(5):
            truth = sample_phipsi(box, [321, i])
            fit = min_distance_fit(triple_law_phipsi(truth), box, FAST)
            rec = losses(fit.estimate, truth)
            assert max(rec.phi1, rec.phi2, rec.phi3, rec.psi1, rec.psi2) <= 1e-3

    def test_empty_box(self):
        bad = ConstraintBox(delta=0.4, epsilon=0.5, zeta=0.1, L=0.3, K=3)
        with pytest.raises(NoMemberError):
            min_distance_fit(triple_law_phipsi(worked_pp()), bad, FAST)


class TestEstimateTheta:
    def test_sampled_pipeline(self):
        th = worked_theta()
        y = sample_path(th, 20000, 77).observed
        est, fit = estimate_theta(y, worked_box(), FAST)
        assert fit.converged
        rec = losses(fit.estimate, worked_pp())
        assert rec.pq < 0.3
        assert rec.psi1 < 0.1

    def test_constant_sequence_handled(self):
        est, fit = estimate_theta(np.ones(100, dtype=int), worked_box(), FAST)
        assert validate_phipsi(fit.estimate, worked_box()).all_pass
        assert isinstance(fit.converged, bool)


class TestLosses:
    def test_zero_on_truth(self):
        pp = worked_pp()
        rec = losses(pp, pp)
        assert rec.phi1 == 0.0
        assert rec.phi2 == 0.0
        assert rec.psi2 == 0.0
        assert rec.pq == 0.0
        assert rec.f == 0.0

    def test_zero_on_switched(self):
        pp = worked_pp()
        rec = losses(switch_labels(pp), pp)
        assert rec.phi1 == 0.0
        assert rec.psi2 <= 1e-15
        assert rec.pq <= 1e-15
        assert rec.f <= 1e-15

    def test_phi1_sign_flip_only(self):
        pp = worked_pp()
        flipped = switch_labels(pp)
        rec = losses(flipped, pp)
        assert rec.phi1 == 0.0
        assert rec.phi2 == 0.0

    def test_relative_losses_not_applicable_on_zero(self):
        pp = worked_pp()
        th = worked_theta()
        other = theta_to_phipsi(
            type(th)(p=0.5, q=0.5, f0=th.f0, f1=th.f1)
        )  # phi2 = 0
        rec = losses(pp, other)
        assert rec.rel_phi2 is None
