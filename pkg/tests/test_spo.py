import numpy as np
import pytest

from dfolio.solvers import (
    MAX_RETURN,
    MAX_RETURN_FEE,
    MAX_RETURN_FEE_L2,
    DecisionProblem,
    Portfolio,
)
from dfolio.spo import (
    RobustConfig,
    SpoInstance,
    perturbation_set,
    robust_spo_batch,
    robust_spo_loss,
    spo_plus,
    spo_plus_batch,
)

from oracles import grid_regret


def random_problem(rng, n, kind):
    if kind == MAX_RETURN:
        return DecisionProblem()
    p = Portfolio(rng.dirichlet(np.ones(n)))
    if kind == MAX_RETURN_FEE:
        return DecisionProblem(kind=kind, gamma=float(rng.uniform(0, 0.05)), w_prev=p)
    return DecisionProblem(
        kind=kind, gamma=float(rng.uniform(0, 0.05)), lam=float(rng.uniform(0.01, 1.0)), w_prev=p
    )


ALL_KINDS = (MAX_RETURN, MAX_RETURN_FEE, MAX_RETURN_FEE_L2)


class TestSpoPlus:
    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_perfect_prediction_zero_loss(self, kind):
        rng = np.random.default_rng(0)
        for _ in range(20):
            n = int(rng.integers(2, 6))
            prob = random_problem(rng, n, kind)
            r = rng.normal(0, 0.05, n)
            ev = spo_plus(SpoInstance(r, r, prob))
            assert abs(ev.loss) <= 1e-9
            np.testing.assert_allclose(ev.subgradient, 0.0, atol=1e-9)
            assert abs(ev.regret) <= 1e-9

    def test_hand_vertex_example(self):
        # r = (0.1, 0), r_hat = (-0.1, 0.05): w* = e1, shifted = (-0.3, 0.1),
        # w~ = e2, loss = 0.1 + 0.2 + 0.1 = 0.4, subgradient (-2, 2), regret 0.1
        ev = spo_plus(SpoInstance(np.array([-0.1, 0.05]), np.array([0.1, 0.0]), DecisionProblem()))
        assert ev.loss == pytest.approx(0.4, abs=1e-12)
        np.testing.assert_allclose(ev.subgradient, [-2.0, 2.0], atol=1e-12)
        np.testing.assert_allclose(ev.w_star.weights, [1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(ev.w_tilde.weights, [0.0, 1.0], atol=1e-12)
        assert ev.regret == pytest.approx(0.1, abs=1e-12)
        assert ev.loss >= ev.regret

    def test_huge_fee_pins_to_prior(self):
        rng = np.random.default_rng(1)
        p = Portfolio(np.array([0.25, 0.35, 0.40]))
        prob = DecisionProblem(kind=MAX_RETURN_FEE, gamma=50.0, w_prev=p)
        r = rng.normal(0, 0.05, 3)
        for _ in range(5):
            r_hat = rng.normal(0, 0.5, 3)
            ev = spo_plus(SpoInstance(r_hat, r, prob))
            np.testing.assert_allclose(ev.w_star.weights, p.weights, atol=1e-9)
            np.testing.assert_allclose(ev.w_tilde.weights, p.weights, atol=1e-9)
            assert abs(ev.loss) <= 1e-9

    def test_subgradient_is_two_w_diff(self):
        rng = np.random.default_rng(2)
        for kind in ALL_KINDS:
            n = 4
            prob = random_problem(rng, n, kind)
            ev = spo_plus(SpoInstance(rng.normal(0, 0.05, n), rng.normal(0, 0.05, n), prob))
            np.testing.assert_allclose(
                ev.subgradient, 2.0 * (ev.w_tilde.weights - ev.w_star.weights), atol=1e-9
            )

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_upper_bound_vs_grid_oracle(self, kind):
        rng = np.random.default_rng(3)
        for _ in range(30):
            n = int(rng.integers(2, 4)) if kind != MAX_RETURN else int(rng.integers(2, 8))
            prob = random_problem(rng, n, kind)
            r_hat = rng.normal(0, 0.05, n)
            r = rng.normal(0, 0.05, n)
            ev = spo_plus(SpoInstance(r_hat, r, prob))
            refine = kind == MAX_RETURN_FEE_L2
            oracle_regret = grid_regret(r_hat, r, prob, refine=refine)
            assert oracle_regret >= -1e-9
            assert ev.loss >= oracle_regret - 1e-9
            assert ev.loss >= ev.regret - 1e-9
            assert ev.regret >= -1e-9

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_convexity_in_predictions(self, kind):
        rng = np.random.default_rng(4)
        for _ in range(25):
            n = int(rng.integers(2, 6))
            prob = random_problem(rng, n, kind)
            r = rng.normal(0, 0.05, n)
            a = rng.normal(0, 0.08, n)
            b = rng.normal(0, 0.08, n)
            la = spo_plus(SpoInstance(a, r, prob)).loss
            lb = spo_plus(SpoInstance(b, r, prob)).loss
            for t in (0.25, 0.5, 0.75):
                mid = spo_plus(SpoInstance(t * a + (1 - t) * b, r, prob)).loss
                assert mid <= t * la + (1 - t) * lb + 1e-9

    def test_subgradient_finite_differences(self):
        rng = np.random.default_rng(5)
        checked = 0
        while checked < 40:
            n = int(rng.integers(2, 6))
            kind = (MAX_RETURN, MAX_RETURN_FEE_L2)[checked % 2]
            prob = random_problem(rng, n, kind)
            r_hat = rng.normal(0, 0.05, n)
            r = rng.normal(0, 0.05, n)
            if kind == MAX_RETURN:
                shifted = np.sort(2 * r_hat - r)
                if shifted[-1] - shifted[-2] < 1e-3:
                    continue
            ev = spo_plus(SpoInstance(r_hat, r, prob))
            h = 1e-6
            for _ in range(5):
                u = rng.normal(size=n)
                u /= np.linalg.norm(u)
                lp = spo_plus(SpoInstance(r_hat + h * u, r, prob)).loss
                lm = spo_plus(SpoInstance(r_hat - h * u, r, prob)).loss
                fd = (lp - lm) / (2 * h)
                analytic = float(ev.subgradient @ u)
                denom = max(abs(fd), abs(analytic), 1e-8)
                assert abs(fd - analytic) / denom <= 1e-5
            checked += 1

    def test_batch_matches_scalar_path(self):
        rng = np.random.default_rng(6)
        for kind in ALL_KINDS:
            n = 5
            prob = random_problem(rng, n, kind)
            r_hat = rng.normal(0, 0.05, (8, n))
            r = rng.normal(0, 0.05, (8, n))
            losses, grads, _, _ = spo_plus_batch(r_hat, r, prob)
            for i in range(8):
                ev = spo_plus(SpoInstance(r_hat[i], r[i], prob))
                assert losses[i] == pytest.approx(ev.loss, abs=1e-9)
                np.testing.assert_allclose(grads[i], ev.subgradient, atol=1e-9)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            SpoInstance(np.zeros(2), np.zeros(3), DecisionProblem())
        with pytest.raises(ValueError):
            SpoInstance(
                np.zeros(3),
                np.zeros(3),
                DecisionProblem(kind=MAX_RETURN_FEE, gamma=0.1, w_prev=Portfolio.uniform(2)),
            )


class TestRobust:
    def test_tiny_radius_matches_plain(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            n = int(rng.integers(2, 5))
            inst = SpoInstance(rng.normal(0, 0.05, n), rng.normal(0, 0.05, n), DecisionProblem())
            base = spo_plus(inst)
            ev, zeta = robust_spo_loss(inst, RobustConfig(rho=1e-12, n_samples=4, seed=0))
            assert ev.loss == pytest.approx(base.loss, abs=1e-9)

    def test_deterministic(self):
        rng = np.random.default_rng(8)
        inst = SpoInstance(rng.normal(0, 0.05, 4), rng.normal(0, 0.05, 4), DecisionProblem())
        cfg = RobustConfig(rho=0.1, n_samples=1, seed=42)
        ev1, z1 = robust_spo_loss(inst, cfg)
        ev2, z2 = robust_spo_loss(inst, cfg)
        assert ev1.loss == ev2.loss
        np.testing.assert_array_equal(z1, z2)

    def test_worst_sample_by_enumeration(self):
        rng = np.random.default_rng(9)
        inst = SpoInstance(rng.normal(0, 0.05, 3), rng.normal(0, 0.05, 3), DecisionProblem())
        cfg = RobustConfig(rho=0.1, n_samples=6, seed=7)
        ev, zeta = robust_spo_loss(inst, cfg)
        zetas = perturbation_set(cfg.rho, 3, cfg)
        losses = [
            spo_plus(SpoInstance(inst.r_hat * (1 + z), inst.r_true, inst.problem)).loss
            for z in zetas
        ]
        assert ev.loss == pytest.approx(max(losses), abs=1e-12)
        np.testing.assert_array_equal(zeta, zetas[int(np.argmax(losses))])

    def test_worst_is_at_least_unperturbed_and_nonneg(self):
        rng = np.random.default_rng(10)
        for _ in range(10):
            n = int(rng.integers(2, 5))
            r = rng.normal(0, 0.05, n)
            inst = SpoInstance(r, r, DecisionProblem())
            ev, _ = robust_spo_loss(inst, RobustConfig(rho=0.1, n_samples=4, seed=1))
            assert ev.loss >= -1e-12

    def test_monotone_in_rho(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            n = int(rng.integers(2, 5))
            inst = SpoInstance(
                rng.normal(0, 0.05, n), rng.normal(0, 0.05, n), DecisionProblem()
            )
            losses = []
            for rho in (0.01, 0.05, 0.1, 0.2, 0.4):
                cfg = RobustConfig(rho=rho, n_samples=8, include_corners=True, seed=3)
                ev, _ = robust_spo_loss(inst, cfg)
                losses.append(ev.loss)
            assert all(a <= b + 1e-9 for a, b in zip(losses, losses[1:]))

    def test_nested_sampling(self):
        cfg1 = RobustConfig(rho=0.05, n_samples=6, include_corners=False, seed=5)
        cfg2 = RobustConfig(rho=0.2, n_samples=6, include_corners=False, seed=5)
        z1 = perturbation_set(cfg1.rho, 4, cfg1)
        z2 = perturbation_set(cfg2.rho, 4, cfg2)
        np.testing.assert_allclose(z1 / 0.05, z2 / 0.2, atol=1e-12)

    def test_corner_cap(self):
        for n in (1, 2, 5):
            cfg = RobustConfig(rho=0.1, n_samples=3, include_corners=True, seed=0)
            zetas = perturbation_set(cfg.rho, n, cfg)
            assert zetas.shape == (3 + max(2, 2 * n), n)
            assert np.all(np.abs(zetas) <= 0.1 + 1e-15)

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(12)
        prob = DecisionProblem()
        cfg = RobustConfig(rho=0.1, n_samples=5, seed=9)
        r_hat = rng.normal(0, 0.05, (6, 4))
        r = rng.normal(0, 0.05, (6, 4))
        zetas = perturbation_set(cfg.rho, 4, cfg)
        losses, grads = robust_spo_batch(r_hat, r, prob, zetas)
        for i in range(6):
            per = [
                spo_plus(SpoInstance(r_hat[i] * (1 + z), r[i], prob)) for z in zetas
            ]
            k = int(np.argmax([e.loss for e in per]))
            assert losses[i] == pytest.approx(per[k].loss, abs=1e-9)
            np.testing.assert_allclose(
                grads[i], per[k].subgradient * (1 + zetas[k]), atol=1e-9
            )

    def test_config_validation(self):
        with pytest.raises(ValueError):
            RobustConfig(rho=0.0)
        with pytest.raises(ValueError):
            RobustConfig(rho=0.1, n_samples=0)
