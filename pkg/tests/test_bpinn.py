import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from empost.analytic import SeriesConfig
from empost.bnn import NetArchitecture, NetParams, PriorSpec, init_prior, log_prior
from empost.bpinn import (BpinnConfig, ContinuityDataset, Potential, assemble_junction, assemble_segment_fluxes,
                          boundary_stress, continuity_loss, fit, grad_potential, initial_gradients, junction_inputs,
                          junction_mismatch, junction_mismatch_samples, log_likelihood, make_dataset,
                          make_normalization, potential_energy, slot_coefficients)
from empost.core import InitialStressProfile, Junction, MaterialParams, drive_force
from empost.fixtures import tree_from_segments
from empost.hmc import HmcConfig
from empost.stochastic import CurrentVariationSpec, sample_currents

SMALL = NetArchitecture(hidden_widths=(8, 8))
LN2PI_HALF = 0.5 * math.log(2 * math.pi)


def _draws(tree, n, seed=3):
    return sample_currents(CurrentVariationSpec.for_tree(tree, n_samples=n, seed=seed))


def _cross_tree():
    # degree-4 junction X plus a two-slot junction Y
    rows = [("w", "T0", "X", "horizontal", 20, 1.0e9), ("e", "X", "Y", "horizontal", 15, 2.0e9),
            ("n", "X", "T2", "vertical", 25, -0.5e9), ("s", "T3", "X", "vertical", 10, 0.5e9),
            ("f", "Y", "T4", "horizontal", 30, 2.0e9)]
    return tree_from_segments(rows, initial_stress=None)


def _flat_tree(j=0.0, c=1e8):
    h = InitialStressProfile.constant(c)
    return tree_from_segments([("a", "T0", "J", "horizontal", 20, j), ("b", "J", "T1", "horizontal", 30, j)],
                              initial_stress={"a": h, "b": h})


class TestFluxAssembly:
    def test_four_slot_example(self):
        j = Junction("X", {"L": "a", "U": "b", "R": "c", "D": "d"})
        fa = assemble_junction(j, [1.0, 2.0, -0.5])
        assert fa.fluxes["L"] == 2.5
        assert fa.balance() == 0.0

    def test_two_slot_masking(self):
        j = Junction("X", {"L": "a", "R": "c"})
        fa = assemble_junction(j, [7.0, 1.5, -3.0])
        assert fa.fluxes["L"] == 1.5
        assert fa.fluxes["U"] == 0.0 and fa.fluxes["D"] == 0.0
        assert fa.balance() == 0.0

    def test_derived_slot_without_left(self):
        j = Junction("E", {"R": "p", "D": "q"})
        coeff = slot_coefficients(j)
        assert set(coeff) == {"R", "D"}
        fa = assemble_junction(j, [0.3, 0.8, -0.1])
        assert fa.fluxes["L"] == 0.0
        assert fa.balance() == pytest.approx(0.0, abs=1e-15)

    @given(st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=3),
           st.sets(st.sampled_from("LURD"), min_size=2))
    def test_balance_exact(self, raw, slots):
        j = Junction("X", {s: s.lower() for s in slots})
        assert assemble_junction(j, raw).balance() == 0.0

    def test_terminal_rejected(self):
        with pytest.raises(ValueError):
            slot_coefficients(Junction("T", {"L": "a"}, "blocked_terminal"))


class TestInputs:
    def test_masking_and_degree_four(self):
        tree = _cross_tree()
        x = junction_inputs(tree, "X", 2e7)
        assert x.shape == (5,)
        assert x[0] == pytest.approx(2.0)
        assert np.all(x[1:] != 0)
        y = junction_inputs(tree, "Y", [0.0, 1e8])
        assert y.shape == (2, 5)
        assert np.all(y[:, 2] == 0) and np.all(y[:, 4] == 0)
        with pytest.raises(ValueError):
            junction_inputs(tree, "T0", 0.0)

    def test_normalization(self, ten_tree):
        norm = make_normalization(ten_tree, _draws(ten_tree, 8), 1e8)
        x = junction_inputs(ten_tree, "B", 1e8, norm=norm)
        assert x[0] == pytest.approx(ten_tree.scaling.k_t * 1e8)
        assert np.max(np.abs(x[1:])) < 5


class TestInitialGradients:
    def test_blocked_terminal(self):
        tree = tree_from_segments([("a", "T0", "J", "horizontal", 20, 1e9), ("b", "J", "T1", "horizontal", 30, 1e9)])
        phi = initial_gradients(tree)
        assert phi[("a", "minus")] == pytest.approx(-4.009e12, rel=1e-3)
        assert phi[("a", "minus")] == -drive_force(1e9, MaterialParams())

    def test_void_end_absent(self, three_tree):
        phi = initial_gradients(three_tree)
        assert ("c", "plus") not in phi

    def test_interior_conservation(self, ten_tree):
        for cur in _draws(ten_tree, 5):
            phi = initial_gradients(ten_tree, cur)
            for j in ten_tree.interior_junctions:
                total = 0.0
                for slot in j.occupied:
                    s = ten_tree.segment(j.slots[slot])
                    end = "minus" if s.node_minus == j.id else "plus"
                    n = 1.0 if end == "minus" else -1.0
                    g = drive_force(cur[ten_tree.segment_index(s.id)], ten_tree.material)
                    total += n * (phi[(s.id, end)] + g)
                assert abs(total) < 1e-9 * 4e12


class TestLosses:
    def test_mismatch_example(self):
        assert junction_mismatch([[3.0, 1.0]]) == 2.0
        assert junction_mismatch([[2.0, 2.0, 2.0], [1.0, 1.0]]) == 0.0

    def test_log_likelihood(self):
        assert log_likelihood([0.5], [0.0], 1.0) == pytest.approx(-1.0439385, abs=5e-8)
        assert log_likelihood(np.zeros(4), 0.0, 0.5) == pytest.approx(4 * -0.5 * math.log(math.pi))
        with pytest.raises(ValueError):
            log_likelihood([0.0], [0.0], 0.0)

    def test_dataset_checks(self):
        with pytest.raises(ValueError):
            ContinuityDataset([0.0, 1.0], [[1.0]], 0.0, 1.0)
        with pytest.raises(ValueError):
            ContinuityDataset([1.0], [[1.0]], 0.0, -1.0)


class TestStationaryFixture:
    """Zero currents, uniform h and theta = 0: every boundary stress equals h, so the loss vanishes."""

    def setup_method(self):
        self.tree = _flat_tree()
        self.arch = NetArchitecture(hidden_widths=(3,))
        self.prior = PriorSpec((1.0, 1.0), (1.0, 1.0))
        self.cfg = BpinnConfig(arch=self.arch, prior=self.prior, var_l=1.0, n_eval_times=1, n_train_draws=1)
        self.data = make_dataset(self.tree, self.cfg, self.tree.currents[None, :])
        self.zero = NetParams.from_flat(self.arch, np.zeros(self.arch.n_params))

    def test_zero_loss(self):
        assert np.all(continuity_loss(self.tree, self.zero, self.data, self.cfg) == 0.0)

    def test_energy_is_sum_of_closed_forms(self):
        u = potential_energy(self.tree, self.zero, self.data, self.prior, self.cfg)
        # likelihood peak plus one N(0, 1) log density per parameter
        assert u == pytest.approx(LN2PI_HALF * (1 + self.arch.n_params), rel=1e-14)
        # with a single parameter this is 0.5 ln(2 pi) + 0.5 ln(2 pi)
        assert 2 * LN2PI_HALF == pytest.approx(1.8378771, abs=5e-8)

    def test_gradient_vanishes(self):
        g = grad_potential(self.tree, self.zero, self.data, self.prior, self.cfg).flat()
        assert np.linalg.norm(g) < 1e-8

    def test_flat_likelihood_leaves_prior_gradient(self, three_tree):
        arch = SMALL
        prior = PriorSpec.default(arch)
        cfg = BpinnConfig(arch=arch, var_l=1e300, n_eval_times=4)
        data = make_dataset(three_tree, cfg, _draws(three_tree, 2))
        p = init_prior(arch, prior, 5)
        g = grad_potential(three_tree, p, data, prior, cfg).flat()
        assert np.allclose(g, p.flat() / prior.flat_variances(arch), rtol=1e-9, atol=1e-12)


class TestPotential:
    @pytest.fixture
    def setup(self, three_tree):
        cfg = BpinnConfig(arch=SMALL, var_l=1e-2, n_eval_times=5)
        draws = _draws(three_tree, 3)
        pot = Potential(three_tree, make_dataset(three_tree, cfg, draws), cfg)
        return three_tree, cfg, draws, pot

    def test_affine_map_matches_direct_solve(self, setup):
        tree, cfg, draws, pot = setup
        theta = init_prior(SMALL, cfg.prior_spec, 1).flat()
        b = pot.boundary(theta)
        params = NetParams.from_flat(SMALL, theta)
        for d in range(len(draws)):
            fluxes = assemble_segment_fluxes(tree, params, draws[d], pot.norm)
            for a, e in enumerate(pot.ends):
                sid = tree.segments[e.segment].id
                direct = boundary_stress(tree, fluxes, sid, e.end, pot.dataset.times, cfg.series, draws[d])
                assert np.allclose(b[d, a], direct * tree.scaling.k_sigma, rtol=1e-10, atol=1e-12)

    def test_energy_and_call_agree(self, setup):
        _, cfg, _, pot = setup
        theta = init_prior(SMALL, cfg.prior_spec, 2).flat()
        assert pot(theta)[0] == pytest.approx(pot.energy(theta), rel=1e-12)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_gradient_finite_differences(self, setup, seed):
        _, cfg, _, pot = setup
        theta = init_prior(SMALL, cfg.prior_spec, seed).flat()
        g = pot.gradient(theta)
        h = 1e-6
        fd = np.array([(pot.energy(theta + h * e) - pot.energy(theta - h * e)) / (2 * h)
                       for e in np.eye(theta.size)])
        assert np.linalg.norm(fd - g) / np.linalg.norm(g) < 1e-5

    def test_rates_balance_at_every_junction(self, setup):
        tree, cfg, draws, pot = setup
        theta = init_prior(SMALL, cfg.prior_spec, 3).flat()
        rates = pot.rates(theta)
        n = np.array([1.0 if e.end == "minus" else -1.0 for e in pot.ends])
        for ji in range(len(tree.interior_junctions)):
            members = pot.gather == ji
            total = np.einsum("e,dekq->dkq", n[members], rates[:, members])
            assert np.max(np.abs(total)) <= 1e-12 * np.max(np.abs(rates))

    def test_void_end_stress_is_zero(self, three_tree):
        p = init_prior(SMALL, PriorSpec.default(SMALL), 0)
        fluxes = assemble_segment_fluxes(three_tree, p)
        s = boundary_stress(three_tree, fluxes, "c", "plus", [1e6, 5e7, 1e8])
        assert np.max(np.abs(s)) < 1e-6

    def test_constant_h_zero_flux(self):
        tree = _flat_tree(c=3e7)
        zero = NetParams.from_flat(SMALL, np.zeros(SMALL.n_params))
        s = boundary_stress(tree, assemble_segment_fluxes(tree, zero), "a", "plus", [1e7, 1e8])
        assert np.allclose(s, 3e7, rtol=1e-12)


def test_fit_reduces_mismatch(three_tree):
    cfg = BpinnConfig(arch=NetArchitecture(hidden_widths=(6,)), var_l=1e-8, n_eval_times=6, n_train_draws=4,
                      map_iterations=150, series=SeriesConfig(quad_order=6))
    draws = _draws(three_tree, 4)
    theta0 = init_prior(cfg.arch, cfg.prior_spec, 0).flat()
    result = fit(three_tree, draws, cfg, HmcConfig(step_size=1e-4, leapfrog_steps=3, n_samples=5, burn_in=10,
                                                   tune_window=5), seed=0)
    before = junction_mismatch_samples(three_tree, theta0[None], draws, cfg, result.norm).max()
    after = junction_mismatch_samples(three_tree, result.params_map.flat()[None], draws, cfg, result.norm).max()
    assert after < 0.2 * before
    assert len(result.samples()) == 5
    assert result.chain.samples.shape == (5, cfg.arch.n_params)


def test_config_validation():
    with pytest.raises(ValueError):
        BpinnConfig(var_l=0.0)
    with pytest.raises(ValueError):
        BpinnConfig(arch=NetArchitecture(input_dim=4))
    with pytest.raises(ValueError):
        BpinnConfig(prior=PriorSpec((1.0,), (1.0,)))


def test_no_interior_junction(voidless_tree):
    cfg = BpinnConfig(arch=SMALL)
    with pytest.raises(ValueError):
        Potential(voidless_tree, make_dataset(voidless_tree, cfg, voidless_tree.currents[None]), cfg)


def test_log_prior_consistency():
    p = init_prior(SMALL, PriorSpec.default(SMALL), 0)
    assert log_prior(p, PriorSpec.default(SMALL)) < 0
