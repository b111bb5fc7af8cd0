import math

import numpy as np
import pytest

from hdprior import numerics, total_priors as tp, tree as tr
from hdprior.errors import CalibrationError, ImproperPriorError, ValidationError
from hdprior.numerics import RandomSource


class TestPCSD:
    def test_weakly_informative_default(self):
        assert tp.calibrate_pc_sd(3.0, 0.05) == pytest.approx(0.9985774245179969, abs=1e-10)

    def test_unit(self):
        assert tp.calibrate_pc_sd(1.0, math.exp(-1.0)) == pytest.approx(1.0, abs=1e-12)

    def test_tail_by_quadrature(self):
        lam = tp.calibrate_pc_sd(3.0, 0.05)
        mass = numerics.integrate(lambda s: lam * math.exp(-lam * s), 3.0, math.inf, 1e-12)
        assert mass == pytest.approx(0.05, abs=1e-10)


class TestTotalDensity:
    def test_density_value(self):
        assert tp.pc_total_density(1.0, 1.0) == pytest.approx(0.5 * math.exp(-1.0), abs=1e-15)

    def test_tail(self):
        lam = tp.calibrate_total_from_tail(9.0, 0.05)
        assert lam * 3.0 == pytest.approx(-math.log(0.05), abs=1e-12)
        assert tp.pc_total_tail(9.0, 0.99858) == pytest.approx(math.exp(-2.99574), abs=1e-4)

    def test_normalizes(self):
        lam = 1.7296
        mass = numerics.integrate(
            lambda s: lam * math.exp(-lam * s), 0.0, math.inf, 1e-11
        )
        assert mass == pytest.approx(1.0, abs=1e-9)

    def test_change_of_variables_vs_exponential(self):
        lam = 0.7
        for t in (0.04, 1.0, 6.25):
            s = math.sqrt(t)
            exp_on_sd = lam * math.exp(-lam * s)
            jac = 1.0 / (2.0 * s)
            assert tp.pc_total_density(t, lam) == pytest.approx(exp_on_sd * jac, abs=1e-12)

    def test_calibrations(self):
        assert tp.calibrate_total_from_tail(3.0, 0.05) == pytest.approx(1.7295868345564462, abs=1e-10)
        assert tp.calibrate_total_from_tail(11.296, 0.05) == pytest.approx(0.8913343761742126, abs=1e-10)
        assert tp.calibrate_total_from_tail(1.0, math.exp(-1.0)) == pytest.approx(1.0, abs=1e-12)


class TestOddsCalibration:
    def test_symmetric_interval_reproduces_reference_bound(self):
        cal = tp.OddsCalibration(lower=0.1, upper=10.0, prob=0.90)
        rate, upper = tp.calibrate_total_from_odds(cal, alpha=0.05)
        # frozen from an independent high-accuracy quadrature/root run
        assert rate == pytest.approx(0.8907206107449883, abs=1e-6)
        assert upper == pytest.approx(11.311572746123028, rel=1e-6)
        assert abs(upper - 11.296) / 11.296 < 0.01

    def test_half_to_double_odds(self):
        cal = tp.OddsCalibration(lower=0.5, upper=2.0, prob=0.90)
        rate, _ = tp.calibrate_total_from_odds(cal)
        assert rate == pytest.approx(2.958909821528592, abs=1e-6)

    def test_interval_mass_recovers_prob(self):
        cal = tp.OddsCalibration(lower=0.1, upper=10.0, prob=0.90)
        rate, _ = tp.calibrate_total_from_odds(cal)
        # Monte Carlo cross-check of the marginal statement
        rng = RandomSource(12)
        t = tp.sample_total(tp.TotalVariancePrior(kind="pc_total", rate=rate), rng, 200_000)
        x = np.sqrt(t) * np.random.default_rng(3).standard_normal(t.size)
        inside = ((np.exp(x) > 0.1) & (np.exp(x) < 10.0)).mean()
        assert inside == pytest.approx(0.90, abs=0.005)

    def test_probability_near_one_fails(self):
        with pytest.raises(CalibrationError, match="close to 1"):
            tp.OddsCalibration(lower=0.1, upper=10.0, prob=1.0 - 1e-12)

    def test_asymmetric_rejected(self):
        with pytest.raises(ValidationError, match="lower != 1/upper|asymmetric"):
            tp.OddsCalibration(lower=0.2, upper=10.0, prob=0.9)


class TestJeffreysAugmentation:
    def latent(self):
        return tr.tree_from_nested(
            {
                "children": [{"leaf": "a"}, {"leaf": "b"}],
                "base": [0, 1],
                "prior": tr.SplitPriorSpec(kind="pc", median=0.25),
            }
        )

    def test_structure(self):
        out = tp.jeffreys_augment(self.latent(), "resid")
        assert out.effects == ("a", "b", "resid")
        assert out.splits[0].children == (("a", "b"), ("resid",))
        assert out.splits[0].base == (0.0, 1.0)
        tr.validate(out)

    def test_latent_splits_untouched(self):
        latent = self.latent()
        out = tp.jeffreys_augment(latent, "resid")
        inner = out.splits[1]
        assert inner.children == latent.splits[0].children
        assert inner.base == latent.splits[0].base
        assert inner.prior == latent.splits[0].prior

    def test_residual_name_collision(self):
        with pytest.raises(ValidationError):
            tp.jeffreys_augment(self.latent(), "a")

    def test_scale_invariance_of_log_density(self):
        prior = tp.TotalVariancePrior(kind="jeffreys_gaussian")
        for c in (2.0, 10.0, 0.3):
            delta = tp.log_density_total(prior, c * 1.7) - tp.log_density_total(prior, 1.7)
            assert delta == pytest.approx(-math.log(c), abs=1e-12)

    def test_sampling_improper_raises(self):
        prior = tp.TotalVariancePrior(kind="jeffreys_gaussian")
        with pytest.raises(ImproperPriorError):
            tp.sample_total(prior, RandomSource(0), 4)
