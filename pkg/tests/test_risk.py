import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskforge.errors import ConfigError, DataError
from riskforge.metrics import APPROVE, REJECT, REVIEW, business_metrics
from riskforge.risk import (
    ApplicantAssessment,
    Band,
    BandRule,
    RiskConfig,
    amortized_payment,
    assess,
    band_for,
    portfolio_impact,
)

CFG = RiskConfig()


def present_value(payment: float, annual_rate_pct: float, n: int) -> float:
    """Oracle: discount the constant payment stream back to time zero."""
    r = annual_rate_pct / 100.0 / 12.0
    if (1.0 + r) ** n == 1.0:  # rate zero or lost to float rounding
        return payment * n
    return payment * (1 - (1 + r) ** (-n)) / r


class TestBands:
    def test_low_band_approves_at_base_rate(self):
        a = assess(0.05, 10_000.0, 12, CFG)
        assert a.band is Band.LOW
        assert a.decision == APPROVE
        assert a.annual_rate == 8.0

    def test_low_threshold_boundary_is_moderate(self):
        assert band_for(CFG.t_low, CFG) is Band.MODERATE

    def test_high_threshold_boundary_is_high(self):
        assert band_for(CFG.t_high, CFG) is Band.HIGH

    def test_decisions_follow_config_map(self):
        assert assess(0.1, 1000.0, 12, CFG).decision == REVIEW
        assert assess(0.9, 1000.0, 12, CFG).decision == REJECT

    def test_remapped_decisions(self):
        cfg = RiskConfig(
            decisions={Band.LOW: APPROVE, Band.MODERATE: APPROVE, Band.HIGH: REVIEW}
        )
        assert assess(0.5, 1000.0, 12, cfg).decision == REVIEW
        assert assess(0.1, 1000.0, 12, cfg).decision == APPROVE

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0, 1), st.floats(0, 1))
    def test_band_monotone_in_probability(self, p1, p2):
        lo, hi = sorted((p1, p2))
        assert band_for(lo, CFG) <= band_for(hi, CFG)

    def test_rate_non_decreasing_in_band(self):
        rates = [CFG.base_rate + CFG.premiums[b] for b in Band]
        assert rates == sorted(rates)


class TestAmortization:
    def test_zero_rate_divides_evenly(self):
        a = assess(0.01, 12_000.0, 12, RiskConfig(base_rate=0.0))
        assert a.monthly_payment == pytest.approx(1000.0)

    def test_textbook_loan_payment(self):
        # Oracle: the present value of the payment stream must equal the
        # principal; the known closed-form value is 1434.71.
        m = amortized_payment(100_000.0, 12.0, 120)
        assert present_value(m, 12.0, 120) == pytest.approx(100_000.0, rel=1e-9)
        assert m == pytest.approx(1434.71, abs=5e-3)

    @settings(max_examples=200, deadline=None)
    @given(
        st.floats(1000, 5_000_000),
        st.floats(0.0, 30.0),
        st.integers(1, 480),
    )
    def test_present_value_identity(self, principal, rate, n):
        m = amortized_payment(principal, rate, n)
        assert present_value(m, rate, n) == pytest.approx(principal, rel=1e-6)


class TestConditions:
    def test_term_capped_by_band_rule(self):
        a = assess(0.15, 1000.0, 480, CFG)  # Moderate: cap 240
        assert a.term_months == 240
        assert any("term capped" in c for c in a.conditions)

    def test_collateral_flag_above_amount_cap(self):
        a = assess(0.15, 600_000.0, 120, CFG)
        assert "collateral required" in a.conditions

    def test_cosigner_for_high_band(self):
        a = assess(0.5, 1000.0, 12, CFG)
        assert "co-signer required" in a.conditions

    def test_low_band_small_loan_no_conditions(self):
        a = assess(0.01, 1000.0, 12, CFG)
        assert a.conditions == ()

    def test_payment_only_when_approved(self):
        assert assess(0.5, 1000.0, 12, CFG).monthly_payment is None
        assert assess(0.15, 1000.0, 12, CFG).monthly_payment is None
        assert assess(0.01, 1000.0, 12, CFG).monthly_payment is not None


class TestValidation:
    def test_invalid_probability(self):
        with pytest.raises(DataError, match="probability"):
            assess(1.5, 1000.0, 12, CFG)

    def test_non_positive_amount(self):
        with pytest.raises(DataError, match="amount"):
            assess(0.1, 0.0, 12, CFG)

    def test_bad_term(self):
        with pytest.raises(DataError, match="term"):
            assess(0.1, 1000.0, 0, CFG)

    def test_threshold_order_enforced(self):
        with pytest.raises(ConfigError, match="threshold"):
            RiskConfig(t_low=0.5, t_high=0.2)

    def test_negative_premium_rejected(self):
        with pytest.raises(ConfigError, match="premium"):
            RiskConfig(premiums={Band.LOW: -1.0, Band.MODERATE: 0.0, Band.HIGH: 0.0})


class TestPortfolio:
    def make(self, p, decision, amount=1000.0):
        return ApplicantAssessment(
            applicant_id="x", probability_of_default=p,
            band=band_for(p, CFG), decision=decision, annual_rate=8.0,
            conditions=(), monthly_payment=None, loan_amount=amount, term_months=12,
        )

    def test_all_rejected_zero_exposure(self):
        assessments = [self.make(0.9, REJECT), self.make(0.8, REJECT)]
        impact = portfolio_impact(assessments, [1, 0])
        assert impact.total_approved_principal == 0.0
        assert impact.expected_loss == 0.0
        assert impact.approved_count == 0

    def test_expected_loss_is_probability_times_amount(self):
        impact = portfolio_impact([self.make(0.1, APPROVE, 1000.0)], [0])
        assert impact.expected_loss == pytest.approx(100.0)
        assert impact.total_approved_principal == 1000.0

    def test_business_metrics_agree_with_metrics_module(self):
        rng = np.random.default_rng(0)
        probs = rng.random(40)
        labels = rng.integers(0, 2, 40)
        decisions = [
            APPROVE if p < 0.3 else (REVIEW if p < 0.6 else REJECT) for p in probs
        ]
        assessments = [
            self.make(float(p), d) for p, d in zip(probs, decisions)
        ]
        impact = portfolio_impact(assessments, labels, threshold=0.5)
        direct = business_metrics(labels, decisions, probs, 0.5)
        assert impact.business.approval_rate.value == direct.approval_rate.value
        assert impact.business.fpr.value == direct.fpr.value
        assert impact.business.fnr.value == direct.fnr.value
        assert (
            impact.business.default_rate_among_approved.value
            == direct.default_rate_among_approved.value
        )

    def test_length_mismatch_rejected(self):
        with pytest.raises(DataError, match="differ"):
            portfolio_impact([self.make(0.1, APPROVE)], [0, 1])
