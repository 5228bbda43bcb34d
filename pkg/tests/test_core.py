import dataclasses

import pytest
from hypothesis import given, strategies as st

from ehaoi.core import (
    EmptySourceList,
    ErasureOutOfRange,
    InvalidConfig,
    NegativeThreshold,
    NonPositiveRate,
    SystemParams,
    ThresholdPolicy,
    params_from_text,
    params_to_text,
    parse_kv,
    validate_params,
)

rates = st.floats(min_value=1e-6, max_value=1e6, allow_nan=False, allow_infinity=False)
probs = st.floats(min_value=0.0, max_value=1.0, exclude_max=True)


def test_typical_setting_is_valid():
    p = validate_params(0.1, [10], 0.2)
    assert p.lambda_e == 0.1
    assert p.lambda_d == (10.0,)
    assert p.n == 1


@pytest.mark.parametrize("q", [1.0, 1.5, -0.1])
def test_erasure_out_of_range(q):
    with pytest.raises(ErasureOutOfRange, match="q must be"):
        validate_params(0.1, [1], q)


@pytest.mark.parametrize("lambda_e,lambda_d", [(0, [1]), (-1, [1]), (0.1, [0]), (0.1, [1, -2])])
def test_nonpositive_rate(lambda_e, lambda_d):
    with pytest.raises(NonPositiveRate):
        validate_params(lambda_e, lambda_d, 0.0)


def test_empty_source_list():
    with pytest.raises(EmptySourceList):
        validate_params(0.1, [], 0.0)


def test_n_is_derived_from_rates():
    p = SystemParams(0.1, (1.0, 2.0, 3.0), 0.1)
    assert p.n == 3
    assert not p.is_symmetric
    assert SystemParams.symmetric(0.1, 10.0, 4).lambda_d == (10.0,) * 4
    with pytest.raises(dataclasses.FrozenInstanceError):
        p.q = 0.5


def test_threshold_policy():
    assert ThresholdPolicy().gamma == 0.0
    assert ThresholdPolicy(3).wait(1.0) == 3.0
    assert ThresholdPolicy(3).wait(5.0) == 5.0
    with pytest.raises(NegativeThreshold):
        ThresholdPolicy(-1e-9)


@given(le=rates, lds=st.lists(rates, min_size=1, max_size=6), q=probs)
def test_construction_total_and_round_trip(le, lds, q):
    p = validate_params(le, lds, q)
    assert params_from_text(params_to_text(p)) == p


def test_kv_format_tolerates_comments_and_dashes():
    text = "# setup\nlambda-e = 0.1\nlambda_d=1, 10  # two sources\n\nq=0.2\n"
    kv = parse_kv(text)
    assert kv["lambda_e"] == "0.1"
    p = params_from_text(text)
    assert p.lambda_d == (1.0, 10.0)
    with pytest.raises(InvalidConfig):
        parse_kv("lambda_e 0.1")
    with pytest.raises(InvalidConfig):
        params_from_text("q=0.1")
