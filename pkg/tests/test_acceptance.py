"""One test per acceptance criterion of the strip-resonator benchmark, at
the fixed tolerances encoded in :mod:`ablscar.acceptance`.  The measured
values are attached to the assertion message so a failure documents what
was obtained."""
import json

import pytest

from ablscar import acceptance as acc


def _check(bench, k):
    res = acc.CRITERIA[k](bench)
    assert res.number == k
    json.dumps(res.to_dict())  # every result is serializable
    assert res.passed, f"criterion {k} ({res.name}): {res.to_dict()['values']}"



@pytest.mark.slow
def test_criterion_1_stability_reproduction(bench):
    _check(bench, 1)


@pytest.mark.slow
def test_criterion_2_focal_census(bench):
    _check(bench, 2)


@pytest.mark.slow
def test_criterion_3_energy_agreement(bench):
    _check(bench, 3)


@pytest.mark.slow
def test_criterion_4_single_scar_per_window(bench):
    _check(bench, 4)


@pytest.mark.slow
def test_criterion_5_husimi_localization(bench):
    _check(bench, 5)


@pytest.mark.slow
def test_criterion_6_profile_agreement(bench):
    _check(bench, 6)


@pytest.mark.slow
def test_criterion_7_parity(bench):
    _check(bench, 7)


@pytest.mark.slow
def test_criterion_8_property_suites(bench):
    _check(bench, 8)


@pytest.mark.slow
def test_criterion_9_diagnostics_sanity(bench):
    _check(bench, 9)
