"""Acceptance criteria 1-11 at the tolerances shipped in the acceptance recipe.

Each criterion prints one PASS/FAIL line (also with ``pytest -s`` off) and the
test asserts the verdict. Settings come from ``recipes/acceptance.toml``.
"""
import json

import pytest

from pikernel.acceptance import CRITERIA, run_criterion, tolerances

TOL = tolerances()


@pytest.mark.slow
@pytest.mark.parametrize("cid", sorted(CRITERIA))
def test_criterion(cid, capsys):
    res = run_criterion(cid, TOL)
    with capsys.disabled():
        print(f"\n{res.line()}")
        print(f"    {json.dumps(res.to_dict()['measured'], default=str)[:400]}")
        for note in res.notes:
            print(f"    note: {note}")
    assert res.passed, res.line()
