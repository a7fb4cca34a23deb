import pathlib
import runpy

import pytest

DEMOS = pathlib.Path(__file__).resolve().parent.parent / "demos"


# the threshold demo repeats what the acceptance gate already computes, so it is skipped here
@pytest.mark.parametrize("name", ["01_decoded_rates.py", "02_schedule_search.py", "04_protocol_run.py",
                                  "05_optics.py"])
def test_demo_runs(name, capsys):
    runpy.run_path(str(DEMOS / name), run_name="__main__")
    assert capsys.readouterr().out
