import runpy
from pathlib import Path

import pytest

from qlab import cli

ROOT = Path(__file__).resolve().parent.parent


@pytest.mark.parametrize("script", sorted((ROOT / "demos").glob("*.py")), ids=lambda p: p.stem)
def test_demo_runs(script, capsys):
    runpy.run_path(str(script), run_name="__main__")
    assert capsys.readouterr().out


@pytest.mark.parametrize("experiment", cli.EXPERIMENTS)
def test_shipped_config_matches_defaults(experiment):
    cfg = cli.load_config(ROOT / "configs" / f"{experiment}.yaml", experiment)
    default = cli.parse_config(None, experiment)
    assert cfg.params == default.params and cfg.tolerances == default.tolerances
    if default.h is not None:
        assert cfg.h == pytest.approx(default.h, rel=1e-14)
