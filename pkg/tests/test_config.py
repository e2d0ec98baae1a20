from pathlib import Path

import pytest

from causalkinetics.config import load_config
from causalkinetics.errors import ParseError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_benchmark_config():
    cfg = load_config(CONFIGS / "benchmark.ini")
    assert cfg.network_path == CONFIGS / "consumer.net"
    assert cfg.initial == {"A": 1.0, "B": 1.0, "C": 1.0}
    assert (cfg.t_start, cfg.t_end, cfg.points, cfg.substeps) == (0.0, 10.0, 50, 20)
    assert cfg.sigma == 0.01 and cfg.reps == 20
    assert [label for label, _ in cfg.environments] == ["observational", "k1_double", "k2_half"]
    assert cfg.environments[2][1] == ["set-rate k2 0.2", "set-initial B 2"]
    assert (cfg.target, cfg.p_max, cfg.degree, cfg.include_self) == ("C", 3, 2, True)


def test_per_species_values_and_comments(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[noise]\nsigma = 0.1, 0.2  ; two species\n[experiment]\nseed = 4\n"
                 "initial_sd = 0.05\n[discover]\nmm_c2 = 1 2\ninclude_self = no\n")
    cfg = load_config(p)
    assert cfg.sigma == (0.1, 0.2)
    assert cfg.initial_sd == 0.05
    assert cfg.mm_c2 == (1.0, 2.0)
    assert cfg.include_self is False


@pytest.mark.parametrize("text", [
    "[grid]\npoints = many\n",
    "[model]\nnetwork = a.net\nmodel = b.model\n",
    "[model]\ninitial = A1\n",
    "[noise]\nsigma = loud\n",
    "no section header\n",
])
def test_bad_configs(tmp_path, text):
    p = tmp_path / "bad.ini"
    p.write_text(text)
    with pytest.raises(ParseError):
        load_config(p)


def test_missing_config(tmp_path):
    with pytest.raises(ParseError, match="not found"):
        load_config(tmp_path / "none.ini")
