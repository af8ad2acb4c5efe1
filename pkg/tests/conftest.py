import logging

import pytest

ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion(name, passed, detail)."""
    def record(name, passed, detail=""):
        ACCEPTANCE.append((name, bool(passed), detail))
        return passed
    return record


@pytest.fixture(autouse=True)
def _quiet_pipeline_warnings(caplog):
    caplog.set_level(logging.ERROR, logger="postal_hw")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")


SMALL_CONFIG = """\
# small corpus for command-line tests
synth.n_templates = 3
synth.n_instances = 2
synth.n_train = 2
synth.n_envelopes = 2
"""


@pytest.fixture(scope="session")
def small_config(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "small.cfg"
    path.write_text(SMALL_CONFIG)
    return path


@pytest.fixture(scope="session")
def small_run(tmp_path_factory, small_config):
    """Output directory of `postal-hw synth` on the small configuration."""
    from postal_hw.cli import main
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--config", str(small_config), "--out", str(out)]) == 0
    return out
