import numpy as np
import pytest

from mvimpulse.model import ModelParams, constant_jumps, no_jumps

_CRITERIA: dict[str, str] = {}


def pytest_configure(config):
    config._acceptance_lines = _CRITERIA


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA, key=lambda k: (int("".join(c for c in k if c.isdigit()) or 0), k)):
        terminalreporter.write_line(_CRITERIA[key])


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion and print it."""

    def record(key: str, ok: bool, detail: str):
        line = f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA[key] = line
        print(line)
        return ok

    return record


@pytest.fixture
def baseline():
    return ModelParams(0.02, 0.2, 0.0, 0.05, 0.0, 1.0, no_jumps())


@pytest.fixture
def baseline_sigma2():
    return ModelParams(0.02, 0.2, 0.1, 0.05, 0.0, 1.0, no_jumps())


@pytest.fixture
def jumpy():
    return ModelParams(0.02, 0.2, 0.1, 0.05, 0.0, 1.0, constant_jumps(2.0, -0.3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


BASELINE_CONFIG = """\
alpha0 = 0.02
sigma1 = 0.2
sigma2 = 0.0
rho = 0.05
lambda = 0
c = 1
jump_rate = 0
jump_gamma0 = none
"""


@pytest.fixture
def write_config(tmp_path):
    def write(text=BASELINE_CONFIG, name="model.cfg", **overrides):
        lines = text.splitlines()
        keys = {ln.split("=")[0].strip(): i for i, ln in enumerate(lines) if "=" in ln}
        for k, v in overrides.items():
            if k in keys:
                lines[keys[k]] = f"{k} = {v}"
            else:
                lines.append(f"{k} = {v}")
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n")
        return path

    return write
