import time
from dataclasses import dataclass

import numpy as np
import pytest

from stokesbif.dispersion import dispersion_root
from stokesbif.hodograph import (
    PeriodGrid,
    continue_branch,
    default_step_size,
    gap_stop_rules,
)
from stokesbif.spectra import default_zero_tol
from stokesbif.vorticity import VorticityModel, stream_solution

R_IRR = 1.75
N_STEPS = 40
AMP_FRACTION = 0.3


@dataclass
class BranchCase:
    ss: object
    curve: object
    grid: PeriodGrid
    result: object
    zero_tol: float
    seconds: float

    @property
    def points(self):
        return self.result.points


def build_branch(n, omega=(0.0,), R=R_IRR, n_steps=N_STEPS):
    t0 = time.perf_counter()
    ss = stream_solution(VorticityModel(omega), R)
    curve = dispersion_root(ss)
    grid = PeriodGrid(n, n, curve.Lambda0)
    res = continue_branch(
        ss, curve, grid, n_steps, default_step_size(ss, AMP_FRACTION, n_steps), gap_stop_rules(ss, AMP_FRACTION)
    )
    return BranchCase(ss, curve, grid, res, default_zero_tol(grid, curve), time.perf_counter() - t0)


@pytest.fixture(scope="session")
def irrotational():
    ss = stream_solution(VorticityModel((0.0,)), R_IRR)
    return ss, dispersion_root(ss)


@pytest.fixture(scope="session")
def branch16():
    return build_branch(16, n_steps=10)


@pytest.fixture(scope="session")
def branch32():
    return build_branch(32)


@pytest.fixture(scope="session")
def branch64():
    return build_branch(64)


@pytest.fixture(scope="session")
def vortical_branch():
    # affine vorticity, modest branch on a coarse grid
    return build_branch(16, omega=(0.5, -1.0), R=1.75, n_steps=10)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one summary line per acceptance criterion


def pytest_terminal_summary(terminalreporter):
    lines = []
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            if "test_acceptance" not in getattr(rep, "nodeid", "") or rep.when != "call" and status != "error":
                continue
            name = rep.nodeid.split("::")[-1]
            detail = next((v for k, v in getattr(rep, "user_properties", []) if k == "detail"), "")
            lines.append((name, "PASS" if status == "passed" else "FAIL", detail))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict, detail in sorted(lines):
        terminalreporter.write_line(f"{verdict}  {name}  {detail}")
