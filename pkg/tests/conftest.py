import numpy as np
import pytest

from zslca import _kernels
from zslca.attrspace import AttributeMatrix
from zslca.datagen import SynthConfig, generate_synthetic

BACKENDS = ["numpy"] + (["numba"] if _kernels.HAS_NUMBA else [])


@pytest.fixture(scope="session")
def synth42():
    return generate_synthetic(SynthConfig(seed=42))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_raw(rng, m, c, binary=False):
    """A valid raw attribute matrix: non-negative with no all-zero column."""
    if binary:
        v = (rng.random((m, c)) < 0.4).astype(float)
    else:
        v = rng.random((m, c)) * (rng.random((m, c)) < 0.7)
    for j in np.flatnonzero(v.sum(axis=0) == 0):
        v[rng.integers(m), j] = 1.0 if binary else rng.uniform(0.05, 1.0)
    return AttributeMatrix(v, [f"a{i}" for i in range(m)], [f"c{j}" for j in range(c)])


# -- acceptance summary --------------------------------------------------------------
# Tests in test_acceptance.py record ("criterion", n) and ("detail", text); the
# terminal summary then lists one PASS/FAIL line per criterion.

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE[props["criterion"]] = (report.outcome == "passed", props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
