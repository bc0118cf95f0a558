import pytest
from hypothesis import HealthCheck, settings

from quasisasaki import zoo
from quasisasaki.exprjet import sample_points

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ACCEPTANCE: dict = {}

# (catalogue name, parameters) for the models every property is checked on
ZOO = [
    ("flat", {}),
    ("s3", {}),
    ("s7", {}),
    ("s7", {"r": 2}),
    ("s3xr4", {}),
    ("s3xr8", {}),
]


def zoo_id(entry):
    name, kw = entry
    return name + "".join(f"-{k}{v}" for k, v in kw.items())


@pytest.fixture(scope="session")
def models():
    return {zoo_id(e): zoo.build(e[0], **e[1]) for e in ZOO}


def points(M, k=4, seed=11):
    return sample_points(M.dom, k, seed)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2} {'PASS' if ok else 'FAIL'}  {title}  {detail}")
