import numpy as np
import pytest

from adaptive_sddp.dep import solve_dep
from adaptive_sddp.hydro import HydroConfig, generate_hydro
from adaptive_sddp.lattice import make_lattice, make_stage


def random_lattice(rng, T=3, K=3, n=4, m=2, uniform=True, random_B=False):
    """Small feasible lattice: ``A = [I | -I | D]`` keeps every rhs reachable, costs are positive."""
    stages = []
    n_prev = 0
    for t in range(1, T + 1):
        D = rng.uniform(-1, 1, size=(m, n - 2 * m)) if n > 2 * m else np.zeros((m, 0))
        A = np.hstack([np.eye(m), -np.eye(m), D])
        c = rng.uniform(0.5, 3.0, size=n)
        k_t = 1 if t == 1 else K
        base_B = rng.uniform(-1, 1, size=(m, n_prev))
        techs = [rng.uniform(-1, 1, size=(m, n_prev)) if random_B else base_B.copy() for _ in range(k_t)]
        rhss = [rng.uniform(-3, 3, size=m) for _ in range(k_t)]
        probs = None
        if not uniform and k_t > 1:
            p = rng.uniform(0.2, 1.0, size=k_t)
            probs = p / p.sum()
        stages.append(make_stage(t, c, A, techs, rhss, probs))
        n_prev = n
    return make_lattice(stages)


@pytest.fixture(scope="session")
def reference_lattice():
    return generate_hydro(HydroConfig(horizon=3, realizations=3, seed=7))


@pytest.fixture(scope="session")
def reference_optimum(reference_lattice):
    return solve_dep(reference_lattice).value


# acceptance verdicts, printed once at the end of the session
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(str(k)[0]), str(k))):
        title, ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key} [{'PASS' if ok else 'FAIL'}] {title}: {detail}")
