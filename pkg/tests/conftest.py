import pytest

from stt.scenario import build_problem, load_scenario
from stt.synthesis import certify, solve_sop


@pytest.fixture(scope="session")
def corridor_scenario():
    return load_scenario("corridor")


@pytest.fixture(scope="session")
def corridor_solution(corridor_scenario):
    """One shared corridor solve; several modules only need some certified tube."""
    problem = build_problem(corridor_scenario, 0)
    tube, eta = solve_sop(problem, corridor_scenario.solver)
    cert = certify(tube, problem, eta)
    return problem, tube, cert
