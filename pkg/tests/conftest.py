import pytest

from curtail.design import DesignParams, design_approx


@pytest.fixture(scope="session")
def table1_design():
    """The delta=0.1 reference design (N*=12811, k*=878)."""
    return design_approx(DesignParams(0.05, 0.1, 0.065, 0.0715), delta=0.1)


@pytest.fixture(scope="session")
def small_design():
    """A desk-scale design for enumeration oracles."""
    return design_approx(DesignParams(0.1, 0.2, 0.2, 0.5))
