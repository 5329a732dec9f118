import pytest

import pmet
from pmet import harness


@pytest.fixture(scope="session")
def resonant_paper():
    """On-resonance parameter set (degenerate wells, bridge 1.5 eV up, chi = 0)."""
    return pmet.build_system(harness.bundled_config("resonant_paper"))


@pytest.fixture(scope="session")
def offres_si():
    """Off-resonance parameter set (5 meV couplings, 150 meV drop, chi = 0)."""
    return pmet.build_system(harness.bundled_config("offres_si"))
