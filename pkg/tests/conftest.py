import json
from importlib import resources

import pytest

from chipdse import cost, ppac
from chipdse.design_space import parse_blacklist
from chipdse.mapping import WorkloadSpec


@pytest.fixture(scope="session")
def consts():
    return ppac.load_constants()


@pytest.fixture(scope="session")
def bundled_rules():
    text = resources.files("chipdse.data").joinpath("BLACKLIST.json").read_text()
    return parse_blacklist(json.loads(text))


@pytest.fixture(scope="session")
def space(consts, bundled_rules):
    return ppac.default_space(consts, bundled_rules)


@pytest.fixture(scope="session")
def small_space(space):
    """Restricted subspace small enough for exhaustive oracles (576 configs)."""
    return space.restrict(
        homogeneous=True,
        counts=(1, 2),
        array_dims=(64, 96),
        tech_nodes=(7,),
        sram_kbs=(256, 512),
        memories=("DDR5", "HBM2"),
        integrations=("2D", "2.5D", "3D"),
        interconnects=("NA", "RDL", "HB"),
        protocols=("NA", "UCS", "UC3"),
        topologies=("ring",),
    )


@pytest.fixture(scope="session")
def wl1():
    return WorkloadSpec(512, 768, 3072, "WL-1")


@pytest.fixture(scope="session")
def wl5():
    return WorkloadSpec(64, 4096, 4096, "WL-5")


@pytest.fixture(scope="session")
def wl6():
    return WorkloadSpec(1316, 24, 144, "WL-6")


@pytest.fixture(scope="session")
def basis_wl6(wl6, space, consts):
    return cost.compute_basis(wl6, space, consts, n=400, seed=11)


@pytest.fixture(scope="session")
def balance():
    return cost.PROFILES["balance"]
