"""Design-space exploration toolkit for 2.5D/3D chiplet accelerator systems."""

from .design_space import (
    ChipletSpec,
    DesignSpace,
    MappingSpec,
    PackageSpec,
    SystemConfig,
    check_feasible,
    enumerate_configs,
    format_config,
    parse_chiplet,
    parse_config,
    parse_mapping,
    parse_package,
    sample_uniform,
)
from .mapping import ChipletWork, MappingResult, WorkloadSpec, map_workload, partition
from .ppac import ModelConstants, PpacReport, evaluate, load_constants, default_space
from .cost import (
    NormalizationBasis,
    PROFILES,
    Profile,
    compute_basis,
    weighted_cost,
)

__version__ = "0.1.0"
