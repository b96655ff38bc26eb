"""Sharp-interface transport energies on a slab: fields, constructions,
bounds, and a reference annealer."""

from .core import (
    Anchor,
    Bc,
    GridSpec,
    Magnetisation,
    Mode,
    StrayField,
    SubCuboid,
    check_admissibility,
    vertical_charge,
)
from .bounds import (
    ProbeResult,
    StripeBaseline,
    SweepResult,
    SweepRow,
    interpolation_ratio,
    local_probe,
    lower_bound_chain,
    scaling_sweep,
    stripe_baseline,
)
from .construction import (
    BlockInput,
    BranchingBuild,
    assemble_branching,
    building_block,
    choose_N,
    periodic_competitor,
)
from .energy import (
    EnergyBreakdown,
    interfacial_energy,
    minimal_stray_field,
    total_energy,
)
from .errors import NumericalCheckError
from .minimize import AnnealConfig, AnnealResult, SplitMix64, anneal, flip_delta

__version__ = "0.1.0"

__all__ = [
    "Anchor",
    "AnnealConfig",
    "AnnealResult",
    "Bc",
    "BlockInput",
    "BranchingBuild",
    "EnergyBreakdown",
    "GridSpec",
    "Magnetisation",
    "Mode",
    "NumericalCheckError",
    "ProbeResult",
    "SplitMix64",
    "StrayField",
    "StripeBaseline",
    "SubCuboid",
    "SweepResult",
    "SweepRow",
    "anneal",
    "assemble_branching",
    "building_block",
    "check_admissibility",
    "choose_N",
    "flip_delta",
    "interfacial_energy",
    "interpolation_ratio",
    "local_probe",
    "lower_bound_chain",
    "minimal_stray_field",
    "periodic_competitor",
    "scaling_sweep",
    "stripe_baseline",
    "total_energy",
    "vertical_charge",
    "__version__",
]
