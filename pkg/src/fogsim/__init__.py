"""fogsim: deterministic discrete-event simulator for fog/edge computing.

Model a hierarchical device tree (cloud, gateways, end devices), describe an
application as a DAG of modules exchanging typed tuples, pick a placement
policy, and measure control-loop latency, network usage, and energy.
"""

from .kernel import EventKernel, KernelError, ArgumentError, ConfigurationError
from .topology import (
    Actuator,
    EmissionDistribution,
    FogDevice,
    PhysicalTopology,
    SchemaError,
    Sensor,
    topology_from_dict,
    topology_from_json,
)
from .application import (
    Application,
    AppEdge,
    AppLoop,
    AppModule,
    AppValidationError,
    RateReport,
    TupleMapping,
    application_from_dict,
    application_from_json,
)
from .placement import (
    ModuleInstance,
    PlacementConstraint,
    PlacementError,
    PlacementMap,
    place_cloud_only,
    place_edge_ward,
    run_policy,
    validate_placement,
)
from .metrics import LoopTracker, NetworkUsage, RunReport, sweep_row, SWEEP_COLUMNS
from .runtime import Simulation
from .scenarios import (
    ScenarioError,
    ValidationFailure,
    build_scenario,
    check_inputs,
    list_scenarios,
    prepare,
    run_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "Actuator",
    "AppEdge",
    "AppLoop",
    "AppModule",
    "AppValidationError",
    "Application",
    "ArgumentError",
    "ConfigurationError",
    "EmissionDistribution",
    "EventKernel",
    "FogDevice",
    "KernelError",
    "LoopTracker",
    "ModuleInstance",
    "NetworkUsage",
    "PhysicalTopology",
    "PlacementConstraint",
    "PlacementError",
    "PlacementMap",
    "RateReport",
    "RunReport",
    "ScenarioError",
    "SchemaError",
    "Sensor",
    "Simulation",
    "SWEEP_COLUMNS",
    "TupleMapping",
    "ValidationFailure",
    "application_from_dict",
    "application_from_json",
    "build_scenario",
    "check_inputs",
    "list_scenarios",
    "place_cloud_only",
    "place_edge_ward",
    "prepare",
    "run_policy",
    "run_scenario",
    "sweep_row",
    "topology_from_dict",
    "topology_from_json",
    "validate_placement",
    "__version__",
]
