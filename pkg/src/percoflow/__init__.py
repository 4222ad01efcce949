"""First-passage percolation maximal flows on lattice approximations of
bounded domains: exact solves, flow-constant estimation, surface energies,
and lower-deviation rate experiments."""

__version__ = "0.1.0"

from .capacities import (
    CapacityField,
    CapacityLaw,
    bernoulli,
    constant,
    derive_seed,
    exponential,
    law_checks,
    parse_law,
    two_point,
    uniform_int,
)
from .cylinder_flows import build_cylinder_instance, phi_cyl, tau
from .deviations import (
    CutsetStats,
    PhiRun,
    RateEstimate,
    cutset_tail,
    estimate_rate,
    run_phi,
    source_cluster,
)
from .errors import PercoflowError
from .geometry import (
    Box,
    Cylinder,
    Domain,
    Hyperrectangle,
    cyl,
    halfspace_clip,
    make_box_domain,
    straight_hyperrectangle,
    unit_square_domain,
)
from .lattice import DiscreteDomain, LatticeGraph, discretize, edge_in_region, induced_graph
from .maxflow import FlowResult, Stream, cut_capacity, is_cut, max_flow, verify_stream
from .nu_estimator import (
    NuEstimate,
    NuTable,
    build_nu_table,
    check_weak_triangle,
    direction_grid,
    estimate_nu,
    nu0,
    tau_lower_tail,
)
from .surface_energy import EnergyValue, SurfaceSet, energy, phi_omega_search
