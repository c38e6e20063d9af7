"""slhnet: SLH triples, reducible quantum feedback networks and their dynamics."""
from .classical import (
    ClassicalLinearSystem,
    ClassicalSystemError,
    Grid,
    GridEmbedding,
    c_concatenate,
    c_series,
    classical_generator,
    dmz_filter,
    embed_sde_grid,
    embedded_generator,
)
from .dynamics import (
    HeisenbergCoefficients,
    NumericalError,
    Trajectory,
    basis_state,
    coherent_state,
    evolve_master,
    evolve_zakai,
    heisenberg_coefficients,
    heisenberg_generator,
    lindblad_heisenberg,
    master_rhs,
    normalized,
    output_moments,
    product_state,
    reference_record,
    simulate_record,
)
from .hilbert import (
    HilbertSpaceError,
    Operator,
    OperatorMatrix,
    Registry,
    SpaceFactor,
    annihilation,
    commutator,
    creation,
    identity,
    number,
    register_space,
)
from .holevo import HolevoError, HolevoGenerator, holevo_to_slh, photon_feedback, quadrature_feedback
from .netlist import Diagnostic, NetlistDocument, NetlistError, parse_netlist, validate_document
from .network import NetworkError, NetworkSpec, ReducedNetwork, reduce
from .serialize import triple_from_json, triple_to_json
from .slh import (
    SLH,
    ChannelMismatchError,
    ItoCoefficients,
    SLHError,
    coefficients_to_slh,
    concatenate,
    exchange_right,
    ito_coefficients,
    ito_compose,
    move_scattering,
    permute_channels,
    series,
    series_chain,
)

__version__ = "0.1.0"
