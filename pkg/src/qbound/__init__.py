"""Continuity bounds for multipartite entropic characteristics under energy constraints."""

from .errors import ConvergenceError, DimensionError, QboundError, StateError, TruncationError
from .tensor import (
    HermitianOperator,
    LocalChannel,
    QuantumState,
    SystemLayout,
    TruncationSpec,
    apply_local_channel,
    partial_trace,
    purify,
    tensor_product,
    trace_distance,
    trace_norm_difference,
    truncate_state,
)
from .entropic import (
    PartitionSpec,
    binary_entropy,
    conditional_entropy,
    delta_ei,
    entropy,
    eta,
    g_func,
    multipartite_mi,
    multipartite_qcmi,
    relative_entropy,
)
from .spectra import (
    EnergyFunction,
    GibbsPoint,
    OscillatorModel,
    SpectrumModel,
    bd_ratio,
    composite_spectrum,
    energy_entropy,
    f_bar,
    f_hat_star,
    load_spectrum,
    max_entropy,
    oscillator_f,
    solve_gibbs,
    tail_fraction,
)
from .bounds import (
    BoundSpec,
    BoundValue,
    ClassDescriptor,
    bound_for,
    catalog,
    cb_energy_sqrt,
    cb_finite,
    cb_oscillator,
    lookup,
    optimize_t,
    vb_two_step,
)
from .witness import (
    SampleConfig,
    VerifyRecord,
    inequality_suite,
    sample_state,
    tightness_sweep,
    verify_suite,
    write_csv,
)

__version__ = "0.1.0"
