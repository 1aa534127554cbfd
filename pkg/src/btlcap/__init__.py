"""Optimal encoding modes and quantum capacities for band- and
time-limited pure-loss bosonic channels."""

__version__ = "0.1.0"

from .analytic import (
    LorentzianEigensystem,
    SlepianEigensystem,
    lorentzian_eigenfunction,
    lorentzian_eigenvalues,
    lorentzian_opening_times,
    slepian_eigensystem,
)
from .bounds import BoundReport, lambda1_bound_diagnostic
from .capacity import (
    CapacityCurve,
    CapacityRate,
    capacity_curve,
    capacity_rate,
    continuous_time_capacity,
    find_opening_times,
    optimal_duration,
    pure_loss_capacity,
)
from .errors import (
    BoundInapplicableError,
    BtlcapError,
    ConfigError,
    DimensionError,
    DivergenceError,
    ExtrapolationError,
    NoOpenChannelError,
    NumericalError,
    SpectrumError,
)
from .modes import (
    DiscretizationConfig,
    KernelMatrix,
    ModeBasis,
    build_kernel_matrix,
    refine_modes,
    solve_modes,
)
from .multimode import (
    InterlacingReport,
    ModeSet,
    OptimalReadout,
    ScatteringAnalysis,
    analyze_scattering,
    gram_matrix,
    interlacing_check,
    multimode_capacity,
    optimal_readout,
    scattering_matrix,
)
from .spectra import (
    Box,
    Lorentzian,
    Spectrum,
    Tabulated,
    Transducer,
    eval_transmissivity,
    kernel_value,
    load_tabulated,
)

__all__ = [
    "__version__",
    "Box", "Lorentzian", "Spectrum", "Tabulated", "Transducer",
    "eval_transmissivity", "kernel_value", "load_tabulated",
    "DiscretizationConfig", "KernelMatrix", "ModeBasis",
    "build_kernel_matrix", "solve_modes", "refine_modes",
    "CapacityCurve", "CapacityRate", "capacity_curve", "capacity_rate",
    "continuous_time_capacity", "find_opening_times", "optimal_duration",
    "pure_loss_capacity",
    "LorentzianEigensystem", "SlepianEigensystem",
    "lorentzian_eigenvalues", "lorentzian_eigenfunction",
    "lorentzian_opening_times", "slepian_eigensystem",
    "ModeSet", "OptimalReadout", "ScatteringAnalysis", "InterlacingReport",
    "analyze_scattering", "gram_matrix", "interlacing_check",
    "multimode_capacity", "optimal_readout", "scattering_matrix",
    "BoundReport", "lambda1_bound_diagnostic",
    "BtlcapError", "SpectrumError", "ExtrapolationError", "NumericalError",
    "DivergenceError", "NoOpenChannelError", "BoundInapplicableError",
    "DimensionError", "ConfigError",
]
