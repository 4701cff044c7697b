"""shearspec: spectral stability workbench for near-Couette oscillatory shears.

Library layout:

- profiles:      base-flow families and the heat-semigroup drift
- sturm:         inflection-point Sturm-Liouville problems and the
                 instability certificate
- rayleigh:      inviscid (Rayleigh) eigenmodes and branch continuation
- orrsommerfeld: viscous (Orr-Sommerfeld) spectra and the inviscid limit
- catseye:       travelling-wave bifurcation with cat's-eye streamlines
- shear3d:       3D growing modes of shears U(y, z) on a periodic strip
- cli:           batch command-line front end (`shearspec`)
"""

from .profiles import (
    ShearProfile,
    AmplitudeWindow,
    DriftParams,
    eval_profile,
    inflection_points,
    drift,
    amplitude_window,
)
from .sturm import (
    SLProblem,
    SLSpectrum,
    InstabilityCertificate,
    build_Q,
    solve_sl,
    fd_reference_eigenvalues,
    rayleigh_quotient,
    plateau_test_function,
    lambda1_bound,
    certify_instability,
)
from .rayleigh import (
    EigenMode,
    BranchCurve,
    solve_rayleigh,
    neutral_mode,
    continue_branch,
    rayleigh_noise_floor,
)
from .orrsommerfeld import (
    OSProblem,
    OSSpectrum,
    LimitTrack,
    solve_os,
    track_inviscid_limit,
    growth_rate_vs_n,
    boundary_layer_diagnostic,
)
from .catseye import (
    NonlinearityF,
    TravellingWave,
    CriticalPoint,
    build_f,
    leading_order_wave,
    newton_branch,
    critical_points,
    streamlines,
)
from .shear3d import (
    Shear3DProfile,
    GrowingMode3D,
    DiscretizedAK,
    div_curl_reconstruct,
    assemble_AK,
    solve_3d_modes,
    persistence_sweep,
)

__version__ = "0.1.0"
