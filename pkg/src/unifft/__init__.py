"""unifft: multi-backend real-to-complex FFTs, slab/pencil decomposition,
pseudo-spectral operators and a strong-scaling benchmark harness."""

from .errors import (
    BackendUnavailable,
    BadParameters,
    DeadlockDetected,
    EmptyInput,
    InvalidGrid,
    LayoutMismatch,
    RankFailure,
    ShapeError,
    UnifftError,
)
from .fft_core import (
    FftPlan,
    GridSpec,
    RealField,
    SpectralField,
    available_backends,
    compute_energy_K,
    compute_energy_X,
    compute_mean,
    create_plan,
    fft_alloc,
    fft_into,
    ifft_alloc,
    ifft_into,
    init_random,
    naive_dft_r2c,
    spectral_shape,
)
from .decomp import (
    BlockLayout,
    DecompositionInfo,
    DistPlan,
    RankContext,
    are_parameters_bad,
    create_dist_plan,
    dist_fft,
    dist_ifft,
    gather_K,
    gather_X,
    make_decomposition,
    run_spmd,
    scatter_X,
    transpose_exchange,
)
from .operators import (
    OperatorGrid,
    build_operator_grid,
    divfft_from_vecfft,
    gradfft_from_fft,
    proj_inplace,
    proj_outplace,
    spectrum_shell,
)
from .bench import (
    BenchRecord,
    SpeedupTable,
    compute_speedup,
    emit_report,
    median_time,
    run_bench,
)

__version__ = "0.1.0"
