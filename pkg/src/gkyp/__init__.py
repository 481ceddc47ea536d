"""Band-limited KYP toolkit: frequency sweeps, LMI certificates, time-domain
constraints and the S-procedure, cross-checked against each other."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    AllFrequenciesSingular,
    DimensionMismatch,
    GenerationFailed,
    GkypError,
    HorizonExhausted,
    InvalidBand,
    NotHermitian,
    NotPsd,
    NumericalFailure,
    SingularFrequency,
    SingularShift,
    StepTooLarge,
    UncontrollableWarning,
)
from .freq import FdiOptions, FdiReport, fdi_check, fdi_value, transfer_column  # noqa: F401
from .harness import SuiteConfig, run_equivalence_suite  # noqa: F401
from .kernels import BACKEND  # noqa: F401
from .lmi import (  # noqa: F401
    LmiOptions,
    build_gkyp,
    classical_kyp,
    gkyp_feasible,
    lmi_lhs,
    multiplier_to_certificate,
    verify_certificate,
)
from .model import Certificate, FrequencyBand, StateSpace, Trajectory, realify  # noqa: F401
from .sdp import LmiBlock, LmiSystem, SdpOutcome, Status, solve_feasibility  # noqa: F401
from .sproc import (  # noqa: F401
    QuadraticMap,
    SprocCertificate,
    dual_pairing,
    falsify_statement_A,
    find_certificate,
    integral_quadratic,
    shift_system_check,
)
from .tdomain import (  # noqa: F401
    HorizonOptions,
    TdiResult,
    evaluate,
    falsify_tdi,
    iqc_value,
    regularity_witness,
    simulate,
    tdi_value,
)
