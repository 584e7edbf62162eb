"""Periodic LQR design for spacecraft attitude control with reaction-wheel desaturation.

Magnetic torque coils and reaction wheels share one periodic state-feedback
law designed on the linearized nadir-pointing model and checked against
the nonlinear spacecraft dynamics.
"""

from .errors import (
    CompatibilityError,
    ConfigError,
    DesatError,
    DomainError,
    EigenvalueSplitError,
    FileFormatError,
    IntegrationError,
    MatrixOverflowError,
    ResidualError,
    SchurConvergenceError,
    SingularMatrixError,
    SubspaceExtractionError,
)
from .matkit import mat_exp, ordered_real_schur, periodic_schur, solve_linear, zoh_input_integral
from .orbit_env import (
    OrbitEnvironment,
    SpacecraftParams,
    dipole_field,
    gravity_gradient_torque,
    lvlh_rate_in_body,
    orbital_rate,
    skew,
)
from .attitude_dynamics import (
    ControlInput,
    SystemState,
    coupling_torque_f,
    quaternion_kinematics_g,
    rk4_step,
    state_derivative,
)
from .linear_plant import (
    PeriodicPlant,
    build_A_continuous,
    build_B_continuous,
    discretize_euler,
    discretize_exact,
    sample_plant,
)
from .lqr_core import (
    GainSchedule,
    build_pencil_pair,
    controllability_gramian_rank,
    gain_at,
    periodic_riccati,
    solve_dare,
    value_iteration,
    verify_schedule,
)
from .sim_engine import (
    SimConfig,
    Trajectory,
    duty_scale_gain,
    momentum_bias_run,
    run_linear,
    run_nonlinear,
)

__version__ = "0.1.0"
