"""Density of the coupled process: closed form, solver and diagnostics."""

from .closed_form import absorbed_mass, absorption_constant, closed_form_density, z_function
from .diagnostics import (
    BlowupProbe,
    TestFunction,
    blowup_probe,
    default_moment_exponent,
    lp_norm,
    moment_curve,
    weak_form_residual,
    weak_form_residuals,
)
from .io import read_fields_csv, sidecar, write_fields_csv, write_run
from .solver import (
    SCHEME_VERSION,
    DensityField,
    GridSpec,
    NumericalGuardError,
    PdeRun,
    StabilityError,
    point_source,
    smooth_initial,
    solve_pde,
)

__all__ = [
    "SCHEME_VERSION",
    "BlowupProbe",
    "DensityField",
    "GridSpec",
    "NumericalGuardError",
    "PdeRun",
    "StabilityError",
    "TestFunction",
    "absorbed_mass",
    "absorption_constant",
    "blowup_probe",
    "closed_form_density",
    "default_moment_exponent",
    "lp_norm",
    "moment_curve",
    "point_source",
    "read_fields_csv",
    "sidecar",
    "smooth_initial",
    "solve_pde",
    "weak_form_residual",
    "weak_form_residuals",
    "write_fields_csv",
    "write_run",
    "z_function",
]
