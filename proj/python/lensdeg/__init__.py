"""Lens ray tracing, Fraunhofer PSF grids, spatially-variant image degradation and MTF metrology."""

from ._core import (
    LensPrescription,
    best_focus,
    compute_psf,
    degrade_image,
    export_psf,
    load_prescription,
    load_reference_psf,
    make_test_chart,
    mean_brightness,
    mtf50,
    paraxial_solve,
    parse_prescription,
    refractive_index,
    render_psf_grid,
    rmse,
    run_pipeline,
    trace_chief_ray,
)

__all__ = [
    "LensPrescription",
    "best_focus",
    "compute_psf",
    "degrade_image",
    "export_psf",
    "load_prescription",
    "load_reference_psf",
    "make_test_chart",
    "mean_brightness",
    "mtf50",
    "paraxial_solve",
    "parse_prescription",
    "refractive_index",
    "render_psf_grid",
    "rmse",
    "run_pipeline",
    "trace_chief_ray",
]
