"""Discrete Lorenz attractors in rescaled return maps near a homoclinic
tangency to a resonant conservative saddle."""

__version__ = "0.1.0"

from .henon3d import (  # noqa: E402
    HenonParams,
    HenonState,
    OrbitKind,
    classify_attractor,
    find_resonant_degeneracy,
    henon_fixed_points,
    henon_jacobian,
    henon_step,
    iterate_orbit,
    limit_map_step,
    limit_to_henon_coords,
    lyapunov_spectrum,
)
from .model_family import ModelSpec, Unfolding, default_model, first_return_map  # noqa: E402
from .rescaling import (  # noqa: E402
    RescaledParams,
    build_conjugacy,
    residual_c0_c1,
    rescaled_return_map,
    solve_unfolding,
    theorem_parameters,
)
