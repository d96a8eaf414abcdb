"""Matrix-free diffusion maps with a Lanczos eigensolver."""

from ._pmap import (
    DegenerateInput,
    DisconnectedError,
    Error,
    FormatError,
    InvalidArgument,
    IoError,
    NumericError,
    ResourceError,
    circle_metrics,
    convolved_kernel_matvec,
    cycle_adjacency_apply,
    dense_kernel,
    eigsh,
    embed,
    generate_icon,
    generate_rotated_dataset,
    kernel_matvec,
    krylov_budget,
    lattice_apply,
    load_dataset,
    normalize_rows,
    rotate_image,
    save_dataset,
    verify,
)

__all__ = [name for name in dir() if not name.startswith("_")]
