"""Non-local cross-spectral reconstruction of masked image channels.

Missing pixels of one spectral channel are recovered from fully available
reference channels: for every masked pixel, the most similar locations (by
reference-channel block distance inside a bounded search window) are stacked,
the best-correlated reference is chosen, and a closed-form affine fit over
the valid entries of the stack predicts the missing value. Pixels are filled
iteratively, easiest first, with a neighbor-copy fallback for closed masked
regions.
"""

from .block_matching import (
    MatchList,
    NocsParams,
    block_distance,
    extract_block,
    match_blocks,
    match_blocks_many,
)
from .errors import InputError, NocsError, ValidationError
from .image_model import Channel, Mask, ReconstructionProblem, apply_mask, new_problem
from .masks import (
    GENERATOR_ID,
    PATTERNS,
    MaskSpec,
    default_element_size,
    generate_mask,
    load_mask,
    save_mask,
)
from .metrics import QualityReport, evaluate, psnr, ssim
from .reconstructor import (
    DIRECTIONS,
    EmergencyCandidates,
    ReconstructionState,
    ReconstructionStats,
    build_bar,
    emergency_step,
    find_emergency_candidates,
    init_state,
    reconstruct,
    schedule_batch,
)
from .regression import AffineFit, Bar, fit_affine, fit_predict_batch, predict_pixel, select_reference

__version__ = "0.1.0"

__all__ = [
    "AffineFit",
    "Bar",
    "Channel",
    "DIRECTIONS",
    "EmergencyCandidates",
    "GENERATOR_ID",
    "InputError",
    "Mask",
    "MaskSpec",
    "MatchList",
    "NocsError",
    "NocsParams",
    "PATTERNS",
    "QualityReport",
    "ReconstructionProblem",
    "ReconstructionState",
    "ReconstructionStats",
    "ValidationError",
    "apply_mask",
    "block_distance",
    "build_bar",
    "default_element_size",
    "emergency_step",
    "evaluate",
    "extract_block",
    "find_emergency_candidates",
    "fit_affine",
    "fit_predict_batch",
    "generate_mask",
    "init_state",
    "load_mask",
    "match_blocks",
    "match_blocks_many",
    "new_problem",
    "predict_pixel",
    "psnr",
    "reconstruct",
    "save_mask",
    "schedule_batch",
    "select_reference",
    "ssim",
    "__version__",
]
