"""Temporal-coherence machinery for video generation, as pure numerics.

Submodules:
  imgseq      frames/sequences, PNG I/O, protocol cropping
  warp        backward warping, flow scaling, boundary zeroing
  flow        from-scratch Farneback optical flow, .flo I/O
  perceptual  pluggable perceptual-distance backends
  metrics     PSNR / T-diff / tOF / tLP and the scene evaluator
  losses      generator/discriminator loss terms and presets
  pipeline    ping-pong sequences, triplets, curriculum schedules
  btmodel     Bradley-Terry fitting of pairwise preference votes
  cli         the `teco` command-line entry point
"""

from .btmodel import (
    VoteMatrix,
    fit_bradley_terry,
    load_votes_csv,
    predict_win_prob,
)
from .errors import (
    BackendError,
    ConvergenceError,
    DisconnectedGraphError,
    MissingFileError,
    MissingFrameError,
    ProtocolError,
    SeparationError,
    ShapeMismatchError,
    TecoError,
    UnsupportedBitDepthError,
    UnsupportedFormatError,
)
from .flow import (
    FlowParams,
    alignment_field,
    estimate_flow,
    gaussian_pyramid,
    poly_expansion,
    read_flo,
    write_flo,
)
from .imgseq import (
    Frame,
    Sequence,
    load_frame,
    load_sequence,
    protocol_crop,
    resize_bicubic,
    save_frame,
    skip_frames,
    to_luma,
)
from .losses import (
    FeatureMap,
    LossWeights,
    adv_g_uvt,
    adv_g_vsr,
    content_loss_uvt,
    content_loss_vsr,
    cosine_feature_loss,
    d_loss_uvt,
    d_loss_vsr,
    gram_loss,
    gram_matrix,
    pp_loss,
    total_generator_loss,
    uvt_weights,
    vsr_weights,
    warp_loss,
)
from .metrics import (
    EvalProtocol,
    MetricReport,
    evaluate_scene,
    psnr,
    tdiff,
    tlp,
    tof,
)
from .perceptual import (
    MsGradBackend,
    PerceptualBackend,
    TableBackend,
    external_table_backend,
    get_backend,
    msgrad_distance,
    register_backend,
    validate_backend,
)
from .pipeline import (
    ORIGINAL_TRACK,
    WARPED_TRACK,
    CurriculumState,
    Triplet,
    curriculum_mix,
    curriculum_schedule,
    make_pp_sequence,
    split_pp_outputs,
    triplet_original,
    triplet_static,
    triplet_warped,
    vsr_disc_input,
)
from .warp import FlowField, backward_warp, bilinear_sample, scale_flow, zero_border

__version__ = "0.1.0"

__all__ = [
    "BackendError",
    "ConvergenceError",
    "CurriculumState",
    "DisconnectedGraphError",
    "EvalProtocol",
    "FeatureMap",
    "FlowField",
    "FlowParams",
    "Frame",
    "LossWeights",
    "MetricReport",
    "MissingFileError",
    "MissingFrameError",
    "MsGradBackend",
    "ORIGINAL_TRACK",
    "PerceptualBackend",
    "ProtocolError",
    "SeparationError",
    "Sequence",
    "ShapeMismatchError",
    "TableBackend",
    "TecoError",
    "Triplet",
    "UnsupportedBitDepthError",
    "UnsupportedFormatError",
    "VoteMatrix",
    "WARPED_TRACK",
    "adv_g_uvt",
    "adv_g_vsr",
    "alignment_field",
    "backward_warp",
    "bilinear_sample",
    "content_loss_uvt",
    "content_loss_vsr",
    "cosine_feature_loss",
    "curriculum_mix",
    "curriculum_schedule",
    "d_loss_uvt",
    "d_loss_vsr",
    "estimate_flow",
    "evaluate_scene",
    "external_table_backend",
    "fit_bradley_terry",
    "gaussian_pyramid",
    "get_backend",
    "gram_loss",
    "gram_matrix",
    "load_frame",
    "load_sequence",
    "load_votes_csv",
    "make_pp_sequence",
    "msgrad_distance",
    "poly_expansion",
    "pp_loss",
    "predict_win_prob",
    "protocol_crop",
    "psnr",
    "read_flo",
    "register_backend",
    "resize_bicubic",
    "save_frame",
    "scale_flow",
    "skip_frames",
    "split_pp_outputs",
    "tdiff",
    "tlp",
    "to_luma",
    "tof",
    "total_generator_loss",
    "triplet_original",
    "triplet_static",
    "triplet_warped",
    "uvt_weights",
    "validate_backend",
    "vsr_disc_input",
    "vsr_weights",
    "warp_loss",
    "write_flo",
    "zero_border",
]
