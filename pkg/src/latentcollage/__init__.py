"""Masked latent regression onto frozen image generators.

Train an encoder that maps (image, mask) pairs into a generator's latent
space, use the pair as an image prior to turn rough collages into
coherent composites, and measure the result (masked L1, Fréchet feature
distance deltas, density/coverage, blend and independence probes).
"""

from .analysis import (
    BlendResult,
    IndependenceReport,
    alpha_from_area,
    blend_compare,
    edit_vector_transfer,
    finetune_encoder,
    part_independence,
)
from .composition import (
    CollageLayer,
    CollageSpec,
    PartOrderPreset,
    PRESETS,
    assemble_collage,
    collage_spec_from_json,
    collage_spec_to_json,
    compose,
    random_collage,
    refine_latent,
)
from .generators import (
    GeneratorHandle,
    GeneratorKind,
    build_procedural_generator,
    build_toy_generator,
    generate,
    load_generator,
    oracle_part_masks,
    train_toy_generator,
)
from .images import ImageBatch
from .latent import LatentCode, LatentKind, LatentSpec, normalize_latent, sample_latent
from .masking import Mask, apply_mask, sample_mask, union_masks
from .metrics import (
    FeatureSet,
    MetricsReport,
    density_coverage,
    extract_features,
    fid_delta,
    frechet_distance,
    masked_l1,
)
from .regressor import (
    EncoderConfig,
    EncoderHandle,
    encode,
    latent_loss_cosine,
    latent_loss_mse,
    load_encoder,
    total_loss,
)
from .features import perceptual_distance
from .training import Ablation, TrainConfig, resume, train

__version__ = "0.1.0"

__all__ = [
    "Ablation",
    "BlendResult",
    "CollageLayer",
    "CollageSpec",
    "EncoderConfig",
    "EncoderHandle",
    "FeatureSet",
    "GeneratorHandle",
    "GeneratorKind",
    "ImageBatch",
    "IndependenceReport",
    "LatentCode",
    "LatentKind",
    "LatentSpec",
    "Mask",
    "MetricsReport",
    "PRESETS",
    "PartOrderPreset",
    "TrainConfig",
    "alpha_from_area",
    "apply_mask",
    "assemble_collage",
    "blend_compare",
    "build_procedural_generator",
    "build_toy_generator",
    "collage_spec_from_json",
    "collage_spec_to_json",
    "compose",
    "density_coverage",
    "edit_vector_transfer",
    "encode",
    "extract_features",
    "fid_delta",
    "finetune_encoder",
    "frechet_distance",
    "generate",
    "latent_loss_cosine",
    "latent_loss_mse",
    "load_encoder",
    "load_generator",
    "masked_l1",
    "normalize_latent",
    "oracle_part_masks",
    "part_independence",
    "perceptual_distance",
    "random_collage",
    "refine_latent",
    "resume",
    "sample_latent",
    "sample_mask",
    "total_loss",
    "train",
    "train_toy_generator",
    "union_masks",
]
