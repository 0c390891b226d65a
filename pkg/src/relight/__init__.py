"""Compact Retinex-style low-light image enhancement.

Decomposition into reflectance and illumination, dark-region attention,
a U-shaped illumination enhancer with residual reconstruction and
denoising, plus the full training/evaluation/profiling harness and CLI.
"""

from .blocks import (ConvSpec, ResidualBlock, ResidualSEBlock, SEBlock,
                     conv2d, init_parameters)
from .checkpoint import (Checkpoint, load_checkpoint, read_arrays,
                         restore_checkpoint, save_checkpoint, write_arrays)
from .config import (FULL_TRAINING_REFERENCE, ModelConfig, RunConfig,
                     VARIANTS, apply_overrides, run_config_from_mapping,
                     valid_override_keys, variant_config)
from .dark_region import DarkRegionAttention, bilinear_upsample
from .data import (DatasetSplit, NAMED_SPLITS, PairedSample, crop_to,
                   load_dataset, load_image, pad_to_multiple, save_image)
from .decom import DecompositionNet
from .enhancer import (ILLUM_CEIL, IlluminationEnhancer, RefinementLayer,
                       ToneMap, tone_map)
from .exceptions import (CheckpointError, ConfigurationError, DatasetError,
                         RelightError, ShapeError, TrainingDivergedError)
from .losses import (IdentityFeatureExtractor, LOSS_MODES, LossWeights,
                     RandomConvFeatureExtractor, VggFeatureExtractor,
                     charbonnier_loss, color_constancy_loss,
                     combined_zero_dce_loss, exposure_loss, perceptual_loss,
                     spatial_consistency_loss, total_loss)
from .metrics import MetricReport, psnr, ssim
from .pipeline import LowLightEnhancer, PipelineOutputs
from .profiling import (ProfileReport, conv_flops, count_flops, count_params,
                        profile_model)
from .reconstruction import Denoiser, reconstruct
from .schedule import ScheduleConfig, lr_at
from .train import (AblationRow, TrainConfig, TrainResult, enhance_padded,
                    evaluate, format_ablation_table, run_ablation, train)

__version__ = "0.1.0"
