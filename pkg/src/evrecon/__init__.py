"""Event-based latent frame reconstruction with an exact double-integral engine."""

from .calibration import (LossReport, LossWeights, default_queries, estimate_threshold, loss_bb, loss_be,
                          loss_sb, total_loss)
from .errors import EngineError
from .events import (Event, EventStream, ExposureWindow, TemporalBinGrid, preprocess, signed_count,
                     slice_stream, to_bins)
from .integral import (IntegralMap, Threshold, canonical_G, double_integral, integral_map, quadrature_oracle,
                       sharp_integral)
from .metrics import MetricResult, psnr, ssim
from .reconstruction import EPS, FusionWeights, Frame, apf_fuse, enhance, fusion_weights, reblur, reconstruct_latent
from .simulator import LatentVideo, generate_events, model_exact_video, synthesize_blur, synthetic_scene

__version__ = "0.1.0"
