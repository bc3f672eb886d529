"""Domain-generalized face anti-spoofing.

Image- and video-based live/spoof classifiers over a shared encoder, trained
adversarially against class-conditional domain discriminators through a
gradient reversal layer, with a synthetic multi-domain benchmark for
desk-scale evaluation.
"""

__version__ = "0.1.0"

from .data import LabeledImage, VideoClip
from .grl import GrlConfig, grl_backward, grl_forward, reverse_gradient
from .metrics import MetricReport, ScoredSample, acer, auc, eer_threshold, hter
from .network import ALL_VARIANTS, SpoofNet, get_variant
from .profiles import ModelProfile, get_profile
from .synthdata import (ClassSignalSpec, DgProtocol, DomainSpec, default_benchmark,
                        generate_domain, make_dg_protocol)
from .trainer import TrainConfig, alternating_train, config_for_profile

__all__ = [
    "LabeledImage", "VideoClip", "GrlConfig", "grl_forward", "grl_backward",
    "reverse_gradient", "MetricReport", "ScoredSample", "acer", "auc",
    "eer_threshold", "hter", "ALL_VARIANTS", "SpoofNet", "get_variant",
    "ModelProfile", "get_profile", "ClassSignalSpec", "DgProtocol", "DomainSpec",
    "default_benchmark", "generate_domain", "make_dg_protocol", "TrainConfig",
    "alternating_train", "config_for_profile", "__version__",
]
