"""Mobile attention backbone library.

A from-scratch numpy implementation of an inverted-residual block
family that unifies convolutional and attention designs: one block
shape instantiates feed-forward, attention, depthwise-conv, and
hybrid mixers. Includes spanning window attention, four-stage
classification backbones, reverse-mode autodiff, an analytic
parameter/flops/path-length cost model, and a verification CLI.
"""

from .attention import (WindowAttention, WindowError, attend,
                        distant_partition, distant_reverse,
                        neighbor_partition, neighbor_reverse,
                        pick_head_count, pick_window)
from .backbone import (Backbone, BackboneConfig, PRESETS, StageConfig,
                       preset_config)
from .blocks import (BlockSpec, MobileBlock, attention_spec, ffn_spec,
                     hybrid_spec, inverted_residual_spec,
                     spanning_hybrid_spec)
from .checks import CheckResult, run_suite
from .configfile import ConfigError, load_config, parse_config, save_config
from .costs import (CostReport, CostRow, analyze_reachability,
                    enumerate_model_params, model_report, mpl_of)
from .data import ToyDataset
from .layers import (BatchNorm2d, Conv2d, Identity, LayerNormTokens, Linear,
                     Module, ModuleList, drop_path, global_avg_pool)
from .serialization import load_weights, save_weights
from .tensor import (FormatError, Tensor, FlopTrace, grad_check, load_tensor,
                     no_grad, save_tensor, trace_flops)
from .train import cross_entropy, toy_config, train_toy

__version__ = "0.1.0"

__all__ = [
    "Backbone", "BackboneConfig", "BatchNorm2d", "BlockSpec", "CheckResult",
    "ConfigError", "Conv2d", "CostReport", "CostRow", "FlopTrace",
    "FormatError", "Identity", "LayerNormTokens", "Linear", "MobileBlock",
    "Module", "ModuleList", "PRESETS", "StageConfig", "Tensor", "ToyDataset",
    "WindowAttention", "WindowError", "analyze_reachability", "attend",
    "attention_spec", "cross_entropy", "distant_partition", "distant_reverse",
    "drop_path", "enumerate_model_params", "ffn_spec", "global_avg_pool",
    "grad_check", "hybrid_spec", "inverted_residual_spec", "load_config",
    "load_tensor", "load_weights", "model_report", "mpl_of",
    "neighbor_partition", "neighbor_reverse", "no_grad", "parse_config",
    "pick_head_count", "pick_window", "preset_config", "run_suite",
    "save_config", "save_tensor", "save_weights", "spanning_hybrid_spec",
    "toy_config", "trace_flops", "train_toy",
]
