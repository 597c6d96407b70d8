"""Memory hierarchy mapping, layer execution and model runs."""
from .engine import (BatchNormParams, adder_tree_reduce, run_batchnorm, run_conv, run_fc,
                     run_layer, run_pool)
from .model import (Layer, Model, build_model, lenet5, lenet5_desc, load_model,
                    resnet20_placement_audit, resnet20_shapes, run_inference)
from .placement import CapacityExceeded, LayerPlacement, LayerShape, place_conv_layer, place_fc_layer

__all__ = [
    "BatchNormParams", "CapacityExceeded", "Layer", "LayerPlacement", "LayerShape", "Model",
    "adder_tree_reduce", "build_model", "lenet5", "lenet5_desc", "load_model",
    "place_conv_layer", "place_fc_layer", "resnet20_placement_audit", "resnet20_shapes",
    "run_batchnorm", "run_conv", "run_fc", "run_inference", "run_layer", "run_pool",
]
