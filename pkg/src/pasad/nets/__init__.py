from .extractor import FeatureExtractor, FeatureExtractorConfig, ReferenceExtractor
from .hyperlstm import (
    GATES,
    BaseWeights,
    BidirectionalHyperLstm,
    GateTensors,
    GateWeights,
    HyperLstmDirection,
    LstmCell,
    gate_weight_change,
    main_step,
)
from .layers import BatchNorm2d, Conv2d, ConvBnRelu, Linear, Net, orthogonal
from .model import AblationFlags, ClassifierHead, ModelConfig, PasadModel
from .nonlocal_block import NonLocalBlock

__all__ = [
    "GATES", "AblationFlags", "BaseWeights", "BatchNorm2d",
    "BidirectionalHyperLstm", "ClassifierHead", "Conv2d", "ConvBnRelu",
    "FeatureExtractor", "FeatureExtractorConfig", "GateTensors", "GateWeights",
    "HyperLstmDirection", "Linear", "LstmCell", "ModelConfig", "Net",
    "NonLocalBlock", "PasadModel", "ReferenceExtractor", "gate_weight_change",
    "main_step", "orthogonal",
]
