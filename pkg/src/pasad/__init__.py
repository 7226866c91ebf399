"""PASAD: physiology-conditioned hyper-recurrent speech classification.

Subpackages:
  tensor      float64 autodiff tensors and the gradient tape
  features    windowing, Mel spectrograms, physiological change scores
  nets        non-local extractor, hyper-LSTM, classifier head
  training    person-disjoint splits, Adam loop, cross-validation
  interpret   frozen-gate Kernel SHAP and report rendering
  synth       synthetic cohort generation
"""

from . import _malloc

_malloc.tune()

__version__ = "0.1.0"
