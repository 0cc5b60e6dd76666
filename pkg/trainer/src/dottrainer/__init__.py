"""dottrainer: desk-scale training harness for joint disparity + spectral
reflectance estimation from single color-dot images, consuming datasets
rendered by the chromadot toolchain through their on-disk formats."""

from .losses import LossWeights, total_loss
from .model import HourglassNet, NetworkSpec, build_networks
from .records import Dataset, load_dataset, load_sample_dir
from .train import Pipeline, TrainConfig, train

__version__ = "0.1.0"
