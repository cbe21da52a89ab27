"""Topological fingerprints of images (cubical persistence + Betti curves) and a boosted-tree classifier."""

from .filtration import BinaryImage, FiltrationField, binary_slice, build_filtration, threshold_grid
from .image_io import ChannelMatrix, RgbImage, extract_channel, load_image
from .persistence import PersistenceDiagram, bars_alive_at, compute_pd
from .vectorize import TopoFeatureVector, betti_vector, class_band_curves, emit_betti_svg, topo_feature_vector

__version__ = "0.1.0"
