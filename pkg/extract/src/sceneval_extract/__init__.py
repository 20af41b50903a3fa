"""sceneval-extract: adapter producing the evaluation toolkit's input files
(image/crop embeddings, predicted label sets, perceptual distance tables)
from an image directory and a conditioning file."""

__version__ = "0.1.0"

from .backbone import Backbone, LinearHead
from .formats import ExtractError
from .jobs import (
    ExtractionJob,
    discover_images,
    extract_embeddings,
    lpips_table,
    predict_labels,
)
