"""Synthetic handwriting page generation and OCR error-corpus tooling."""

from .geometry import (
    ControlNode,
    CurveSegment,
    NodeFlag,
    Point2,
    Polyline,
    Vec2,
    eval_cubic,
    flatten,
    segments_from_nodes,
)
from .templates import (
    CharNotInDbError,
    GlyphTemplate,
    TemplateDB,
    load_template_db,
    pick_variant,
    save_template_db,
    validate_glyph,
)
from .style import Rng, StyleConfig, StyleParams, perturb_node, sample_page_style
from .layout import (
    DriftState,
    PageGeometry,
    PageOverflowError,
    PageSpec,
    drift_step,
    layout_text,
    negative_overlap_guard,
)
from .raster import GrayscaleImage, RenderConfig, render_page
from .corpus import DatasetManifest, Sentence, generate_dataset, ingest
from .errorpairs import (
    Alignment,
    EditOp,
    NoiseChannelConfig,
    OpKind,
    TrainingPair,
    align,
    edit_distance,
    make_pairs,
    noise_channel,
)
from .metrics import MetricsReport, NormalizationMode, evaluate, normalize, word_error_rate

__version__ = "0.1.0"
