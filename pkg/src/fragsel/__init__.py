"""Fragment-level evidence selection for retrieval-augmented generation."""

__version__ = "0.1.0"

from .config import Config, load_config, parse_config  # noqa: E402
from .features import FragmentFeatureExtractor, extract_features  # noqa: E402
from .fig import FigRecord, TokenLogProbs, build_fig_dataset, fig_score, hard_label  # noqa: E402
from .pipeline import PipelineReport, build_hybrid_pool, rerank, run, select_top_k  # noqa: E402
from .selector import (  # noqa: E402
    SelectorEstimator,
    SelectorModel,
    TrainConfig,
    bce_loss,
    binary_kl,
    kd_grad,
    kd_loss,
    sigmoid,
    train,
)
from .text_segmentation import recur_split, split_doc, split_sentences  # noqa: E402
from .types import (  # noqa: E402
    BoundingBox,
    Document,
    EvidenceItem,
    EvidenceKind,
    Modality,
    Query,
    TextFragment,
    VisualFragment,
    count_tokens,
)
from .visual_segmentation import (  # noqa: E402
    DetectionCandidate,
    VisualFilterThresholds,
    box_area,
    extract_visual_fragments,
    filter_boxes,
)
