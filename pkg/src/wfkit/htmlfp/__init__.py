"""HTML document features and fingerprintability prediction."""

from .dom import Comment, DomTree, Element, HtmlEncodingError, parse_html
from .features import (
    FEATURE_NAMES,
    N_FEATURES,
    HtmlFeatureRow,
    depth_direction_stats,
    extract_features,
    nearest_rank,
    rank_transform,
    registrable_domain,
    tag_paths,
)
from .labeling import DEFAULT_THRESHOLDS, FpLabeling, fp_labels
from .pipeline import (
    FpResult,
    fp_experiment,
    html_feature_matrix,
    rank_inputs,
    split_sites,
    trace_site_accuracy,
)
from .synthetic import FpCorpus, FpCorpusConfig, generate_fp_corpus
