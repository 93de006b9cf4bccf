"""Multi-label graph generation, characterization and evaluation."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    BundleReport,
    GraphError,
    MultiLabelGraph,
    Split,
    build_graph,
    validate_bundle,
)
from .edgegen import (  # noqa: E402
    AttachmentParams,
    CalibrationError,
    HomophilyCalibrator,
    SocialDistanceAttachment,
    attach_edges,
    calibrate_to_homophily,
    connection_probability,
    normalized_hamming,
    paired_sweep,
    sweep_alpha,
    sweep_b,
)
from .evaluation import degenerate_audit, evaluate, f1_scores, macro_ap, macro_auroc  # noqa: E402
from .io import (  # noqa: E402
    DatasetBundle,
    FeatureDegrader,
    degrade_features,
    identity_features,
    load_bundle,
    make_splits,
    save_bundle,
)
from .labelgen import (  # noqa: E402
    HypersphereLabelGenerator,
    LabelGenConfig,
    LabelSphere,
    generate_spheres,
    sample_points,
    uniform_in_ball,
)
from .metrics import (  # noqa: E402
    ccns,
    clustering_coefficient,
    dataset_statistics,
    degree_assortativity,
    label_homophily,
    neighbor_histograms,
)
