"""Desk-scale complexity experiments for polygonal billiards."""

__version__ = "0.1.0"

from .geometry import (  # noqa: F401
    IsometryFrame,
    Point2,
    PolygonTable,
    SegmentG,
    load_polygon,
    orient,
    polygon_from_json,
    reflect_across,
    validate_polygon,
)
from .dynamics import (  # noqa: F401
    FlowPoint,
    PhasePoint,
    StepResult,
    flow,
    min_clearance,
    stays_clear,
    step,
    trace,
)
from .unfolding import (  # noqa: F401
    Beam,
    SaddleChain,
    SaddleConnection,
    UnfoldedEdge,
    beam_feasible,
    detect_saddle_chains,
    find_saddle_connections,
    geometric_length_bounds,
    unfold_word,
)
from .enumeration import (  # noqa: F401
    CountTable,
    WordTree,
    check_counting_identity,
    entropy_estimates,
    enumerate_saddle_connections,
    enumerate_words,
)
from .cells import (  # noqa: F401
    CellProbe,
    InradiusCurve,
    ball_in_cell,
    cell_of,
    cell_structure_check,
    inradius_curve,
)
from .metric import (  # noqa: F401
    LiouvilleSampler,
    estimate_Ba,
    hamming_cover,
    sample_liouville,
    theorem_experiments,
    verify_prop9,
)
from .perturbation import (  # noqa: F401
    PolygonFamily,
    chain_creation_scan,
    exponent_fit,
    persistence_check,
    perturb,
    theta_margin,
)
