"""Location embeddings from mobility trajectories.

Trains skip-gram vectors over per-period visit groups, fits gravity models
with pluggable distance kernels, and compares against diffusion baselines on
the co-visit network.
"""

from .analysis import (
    Dendrogram,
    NormSummary,
    country_centroid,
    country_members,
    cut,
    element_centric_similarity,
    gini,
    hierarchical_cluster,
    norm_summary,
    select_countries,
)
from .baselines import (
    MobilityNetwork,
    PprVector,
    degree_strength,
    eigenvector_centrality,
    ppr,
    ppr_cosine_distance,
    ppr_jsd,
)
from .corpus import (
    LocationRecord,
    Trajectory,
    Visit,
    Vocabulary,
    build_trajectories,
    build_vocabulary,
    filter_mobile,
    parse_metadata,
    parse_visits,
    prune_general,
    realize,
)
from .distances import (
    DistanceKind,
    cosine_distance,
    dot_similarity,
    great_circle_km,
)
from .embedding import (
    EmbeddingModel,
    TrainConfig,
    in_vector,
    load_model,
    save_model,
    sgns_objective,
    train,
)
from .errors import (
    ConvergenceError,
    DomainError,
    FitError,
    InputError,
    MatchingError,
    MobvecError,
    NumericError,
    ParseError,
    SchemaError,
    TrainingError,
)
from .gravity import (
    Family,
    FluxMatrix,
    FluxMode,
    GravityFit,
    PopulationSource,
    compute_flux,
    compute_population,
    default_family,
    evaluate_fit,
    fit_gravity,
    predict_flux,
    restrict_scope,
)
from .semaxis import (
    Axis,
    Ranking,
    build_axis,
    match_poles,
    project,
    rank_by_axis,
    spearman,
)

__version__ = "0.1.0"
