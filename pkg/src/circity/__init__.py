"""circity: municipality-level circular-city index toolkit.

Scores open-data KPI tables against benchmarks, weights them into a
0-100 composite index, classifies cohorts with Jenks natural breaks,
derives mobility KPIs from geospatial features, and sweeps area weights
for sensitivity analysis.
"""

from .aggregate import (
    CciAggregator,
    EnergyCapacityRecord,
    area_subscore,
    compute_cci,
    compute_self_sufficiency,
    results_by_id,
)
from .analysis import (
    CorrelationMatrix,
    DescriptiveStats,
    SweepResult,
    correlation_matrix,
    descriptive_stats,
    equal_weight_baseline,
    rescale_weights,
    sweep_area_weight,
)
from .classify import (
    BreaksClassification,
    JenksClassifier,
    assign_likert,
    jenks_breaks,
    jenks_oracle,
)
from .geokpi import (
    GeoFeature,
    MobilityResult,
    MunicipalityBoundary,
    assign_by_representative_point,
    clip_to_municipalities,
    compute_mobility_kpis,
    dissolve_topic,
    read_boundaries,
    read_features,
)
from .ingest import KpiTable, SchemaError, load_dataset, read_kpi_table, read_manifest, read_roster
from .model import (
    AreaId,
    AREA_ORDER,
    IndexResult,
    KpiDefinition,
    MunicipalityDataset,
    MunicipalityRecord,
    RegistryConfig,
    ValidationIssue,
    ValidationReport,
    WeightConfig,
    default_registry,
    load_registry,
    validate_weight_config,
)
from .scoring import CohortStats, KpiScorer, ScoreTable, score_dataset

__version__ = "0.1.0"

__all__ = [
    "AreaId",
    "AREA_ORDER",
    "BreaksClassification",
    "CciAggregator",
    "CohortStats",
    "CorrelationMatrix",
    "DescriptiveStats",
    "EnergyCapacityRecord",
    "GeoFeature",
    "IndexResult",
    "JenksClassifier",
    "KpiDefinition",
    "KpiScorer",
    "KpiTable",
    "MobilityResult",
    "MunicipalityBoundary",
    "MunicipalityDataset",
    "MunicipalityRecord",
    "RegistryConfig",
    "SchemaError",
    "ScoreTable",
    "SweepResult",
    "ValidationIssue",
    "ValidationReport",
    "WeightConfig",
    "area_subscore",
    "assign_by_representative_point",
    "assign_likert",
    "clip_to_municipalities",
    "compute_cci",
    "compute_mobility_kpis",
    "compute_self_sufficiency",
    "correlation_matrix",
    "default_registry",
    "descriptive_stats",
    "dissolve_topic",
    "equal_weight_baseline",
    "jenks_breaks",
    "jenks_oracle",
    "load_dataset",
    "load_registry",
    "read_boundaries",
    "read_features",
    "read_kpi_table",
    "read_manifest",
    "read_roster",
    "rescale_weights",
    "results_by_id",
    "score_dataset",
    "sweep_area_weight",
    "validate_weight_config",
    "__version__",
]
