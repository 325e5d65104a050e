"""Context-model-driven detection and repair of errors in tabular data.

A context model (a triple graph describing sensors, devices, locations and
column constraints) is queried for dependencies, the dependencies are
compiled into column-bound checks, and the checks drive cell-level error
detection and deterministic repair, with live re-extraction when the
context model changes.
"""

from .detectors import (
    DetectionReport,
    FeatureMatrix,
    Finding,
    baseline_zscore,
    build_feature_matrix,
    detect_all,
    detect_nulls,
)
from .extraction import (
    Capability,
    CheckPlan,
    Denial,
    DependencySet,
    DeviceLink,
    Locality,
    Matching,
    Monitoring,
    Temporal,
    VocabularyError,
    compile_plans,
    extract_all,
    refresh,
)
from .injection import GroundTruth, InjectionSpec, inject
from .metrics import EvalReport, detection_metrics, repair_metrics
from .repair import RepairPlan, apply_repairs, propose_repairs
from .table import (
    CellRef,
    ConfigError,
    DataError,
    DatasetConfig,
    Table,
    column_stats,
    load_csv,
    write_csv,
)
from .triples import (
    ChangeEvent,
    Iri,
    Literal,
    ParseError,
    Triple,
    TripleGraph,
    Wildcard,
    diff,
    match_pattern,
    parse_context,
    serialize,
)

__version__ = "0.1.0"
