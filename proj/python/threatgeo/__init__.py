"""Python surface for the threatgeo analytics core."""

from threatgeo._core import (  # noqa: F401
    AllianceRoster,
    CanonicalPlace,
    CanonicalTable,
    ClassificationMetrics,
    ConfusionMatrix,
    DetectionStats,
    EngineVerdict,
    ExtractionSchema,
    GroupStats,
    IocRecord,
    Lexicon,
    PhraseMatcher,
    PlaceKind,
    ScanReport,
    __version__,
    build_prompt,
    classify,
    confusion,
    detection_rates,
    load_lexicon,
    metrics,
    parse_response,
    rank_engines,
)
