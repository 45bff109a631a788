"""Text-to-image alignment evaluation.

The numerical core is the compiled ``_t2ieval`` extension; this package
re-exports it and adds a couple of conveniences.
"""

from ._t2ieval import (  # noqa: F401
    BackendContractViolation,
    BackendUnavailable,
    ConfigError,
    DegenerateEmbedding,
    DegenerateSeries,
    DuplicateKey,
    EmptyText,
    Error,
    ImageDecodeError,
    InsufficientOverlap,
    InsufficientRecords,
    IntegrityError,
    InvalidRange,
    MalformedBackendReply,
    ParseFailure,
    PromptTooLong,
    ReplayMiss,
    ValidationError,
    atomic_prompt,
    cache_key,
    clip_style_score,
    description_prompt,
    error_quality,
    eval_prompt,
    extract_rating,
    kendall_tau,
    krippendorff_alpha,
    load_manifest,
    load_prompts,
    load_ratings,
    meteor,
    meteor_tokenize,
    parse_atomic,
    parse_tagged,
    porter_stem,
    render_tagged,
    rule_enhanced_score,
    run_stage,
    sample_prompts,
    scale_rating,
    spearman_rho,
)

from pathlib import Path
import json

__version__ = "0.1.0"

STAGES = ("describe", "score", "baseline", "correlate", "report")


def run_pipeline(config, prompts, manifest, ratings, out=None):
    """Run every stage in order and return {stage: summary}.

    Stops after the first stage that reports failures.
    """
    summaries = {}
    for stage in STAGES:
        summaries[stage] = run_stage(
            stage,
            str(config),
            out=None if out is None else str(out),
            prompts=str(prompts),
            manifest=str(manifest),
            ratings=str(ratings),
        )
        if summaries[stage]["failures"]:
            break
    return summaries


def schema_dir():
    """Directory holding the wire-protocol JSON schemas."""
    here = Path(__file__).resolve().parent
    for candidate in (here / "schemas", here.parent.parent / "schemas"):
        if candidate.is_dir():
            return candidate
    raise FileNotFoundError("protocol schemas not found")


def load_schema(name):
    with open(schema_dir() / f"{name}.schema.json", encoding="utf-8") as fh:
        return json.load(fh)
