"""Transformer-based scorer speaking the ptmkit wire protocol."""

__version__ = "0.1.0"

# Canonical class order of the wire protocol: probability vectors are indexed
# negative first, then the positive PTM classes alphabetically.
CLASS_LABELS = (
    "negative",
    "acetylation",
    "dephosphorylation",
    "deubiquitination",
    "methylation",
    "phosphorylation",
    "ubiquitination",
)
N_CLASSES = len(CLASS_LABELS)
LABEL_INDEX = {label: i for i, label in enumerate(CLASS_LABELS)}

# 512 total sequence units, 2 reserved for the [CLS]/[SEP] boundary markers.
MAX_SEQUENCE_UNITS = 512
