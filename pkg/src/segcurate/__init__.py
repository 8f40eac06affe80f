"""Curation and evaluation toolkit for language-guided remote-sensing
segmentation datasets: mask codecs and shape filters, attention-supervision
and mask losses with analytic gradients, candidate-query matching, gIoU/cIoU
reporting, corpus schema tooling, QA generation plumbing, and a human review
service."""

from . import (  # noqa: F401
    categories,
    curation,
    dataset,
    errors,
    geometry,
    losses,
    masks,
    matching,
    metrics,
    qagen,
    review,
)

__version__ = "0.1.0"
