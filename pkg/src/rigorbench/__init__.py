"""rigorbench: dataset hygiene and evaluation rigor for image classification.

Subpackages cover corpus auditing (duplicate detection, exclusion ledgers),
deterministic stratified splitting, cross-split leakage scans, training-set
augmentation, classification metrics with uncertainty, correlation tests,
attention-map rendering, training-protocol conformance checks, methodology
linting, a leakage pitfall simulator, and an append-only run store. The
`rigorbench` command exposes all of it.
"""

__version__ = "0.1.0"
