"""riskforge: a self-contained credit-default scoring engine.

Train tree-ensemble classifiers on tabular applicant data, explain their
predictions with SHAP and LIME, map default probabilities to risk bands and
loan decisions, and emit per-applicant HTML/JSON/SVG reports.
"""

__version__ = "0.1.0"
