"""
Ensemble Explorer - time-budgeted model exploration driven by a learned policy
"""

__version__ = "0.1.0"
