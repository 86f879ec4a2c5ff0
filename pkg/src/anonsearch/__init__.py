"""Query anonymisation by semantic decomposition.

A query is replaced by noisy related terms plus distractor terms; its result
set is rebuilt from the related terms' results.
"""

__version__ = "0.1.0"
