"""extsentry: detection toolkit for spying browser extensions.

Parses behavioral traces, shortlists suspicious extensions, verifies
third-party data leaks, and classifies extensions with from-scratch
sequence models (LSTM primary; HMM / MLP / logistic-regression baselines).
"""

__version__ = "0.1.0"
