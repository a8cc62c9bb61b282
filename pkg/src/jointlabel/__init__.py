"""Joint sentence and token labeling toolkit.

Token scores double as attention weights for sentence classification;
training combines sentence, token, word-LM, character-LM, and
attention-range objectives on a self-contained autodiff core.
"""

__version__ = "0.1.0"
