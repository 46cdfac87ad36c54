"""Word-pair grid tagging for end-to-end opinion pair and triplet extraction."""

__version__ = "0.1.0"
