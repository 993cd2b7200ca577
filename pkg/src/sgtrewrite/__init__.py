"""Incomplete-utterance rewriting by sequential greedy tagging.

A reference rewrite is reduced to ordered fragments copied from the dialogue
history; a multi-task tagger learns to mark those fragments, and the splicer
joins them back in tag order.
"""

__version__ = "0.1.0"
