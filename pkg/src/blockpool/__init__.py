"""Byte-level seq2seq toolkit: subword-delimited downsampling, block-causal
transformers, and a variable-length two-step upsampling decoder."""

__version__ = "0.1.0"
