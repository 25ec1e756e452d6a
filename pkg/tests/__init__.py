"""Test package for hyp-softmax."""
