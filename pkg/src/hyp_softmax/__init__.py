"""hyp-softmax: hyperbolic softmax losses for embedding learning."""
