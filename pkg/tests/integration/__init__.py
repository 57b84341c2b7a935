"""Integration tests against the real MNIST files (need PNC_MNIST_DIR)."""
