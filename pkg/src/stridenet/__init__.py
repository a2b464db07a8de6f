"""Stride-length estimation from foot-mounted IMU data.

A self-contained pipeline: synthetic gait generation, stride segmentation,
self-supervised reconstruction pretraining of a convolutional autoencoder,
and supervised multi-task fine-tuning (stride-length regression plus
run/walk classification), all on top of a small numpy-backed tensor engine
with reverse-mode differentiation.
"""

__version__ = "0.1.0"
