"""Throughput-adaptive ROI streaming at desk scale.

Lossless-ROI block-DCT codec, SSIM quality scoring, a cubic frame-size
regression, a soft actor-critic agent that picks ROI growth and background
quality per frame, and a socket harness that measures real end-to-end delay
against fixed baselines.
"""

__version__ = "0.1.0"
