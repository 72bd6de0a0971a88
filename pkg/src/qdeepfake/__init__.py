"""GAN deepfake attacks on traffic-sign images and classical / hybrid quantum detectors."""

__version__ = "0.1.0"
