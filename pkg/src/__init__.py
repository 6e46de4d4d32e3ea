"""Adversarial feature-map knowledge transfer at desk scale.

A numpy autodiff core, small convolutional networks and the training
loops that move a teacher's feature maps into a compact student.
"""

__version__ = "0.1.0"
__author__ = "Your Name"
