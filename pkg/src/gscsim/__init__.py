"""Generative semantic communication simulator.

End-to-end wireless image transmission with a Swin-Transformer joint
source-channel codec, AWGN/Rayleigh channel models, diffusion-based
semantic fine-tuning at the receiver, classical and DeepJSCC baselines,
and a multi-user asynchronous orchestrator.
"""

__version__ = "0.1.0"
