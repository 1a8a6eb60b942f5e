"""Team ball-sport arena simulator and self-play PPO trainer."""

__version__ = "0.1.0"
