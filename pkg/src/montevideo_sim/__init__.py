"""Real-clock quantum mechanics simulations: decoherence, revivals and undecidability."""

__version__ = "0.1.0"
