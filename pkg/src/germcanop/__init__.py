"""Complex Lagrangian germs and the first-order Maslov canonical operator."""
__version__ = "0.1.0"
