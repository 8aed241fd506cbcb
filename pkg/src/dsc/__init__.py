"""A typechecker, DOT translator, and erasure backend for a family of
class-based calculi (FJ up to DS), selected per source file by a level
pragma."""

__version__ = "0.1.0"
