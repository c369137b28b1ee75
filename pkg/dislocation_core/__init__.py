"""Multilayer dislocation dynamics: coupled solver, particle system, correctors and barrier checks."""
