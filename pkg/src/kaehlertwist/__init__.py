"""Kähler geometry residual toolkit."""
