"""Integrable two-step Floquet exclusion processes and their fused generalisations."""
