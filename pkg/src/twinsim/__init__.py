"""Device-free tracking over coupled passive-tag pairs.

Subsystems: near-field coupling model (`coupling`), virtual warehouse and
event model (`env`), priority polling (`scheduler`), coarse localization
(`locate`), fingerprint + particle-filter tracking (`tracker`), scenario
files and CLI harness (`scenario`, `cli`).
"""

__version__ = "0.1.0"
