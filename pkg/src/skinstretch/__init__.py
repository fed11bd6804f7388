"""Simulation of a two-axis fingertip skin-stretch interface with a magnetic force sensor.

Modules: ``magnetics`` (dipole field, magnetometer quantization),
``elastomer`` (creep and hysteresis), ``actuation`` (lead-screw drives),
``plant`` (sensor and interface plants), ``calibration`` (cubic regression),
``characterization`` (hysteresis, creep, torsion), ``controller`` (filtered
PID loop), ``response`` (step metrics, chirp Bode), ``config`` and
``experiments`` (recipes), ``cli``.
"""

__version__ = "0.1.0"
