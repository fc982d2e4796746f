#!/usr/bin/env python3
"""
Configuration settings for the phase-space measurement simulator
"""

import math

# Experiment defaults (every key of an experiment file)
SIMULATION_CONFIG = {
    "scenario": "custom",
    "mode": "sse",
    # Units and measurement
    "hbar": 0.05,
    "s": 1.0,
    "gamma": None,
    "Gamma1": None,
    "Gamma2": None,
    # H = a p^2 + b x^2 + c x^4 + d x cos(omega t)
    "a": 5.0,
    "b": 5.0,
    "c": 1.0,
    "d": 0.0,
    "omega": 2.0 * math.pi,
    # Coherent start
    "x0": -2.0,
    "p0": 1.0,
    # Numerics
    "N": 256,
    "dt": 1e-4,
    "t_final": 4.0,
    "ensemble": 1,
    "snapshot_interval": None,
    "seed": None,
    "recenter_threshold": 1.0,
    "record_stride": 10,
    # Output
    "output_dir": "output",
    "trajectory_files": 10,
    "husimi_x_min": -3.0,
    "husimi_x_max": 3.0,
    "husimi_p_min": -3.0,
    "husimi_p_max": 3.0,
    "husimi_nx": 201,
    "husimi_np": 201,
    "workers": 4,
    "classical_compare": False,
    # povm-sample mode
    "sigma": 1.0,
    "n_samples": 10000,
    # poincare mode
    "strobe_period": 1.0,
    "n_strobes": 500,
    "poincare_seeds": 20,
}

MODES = (
    "sse",
    "sse-position-only",
    "sse-momentum-only",
    "lindblad",
    "classical",
    "poincare",
    "povm-sample",
)

_INTEGRABLE = {"a": 5.0, "b": 5.0, "c": 1.0, "d": 0.0}
_CHAOTIC = {"a": 5.0, "b": -8.0, "c": 1.0, "d": 15.0, "omega": 2.0 * math.pi}
_START = {"hbar": 0.05, "s": 1.0, "x0": -2.0, "p0": 1.0}

# Built-in scenarios. Unmeasured runs spread over the whole ring (fig1b) or the
# chaotic sea (fig2b), so they stay in the lab frame with a larger basis.
# Measured runs are squeezed up to V_x + V_p ~ 10 hbar in the moving frame,
# which puts a geometric tail tanh(r)^n on the Fock populations.
PRESETS = {
    "fig1b": {
        **_START,
        **_INTEGRABLE,
        "scenario": "fig1b",
        "mode": "sse",
        "gamma": 0.0,
        "t_final": 4.0,
        "N": 256,
        "recenter_threshold": None,
        "snapshot_interval": 1.0,
    },
    "fig1c": {
        **_START,
        **_INTEGRABLE,
        "scenario": "fig1c",
        "mode": "sse",
        "gamma": 1.0 / math.sqrt(2.0),
        "t_final": 4.0,
        "N": 256,
        "snapshot_interval": 1.0,
    },
    "fig1d": {
        **_START,
        **_INTEGRABLE,
        "scenario": "fig1d",
        "mode": "sse-position-only",
        "Gamma1": 1.0,
        "t_final": 4.0,
        "N": 256,
        "snapshot_interval": 1.0,
    },
    "fig2a": {
        **_START,
        **_CHAOTIC,
        "scenario": "fig2a",
        "mode": "poincare",
        "dt": 1e-3,
        "strobe_period": 1.0,
        "n_strobes": 500,
        "poincare_seeds": 20,
        "husimi_x_min": -5.0,
        "husimi_x_max": 5.0,
        "husimi_p_min": -8.0,
        "husimi_p_max": 8.0,
    },
    "fig2b": {
        **_START,
        **_CHAOTIC,
        "scenario": "fig2b",
        "mode": "sse",
        "gamma": 0.0,
        "t_final": 5.0,
        "N": 512,
        "recenter_threshold": None,
        "snapshot_interval": 1.0,
    },
    "fig2c": {
        **_START,
        **_CHAOTIC,
        "scenario": "fig2c",
        "mode": "sse",
        "gamma": 1.0 / math.sqrt(2.0),
        "t_final": 5.0,
        "N": 320,
        "snapshot_interval": 1.0,
    },
    "fig2d": {
        **_START,
        **_CHAOTIC,
        "scenario": "fig2d",
        "mode": "sse-momentum-only",
        "Gamma2": 1.0,
        "t_final": 5.0,
        "N": 320,
        "snapshot_interval": 1.0,
    },
    "fig3": {
        **_START,
        **_CHAOTIC,
        "scenario": "fig3",
        "mode": "sse",
        "hbar": 1e-6,
        "gamma": 1.0 / math.sqrt(2.0),
        "dt": 1e-5,
        "t_final": 5.0,
        "N": 320,
        "record_stride": 100,
        "classical_compare": True,
    },
}

# Descriptive names accepted wherever a preset name is
PRESET_ALIASES = {
    "quartic-unmeasured": "fig1b",
    "quartic-joint": "fig1c",
    "quartic-position": "fig1d",
    "duffing-poincare": "fig2a",
    "duffing-unmeasured": "fig2b",
    "duffing-joint": "fig2c",
    "duffing-momentum": "fig2d",
    "duffing-classical-limit": "fig3",
}

# Common Settings
COMMON_CONFIG = {
    # Logging
    "log_level": "INFO",
    "log_format": "%(asctime)s - %(levelname)s - %(message)s",
    "logs_dir": "logs",
    # Output tables
    "float_format": "%.12e",
    "delimiter": "\t",
    # Exit codes
    "exit_codes": {"ok": 0, "config": 2, "numeric": 3, "io": 4, "interrupted": 130},
}
