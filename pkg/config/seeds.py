"""
Pinned seeds for reference runs and the value grids swept by `sweep`.
"""

# `seed` and `data_seed` of every shipped config under configs/.
REFERENCE_SEEDS = {
    "init": 20240601,
    "data": 7,
}

SWEEP_AXES = {
    "context_length": [4, 8, 16, 32, 64],
    "data_fraction": [0.05, 0.10, 0.15, 0.20, 0.30, 0.50, 1.0],
    "few_shot": [1, 2, 4, 8, 16],
    "insert_position": ["front", "middle", "end"],
    "init_mode": ["random", "template"],
}

# Config key each sweep axis overrides.
SWEEP_KEYS = {
    "context_length": "context_length",
    "data_fraction": "fraction",
    "few_shot": "shots",
    "insert_position": "insert_position",
    "init_mode": "init_mode",
}
