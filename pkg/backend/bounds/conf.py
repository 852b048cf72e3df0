from django.conf import settings

DEFAULTS = {
    'VI_TOL': 1e-9,
    'VI_MAX_ITER': 100000,
    'DIVERGENCE_CAP': 1e9,
    'MC_RUNS': 10000,
    'MC_HORIZON': 200,
    'MC_SEED': 2024,
    'MC_PROBES': 20,
    'SAMPLES_PER_AXIS': 5,
    'BOUNDED_HORIZON_STEPS': 5,
    'SECTION_TIMES': [0.0, 0.7],
    'WIDTHS': [0.1, 0.05, 0.025],
    'THREADS': 1,
    'OUTPUT_DIR': 'output',
}


def bounds_setting(name):
    """Return ``settings.IMDP_BOUNDS[name]``, falling back to the documented default."""
    if name not in DEFAULTS:
        raise KeyError(f"Unknown IMDP_BOUNDS setting: {name}")
    overrides = getattr(settings, 'IMDP_BOUNDS', {}) or {}
    return overrides.get(name, DEFAULTS[name])
