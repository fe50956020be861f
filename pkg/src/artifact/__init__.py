"""Zero- and low-temperature Glauber dynamics on finite grids, treated as
a storage channel: stable-state census, absorption paths, droplet erosion,
stripe and droplet codes, and capacity estimates.
"""

from .errors import (EXIT_CONFIG, EXIT_DEFECT, EXIT_GEOMETRY, EXIT_OK,
                     ConfigError, DefectError, GeometryError)
from .lattice import (FREE, HONEYCOMB, MINUS_FRAME, SQUARE, Configuration,
                      Lattice, build_honeycomb, build_square,
                      lattice_from_descriptor, local_counts, random_config)
from .dynamics import (DynamicsParams, EventLog, PER_SITE, PER_SYSTEM,
                       TIMEOUT, coupled_run, energy, flip_rate,
                       hitting_time, minus_update_prob, phi, run_continuous,
                       run_discrete, step_discrete, zero_temp_flip_prob)
from .stability import (HORIZONTAL, UNIFORM, VERTICAL, HopfCounts,
                        SiteClassification, StripeDescription, absorb_path,
                        census_rows, classify_sites, config_from_stripes,
                        count_stripe_descriptions, distinct_striped_count,
                        enumerate_stable, expand_component, fibonacci,
                        hopf_counts, is_stable, is_striped,
                        is_striped_relaxed, striped_count_formula)
from .codecs import (BetaStripeCodec, DropletCodec, HoneycombCodec,
                     StripeCodec, as_bits, bits_to_hex, field_droplet_codec,
                     hex_to_bits, make_codec)
from . import experiments

__version__ = "0.1.0"

__all__ = [
    "EXIT_OK", "EXIT_CONFIG", "EXIT_GEOMETRY", "EXIT_DEFECT",
    "ConfigError", "GeometryError", "DefectError",
    "SQUARE", "HONEYCOMB", "FREE", "MINUS_FRAME",
    "Lattice", "Configuration", "build_square", "build_honeycomb",
    "lattice_from_descriptor", "local_counts", "random_config",
    "DynamicsParams", "EventLog", "PER_SITE", "PER_SYSTEM", "TIMEOUT",
    "phi", "zero_temp_flip_prob", "minus_update_prob", "flip_rate",
    "energy", "step_discrete", "run_discrete", "run_continuous",
    "hitting_time", "coupled_run",
    "HORIZONTAL", "VERTICAL", "UNIFORM",
    "SiteClassification", "classify_sites", "is_stable",
    "StripeDescription", "config_from_stripes", "is_striped",
    "is_striped_relaxed", "fibonacci", "striped_count_formula",
    "distinct_striped_count", "count_stripe_descriptions",
    "enumerate_stable", "expand_component", "absorb_path", "HopfCounts",
    "hopf_counts", "census_rows",
    "StripeCodec", "DropletCodec", "field_droplet_codec", "BetaStripeCodec",
    "HoneycombCodec", "as_bits", "bits_to_hex", "hex_to_bits", "make_codec",
    "experiments",
    "__version__",
]
