"""PROFL: privacy-preserving, Byzantine-robust federated aggregation.

A two-server pipeline built on a two-trapdoor additively homomorphic
cryptosystem: users upload encrypted fixed-point gradients, the servers
jointly run blinded distance computation, representative selection and
per-dimension outlier-filtered medians, and only the aggregated update
ever leaves the encrypted domain.  A plaintext fast path with identical
semantics backs desk-scale robustness experiments against poisoning
attacks.
"""

from .attacks import AttackConfig, BenignStats, apply_stealth, apply_untargeted, flip_labels
from .defense import AggregationResult, SecureAggregator, plaintext_aggregate, survivor_count
from .encoding import (
    DEFAULT_CLIP,
    DEFAULT_DEG,
    HeadroomError,
    check_headroom,
    decode_scalar,
    decode_vector,
    encode_scalar,
    encode_vector,
)
from .experiment import ExperimentConfig, emit_plots, run_experiment
from .paillier import (
    Ciphertext,
    KeyMismatchError,
    PaillierPublicKey,
    PaillierSecretKey,
    PartialCiphertext,
    SecretKeyShare,
    encrypt,
    full_decrypt,
    hom_add,
    hom_scale,
    key_split,
    keygen,
    part_dec1,
    part_dec2,
)
from .protocols import AssistingServer, PrimaryServer, pauta_lower_median, quickselect_smallest
from .simulation import FederatedSimulation, KeyMaterial, RoundMetrics, key_center_init
from .transport import CommLedger, Fabric, Message, PartyId

__all__ = [
    "AggregationResult",
    "AssistingServer",
    "AttackConfig",
    "BenignStats",
    "Ciphertext",
    "CommLedger",
    "DEFAULT_CLIP",
    "DEFAULT_DEG",
    "ExperimentConfig",
    "Fabric",
    "FederatedSimulation",
    "HeadroomError",
    "KeyMaterial",
    "KeyMismatchError",
    "Message",
    "PaillierPublicKey",
    "PaillierSecretKey",
    "PartialCiphertext",
    "PartyId",
    "PrimaryServer",
    "RoundMetrics",
    "SecretKeyShare",
    "SecureAggregator",
    "apply_stealth",
    "apply_untargeted",
    "check_headroom",
    "decode_scalar",
    "decode_vector",
    "emit_plots",
    "encode_scalar",
    "encode_vector",
    "encrypt",
    "flip_labels",
    "full_decrypt",
    "hom_add",
    "hom_scale",
    "key_center_init",
    "key_split",
    "keygen",
    "part_dec1",
    "part_dec2",
    "pauta_lower_median",
    "plaintext_aggregate",
    "quickselect_smallest",
    "run_experiment",
    "survivor_count",
]
