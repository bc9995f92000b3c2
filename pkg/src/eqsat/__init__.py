"""Equilibrium-SAT public-key encryption.

Key generation plants a private assignment under which every public clause
has a fixed number of TRUE literals; ciphertexts are literal-count spectra of
randomly extracted clauses, decoded through the satisfiability measure.
"""

from .cipher import (
    Ciphertext,
    CiphertextBlock,
    decrypt_bit_m2,
    decrypt_block_m3,
    decrypt_block_m4,
    decrypt_message,
    encrypt_bit_m2,
    encrypt_block_m3,
    encrypt_block_m4,
    encrypt_message,
)
from .errors import (
    CorruptCiphertextError,
    EncryptionError,
    EqSatError,
    FormatError,
    GenerationError,
    MalformedClauseError,
    ParameterError,
    ShapeError,
)
from .keygen import generate_keypair, generate_keypair_divided, verify_keypair
from .model import (
    GroupLabel,
    Literal,
    LiteralSpectrum,
    Mode,
    Params,
    PrivateKey,
    PublicKey,
    build_spectrum,
    complement,
    measure,
    pair_differences,
    swap_pair,
)

__version__ = "0.1.0"
