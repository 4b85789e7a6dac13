"""Token vocabulary: every two-byte value plus two specials."""

NUM_BYTE_PAIRS = 65536
PAD_ID = 65536
MASK_ID = 65537
VOCAB_SIZE = 65538
