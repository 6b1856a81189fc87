"""Deterministic stream derivation for Monte Carlo replications.

Replications are organized in fixed-size chunks; every random draw is
made by a generator keyed on (master seed, role, context, chunk, block).
The observation stream of replication r therefore depends only on the
master seed and r (through chunk r // CHUNK and row r % CHUNK), never on
the total replication count or on how chunks are distributed over
workers.  CHUNK and BLOCK are constants of the scheme: changing them
changes the streams.
"""

import numpy as np

CHUNK = 4096
BLOCK = 128

# role identifiers for independent stream families
ROLE_OVERSHOOT = 1
ROLE_ERRPROB = 2
ROLE_ESS = 3
ROLE_KL = 4


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must fit in an unsigned 64-bit integer")
    return seed


def block_rng(seed: int, role: int, ctx: int, chunk: int, block: int) -> np.random.Generator:
    key = (int(role), int(ctx), int(chunk), int(block))
    return np.random.default_rng(np.random.SeedSequence(entropy=check_seed(seed), spawn_key=key))


def n_chunks(reps: int) -> int:
    return (int(reps) + CHUNK - 1) // CHUNK
