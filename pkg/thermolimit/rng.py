"""Counter-based, site-keyed randomness.

Every random number used for a configuration is a pure function of
(seed, lattice site, stream, counter), computed with a splitmix64-style
mixer on numpy ``uint64`` arrays. The draw at a site therefore does not
depend on the window, the sampling order or the thread count, which makes
lattice-shift stationarity an exact property of sampled configurations.

Labelled seeds for replicas and auxiliary streams come from
``np.random.SeedSequence``: the master seed is the entropy and the labels
form the spawn key, so replica ``i`` of a stream is the ``i``-th spawned
child. ``generator`` wraps a labelled sequence into a numpy Generator for
the samplers that are not site-keyed (group elements, geometric Monte
Carlo).

Key functions:
    site_uniforms: Uniforms in (0, 1) keyed by site, stream and counter.
    site_normals: Standard normals (Box-Muller over two uniform streams).
    derive_seed: 63-bit seed from a master seed and string/int labels.
    seed_sequence: SeedSequence for a master seed and labels.
    replica_seeds: Spawned per-replica seeds for one labelled stream.
    generator: numpy Generator for a labelled stream.
"""

from typing import Tuple, Union

import numpy as np

SeedLike = Union[int, np.integer, np.ndarray]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_COORD_SALT = [np.uint64((_GOLDEN * (d + 1)) & _MASK64) for d in range(3)]
_STREAM_SALT = 0xD1B54A32D192ED03
_TWO_M53 = 2.0 ** -53

# Stream identifiers
STREAM_DISPLACEMENT = 1
STREAM_CHARGE = 2
STREAM_MIXTURE = 3
STREAM_POISSON_COUNT = 4
STREAM_POISSON_POSITION = 5

# Per-attempt stream offset used when a draw has to be redone
ATTEMPT_STRIDE = 1000


def _mix64(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> _S30)
    z = z * _M1
    z = z ^ (z >> _S27)
    z = z * _M2
    return z ^ (z >> _S31)


def _as_u64(values) -> np.ndarray:
    """Reinterpret integers (possibly negative) as uint64 bit patterns."""
    arr = np.asarray(values)
    if arr.dtype == np.uint64:
        return np.atleast_1d(arr)
    if arr.dtype.kind == "u":
        return np.atleast_1d(arr.astype(np.uint64))
    return np.atleast_1d(np.ascontiguousarray(arr, dtype=np.int64)).view(np.uint64)


def _seed_u64(seed: SeedLike) -> np.ndarray:
    if isinstance(seed, np.ndarray):
        return _as_u64(seed)
    return np.atleast_1d(np.array(int(seed) & _MASK64, dtype=np.uint64))


def site_keys(seed: SeedLike, sites: np.ndarray) -> np.ndarray:
    """One 64-bit key per lattice site.

    Args:
        seed: Scalar seed, or a ``uint64`` array with one seed per site row.
        sites: Integer array of shape (n, 3).

    Returns:
        ``uint64`` array of shape (n,).
    """
    sites = np.asarray(sites, dtype=np.int64).reshape(-1, 3)
    with np.errstate(over="ignore"):
        h = _mix64(_seed_u64(seed) ^ np.uint64(_GOLDEN))
        h = np.broadcast_to(h, (sites.shape[0],)).copy()
        for d in range(3):
            h = _mix64(h ^ _mix64(_as_u64(sites[:, d]) + _COORD_SALT[d]))
    return h


def keyed_uniforms(keys: np.ndarray, stream: int, counters) -> np.ndarray:
    """Uniforms in the open interval (0, 1) for pre-computed site keys.

    ``counters`` broadcasts against ``keys[:, None]``; a 1-d counter array
    of length c gives an (n, c) result.
    """
    counters = np.asarray(counters)
    with np.errstate(over="ignore"):
        salt = _mix64(_as_u64(counters) + np.uint64((_STREAM_SALT * stream) & _MASK64))
        bits = _mix64(keys[:, None] ^ salt)
    return ((bits >> _S11).astype(np.float64) + 0.5) * _TWO_M53


def site_uniforms(seed: SeedLike, sites: np.ndarray, stream: int, counters) -> np.ndarray:
    """Uniforms in (0, 1) keyed by (seed, site, stream, counter)."""
    return keyed_uniforms(site_keys(seed, sites), stream, counters)


def normals_from_uniforms(u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """Box-Muller transform, one normal per uniform pair."""
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def site_normals(keys: np.ndarray, stream: int, count: int, attempt: int = 0) -> np.ndarray:
    """``count`` standard normals per key, shape (n, count)."""
    base = 2 * count * attempt
    counters = base + np.arange(2 * count)
    u = keyed_uniforms(keys, stream, counters)
    return normals_from_uniforms(u[:, 0::2], u[:, 1::2])


def _label_key(label: Union[str, int]) -> int:
    if isinstance(label, str):
        return int.from_bytes(label.encode("utf-8"), "little")
    return int(label) & _MASK64


def seed_sequence(master: int, *labels: Union[str, int]) -> np.random.SeedSequence:
    """SeedSequence for a labelled stream of ``master``."""
    spawn_key: Tuple[int, ...] = tuple(_label_key(label) for label in labels)
    return np.random.SeedSequence(entropy=int(master) & _MASK64, spawn_key=spawn_key)


def derive_seed(master: int, *labels: Union[str, int]) -> int:
    """Labelled 63-bit seed from a master seed.

    The same (master, labels) always gives the same seed; distinct labels
    give independent streams.
    """
    state = seed_sequence(master, *labels).generate_state(1, np.uint64)
    return int(state[0]) & ((1 << 63) - 1)


def replica_seeds(master: int, label: str, count: int, start: int = 0) -> np.ndarray:
    """Seeds for replicas ``start .. start+count-1`` of a labelled stream.

    Replica ``i`` is the ``i``-th child of ``seed_sequence(master, label).spawn``,
    so any ``start`` reproduces the matching slice of the full list.
    """
    parent = seed_sequence(master, label)
    seeds = np.empty(int(count), dtype=np.uint64)
    for offset in range(int(count)):
        child = np.random.SeedSequence(
            entropy=parent.entropy, spawn_key=parent.spawn_key + (start + offset,)
        )
        seeds[offset] = child.generate_state(1, np.uint64)[0]
    return seeds


def generator(master: int, *labels: Union[str, int]) -> np.random.Generator:
    """numpy Generator for a labelled stream of ``master``."""
    return np.random.default_rng(seed_sequence(master, *labels))
