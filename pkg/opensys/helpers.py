import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, Sequence, TypeVar

import numpy as np

DEBUG = int(os.getenv("DEBUG", default="0"))
VERSION = "0.1.0"

DEFAULT_SEED = 0
STOCHASTIC_TOL = 1e-9
EXACT_TOL = 1e-12
MAX_ENV_POINTS = int(os.getenv("OPENSYS_MAX_ENV", default=str(10**6)))
MAX_EXACT_TUPLES = 10**7
MAX_DEFECT_STATES = 20
# Monte-Carlo samples per RNG stream. Changing it changes every seeded estimate.
BLOCK_SIZE = 1024

T = TypeVar("T")


def default_thread_count() -> int:
  env_threads = os.getenv("OPENSYS_THREADS")
  if env_threads is not None and env_threads.strip().isdigit() and int(env_threads) > 0:
    return int(env_threads)
  return min(8, os.cpu_count() or 1)


def worker_pool(threads: Optional[int] = None) -> ThreadPoolExecutor:
  return ThreadPoolExecutor(max_workers=threads or default_thread_count(), thread_name_prefix="opensys_worker")


def block_generator(seed: int, stream: int, block: int) -> np.random.Generator:
  """One independent PCG64 stream per (seed, stream, block)."""
  return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(stream, block))))


def block_sizes(samples: int, block_size: int = BLOCK_SIZE) -> List[int]:
  full, rest = divmod(samples, block_size)
  return [block_size]*full + ([rest] if rest else [])


def map_blocks(fn: Callable[[int, int], T], samples: int, threads: Optional[int] = None) -> List[T]:
  """
  Runs fn(block_index, block_samples) over the fixed block decomposition of `samples`.
  Results come back in block order whatever the worker count.
  """
  sizes = block_sizes(samples)
  if DEBUG >= 2: print(f"Dispatching {samples} samples as {len(sizes)} blocks on {threads or default_thread_count()} workers")
  if len(sizes) <= 1 or (threads or default_thread_count()) == 1:
    return [fn(i, size) for i, size in enumerate(sizes)]
  with worker_pool(threads) as pool:
    return list(pool.map(lambda args: fn(*args), enumerate(sizes)))


def progress(iterable: Iterable[T], total: Optional[int] = None, desc: Optional[str] = None) -> Iterable[T]:
  if DEBUG >= 1:
    from tqdm import tqdm
    return tqdm(iterable, total=total, desc=desc)
  return iterable


def pretty_print_probability(p: float) -> str:
  if p == 0: return "0"
  if p == 1: return "1"
  if p < 1e-4: return f"{p:.2e}"
  return f"{p:.6f}".rstrip("0")


def format_vector(values: Sequence[float]) -> str:
  return "(" + ", ".join(pretty_print_probability(float(v)) if 0 <= v <= 1 else f"{float(v):.6g}" for v in values) + ")"


def clip_round_off(values: np.ndarray) -> np.ndarray:
  """
  Probabilities in [-tol, 0) that passed validation are round-off: set them to 0 and
  renormalise along the last axis. Arrays without negative entries come back unchanged.
  """
  values = np.array(values, dtype=np.float64)
  if not np.any(values < 0): return values
  clipped = np.clip(values, 0.0, None)
  if values.ndim == 1: return clipped/clipped.sum()
  negative = np.any(values < 0, axis=-1)
  values[negative] = clipped[negative]/clipped[negative].sum(axis=-1, keepdims=True)
  return values
