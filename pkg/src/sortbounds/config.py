"""Run configuration shared by the forward and backward searches."""

from dataclasses import dataclass, field
from fractions import Fraction
import math
import os

MODES = ("forward", "backward", "bidirectional")

N_MAX = 31

# Parameters known to work per element count: (efficiency bandwidth,
# number of full backward layers).  Used as CLI defaults when --n matches;
# other n fall back to bandwidth 0 (advice then covers only full layers).
DEFAULT_PARAMETERS: dict[int, tuple[Fraction, int]] = {
    11: (Fraction(5, 100), 4),
    12: (Fraction(5, 100), 5),
    13: (Fraction(5, 100), 6),
    14: (Fraction(12, 100), 9),
    15: (Fraction(15, 100), 10),
    16: (Fraction(20, 100), 11),
    17: (Fraction(24, 100), 14),
    18: (Fraction(19, 100), 13),
    19: (Fraction(1, 100), 8),
    22: (Fraction(0), 0),
    28: (Fraction(0), 0),
}

SPILL_DIR_ENV = "SORTBOUNDS_SPILL_DIR"


@dataclass
class SearchConfig:
    """Parameters for one search run.

    budget is the total comparison budget C; levels run 0..C.  bandwidth
    widens the efficiency threshold of partial backward layers above the
    exact-search minimum; it must stay below the perfect-sort efficiency
    so that E_thr < 2 * E_tot.
    """

    n: int
    budget: int
    mode: str = "bidirectional"
    full_layers: int = 0
    bandwidth: Fraction = Fraction(0)
    bandwidth_overrides: dict[int, Fraction] = field(default_factory=dict)
    chunk_limit: int = 1 << 20
    threads: int = 1
    store_cap: int = 1 << 26
    spill_dir: str | None = None
    advice_in: str | None = None
    advice_out: str | None = None
    pair_heuristic: bool = True
    validate: bool = False

    def __post_init__(self) -> None:
        if not (1 <= self.n <= N_MAX):
            raise ValueError(f"n must be in 1..{N_MAX}, got {self.n}")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.mode == "backward":
            # A backward-only run must keep every layer complete to decide
            # sortability on its own.
            self.full_layers = self.budget + 1
        if self.full_layers < 0:
            raise ValueError("full_layers must be >= 0")
        if self.full_layers > self.budget + 1:
            self.full_layers = self.budget + 1
        if self.chunk_limit < 1:
            raise ValueError("chunk_limit must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        e_tot = self.total_efficiency()
        for bw in [self.bandwidth, *self.bandwidth_overrides.values()]:
            if bw < 0:
                raise ValueError("bandwidth must be >= 0")
            if bw >= e_tot:
                raise ValueError(
                    f"bandwidth {bw} >= E_tot {e_tot}; the threshold must "
                    f"satisfy E_tot <= E_thr < 2*E_tot"
                )
        if self.spill_dir is None:
            self.spill_dir = os.environ.get(SPILL_DIR_ENV) or None

    def total_efficiency(self) -> Fraction:
        """E_tot = n! / 2^C, the efficiency of a perfect C-comparison sort."""
        return Fraction(math.factorial(self.n), 1 << self.budget)

    def bandwidth_at(self, level: int) -> Fraction:
        return self.bandwidth_overrides.get(level, self.bandwidth)

    def threshold_at(self, level: int) -> Fraction:
        """E_thr for a partial backward layer at the given level."""
        return self.total_efficiency() + self.bandwidth_at(level)

    def min_extensions_at(self, level: int) -> int:
        """Smallest extension count admitted at a partial backward layer.

        E(P) = n!/(2^c * e(P)) <= E_thr  <=>  e(P) >= n! * den / (2^c * num),
        evaluated exactly in integers to keep the boundary reproducible.
        """
        thr = self.threshold_at(level)
        num = thr.numerator * (1 << level)
        return -(-math.factorial(self.n) * thr.denominator // num)

    def first_full_level(self) -> int:
        """Lowest level whose backward layer is complete."""
        return self.budget - self.full_layers + 1

    def shard_count(self) -> int:
        target = max(4 * self.threads, 1)
        return 1 << (target - 1).bit_length()
