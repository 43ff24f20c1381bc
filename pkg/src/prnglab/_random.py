"""SplitMix64: the only source of randomness used by the generators."""

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Deterministic 64-bit generator with rejection-sampled bounded draws.

    ``position`` counts raw 64-bit outputs consumed so far.
    """

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self.state = self.seed
        self.position = 0

    @classmethod
    def for_stream(cls, seed: int, stream: int) -> "SplitMix64":
        # independent child stream keyed by (seed, stream index)
        return cls(mix64((seed ^ mix64((stream + 1) * GOLDEN_GAMMA & MASK64)) & MASK64))

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        self.position += 1
        return mix64(self.state)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n <= 0:
            raise ValueError("bound must be positive")
        if n == 1:
            return 0
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            z = self.next_u64()
            if z < limit:
                return z % n

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in the closed range [lo, hi]."""
        return lo + self.below(hi - lo + 1)

    def sample(self, population, k: int) -> list:
        """k distinct items from a sized sequence (partial Fisher-Yates)."""
        pool = list(population)
        if k > len(pool):
            raise ValueError("sample larger than population")
        for i in range(k):
            j = i + self.below(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]
