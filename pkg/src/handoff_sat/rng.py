"""Portable seeded PRNG.

SplitMix64: the state is a 64-bit counter advanced by the golden-ratio
increment 0x9E3779B97F4A7C15, and each output is the counter passed through
the fixed mixing function below.  Every derived sampler uses only integer
arithmetic or exactly-representable doubles, so streams are identical on
every platform and in every language that follows the same recipe.
"""

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def random(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def open_unit(self) -> float:
        """Uniform double in the open interval (0, 1)."""
        return ((self.next_u64() >> 11) + 0.5) * (1.0 / (1 << 53))

    def randbelow(self, n: int) -> int:
        """Unbiased integer in [0, n) by rejection sampling."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi]."""
        return lo + self.randbelow(hi - lo + 1)

    def bernoulli(self, p: float) -> bool:
        return self.random() < p

    def geometric(self, p: float) -> int:
        """Number of Bernoulli(p) trials up to and including the first success (support 1, 2, ...)."""
        k = 1
        while not self.bernoulli(p):
            k += 1
        return k

    def sample(self, n: int, k: int) -> list[int]:
        """k distinct integers from range(n), via a partial Fisher-Yates shuffle."""
        if not 0 <= k <= n:
            raise ValueError(f"cannot sample {k} of {n}")
        pool = list(range(n))
        for i in range(k):
            j = i + self.randbelow(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def uniform(self, lo: float, hi: float) -> float:
        """Uniform double strictly inside (lo, hi)."""
        return lo + (hi - lo) * self.open_unit()
