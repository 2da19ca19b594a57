"""Random market generators shared by the tests."""

from mts2.model import MarketParams


def random_market(rng, mu=1.0, load=(0.2, 0.95)):
    """A random valid market with total potential load in ``load`` * mu."""
    total = rng.uniform(*load) * mu
    share = rng.uniform(0.1, 0.9)
    R = rng.uniform(5.0, 15.0, 2)
    p = R * rng.uniform(0.1, 0.8, 2)
    return MarketParams(
        mu=mu, Lambda1=total * share, Lambda2=total * (1 - share),
        R1=R[0], R2=R[1], p1=p[0], p2=p[1],
        c1=rng.uniform(0.3, 8.0), c2=rng.uniform(0.3, 8.0),
        h1=rng.uniform(0.05, 1.0), h2=rng.uniform(0.05, 1.0),
    )
