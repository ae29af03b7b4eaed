import random

import pytest

from railcbm.events import EVENT_KINDS, EventRecord


def random_payload(rng: random.Random, depth: int = 0) -> dict:
    """A random JSON-compatible payload with finite numbers only."""
    payload = {}
    for _ in range(rng.randint(1, 5)):
        key = "".join(rng.choices("abcdefghijklmnop_", k=rng.randint(1, 8)))
        roll = rng.random()
        if roll < 0.35:
            payload[key] = rng.uniform(-1e6, 1e6)
        elif roll < 0.55:
            payload[key] = rng.randint(-10_000, 10_000)
        elif roll < 0.7:
            payload[key] = "".join(rng.choices("xyzuvw-.:0123456789", k=rng.randint(0, 12)))
        elif roll < 0.8:
            payload[key] = rng.random() < 0.5
        elif roll < 0.9:
            payload[key] = None
        elif depth < 2 and roll < 0.95:
            payload[key] = random_payload(rng, depth + 1)
        else:
            payload[key] = [rng.uniform(-10, 10) for _ in range(rng.randint(0, 4))]
    return payload


def random_event(rng: random.Random, seq: int) -> EventRecord:
    return EventRecord(
        seq=seq,
        t=rng.randint(0, 100_000),
        kind=rng.choice(EVENT_KINDS),
        payload=random_payload(rng),
    )


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20260810)
