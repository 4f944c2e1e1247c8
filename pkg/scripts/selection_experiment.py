#!/usr/bin/env python3
"""Randomized selection study: scripted fleets under both strategies and
all three policies, reporting winner agreement with a brute-force oracle
recomputed from the query-cache audit entries.

Usage: python scripts/selection_experiment.py [trials] [seed]
"""

import random
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from helpers import add_scripted_agent, make_app, open_session  # noqa: E402
from oracles import oracle_winner  # noqa: E402
from lpar.embed import embed_text  # noqa: E402
from lpar.model import Rating  # noqa: E402
from lpar.runtime import Platform  # noqa: E402
from lpar.select import BROADCAST_ONLY, SEARCH_AND_MULTICAST, SelectionRequest  # noqa: E402

WORDS = (
    "pay bill balance atm branch card savings rate fee transfer loan mortgage "
    "account overdraft statement deposit cash exchange travel insurance"
).split()


def run_trial(rng: random.Random, strategy: str, policy: str) -> tuple[bool, int]:
    n = rng.randint(2, 10)
    platform = Platform()
    make_app(platform)
    for i in range(n):
        add_scripted_agent(
            platform, "app", f"a{i}",
            in_scope=rng.random() < 0.7,
            confidence=round(rng.random(), 3),
            latency_ms=rng.randint(1, 400),
            rating=rng.choice(list(Rating)),
            training=(" ".join(rng.sample(WORDS, 3)),),
        )
    session = open_session(platform)
    utterance = " ".join(rng.sample(WORDS, 3))
    outcome = platform.selector.run(SelectionRequest(
        query_id=platform.stores.allocate_query_id(),
        session_id=session.session_id,
        utterance=utterance,
        embedding=embed_text(utterance),
        scope_id="app",
        strategy=strategy,
        k=rng.randint(1, n),
        similarity_floor=-1.0,
        policy=policy,
    ))
    entry = platform.stores.get_queries(session.session_id)[-1]
    ratings = {d.agent_id: d.rating for d in platform.registry.agents_of("app")}
    expected = oracle_winner(entry.gathered, entry.policy_used, ratings)
    actual = outcome.winner[0] if outcome.winner else None
    return actual == expected, len(entry.gathered)


def main() -> int:
    trials = int(sys.argv[1]) if len(sys.argv) > 1 else 500
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 1
    rng = random.Random(seed)
    policies = ["highest_confidence", "rating_weighted", "fastest_eligible"]
    strategies = [BROADCAST_ONLY, SEARCH_AND_MULTICAST]
    agreements = 0
    gathered_total = 0
    started = time.monotonic()
    for t in range(trials):
        ok, gathered = run_trial(rng, strategies[t % 2], policies[t % 3])
        agreements += ok
        gathered_total += gathered
    elapsed = time.monotonic() - started
    print(f"trials:            {trials}")
    print(f"oracle agreement:  {agreements}/{trials}")
    print(f"responses/trial:   {gathered_total / trials:.2f}")
    print(f"wall time:         {elapsed:.2f}s ({1000 * elapsed / trials:.2f} ms/trial)")
    return 0 if agreements == trials else 1


if __name__ == "__main__":
    raise SystemExit(main())
