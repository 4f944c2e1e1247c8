#!/usr/bin/env python3
"""Prints the pairwise centroid similarity matrix for the banking fixture
fleet: a sanity check that the 64-dim hashed embedding keeps the agents'
training sets separable enough for routing.

Usage: python scripts/centroid_separation.py [config.json]
"""

import sys
from pathlib import Path

from lpar.embed import cosine
from lpar.gateway.config import build_platform

DEFAULT_CONFIG = Path(__file__).resolve().parent.parent / "fixtures" / "banking.json"


def main() -> int:
    config = Path(sys.argv[1]) if len(sys.argv) > 1 else DEFAULT_CONFIG
    platform = build_platform(config)
    app_id = platform.registry.app_ids()[0]
    members = [d for d in platform.registry.agents_of(app_id) if d.centroid.sample_count > 0]
    members.sort(key=lambda d: d.agent_id)
    width = max(len(d.agent_id) for d in members) + 2
    print(" " * width + "".join(f"{d.agent_id:>{width}}" for d in members))
    worst = 1.0
    for a in members:
        row = [f"{a.agent_id:<{width}}"]
        for b in members:
            sim = cosine(a.centroid.embedding, b.centroid.embedding)
            row.append(f"{sim:>{width}.3f}")
            if a.agent_id != b.agent_id:
                worst = min(worst, 1.0 - sim)
        print("".join(row))
    print(f"\nsmallest off-diagonal separation (1 - cosine): {worst:.3f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
