"""In-process multi-agent conversation platform.

A message bus carries user queries to a fleet of specialist agents; a
selection layer elects the best responder per query (scatter to everyone,
or pre-filter by centroid similarity and multicast); sessions bind to the
winning agent until it bows out, and hand over to a human on defined
triggers.
"""

__version__ = "0.1.0"
