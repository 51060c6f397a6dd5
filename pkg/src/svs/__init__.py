"""Desk-scale smart video surveillance system: AI nodes, server node, cloud node.

Perception stages are deterministic stand-ins driven by a synthetic scene
generator; all timing runs on a virtual clock so load, endurance and
end-to-end notification latency experiments are reproducible.
"""

__version__ = "0.1.0"
