"""Socket services for running the tiers as separate processes."""
