"""Exact verification: belief-MDP enumeration and the combinatorial bandit abstraction."""
