"""Data-poisoning attacks on edge-LDP graph metric collection."""
