"""Tests for the aTCWS verifier."""
