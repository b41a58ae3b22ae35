"""
nlmodes Test Suite

Unit tests per module plus slow end-to-end runs (marked ``slow``).
"""
