"""Frozen expected values.

Every number here was fixed before the implementation it checks: small
hand-derived facts, the Catalan numbers, and counts produced by the
brute-force achievability search (which never builds an automaton).
"""

# "ends with ab" over {a, b}: 3-state NFA, 3-state DFA.
N1_DFA_STATES = 3
N1_PROFILE = [1, 1, 1]
N1_AVG_SUBSET = (5, 3)  # {0}, {0,1}, {0,2}
N1_MAX_SUBSET = 2

# k-th symbol from the end is "a": the minimal DFA has 2**k states.
KTH_FROM_END_DFA_STATES = {1: 2, 2: 4, 3: 8, 4: 16, 5: 32}

CATALAN = [1, 2, 5, 14, 42, 132]  # n = 1..6
REJECTED_BY_STACK = (4, 1, 5, 3, 2)

RANK_ENCODE = {
    (2, 4, 1, 3): (1, 2, 0, 0),
    (4, 1, 5, 3, 2): (3, 0, 2, 1, 0),
    (1, 2, 3): (0, 0, 0),
    (3, 2, 1): (2, 1, 0),
}

# Achievable permutations of a 3-cell buffer feeding a depth-k stack, n = 1..7.
BUFFER3_COUNTS = {
    1: [1, 2, 6, 18, 54, 162, 486],
    2: [1, 2, 6, 24, 96, 384, 1536],
    3: [1, 2, 6, 24, 120, 600, 3000],
    4: [1, 2, 6, 24, 120, 720, 4320],
}

# Subset-construction output size (drop policy) for the 3-buffer + k-stack NFA.
BUFFER3_DFA_STATES = {1: 4, 2: 5, 3: 18, 4: 45}
BUFFER3_K4_PROFILE = [1, 6, 3, 10, 11, 9, 4, 1]
