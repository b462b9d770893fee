"""Compiled log-space recursions for the HMM engine."""
import numpy as np
from numba import njit


@njit(cache=True)
def forward(log_pi, A, logB):
    K, d = logB.shape
    la = np.empty((K, d))
    for j in range(d):
        la[0, j] = log_pi[j] + logB[0, j]
    for t in range(1, K):
        m = -np.inf
        for i in range(d):
            if la[t - 1, i] > m:
                m = la[t - 1, i]
        if m == -np.inf:
            return la, t
        for j in range(d):
            acc = 0.0
            for i in range(d):
                acc += np.exp(la[t - 1, i] - m) * A[i, j]
            la[t, j] = (np.log(acc) if acc > 0 else -np.inf) + m + logB[t, j]
    return la, -1


@njit(cache=True)
def backward(A, logB):
    K, d = logB.shape
    lb = np.zeros((K, d))
    v = np.empty(d)
    for t in range(K - 2, -1, -1):
        m = -np.inf
        for j in range(d):
            v[j] = logB[t + 1, j] + lb[t + 1, j]
            if v[j] > m:
                m = v[j]
        for i in range(d):
            if m == -np.inf:
                lb[t, i] = -np.inf
                continue
            acc = 0.0
            for j in range(d):
                acc += A[i, j] * np.exp(v[j] - m)
            lb[t, i] = (np.log(acc) if acc > 0 else -np.inf) + m
    return lb


@njit(cache=True)
def viterbi(log_pi, logA, logB):
    """Argmax path; strict '>' keeps the lowest index on ties."""
    K, d = logB.shape
    back = np.zeros((K, d), dtype=np.int64)
    score = np.empty(d)
    new = np.empty(d)
    for j in range(d):
        score[j] = log_pi[j] + logB[0, j]
    for t in range(1, K):
        for j in range(d):
            best = 0
            bv = score[0] + logA[0, j]
            for i in range(1, d):
                c = score[i] + logA[i, j]
                if c > bv:
                    bv = c
                    best = i
            back[t, j] = best
            new[j] = bv + logB[t, j]
        for j in range(d):
            score[j] = new[j]
    states = np.empty(K, dtype=np.int64)
    last = 0
    for j in range(1, d):
        if score[j] > score[last]:
            last = j
    states[K - 1] = last
    for t in range(K - 1, 0, -1):
        states[t - 1] = back[t, states[t]]
    return states, score[last]
