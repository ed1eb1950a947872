#!/usr/bin/env python3
"""Solve an exported .dat-s file with cvxopt and print the optimal value.

Usage: cross_check_sdpa.py program.dat-s
Prints "value: <float>" on success; exits nonzero otherwise.
"""
import sys

import numpy as np
from cvxopt import matrix, solvers


def read_sdpa(path):
    with open(path) as f:
        lines = [l.rstrip("\n") for l in f]
    body = [l for l in lines if not (l.startswith('"') or l.startswith("*"))]
    m = int(body[0].split()[0])
    sizes = [int(t) for t in body[2].replace(",", " ").split()]
    c = np.array([float(t) for t in body[3].split()])
    entries = []
    for l in body[4:]:
        t = l.split()
        if len(t) == 5:
            entries.append((int(t[0]), int(t[1]), int(t[2]), int(t[3]), float(t[4])))
    return m, sizes, c, entries


def main():
    m, sizes, c, entries = read_sdpa(sys.argv[1])
    mats = {}
    for (k, b, i, j, v) in entries:
        dim = abs(sizes[b - 1])
        key = (k, b)
        if key not in mats:
            mats[key] = np.zeros((dim, dim))
        mats[key][i - 1, j - 1] += v
        if i != j:
            mats[key][j - 1, i - 1] += v

    # the file encodes: min c'x  s.t.  sum_k x_k F_k - F_0 >= 0 (block diag)
    Gs, hs = [], []
    for b, sz in enumerate(sizes, start=1):
        dim = abs(sz)
        G = np.zeros((dim * dim, m))
        for k in range(1, m + 1):
            if (k, b) in mats:
                G[:, k - 1] = -mats[(k, b)].flatten()
        Gs.append(matrix(G))
        hs.append(matrix(-mats.get((0, b), np.zeros((dim, dim)))))

    solvers.options["show_progress"] = False
    solvers.options["maxiters"] = 200
    sol = solvers.sdp(matrix(c), Gs=Gs, hs=hs)
    if sol["status"] != "optimal":
        print("status:", sol["status"])
        return 2
    print("value: %.10f" % sol["primal objective"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
