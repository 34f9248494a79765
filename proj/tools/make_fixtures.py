#!/usr/bin/env python3
"""Regenerates fixtures/paper/*.json (tensor files, 1-based sorted labels)."""

import json
import pathlib
from fractions import Fraction
from itertools import combinations_with_replacement, permutations

OUT = pathlib.Path(__file__).resolve().parent.parent / "fixtures" / "paper"


def labels(n, d):
    return list(combinations_with_replacement(range(1, n + 1), d))


def from_vector(n, d, values):
    idx = labels(n, d)
    assert len(idx) == len(values), (n, d, len(values))
    return [(list(i), v) for i, v in zip(idx, values)]


def from_matrix(rows):
    n = len(rows)
    for i in range(n):
        for j in range(n):
            assert rows[i][j] == rows[j][i], "matrix must be symmetric"
    return n, 2, [([i, j], rows[i - 1][j - 1]) for i, j in labels(n, 2)]


def from_atoms(n, d, atoms, scale=Fraction(1)):
    out = []
    for idx in labels(n, d):
        s = Fraction(0)
        for weight, u in atoms:
            p = Fraction(weight)
            for i in idx:
                p *= u[i - 1]
            s += p
        out.append((list(idx), s * scale))
    return out


def from_slices(slices, unknown_marker=None):
    """slices[k][i][j] is the entry with labels (i+1, j+1, k+1)."""
    n = len(slices)
    entries, unknown = [], []
    for idx in labels(n, 3):
        vals = set()
        for i, j, k in set(permutations(idx)):
            vals.add(slices[k - 1][i - 1][j - 1])
        assert len(vals) == 1, f"slices are not symmetric at {idx}: {vals}"
        v = vals.pop()
        if v == unknown_marker:
            unknown.append(list(idx))
        else:
            entries.append((list(idx), v))
    return n, entries, unknown


def number(v):
    if isinstance(v, Fraction):
        return int(v) if v.denominator == 1 else float(v)
    return v


def write(name, n, d, entries, unknown=None, note=None):
    doc = {"n": n, "d": d, "entries": [{"idx": i, "val": number(v)} for i, v in entries]}
    if unknown is not None:
        doc["unknown"] = unknown
    if note:
        doc["note"] = note
    (OUT / name).write_text(json.dumps(doc, indent=1) + "\n")


def main():
    OUT.mkdir(parents=True, exist_ok=True)

    write("dehomogenization_small.json", 3, 3, from_vector(3, 3, [3, 3, 1, 2, -1, 0, 2, 2, 3, 3]),
          note="dehomogenization exposition tensor")

    A = [[6, 4, 1, 2, 2], [4, 5, 0, 1, 3], [1, 0, 3, 1, 2], [2, 1, 1, 1, 1], [2, 3, 2, 1, 5]]
    B = [[2, 1, 0, 0, 0], [1, 2, 1, 0, 0], [0, 1, 2, 2, 2], [0, 0, 2, 3, 3], [0, 0, 2, 3, 4]]
    C = [[1, 1, 2, 3, 4], [1, 1, 3, 2, 3], [2, 3, 3, 3, 3], [3, 2, 3, 1, 4], [4, 3, 3, 4, 5]]
    for tag, M in (("A", A), ("B", B), ("C", C)):
        n, d, e = from_matrix(M)
        write(f"membership_matrix_{tag}.json", n, d, e, note=f"CP matrix membership, matrix {tag}")

    F = Fraction
    write("membership_tensor_order6.json", 3, 6,
          from_atoms(3, 6, [(3, [0, 1, 0]), (1, [-1, 3, 1]), (3, [1, 2, 2]), (2, [2, 3, 2])]),
          note="order-6 tensor with one atom outside the nonnegative orthant")
    write("membership_tensor_order4.json", 4, 4,
          from_atoms(4, 4, [(7, [0, 1, 1, 0]), (5, [0, 2, 1, 0]), (6, [0, 0, 2, 2]), (7, [1, 2, 1, 1]),
                            (6, [1, 2, 0, 0])], F(1, 100)),
          note="order-4 CP tensor")
    write("membership_tensor_n5_d3.json", 5, 3,
          from_vector(5, 3, [4, 2, 3, 1, 4, 2, 2, 0, 2, 3, 0, 3, 1, 1, 4, 5, 4, 3, 3, 4, 2, 3, 3, 1, 3, 6, 2, 4, 2,
                             1, 4, 6, 4, 4, 7]),
          note="CP tensor given by its htms, n=5, d=3")
    write("membership_tensor_n4_d6.json", 4, 6,
          from_vector(4, 6, [3, 3, 4, 3, 3, 4, 3, 6, 4, 5, 3, 4, 3, 6, 4, 5, 10, 6, 6, 9, 3, 4, 3, 6, 4, 5, 10, 6,
                             6, 9, 18, 10, 8, 10, 17, 3, 4, 3, 6, 4, 5, 10, 6, 6, 9, 18, 10, 8, 10, 17, 34, 18, 12,
                             12, 18, 33, 9, 8, 6, 16, 5, 8, 38, 7, 7, 12, 100, 11, 9, 11, 20, 278, 19, 13, 13, 19,
                             36, 797, 36, 22, 18, 22, 36, 69]),
          note="CP tensor given by its htms, n=4, d=6")
    write("membership_tensor_order10.json", 4, 10,
          from_atoms(4, 10, [(1, [0, 1, 0, 1]), (1, [1, 1, 2, 1]), (1, [0, 1, 1, 1]), (1, [1, 2, 1, 0]),
                             (1, [0, 1, 1, 0]), (1, [1, 1, 0, 1]), (1, [0, 1, 0, 1]), (1, [2, 1, 0, 2]),
                             (1, [1, 0, 1, 1]), (1, [1, 1, 1, 2])], F(1, 100)),
          note="order-10 CP tensor (stretch instance)")

    Capprox = [[1.0, 2.0, 1.5, 0.0, 2.5], [2.0, 0.0, -1.0, 2.0, -2.5], [1.5, -1.0, -4.0, 3.0, 4.5],
               [0.0, 2.0, 3.0, -2.0, 1.0], [2.5, -2.5, 4.5, 1.0, 0.0]]
    n, d, e = from_matrix(Capprox)
    write("approximation_matrix.json", n, d, e, note="best CP approximation of a symmetric matrix")

    S = [
        [[3, 3, 1, -3], [3, 3, -1, -1], [1, -1, 3, 5], [-3, -1, 5, 3]],
        [[3, 3, -1, -1], [3, 1, 2, 1], [-1, 2, 0, 0], [-1, 1, 0, 1]],
        [[1, -1, 3, 5], [-1, 2, 0, 0], [3, 0, 2, -1], [5, 0, -1, 3]],
        [[-3, -1, 5, 3], [-1, 1, 0, 1], [5, 0, -1, 3], [3, 1, 3, -1]],
    ]
    n, e, _ = from_slices(S)
    write("approximation_tensor.json", n, 3, e, note="best CP approximation of an order-3 tensor")

    X = None
    Ccomp = [[X, 4, 1, 2, 2], [4, X, 0, 1, 3], [1, 0, X, 1, 2], [2, 1, 1, X, 1], [2, 3, 2, 1, X]]
    entries = []
    unknown = []
    for i, j in labels(5, 2):
        v = Ccomp[i - 1][j - 1]
        if v is None:
            unknown.append([i, j])
        else:
            entries.append(([i, j], v))
    write("completion_matrix.json", 5, 2, entries, unknown, note="CP matrix completion, unknown diagonal")

    T = [
        [[X, 3, 6, 5], [3, 3, X, 3], [6, X, 6, 4], [5, 3, 4, 5]],
        [[3, 3, X, 3], [3, X, 5, 5], [X, 5, 5, 4], [3, 5, 4, 5]],
        [[6, X, 6, 4], [X, 5, 5, 4], [6, 5, X, 7], [4, 4, 7, 7]],
        [[5, 3, 4, 5], [3, 5, 4, 5], [4, 4, 7, 7], [5, 5, 7, X]],
    ]
    n, e, unknown = from_slices(T, unknown_marker=X)
    write("completion_tensor.json", n, 3, e, unknown, note="CP completion of an order-3 tensor")

    H = [[1, -1, 1, 1, -1], [-1, 1, -1, 1, 1], [1, -1, 1, -1, 1], [1, 1, -1, 1, -1], [-1, 1, 1, -1, 1]]
    n, d, e = from_matrix(H)
    write("copositive_horn.json", n, d, e, note="Horn matrix")


if __name__ == "__main__":
    main()
