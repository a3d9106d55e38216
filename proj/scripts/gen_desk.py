#!/usr/bin/env python3
"""Generate the desk scenarios under scenarios/ and check their invariants.

Utilities share a quantized sum-rate term so every user has the same
unique best profile; small user-specific dips elsewhere keep the tables
distinct. Everything is exact (fractions.Fraction).
"""
import itertools
import json
import math
import pathlib
from fractions import Fraction as F

OUT = pathlib.Path(__file__).resolve().parent.parent / "scenarios"

N, BANDS, Q, BUDGET, NOISE = 3, 2, [F(0), F(1), F(2)], F(2), F(1)


def bundles(levels, bands, budget):
    return [b for b in itertools.product(levels, repeat=bands) if sum(b) <= budget]


def gains():
    g = [[[F(0)] * BANDS for _ in range(N)] for _ in range(N)]
    for tx in range(N):
        for rx in range(N):
            for b in range(BANDS):
                if tx == rx:
                    g[tx][rx][b] = F(1) if b == 0 else F(3, 4)
                else:
                    g[tx][rx][b] = F(1, 4 + ((tx + 2 * rx + b) % 3))
    return g


def profiles(bs):
    # user 1 most significant, 1-based
    return list(itertools.product(range(len(bs)), repeat=N))


def sum_rate(bs, prof, g):
    total = 0.0
    for i in range(N):
        for b in range(BANDS):
            interference = NOISE + sum(g[j][i][b] * bs[prof[j]][b] for j in range(N) if j != i)
            total += math.log2(1 + float(g[i][i][b] * bs[prof[i]][b] / interference))
    return total


def fstr(x):
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def desk_tables(bs, g):
    shared = [F(round(sum_rate(bs, p, g) * 1000), 1000) for p in profiles(bs)]
    best = max(range(len(shared)), key=lambda k: (shared[k], -k))
    tables = []
    for i in range(N):
        row = []
        for k, s in enumerate(shared):
            dip = F(0) if k == best else F((k * (7 + 3 * i)) % 11 + 1, 100000)
            row.append(F(1, 10) + s - dip)
        tables.append(row)
    return tables, best


def gain_json(g):
    return [[[fstr(x) for x in band] for band in row] for row in g]


def write(name, doc):
    (OUT / name).write_text(json.dumps(doc, indent=1) + "\n")


def main():
    bs = bundles(Q, BANDS, BUDGET)
    assert len(bs) == 6 and len(bs) ** N == 216
    g = gains()
    tables, best = desk_tables(bs, g)
    for t in tables:
        top = max(t)
        assert [k for k, v in enumerate(t) if v == top] == [best], "argmax must be common and unique"
        assert min(t) >= 0
    base = {
        "num_users": N,
        "num_bands": BANDS,
        "quant_levels": [fstr(q) for q in Q],
        "power_budget": fstr(BUDGET),
        "noise_half_density": fstr(NOISE),
        "gains": gain_json(g),
    }
    write("desk.json", {
        **base,
        "utilities": [{"type": "quasi_linear_table", "values": [fstr(v) for v in t]} for t in tables],
        "grid": {"pi_step": "1/2", "pi_max": "1"},
        "measurement": {"pilot_power": "1", "behaviors": [{"type": "honest"}] * N},
        "seed": 20260101,
    })

    # Opposed preferences: user i wants only its own bundle loud.
    opposed = []
    for i in range(N):
        row = []
        for p in profiles(bs):
            own = sum(bs[p[i]])
            others = sum(sum(bs[p[j]]) for j in range(N) if j != i)
            row.append(F(1) + own - F(1, 2) * others)
        opposed.append(row)
    shift = -min(min(r) for r in opposed)
    write("opposed.json", {
        **base,
        "utilities": [{"type": "quasi_linear_table", "values": [fstr(v + shift) for v in r]} for r in opposed],
        "grid": {"pi_step": "1/2", "pi_max": "1"},
        "seed": 7,
    })

    write("sir.json", {
        **base,
        "utilities": [{"type": "sir_quasi_linear", "weights": [1.0, 0.5]} for _ in range(N)],
        "grid": {"pi_step": "1/2", "pi_max": "1"},
        "measurement": {
            "pilot_power": "2",
            "behaviors": [{"type": "honest"}, {"type": "report_cheat", "factor": ["2", "1"], "offset": ["0", "0"],
                                               "partners": [3]}, {"type": "honest"}],
        },
        "seed": 11,
    })

    write("non_quasi_linear.json", {
        **base,
        "utilities": [{"type": "non_quasi_linear", "values": [fstr(v) for v in t], "beta": "1"} for t in tables],
        "grid": {"pi_step": "1/2", "pi_max": "1"},
        "seed": 3,
    })

    single = {
        "num_users": 3, "num_bands": 1, "quant_levels": ["0"], "power_budget": "1",
        "noise_half_density": "1", "gains": [[["1"], ["1/2"], ["1/2"]], [["1/2"], ["1"], ["1/2"]],
                                             [["1/2"], ["1/2"], ["1"]]],
        "utilities": [{"type": "quasi_linear_table", "values": [str(i + 1)]} for i in range(3)],
        "grid": {"pi_step": "1", "pi_max": "2"},
    }
    write("single_profile.json", single)

    two = {
        "num_users": 2, "num_bands": 1, "quant_levels": ["0", "1"], "power_budget": "1",
        "noise_half_density": "1", "gains": [[["1"], ["1/2"]], [["1/2"], ["1"]]],
        "utilities": [{"type": "quasi_linear_table", "values": ["1", "2", "3", "4"]} for _ in range(2)],
    }
    write("two_users.json", two)

    write("psi_zero_price.json", {"allocation": best + 1, "prices": ["0", "0", "0"]})
    write("psi_priced.json", {"allocation": 5, "prices": ["-1/3", "-1/3", "2/3"]})

    # Misspelled grid key: loading must fail and name it.
    write("malformed.json", {**base, "utilities": [{"type": "quasi_linear_table", "values": [fstr(v) for v in t]}
                                                for t in tables], "grid": {"pi_stride": "1"}})
    print(f"bundles={len(bs)} G_N={len(bs) ** N} common argmax k*={best + 1}")


if __name__ == "__main__":
    main()
