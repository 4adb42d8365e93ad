#!/usr/bin/env python3
"""Write the 3D C5G7 (unrodded) quarter-core geometry as a moc3d deck.

Seven-group cross sections are the published benchmark values. Control
rods are not modelled: the top reflector holds moderator in every pin
position, including guide tubes above the inner UO2 assembly.
"""
import argparse
import pathlib

import yaml

PITCH = 1.26
RADIUS = 0.54
N = 17
FUEL_HEIGHT = 192.78
REFLECTOR_HEIGHT = 21.42

MATERIALS = {
    "uo2": {
        "sigma_t": [1.77949e-01, 3.29805e-01, 4.80388e-01, 5.54367e-01,
                    3.11801e-01, 3.95168e-01, 5.64406e-01],
        "nu_sigma_f": [2.005998e-02, 2.027303e-03, 1.570599e-02, 4.518301e-02,
                       4.334208e-02, 2.020901e-01, 5.257105e-01],
        "sigma_s": [
            [1.27537e-01, 4.23780e-02, 9.43740e-06, 5.51630e-09, 0, 0, 0],
            [0, 3.24456e-01, 1.63140e-03, 3.14270e-09, 0, 0, 0],
            [0, 0, 4.50940e-01, 2.67920e-03, 0, 0, 0],
            [0, 0, 0, 4.52565e-01, 5.56640e-03, 0, 0],
            [0, 0, 0, 1.25250e-04, 2.71401e-01, 1.02550e-02, 1.00210e-08],
            [0, 0, 0, 0, 1.29680e-03, 2.65802e-01, 1.68090e-02],
            [0, 0, 0, 0, 0, 8.54580e-03, 2.73080e-01],
        ],
    },
    "mox43": {
        "sigma_t": [1.78731e-01, 3.30849e-01, 4.83772e-01, 5.66922e-01,
                    4.26227e-01, 6.78997e-01, 6.82852e-01],
        "nu_sigma_f": [2.175300e-02, 2.535103e-03, 1.626799e-02, 6.547410e-02,
                       3.072409e-02, 6.666510e-01, 7.139904e-01],
        "sigma_s": [
            [1.28876e-01, 4.14130e-02, 8.22900e-06, 5.04050e-09, 0, 0, 0],
            [0, 3.25452e-01, 1.63950e-03, 1.59820e-09, 0, 0, 0],
            [0, 0, 4.53188e-01, 2.61420e-03, 0, 0, 0],
            [0, 0, 0, 4.57173e-01, 5.53940e-03, 0, 0],
            [0, 0, 0, 1.60460e-04, 2.76814e-01, 9.31270e-03, 9.16560e-09],
            [0, 0, 0, 0, 2.00510e-03, 2.52962e-01, 1.48500e-02],
            [0, 0, 0, 0, 0, 8.49480e-03, 2.65007e-01],
        ],
    },
    "mox70": {
        "sigma_t": [1.81323e-01, 3.34368e-01, 4.93785e-01, 5.91216e-01,
                    4.74198e-01, 8.33601e-01, 8.53603e-01],
        "nu_sigma_f": [2.381395e-02, 3.858689e-03, 2.413400e-02, 9.436622e-02,
                       4.576988e-02, 9.281814e-01, 1.043200e+00],
        "sigma_s": [
            [1.30457e-01, 4.17920e-02, 8.51050e-06, 5.13290e-09, 0, 0, 0],
            [0, 3.28428e-01, 1.64360e-03, 2.20170e-09, 0, 0, 0],
            [0, 0, 4.58371e-01, 2.53310e-03, 0, 0, 0],
            [0, 0, 0, 4.63709e-01, 5.47660e-03, 0, 0],
            [0, 0, 0, 1.76190e-04, 2.82313e-01, 8.72890e-03, 9.00160e-09],
            [0, 0, 0, 0, 2.27600e-03, 2.49751e-01, 1.31140e-02],
            [0, 0, 0, 0, 0, 8.86450e-03, 2.59529e-01],
        ],
    },
    "mox87": {
        "sigma_t": [1.83045e-01, 3.36705e-01, 5.00507e-01, 6.06174e-01,
                    5.02754e-01, 9.21028e-01, 9.55231e-01],
        "nu_sigma_f": [2.518600e-02, 4.739509e-03, 2.947805e-02, 1.122500e-01,
                       5.530301e-02, 1.074999e+00, 1.239298e+00],
        "sigma_s": [
            [1.31504e-01, 4.20460e-02, 8.69720e-06, 5.19380e-09, 0, 0, 0],
            [0, 3.30403e-01, 1.64630e-03, 2.60060e-09, 0, 0, 0],
            [0, 0, 4.61792e-01, 2.47490e-03, 0, 0, 0],
            [0, 0, 0, 4.68021e-01, 5.43300e-03, 0, 0],
            [0, 0, 0, 1.85970e-04, 2.85771e-01, 8.39730e-03, 8.92800e-09],
            [0, 0, 0, 0, 2.39160e-03, 2.47614e-01, 1.23220e-02],
            [0, 0, 0, 0, 0, 8.96810e-03, 2.56093e-01],
        ],
    },
    "fission_chamber": {
        "sigma_t": [1.26032e-01, 2.93160e-01, 2.84250e-01, 2.81020e-01,
                    3.34460e-01, 5.65640e-01, 1.17214e+00],
        "nu_sigma_f": [1.323401e-08, 1.434500e-08, 1.128599e-06, 1.276299e-05,
                       3.538502e-07, 1.740099e-06, 5.063302e-06],
        "sigma_s": [
            [6.61659e-02, 5.90700e-02, 2.83340e-04, 1.46220e-06, 2.06420e-08, 0, 0],
            [0, 2.40377e-01, 5.24350e-02, 2.49900e-04, 1.92390e-05, 2.98750e-06, 4.21400e-07],
            [0, 0, 1.83425e-01, 9.22880e-02, 6.93650e-03, 1.07900e-03, 2.05430e-04],
            [0, 0, 0, 7.90769e-02, 1.69990e-01, 2.58600e-02, 4.92560e-03],
            [0, 0, 0, 3.73400e-05, 9.97570e-02, 2.06790e-01, 2.44780e-02],
            [0, 0, 0, 0, 9.17420e-04, 3.16774e-01, 2.38760e-01],
            [0, 0, 0, 0, 0, 4.97930e-02, 1.09910e+00],
        ],
    },
    "guide_tube": {
        "sigma_t": [1.26032e-01, 2.93160e-01, 2.84240e-01, 2.80960e-01,
                    3.34440e-01, 5.65640e-01, 1.17215e+00],
        "sigma_s": [
            [6.61659e-02, 5.90700e-02, 2.83340e-04, 1.46220e-06, 2.06420e-08, 0, 0],
            [0, 2.40377e-01, 5.24350e-02, 2.49900e-04, 1.92390e-05, 2.98750e-06, 4.21400e-07],
            [0, 0, 1.83297e-01, 9.23970e-02, 6.94460e-03, 1.08030e-03, 2.05670e-04],
            [0, 0, 0, 7.88511e-02, 1.70140e-01, 2.58810e-02, 4.92970e-03],
            [0, 0, 0, 3.73330e-05, 9.97372e-02, 2.06790e-01, 2.44780e-02],
            [0, 0, 0, 0, 9.17260e-04, 3.16765e-01, 2.38770e-01],
            [0, 0, 0, 0, 0, 4.97920e-02, 1.09912e+00],
        ],
    },
    "water": {
        "sigma_t": [1.59206e-01, 4.12970e-01, 5.90310e-01, 5.84350e-01,
                    7.18000e-01, 1.25445e+00, 2.65038e+00],
        "sigma_s": [
            [4.44777e-02, 1.13400e-01, 7.23470e-04, 3.74990e-06, 5.31840e-08, 0, 0],
            [0, 2.82334e-01, 1.29940e-01, 6.23400e-04, 4.80020e-05, 7.44860e-06, 1.04550e-06],
            [0, 0, 3.45256e-01, 2.24570e-01, 1.69990e-02, 2.64430e-03, 5.03440e-04],
            [0, 0, 0, 9.10284e-02, 4.15510e-01, 6.37320e-02, 1.21390e-02],
            [0, 0, 0, 7.14370e-05, 1.39138e-01, 5.11820e-01, 6.12290e-02],
            [0, 0, 0, 0, 2.21570e-03, 6.99913e-01, 5.37320e-01],
            [0, 0, 0, 0, 0, 1.32440e-01, 2.48070e+00],
        ],
    },
}

CHI = [5.87910e-01, 4.11760e-01, 3.39060e-04, 1.17610e-07, 0.0, 0.0, 0.0]

GUIDE_TUBES = {
    (2, 5), (2, 8), (2, 11), (3, 3), (3, 13), (5, 2), (5, 5), (5, 8), (5, 11),
    (5, 14), (8, 2), (8, 5), (8, 11), (8, 14), (11, 2), (11, 5), (11, 8),
    (11, 11), (11, 14), (13, 3), (13, 13), (14, 5), (14, 8), (14, 11),
}
FISSION_CHAMBER = (8, 8)


# Upper-left quadrant of the MOX map; the rest follows by mirror symmetry.
# 1: 4.3%, 2: 7.0%, 3: 8.7%, 0: guide tube or fission chamber position.
MOX_QUADRANT = [
    "111111111",
    "122222222",
    "122220220",
    "122023333",
    "122233333",
    "120330330",
    "122333333",
    "122333333",
    "120330330",
]
MOX_PINS = {"1": "mox43_pin", "2": "mox70_pin", "3": "mox87_pin"}


def mox_tier(i, j):
    code = MOX_QUADRANT[min(i, N - 1 - i)][min(j, N - 1 - j)]
    return MOX_PINS[code]


def assembly(fuel_pin):
    rows = []
    for i in range(N):
        row = []
        for j in range(N):
            if (i, j) == FISSION_CHAMBER:
                row.append("fc_pin")
            elif (i, j) in GUIDE_TUBES:
                row.append("gt_pin")
            elif fuel_pin == "mox":
                row.append(mox_tier(i, j))
            else:
                row.append(fuel_pin)
        rows.append(" ".join(row))
    return rows


def build(axial_planes):
    materials = {}
    for name, xs in MATERIALS.items():
        entry = dict(xs)
        if "nu_sigma_f" in entry:
            entry["chi"] = CHI
        materials[name] = entry

    cells = {
        "uo2_pin": {"radii": [RADIUS], "materials": ["uo2", "water"]},
        "mox43_pin": {"radii": [RADIUS], "materials": ["mox43", "water"]},
        "mox70_pin": {"radii": [RADIUS], "materials": ["mox70", "water"]},
        "mox87_pin": {"radii": [RADIUS], "materials": ["mox87", "water"]},
        "gt_pin": {"radii": [RADIUS], "materials": ["guide_tube", "water"]},
        "fc_pin": {"radii": [RADIUS], "materials": ["fission_chamber", "water"]},
        "water_cell": {"materials": "water"},
    }
    assemblies = {
        "UO2": assembly("uo2_pin"),
        "MOX": assembly("mox"),
        "REF": [" ".join(["water_cell"] * N)] * N,
    }
    top = FUEL_HEIGHT + REFLECTOR_HEIGHT
    return {
        "materials": materials,
        "cells": cells,
        "assemblies": assemblies,
        "lattice": {
            "pitch": PITCH,
            "layout": [["UO2", "MOX", "REF"], ["MOX", "UO2", "REF"], ["REF", "REF", "REF"]],
        },
        "axial": {
            "planes": axial_planes,
            "overrides": [{
                "z_range": [FUEL_HEIGHT, top],
                "replace": {m: "water" for m in
                            ("uo2", "mox43", "mox70", "mox87", "fission_chamber", "guide_tube")},
            }],
        },
        "boundary": {
            "default": "vacuum",
            "x_min": "reflective",
            "y_max": "reflective",
            "z_min": "reflective",
        },
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("output", type=pathlib.Path)
    parser.add_argument("--fuel-slabs", type=int, default=3,
                        help="axial layers in the fuel region")
    parser.add_argument("--reflector-slabs", type=int, default=1)
    args = parser.parse_args()
    planes = [FUEL_HEIGHT * k / args.fuel_slabs for k in range(args.fuel_slabs + 1)]
    planes += [FUEL_HEIGHT + REFLECTOR_HEIGHT * k / args.reflector_slabs
               for k in range(1, args.reflector_slabs + 1)]
    planes = [round(p, 10) for p in planes]
    text = yaml.safe_dump(build(planes), sort_keys=False, default_flow_style=None, width=200)
    args.output.write_text("# Generated by tools/make_c5g7_deck.py\n" + text)


if __name__ == "__main__":
    main()
