"""Regenerate the shipped scenario files under scenarios/.

Values use the natural units of the case descriptions (degrees, km/h);
the schema requires the tags either way.  Run from the repo root:

    python3 scripts/gen_scenarios.py
"""

import json
import math
import pathlib

OUT = pathlib.Path(__file__).resolve().parent.parent / "scenarios"


def q(value, unit):
    return {"value": value, "unit": unit}


def rect(x0, x1, y0, y1):
    return {
        "type": "polytope",
        "A": [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
        "b": [x1, -x0, y1, -y0],
        "V": [[x1, x1, x0, x0], [y1, y0, y0, y1]],
    }


def circle(radius, cx, cy):
    k = 1.0 / radius**2
    return {"type": "ellipsoid", "E": [[k, 0.0], [0.0, k]], "e": [cx, cy]}


def state(x, y, yaw_deg, speed_kmh, steer_deg=0.0, trailer_yaw_deg=None):
    node = {
        "x": q(x, "m"), "y": q(y, "m"), "yaw": q(yaw_deg, "deg"),
        "speed": q(speed_kmh, "km/h"), "steer": q(steer_deg, "deg"),
    }
    if trailer_yaw_deg is not None:
        node["trailer_yaw"] = q(trailer_yaw_deg, "deg")
    return node


CAR_BODY = rect(-1.0, 3.6, -1.0, 1.0)
PARKING_CANVAS = rect(-6.0, 10.0, -10.0, 10.0)
SLAB = rect(-6.0, 7.0, -10.0, -3.0)
PARKING_OBSTACLES = [
    SLAB,                        # parking row below the aisle
    rect(-6.0, -4.0, -3.0, 10.0),  # wall along the left edge
    rect(2.0, 10.0, 6.0, 10.0),    # shelf along the top right
    rect(-3.0, 0.0, 3.0, 6.0),     # block in the upper left quadrant
]

CAR_MODEL = {
    "wheelbase": q(2.6, "m"),
    "yaw_bound": q(180.0, "deg"),
    "v_min": q(-5.0, "km/h"), "v_max": q(5.0, "km/h"),
    "steer_bound": q(40.0, "deg"),
    "a_min": q(-1.0, "m/s^2"), "a_max": q(1.0, "m/s^2"),
    "steer_rate_bound": q(5.0, "deg/s"),
}


def parking_single_car(n_obstacles):
    # the three- and four-obstacle layouts have degenerate multipliers at
    # the optimum (redundant planes), so their stationarity bar is the
    # engineering tolerance; feasibility certification is unaffected
    solver = ({"tol_feas": 1e-06, "tol_opt": 1e-03} if n_obstacles >= 3
              else {"tol_feas": 1e-08})
    return {
        "schema_version": 1,
        "name": f"parking_single_car_{n_obstacles}obs",
        "model": CAR_MODEL,
        "body_parts": [{"shape": CAR_BODY, "attachment": "tractor"}],
        "obstacles": [{"shape": s} for s in PARKING_OBSTACLES[:n_obstacles]],
        "canvas": [PARKING_CANVAS],
        "start": state(0.0, 0.0, 0.0, 0.0),
        "goal": state(8.5, -7.0, 90.0, 0.0),
        "horizon": {"k_f": 30, "free_time": True, "tf_guess": q(50.0, "s")},
        "weights": {"time": 1.0, "inputs": [100.0, 200.0]},
        "formulation": "hyperplane",
        "interim": {"x": q(8.5, "m"), "y": q(1.0, "m")},
        "solver": solver,
    }


def parking_tractor_trailer():
    return {
        "schema_version": 1,
        "name": "parking_tractor_trailer",
        "model": {
            "wheelbase": q(1.0, "m"),
            "trailer_length": q(4.5, "m"),
            "yaw_bound": q(180.0, "deg"),
            "trailer_yaw_bound": q(180.0, "deg"),
            "v_min": q(-5.0, "km/h"), "v_max": q(5.0, "km/h"),
            "steer_bound": q(40.0, "deg"),
            "a_min": q(-1.0, "m/s^2"), "a_max": q(1.0, "m/s^2"),
            "steer_rate_bound": q(5.0, "deg/s"),
            "joint_angle_bound": q(60.0, "deg"),
        },
        "body_parts": [
            {"shape": rect(-0.5, 1.5, -1.0, 1.0), "attachment": "tractor"},
            {"shape": rect(-5.0, 0.5, -1.0, 1.0), "attachment": "trailer"},
        ],
        "obstacles": [{"shape": SLAB}],
        "canvas": [PARKING_CANVAS],
        "start": state(0.0, 0.0, 0.0, 0.0, trailer_yaw_deg=0.0),
        "goal": state(8.5, -4.5, 90.0, 0.0, trailer_yaw_deg=90.0),
        "horizon": {"k_f": 30, "free_time": True, "tf_guess": q(50.0, "s")},
        "weights": {"time": 1.0, "inputs": [100.0, 200.0]},
        "formulation": "hyperplane",
        "interim": {"x": q(7.0, "m"), "y": q(7.5, "m")},
        # the articulated model grinds through a stiff-penalty phase before
        # stationarity settles, so it gets a deeper outer budget
        "solver": {"tol_feas": 1e-08, "max_outer_iters": 60},
    }


# The oncoming-lane geometry: the road is the annulus between two circles
# around (75, -100); the lead vehicle drives the arc at constant angular
# rate, ending each horizon step at t = 21 k / 40 seconds.
RING_CENTER = (75.0, -100.0)
LEAD_RADIUS = 127.8
LEAD_PHI0_DEG = 104.0
LEAD_RATE_DEG = 1.32


def lead_pose(t):
    phi_deg = LEAD_PHI0_DEG - LEAD_RATE_DEG * t
    phi = math.radians(phi_deg)
    return {
        "x": q(RING_CENTER[0] + LEAD_RADIUS * math.cos(phi), "m"),
        "y": q(RING_CENTER[1] + LEAD_RADIUS * math.sin(phi), "m"),
        "yaw": q(phi_deg - 90.0, "deg"),
    }


def overtaking(tag, goal_speed_kmh):
    kf, tf = 40, 21.0
    return {
        "schema_version": 1,
        "name": f"overtaking_{tag}",
        "model": {
            "wheelbase": q(2.6, "m"),
            "yaw_bound": q(85.0, "deg"),
            "v_min": q(5.0, "km/h"), "v_max": q(60.0, "km/h"),
            "steer_bound": q(45.0, "deg"),
            "a_min": q(-1.0, "m/s^2"), "a_max": q(2.0, "m/s^2"),
            "steer_rate_bound": q(5.0, "deg/s"),
        },
        "body_parts": [{"shape": rect(-1.0, 3.6, -1.0, 1.0), "attachment": "tractor"}],
        "obstacles": [
            {"shape": circle(123.5, *RING_CENTER)},
            {"shape": rect(-2.3, 2.3, -1.0, 1.0),
             "poses": [lead_pose(tf * k / kf) for k in range(kf + 1)]},
        ],
        "canvas": [circle(129.5, *RING_CENTER)],
        "start": state(0.0, 0.0, 36.0, 25.0),
        "goal": state(150.0, 0.0, -36.0, goal_speed_kmh),
        "horizon": {"k_f": kf, "free_time": False, "tf_fixed": q(tf, "s")},
        "weights": {"time": 1.0, "inputs": [10.0, 20.0], "gamma": 0.5},
        "formulation": "hyperplane",
        "solver": {"tol_feas": 1e-08},
    }


SUITE_SMALL = {
    "name": "small",
    "runs": [
        {"scenario": "parking_single_car_1obs.json",
         "formulations": ["hyperplane", "dual"], "inits": ["geometry", "constant"]},
        {"scenario": "parking_single_car_2obs.json",
         "formulations": ["hyperplane", "dual"], "inits": ["geometry"]},
        {"scenario": "parking_tractor_trailer.json",
         "formulations": ["hyperplane"], "inits": ["geometry"]},
        {"scenario": "overtaking_A.json",
         "formulations": ["hyperplane"], "inits": ["geometry", "constant"]},
        {"scenario": "overtaking_B.json",
         "formulations": ["hyperplane"], "inits": ["geometry", "constant"]},
    ],
}

SUITE_FULL = {
    "name": "full",
    "runs": SUITE_SMALL["runs"] + [
        {"scenario": "parking_single_car_3obs.json",
         "formulations": ["hyperplane"], "inits": ["geometry"]},
        {"scenario": "parking_single_car_4obs.json",
         "formulations": ["hyperplane"], "inits": ["geometry"]},
    ],
}


def main():
    OUT.mkdir(exist_ok=True)
    docs = [parking_single_car(n) for n in (1, 2, 3, 4)]
    docs.append(parking_tractor_trailer())
    docs.append(overtaking("A", 30.0))
    docs.append(overtaking("B", 25.0))
    for doc in docs:
        path = OUT / f"{doc['name']}.json"
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
        print("wrote", path)
    for suite in (SUITE_SMALL, SUITE_FULL):
        path = OUT / f"suite_{suite['name']}.json"
        with open(path, "w") as fh:
            json.dump(suite, fh, indent=2)
            fh.write("\n")
        print("wrote", path)


if __name__ == "__main__":
    main()
