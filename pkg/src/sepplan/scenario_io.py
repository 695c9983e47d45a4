"""Scenario files: schema-validated JSON with unit-tagged quantities.

Every physical scalar in a file is an object ``{"value": ..., "unit": ...}``
so a reader never has to guess whether a bound is in degrees or radians.
The parser converts everything to SI radians/meters/seconds; the writer
tags angles in degrees (the file convention) and everything else in SI,
so serialize-then-parse is an identity up to one rounding ulp per angle.
Set matrices (A, b, V, E, e) are plain nested lists in meters.
"""

from __future__ import annotations

import json
from importlib import resources
from typing import Optional

import jsonschema
import numpy as np

from .baseline_dual import FormulationKind
from .dynamics import VehicleModelParams, VehicleState
from .geometry import Ellipsoid, Polytope, Pose
from .ocp import BodyPart, Obstacle, Scenario
from .solver import SolverOptions


class ScenarioFormatError(ValueError):
    """Malformed scenario document (schema or semantic problem)."""


_CONVERT = {
    "m": 1.0,
    "s": 1.0,
    "m/s": 1.0,
    "m/s^2": 1.0,
    "rad": 1.0,
    "rad/s": 1.0,
    "deg": np.pi / 180.0,
    "deg/s": np.pi / 180.0,
    "km/h": 1.0 / 3.6,
}


def _schema() -> dict:
    text = resources.files("sepplan.schemas").joinpath("scenario.schema.json").read_text()
    return json.loads(text)


_VALIDATOR = jsonschema.Draft202012Validator(_schema())


def validate_document(doc: dict) -> None:
    """Raise ScenarioFormatError on the first schema violation."""
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ScenarioFormatError(f"scenario document invalid at {where}: {err.message}")


def _qty(node: dict) -> float:
    return float(node["value"]) * _CONVERT[node["unit"]]


def _tag(value: float, unit: str) -> dict:
    if unit in ("deg", "deg/s"):
        value = np.degrees(value)
    return {"value": float(value), "unit": unit}


def _set_from(node: dict):
    if node["type"] == "polytope":
        return Polytope(A=np.array(node["A"], dtype=float),
                        b=np.array(node["b"], dtype=float),
                        V=np.array(node["V"], dtype=float))
    return Ellipsoid(E=np.array(node["E"], dtype=float),
                     e=np.array(node["e"], dtype=float))


def _set_to(shape) -> dict:
    if isinstance(shape, Polytope):
        return {"type": "polytope", "A": shape.A.tolist(),
                "b": shape.b.tolist(), "V": shape.V.tolist()}
    return {"type": "ellipsoid", "E": shape.E.tolist(), "e": shape.e.tolist()}


def _state_from(node: dict) -> VehicleState:
    return VehicleState(
        x=_qty(node["x"]), y=_qty(node["y"]), yaw=_qty(node["yaw"]),
        speed=_qty(node["speed"]), steer=_qty(node["steer"]),
        trailer_yaw=_qty(node["trailer_yaw"]) if "trailer_yaw" in node else None,
    )


def _state_to(state: VehicleState) -> dict:
    node = {
        "x": _tag(state.x, "m"), "y": _tag(state.y, "m"),
        "yaw": _tag(state.yaw, "deg"),
        "speed": _tag(state.speed, "m/s"),
        "steer": _tag(state.steer, "deg"),
    }
    if state.trailer_yaw is not None:
        node["trailer_yaw"] = _tag(state.trailer_yaw, "deg")
    return node


def _model_from(node: dict) -> VehicleModelParams:
    kwargs = {"wheelbase": _qty(node["wheelbase"]),
              "v_min": _qty(node["v_min"]), "v_max": _qty(node["v_max"]),
              "steer_bound": _qty(node["steer_bound"]),
              "a_min": _qty(node["a_min"]), "a_max": _qty(node["a_max"]),
              "steer_rate_bound": _qty(node["steer_rate_bound"])}
    if "trailer_length" in node:
        kwargs["trailer_length"] = _qty(node["trailer_length"])
    if "yaw_bound" in node:
        kwargs["yaw_bound"] = _qty(node["yaw_bound"])
    if "trailer_yaw_bound" in node:
        kwargs["trailer_yaw_bound"] = _qty(node["trailer_yaw_bound"])
    if "joint_angle_bound" in node:
        kwargs["joint_angle_bound"] = _qty(node["joint_angle_bound"])
    return VehicleModelParams(**kwargs)


def _model_to(model: VehicleModelParams) -> dict:
    node = {
        "wheelbase": _tag(model.wheelbase, "m"),
        "yaw_bound": _tag(model.yaw_bound, "deg"),
        "v_min": _tag(model.v_min, "m/s"), "v_max": _tag(model.v_max, "m/s"),
        "steer_bound": _tag(model.steer_bound, "deg"),
        "a_min": _tag(model.a_min, "m/s^2"), "a_max": _tag(model.a_max, "m/s^2"),
        "steer_rate_bound": _tag(model.steer_rate_bound, "deg/s"),
    }
    if model.trailer_length is not None:
        node["trailer_length"] = _tag(model.trailer_length, "m")
        node["trailer_yaw_bound"] = _tag(model.trailer_yaw_bound, "deg")
    if model.joint_angle_bound is not None:
        node["joint_angle_bound"] = _tag(model.joint_angle_bound, "deg")
    return node


def _pose_from(node: dict) -> Pose:
    return Pose.planar(_qty(node["x"]), _qty(node["y"]), _qty(node["yaw"]))


def _pose_to(pose: Pose) -> dict:
    yaw = float(np.arctan2(pose.rotation[1, 0], pose.rotation[0, 0]))
    return {"x": _tag(pose.position[0], "m"), "y": _tag(pose.position[1], "m"),
            "yaw": _tag(yaw, "deg")}


def parse_scenario(doc: dict) -> Scenario:
    """Build a Scenario from a validated document."""
    validate_document(doc)
    horizon = doc["horizon"]
    weights = doc["weights"]
    try:
        return Scenario(
            name=doc["name"],
            model=_model_from(doc["model"]),
            body_parts=[
                BodyPart(shape=_set_from(p["shape"]),
                         attachment=p.get("attachment", "tractor"))
                for p in doc["body_parts"]
            ],
            obstacles=[
                Obstacle(shape=_set_from(o["shape"]),
                         poses=[_pose_from(p) for p in o["poses"]] if "poses" in o else None)
                for o in doc["obstacles"]
            ],
            canvas=[_set_from(c) for c in doc["canvas"]],
            start=_state_from(doc["start"]),
            goal=_state_from(doc["goal"]),
            k_f=horizon["k_f"],
            free_time=horizon["free_time"],
            tf_guess=_qty(horizon["tf_guess"]) if "tf_guess" in horizon else 10.0,
            tf_fixed=_qty(horizon["tf_fixed"]) if "tf_fixed" in horizon else None,
            weight_time=weights["time"],
            weight_inputs=np.array(weights["inputs"], dtype=float),
            formulation=FormulationKind(doc.get("formulation", "hyperplane")),
            interim=(np.array([_qty(doc["interim"]["x"]), _qty(doc["interim"]["y"])])
                     if "interim" in doc else None),
            gamma=weights.get("gamma", 0.75),
        )
    except (ValueError, KeyError) as exc:
        raise ScenarioFormatError(f"scenario semantics rejected: {exc}") from exc


def scenario_to_dict(scenario: Scenario) -> dict:
    """Serialize with file-convention unit tags (angles in degrees)."""
    doc = {
        "schema_version": 1,
        "name": scenario.name,
        "model": _model_to(scenario.model),
        "body_parts": [
            {"shape": _set_to(p.shape), "attachment": p.attachment}
            for p in scenario.body_parts
        ],
        "obstacles": [
            ({"shape": _set_to(o.shape), "poses": [_pose_to(p) for p in o.poses]}
             if o.moving else {"shape": _set_to(o.shape)})
            for o in scenario.obstacles
        ],
        "canvas": [_set_to(c) for c in scenario.canvas],
        "start": _state_to(scenario.start),
        "goal": _state_to(scenario.goal),
        "horizon": ({"k_f": scenario.k_f, "free_time": True,
                     "tf_guess": _tag(scenario.tf_guess, "s")}
                    if scenario.free_time else
                    {"k_f": scenario.k_f, "free_time": False,
                     "tf_fixed": _tag(scenario.tf_fixed, "s")}),
        "weights": {"time": float(scenario.weight_time),
                    "inputs": scenario.weight_inputs.tolist(),
                    "gamma": float(scenario.gamma)},
        "formulation": scenario.formulation.value,
    }
    if scenario.interim is not None:
        doc["interim"] = {"x": _tag(scenario.interim[0], "m"),
                          "y": _tag(scenario.interim[1], "m")}
    return doc


def parse_solver_options(doc: dict) -> Optional[SolverOptions]:
    """Solver overrides from a scenario document, None when absent."""
    if "solver" not in doc:
        return None
    return SolverOptions(**doc["solver"])


def load_document(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"{path} is not valid JSON: {exc}") from exc
    validate_document(doc)
    return doc


def load_scenario(path) -> Scenario:
    return parse_scenario(load_document(path))


def save_scenario(scenario: Scenario, path) -> None:
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(scenario), fh, indent=2)
        fh.write("\n")
