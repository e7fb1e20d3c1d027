"""Local HTTP service for kinematics and grasp detection.

Wire conventions (docs/formats.md): JSON bodies, quaternions ordered
w, x, y, z, joint values in radians, positions in meters. The /track
websocket processes messages strictly in order within a session; each
result seeds the next solve so streamed motion stays smooth. Sessions
expire after 60 s idle.
"""

from __future__ import annotations

import asyncio
import base64
import tempfile
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse

from . import __version__
from .arm_model import KinematicChain, Pose, forward_kinematics, open_arms_chain
from .cornell_data import DepthImage, inpaint, preprocess, read_depth_pgm
from .evaluate import DEFAULT_INPUT_SIZE
from .geometry import quat_normalize
from .grasp_cnn import heuristic_predictor
from .grasp_geometry import (
    GraspPixel,
    camera_to_robot,
    decode_grasp_map,
    image_to_camera,
    rect_from_pixel,
)
from .ik_engine import DEFAULT_LOOSE, DEFAULT_TIGHT, solve_two_stage

SESSION_IDLE_TIMEOUT_S = 60.0


def _bad_request(message: str) -> JSONResponse:
    return JSONResponse(status_code=400, content={"error": message})


def _pose_from_body(body) -> Pose:
    position = body.get("position")
    quaternion = body.get("quaternion")
    if not isinstance(position, (list, tuple)) or len(position) != 3:
        raise ValueError("position must be 3 numbers [x, y, z] in meters")
    if not isinstance(quaternion, (list, tuple)) or len(quaternion) != 4:
        raise ValueError("quaternion must be 4 numbers [w, x, y, z]")
    p = np.asarray(position, dtype=float)
    q = np.asarray(quaternion, dtype=float)
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
        raise ValueError("pose values must be finite")
    if np.linalg.norm(q) < 1e-6:
        raise ValueError("quaternion norm is too small to normalize")
    return Pose(p, quat_normalize(q))


def _result_json(result) -> dict:
    return {
        "joints": [float(x) for x in result.joints],
        "position": [float(x) for x in result.achieved.position],
        "quaternion": [float(x) for x in result.achieved.orientation],
        "status": result.status,
        "pos_err": result.pos_err,
        "ori_err": result.ori_err,
        "iterations": result.iterations,
        "elapsed": result.elapsed,
        "stage": result.stage,
    }


def _chain_json(chain: KinematicChain) -> dict:
    def transform_json(t):
        return {"translation": [float(x) for x in t.t],
                "quaternion": [float(x) for x in t.q]}

    return {
        "base": transform_json(chain.base),
        "tool": transform_json(chain.tool),
        "joints": [{
            "name": j.name,
            "axis": [float(x) for x in j.axis],
            "offset": transform_json(j.offset),
            "limit_lo": j.limit_lo,
            "limit_hi": j.limit_hi,
        } for j in chain.joints],
    }


def create_app(chain: KinematicChain | None = None,
               loose=DEFAULT_LOOSE, tight=DEFAULT_TIGHT,
               predictor=None, camera=None,
               idle_timeout: float = SESSION_IDLE_TIMEOUT_S,
               ui_dir: str | None = None) -> FastAPI:
    chain = chain if chain is not None else open_arms_chain()
    predictor = predictor if predictor is not None else heuristic_predictor()
    app = FastAPI(title="armkit teleop service", version=__version__)
    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    @app.get("/chain")
    def get_chain():
        return _chain_json(chain)

    @app.post("/fk")
    async def post_fk(body: dict):
        joints = body.get("joints")
        if not isinstance(joints, (list, tuple)) or len(joints) != len(chain):
            return _bad_request(f"joints must be {len(chain)} values in radians")
        q = np.asarray(joints, dtype=float)
        if not np.all(np.isfinite(q)):
            return _bad_request("joints must be finite")
        pose = forward_kinematics(chain, q)
        return {"position": [float(x) for x in pose.position],
                "quaternion": [float(x) for x in pose.orientation]}

    @app.post("/ik")
    async def post_ik(body: dict):
        try:
            target = _pose_from_body(body)
        except ValueError as exc:
            return _bad_request(str(exc))
        seed = body.get("seed")
        if seed is not None:
            if not isinstance(seed, (list, tuple)) or len(seed) != len(chain):
                return _bad_request(f"seed must be {len(chain)} values")
            seed = np.asarray(seed, dtype=float)
        else:
            seed = np.zeros(len(chain))
        result = solve_two_stage(chain, target, seed, loose, tight)
        return _result_json(result)

    @app.post("/grasp")
    async def post_grasp(body: dict):
        try:
            depth = _depth_from_body(body)
        except ValueError as exc:
            return _bad_request(str(exc))
        k = int(body.get("k", 3))
        frame = body.get("frame", "image")
        if frame not in ("image", "robot"):
            return _bad_request("frame must be 'image' or 'robot'")
        if frame == "robot" and camera is None:
            return _bad_request("no camera model configured for robot-frame output")
        size = getattr(predictor, "input_size", None) or DEFAULT_INPUT_SIZE
        processed, transform = preprocess(inpaint(depth), out_size=size)
        grasp_map = predictor.predict(processed.values[None])
        picks = decode_grasp_map(grasp_map, k=max(k, 1))
        inverse = transform.inverse()
        out = []
        for gp in picks:
            entry = {"u": gp.u, "v": gp.v, "phi": gp.phi,
                     "omega": gp.omega, "q": gp.q}
            if gp.omega > 0:
                rect = inverse.apply_rect(rect_from_pixel(gp))
                entry["rectangle"] = {
                    "center": [rect.center[0], rect.center[1]],
                    "angle": rect.angle, "width": rect.width,
                    "height": rect.height,
                }
            if frame == "robot":
                # back to original pixel coordinates, where the camera model holds
                src = inverse.apply_point([gp.u, gp.v])
                u0 = min(max(int(round(src[0])), 0), depth.width - 1)
                v0 = min(max(int(round(src[1])), 0), depth.height - 1)
                z = float(depth.values[v0, u0]) or 1.0
                gp_orig = GraspPixel(u=float(src[0]), v=float(src[1]), phi=gp.phi,
                                     omega=gp.omega / transform.scale, q=gp.q)
                g_rob = camera_to_robot(image_to_camera(gp_orig, z, camera), camera)
                entry["world"] = {"p": [float(x) for x in g_rob.p],
                                  "phi": g_rob.phi, "w": g_rob.w, "q": g_rob.q}
            out.append(entry)
        return {"grasps": out, "frame": frame}

    @app.websocket("/track")
    async def track_stream(ws: WebSocket):
        await ws.accept()
        seed = np.zeros(len(chain))
        try:
            while True:
                try:
                    text = await asyncio.wait_for(ws.receive_text(),
                                                  timeout=idle_timeout)
                except asyncio.TimeoutError:
                    await ws.close(code=1000, reason="session idle timeout")
                    return
                frame = _track_frame(chain, loose, tight, seed, text)
                if "error" not in frame:
                    seed = np.asarray(frame["joints"])
                await ws.send_json(frame)
        except WebSocketDisconnect:
            return

    return app


def _track_frame(chain, loose, tight, seed, text: str) -> dict:
    import json

    try:
        body = json.loads(text)
    except json.JSONDecodeError:
        return {"error": "malformed JSON frame"}
    seq = body.get("seq")
    try:
        target = _pose_from_body(body)
    except (ValueError, AttributeError) as exc:
        frame = {"error": str(exc) if isinstance(exc, ValueError) else "malformed frame"}
        if seq is not None:
            frame["seq"] = seq
        return frame
    result = solve_two_stage(chain, target, seed, loose, tight)
    frame = _result_json(result)
    if seq is not None:
        frame["seq"] = seq
    return frame


def _depth_from_body(body) -> DepthImage:
    if "depth" in body:
        arr = np.asarray(body["depth"], dtype=float)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("depth must be a non-empty 2-D array of meters")
        if not np.all(np.isfinite(arr)):
            raise ValueError("depth values must be finite")
        return DepthImage(arr, arr > 0)
    if "pgm_base64" in body:
        raw = base64.b64decode(body["pgm_base64"])
        with tempfile.NamedTemporaryFile(suffix=".pgm") as f:
            f.write(raw)
            f.flush()
            return read_depth_pgm(f.name)
    if "pgm_path" in body:
        path = Path(body["pgm_path"])
        if not path.exists():
            raise ValueError(f"no depth file at {path}")
        return read_depth_pgm(path)
    raise ValueError("request needs 'depth', 'pgm_base64' or 'pgm_path'")
