/**
 * Pointer-drag to target-pose mapping, kept pure for testing.
 *
 * Mouse-only semantics: a plain drag translates the target in the
 * camera-facing vertical plane (world x and z); holding Shift maps
 * vertical motion to depth (world y); holding Alt/Ctrl rotates the target
 * about the world z axis. Wheel scales the drag plane distance.
 */

import { TargetPose, normalizeQuat, quatFromAxisAngle, quatMul } from "./protocol.js";

export interface DragModifiers {
  shift: boolean;
  rotate: boolean; // alt or ctrl
}

export const TRANSLATE_GAIN = 0.0018; // meters per pixel
export const ROTATE_GAIN = 0.01; // radians per pixel

export function applyDrag(
  pose: TargetPose,
  dxPx: number,
  dyPx: number,
  mods: DragModifiers,
): TargetPose {
  const p: [number, number, number] = [...pose.position];
  let q: [number, number, number, number] = [...pose.quaternion];
  if (mods.rotate) {
    const yaw = quatFromAxisAngle([0, 0, 1], -dxPx * ROTATE_GAIN);
    const pitch = quatFromAxisAngle([0, 1, 0], -dyPx * ROTATE_GAIN);
    q = normalizeQuat(quatMul(quatMul(yaw, pitch), q));
  } else if (mods.shift) {
    p[1] += dyPx * TRANSLATE_GAIN; // screen up = away
  } else {
    p[0] += dxPx * TRANSLATE_GAIN;
    p[2] -= dyPx * TRANSLATE_GAIN; // screen up = world up
  }
  return { position: p, quaternion: q };
}

export function clampTarget(pose: TargetPose, maxRadius: number): TargetPose {
  const r = Math.hypot(...pose.position);
  if (r <= maxRadius || r === 0) return pose;
  const s = maxRadius / r;
  return {
    position: [
      pose.position[0] * s,
      pose.position[1] * s,
      pose.position[2] * s,
    ],
    quaternion: pose.quaternion,
  };
}
