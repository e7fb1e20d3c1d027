/**
 * Client-side forward kinematics over the chain description served by
 * GET /chain, used ONLY to draw the linkage. Joint values shown to the
 * user always come from server responses, never from local solving.
 */

import { normalizeQuat, quatFromAxisAngle, quatMul, quatRotate } from "./protocol.js";

export interface TransformDesc {
  translation: [number, number, number];
  quaternion: [number, number, number, number];
}

export interface JointDesc {
  name: string;
  axis: [number, number, number];
  offset: TransformDesc;
  limit_lo: number;
  limit_hi: number;
}

export interface ChainDesc {
  base: TransformDesc;
  tool: TransformDesc;
  joints: JointDesc[];
}

export interface FramePose {
  position: [number, number, number];
  quaternion: [number, number, number, number];
}

/**
 * World pose of every joint origin plus the tool frame, matching the
 * server convention: fixed offset first, then rotation about the joint
 * axis.
 */
export function chainFrames(chain: ChainDesc, joints: number[]): FramePose[] {
  if (joints.length !== chain.joints.length) {
    throw new Error(
      `chain has ${chain.joints.length} joints, got ${joints.length} values`,
    );
  }
  let p: [number, number, number] = [...chain.base.translation];
  let q = normalizeQuat([...chain.base.quaternion]);
  const frames: FramePose[] = [];
  chain.joints.forEach((spec, i) => {
    const off = spec.offset;
    const moved = quatRotate(q, off.translation);
    p = [p[0] + moved[0], p[1] + moved[1], p[2] + moved[2]];
    q = normalizeQuat(quatMul(q, off.quaternion));
    frames.push({ position: p, quaternion: q });
    q = normalizeQuat(quatMul(q, quatFromAxisAngle(spec.axis, joints[i])));
  });
  const tip = quatRotate(q, chain.tool.translation);
  frames.push({
    position: [p[0] + tip[0], p[1] + tip[1], p[2] + tip[2]],
    quaternion: normalizeQuat(quatMul(q, chain.tool.quaternion)),
  });
  return frames;
}

export function toolPose(chain: ChainDesc, joints: number[]): FramePose {
  const frames = chainFrames(chain, joints);
  return frames[frames.length - 1];
}
