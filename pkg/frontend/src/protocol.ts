/**
 * Wire types shared with the service. Quaternions are [w, x, y, z];
 * positions meters; joints radians. See docs/formats.md in the repo root.
 */

export interface TargetPose {
  position: [number, number, number];
  quaternion: [number, number, number, number];
}

export interface TrackRequest extends TargetPose {
  seq: number;
}

export interface TrackResult {
  seq?: number;
  joints: number[];
  position: number[];
  quaternion: number[];
  status: "Exact" | "BestFit";
  pos_err: number;
  ori_err: number;
  iterations: number;
  elapsed: number;
  stage: number;
}

export interface TrackError {
  seq?: number;
  error: string;
}

export type TrackFrame = TrackResult | TrackError;

export function isErrorFrame(f: TrackFrame): f is TrackError {
  return typeof (f as TrackError).error === "string";
}

export function encodeTrackRequest(req: TrackRequest): string {
  if (req.position.length !== 3 || req.quaternion.length !== 4) {
    throw new Error("target pose needs position[3] and quaternion[4] (w first)");
  }
  return JSON.stringify({
    seq: req.seq,
    position: req.position,
    quaternion: req.quaternion,
  });
}

export function decodeTrackFrame(text: string): TrackFrame {
  let body: unknown;
  try {
    body = JSON.parse(text);
  } catch {
    return { error: "unparseable frame from server" };
  }
  const f = body as Record<string, unknown>;
  if (typeof f.error === "string") {
    return { seq: f.seq as number | undefined, error: f.error };
  }
  if (!Array.isArray(f.joints)) {
    return { error: "frame missing joints" };
  }
  return body as TrackResult;
}

export function normalizeQuat(
  q: [number, number, number, number],
): [number, number, number, number] {
  const n = Math.hypot(q[0], q[1], q[2], q[3]);
  if (n < 1e-12) throw new Error("cannot normalize zero quaternion");
  return [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
}

/** Hamilton product, w-first. */
export function quatMul(
  a: [number, number, number, number],
  b: [number, number, number, number],
): [number, number, number, number] {
  const [aw, ax, ay, az] = a;
  const [bw, bx, by, bz] = b;
  return [
    aw * bw - ax * bx - ay * by - az * bz,
    aw * bx + ax * bw + ay * bz - az * by,
    aw * by - ax * bz + ay * bw + az * bx,
    aw * bz + ax * by - ay * bx + az * bw,
  ];
}

export function quatFromAxisAngle(
  axis: [number, number, number],
  angle: number,
): [number, number, number, number] {
  const h = angle / 2;
  const s = Math.sin(h);
  return [Math.cos(h), axis[0] * s, axis[1] * s, axis[2] * s];
}

export function quatRotate(
  q: [number, number, number, number],
  v: [number, number, number],
): [number, number, number] {
  const [w, x, y, z] = q;
  const ux = y * v[2] - z * v[1];
  const uy = z * v[0] - x * v[2];
  const uz = x * v[1] - y * v[0];
  return [
    v[0] + 2 * (w * ux + y * uz - z * uy),
    v[1] + 2 * (w * uy + z * ux - x * uz),
    v[2] + 2 * (w * uz + x * uy - y * ux),
  ];
}
