/**
 * Track-session state: target debouncing, request/response pairing via
 * sequence numbers, rolling stats and reconnect semantics.
 *
 * Invariants the tests pin down:
 *  - displayed joints only ever come from server frames (single source of
 *    truth; this module never solves IK)
 *  - target edits are debounced to at most maxRate messages per second,
 *    always flushing the latest edit
 *  - reconnecting clears stale joints: nothing is displayed until the new
 *    connection produces a frame
 */

import {
  TargetPose,
  TrackFrame,
  encodeTrackRequest,
  isErrorFrame,
} from "./protocol.js";
import { RollingStats } from "./stats.js";

export type ConnectionState = "disconnected" | "connecting" | "connected";

export interface SessionView {
  connection: ConnectionState;
  joints: number[] | null;
  status: "Exact" | "BestFit" | null;
  posErr: number | null;
  oriErr: number | null;
  lastError: string | null;
  target: TargetPose | null;
}

export class UiSession {
  readonly stats: RollingStats;
  private connection: ConnectionState = "disconnected";
  private joints: number[] | null = null;
  private status: "Exact" | "BestFit" | null = null;
  private posErr: number | null = null;
  private oriErr: number | null = null;
  private lastError: string | null = null;

  private nextSeq = 0;
  private sentAt = new Map<number, number>();
  private minIntervalMs: number;
  private lastSendTime = -Infinity;
  private pendingTarget: TargetPose | null = null;
  private currentTarget: TargetPose | null = null;

  constructor(maxRateHz = 60, statsWindow = 200) {
    this.minIntervalMs = 1000 / maxRateHz;
    this.stats = new RollingStats(statsWindow);
  }

  view(): SessionView {
    return {
      connection: this.connection,
      joints: this.joints,
      status: this.status,
      posErr: this.posErr,
      oriErr: this.oriErr,
      lastError: this.lastError,
      target: this.currentTarget,
    };
  }

  onConnecting(): void {
    this.connection = "connecting";
  }

  /** New connection: no stale joints may survive from the previous one. */
  onConnected(): void {
    this.connection = "connected";
    this.joints = null;
    this.status = null;
    this.posErr = null;
    this.oriErr = null;
    this.lastError = null;
    this.sentAt.clear();
    this.stats.reset();
  }

  onDisconnected(): void {
    this.connection = "disconnected";
    this.sentAt.clear();
    this.stats.breakContinuity();
  }

  /**
   * Queue a target edit. Returns the encoded message to send right now,
   * or null when debounced (the edit is kept and flushed later).
   */
  updateTarget(pose: TargetPose, nowMs: number): string | null {
    this.currentTarget = pose;
    if (this.connection !== "connected") return null;
    if (nowMs - this.lastSendTime >= this.minIntervalMs) {
      return this.sendNow(pose, nowMs);
    }
    this.pendingTarget = pose;
    return null;
  }

  /** Called periodically (render loop): flush a debounced edit when due. */
  flush(nowMs: number): string | null {
    if (this.pendingTarget === null || this.connection !== "connected") {
      return null;
    }
    if (nowMs - this.lastSendTime >= this.minIntervalMs) {
      const pose = this.pendingTarget;
      this.pendingTarget = null;
      return this.sendNow(pose, nowMs);
    }
    return null;
  }

  private sendNow(pose: TargetPose, nowMs: number): string {
    const seq = this.nextSeq++;
    this.sentAt.set(seq, nowMs);
    this.lastSendTime = nowMs;
    return encodeTrackRequest({ ...pose, seq });
  }

  onFrame(frame: TrackFrame, nowMs: number): void {
    if (isErrorFrame(frame)) {
      // error frames surface inline; the session keeps running
      this.lastError = frame.error;
      if (frame.seq !== undefined) this.sentAt.delete(frame.seq);
      return;
    }
    let latency = 0;
    if (frame.seq !== undefined && this.sentAt.has(frame.seq)) {
      latency = nowMs - (this.sentAt.get(frame.seq) as number);
      this.sentAt.delete(frame.seq);
    }
    this.joints = frame.joints;
    this.status = frame.status;
    this.posErr = frame.pos_err;
    this.oriErr = frame.ori_err;
    this.lastError = null;
    this.stats.add(frame.joints, frame.status === "Exact", latency);
  }

  get pendingCount(): number {
    return this.sentAt.size;
  }
}
