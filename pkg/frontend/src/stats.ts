/**
 * Rolling session statistics over the last N track responses: solve rate,
 * worst joint-space step between consecutive results and mean round-trip
 * latency. The window keeps the display responsive but stable.
 */

export const DEFAULT_WINDOW = 200;

interface Sample {
  exact: boolean;
  maxStep: number; // vs previous sample's joints, 0 for the first
  latencyMs: number;
}

export class RollingStats {
  private samples: Sample[] = [];
  private lastJoints: number[] | null = null;

  constructor(private window: number = DEFAULT_WINDOW) {}

  add(joints: number[], exact: boolean, latencyMs: number): void {
    let maxStep = 0;
    if (this.lastJoints !== null && this.lastJoints.length === joints.length) {
      for (let i = 0; i < joints.length; i++) {
        maxStep = Math.max(maxStep, Math.abs(joints[i] - this.lastJoints[i]));
      }
    }
    this.lastJoints = [...joints];
    this.samples.push({ exact, maxStep, latencyMs });
    if (this.samples.length > this.window) {
      this.samples.splice(0, this.samples.length - this.window);
    }
  }

  /** Forget continuity so the next sample's step reads as 0. */
  breakContinuity(): void {
    this.lastJoints = null;
  }

  reset(): void {
    this.samples = [];
    this.lastJoints = null;
  }

  get count(): number {
    return this.samples.length;
  }

  get solveRatePct(): number {
    if (!this.samples.length) return 0;
    const ok = this.samples.filter((s) => s.exact).length;
    return (100 * ok) / this.samples.length;
  }

  get maxJointStep(): number {
    return this.samples.reduce((m, s) => Math.max(m, s.maxStep), 0);
  }

  get meanLatencyMs(): number {
    if (!this.samples.length) return 0;
    return this.samples.reduce((a, s) => a + s.latencyMs, 0) / this.samples.length;
  }
}
