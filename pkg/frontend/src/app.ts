/**
 * Teleoperation sandbox: drag a 3-D target, stream it over /track and
 * watch the arm follow using only server-computed joint values.
 *
 * Single render loop; websocket events feed the session state machine and
 * the loop reads it back out. No IK runs in the browser.
 */

import * as THREE from "three";

import { ChainDesc, chainFrames } from "./fk.js";
import { applyDrag, clampTarget } from "./gizmo.js";
import { TargetPose, decodeTrackFrame } from "./protocol.js";
import { UiSession } from "./session.js";

const ARM_COLOR = 0x3a7bd5;
const BEST_FIT_COLOR = 0xe08030;
const FROZEN_COLOR = 0x808a96;
const MAX_TARGET_RADIUS = 0.9;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

class SandboxApp {
  private scene = new THREE.Scene();
  private camera: THREE.PerspectiveCamera;
  private renderer: THREE.WebGLRenderer;
  private session = new UiSession(60, 200);
  private chain: ChainDesc | null = null;
  private ws: WebSocket | null = null;
  private reconnectDelayMs = 500;

  private linkMaterial = new THREE.MeshLambertMaterial({ color: ARM_COLOR });
  private jointGeo = new THREE.SphereGeometry(0.022, 16, 12);
  private boneGroup = new THREE.Group();
  private targetMarker: THREE.Object3D;
  private target: TargetPose = { position: [0, 0, -0.63], quaternion: [1, 0, 0, 0] };
  private dragging = false;
  private lastPointer: [number, number] | null = null;

  constructor(root: HTMLElement) {
    const w = root.clientWidth;
    const h = root.clientHeight;
    this.camera = new THREE.PerspectiveCamera(45, w / h, 0.01, 20);
    this.camera.position.set(1.1, -1.3, 0.25);
    this.camera.up.set(0, 0, 1);
    this.camera.lookAt(0, 0, -0.3);
    this.renderer = new THREE.WebGLRenderer({ antialias: true });
    this.renderer.setSize(w, h);
    root.appendChild(this.renderer.domElement);

    this.scene.background = new THREE.Color(0x10151c);
    const light = new THREE.DirectionalLight(0xffffff, 2.2);
    light.position.set(1, -2, 2);
    this.scene.add(light, new THREE.AmbientLight(0xffffff, 0.5));
    const grid = new THREE.GridHelper(2, 20, 0x335, 0x224);
    grid.rotation.x = Math.PI / 2; // grid in the x-y plane, z up
    grid.position.z = -0.75;
    this.scene.add(grid);
    this.scene.add(this.boneGroup);

    this.targetMarker = this.buildTargetMarker();
    this.scene.add(this.targetMarker);

    this.bindPointer();
    el<HTMLButtonElement>("reconnect").onclick = () => this.connect();
  }

  private buildTargetMarker(): THREE.Object3D {
    const group = new THREE.Group();
    const ball = new THREE.Mesh(
      new THREE.SphereGeometry(0.028, 16, 12),
      new THREE.MeshLambertMaterial({ color: 0x34c98f, transparent: true, opacity: 0.85 }),
    );
    group.add(ball, new THREE.AxesHelper(0.12));
    return group;
  }

  async start(): Promise<void> {
    const resp = await fetch("/chain");
    this.chain = (await resp.json()) as ChainDesc;
    this.connect();
    this.renderer.setAnimationLoop(() => this.tick());
  }

  private connect(): void {
    if (this.ws) {
      this.ws.onclose = null;
      this.ws.close();
    }
    this.session.onConnecting();
    const proto = location.protocol === "https:" ? "wss" : "ws";
    const ws = new WebSocket(`${proto}://${location.host}/track`);
    this.ws = ws;
    ws.onopen = () => {
      this.session.onConnected();
      this.reconnectDelayMs = 500;
      // prime the stream so fresh (never stale) joints arrive immediately
      const msg = this.session.updateTarget(this.target, performance.now());
      if (msg) ws.send(msg);
    };
    ws.onmessage = (ev) => {
      this.session.onFrame(decodeTrackFrame(String(ev.data)), performance.now());
    };
    ws.onclose = () => {
      this.session.onDisconnected();
      setTimeout(() => this.connect(), this.reconnectDelayMs);
      this.reconnectDelayMs = Math.min(this.reconnectDelayMs * 2, 8000);
    };
  }

  private bindPointer(): void {
    const canvas = this.renderer.domElement;
    canvas.addEventListener("pointerdown", (ev) => {
      this.dragging = true;
      this.lastPointer = [ev.clientX, ev.clientY];
      canvas.setPointerCapture(ev.pointerId);
    });
    canvas.addEventListener("pointermove", (ev) => {
      if (!this.dragging || !this.lastPointer) return;
      const dx = ev.clientX - this.lastPointer[0];
      const dy = ev.clientY - this.lastPointer[1];
      this.lastPointer = [ev.clientX, ev.clientY];
      this.target = clampTarget(
        applyDrag(this.target, dx, dy, {
          shift: ev.shiftKey,
          rotate: ev.altKey || ev.ctrlKey,
        }),
        MAX_TARGET_RADIUS,
      );
      const msg = this.session.updateTarget(this.target, performance.now());
      if (msg && this.ws?.readyState === WebSocket.OPEN) this.ws.send(msg);
    });
    const stop = () => {
      this.dragging = false;
      this.lastPointer = null; // released: final target persists
    };
    canvas.addEventListener("pointerup", stop);
    canvas.addEventListener("pointercancel", stop);
  }

  private tick(): void {
    const flushed = this.session.flush(performance.now());
    if (flushed && this.ws?.readyState === WebSocket.OPEN) this.ws.send(flushed);
    this.redrawArm();
    this.redrawPanel();
    this.targetMarker.position.set(...this.target.position);
    const [w, x, y, z] = this.target.quaternion;
    this.targetMarker.quaternion.set(x, y, z, w);
    this.renderer.render(this.scene, this.camera);
  }

  private redrawArm(): void {
    const view = this.session.view();
    if (!this.chain || !view.joints) return;
    const frames = chainFrames(this.chain, view.joints);
    this.boneGroup.clear();
    const color = view.connection !== "connected"
      ? FROZEN_COLOR
      : view.status === "BestFit"
        ? BEST_FIT_COLOR
        : ARM_COLOR;
    this.linkMaterial.color.setHex(color);
    let prev = new THREE.Vector3(0, 0, 0);
    frames.forEach((f, i) => {
      const here = new THREE.Vector3(...f.position);
      if (i > 0 || here.length() > 1e-9) {
        const seg = here.clone().sub(prev);
        const len = seg.length();
        if (len > 1e-6) {
          const bone = new THREE.Mesh(
            new THREE.CylinderGeometry(0.013, 0.013, len, 10),
            this.linkMaterial,
          );
          bone.position.copy(prev).addScaledVector(seg, 0.5);
          bone.quaternion.setFromUnitVectors(
            new THREE.Vector3(0, 1, 0),
            seg.clone().normalize(),
          );
          this.boneGroup.add(bone);
        }
      }
      this.boneGroup.add(
        Object.assign(new THREE.Mesh(this.jointGeo, this.linkMaterial), {
          position: here,
        }),
      );
      prev = here;
    });
  }

  private redrawPanel(): void {
    const view = this.session.view();
    const stats = this.session.stats;
    el("conn").textContent = view.connection;
    el("conn").className = `value ${view.connection}`;
    el<HTMLDivElement>("banner").style.display =
      view.connection === "connected" ? "none" : "block";
    el("status").textContent = view.status ?? "-";
    el("status").className = `value ${view.status === "BestFit" ? "warn" : ""}`;
    el("joints").textContent = view.joints
      ? view.joints.map((j) => j.toFixed(3)).join("  ")
      : "(waiting for server)";
    el("errors").textContent = view.posErr === null
      ? "-"
      : `${(view.posErr * 1000).toFixed(2)} mm / ${((view.oriErr ?? 0) * 1000).toFixed(1)} mrad`;
    el("rate").textContent = `${stats.solveRatePct.toFixed(1)}% of ${stats.count}`;
    el("step").textContent = `${stats.maxJointStep.toFixed(4)} rad`;
    el("latency").textContent = `${stats.meanLatencyMs.toFixed(1)} ms`;
    el("lasterr").textContent = view.lastError ?? "";
  }
}

new SandboxApp(el("viewport")).start().catch((err) => {
  el("banner").style.display = "block";
  el("banner").textContent = `failed to start: ${err}`;
});
