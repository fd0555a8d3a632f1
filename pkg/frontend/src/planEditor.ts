/**
 * State model for the floorplan editor: draggable/resizable room boxes with
 * per-room locks, a refinement-trace scrubber, and an append-only history
 * that backs undo. All geometry is kept in the server's integer coordinate
 * grid; the editor never runs model math.
 */

import { Box, COORD_MAX, Candidate, Floorplan } from "./schema.js";

export const DEFAULT_REFINE_ITERS = 5;
export const MIN_REFINE_ITERS = 1;
export const MAX_REFINE_ITERS = 7;

export interface PlanRoom {
  elementIndex: number;
  nodeId: string;
  category: string;
  box: Box;
  locked: boolean;
}

export class PlanEditorError extends Error {}

function clampCoord(v: number): number {
  return Math.min(COORD_MAX, Math.max(0, Math.round(v)));
}

/** Snap a continuous canvas coordinate to the integer bin grid. */
export function snapToGrid(v: number, gridStep = 1): number {
  const snapped = Math.round(v / gridStep) * gridStep;
  return clampCoord(snapped);
}

interface HistoryEntry {
  kind: "init" | "move" | "resize" | "lock" | "trace" | "adopt";
  rooms: PlanRoom[];
  traceIndex: number;
}

function cloneRooms(rooms: PlanRoom[]): PlanRoom[] {
  return rooms.map((r) => ({ ...r, box: [...r.box] as Box }));
}

export class PlanEditorState {
  rooms: PlanRoom[] = [];
  /** Decoded trace frames, index 0 = draft stage. */
  trace: number[][] = [];
  traceIndex = 0;
  refineIters = DEFAULT_REFINE_ITERS;
  gridStep = 1;
  /** Append-only audit log; every state change and undo adds an entry. */
  private history: HistoryEntry[] = [];
  /** Logical undo stack over the same snapshots. */
  private past: HistoryEntry[] = [];

  static fromCandidate(cand: Candidate, nodeIds: string[]): PlanEditorState {
    const state = new PlanEditorState();
    state.rooms = cand.floorplan.elements.map((e, i) => ({
      elementIndex: i,
      nodeId: nodeIds[i] ?? `e${e.room_index}`,
      category: e.category,
      box: [...e.box] as Box,
      locked: false,
    }));
    state.trace = cand.trace.map((frame) => [...frame]);
    state.traceIndex = Math.max(0, state.trace.length - 1);
    state.record("init");
    return state;
  }

  private record(kind: HistoryEntry["kind"]): void {
    const entry = {
      kind,
      rooms: cloneRooms(this.rooms),
      traceIndex: this.traceIndex,
    };
    this.history.push(entry);
    this.past.push(entry);
  }

  get historyLength(): number {
    return this.history.length;
  }

  room(nodeId: string): PlanRoom {
    const r = this.rooms.find((r) => r.nodeId === nodeId);
    if (!r) throw new PlanEditorError(`unknown room ${nodeId}`);
    return r;
  }

  /** Drag the whole box; locked rooms do not move. */
  moveRoom(nodeId: string, dx: number, dy: number): void {
    const r = this.room(nodeId);
    if (r.locked) throw new PlanEditorError(`room ${nodeId} is locked`);
    const [xL, yT, xR, yB] = r.box;
    const w = xR - xL;
    const h = yB - yT;
    let nx = snapToGrid(xL + dx, this.gridStep);
    let ny = snapToGrid(yT + dy, this.gridStep);
    nx = Math.min(nx, COORD_MAX - w);
    ny = Math.min(ny, COORD_MAX - h);
    r.box = [nx, ny, nx + w, ny + h];
    this.record("move");
  }

  /** Drag one corner; boxes may not invert or leave the grid. */
  resizeRoom(nodeId: string, corner: "tl" | "br", x: number, y: number): void {
    const r = this.room(nodeId);
    if (r.locked) throw new PlanEditorError(`room ${nodeId} is locked`);
    const [xL, yT, xR, yB] = r.box;
    const sx = snapToGrid(x, this.gridStep);
    const sy = snapToGrid(y, this.gridStep);
    const next: Box =
      corner === "tl" ? [sx, sy, xR, yB] : [xL, yT, sx, sy];
    if (next[0] > next[2] || next[1] > next[3])
      throw new PlanEditorError("box corners crossed");
    r.box = next;
    this.record("resize");
  }

  setLocked(nodeId: string, locked: boolean): void {
    const r = this.room(nodeId);
    r.locked = locked;
    this.record("lock");
  }

  get lockedBoxes(): Record<string, Box> {
    const out: Record<string, Box> = {};
    for (const r of this.rooms) if (r.locked) out[r.nodeId] = [...r.box] as Box;
    return out;
  }

  /**
   * Edited boxes (vs. the last adopted candidate) keyed by room index, the
   * key form the refine endpoint expects.
   */
  editsAgainst(base: Floorplan): Record<string, Box> {
    const out: Record<string, Box> = {};
    for (const r of this.rooms) {
      const orig = base.elements[r.elementIndex];
      if (!orig) continue;
      const same = orig.box.every((v, i) => v === r.box[i]);
      if (!same) out[String(orig.room_index)] = [...r.box] as Box;
    }
    return out;
  }

  setRefineIters(n: number): void {
    if (!Number.isInteger(n) || n < MIN_REFINE_ITERS || n > MAX_REFINE_ITERS)
      throw new PlanEditorError(
        `refinement iterations must be an integer in [${MIN_REFINE_ITERS}, ${MAX_REFINE_ITERS}]`
      );
    this.refineIters = n;
  }

  /** Scrub to a refinement round; frame geometry replaces unlocked boxes. */
  scrubTrace(index: number): void {
    if (index < 0 || index >= this.trace.length)
      throw new PlanEditorError(`trace index ${index} out of range`);
    this.traceIndex = index;
    const frame = this.trace[index]!;
    for (const r of this.rooms) {
      if (r.locked) continue;
      const o = r.elementIndex * 4;
      r.box = [
        clampCoord(frame[o]!),
        clampCoord(frame[o + 1]!),
        clampCoord(frame[o + 2]!),
        clampCoord(frame[o + 3]!),
      ];
    }
    this.record("trace");
  }

  /** Replace geometry with a refined candidate returned by the server. */
  adoptCandidate(cand: Candidate): void {
    for (const r of this.rooms) {
      const e = cand.floorplan.elements[r.elementIndex];
      if (e) r.box = [...e.box] as Box;
    }
    this.trace = cand.trace.map((frame) => [...frame]);
    this.traceIndex = Math.max(0, this.trace.length - 1);
    this.record("adopt");
  }

  /** Undo restores the previous snapshot; the audit history only grows. */
  undo(): boolean {
    if (this.past.length <= 1) return false;
    this.past.pop();
    const prev = this.past[this.past.length - 1]!;
    this.rooms = cloneRooms(prev.rooms);
    this.traceIndex = prev.traceIndex;
    this.history.push({
      kind: prev.kind,
      rooms: cloneRooms(this.rooms),
      traceIndex: this.traceIndex,
    });
    return true;
  }
}
