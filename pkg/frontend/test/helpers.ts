import { DiagramCanvasState } from "../src/diagramEditor.js";
import { Candidate, ROOM_CATEGORIES } from "../src/schema.js";

/** Small deterministic PRNG so property tests are reproducible. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function randomEditorState(rnd: () => number): DiagramCanvasState {
  const state = new DiagramCanvasState();
  const nRooms = 2 + Math.floor(rnd() * 6);
  const rooms = [];
  for (let i = 0; i < nRooms; i++) {
    const cat = ROOM_CATEGORIES[Math.floor(rnd() * ROOM_CATEGORIES.length)]!;
    rooms.push(state.addRoom(cat, Math.floor(rnd() * 500), Math.floor(rnd() * 500)));
  }
  for (let i = 1; i < nRooms; i++) {
    const j = Math.floor(rnd() * i);
    state.connectRooms(rooms[i]!.id, rooms[j]!.id);
  }
  const extra = Math.floor(rnd() * 3);
  for (let k = 0; k < extra; k++) {
    const a = rooms[Math.floor(rnd() * nRooms)]!;
    const b = rooms[Math.floor(rnd() * nRooms)]!;
    if (a.id !== b.id) state.connectRooms(a.id, b.id);
  }
  state.addFrontDoor(rooms[Math.floor(rnd() * nRooms)]!.id);
  return state;
}

export function fakeCandidate(nRooms = 3): Candidate {
  const elements = [];
  const trace: number[][] = [[], []];
  for (let i = 0; i < nRooms; i++) {
    const box = [10 * i, 10 * i, 10 * i + 40, 10 * i + 30] as [number, number, number, number];
    elements.push({ room_index: i, category: "bedroom" as const, box });
    trace[0]!.push(box[0] + 1, box[1] + 1, box[2] + 1, box[3] + 1);
    trace[1]!.push(...box);
  }
  return {
    candidate_id: "c0",
    session_id: "s0",
    floorplan: { vocab_version: "v", elements },
    trace,
    compatibility: 0,
  };
}
