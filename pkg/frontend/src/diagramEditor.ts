/**
 * State model for the bubble-diagram editor: rooms and doors placed on a
 * canvas, with door-mediated connections. Exports losslessly to the wire
 * format accepted by POST /v1/sessions.
 */

import {
  BubbleDiagram,
  Category,
  bubbleDiagramSchema,
  isDoor,
} from "./schema.js";

export interface DiagramNode {
  id: string;
  category: Category;
  /** Canvas position, purely presentational. */
  x: number;
  y: number;
}

export interface DiagramEdge {
  a: string;
  b: string;
}

export interface ValidationIssue {
  nodeId: string | null;
  message: string;
}

export class DiagramEditorError extends Error {}

export class DiagramCanvasState {
  nodes: DiagramNode[] = [];
  edges: DiagramEdge[] = [];
  private counter = 0;

  private freshId(prefix: string): string {
    let id: string;
    do {
      id = `${prefix}${this.counter++}`;
    } while (this.nodes.some((n) => n.id === id));
    return id;
  }

  node(id: string): DiagramNode {
    const n = this.nodes.find((n) => n.id === id);
    if (!n) throw new DiagramEditorError(`unknown node ${id}`);
    return n;
  }

  hasEdge(a: string, b: string): boolean {
    return this.edges.some(
      (e) => (e.a === a && e.b === b) || (e.a === b && e.b === a)
    );
  }

  addRoom(category: Category, x = 0, y = 0): DiagramNode {
    if (isDoor(category))
      throw new DiagramEditorError(`${category} is not a room category`);
    const n = { id: this.freshId("r"), category, x, y };
    this.nodes.push(n);
    return n;
  }

  addFrontDoor(roomId: string, x = 0, y = 0): DiagramNode {
    const room = this.node(roomId);
    if (isDoor(room.category))
      throw new DiagramEditorError("front door must attach to a room");
    const door: DiagramNode = { id: this.freshId("fd"), category: "front_door", x, y };
    this.nodes.push(door);
    this.edges.push({ a: door.id, b: roomId });
    return door;
  }

  /**
   * Connect two rooms. Rooms never touch directly: an interior-door node is
   * inserted between them automatically, midway on the canvas.
   */
  connectRooms(roomA: string, roomB: string): DiagramNode {
    const a = this.node(roomA);
    const b = this.node(roomB);
    if (roomA === roomB)
      throw new DiagramEditorError("cannot connect a room to itself");
    if (isDoor(a.category) || isDoor(b.category))
      throw new DiagramEditorError("connectRooms takes two room nodes");
    const door: DiagramNode = {
      id: this.freshId("d"),
      category: "interior_door",
      x: (a.x + b.x) / 2,
      y: (a.y + b.y) / 2,
    };
    this.nodes.push(door);
    this.edges.push({ a: door.id, b: roomA });
    this.edges.push({ a: door.id, b: roomB });
    return door;
  }

  /** Delete a node and every edge touching it. */
  deleteNode(id: string): void {
    this.node(id);
    this.nodes = this.nodes.filter((n) => n.id !== id);
    this.edges = this.edges.filter((e) => e.a !== id && e.b !== id);
  }

  moveNode(id: string, x: number, y: number): void {
    const n = this.node(id);
    n.x = x;
    n.y = y;
  }

  /**
   * Inline validation shown next to the offending node. Submission is
   * blocked while any issue remains.
   */
  validate(): ValidationIssue[] {
    const issues: ValidationIssue[] = [];
    const degree = new Map<string, number>();
    for (const e of this.edges) {
      degree.set(e.a, (degree.get(e.a) ?? 0) + 1);
      degree.set(e.b, (degree.get(e.b) ?? 0) + 1);
    }
    for (const n of this.nodes) {
      if (isDoor(n.category) && (degree.get(n.id) ?? 0) === 0)
        issues.push({ nodeId: n.id, message: "door is not attached to any room" });
    }
    if (this.nodes.length === 0)
      issues.push({ nodeId: null, message: "diagram is empty" });
    const frontDoors = this.nodes.filter((n) => n.category === "front_door");
    if (frontDoors.length === 0 && this.nodes.length > 0)
      issues.push({ nodeId: null, message: "diagram needs a front door" });
    return issues;
  }

  get canSubmit(): boolean {
    return this.validate().length === 0;
  }

  /** Wire-format export; this exact document is posted to /v1/sessions. */
  toDiagram(): BubbleDiagram {
    const issues = this.validate();
    if (issues.length > 0)
      throw new DiagramEditorError(
        `cannot export: ${issues.map((i) => i.message).join("; ")}`
      );
    return bubbleDiagramSchema.parse({
      nodes: this.nodes.map((n) => ({ id: n.id, category: n.category })),
      edges: this.edges.map((e) => [e.a, e.b]),
    });
  }

  /** Full canvas serialization, including positions. Lossless. */
  serialize(): string {
    return JSON.stringify({
      nodes: this.nodes,
      edges: this.edges,
      counter: this.counter,
    });
  }

  static parse(text: string): DiagramCanvasState {
    const doc = JSON.parse(text);
    if (!doc || !Array.isArray(doc.nodes) || !Array.isArray(doc.edges))
      throw new DiagramEditorError("malformed canvas document");
    const state = new DiagramCanvasState();
    state.nodes = doc.nodes.map((n: DiagramNode) => ({ ...n }));
    state.edges = doc.edges.map((e: DiagramEdge) => ({ ...e }));
    state.counter = typeof doc.counter === "number" ? doc.counter : 0;
    return state;
  }
}
