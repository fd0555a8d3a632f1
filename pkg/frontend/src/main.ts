/**
 * Browser entry point: wires the diagram editor, candidate gallery, and plan
 * editor to a running floorplan service. All state lives in the editor
 * classes; this file only translates DOM events into state calls and redraws.
 */

import { loadConfig, PlanServiceClient } from "./apiClient.js";
import { DiagramCanvasState } from "./diagramEditor.js";
import { GalleryState } from "./gallery.js";
import { DEFAULT_REFINE_ITERS, MAX_REFINE_ITERS, MIN_REFINE_ITERS, PlanEditorState } from "./planEditor.js";
import { Candidate, ROOM_CATEGORIES } from "./schema.js";

const CONFIG_URL = "./config.json";

interface App {
  client: PlanServiceClient;
  diagram: DiagramCanvasState;
  gallery: GalleryState;
  plan: PlanEditorState | null;
  sessionId: string | null;
  baseCandidate: Candidate | null;
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function renderIssues(app: App): void {
  const list = el<HTMLUListElement>("issues");
  list.innerHTML = "";
  for (const issue of app.diagram.validate()) {
    const li = document.createElement("li");
    li.className = "issue";
    li.dataset.node = issue.nodeId ?? "";
    li.textContent = issue.nodeId ? `${issue.nodeId}: ${issue.message}` : issue.message;
    list.appendChild(li);
  }
  el<HTMLButtonElement>("submit-diagram").disabled = !app.diagram.canSubmit;
}

function renderDiagram(app: App): void {
  const canvas = el<HTMLDivElement>("diagram-canvas");
  canvas.innerHTML = "";
  for (const n of app.diagram.nodes) {
    const div = document.createElement("div");
    div.className = `bubble ${n.category}`;
    div.dataset.id = n.id;
    div.style.left = `${n.x}px`;
    div.style.top = `${n.y}px`;
    div.textContent = n.category;
    canvas.appendChild(div);
  }
  renderIssues(app);
}

function renderGallery(app: App): void {
  const grid = el<HTMLDivElement>("gallery");
  grid.innerHTML = "";
  if (app.gallery.status === "error" && app.gallery.error) {
    const msg = document.createElement("p");
    msg.textContent = app.gallery.error.message;
    grid.appendChild(msg);
    if (app.gallery.error.retryable) {
      const retry = document.createElement("button");
      retry.textContent = "Retry";
      retry.onclick = () => app.gallery.retry().then(() => renderGallery(app));
      grid.appendChild(retry);
    }
    return;
  }
  if (app.gallery.isEmpty) {
    const msg = document.createElement("p");
    msg.className = "empty";
    msg.textContent = "No candidates yet — submit a diagram and generate.";
    grid.appendChild(msg);
    return;
  }
  for (const item of app.gallery.items) {
    const card = document.createElement("figure");
    card.className = "candidate";
    card.innerHTML = item.svg ?? "";
    const badge = document.createElement("figcaption");
    badge.className = "badge";
    badge.textContent = `compatibility ${item.badge}`;
    card.appendChild(badge);
    card.onclick = () => openPlan(app, item.candidate);
    grid.appendChild(card);
  }
}

function renderPlan(app: App): void {
  const canvas = el<HTMLDivElement>("plan-canvas");
  canvas.innerHTML = "";
  if (!app.plan) return;
  for (const r of app.plan.rooms) {
    const div = document.createElement("div");
    div.className = `room ${r.category}${r.locked ? " locked" : ""}`;
    div.dataset.id = r.nodeId;
    const [xL, yT, xR, yB] = r.box;
    div.style.left = `${xL}px`;
    div.style.top = `${yT}px`;
    div.style.width = `${xR - xL}px`;
    div.style.height = `${yB - yT}px`;
    div.ondblclick = () => {
      app.plan!.setLocked(r.nodeId, !r.locked);
      renderPlan(app);
    };
    canvas.appendChild(div);
  }
  const scrubber = el<HTMLInputElement>("trace-scrubber");
  scrubber.max = String(Math.max(0, app.plan.trace.length - 1));
  scrubber.value = String(app.plan.traceIndex);
}

function openPlan(app: App, cand: Candidate): void {
  app.plan = PlanEditorState.fromCandidate(cand, app.gallery.nodeOrder);
  app.baseCandidate = cand;
  renderPlan(app);
}

async function submitDiagram(app: App): Promise<void> {
  const { session_id } = await app.client.createSession(app.diagram.toDiagram());
  app.sessionId = session_id;
  el<HTMLButtonElement>("generate").disabled = false;
}

async function generate(app: App): Promise<void> {
  if (!app.sessionId) return;
  await app.gallery.populate(app.sessionId, {
    num_candidates: Number(el<HTMLInputElement>("num-candidates").value || "4"),
    seed: Number(el<HTMLInputElement>("seed").value || "0"),
    top_k: 5,
    refine_iters: app.plan?.refineIters ?? DEFAULT_REFINE_ITERS,
    locks: app.plan?.lockedBoxes ?? {},
  });
  renderGallery(app);
}

async function refine(app: App): Promise<void> {
  if (!app.sessionId || !app.plan || !app.baseCandidate) return;
  const refined = await app.client.refine(app.sessionId, {
    candidate_id: app.baseCandidate.candidate_id,
    edits: app.plan.editsAgainst(app.baseCandidate.floorplan),
    iters: app.plan.refineIters,
  });
  app.plan.adoptCandidate(refined);
  app.baseCandidate = refined;
  renderPlan(app);
}

export async function boot(): Promise<void> {
  const res = await fetch(CONFIG_URL);
  const cfg = loadConfig(await res.text());
  const client = new PlanServiceClient(cfg);
  const app: App = {
    client,
    diagram: new DiagramCanvasState(),
    gallery: new GalleryState(client),
    plan: null,
    sessionId: null,
    baseCandidate: null,
  };

  const palette = el<HTMLSelectElement>("room-category");
  for (const cat of ROOM_CATEGORIES) {
    const opt = document.createElement("option");
    opt.value = cat;
    opt.textContent = cat;
    palette.appendChild(opt);
  }
  el<HTMLButtonElement>("add-room").onclick = () => {
    app.diagram.addRoom(palette.value as (typeof ROOM_CATEGORIES)[number], 40, 40);
    renderDiagram(app);
  };
  el<HTMLButtonElement>("submit-diagram").onclick = () => submitDiagram(app);
  el<HTMLButtonElement>("generate").onclick = () => generate(app);
  el<HTMLButtonElement>("refine").onclick = () => refine(app);
  el<HTMLButtonElement>("undo").onclick = () => {
    app.plan?.undo();
    renderPlan(app);
  };
  const iters = el<HTMLInputElement>("refine-iters");
  iters.min = String(MIN_REFINE_ITERS);
  iters.max = String(MAX_REFINE_ITERS);
  iters.value = String(DEFAULT_REFINE_ITERS);
  iters.onchange = () => app.plan?.setRefineIters(Number(iters.value));
  el<HTMLInputElement>("trace-scrubber").oninput = (ev) => {
    app.plan?.scrubTrace(Number((ev.target as HTMLInputElement).value));
    renderPlan(app);
  };

  const health = await client.health();
  el<HTMLSpanElement>("health").textContent = health.status;
  renderDiagram(app);
  renderGallery(app);
}

if (typeof document !== "undefined" && document.getElementById("diagram-canvas")) {
  boot().catch((err) => console.error(err));
}
