/**
 * Thin fetch client for the /v1 floorplan service. Every response is parsed
 * against the wire schemas; the client carries no model math of its own.
 */

import {
  BubbleDiagram,
  Candidate,
  GenerateRequest,
  GenerateResponse,
  RefineRequest,
  Session,
  candidateSchema,
  generateRequestSchema,
  generateResponseSchema,
  healthSchema,
  refineRequestSchema,
  refineResponseSchema,
  sessionSchema,
} from "./schema.js";

export interface ClientConfig {
  /** Base URL of the service, e.g. "http://localhost:8000". */
  endpoint: string;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: unknown
  ) {
    super(`service returned ${status}`);
  }
  /** Server-side 5xx and network failures are worth retrying; 4xx are not. */
  get retryable(): boolean {
    return this.status === 0 || this.status >= 500;
  }
}

async function parseBody(res: Response): Promise<unknown> {
  const text = await res.text();
  try {
    return JSON.parse(text);
  } catch {
    return text;
  }
}

export class PlanServiceClient {
  constructor(private cfg: ClientConfig) {}

  private url(path: string): string {
    return this.cfg.endpoint.replace(/\/$/, "") + path;
  }

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    let res: Response;
    try {
      res = await fetch(this.url(path), {
        headers: { "content-type": "application/json" },
        ...init,
      });
    } catch (err) {
      throw new ApiError(0, String(err));
    }
    const body = await parseBody(res);
    if (!res.ok) throw new ApiError(res.status, body);
    return body;
  }

  async health() {
    return healthSchema.parse(await this.request("/v1/health"));
  }

  async createSession(diagram: BubbleDiagram): Promise<{ session_id: string }> {
    const body = await this.request("/v1/sessions", {
      method: "POST",
      body: JSON.stringify({ diagram }),
    });
    return body as { session_id: string };
  }

  async getSession(sessionId: string): Promise<Session> {
    return sessionSchema.parse(
      await this.request(`/v1/sessions/${encodeURIComponent(sessionId)}`)
    );
  }

  async generate(sessionId: string, req: GenerateRequest): Promise<GenerateResponse> {
    const payload = generateRequestSchema.parse(req);
    const body = await this.request(
      `/v1/sessions/${encodeURIComponent(sessionId)}/generate`,
      { method: "POST", body: JSON.stringify(payload) }
    );
    return generateResponseSchema.parse(body);
  }

  async refine(sessionId: string, req: RefineRequest): Promise<Candidate> {
    const payload = refineRequestSchema.parse(req);
    const body = await this.request(
      `/v1/sessions/${encodeURIComponent(sessionId)}/refine`,
      { method: "POST", body: JSON.stringify(payload) }
    );
    return refineResponseSchema.parse(body);
  }

  /** SVG markup for a candidate thumbnail. */
  async render(candidateId: string): Promise<string> {
    let res: Response;
    const path = `/v1/render/${encodeURIComponent(candidateId)}.svg`;
    try {
      res = await fetch(this.url(path));
    } catch (err) {
      throw new ApiError(0, String(err));
    }
    const text = await res.text();
    if (!res.ok) throw new ApiError(res.status, text);
    return text;
  }
}

/** The only configuration the UI takes: a JSON blob naming the endpoint. */
export function loadConfig(text: string): ClientConfig {
  const doc = JSON.parse(text);
  if (!doc || typeof doc.endpoint !== "string" || doc.endpoint.length === 0)
    throw new Error('config must be {"endpoint": "<service url>"}');
  return { endpoint: doc.endpoint };
}

export function candidateFromJson(doc: unknown): Candidate {
  return candidateSchema.parse(doc);
}
