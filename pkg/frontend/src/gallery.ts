/**
 * Candidate gallery state: thumbnails fetched from the render endpoint, a
 * compatibility badge per candidate, and explicit empty/error states so the
 * view layer stays declarative.
 */

import { ApiError, PlanServiceClient } from "./apiClient.js";
import { Candidate, GenerateRequest } from "./schema.js";

export interface GalleryItem {
  candidate: Candidate;
  /** Inline SVG markup, or null until the thumbnail loads. */
  svg: string | null;
  /** Graph-compatibility score shown as a badge; 0 means a perfect match. */
  badge: number;
}

export type GalleryStatus = "empty" | "loading" | "ready" | "error";

export class GalleryState {
  items: GalleryItem[] = [];
  /** Diagram node id per floorplan element, as reported by the service. */
  nodeOrder: string[] = [];
  status: GalleryStatus = "empty";
  error: { message: string; retryable: boolean } | null = null;
  private lastRequest: { sessionId: string; req: GenerateRequest } | null = null;

  constructor(private client: PlanServiceClient) {}

  get isEmpty(): boolean {
    return this.items.length === 0;
  }

  /** Generate n candidates and load their thumbnails. */
  async populate(sessionId: string, req: GenerateRequest): Promise<void> {
    this.lastRequest = { sessionId, req };
    this.status = "loading";
    this.error = null;
    try {
      const res = await this.client.generate(sessionId, req);
      this.nodeOrder = res.node_order;
      this.items = res.candidates.map((c) => ({
        candidate: c,
        svg: null,
        badge: c.compatibility,
      }));
      for (const item of this.items) {
        item.svg = await this.client.render(item.candidate.candidate_id);
      }
      this.status = this.items.length === 0 ? "empty" : "ready";
    } catch (err) {
      this.items = [];
      this.status = "error";
      this.error =
        err instanceof ApiError
          ? { message: `service returned ${err.status}`, retryable: err.retryable }
          : { message: String(err), retryable: false };
    }
  }

  /** Re-issue the previous request, e.g. after a transient service error. */
  async retry(): Promise<void> {
    if (!this.lastRequest) throw new Error("nothing to retry");
    await this.populate(this.lastRequest.sessionId, this.lastRequest.req);
  }

  byId(candidateId: string): GalleryItem {
    const item = this.items.find((i) => i.candidate.candidate_id === candidateId);
    if (!item) throw new Error(`unknown candidate ${candidateId}`);
    return item;
  }
}
