/** Typed client for the review-service HTTP API. */

import type { Rle } from "./rle.js";

export interface ReviewItem {
  item_id: string;
  image_path: string;
  masks: Rle[];
  instruction: string;
  answer: string;
  source_stage: "mask_review" | "qa_review";
  audit_of: string | null;
}

export interface Lease {
  item: ReviewItem;
  lease_expiry: number;
}

export interface Rubric {
  object_recognition: boolean;
  spatial_logic: boolean;
  mask_quality: boolean;
  grammar: boolean;
}

export interface Decision {
  item_id: string;
  reviewer_id: string;
  rubric: Rubric;
  verdict: "accept" | "reject";
  notes: string;
  revise?: boolean;
}

export interface Progress {
  pending: number;
  leased: number;
  accepted: number;
  rejected: number;
  acceptance_rate: number | null;
}

/** Server refusal (403/404/409/422) with the exact reason it sent. */
export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function refusal(resp: Response): Promise<ApiError> {
  let detail = resp.statusText;
  try {
    const body = await resp.json();
    if (typeof body.detail === "string") detail = body.detail;
    else if (body.detail) detail = JSON.stringify(body.detail);
  } catch {
    /* non-JSON body: keep statusText */
  }
  return new ApiError(resp.status, detail);
}

export class ReviewApi {
  constructor(private base: string = "") {}

  /** Lease the next item; null means the queue is idle (HTTP 204). */
  async fetchNext(reviewer: string): Promise<Lease | null> {
    const resp = await fetch(
      `${this.base}/api/queue/next?reviewer=${encodeURIComponent(reviewer)}`,
    );
    if (resp.status === 204) return null;
    if (!resp.ok) throw await refusal(resp);
    return (await resp.json()) as Lease;
  }

  async submitDecision(decision: Decision): Promise<void> {
    const resp = await fetch(`${this.base}/api/decision`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(decision),
    });
    if (!resp.ok) throw await refusal(resp);
  }

  async fetchItem(itemId: string): Promise<ReviewItem> {
    const resp = await fetch(`${this.base}/api/item/${encodeURIComponent(itemId)}`);
    if (!resp.ok) throw await refusal(resp);
    return (await resp.json()) as ReviewItem;
  }

  async fetchProgress(): Promise<Progress> {
    const resp = await fetch(`${this.base}/api/progress`);
    if (!resp.ok) throw await refusal(resp);
    return (await resp.json()) as Progress;
  }
}
