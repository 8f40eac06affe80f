/**
 * Review workstation: image + mask overlay on the left, QA text and the
 * four-point rubric on the right. Keyboard-first: M toggles the overlay,
 * 1-4 toggle rubric checks, A accepts, R rejects.
 *
 * One in-flight decision at a time and no item prefetch: leases are
 * exclusive, so the next item is only fetched after the server acknowledges
 * the current decision.
 */

import { ApiError, ReviewApi } from "./api.js";
import type { ReviewItem, Rubric } from "./api.js";
import {
  RUBRIC_FLAGS,
  RUBRIC_LABELS,
  canAccept,
  canReject,
  editableFlags,
  initialRubric,
} from "./form.js";
import type { RubricFlag } from "./form.js";
import { renderOverlay } from "./overlay.js";

const POLL_IDLE_MS = 3000;
const POLL_PROGRESS_MS = 2500;

interface Els {
  root: HTMLElement;
  image: HTMLImageElement;
  overlay: HTMLCanvasElement;
  stageBadge: HTMLElement;
  instruction: HTMLElement;
  answer: HTMLElement;
  rubricBox: HTMLElement;
  notes: HTMLTextAreaElement;
  accept: HTMLButtonElement;
  reject: HTMLButtonElement;
  banner: HTMLElement;
  idle: HTMLElement;
  workspace: HTMLElement;
  reviewer: HTMLInputElement;
  opacity: HTMLInputElement;
  progress: HTMLElement;
  progressBar: HTMLElement;
  stale: HTMLElement;
}

export class App {
  private item: ReviewItem | null = null;
  private rubric: Rubric = initialRubric("qa_review");
  private submitting = false;
  private overlayVisible = true;
  private idleTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(private els: Els, private api: ReviewApi) {}

  start(): void {
    this.els.reviewer.value = localStorage.getItem("reviewer") ?? "";
    this.els.accept.addEventListener("click", () => void this.submit("accept"));
    this.els.reject.addEventListener("click", () => void this.submit("reject"));
    this.els.notes.addEventListener("input", () => this.refreshButtons());
    this.els.opacity.addEventListener("input", () => this.applyOverlayStyle());
    this.els.reviewer.addEventListener("change", () => {
      localStorage.setItem("reviewer", this.els.reviewer.value.trim());
      void this.loadNext();
    });
    document.addEventListener("keydown", (ev) => this.onKey(ev));
    void this.loadNext();
    void this.pollProgress();
  }

  // -- queue flow -------------------------------------------------------------

  async loadNext(): Promise<void> {
    if (this.idleTimer) clearTimeout(this.idleTimer);
    const reviewer = this.els.reviewer.value.trim();
    if (!reviewer) {
      this.showIdle("Enter a reviewer id to start.");
      return;
    }
    try {
      const lease = await this.api.fetchNext(reviewer);
      if (lease === null) {
        this.showIdle("Queue is empty. Waiting for work…");
        this.idleTimer = setTimeout(() => void this.loadNext(), POLL_IDLE_MS);
        return;
      }
      this.renderItem(lease.item);
    } catch (err) {
      this.showError(err);
      this.idleTimer = setTimeout(() => void this.loadNext(), POLL_IDLE_MS);
    }
  }

  private renderItem(item: ReviewItem): void {
    this.item = item;
    this.rubric = initialRubric(item.source_stage);
    this.els.notes.value = "";
    this.clearError();
    this.els.idle.hidden = true;
    this.els.workspace.hidden = false;

    this.els.stageBadge.textContent =
      (item.source_stage === "mask_review" ? "mask review" : "QA review") +
      (item.audit_of ? ` · audit of ${item.audit_of}` : "");
    this.els.instruction.textContent = item.instruction;
    this.els.answer.textContent = item.answer;

    const src = item.image_path.startsWith("/")
      ? item.image_path
      : `/${item.image_path}`;
    this.els.image.src = src;
    this.els.image.alt = item.item_id;

    renderOverlay(this.els.overlay, item.masks);
    this.overlayVisible = true;
    this.applyOverlayStyle();
    this.renderRubric();
    this.refreshButtons();
  }

  private showIdle(message: string): void {
    this.item = null;
    this.els.workspace.hidden = true;
    this.els.idle.hidden = false;
    this.els.idle.textContent = message;
  }

  // -- decision form ----------------------------------------------------------

  private renderRubric(): void {
    if (!this.item) return;
    const editable = new Set(editableFlags(this.item.source_stage));
    this.els.rubricBox.replaceChildren();
    RUBRIC_FLAGS.forEach((flag, index) => {
      const row = document.createElement("label");
      row.className = "rubric-row";
      const box = document.createElement("input");
      box.type = "checkbox";
      box.id = `rubric-${flag}`;
      box.checked = this.rubric[flag];
      box.disabled = !editable.has(flag);
      box.addEventListener("change", () => {
        this.rubric[flag] = box.checked;
        this.refreshButtons();
      });
      const text = document.createElement("span");
      text.textContent = `${index + 1}. ${RUBRIC_LABELS[flag]}`;
      row.append(box, text);
      this.els.rubricBox.append(row);
    });
  }

  toggleRubric(flag: RubricFlag): void {
    if (!this.item) return;
    if (!editableFlags(this.item.source_stage).includes(flag)) return;
    this.rubric[flag] = !this.rubric[flag];
    const box = document.getElementById(`rubric-${flag}`) as HTMLInputElement | null;
    if (box) box.checked = this.rubric[flag];
    this.refreshButtons();
  }

  private refreshButtons(): void {
    const busy = this.submitting || !this.item;
    this.els.accept.disabled = busy || !canAccept(this.rubric);
    this.els.reject.disabled = busy || !canReject(this.rubric, this.els.notes.value);
  }

  async submit(verdict: "accept" | "reject"): Promise<void> {
    if (!this.item || this.submitting) return;
    if (verdict === "accept" && !canAccept(this.rubric)) return;
    if (verdict === "reject" && !canReject(this.rubric, this.els.notes.value)) return;
    this.submitting = true;
    this.refreshButtons();
    try {
      await this.api.submitDecision({
        item_id: this.item.item_id,
        reviewer_id: this.els.reviewer.value.trim(),
        rubric: { ...this.rubric },
        verdict,
        notes: this.els.notes.value,
      });
      this.clearError();
      await this.loadNext();
    } catch (err) {
      this.showError(err); // 403/409/422 reasons shown verbatim
    } finally {
      this.submitting = false;
      this.refreshButtons();
    }
  }

  // -- overlay ----------------------------------------------------------------

  toggleOverlay(): void {
    this.overlayVisible = !this.overlayVisible;
    this.applyOverlayStyle();
  }

  private applyOverlayStyle(): void {
    this.els.overlay.style.opacity = this.overlayVisible
      ? this.els.opacity.value
      : "0";
  }

  // -- progress ---------------------------------------------------------------

  private async pollProgress(): Promise<void> {
    try {
      const p = await this.api.fetchProgress();
      const done = p.accepted + p.rejected;
      const total = done + p.pending + p.leased;
      const rate =
        p.acceptance_rate === null ? "—" : `${(100 * p.acceptance_rate).toFixed(0)}%`;
      this.els.progress.textContent =
        `${done}/${total} decided · ${p.accepted} accepted · ` +
        `${p.rejected} rejected · acceptance ${rate}`;
      this.els.progressBar.style.width = total ? `${(100 * done) / total}%` : "0%";
      this.els.stale.hidden = true;
    } catch {
      this.els.stale.hidden = false;
    }
    setTimeout(() => void this.pollProgress(), POLL_PROGRESS_MS);
  }

  // -- keyboard ---------------------------------------------------------------

  private onKey(ev: KeyboardEvent): void {
    const target = ev.target as HTMLElement | null;
    if (
      target instanceof HTMLInputElement && target.type !== "checkbox" ||
      target instanceof HTMLTextAreaElement
    ) {
      return; // typing, not commanding
    }
    const flagByDigit: Record<string, RubricFlag> = {
      "1": "object_recognition",
      "2": "spatial_logic",
      "3": "mask_quality",
      "4": "grammar",
    };
    const key = ev.key.toLowerCase();
    if (key === "m") {
      ev.preventDefault();
      this.toggleOverlay();
    } else if (key in flagByDigit) {
      ev.preventDefault();
      this.toggleRubric(flagByDigit[key]);
    } else if (key === "a") {
      ev.preventDefault();
      void this.submit("accept");
    } else if (key === "r") {
      ev.preventDefault();
      void this.submit("reject");
    }
  }

  private showError(err: unknown): void {
    const message =
      err instanceof ApiError
        ? `Server refused (${err.status}): ${err.detail}`
        : `Request failed: ${String(err)}`;
    this.els.banner.textContent = message;
    this.els.banner.hidden = false;
  }

  private clearError(): void {
    this.els.banner.hidden = true;
    this.els.banner.textContent = "";
  }
}

export function bootstrap(doc: Document, api: ReviewApi = new ReviewApi("")): App {
  const byId = <T extends HTMLElement>(id: string): T => {
    const el = doc.getElementById(id);
    if (!el) throw new Error(`missing element #${id}`);
    return el as T;
  };
  const app = new App(
    {
      root: byId("app"),
      image: byId<HTMLImageElement>("scene"),
      overlay: byId<HTMLCanvasElement>("overlay"),
      stageBadge: byId("stage-badge"),
      instruction: byId("instruction"),
      answer: byId("answer"),
      rubricBox: byId("rubric"),
      notes: byId<HTMLTextAreaElement>("notes"),
      accept: byId<HTMLButtonElement>("accept"),
      reject: byId<HTMLButtonElement>("reject"),
      banner: byId("banner"),
      idle: byId("idle"),
      workspace: byId("workspace"),
      reviewer: byId<HTMLInputElement>("reviewer"),
      opacity: byId<HTMLInputElement>("opacity"),
      progress: byId("progress"),
      progressBar: byId("progress-bar"),
      stale: byId("stale"),
    },
    api,
  );
  app.start();
  return app;
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  bootstrap(document);
}
