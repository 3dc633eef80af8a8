/** Review-session view state: one in-flight verdict at a time, optimistic
 * progression through the pending queue. */

import { hasTriggerSpan, segment, type Segment } from "./highlight.js";
import type { CurationItem, Decision } from "./types.js";

export interface ProgressCounters {
  reviewed: number;
  total: number;
}

export class ReviewState {
  queue: CurationItem[] = [];
  index = 0;
  decision: Decision | null = null;
  category: string | null = null;
  reviewer = "";
  progress: Record<string, ProgressCounters> = {};

  loadQueue(items: CurationItem[]): void {
    this.queue = items.filter((i) => i.status === "pending");
    this.index = 0;
    this.decision = null;
    this.category = null;
    this.progress = {};
    for (const item of items) {
      const entry = (this.progress[item.ptm] ??= { reviewed: 0, total: 0 });
      entry.total += 1;
      if (item.status === "reviewed") entry.reviewed += 1;
    }
  }

  get current(): CurationItem | null {
    return this.queue[this.index] ?? null;
  }

  get segments(): Segment[] {
    const item = this.current;
    return item ? segment(item.text, item.spans) : [];
  }

  /** Mirrors the no-trigger-word error class: warn when the abstract carries
   * no trigger-stem span for the predicted PTM. */
  get noTriggerWarning(): boolean {
    const item = this.current;
    return item !== null && !hasTriggerSpan(item.spans);
  }

  selectDecision(decision: Decision): void {
    this.decision = decision;
    if (decision !== "incorrect") this.category = null;
  }

  selectCategory(category: string): void {
    if (this.decision !== "incorrect") return; // selector is disabled
    this.category = category;
  }

  get categoryEnabled(): boolean {
    return this.decision === "incorrect";
  }

  /** Complete = a decision, plus a category exactly when incorrect. */
  get complete(): boolean {
    if (this.current === null || this.decision === null) return false;
    if (this.decision === "incorrect") return this.category !== null;
    return this.category === null;
  }

  get submitEnabled(): boolean {
    return this.complete;
  }

  /** 1/2/3 -> correct/incorrect/unsure. */
  handleKey(key: string): boolean {
    const mapping: Record<string, Decision> = { "1": "correct", "2": "incorrect", "3": "unsure" };
    const decision = mapping[key];
    if (!decision) return false;
    this.selectDecision(decision);
    return true;
  }

  buildVerdict(): { decision: Decision; category?: string; reviewer: string } {
    if (!this.complete || this.decision === null) throw new Error("verdict incomplete");
    const body: { decision: Decision; category?: string; reviewer: string } = {
      decision: this.decision,
      reviewer: this.reviewer,
    };
    if (this.decision === "incorrect" && this.category !== null) body.category = this.category;
    return body;
  }

  /** Advance past the current item after an acknowledged (or skipped) verdict. */
  advance(reviewed: boolean): void {
    const item = this.current;
    if (item && reviewed) {
      const entry = (this.progress[item.ptm] ??= { reviewed: 0, total: 1 });
      entry.reviewed += 1;
    }
    this.queue.splice(this.index, 1);
    if (this.index >= this.queue.length) this.index = Math.max(0, this.queue.length - 1);
    this.decision = null;
    this.category = null;
  }

  get done(): boolean {
    return this.queue.length === 0;
  }
}
