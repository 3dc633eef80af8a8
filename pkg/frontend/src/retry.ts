/** Durable queue for verdicts that could not reach the service.
 *
 * The client is stateless across reloads except for this queue: a verdict is
 * staged into storage before the POST and removed only after the service
 * acknowledges (or permanently rejects) it, so a network failure or a reload
 * mid-flight never loses a decision.
 */

import type { VerdictBody } from "./types.js";

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export interface PendingVerdict {
  itemId: string;
  body: VerdictBody;
  queuedAt: number;
}

const KEY = "ptmkit-unsent-verdicts";

export class VerdictOutbox {
  constructor(private readonly storage: StorageLike) {}

  list(): PendingVerdict[] {
    const raw = this.storage.getItem(KEY);
    if (!raw) return [];
    try {
      return JSON.parse(raw) as PendingVerdict[];
    } catch {
      return [];
    }
  }

  private write(entries: PendingVerdict[]): void {
    if (entries.length === 0) {
      this.storage.removeItem(KEY);
    } else {
      this.storage.setItem(KEY, JSON.stringify(entries));
    }
  }

  enqueue(itemId: string, body: VerdictBody): void {
    const entries = this.list().filter((e) => e.itemId !== itemId);
    entries.push({ itemId, body, queuedAt: Date.now() });
    this.write(entries);
  }

  remove(itemId: string): void {
    this.write(this.list().filter((e) => e.itemId !== itemId));
  }

  get size(): number {
    return this.list().length;
  }

  /** Retry every queued verdict; entries stay queued unless acknowledged or
   * permanently rejected (conflict/not-found are terminal). */
  async flush(
    send: (itemId: string, body: VerdictBody) => Promise<void>,
    isTerminal: (error: unknown) => boolean,
  ): Promise<{ sent: number; remaining: number }> {
    let sent = 0;
    for (const entry of this.list()) {
      try {
        await send(entry.itemId, entry.body);
        this.remove(entry.itemId);
        sent += 1;
      } catch (error) {
        if (isTerminal(error)) {
          this.remove(entry.itemId);
        }
        // transient: keep queued for the next flush
      }
    }
    return { sent, remaining: this.size };
  }
}
