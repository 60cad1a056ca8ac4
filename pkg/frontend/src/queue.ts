/** Client-side card buffer. The server owns the real queue and hands each
 * pending pair to one client at a time; this buffer only prefetches a few
 * cards ahead so the annotator never waits on the network between verdicts. */

import { PairCard, QueueNextResponse } from './types.js';

export interface CardSource {
  nextPair(): Promise<QueueNextResponse>;
}

export class CardBuffer {
  private cards: PairCard[] = [];
  private held = new Set<string>();

  constructor(
    private readonly source: CardSource,
    private readonly prefetchTarget = 3,
  ) {}

  get size(): number {
    return this.cards.length;
  }

  current(): PairCard | null {
    return this.cards[0] ?? null;
  }

  /** Pull from the server until the buffer is full or the queue runs dry. */
  async fill(): Promise<void> {
    while (this.cards.length < this.prefetchTarget) {
      const body = await this.source.nextPair();
      if (body.pair === null || !body.pair_id || !body.tracklets) return;
      if (this.held.has(body.pair_id)) return; // server re-issued a held pair
      this.held.add(body.pair_id);
      this.cards.push({
        pairId: body.pair_id,
        pair: body.pair,
        distance: body.distance ?? null,
        tracklets: body.tracklets,
      });
    }
  }

  /** Drop the front card (after a verdict, a skip, or a 409 dismissal). */
  advance(): void {
    const front = this.cards.shift();
    if (front) this.held.delete(front.pairId);
  }

  /** Drop a specific card wherever it sits (conflict notices). */
  dismiss(pairId: string): void {
    this.cards = this.cards.filter((c) => c.pairId !== pairId);
    this.held.delete(pairId);
  }

  /** Forget everything; used when the engine generation moves on. */
  clear(): void {
    this.cards = [];
    this.held.clear();
  }
}
