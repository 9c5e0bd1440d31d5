// Request tracking: every submitted solve becomes a card keyed by its
// correlation id, updated by terminal events from the stream. Pure
// reducers over an immutable tracker value — a terminal event touches
// exactly one card, and events for unknown ids leave the tracker
// untouched (same object back).

import type { ErrorDetail, PlanStepDiff, SearchStats, TerminalEvent } from './api.js';

export type Phase = 'pending' | 'done' | 'failed';

export interface RequestCard {
  correlationId: string;
  planner: string;
  /** Where the model text came from: an examples-menu title or 'custom'. */
  label: string;
  submittedAtMs: number;
  phase: Phase;
  outcome?: string;
  plan?: string[];
  length?: number;
  stats?: Partial<SearchStats>;
  steps?: PlanStepDiff[];
  error?: ErrorDetail;
}

export interface Tracker {
  /** Correlation ids, newest first. */
  order: string[];
  cards: Record<string, RequestCard>;
}

export const emptyTracker: Tracker = { order: [], cards: {} };

export interface Submission {
  correlationId: string;
  planner: string;
  label: string;
  submittedAtMs: number;
}

export function trackSubmit(tracker: Tracker, submission: Submission): Tracker {
  const card: RequestCard = { ...submission, phase: 'pending' };
  return {
    order: [submission.correlationId, ...tracker.order],
    cards: { ...tracker.cards, [submission.correlationId]: card },
  };
}

export function applyEvent(tracker: Tracker, event: TerminalEvent): Tracker {
  const card = tracker.cards[event.correlationId];
  if (!card || card.phase !== 'pending') {
    // Unknown correlation id (some other client's request) or a
    // duplicate terminal: ignore silently.
    return tracker;
  }
  const settled: RequestCard =
    event.status === 'done'
      ? {
          ...card,
          phase: 'done',
          outcome: event.outcome,
          plan: event.plan,
          length: event.length,
          stats: event.stats,
          steps: event.steps,
        }
      : { ...card, phase: 'failed', error: event.error };
  return {
    order: tracker.order,
    cards: { ...tracker.cards, [event.correlationId]: settled },
  };
}

export function pendingCount(tracker: Tracker): number {
  return tracker.order.filter((id) => tracker.cards[id].phase === 'pending').length;
}

/**
 * Holding pen for terminal events that raced ahead of their submission:
 * the stream can deliver a result before the POST response that names
 * the correlation id has been processed. Unmatched events are kept (up
 * to a bound) and recalled once the submission lands; events that never
 * find a card simply age out — they belong to other clients.
 */
export class EventBacklog {
  private events = new Map<string, TerminalEvent>();

  constructor(private readonly limit = 200) {}

  remember(event: TerminalEvent): void {
    this.events.set(event.correlationId, event);
    if (this.events.size > this.limit) {
      const oldest = this.events.keys().next().value;
      if (oldest !== undefined) {
        this.events.delete(oldest);
      }
    }
  }

  recall(correlationId: string): TerminalEvent | undefined {
    const event = this.events.get(correlationId);
    this.events.delete(correlationId);
    return event;
  }
}
