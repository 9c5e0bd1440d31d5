// Typed client for the gateway's HTTP and event-stream interface.
// Everything the console knows about the backend comes through here:
// POST /api/solve, GET /api/capabilities, GET /api/health, and the
// /api/events stream. The SSE wire parsing is kept as pure functions
// so it can be tested without a connection.

export interface SolveRequest {
  domain: string;
  problem: string;
  planner: string;
  language: 'pddl';
}

export interface SolveAccepted {
  correlationId: string;
}

export interface SearchStats {
  expanded: number;
  generated: number;
  evaluated: number;
  elapsedMs: number;
}

export interface PlanStepDiff {
  name: string;
  add: string[];
  del: string[];
}

export interface DoneEvent {
  correlationId: string;
  status: 'done';
  outcome: 'solved' | 'unsolvable' | 'exhausted' | string;
  plan: string[];
  length: number;
  stats: Partial<SearchStats>;
  steps?: PlanStepDiff[];
}

export interface ErrorDetail {
  origin: string;
  message: string;
  context: string[];
}

export interface FailedEvent {
  correlationId: string;
  status: 'failed';
  error: ErrorDetail;
}

export type TerminalEvent = DoneEvent | FailedEvent;

export interface CapabilityRecord {
  name: string;
  operationalClass: string;
  technicalClass: 'endpoint' | 'transforming' | 'routing' | 'system-management';
  topic: string;
  routingKey: string;
  inputSchema: string;
  outputSchema: string;
  instanceGroup: string;
  heartbeatSeconds: number;
  lastAnnounceMs: number;
  live: boolean;
  planners?: string[];
}

export interface QueueBinding {
  queue: string;
  topic: string;
  key: string;
}

export interface BrokerSnapshot {
  topics: string[];
  queues: string[];
  bindings: QueueBinding[];
  depths: Record<string, number>;
  consumerCounts: Record<string, number>;
  dropCount: number;
}

export interface CapabilitiesDoc {
  capabilities: CapabilityRecord[];
  broker: BrokerSnapshot;
}

export interface HealthDoc {
  status: 'ok' | 'degraded';
  brokerConnected: boolean;
  pendingCount: number;
}

export class GatewayError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = 'GatewayError';
  }
}

async function requestJson<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, init);
  const text = await response.text();
  let doc: unknown = null;
  try {
    doc = text ? JSON.parse(text) : null;
  } catch {
    doc = null;
  }
  if (!response.ok) {
    const detail =
      doc && typeof doc === 'object' && 'error' in doc
        ? String((doc as { error: unknown }).error)
        : response.statusText;
    throw new GatewayError(response.status, detail);
  }
  return doc as T;
}

export class GatewayClient {
  constructor(public readonly base = '') {}

  solve(request: SolveRequest): Promise<SolveAccepted> {
    return requestJson<SolveAccepted>(`${this.base}/api/solve`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(request),
    });
  }

  capabilities(): Promise<CapabilitiesDoc> {
    return requestJson<CapabilitiesDoc>(`${this.base}/api/capabilities`);
  }

  health(): Promise<HealthDoc> {
    return requestJson<HealthDoc>(`${this.base}/api/health`);
  }

  events(): EventStream {
    return new EventStream(`${this.base}/api/events`);
  }
}

// ---------------------------------------------------------------------------
// SSE wire parsing.

/**
 * Incremental server-sent-events parser. Feed it raw chunks as they
 * arrive; it returns the `data:` payload of every event completed by
 * that chunk. Comment lines (keep-alives) are discarded, multi-line
 * data is joined with newlines per the SSE format.
 */
export class SseParser {
  private buffer = '';

  feed(chunk: string): string[] {
    this.buffer += chunk.replace(/\r\n/g, '\n');
    const payloads: string[] = [];
    for (;;) {
      const boundary = this.buffer.indexOf('\n\n');
      if (boundary < 0) {
        break;
      }
      const block = this.buffer.slice(0, boundary);
      this.buffer = this.buffer.slice(boundary + 2);
      const data = block
        .split('\n')
        .filter((line) => line.startsWith('data:'))
        .map((line) => line.slice(5).replace(/^ /, ''));
      if (data.length > 0) {
        payloads.push(data.join('\n'));
      }
    }
    return payloads;
  }
}

/** Decode one SSE data payload into a terminal event, or null if it is not one. */
export function parseEventData(data: string): TerminalEvent | null {
  let doc: unknown;
  try {
    doc = JSON.parse(data);
  } catch {
    return null;
  }
  if (!doc || typeof doc !== 'object') {
    return null;
  }
  const event = doc as Record<string, unknown>;
  if (typeof event.correlationId !== 'string') {
    return null;
  }
  if (event.status === 'done' || event.status === 'failed') {
    return doc as TerminalEvent;
  }
  return null;
}

type EventHandler = (event: TerminalEvent) => void;

/**
 * The single streaming connection multiplexing every request update.
 * Implemented over a streaming fetch rather than EventSource so the
 * identical code runs in the browser and under node; reconnects with a
 * short delay if the connection drops.
 */
export class EventStream {
  private handlers: EventHandler[] = [];
  private stopped = false;
  private controller: AbortController | null = null;

  constructor(
    public readonly url: string,
    private readonly retryMs = 1000,
  ) {}

  onEvent(handler: EventHandler): this {
    this.handlers.push(handler);
    return this;
  }

  start(): this {
    void this.loop();
    return this;
  }

  close(): void {
    this.stopped = true;
    this.controller?.abort();
  }

  private async loop(): Promise<void> {
    while (!this.stopped) {
      this.controller = new AbortController();
      try {
        const response = await fetch(this.url, {
          headers: { Accept: 'text/event-stream' },
          signal: this.controller.signal,
        });
        if (!response.ok || !response.body) {
          throw new GatewayError(response.status, 'event stream unavailable');
        }
        await this.consume(response.body);
      } catch {
        // Dropped or refused: fall through to the retry delay.
      }
      if (!this.stopped) {
        await new Promise((resolve) => setTimeout(resolve, this.retryMs));
      }
    }
  }

  private async consume(body: ReadableStream<Uint8Array>): Promise<void> {
    const reader = body.getReader();
    const decoder = new TextDecoder();
    const parser = new SseParser();
    for (;;) {
      const { done, value } = await reader.read();
      if (done) {
        return;
      }
      for (const data of parser.feed(decoder.decode(value, { stream: true }))) {
        const event = parseEventData(data);
        if (event) {
          for (const handler of this.handlers) {
            handler(event);
          }
        }
      }
    }
  }
}
