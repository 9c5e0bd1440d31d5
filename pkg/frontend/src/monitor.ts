// Monitor view-model: turns a capabilities document into the rows the
// dashboard renders — capability badges (live straight from the
// gateway's heartbeat bookkeeping), work-queue gauges, and the planner
// catalog advertised by the solving capability.

import type { CapabilitiesDoc, CapabilityRecord } from './api.js';

export interface CapabilityRow {
  name: string;
  instanceGroup: string;
  technicalClass: CapabilityRecord['technicalClass'];
  badge: 'live' | 'stale';
  ageSeconds: number;
}

export function capabilityRows(doc: CapabilitiesDoc, nowMs: number): CapabilityRow[] {
  return doc.capabilities
    .map((record) => ({
      name: record.name,
      instanceGroup: record.instanceGroup,
      technicalClass: record.technicalClass,
      badge: record.live ? ('live' as const) : ('stale' as const),
      ageSeconds: Math.max(0, (nowMs - record.lastAnnounceMs) / 1000),
    }))
    .sort((a, b) => a.name.localeCompare(b.name) || a.instanceGroup.localeCompare(b.instanceGroup));
}

export interface QueueRow {
  queue: string;
  depth: number;
  consumers: number;
}

export function queueRows(doc: CapabilitiesDoc): QueueRow[] {
  return doc.broker.queues
    .map((queue) => ({
      queue,
      depth: doc.broker.depths[queue] ?? 0,
      consumers: doc.broker.consumerCounts[queue] ?? 0,
    }))
    .sort((a, b) => a.queue.localeCompare(b.queue));
}

/** True when no capability has announced yet — show the empty-state note. */
export function isEmptySystem(doc: CapabilitiesDoc): boolean {
  return doc.capabilities.length === 0;
}

/**
 * The planner strings advertised by the solving capability, in its own
 * order; empty until a solver has announced.
 */
export function advertisedPlanners(doc: CapabilitiesDoc): string[] {
  const planners: string[] = [];
  for (const record of doc.capabilities) {
    if (record.name !== 'solving' || !Array.isArray(record.planners)) {
      continue;
    }
    for (const planner of record.planners) {
      if (!planners.includes(planner)) {
        planners.push(planner);
      }
    }
  }
  return planners;
}
