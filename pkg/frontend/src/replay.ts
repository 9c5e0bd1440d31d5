// Client-side plan replay. The done event carries each step's added and
// deleted facts; replaying them applies the same state-transition rule
// the validator uses — next = (state minus deletes) union adds — so the
// console can show what holds after every step without another round
// trip.

import type { PlanStepDiff } from './api.js';

export interface StepState {
  index: number;
  name: string;
  /** Facts true after this step (sorted). */
  holds: string[];
  /** Facts that became true at this step. */
  gained: string[];
  /** Facts that stopped being true at this step. */
  lost: string[];
}

export function replay(steps: PlanStepDiff[], init: string[] = []): StepState[] {
  let state = new Set(init);
  const trajectory: StepState[] = [];
  steps.forEach((step, index) => {
    const next = new Set(state);
    for (const fact of step.del) {
      next.delete(fact);
    }
    for (const fact of step.add) {
      next.add(fact);
    }
    trajectory.push({
      index,
      name: step.name,
      holds: [...next].sort(),
      gained: [...next].filter((fact) => !state.has(fact)).sort(),
      lost: [...state].filter((fact) => !next.has(fact)).sort(),
    });
    state = next;
  });
  return trajectory;
}

/** Facts still true at the end of the plan (from the given start state). */
export function finalState(steps: PlanStepDiff[], init: string[] = []): string[] {
  const trajectory = replay(steps, init);
  return trajectory.length === 0 ? [...init].sort() : trajectory[trajectory.length - 1].holds;
}
