// Request-card rendering: plan tables, error panels, and stats lines as
// HTML strings. Kept free of DOM calls so every builder is testable as
// a plain function; main.ts owns the actual elements.

import type { ErrorDetail, SearchStats } from './api.js';
import { escapeHtml } from './highlight.js';
import { replay } from './replay.js';
import type { RequestCard } from './state.js';

function factList(facts: string[], klass: string): string {
  if (facts.length === 0) {
    return '<span class="fact-none">—</span>';
  }
  return facts.map((fact) => `<span class="${klass}">${escapeHtml(fact)}</span>`).join(' ');
}

/**
 * The step-by-step plan table: action, facts added, facts deleted, and
 * a running count of established facts from the client-side replay.
 */
export function planTableHtml(card: RequestCard): string {
  const steps = card.steps ?? [];
  if (steps.length === 0) {
    const plan = card.plan ?? [];
    if (plan.length === 0) {
      return '<p class="plan-empty">The empty plan: the goal already holds.</p>';
    }
    const rows = plan
      .map((name, i) => `<tr><td>${i + 1}</td><td class="plan-action">${escapeHtml(name)}</td></tr>`)
      .join('');
    return `<table class="plan-table"><thead><tr><th>#</th><th>action</th></tr></thead><tbody>${rows}</tbody></table>`;
  }
  const trajectory = replay(steps);
  const rows = steps
    .map((step, i) => {
      const after = trajectory[i];
      return (
        `<tr><td>${i + 1}</td>` +
        `<td class="plan-action">${escapeHtml(step.name)}</td>` +
        `<td>${factList(step.add, 'fact-add')}</td>` +
        `<td>${factList(step.del, 'fact-del')}</td>` +
        `<td class="plan-holds" title="${escapeHtml(after.holds.join(' '))}">${after.holds.length}</td></tr>`
      );
    })
    .join('');
  return (
    '<table class="plan-table"><thead><tr>' +
    '<th>#</th><th>action</th><th>adds</th><th>deletes</th><th>holds</th>' +
    `</tr></thead><tbody>${rows}</tbody></table>`
  );
}

/** The error panel: failing capability, message, then context lines. */
export function errorPanelHtml(error: ErrorDetail): string {
  const context =
    error.context.length === 0
      ? ''
      : `<ol class="error-context">${error.context
          .map((line) => `<li>${escapeHtml(line)}</li>`)
          .join('')}</ol>`;
  return (
    `<div class="error-panel"><span class="error-origin">${escapeHtml(error.origin)}</span>` +
    `<span class="error-message">${escapeHtml(error.message)}</span>${context}</div>`
  );
}

export function statsLineHtml(stats: Partial<SearchStats>): string {
  const parts = [
    ['expanded', stats.expanded],
    ['generated', stats.generated],
    ['evaluated', stats.evaluated],
  ]
    .filter(([, value]) => typeof value === 'number')
    .map(([label, value]) => `${label} ${value}`);
  if (typeof stats.elapsedMs === 'number') {
    parts.push(`${stats.elapsedMs} ms`);
  }
  return `<span class="card-stats">${escapeHtml(parts.join(' · '))}</span>`;
}
