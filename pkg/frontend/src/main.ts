// Console wiring: editors with the highlight overlay, the planner menu
// fed by the gateway's capability registry, request cards driven by the
// event stream, and the monitor panel. All behaviour lives in the pure
// modules; this file only touches the DOM.

import { GatewayClient, type TerminalEvent } from './api.js';
import { EXAMPLES, exampleById } from './examples.js';
import { toHtml } from './highlight.js';
import { advertisedPlanners, capabilityRows, isEmptySystem, queueRows } from './monitor.js';
import { errorPanelHtml, planTableHtml, statsLineHtml } from './planview.js';
import { EventBacklog, applyEvent, emptyTracker, trackSubmit, type Tracker } from './state.js';

const MONITOR_POLL_MS = 2000;

const client = new GatewayClient('');
let tracker: Tracker = emptyTracker;
const backlog = new EventBacklog();

function element<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

// -- editors ----------------------------------------------------------------

interface Editor {
  value(): string;
  load(text: string): void;
}

function setupEditor(boxId: string): Editor {
  const box = element<HTMLElement>(boxId);
  const textarea = box.querySelector('textarea');
  const code = box.querySelector('code');
  if (!textarea || !code) {
    throw new Error(`#${boxId} is not an editor box`);
  }
  const render = () => {
    const caret =
      document.activeElement === textarea ? textarea.selectionStart ?? undefined : undefined;
    code.innerHTML = toHtml(textarea.value, caret) + '\n';
  };
  const sync = () => {
    const pre = code.parentElement as HTMLElement;
    pre.scrollTop = textarea.scrollTop;
    pre.scrollLeft = textarea.scrollLeft;
  };
  for (const event of ['input', 'click', 'keyup', 'focus', 'blur']) {
    textarea.addEventListener(event, render);
  }
  textarea.addEventListener('scroll', sync);
  render();
  return {
    value: () => textarea.value,
    load: (text: string) => {
      textarea.value = text;
      render();
      sync();
    },
  };
}

// -- requests ---------------------------------------------------------------

function cardHtml(correlationId: string): string {
  const card = tracker.cards[correlationId];
  const head =
    `<div class="card-head"><span class="card-label">${card.label}</span>` +
    `<span class="card-planner">${card.planner}</span>` +
    `<span class="card-id" title="${card.correlationId}">${card.correlationId.slice(0, 8)}</span>` +
    `<span class="card-phase phase-${card.phase}">${card.phase}</span></div>`;
  if (card.phase === 'pending') {
    return `${head}<div class="card-body"><span class="spinner"></span> waiting for the mesh…</div>`;
  }
  if (card.phase === 'failed' && card.error) {
    return `${head}<div class="card-body">${errorPanelHtml(card.error)}</div>`;
  }
  const outcome = `<span class="card-outcome outcome-${card.outcome}">${card.outcome}</span>`;
  const stats = card.stats ? statsLineHtml(card.stats) : '';
  return `${head}<div class="card-body">${outcome} ${stats}${planTableHtml(card)}</div>`;
}

function renderRequests(): void {
  const list = element<HTMLElement>('request-list');
  if (tracker.order.length === 0) {
    list.innerHTML = '<li class="request-empty">No requests yet.</li>';
    return;
  }
  list.innerHTML = tracker.order
    .map((id) => `<li class="request-card">${cardHtml(id)}</li>`)
    .join('');
}

function onEvent(event: TerminalEvent): void {
  const next = applyEvent(tracker, event);
  if (next === tracker) {
    // Not ours yet: either another client's request, or the result beat
    // our own submission bookkeeping — keep it recallable.
    backlog.remember(event);
    return;
  }
  tracker = next;
  renderRequests();
}

// -- monitor ----------------------------------------------------------------

function renderPlannerMenu(planners: string[]): void {
  const menu = element<HTMLSelectElement>('planner-menu');
  const current = menu.value;
  if (planners.length === 0) {
    menu.innerHTML = '<option value="">waiting for a solver…</option>';
    menu.disabled = true;
    return;
  }
  menu.innerHTML = planners
    .map((planner) => `<option value="${planner}">${planner}</option>`)
    .join('');
  menu.disabled = false;
  if (planners.includes(current)) {
    menu.value = current;
  }
}

async function pollMonitor(): Promise<void> {
  const badges = element<HTMLElement>('capability-badges');
  const queues = element<HTMLElement>('queue-body');
  try {
    const doc = await client.capabilities();
    if (isEmptySystem(doc)) {
      badges.innerHTML = '<p class="monitor-empty">No capabilities have announced yet.</p>';
    } else {
      badges.innerHTML = capabilityRows(doc, Date.now())
        .map(
          (row) =>
            `<span class="badge badge-${row.badge}" title="${row.technicalClass}, ` +
            `last announce ${row.ageSeconds.toFixed(1)}s ago">` +
            `${row.name}${row.instanceGroup ? ':' + row.instanceGroup : ''}</span>`,
        )
        .join('');
    }
    queues.innerHTML = queueRows(doc)
      .map(
        (row) =>
          `<tr><td>${row.queue}</td><td>${row.depth}</td><td>${row.consumers}</td></tr>`,
      )
      .join('');
    renderPlannerMenu(advertisedPlanners(doc));
  } catch {
    badges.innerHTML = '<p class="monitor-empty">Gateway unreachable.</p>';
  }
  try {
    const health = await client.health();
    const dot = element<HTMLElement>('health-dot');
    dot.className = `health-dot health-${health.status}`;
    dot.title = `broker ${health.brokerConnected ? 'connected' : 'disconnected'}, ${health.pendingCount} pending`;
  } catch {
    element<HTMLElement>('health-dot').className = 'health-dot health-unreachable';
  }
}

// -- wiring -----------------------------------------------------------------

function currentLabel(): string {
  const menu = element<HTMLSelectElement>('example-menu');
  const entry = exampleById(menu.value);
  return entry ? entry.title : 'custom model';
}

async function submit(domainEditor: Editor, problemEditor: Editor): Promise<void> {
  const planner = element<HTMLSelectElement>('planner-menu').value;
  const note = element<HTMLElement>('submit-note');
  if (!planner) {
    note.textContent = 'No solver is live yet.';
    return;
  }
  try {
    const accepted = await client.solve({
      domain: domainEditor.value(),
      problem: problemEditor.value(),
      planner,
      language: 'pddl',
    });
    note.textContent = '';
    tracker = trackSubmit(tracker, {
      correlationId: accepted.correlationId,
      planner,
      label: currentLabel(),
      submittedAtMs: Date.now(),
    });
    const early = backlog.recall(accepted.correlationId);
    if (early) {
      tracker = applyEvent(tracker, early);
    }
    renderRequests();
  } catch (err) {
    note.textContent = err instanceof Error ? err.message : String(err);
  }
}

function start(): void {
  const domainEditor = setupEditor('domain-editor');
  const problemEditor = setupEditor('problem-editor');

  const exampleMenu = element<HTMLSelectElement>('example-menu');
  exampleMenu.innerHTML =
    '<option value="">— load an example —</option>' +
    EXAMPLES.map((entry) => `<option value="${entry.id}">${entry.title}</option>`).join('');
  exampleMenu.addEventListener('change', () => {
    const entry = exampleById(exampleMenu.value);
    if (entry) {
      domainEditor.load(entry.domain);
      problemEditor.load(entry.problem);
    }
  });

  element<HTMLButtonElement>('submit-button').addEventListener('click', () => {
    void submit(domainEditor, problemEditor);
  });

  renderRequests();
  client.events().onEvent(onEvent).start();
  void pollMonitor();
  window.setInterval(() => void pollMonitor(), MONITOR_POLL_MS);
}

start();
