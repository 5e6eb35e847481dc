// The single-page planner app: a chat column, the current plan table, and
// what-if comparison cards.  The app never mutates planning state itself —
// every change goes through POST /chat — and keeps at most one chat request
// in flight (the composer is disabled while waiting).

import { Api, ApiError } from './api.js';
import {
  ChatMessage,
  planViewModel,
  messagePair,
  transcriptFromLog,
  whatIfCard,
  WhatIfCard,
} from './models.js';

const TEMPLATE = `
  <header class="topbar">
    <div class="brand">fulfillment planner</div>
    <div id="health" class="health">connecting…</div>
  </header>
  <div id="banner" class="banner" hidden></div>
  <main class="layout">
    <section class="panel chat-panel">
      <h2>Copilot</h2>
      <div id="chat-log" class="chat-log" aria-live="polite"></div>
      <form id="chat-form" class="chat-form">
        <input id="chat-input" type="text" autocomplete="off"
               placeholder="Ask about demands, plans, or what-ifs…" />
        <button id="chat-send" type="submit" disabled>Send</button>
      </form>
      <div class="session-row">
        <span id="session-label" class="session-label"></span>
        <button id="reload-log" type="button" hidden>Reload from log</button>
      </div>
    </section>
    <section class="panel plan-panel">
      <h2>Current plan</h2>
      <div id="plan-box"><p class="empty">no plan yet</p></div>
    </section>
    <section class="panel whatif-panel">
      <h2>What-if scenarios</h2>
      <div id="whatif-box"><p class="empty">no scenarios asked yet</p></div>
    </section>
  </main>
`;

export interface App {
  submitQuery(text: string): Promise<void>;
  refreshPlan(): Promise<void>;
  reloadTranscript(): Promise<void>;
  readonly sessionId: string | null;
}

export function mountApp(root: HTMLElement, api: Api): App {
  root.innerHTML = TEMPLATE;
  const byId = <T extends HTMLElement>(id: string) =>
    root.querySelector<T>(`#${id}`)!;

  const banner = byId<HTMLDivElement>('banner');
  const chatLog = byId<HTMLDivElement>('chat-log');
  const form = byId<HTMLFormElement>('chat-form');
  const input = byId<HTMLInputElement>('chat-input');
  const send = byId<HTMLButtonElement>('chat-send');
  const sessionLabel = byId<HTMLSpanElement>('session-label');
  const reloadButton = byId<HTMLButtonElement>('reload-log');
  const planBox = byId<HTMLDivElement>('plan-box');
  const whatIfBox = byId<HTMLDivElement>('whatif-box');
  const health = byId<HTMLDivElement>('health');

  let sessionId: string | null = null;
  let pending = false;
  const cards: WhatIfCard[] = [];

  function setBanner(text: string | null, retry?: () => void) {
    banner.textContent = '';
    if (text === null) {
      banner.hidden = true;
      return;
    }
    banner.hidden = false;
    const label = document.createElement('span');
    label.textContent = text;
    banner.appendChild(label);
    if (retry) {
      const button = document.createElement('button');
      button.type = 'button';
      button.className = 'retry';
      button.textContent = 'Retry';
      button.addEventListener('click', () => retry());
      banner.appendChild(button);
    }
  }

  function setPending(value: boolean) {
    pending = value;
    input.disabled = value;
    send.disabled = value || input.value.trim() === '';
  }

  function appendMessage(message: ChatMessage) {
    const bubble = document.createElement('div');
    bubble.className = `msg ${message.role} ${message.kind}`;
    const text = document.createElement('div');
    text.className = 'text';
    text.textContent = message.text;
    bubble.appendChild(text);
    if (message.snippet) {
      const details = document.createElement('details');
      details.className = 'snippet';
      const summary = document.createElement('summary');
      summary.textContent = 'show snippet';
      const pre = document.createElement('pre');
      pre.textContent = message.snippet;
      details.appendChild(summary);
      details.appendChild(pre);
      bubble.appendChild(details);
    }
    chatLog.appendChild(bubble);
    chatLog.scrollTop = chatLog.scrollHeight;
  }

  function renderCards() {
    whatIfBox.textContent = '';
    if (cards.length === 0) {
      const empty = document.createElement('p');
      empty.className = 'empty';
      empty.textContent = 'no scenarios asked yet';
      whatIfBox.appendChild(empty);
      return;
    }
    for (const card of cards) {
      const el = document.createElement('article');
      el.className = `card ${card.feasible ? 'feasible' : 'infeasible'}`;
      const title = document.createElement('p');
      title.className = 'description';
      title.textContent = card.description;
      el.appendChild(title);
      const verdict = document.createElement('p');
      verdict.className = 'verdict';
      verdict.textContent = card.feasible ? 'feasible' : 'infeasible';
      el.appendChild(verdict);
      if (card.feasible && card.delta !== undefined) {
        const delta = document.createElement('p');
        delta.className = 'delta';
        delta.textContent = `cost delta ${card.delta}`;
        el.appendChild(delta);
      }
      if (card.feasible && card.scenario_cost !== undefined) {
        const cost = document.createElement('p');
        cost.className = 'scenario-cost';
        cost.textContent = `scenario cost ${card.scenario_cost}`;
        el.appendChild(cost);
      }
      whatIfBox.appendChild(el);
    }
  }

  function renderPlan(view: ReturnType<typeof planViewModel> | null) {
    planBox.textContent = '';
    if (view === null) {
      const empty = document.createElement('p');
      empty.className = 'empty';
      empty.textContent = 'no plan yet';
      planBox.appendChild(empty);
      return;
    }
    const caption = document.createElement('p');
    caption.className = 'plan-meta';
    caption.textContent = `version ${view.version} · total cost ${view.total_cost}`;
    planBox.appendChild(caption);
    const table = document.createElement('table');
    table.className = 'plan-table';
    const head = document.createElement('tr');
    for (const col of ['demand', 'supplier', 'method', 'ship wk', 'dock wk', 'cost']) {
      const th = document.createElement('th');
      th.textContent = col;
      head.appendChild(th);
    }
    table.appendChild(head);
    for (const row of view.rows) {
      const tr = document.createElement('tr');
      tr.dataset.demand = row.demand_id;
      if (row.late) tr.className = 'late';
      for (const cell of [
        row.demand_id,
        row.supplier_id,
        row.method,
        String(row.ship_week),
        String(row.dock_week),
        row.line_cost,
      ]) {
        const td = document.createElement('td');
        td.textContent = cell;
        tr.appendChild(td);
      }
      table.appendChild(tr);
    }
    planBox.appendChild(table);
  }

  async function refreshPlan(): Promise<void> {
    try {
      const payload = await api.plan();
      renderPlan(payload === null ? null : planViewModel(payload));
    } catch (err) {
      setBanner(`could not load the plan: ${describe(err)}`);
    }
  }

  async function submitQuery(text: string): Promise<void> {
    const query = text.trim();
    if (!query || pending) return;
    setPending(true);
    setBanner(null);
    try {
      const response = await api.chat(query, sessionId);
      sessionId = response.session_id;
      sessionLabel.textContent = `session ${sessionId}`;
      reloadButton.hidden = false;
      const [user, system] = messagePair(
        query,
        response.answer,
        response.entry.latency_ms
      );
      appendMessage(user);
      appendMessage(system);
      const card = whatIfCard(query, response.answer);
      if (card) {
        cards.push(card);
        renderCards();
      }
      if (response.answer.kind === 'task_result') {
        await refreshPlan();
      }
      input.value = '';
    } catch (err) {
      if (err instanceof ApiError && err.status === 503) {
        setBanner(`backend unavailable: ${err.message}`, () => {
          void submitQuery(query);
        });
      } else {
        setBanner(`could not send the query: ${describe(err)}`);
      }
    } finally {
      setPending(false);
    }
  }

  async function reloadTranscript(): Promise<void> {
    if (!sessionId) return;
    try {
      const entries = await api.sessionLog(sessionId);
      const view = transcriptFromLog(sessionId, entries);
      chatLog.textContent = '';
      for (const message of view.messages) appendMessage(message);
    } catch (err) {
      setBanner(`could not load the session log: ${describe(err)}`);
    }
  }

  input.addEventListener('input', () => {
    send.disabled = pending || input.value.trim() === '';
  });
  form.addEventListener('submit', (event) => {
    event.preventDefault();
    void submitQuery(input.value);
  });
  reloadButton.addEventListener('click', () => {
    void reloadTranscript();
  });

  void api
    .health()
    .then((payload) => {
      health.textContent = `${payload.instance} · ${payload.backend} backend`;
    })
    .catch(() => {
      health.textContent = 'service unreachable';
    });
  void refreshPlan();

  return {
    submitQuery,
    refreshPlan,
    reloadTranscript,
    get sessionId() {
      return sessionId;
    },
  };
}

function describe(err: unknown): string {
  if (err instanceof Error) return err.message;
  return String(err);
}
