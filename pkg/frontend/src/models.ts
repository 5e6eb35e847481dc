// Pure view-model builders: server payloads in, render-ready structures out.
// Nothing in this module touches the DOM or the network, so every rule here
// is unit-testable in isolation.

import type { AnswerPayload, LogEntry, PlanPayload } from './api.js';

export type MessageKind = 'task_result' | 'default' | 'failure';

export interface ChatMessage {
  role: 'user' | 'system';
  text: string;
  kind: MessageKind;
  snippet?: string;
  latency_ms: number;
}

export interface ChatViewModel {
  session_id: string;
  messages: ChatMessage[];
}

export interface PlanRow {
  demand_id: string;
  supplier_id: string;
  method: string;
  ship_week: number;
  dock_week: number;
  line_cost: string;
  late: boolean;
}

export interface PlanViewModel {
  version: number;
  total_cost: string;
  rows: PlanRow[];
  /** demand ids whose dock week misses the ideal dock week */
  highlight: string[];
}

export interface WhatIfCard {
  description: string;
  feasible: boolean;
  scenario_cost?: string;
  delta?: string;
}

function messageKind(answerKind: AnswerPayload['kind']): MessageKind {
  if (answerKind === 'default_response') return 'default';
  if (answerKind === 'execution_failure') return 'failure';
  return 'task_result';
}

/** The system bubble's text is the executed snippet's log lines, in order. */
export function answerText(logs: string[]): string {
  return logs.join('\n');
}

/** One /chat exchange becomes a user bubble plus a system bubble. */
export function messagePair(
  query: string,
  answer: AnswerPayload,
  latencyMs: number
): [ChatMessage, ChatMessage] {
  const system: ChatMessage = {
    role: 'system',
    text: answerText(answer.logs),
    kind: messageKind(answer.kind),
    latency_ms: latencyMs,
  };
  if (answer.snippet !== null && answer.snippet !== undefined) {
    system.snippet = answer.snippet;
  }
  return [
    { role: 'user', text: query, kind: system.kind, latency_ms: latencyMs },
    system,
  ];
}

/**
 * Rebuild the whole transcript from the server's session log.  Each logged
 * entry expands to the same user+system pair the live UI appended, so a
 * reload renders byte-identical bubbles.
 */
export function transcriptFromLog(sessionId: string, entries: LogEntry[]): ChatViewModel {
  const messages: ChatMessage[] = [];
  for (const entry of entries) {
    const kind = entryKind(entry);
    const pair = messagePair(
      entry.query,
      {
        kind,
        logs: entry.logs,
        snippet: entry.snippet ?? null,
        usage: entry.usage,
      },
      entry.latency_ms
    );
    messages.push(...pair);
  }
  return { session_id: sessionId, messages };
}

function entryKind(entry: LogEntry): AnswerPayload['kind'] {
  if (entry.route === 'out_of_domain') return 'default_response';
  // In-domain entries that produced no snippet or whose first log line is an
  // error marker were execution failures; everything else ran to completion.
  if (entry.logs.length > 0 && entry.logs[entry.logs.length - 1].startsWith('error')) {
    return 'execution_failure';
  }
  return 'task_result';
}

/** Table rows plus the late-docking highlight set. */
export function planViewModel(payload: PlanPayload): PlanViewModel {
  const rows: PlanRow[] = payload.lines.map((line) => ({
    demand_id: line.demand_id,
    supplier_id: line.supplier_id,
    method: line.method,
    ship_week: line.ship_week,
    dock_week: line.dock_week,
    line_cost: line.line_cost,
    late:
      line.ideal_dock_week !== undefined && line.dock_week !== line.ideal_dock_week,
  }));
  return {
    version: payload.version,
    total_cost: payload.total_cost,
    rows,
    highlight: rows.filter((row) => row.late).map((row) => row.demand_id),
  };
}

const DELTA_LINE = /^Cost will change by (-?\d+(?:\.\d+)?)$/;
const SCENARIO_COST_LINE = /^Cost will be (-?\d+(?:\.\d+)?)$/;
const INFEASIBLE_LINE = /^Plan is infeasible under this scenario$/;
const DOCKABLE_LINE = /^Demand .+ can dock at its ideal date\.$/;

/**
 * Scenario answers log one of a few fixed sentence shapes; when an answer
 * matches, it gets a comparison card next to its bubble.  Returns null for
 * every non-scenario answer.  An infeasible scenario never carries a delta.
 */
export function whatIfCard(query: string, answer: AnswerPayload): WhatIfCard | null {
  if (answer.kind !== 'task_result') return null;
  for (const line of answer.logs) {
    const delta = DELTA_LINE.exec(line);
    if (delta) return { description: query, feasible: true, delta: delta[1] };
    const cost = SCENARIO_COST_LINE.exec(line);
    if (cost) return { description: query, feasible: true, scenario_cost: cost[1] };
    if (INFEASIBLE_LINE.test(line)) return { description: query, feasible: false };
    if (DOCKABLE_LINE.test(line)) return { description: query, feasible: true };
  }
  return null;
}
