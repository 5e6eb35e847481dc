// Round trip against a real service process: the UI talks to an actual
// uvicorn server over HTTP, with no stubs anywhere.  Covers the scripted
// browser flow: an off-topic query gets the default-guidance bubble, a
// plan-commit task makes the plan table show version 1, and reloading the
// transcript from the server log reproduces it exactly.

import { spawn, ChildProcess } from 'node:child_process';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { createApi } from '../src/api.js';
import { mountApp, App } from '../src/app.js';

const PORT = 18000 + Math.floor(Math.random() * 2000);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;
let serverOutput = '';

async function waitForServer(): Promise<void> {
  const deadline = Date.now() + 40000;
  for (;;) {
    try {
      const response = await fetch(`${BASE}/health`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      throw new Error(`service did not come up on ${BASE}\n${serverOutput}`);
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
}

async function until(cond: () => boolean, what: string): Promise<void> {
  const deadline = Date.now() + 15000;
  while (!cond()) {
    if (Date.now() > deadline) throw new Error(`timed out waiting for ${what}`);
    await new Promise((resolve) => setTimeout(resolve, 25));
  }
}

function bubbles(root: HTMLElement): string[] {
  return Array.from(root.querySelectorAll('.msg .text')).map((el) => el.textContent ?? '');
}

beforeAll(async () => {
  server = spawn('python3', ['-m', 'fulfil.cli', 'serve', '--port', String(PORT)], {
    stdio: ['ignore', 'pipe', 'pipe'],
  });
  server.stdout?.on('data', (chunk) => {
    serverOutput += String(chunk);
  });
  server.stderr?.on('data', (chunk) => {
    serverOutput += String(chunk);
  });
  await waitForServer();
});

afterAll(() => {
  server?.kill('SIGTERM');
});

describe('fresh service', () => {
  it('reports health and has no committed plan', async () => {
    const api = createApi(BASE);
    const health = await api.health();
    expect(health.status).toBe('ok');
    expect(health.backend).toBe('fixture');
    expect(await api.plan()).toBeNull();
  });
});

describe('scripted browser round trip', () => {
  let root: HTMLElement;
  let app: App;

  beforeAll(async () => {
    root = document.createElement('div');
    document.body.appendChild(root);
    app = mountApp(root, createApi(BASE));
    await until(
      () => root.querySelector('#health')?.textContent !== 'connecting…',
      'initial health check'
    );
  });

  function type(text: string) {
    const input = root.querySelector<HTMLInputElement>('#chat-input')!;
    input.value = text;
    input.dispatchEvent(new Event('input'));
  }

  function submit() {
    root
      .querySelector<HTMLFormElement>('#chat-form')!
      .dispatchEvent(new Event('submit', { cancelable: true }));
  }

  it('answers an off-topic question with the default-guidance bubble', async () => {
    type('how is the weather today');
    submit();
    await until(() => bubbles(root).length === 2, 'the first exchange');
    const system = root.querySelector('.msg.system')!;
    expect(system.classList.contains('default')).toBe(true);
    expect(system.textContent).toContain('I can only help with fulfillment planning');
    // off-topic traffic never creates a plan
    expect(root.querySelector('#plan-box')?.textContent).toContain('no plan yet');
  });

  it('shows plan version 1 after a plan-commit task', async () => {
    type('Dock demand D on its ideal dock date!');
    submit();
    await until(() => bubbles(root).length === 4, 'the commit exchange');
    expect(bubbles(root)[3]).toBe('Plan updated with cost 36');
    await until(() => root.querySelector('.plan-meta') !== null, 'the plan table');
    expect(root.querySelector('.plan-meta')?.textContent).toContain('version 1');
    expect(root.querySelectorAll('.plan-table tr[data-demand]')).toHaveLength(6);
  });

  it('reloads the identical transcript from the session log', async () => {
    const live = bubbles(root);
    expect(live).toHaveLength(4);
    await app.reloadTranscript();
    expect(bubbles(root)).toEqual(live);
    // and the server-side log backs every bubble pair
    const entries = await createApi(BASE).sessionLog(app.sessionId!);
    expect(entries).toHaveLength(2);
  });
});
