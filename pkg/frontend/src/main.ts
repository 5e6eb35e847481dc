// Entry point: mount the app against the service.  The service origin can
// be overridden by setting window.PLANNER_API before this script loads
// (useful when the static assets are served from a different host).

import { createApi } from './api.js';
import { mountApp } from './app.js';

declare global {
  interface Window {
    PLANNER_API?: string;
  }
}

const base = window.PLANNER_API ?? 'http://127.0.0.1:8000';
const root = document.getElementById('app');
if (root) {
  mountApp(root, createApi(base));
}
