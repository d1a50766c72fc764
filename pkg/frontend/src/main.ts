import { ApiClient } from './api.js';
import { buildApp } from './app.js';

// The API base defaults to the page origin; override with ?api=http://host:port
// when the UI is served separately from the vecsearch service.
const params = new URLSearchParams(window.location.search);
const base = params.get('api') ?? window.location.origin;
const api = new ApiClient(base);

const root = document.getElementById('app');
if (!root) throw new Error('missing #app mount point');
const app = buildApp(root, api);
void app.refreshDatasets().catch((err) => {
  console.error('dataset listing failed', err);
});
