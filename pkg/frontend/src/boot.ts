import { Client } from './api.js';
import { initApp } from './main.js';

// Same-origin by default: the bundle is served next to the API.
const app = document.getElementById('app');
if (app) {
  initApp(app, new Client(''));
}
