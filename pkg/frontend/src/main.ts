/** Browser bootstrap: canvas, wheel/drag camera control, feedback controls,
 * search box, and the spinner/error chrome around the App shell. */

import { App } from './app.js';
import { CanvasSurface } from './surface.js';

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

async function boot(): Promise<void> {
  const canvas = el<HTMLCanvasElement>('matrix');
  const ctx = canvas.getContext('2d');
  if (!ctx) throw new Error('2d canvas unsupported');
  const spinner = el<HTMLDivElement>('spinner');
  const banner = el<HTMLDivElement>('banner');
  const modeTag = el<HTMLSpanElement>('mode');
  const resolveBar = el<HTMLDivElement>('resolve-bar');

  const app = await App.create(window.location.origin, new CanvasSurface(ctx), {
    viewportPx: { width: canvas.width, height: canvas.height },
    feedbackEvents: {
      onSpinner: (on) => spinner.classList.toggle('visible', on),
      onError: (message) => {
        banner.textContent = message;
        banner.classList.add('visible');
        setTimeout(() => banner.classList.remove('visible'), 4000);
      },
      onPreviewReady: () => {
        modeTag.textContent = 'change preview';
        resolveBar.classList.add('visible');
      },
      onResolved: () => {
        modeTag.textContent = 'predictions';
        resolveBar.classList.remove('visible');
      },
    },
  });
  el<HTMLSpanElement>('dataset').textContent =
    `${app.info.n} x ${app.info.m} (${app.info.timesteps.join(', ')})`;

  canvas.addEventListener('wheel', (ev) => {
    ev.preventDefault();
    const rect = canvas.getBoundingClientRect();
    const anchor = { x: ev.clientX - rect.left, y: ev.clientY - rect.top };
    void app.zoom(ev.deltaY < 0 ? 1.2 : 1 / 1.2, anchor);
  });

  let dragging: { x: number; y: number } | null = null;
  canvas.addEventListener('mousedown', (ev) => {
    dragging = { x: ev.clientX, y: ev.clientY };
  });
  window.addEventListener('mouseup', () => {
    dragging = null;
  });
  window.addEventListener('mousemove', (ev) => {
    if (!dragging) return;
    void app.pan(dragging.x - ev.clientX, dragging.y - ev.clientY);
    dragging = { x: ev.clientX, y: ev.clientY };
  });

  canvas.addEventListener('dblclick', (ev) => {
    const rect = canvas.getBoundingClientRect();
    const { camera } = app.state;
    const row = Math.floor(camera.y + (ev.clientY - rect.top) / camera.scale);
    const col = Math.floor(camera.x + (ev.clientX - rect.left) / camera.scale);
    const raw = window.prompt(`asserted strength for cell (${row}, ${col}), 0 to 1:`);
    if (raw === null) return;
    const strength = Number(raw);
    const t = app.info.timesteps.length - 1;
    void app.assertStrength(row, col, strength, t);
  });

  el<HTMLButtonElement>('accept').addEventListener('click', () => {
    void app.resolveFeedback('accept');
  });
  el<HTMLButtonElement>('reject').addEventListener('click', () => {
    void app.resolveFeedback('reject');
  });
  el<HTMLInputElement>('threshold').addEventListener('change', (ev) => {
    void app.setThreshold(Number((ev.target as HTMLInputElement).value));
  });
  el<HTMLButtonElement>('order-rows').addEventListener('click', () => {
    void app.client
      .requestOrdering('rows', 'dendrogram', 'jaccard', 'average')
      .then(() => app.refresh());
  });
  el<HTMLInputElement>('search').addEventListener('change', async (ev) => {
    const q = (ev.target as HTMLInputElement).value.trim();
    if (!q) return;
    const res = await app.client.search(q);
    banner.textContent =
      `${res.nodes.length} nodes, ${res.edges.length} edges, ` +
      `${res.total_documents} documents match "${q}"`;
    banner.classList.add('visible');
    setTimeout(() => banner.classList.remove('visible'), 4000);
  });

  await app.refresh();
}

void boot();
