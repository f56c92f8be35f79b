/** Level-discriminated viewport rendering onto a DrawSurface.
 *
 * Levels 1-2 are colored cells (binary presence, then strength on the
 * sequential scale); 3-4 are arrow glyphs whose shaft is the past and whose
 * shrinking head is the predictions; 5-6 are text panels (keywords, raw
 * excerpts). Change previews draw on the diverging scale, never mixing with
 * the prediction ramp. A legend for the active scale is always drawn.
 */

import { arrowGlyph } from './glyphs.js';
import { changeColor, legendTicks, predictionColor } from './scales.js';
import type { Camera, ViewMode } from './state.js';
import type { DrawSurface } from './surface.js';
import type {
  Level1Payload,
  Level2Payload,
  Level34Payload,
  Level5Payload,
  Level6Payload,
  LevelPayload,
} from './types.js';

export class LevelMismatchError extends Error {
  constructor(expected: number, got: number) {
    super(`payload level ${got} does not match view level ${expected}; refetch`);
  }
}

export interface RenderGeometry {
  camera: Camera;
  viewportPx: { width: number; height: number };
}

export const GRID_LINE_COLOR = '#d8dde2';
export const TEXT_COLOR = '#1c2733';
export const PRESENCE_COLOR = predictionColor(1.0);

function cellBox(geom: RenderGeometry, row: number, col: number) {
  const s = geom.camera.scale;
  return {
    x: (col - geom.camera.x) * s,
    y: (row - geom.camera.y) * s,
    size: s,
  };
}

export function decodeBits(base64: string): Uint8Array {
  if (typeof atob === 'function') {
    const raw = atob(base64);
    const bytes = new Uint8Array(raw.length);
    for (let i = 0; i < raw.length; i++) bytes[i] = raw.charCodeAt(i);
    return bytes;
  }
  // node (test) path without DOM atob
  const nodeBuffer = (globalThis as Record<string, any>).Buffer;
  return Uint8Array.from(nodeBuffer.from(base64, 'base64'));
}

function bitAt(bytes: Uint8Array, k: number): number {
  return (bytes[k >> 3] >> (7 - (k & 7))) & 1;
}

function renderLevel1(p: Level1Payload, surface: DrawSurface, geom: RenderGeometry): void {
  const bytes = decodeBits(p.bits);
  const row0 = p.rows[0];
  const [col0, col1] = p.cols;
  const width = col1 - col0;
  for (let k = 0; k < p.n_cells; k++) {
    if (!bitAt(bytes, k)) continue;
    const box = cellBox(geom, row0 + Math.floor(k / width), col0 + (k % width));
    surface.fillRect(box.x, box.y, box.size, box.size, PRESENCE_COLOR);
  }
}

function renderLevel2(
  p: Level2Payload,
  surface: DrawSurface,
  geom: RenderGeometry,
  mode: ViewMode,
): void {
  const diverging = p.mode === 'change';
  const { row, col, value } = p.cells;
  for (let k = 0; k < row.length; k++) {
    const box = cellBox(geom, row[k], col[k]);
    const color = diverging ? changeColor(value[k]) : predictionColor(value[k]);
    surface.fillRect(box.x, box.y, box.size, box.size, color);
  }
  if (mode === 'change-preview' && !diverging) {
    // a change-preview view must never silently show prediction colors
    throw new LevelMismatchError(2, p.level);
  }
}

function renderTimeline(
  p: Level34Payload,
  surface: DrawSurface,
  geom: RenderGeometry,
): void {
  const positionEncoded = p.level === 4; // level 4 adds position, not just color
  for (const cell of p.cells) {
    const box = cellBox(geom, cell.row, cell.col);
    surface.strokeRect(box.x, box.y, box.size, box.size, GRID_LINE_COLOR);
    const glyph = arrowGlyph(cell, box);
    for (const seg of glyph.shaft) {
      const h = positionEncoded
        ? Math.max(1, seg.thickness * seg.value)
        : seg.thickness;
      surface.fillRect(seg.x0, seg.y - h / 2, seg.x1 - seg.x0, h, predictionColor(seg.value));
    }
    for (const step of glyph.head) {
      surface.fillTriangle(
        step.x0, step.y - step.halfHeight,
        step.x0, step.y + step.halfHeight,
        step.x1, step.y,
        predictionColor(step.value),
      );
    }
  }
}

function renderKeywords(p: Level5Payload, surface: DrawSurface, geom: RenderGeometry): void {
  for (const cell of p.cells) {
    const box = cellBox(geom, cell.row, cell.col);
    surface.strokeRect(box.x, box.y, box.size, box.size, GRID_LINE_COLOR);
    const fontPx = Math.max(10, box.size / 14);
    cell.keywords.slice(0, 8).forEach(([term], i) => {
      surface.text(box.x + 6, box.y + (i + 1) * (fontPx + 4), term, TEXT_COLOR, fontPx);
    });
  }
}

function renderDocuments(p: Level6Payload, surface: DrawSurface, geom: RenderGeometry): void {
  for (const cell of p.cells) {
    const box = cellBox(geom, cell.row, cell.col);
    surface.strokeRect(box.x, box.y, box.size, box.size, GRID_LINE_COLOR);
    const fontPx = Math.max(11, box.size / 24);
    cell.documents.forEach((doc, i) => {
      const y = box.y + 8 + i * (fontPx * 3);
      surface.text(box.x + 6, y + fontPx, `${doc.author} @ ${doc.timestamp}`, TEXT_COLOR, fontPx);
      surface.text(box.x + 6, y + fontPx * 2.2, doc.excerpt.slice(0, 120), TEXT_COLOR, fontPx);
    });
  }
}

function renderLegend(surface: DrawSurface, geom: RenderGeometry, mode: ViewMode): void {
  const ticks = legendTicks(mode);
  const x = geom.viewportPx.width - 26;
  const y0 = geom.viewportPx.height - 24 * ticks.length - 12;
  ticks.forEach((tick, i) => {
    surface.fillRect(x, y0 + i * 24, 16, 16, tick.color);
    surface.text(x - 42, y0 + i * 24 + 12, tick.label, TEXT_COLOR, 11);
  });
}

/** Draw one payload. Throws LevelMismatchError when the payload does not
 * match the view's level/mode (callers refetch instead of drawing stale or
 * wrongly scaled content). */
export function renderViewport(
  viewLevel: number,
  mode: ViewMode,
  payload: LevelPayload,
  surface: DrawSurface,
  geom: RenderGeometry,
): void {
  const expectChange = mode === 'change-preview';
  if (expectChange) {
    // change previews always arrive as signed level-2 grids
    if (payload.mode !== 'change') throw new LevelMismatchError(2, payload.level);
  } else if (payload.level !== viewLevel) {
    throw new LevelMismatchError(viewLevel, payload.level);
  }
  surface.clear(geom.viewportPx.width, geom.viewportPx.height);
  switch (payload.level) {
    case 1:
      renderLevel1(payload, surface, geom);
      break;
    case 2:
      renderLevel2(payload, surface, geom, mode);
      break;
    case 3:
    case 4:
      renderTimeline(payload, surface, geom);
      break;
    case 5:
      renderKeywords(payload, surface, geom);
      break;
    case 6:
      renderDocuments(payload, surface, geom);
      break;
  }
  renderLegend(surface, geom, mode);
}
