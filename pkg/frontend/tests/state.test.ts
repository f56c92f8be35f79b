import { describe, expect, it } from 'vitest';

import { ViewState, levelForScale } from '../src/state.js';

describe('semantic zoom level derivation', () => {
  it('maps pixel scales to the six levels', () => {
    expect(levelForScale(2)).toBe(1);
    expect(levelForScale(8)).toBe(2);
    expect(levelForScale(30)).toBe(3);
    expect(levelForScale(80)).toBe(4);
    expect(levelForScale(160)).toBe(5);
    expect(levelForScale(400)).toBe(6);
  });

  it('is monotone: zooming in never decreases the level', () => {
    let previous = 0;
    for (let scale = 0.5; scale < 600; scale *= 1.07) {
      const level = levelForScale(scale);
      expect(level).toBeGreaterThanOrEqual(previous);
      previous = level;
    }
    expect(previous).toBe(6);
  });

  it('rejects non-positive scales', () => {
    expect(() => levelForScale(0)).toThrow();
    expect(() => levelForScale(-3)).toThrow();
  });
});

describe('camera and windows', () => {
  it('zooming about an anchor keeps the anchored cell fixed', () => {
    const state = new ViewState(1000, 800, { width: 500, height: 500 });
    state.camera = { x: 100, y: 50, scale: 4 };
    const anchor = { x: 200, y: 100 };
    const cellX = state.camera.x + anchor.x / state.camera.scale;
    state.zoomBy(2, anchor);
    expect(state.camera.x + anchor.x / state.camera.scale).toBeCloseTo(cellX, 9);
  });

  it('window covers the visible cells and clamps to bounds', () => {
    const state = new ViewState(30, 12, { width: 300, height: 300 });
    state.camera = { x: 0, y: 0, scale: 10 };
    const win = state.window();
    expect(win).toMatchObject({ row0: 0, col0: 0, row1: 30, col1: 12 });
    state.camera = { x: 10, y: 25, scale: 10 };
    const clamped = state.window();
    expect(clamped.row1).toBeLessThanOrEqual(30);
    expect(clamped.col1).toBeLessThanOrEqual(12);
    expect(clamped.row1).toBeGreaterThan(clamped.row0);
  });

  it('discards stale responses by request version', () => {
    const state = new ViewState(10, 10);
    const first = state.nextRequest();
    const second = state.nextRequest();
    expect(state.shouldApply(first)).toBe(false); // superseded
    expect(state.shouldApply(second)).toBe(true);
    expect(state.lastApplied).toBe(second);
  });

  it('change preview mode flips explicitly', () => {
    const state = new ViewState(10, 10);
    expect(state.mode).toBe('predictions');
    state.enterChangePreview();
    expect(state.mode).toBe('change-preview');
    state.exitChangePreview();
    expect(state.mode).toBe('predictions');
  });
});
