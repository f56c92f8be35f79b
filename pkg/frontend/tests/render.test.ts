import { describe, expect, it } from 'vitest';

import { LevelMismatchError, PRESENCE_COLOR, decodeBits, renderViewport } from '../src/render.js';
import { changeColor, predictionColor, samplePalettes } from '../src/scales.js';
import { RecordingSurface } from '../src/surface.js';
import type { Level1Payload, Level2Payload, Level34Payload } from '../src/types.js';

const geom = {
  camera: { x: 0, y: 0, scale: 10 },
  viewportPx: { width: 200, height: 200 },
};

function packBits(bits: number[]): string {
  const bytes = new Uint8Array(Math.ceil(bits.length / 8));
  bits.forEach((bit, k) => {
    if (bit) bytes[k >> 3] |= 1 << (7 - (k & 7));
  });
  return Buffer.from(bytes).toString('base64');
}

function level1(bits: number[], rows: number, cols: number): Level1Payload {
  return {
    level: 1,
    rows: [0, rows],
    cols: [0, cols],
    threshold: 0.5,
    n_cells: rows * cols,
    mode: 'prediction',
    encoding: 'packbits-base64',
    bits: packBits(bits),
  };
}

describe('level 1 rendering', () => {
  it('draws exactly the present cells', () => {
    const surface = new RecordingSurface();
    renderViewport(1, 'predictions', level1([1, 0, 0, 1], 2, 2), surface, geom);
    // legend swatches sit at the right edge; grid cells are in the top-left
    const rects = surface.calls.filter(
      (c) => c.op === 'rect' && c.color === PRESENCE_COLOR && c.x! < 100,
    );
    expect(rects).toHaveLength(2);
    expect(rects[0]).toMatchObject({ x: 0, y: 0 });
    expect(rects[1]).toMatchObject({ x: 10, y: 10 });
  });

  it('round-trips the packbits encoding', () => {
    const bits = [1, 0, 1, 1, 0, 0, 0, 1, 1, 0];
    const bytes = decodeBits(packBits(bits));
    bits.forEach((bit, k) => {
      expect((bytes[k >> 3] >> (7 - (k & 7))) & 1).toBe(bit);
    });
  });
});

describe('level 2 rendering', () => {
  const payload: Level2Payload = {
    level: 2,
    rows: [0, 2],
    cols: [0, 2],
    threshold: 0,
    n_cells: 4,
    mode: 'prediction',
    precision: 6,
    cells: { row: [0, 1], col: [1, 0], value: [0.25, 0.9] },
  };

  it('uses the sequential prediction scale', () => {
    const surface = new RecordingSurface();
    renderViewport(2, 'predictions', payload, surface, geom);
    const colors = surface.colorsUsed('rect');
    expect(colors.has(predictionColor(0.25))).toBe(true);
    expect(colors.has(predictionColor(0.9))).toBe(true);
  });

  it('change payloads use the diverging scale, disjoint from predictions', () => {
    const change: Level2Payload = {
      ...payload,
      mode: 'change',
      cells: { row: [0, 1], col: [0, 1], value: [-0.4, 0.4] },
    };
    const surface = new RecordingSurface();
    renderViewport(2, 'change-preview', change, surface, geom);
    const drawn = surface.colorsUsed('rect');
    expect(drawn.has(changeColor(-0.4))).toBe(true);
    expect(drawn.has(changeColor(0.4))).toBe(true);
    const { prediction } = samplePalettes(41);
    for (const color of drawn) {
      expect(prediction.includes(color)).toBe(false);
    }
  });

  it('refuses a prediction payload while the view expects a change preview', () => {
    const surface = new RecordingSurface();
    expect(() => renderViewport(2, 'change-preview', payload, surface, geom)).toThrow(
      LevelMismatchError,
    );
  });

  it('refuses a payload whose level disagrees with the view', () => {
    const surface = new RecordingSurface();
    expect(() => renderViewport(3, 'predictions', payload, surface, geom)).toThrow(
      LevelMismatchError,
    );
  });
});

describe('timeline rendering', () => {
  const payload: Level34Payload = {
    level: 3,
    rows: [0, 1],
    cols: [0, 1],
    threshold: 0,
    n_cells: 1,
    mode: 'prediction',
    cells: [
      {
        row: 0,
        col: 0,
        history: [0.2, 0.5, 0.8, 0.4],
        predicted: [0.7, 0.6],
        confidence: [0.8, 0.64],
      },
    ],
  };

  it('draws one shaft segment per past step and one head triangle per horizon', () => {
    const surface = new RecordingSurface();
    renderViewport(3, 'predictions', payload, surface, geom);
    const rects = surface.calls.filter((c) => c.op === 'rect');
    const triangles = surface.calls.filter((c) => c.op === 'triangle');
    expect(rects.filter((r) => r.color !== undefined).length).toBeGreaterThanOrEqual(4);
    expect(triangles).toHaveLength(2);
  });

  it('level 4 encodes values by segment height as well', () => {
    const level4 = { ...payload, level: 4 as const };
    const surface = new RecordingSurface();
    renderViewport(4, 'predictions', level4, surface, geom);
    const segs = surface.calls.filter(
      (c) => c.op === 'rect' && c.color === predictionColor(0.2),
    );
    const tall = surface.calls.filter(
      (c) => c.op === 'rect' && c.color === predictionColor(0.8),
    );
    expect(segs[0]!.h!).toBeLessThan(tall[0]!.h!);
  });
});
